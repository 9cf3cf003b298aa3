use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use subseg::color::RgbImage;
use subseg::io;
use subseg::pipeline::{self, PipelineParams};
use subseg::synthgen::{DatasetManifest, Split};
use subseg::{Label, Level};

fn subseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subseg"))
        .args(args)
        .env_remove("SUBSEG_CONFIG")
        .output()
        .expect("spawn subseg")
}

fn ok(args: &[&str]) -> String {
    let out = subseg(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn gen_small(dir: &Path, extra: &[&str]) {
    let mut args = vec![
        "gen",
        "--out",
        p(dir),
        "--n",
        "8",
        "--n-test",
        "6",
        "--width",
        "96",
        "--height",
        "96",
        "--seed",
        "7",
    ];
    args.extend_from_slice(extra);
    ok(&args);
}

#[test]
fn gen_is_deterministic() {
    let t = tempfile::tempdir().unwrap();
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    gen_small(&a, &[]);
    gen_small(&b, &[]);
    assert_eq!(
        fs::read(a.join("manifest.jsonl")).unwrap(),
        fs::read(b.join("manifest.jsonl")).unwrap()
    );
    for entry in fs::read_dir(a.join("images")).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(
            fs::read(a.join("images").join(&name)).unwrap(),
            fs::read(b.join("images").join(&name)).unwrap()
        );
    }
}

#[test]
fn gen_zero_images_is_usage_error() {
    let t = tempfile::tempdir().unwrap();
    let out = subseg(&["gen", "--out", p(t.path()), "--n", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn gen_into_unwritable_location_is_io_error() {
    let t = tempfile::tempdir().unwrap();
    let file = t.path().join("plain_file");
    fs::write(&file, b"x").unwrap();
    let out = subseg(&[
        "gen",
        "--out",
        p(&file.join("sub")),
        "--n",
        "2",
        "--n-test",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bad_flag_is_usage_error() {
    assert_eq!(subseg(&["segment", "--bogus"]).status.code(), Some(1));
    assert_eq!(subseg(&["--help"]).status.code(), Some(0));
}

#[test]
fn segment_outputs() {
    let t = tempfile::tempdir().unwrap();
    let flat = t.path().join("flat.png");
    io::write_rgb(&flat, &RgbImage::filled(16, 16, [128, 128, 128]).unwrap()).unwrap();

    let out = subseg(&[
        "segment",
        p(&flat),
        "--level",
        "object",
        "--out",
        p(&t.path().join("m.png")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no foreground"));

    let map_path = t.path().join("map.png");
    ok(&[
        "segment",
        p(&flat),
        "--level",
        "subcomponent",
        "--k",
        "4",
        "--out",
        p(&map_path),
        "--render",
    ]);
    let (map, header) = io::read_label_map(&map_path).unwrap();
    assert_eq!(header.num_segments, 4);
    assert_eq!(map.num_segments(), 4);
    assert!(t.path().join("flat_overlay.png").exists());

    let again = t.path().join("map2.png");
    ok(&[
        "segment",
        p(&flat),
        "--level",
        "subcomponent",
        "--k",
        "4",
        "--out",
        p(&again),
    ]);
    assert_eq!(fs::read(&map_path).unwrap(), fs::read(&again).unwrap());
    assert_eq!(
        fs::read(io::header_path(&map_path)).unwrap(),
        fs::read(io::header_path(&again)).unwrap()
    );
}

#[test]
fn segment_generated_image_near_k() {
    let t = tempfile::tempdir().unwrap();
    gen_small(t.path(), &[]);
    let img = t.path().join("images").join("img_00000.png");
    let mask = t.path().join("masks").join("img_00000_object.png");
    let map_path = t.path().join("map.png");
    ok(&[
        "segment",
        p(&img),
        "--mask",
        p(&mask),
        "--k",
        "20",
        "--out",
        p(&map_path),
    ]);
    let (_, header) = io::read_label_map(&map_path).unwrap();
    assert!(
        (10..=30).contains(&header.num_segments),
        "{}",
        header.num_segments
    );

    let obj = t.path().join("obj.png");
    ok(&["segment", p(&img), "--level", "object", "--out", p(&obj)]);
    assert!(subseg::isolate::load_mask(&obj).unwrap().count() > 0);
}

#[test]
fn train_is_deterministic_and_rejects_single_class() {
    let t = tempfile::tempdir().unwrap();
    gen_small(t.path(), &[]);
    let manifest = t.path().join("manifest.jsonl");
    let (a, b) = (t.path().join("a.bin"), t.path().join("b.bin"));
    for out in [&a, &b] {
        ok(&[
            "train",
            "--manifest",
            p(&manifest),
            "--strategy",
            "subcomponent",
            "--k",
            "24",
            "--epochs",
            "3",
            "--out",
            p(out),
        ]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let single = t.path().join("single");
    gen_small(&single, &["--anomaly-probability", "0"]);
    let out = subseg(&[
        "train",
        "--manifest",
        p(&single.join("manifest.jsonl")),
        "--strategy",
        "object",
        "--out",
        p(&t.path().join("c.bin")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("single-class dataset"));
}

#[test]
fn config_file_and_flag_precedence() {
    let t = tempfile::tempdir().unwrap();
    let flat = t.path().join("flat.png");
    io::write_rgb(&flat, &RgbImage::filled(16, 16, [60, 60, 60]).unwrap()).unwrap();
    let cfg = t.path().join("run.cfg");
    fs::write(&cfg, "# defaults for this run\nk=16\n").unwrap();
    let map_path = t.path().join("map.png");

    ok(&[
        "--config",
        p(&cfg),
        "segment",
        p(&flat),
        "--out",
        p(&map_path),
    ]);
    assert_eq!(io::read_label_map(&map_path).unwrap().0.num_segments(), 16);

    ok(&[
        "--config",
        p(&cfg),
        "segment",
        p(&flat),
        "--out",
        p(&map_path),
        "--k",
        "4",
    ]);
    assert_eq!(io::read_label_map(&map_path).unwrap().0.num_segments(), 4);

    let out = Command::new(env!("CARGO_BIN_EXE_subseg"))
        .args(["segment", p(&flat), "--out", p(&map_path)])
        .env("SUBSEG_CONFIG", &cfg)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(io::read_label_map(&map_path).unwrap().0.num_segments(), 16);

    fs::write(&cfg, "colour=blue\n").unwrap();
    let out = subseg(&[
        "--config",
        p(&cfg),
        "segment",
        p(&flat),
        "--out",
        p(&map_path),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

fn write_scores(path: &Path, rows: &[(String, f64)]) {
    let mut text = String::from("crop_filename,anomaly_probability\n");
    for (name, prob) in rows {
        text.push_str(&format!("{name},{prob}\n"));
    }
    fs::write(path, text).unwrap();
}

fn region_row(csv: &str) -> Vec<String> {
    csv.lines()
        .find(|l| l.starts_with("subcomponent,region"))
        .unwrap()
        .split(',')
        .map(str::to_string)
        .collect()
}

#[test]
fn external_scorer_oracles() {
    let t = tempfile::tempdir().unwrap();
    gen_small(t.path(), &[]);
    let manifest_path = t.path().join("manifest.jsonl");
    let crops = t.path().join("crops");
    ok(&[
        "eval",
        "--manifest",
        p(&manifest_path),
        "--strategy",
        "subcomponent",
        "--k",
        "24",
        "--export-crops",
        p(&crops),
    ]);
    let request = fs::read_to_string(crops.join("request.csv")).unwrap();
    assert!(request.starts_with("crop_filename,image_id,level,segment_id\n"));

    let manifest = DatasetManifest::load(&manifest_path).unwrap();
    let params = PipelineParams {
        slic: subseg::slic::SlicParams::with_k(24),
        ..PipelineParams::default()
    };
    let images =
        pipeline::prepare_split(&manifest, Split::Test, Level::Subcomponent, &params).unwrap();
    let truth: Vec<(String, Label)> = images
        .iter()
        .flat_map(|i| i.regions.iter().map(|r| (r.name.clone(), r.truth)))
        .collect();
    assert_eq!(truth.len(), request.lines().count() - 1);
    for (name, _) in &truth {
        assert!(crops.join(name).exists(), "{name}");
    }
    let n_pos = truth.iter().filter(|(_, l)| *l == Label::Anomaly).count();
    let n_neg = truth.len() - n_pos;

    let perfect = t.path().join("perfect.csv");
    write_scores(
        &perfect,
        &truth
            .iter()
            .map(|(n, l)| (n.clone(), if *l == Label::Anomaly { 1.0 } else { 0.0 }))
            .collect::<Vec<_>>(),
    );
    let out_csv = t.path().join("perfect_metrics.csv");
    ok(&[
        "eval",
        "--manifest",
        p(&manifest_path),
        "--strategy",
        "subcomponent",
        "--k",
        "24",
        "--scores",
        p(&perfect),
        "--out",
        p(&out_csv),
    ]);
    let row = region_row(&fs::read_to_string(&out_csv).unwrap());
    assert_eq!(row[2], "100.00");
    assert_eq!(row[6], "0.00");
    assert_eq!(row[7..].join(","), format!("{n_pos},0,{n_neg},0"));

    let inverted = t.path().join("inverted.csv");
    write_scores(
        &inverted,
        &truth
            .iter()
            .map(|(n, l)| (n.clone(), if *l == Label::Anomaly { 0.0 } else { 1.0 }))
            .collect::<Vec<_>>(),
    );
    ok(&[
        "eval",
        "--manifest",
        p(&manifest_path),
        "--strategy",
        "subcomponent",
        "--k",
        "24",
        "--scores",
        p(&inverted),
        "--out",
        p(&out_csv),
    ]);
    let row = region_row(&fs::read_to_string(&out_csv).unwrap());
    assert_eq!(row[2], "0.00");
    assert_eq!(row[5], "0.00");
    assert_eq!(row[7..].join(","), format!("0,{n_neg},0,{n_pos}"));

    let missing = t.path().join("missing.csv");
    write_scores(
        &missing,
        &truth[1..]
            .iter()
            .map(|(n, _)| (n.clone(), 0.5))
            .collect::<Vec<_>>(),
    );
    let out = subseg(&[
        "eval",
        "--manifest",
        p(&manifest_path),
        "--strategy",
        "subcomponent",
        "--k",
        "24",
        "--scores",
        p(&missing),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compare_emits_four_rows_and_render_writes_overlay() {
    let t = tempfile::tempdir().unwrap();
    gen_small(t.path(), &[]);
    let manifest = t.path().join("manifest.jsonl");
    let res = t.path().join("res");
    let stdout = ok(&[
        "compare",
        "--manifest",
        p(&manifest),
        "--k",
        "24",
        "--epochs",
        "3",
        "--out",
        p(&res),
    ]);
    assert!(stdout.contains(" ms"));
    let csv = fs::read_to_string(res.join("comparison.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "strategy,granularity,A,P,F1,TP,FP,tp,fp,tn,fn");
    let keys: Vec<String> = lines[1..]
        .iter()
        .map(|l| l.split(',').take(2).collect::<Vec<_>>().join(","))
        .collect();
    assert_eq!(
        keys,
        [
            "object,region",
            "object,image",
            "subcomponent,region",
            "subcomponent,image"
        ]
    );
    assert_eq!(
        fs::read_to_string(res.join("comparison.txt"))
            .unwrap()
            .lines()
            .count(),
        5
    );

    let model = t.path().join("m.bin");
    ok(&[
        "train",
        "--manifest",
        p(&manifest),
        "--strategy",
        "subcomponent",
        "--k",
        "24",
        "--epochs",
        "2",
        "--out",
        p(&model),
    ]);
    let img = t.path().join("images").join("img_00009.png");
    let out_dir = t.path().join("overlays");
    ok(&[
        "render",
        p(&img),
        "--out",
        p(&out_dir),
        "--k",
        "24",
        "--model",
        p(&model),
    ]);
    let overlay = io::read_rgb(out_dir.join("img_00009_overlay.png")).unwrap();
    let original = io::read_rgb(&img).unwrap();
    assert_eq!(overlay.dims(), original.dims());
    assert_ne!(overlay, original);
}
