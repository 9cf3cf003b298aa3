#ifndef SUBSEG_H
#define SUBSEG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Call outcome. Non-zero values mirror the CLI exit codes where they overlap.
 */
typedef enum SubsegStatus {
  SUBSEG_STATUS_OK = 0,
  SUBSEG_STATUS_INVALID_ARGUMENT = 1,
  SUBSEG_STATUS_DATA_ERROR = 2,
  SUBSEG_STATUS_IO_ERROR = 3,
  SUBSEG_STATUS_NULL_POINTER = 4,
  SUBSEG_STATUS_PANIC = 5,
} SubsegStatus;

/**
 * Opaque superpixel label map.
 */
typedef struct SubsegLabelMap SubsegLabelMap;

/**
 * Opaque trained region classifier.
 */
typedef struct SubsegModel SubsegModel;

/**
 * SLIC parameters. Zero `max_iters` selects the default.
 */
typedef struct SubsegSlicParams {
  size_t k;
  double m;
  size_t max_iters;
} SubsegSlicParams;

/**
 * Metrics for confusion counts; rates are fractions in [0, 1].
 */
typedef struct SubsegMetrics {
  double accuracy;
  double precision;
  double f1;
  double tp_rate;
  double fp_rate;
} SubsegMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *subseg_last_error(void);

/**
 * Convert one 8-bit sRGB triple to CIELAB (D65).
 *
 * # Safety
 * `rgb` must point to 3 bytes and `lab_out` to 3 writable doubles.
 */
enum SubsegStatus subseg_srgb_to_lab(const uint8_t *rgb, double *lab_out);

/**
 * Combined colour and spatial distance between a center `(l, a, b, x, y)`
 * and a pixel `(l, a, b, x, y)` for compactness `m` and grid interval `s`.
 *
 * # Safety
 * `center` and `pixel` must each point to 5 doubles; `out` must be writable.
 */
enum SubsegStatus subseg_labxy_distance(const double *center,
                                        const double *pixel,
                                        double m,
                                        double s,
                                        double *out);

/**
 * Default parameters (K = 256, m = 20, 10 iterations).
 */
struct SubsegSlicParams subseg_slic_default_params(void);

/**
 * Segment an interleaved RGB image into superpixels. `mask` may be null;
 * otherwise it holds `width * height` bytes and non-zero marks the object.
 *
 * # Safety
 * Pointers must reference buffers of the stated sizes; `out` must be
 * writable. On success `*out` owns a handle for [`subseg_label_map_free`].
 */
enum SubsegStatus subseg_slic_segment(const uint8_t *rgb,
                                      size_t width,
                                      size_t height,
                                      const uint8_t *mask,
                                      struct SubsegSlicParams params,
                                      struct SubsegLabelMap **out);

/**
 * Number of segments; 0 for a null handle.
 *
 * # Safety
 * `map` must be null or a live handle.
 */
size_t subseg_label_map_num_segments(const struct SubsegLabelMap *map);

/**
 * Width and height; zeros for a null handle.
 *
 * # Safety
 * `map` must be null or a live handle; `width`/`height` must be writable.
 */
void subseg_label_map_dims(const struct SubsegLabelMap *map, size_t *width, size_t *height);

/**
 * Row-major labels, `width * height` entries; background is `UINT32_MAX`.
 * Borrowed from the handle.
 *
 * # Safety
 * `map` must be null or a live handle.
 */
const uint32_t *subseg_label_map_labels(const struct SubsegLabelMap *map);

/**
 * # Safety
 * `map` must be null or a handle not yet freed.
 */
void subseg_label_map_free(struct SubsegLabelMap *map);

/**
 * Luminance-threshold object isolation. Writes `width * height` bytes of
 * 0/255 into `mask_out`.
 *
 * # Safety
 * `rgb` holds `width * height * 3` bytes, `mask_out` `width * height`.
 */
enum SubsegStatus subseg_threshold_segment(const uint8_t *rgb,
                                           size_t width,
                                           size_t height,
                                           double threshold,
                                           uint8_t *mask_out);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable. On
 * success `*out` owns a handle for [`subseg_model_free`].
 */
enum SubsegStatus subseg_model_load(const char *path, struct SubsegModel **out);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void subseg_model_free(struct SubsegModel *model);

/**
 * Classify one crop. `is_anomaly` receives 1 or 0, `anomaly_probability`
 * the softmax probability of the anomaly class.
 *
 * # Safety
 * `model` must be live; `rgb` holds `width * height * 3` bytes; outputs
 * must be writable.
 */
enum SubsegStatus subseg_model_predict(const struct SubsegModel *model,
                                       const uint8_t *rgb,
                                       size_t width,
                                       size_t height,
                                       int32_t *is_anomaly,
                                       double *anomaly_probability);

/**
 * # Safety
 * `out` must be writable.
 */
enum SubsegStatus subseg_compute_metrics(uint64_t tp,
                                         uint64_t fp,
                                         uint64_t tn,
                                         uint64_t fn_,
                                         struct SubsegMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUBSEG_H */
