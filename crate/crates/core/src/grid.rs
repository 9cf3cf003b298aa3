//! 4-connected component labelling on row-major grids.

/// Sentinel for pixels that belong to no component.
pub const NO_COMPONENT: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    /// Value shared by every pixel of the component.
    pub value: u32,
    pub size: usize,
    /// Raster index of the first pixel met in row-major order.
    pub first: usize,
}

/// Label the 4-connected components of equal-valued pixels. Pixels equal to
/// `skip` (if any) are left out. Components are numbered in raster order of
/// their first pixel.
pub fn components(
    width: usize,
    height: usize,
    values: &[u32],
    skip: Option<u32>,
) -> (Vec<u32>, Vec<Component>) {
    assert_eq!(values.len(), width * height);
    let mut ids = vec![NO_COMPONENT; values.len()];
    let mut comps = Vec::new();
    let mut stack = Vec::new();
    for start in 0..values.len() {
        if ids[start] != NO_COMPONENT || Some(values[start]) == skip {
            continue;
        }
        let value = values[start];
        let id = comps.len() as u32;
        let mut size = 0;
        ids[start] = id;
        stack.push(start);
        while let Some(p) = stack.pop() {
            size += 1;
            let (x, y) = (p % width, p / width);
            let mut visit = |q: usize| {
                if ids[q] == NO_COMPONENT && values[q] == value {
                    ids[q] = id;
                    stack.push(q);
                }
            };
            if x > 0 {
                visit(p - 1);
            }
            if x + 1 < width {
                visit(p + 1);
            }
            if y > 0 {
                visit(p - width);
            }
            if y + 1 < height {
                visit(p + width);
            }
        }
        comps.push(Component {
            value,
            size,
            first: start,
        });
    }
    (ids, comps)
}

/// Indices of the 4-neighbours of `p` that lie inside the grid.
#[inline]
pub fn neighbors4(width: usize, height: usize, p: usize) -> impl Iterator<Item = usize> {
    let (x, y) = (p % width, p / width);
    [
        (x > 0).then(|| p - 1),
        (x + 1 < width).then(|| p + 1),
        (y > 0).then(|| p - width),
        (y + 1 < height).then(|| p + width),
    ]
    .into_iter()
    .flatten()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkerboard_is_all_singletons() {
        let v: Vec<u32> = (0..16).map(|i| ((i % 4) + (i / 4)) as u32 % 2).collect();
        let (_, comps) = components(4, 4, &v, None);
        assert_eq!(comps.len(), 16);
        assert!(comps.iter().all(|c| c.size == 1));
    }

    #[test]
    fn skip_value_is_excluded() {
        let v = vec![0, 1, 0, 1, 1, 0, 0, 0, 0];
        let (ids, comps) = components(3, 3, &v, Some(1));
        assert_eq!(comps.len(), 2);
        assert_eq!(ids[1], NO_COMPONENT);
        assert_eq!(comps[0].size, 1);
        assert_eq!(comps[1].size, 5);
        assert_eq!(comps[1].first, 2);
    }
}
