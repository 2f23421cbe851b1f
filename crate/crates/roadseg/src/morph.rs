//! Binary morphology: component labeling, largest-region extraction and
//! hole filling by conditional dilation.

use crate::raster::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(i32, i32)] {
        match self {
            Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
            Connectivity::Eight => &[
                (1, 0),
                (-1, 0),
                (0, 1),
                (0, -1),
                (1, 1),
                (1, -1),
                (-1, 1),
                (-1, -1),
            ],
        }
    }
}

/// Component labels per pixel; 0 is background, foreground labels start at 1
/// and are assigned in raster-scan first-encounter order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    component_count: u32,
}

impl LabelMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn component_count(&self) -> u32 {
        self.component_count
    }

    /// Pixel coordinates of one component, in raster order.
    pub fn component_pixels(&self, label: u32) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if self.label(x, y) == label {
                    out.push((x, y));
                }
            }
        }
        out
    }
}

/// Offset-set structuring element; must contain the origin and be symmetric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuringElement {
    offsets: Vec<(i32, i32)>,
}

impl StructuringElement {
    pub fn new(offsets: Vec<(i32, i32)>) -> Self {
        assert!(offsets.contains(&(0, 0)), "element must contain the origin");
        for &(dx, dy) in &offsets {
            assert!(
                offsets.contains(&(-dx, -dy)),
                "element must be symmetric: missing {:?}",
                (-dx, -dy)
            );
        }
        Self { offsets }
    }

    /// The 4-connected cross, the default for hole filling.
    pub fn cross() -> Self {
        Self::new(vec![(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)])
    }

    /// Full 3x3 square.
    pub fn square() -> Self {
        let mut offsets = Vec::new();
        for dy in -1..=1 {
            for dx in -1..=1 {
                offsets.push((dx, dy));
            }
        }
        Self::new(offsets)
    }

    pub fn offsets(&self) -> &[(i32, i32)] {
        &self.offsets
    }
}

/// Labels connected foreground regions. Equal labels mean same component
/// under the chosen connectivity.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> LabelMap {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = vec![0u32; w * h];
    let mut next = 0u32;
    let mut queue = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) || labels[y * w + x] != 0 {
                continue;
            }
            next += 1;
            labels[y * w + x] = next;
            queue.push((x, y));
            while let Some((cx, cy)) = queue.pop() {
                for &(dx, dy) in connectivity.offsets() {
                    let nx = cx as i64 + i64::from(dx);
                    let ny = cy as i64 + i64::from(dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let (nx, ny) = (nx as usize, ny as usize);
                    if mask.get(nx, ny) && labels[ny * w + nx] == 0 {
                        labels[ny * w + nx] = next;
                        queue.push((nx, ny));
                    }
                }
            }
        }
    }
    LabelMap {
        width: w,
        height: h,
        labels,
        component_count: next,
    }
}

/// Mask of the component with the most pixels; ties go to the smallest label
/// (earliest raster-scan encounter). Empty input gives an empty mask.
pub fn largest_component(labels: &LabelMap) -> BinaryMask {
    let mut sizes = vec![0usize; labels.component_count() as usize + 1];
    for &l in labels.labels() {
        sizes[l as usize] += 1;
    }
    let mut best = 0u32;
    let mut best_size = 0usize;
    for label in 1..=labels.component_count() {
        let size = sizes[label as usize];
        if size > best_size {
            best = label;
            best_size = size;
        }
    }
    BinaryMask::new(
        labels.width(),
        labels.height(),
        labels.labels().iter().map(|&l| best != 0 && l == best).collect(),
    )
}

/// Background pixels that cannot reach the image border through 4-connected
/// background moves: the holes of the mask.
fn interior_background(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let mut reachable = vec![false; w * h];
    let mut queue = Vec::new();
    let push = |x: usize, y: usize, reachable: &mut Vec<bool>, queue: &mut Vec<(usize, usize)>| {
        if !mask.get(x, y) && !reachable[y * w + x] {
            reachable[y * w + x] = true;
            queue.push((x, y));
        }
    };
    for x in 0..w {
        push(x, 0, &mut reachable, &mut queue);
        push(x, h - 1, &mut reachable, &mut queue);
    }
    for y in 0..h {
        push(0, y, &mut reachable, &mut queue);
        push(w - 1, y, &mut reachable, &mut queue);
    }
    while let Some((cx, cy)) = queue.pop() {
        for &(dx, dy) in Connectivity::Four.offsets() {
            let nx = cx as i64 + i64::from(dx);
            let ny = cy as i64 + i64::from(dy);
            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                continue;
            }
            push(nx as usize, ny as usize, &mut reachable, &mut queue);
        }
    }
    BinaryMask::from_fn(w, h, |x, y| !mask.get(x, y) && !reachable[y * w + x])
}

/// Fills enclosed holes by conditional dilation: seeded from the interior
/// background, the fill set is dilated by `element` and intersected with the
/// mask complement each step until it stops changing, then unioned with the
/// mask. Background regions touching the border are left open.
pub fn fill_holes(mask: &BinaryMask, element: &StructuringElement) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let mut fill = interior_background(mask);
    loop {
        let mut grown = fill.clone();
        let mut changed = false;
        for y in 0..h {
            for x in 0..w {
                if !fill.get(x, y) {
                    continue;
                }
                for &(dx, dy) in element.offsets() {
                    let nx = x as i64 + i64::from(dx);
                    let ny = y as i64 + i64::from(dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let (nx, ny) = (nx as usize, ny as usize);
                    // Constrain growth to the mask complement.
                    if !mask.get(nx, ny) && !grown.get(nx, ny) {
                        grown.set(nx, ny, true);
                        changed = true;
                    }
                }
            }
        }
        fill = grown;
        if !changed {
            break;
        }
    }
    BinaryMask::from_fn(w, h, |x, y| mask.get(x, y) || fill.get(x, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// Recursive flood fill used as the labeling oracle.
    fn flood_fill_partition(mask: &BinaryMask, connectivity: Connectivity) -> Vec<u32> {
        let (w, h) = (mask.width(), mask.height());
        let mut labels = vec![0u32; w * h];
        fn visit(
            mask: &BinaryMask,
            labels: &mut [u32],
            x: usize,
            y: usize,
            label: u32,
            connectivity: Connectivity,
        ) {
            labels[y * mask.width() + x] = label;
            for &(dx, dy) in connectivity.offsets() {
                let nx = x as i64 + i64::from(dx);
                let ny = y as i64 + i64::from(dy);
                if nx < 0 || ny < 0 || nx >= mask.width() as i64 || ny >= mask.height() as i64 {
                    continue;
                }
                let (nx, ny) = (nx as usize, ny as usize);
                if mask.get(nx, ny) && labels[ny * mask.width() + nx] == 0 {
                    visit(mask, labels, nx, ny, label, connectivity);
                }
            }
        }
        let mut next = 0;
        for y in 0..h {
            for x in 0..w {
                if mask.get(x, y) && labels[y * w + x] == 0 {
                    next += 1;
                    visit(mask, &mut labels, x, y, next, connectivity);
                }
            }
        }
        labels
    }

    /// Hole-filling oracle: complement of border-reachable background.
    fn border_flood_fill(mask: &BinaryMask) -> BinaryMask {
        let interior = interior_background(mask);
        BinaryMask::from_fn(mask.width(), mask.height(), |x, y| {
            mask.get(x, y) || interior.get(x, y)
        })
    }

    fn random_mask(rng: &mut impl Rng, w: usize, h: usize) -> BinaryMask {
        BinaryMask::from_fn(w, h, |_, _| rng.gen_bool(0.5))
    }

    #[test]
    fn empty_mask_has_no_components() {
        let mask = BinaryMask::filled(4, 4, false);
        assert_eq!(connected_components(&mask, Connectivity::Eight).component_count(), 0);
        assert_eq!(largest_component(&connected_components(&mask, Connectivity::Eight)), mask);
    }

    #[test]
    fn diagonal_pixels_depend_on_connectivity() {
        let mut mask = BinaryMask::filled(3, 3, false);
        mask.set(0, 0, true);
        mask.set(1, 1, true);
        assert_eq!(connected_components(&mask, Connectivity::Four).component_count(), 2);
        assert_eq!(connected_components(&mask, Connectivity::Eight).component_count(), 1);
    }

    #[test]
    fn labels_follow_raster_scan_order() {
        // Two components; the one whose first pixel comes first in raster
        // order gets label 1.
        let mut mask = BinaryMask::filled(5, 2, false);
        mask.set(3, 0, true);
        mask.set(0, 1, true);
        let labels = connected_components(&mask, Connectivity::Four);
        assert_eq!(labels.label(3, 0), 1);
        assert_eq!(labels.label(0, 1), 2);
    }

    #[test]
    fn largest_component_breaks_ties_by_label() {
        let mut mask = BinaryMask::filled(5, 1, false);
        mask.set(0, 0, true);
        mask.set(2, 0, true);
        let largest = largest_component(&connected_components(&mask, Connectivity::Four));
        assert!(largest.get(0, 0));
        assert!(!largest.get(2, 0));
    }

    #[test]
    fn labeling_matches_flood_fill_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let mask = random_mask(&mut rng, 16, 16);
            for connectivity in [Connectivity::Four, Connectivity::Eight] {
                let got = connected_components(&mask, connectivity);
                let want = flood_fill_partition(&mask, connectivity);
                assert_eq!(got.labels(), want.as_slice());
            }
        }
    }

    #[test]
    fn ring_center_is_filled() {
        let mask = BinaryMask::from_fn(5, 5, |x, y| {
            (1..=3).contains(&x) && (1..=3).contains(&y) && !(x == 2 && y == 2)
        });
        let filled = fill_holes(&mask, &StructuringElement::cross());
        assert!(filled.get(2, 2));
        assert_eq!(filled.count_ones(), mask.count_ones() + 1);
    }

    #[test]
    fn border_touching_background_stays_open() {
        // A C-shaped region: the inner notch opens to the border.
        let mask = BinaryMask::from_fn(5, 5, |x, y| {
            ((1..=3).contains(&x) && (y == 1 || y == 3)) || (x == 1 && y == 2)
        });
        let filled = fill_holes(&mask, &StructuringElement::cross());
        assert_eq!(filled, border_flood_fill(&mask));
        assert!(!filled.get(4, 2));
    }

    #[test]
    fn hole_free_mask_is_fixpoint() {
        let mask = BinaryMask::from_fn(6, 4, |x, _| x < 3);
        assert_eq!(fill_holes(&mask, &StructuringElement::cross()), mask);
    }

    #[test]
    fn fill_holes_matches_border_flood_oracle_and_is_idempotent() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(22);
        let element = StructuringElement::cross();
        for _ in 0..300 {
            let mask = random_mask(&mut rng, 12, 12);
            let filled = fill_holes(&mask, &element);
            assert_eq!(filled, border_flood_fill(&mask));
            assert_eq!(fill_holes(&filled, &element), filled);
            for (a, b) in mask.bits().iter().zip(filled.bits()) {
                assert!(!a || *b, "fill must be a superset");
            }
        }
    }
}
