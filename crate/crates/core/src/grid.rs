//! Dense 2-D rasters, binary morphology, connected components and
//! per-instance centroids.
//!
//! Everything here works on row-major grids indexed by `(row, col)`.
//! Connectivity is 8-neighbour throughout the crate.

use std::collections::VecDeque;
use std::fmt;
use std::ops::{Deref, DerefMut};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, shape_err, Error, Result};

/// Row/column offsets of the 8-neighbourhood.
pub const NEIGHBORS_8: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Row-major 2-D grid of `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(height: usize, width: usize, value: T) -> Self {
        assert!(height >= 1 && width >= 1, "grid must be at least 1x1");
        Grid {
            height,
            width,
            data: vec![value; height * width],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 {
            return shape_err(format!("grid must be at least 1x1, got {height}x{width}"));
        }
        if data.len() != height * width {
            return shape_err(format!(
                "{} values for a {height}x{width} grid",
                data.len()
            ));
        }
        Ok(Grid {
            height,
            width,
            data,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        assert!(height >= 1 && width >= 1, "grid must be at least 1x1");
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Grid {
            height,
            width,
            data,
        }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, r: usize, c: usize) -> usize {
        r * self.width + c
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> &T {
        &self.data[r * self.width + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: T) {
        let i = r * self.width + c;
        self.data[i] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// In-bounds neighbour `(r + dr, c + dc)`, if any.
    #[inline]
    pub fn offset(&self, r: usize, c: usize, dr: isize, dc: isize) -> Option<(usize, usize)> {
        let nr = r as isize + dr;
        let nc = c as isize + dc;
        if nr < 0 || nc < 0 || nr >= self.height as isize || nc >= self.width as isize {
            None
        } else {
            Some((nr as usize, nc as usize))
        }
    }

    pub fn same_shape<U>(&self, other: &Grid<U>) -> bool {
        self.shape() == other.shape()
    }
}

/// Binary mask.
pub type Mask = Grid<bool>;

impl Grid<bool> {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn and(&self, other: &Mask) -> Mask {
        assert!(self.same_shape(other));
        Grid {
            height: self.height,
            width: self.width,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a && b).collect(),
        }
    }

    pub fn or(&self, other: &Mask) -> Mask {
        assert!(self.same_shape(other));
        Grid {
            height: self.height,
            width: self.width,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a || b).collect(),
        }
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.same_shape(other) && self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }
}

/// Per-pixel instance identifiers; 0 is background.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap(Grid<u32>);

impl LabelMap {
    pub fn new(grid: Grid<u32>) -> Self {
        LabelMap(grid)
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        LabelMap(Grid::filled(height, width, 0))
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<u32>) -> Result<Self> {
        Ok(LabelMap(Grid::from_vec(height, width, data)?))
    }

    pub fn into_grid(self) -> Grid<u32> {
        self.0
    }

    pub fn foreground(&self) -> Mask {
        self.0.map(|&v| v != 0)
    }

    /// Sorted distinct non-zero ids.
    pub fn ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.0.as_slice().iter().copied().filter(|&v| v != 0).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn instance_count(&self) -> usize {
        self.ids().len()
    }

    pub fn instance_mask(&self, id: u32) -> Mask {
        self.0.map(|&v| v == id && id != 0)
    }

    /// Renumbers instances to `1..=n`, preserving the order of the old ids.
    pub fn relabel_sequential(&self) -> LabelMap {
        let ids = self.ids();
        LabelMap(self.0.map(|&v| {
            if v == 0 {
                0
            } else {
                ids.binary_search(&v).map(|i| i as u32 + 1).unwrap_or(0)
            }
        }))
    }

    /// Keeps only the listed ids (which must be sorted), zeroing all others.
    pub fn retain_ids(&self, keep_sorted: &[u32]) -> LabelMap {
        LabelMap(self.0.map(|&v| {
            if v != 0 && keep_sorted.binary_search(&v).is_ok() {
                v
            } else {
                0
            }
        }))
    }
}

impl Deref for LabelMap {
    type Target = Grid<u32>;
    fn deref(&self) -> &Grid<u32> {
        &self.0
    }
}

impl DerefMut for LabelMap {
    fn deref_mut(&mut self) -> &mut Grid<u32> {
        &mut self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeShape {
    Disk,
    Square,
}

/// Symmetric structuring element centred on the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuringElement {
    pub shape: SeShape,
    pub radius: usize,
}

impl StructuringElement {
    pub fn disk(radius: usize) -> Self {
        assert!(radius >= 1, "structuring element radius must be >= 1");
        StructuringElement {
            shape: SeShape::Disk,
            radius,
        }
    }

    pub fn square(radius: usize) -> Self {
        assert!(radius >= 1, "structuring element radius must be >= 1");
        StructuringElement {
            shape: SeShape::Square,
            radius,
        }
    }

    /// Offsets `(dr, dc)` covered by the element. A disk holds the offsets
    /// with `dr² + dc² ≤ radius²`.
    pub fn offsets(&self) -> Vec<(isize, isize)> {
        let r = self.radius as isize;
        let mut out = Vec::new();
        for dr in -r..=r {
            for dc in -r..=r {
                let inside = match self.shape {
                    SeShape::Square => true,
                    SeShape::Disk => dr * dr + dc * dc <= r * r,
                };
                if inside {
                    out.push((dr, dc));
                }
            }
        }
        out
    }
}

/// Binary dilation; the element is clipped at the grid border.
pub fn dilate(mask: &Mask, se: &StructuringElement) -> Mask {
    let offsets = se.offsets();
    let (h, w) = mask.shape();
    let mut out = Grid::filled(h, w, false);
    for r in 0..h {
        for c in 0..w {
            if !*mask.get(r, c) {
                continue;
            }
            for &(dr, dc) in &offsets {
                if let Some((nr, nc)) = mask.offset(r, c, dr, dc) {
                    out.set(nr, nc, true);
                }
            }
        }
    }
    out
}

/// Labels 8-connected foreground components `1..=n` in raster order of each
/// component's first pixel.
pub fn connected_components(mask: &Mask) -> LabelMap {
    let (h, w) = mask.shape();
    let mut labels = Grid::filled(h, w, 0u32);
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..h * w {
        if !mask.as_slice()[start] || labels.as_slice()[start] != 0 {
            continue;
        }
        next += 1;
        labels.as_mut_slice()[start] = next;
        queue.push_back((start / w, start % w));
        while let Some((r, c)) = queue.pop_front() {
            for &(dr, dc) in &NEIGHBORS_8 {
                if let Some((nr, nc)) = mask.offset(r, c, dr, dc) {
                    let i = nr * w + nc;
                    if mask.as_slice()[i] && labels.as_slice()[i] == 0 {
                        labels.as_mut_slice()[i] = next;
                        queue.push_back((nr, nc));
                    }
                }
            }
        }
    }
    LabelMap(labels)
}

/// Per-instance centroid and area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceStats {
    pub id: u32,
    pub row: f64,
    pub col: f64,
    pub area: usize,
}

/// Unweighted centroids of every instance, ascending by id.
pub fn instance_centroids(labels: &LabelMap) -> Vec<InstanceStats> {
    let ids = labels.ids();
    let mut acc = vec![(0u64, 0u64, 0usize); ids.len()];
    let w = labels.width();
    for (i, &v) in labels.as_slice().iter().enumerate() {
        if v == 0 {
            continue;
        }
        let k = ids.binary_search(&v).expect("id present");
        acc[k].0 += (i / w) as u64;
        acc[k].1 += (i % w) as u64;
        acc[k].2 += 1;
    }
    ids.iter()
        .zip(acc)
        .map(|(&id, (sr, sc, n))| InstanceStats {
            id,
            row: sr as f64 / n as f64,
            col: sc as f64 / n as f64,
            area: n,
        })
        .collect()
}

/// Zeroes every 8-connected component of `mask` with fewer than `min_area`
/// pixels and returns the removed pixels.
pub fn remove_small_components(mask: &mut Mask, min_area: usize) -> Mask {
    let labels = connected_components(mask);
    let n = labels.as_slice().iter().copied().max().unwrap_or(0) as usize;
    let mut areas = vec![0usize; n + 1];
    for &v in labels.as_slice() {
        areas[v as usize] += 1;
    }
    let removed = labels.map(|&v| v != 0 && areas[v as usize] < min_area);
    for (m, &gone) in mask.as_mut_slice().iter_mut().zip(removed.as_slice()) {
        if gone {
            *m = false;
        }
    }
    removed
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Magnification {
    #[serde(rename = "20x")]
    X20,
    #[serde(rename = "40x")]
    X40,
}

impl FromStr for Magnification {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "20x" | "20" => Ok(Magnification::X20),
            "40x" | "40" => Ok(Magnification::X40),
            other => arg_err(format!("unknown magnification '{other}' (expected 20x or 40x)")),
        }
    }
}

impl fmt::Display for Magnification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Magnification::X20 => write!(f, "20x"),
            Magnification::X40 => write!(f, "40x"),
        }
    }
}

/// Magnification-dependent morphology and matching parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MagProfile {
    pub magnification: Magnification,
    /// Centroid matching radius in pixels.
    pub match_radius: f64,
    pub gt_dilate: StructuringElement,
    pub post_dilate: StructuringElement,
    /// Default minimum instance area for post-processing.
    pub min_instance_area: usize,
    /// Components smaller than this are reassigned during ground-truth cleanup.
    pub cleanup_min_area: usize,
}

impl MagProfile {
    pub fn new(magnification: Magnification) -> Self {
        match magnification {
            Magnification::X20 => MagProfile {
                magnification,
                match_radius: 6.0,
                gt_dilate: StructuringElement::disk(1),
                post_dilate: StructuringElement::disk(1),
                min_instance_area: 10,
                cleanup_min_area: 4,
            },
            Magnification::X40 => MagProfile {
                magnification,
                match_radius: 12.0,
                gt_dilate: StructuringElement::disk(2),
                post_dilate: StructuringElement::disk(2),
                min_instance_area: 30,
                cleanup_min_area: 4,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask_from(h: usize, w: usize, on: &[(usize, usize)]) -> Mask {
        let mut m = Grid::filled(h, w, false);
        for &(r, c) in on {
            m.set(r, c, true);
        }
        m
    }

    #[test]
    fn empty_mask_has_no_components() {
        let labels = connected_components(&Grid::filled(4, 4, false));
        assert!(labels.as_slice().iter().all(|&v| v == 0));
    }

    #[test]
    fn diagonal_neighbours_are_connected() {
        let labels = connected_components(&mask_from(2, 2, &[(0, 0), (1, 1)]));
        assert_eq!(labels.as_slice(), &[1, 0, 0, 1]);
    }

    #[test]
    fn disjoint_pixels_get_raster_ordered_ids() {
        let labels = connected_components(&mask_from(1, 4, &[(0, 0), (0, 3)]));
        assert_eq!(labels.as_slice(), &[1, 0, 0, 2]);
    }

    #[test]
    fn dilate_center_square() {
        let out = dilate(&mask_from(5, 5, &[(2, 2)]), &StructuringElement::square(1));
        for r in 0..5 {
            for c in 0..5 {
                let inside = (1..=3).contains(&r) && (1..=3).contains(&c);
                assert_eq!(*out.get(r, c), inside, "({r},{c})");
            }
        }
    }

    #[test]
    fn dilate_saturated_and_corner() {
        let full = Grid::filled(3, 3, true);
        assert_eq!(dilate(&full, &StructuringElement::disk(2)), full);
        let out = dilate(&mask_from(4, 4, &[(0, 0)]), &StructuringElement::square(1));
        assert_eq!(out, mask_from(4, 4, &[(0, 0), (0, 1), (1, 0), (1, 1)]));
    }

    #[test]
    fn disk_radius_one_is_a_cross() {
        let mut offs = StructuringElement::disk(1).offsets();
        offs.sort();
        assert_eq!(offs, vec![(-1, 0), (0, -1), (0, 0), (0, 1), (1, 0)]);
        assert_eq!(StructuringElement::disk(2).offsets().len(), 13);
    }

    #[test]
    fn centroid_examples() {
        let mut labels = LabelMap::zeros(5, 5);
        labels.set(2, 3, 7);
        let stats = instance_centroids(&labels);
        assert_eq!(stats, vec![InstanceStats { id: 7, row: 2.0, col: 3.0, area: 1 }]);

        let mut labels = LabelMap::zeros(4, 4);
        for (r, c) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            labels.set(r, c, 1);
        }
        labels.set(3, 3, 2);
        let stats = instance_centroids(&labels);
        assert_eq!(stats.len(), 2);
        assert_eq!((stats[0].id, stats[0].row, stats[0].col, stats[0].area), (1, 0.5, 0.5, 4));
        assert_eq!(stats[1].id, 2);
        assert!(instance_centroids(&LabelMap::zeros(3, 3)).is_empty());
    }

    #[test]
    fn small_components_removed() {
        let mut m = mask_from(5, 5, &[(0, 0), (0, 1), (4, 4), (3, 3), (2, 2)]);
        let removed = remove_small_components(&mut m, 3);
        assert_eq!(removed.count(), 2);
        assert_eq!(m.count(), 3);
    }

    #[test]
    fn profile_radii() {
        assert_eq!(MagProfile::new(Magnification::X20).match_radius, 6.0);
        assert_eq!(MagProfile::new(Magnification::X40).match_radius, 12.0);
        assert_eq!("40x".parse::<Magnification>().unwrap(), Magnification::X40);
        assert!("10x".parse::<Magnification>().is_err());
    }

    fn arb_mask() -> impl Strategy<Value = Mask> {
        (1usize..12, 1usize..12).prop_flat_map(|(h, w)| {
            proptest::collection::vec(any::<bool>(), h * w)
                .prop_map(move |v| Grid::from_vec(h, w, v).unwrap())
        })
    }

    fn arb_se() -> impl Strategy<Value = StructuringElement> {
        (any::<bool>(), 1usize..4).prop_map(|(disk, r)| {
            if disk {
                StructuringElement::disk(r)
            } else {
                StructuringElement::square(r)
            }
        })
    }

    /// Canonical partition: each pixel mapped to the smallest flat index of
    /// its component.
    fn partition(labels: &LabelMap) -> Vec<usize> {
        let mut first = std::collections::HashMap::new();
        labels
            .as_slice()
            .iter()
            .enumerate()
            .map(|(i, &v)| if v == 0 { usize::MAX } else { *first.entry(v).or_insert(i) })
            .collect()
    }

    proptest! {
        #[test]
        fn dilation_extensive_and_monotone(m in arb_mask(), se in arb_se(), seed in any::<u64>()) {
            let d = dilate(&m, &se);
            prop_assert!(m.is_subset_of(&d));
            // a superset built by switching on pseudo-random extra pixels
            let mut bigger = m.clone();
            for (i, v) in bigger.as_mut_slice().iter_mut().enumerate() {
                if (seed >> (i % 64)) & 1 == 1 { *v = true; }
            }
            prop_assert!(d.is_subset_of(&dilate(&bigger, &se)));
        }

        #[test]
        fn components_partition_is_stable_under_transpose(m in arb_mask()) {
            // Labelling the transposed mask visits pixels in a different order;
            // the partition must be the same once mapped back.
            let (h, w) = m.shape();
            let t = Grid::from_fn(w, h, |r, c| *m.get(c, r));
            let a = connected_components(&m);
            let bt = connected_components(&t);
            let b = LabelMap::new(Grid::from_fn(h, w, |r, c| *bt.get(c, r)));
            prop_assert_eq!(partition(&a), partition(&b));
        }

        #[test]
        fn centroid_areas_sum_to_foreground(m in arb_mask()) {
            let labels = connected_components(&m);
            let total: usize = instance_centroids(&labels).iter().map(|s| s.area).sum();
            prop_assert_eq!(total, m.count());
        }
    }
}
