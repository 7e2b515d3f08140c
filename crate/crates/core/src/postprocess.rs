//! Turns the three network outputs (ternary probabilities, distance maps,
//! optional cell-type probabilities) into an instance label map and a
//! per-instance type table.
//!
//! Pipeline:
//!
//! 1. foreground `FG = P_BD + P_CB > P_BG`
//! 2. edge mask `E` from oriented Sobel responses of the distance maps
//! 3. markers: pixels where CB wins the argmax and `E = 0`, labelled by
//!    connected components
//! 4. topography `(1 − P_CB) + (1 − FG·(1 − E))`
//! 5. marker-controlled watershed restricted to `FG`
//! 6. instances smaller than `theta2` are dropped
//! 7. optional majority-vote typing

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{arg_err, shape_err, Result};
use crate::grid::{connected_components, Grid, LabelMap, MagProfile, Mask, NEIGHBORS_8};
use crate::tensor::Tensor;

pub type Kernel5 = [[f64; 5]; 5];

const SMOOTH: [f64; 5] = [1.0, 4.0, 6.0, 4.0, 1.0];
const DERIV: [f64; 5] = [-1.0, -2.0, 0.0, 2.0, 1.0];

/// One 5×5 derivative kernel per distance-map channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SobelBank {
    kernels: [Kernel5; 4],
}

impl SobelBank {
    pub fn new() -> Self {
        let mut sx = [[0.0; 5]; 5];
        let mut sy = [[0.0; 5]; 5];
        for i in 0..5 {
            for j in 0..5 {
                sx[i][j] = SMOOTH[i] * DERIV[j];
                sy[i][j] = DERIV[i] * SMOOTH[j];
            }
        }
        let mut d1 = [[0.0; 5]; 5];
        let mut d2 = [[0.0; 5]; 5];
        for i in 0..5 {
            for j in 0..5 {
                d1[i][j] = (sx[i][j] + sy[i][j]) / 2.0;
                d2[i][j] = (sx[i][j] - sy[i][j]) / 2.0;
            }
        }
        SobelBank {
            kernels: [sy, sx, d1, d2],
        }
    }

    /// Kernel for channel `k` (vertical, horizontal, TL→BR, BL→TR).
    pub fn kernel(&self, k: usize) -> &Kernel5 {
        &self.kernels[k]
    }

    pub fn horizontal(&self) -> &Kernel5 {
        &self.kernels[1]
    }

    pub fn vertical(&self) -> &Kernel5 {
        &self.kernels[0]
    }
}

impl Default for SobelBank {
    fn default() -> Self {
        Self::new()
    }
}

/// Zero-padded cross-correlation: `out(r,c) = Σ K[i][j]·f(r+i−2, c+j−2)`.
/// With the bank's kernels this is the positive directional derivative.
pub fn correlate5(plane: &Grid<f64>, kernel: &Kernel5) -> Grid<f64> {
    let (h, w) = plane.shape();
    let src = plane.as_slice();
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        let i_lo = 2usize.saturating_sub(r);
        let i_hi = (h + 2 - r).min(5);
        for c in 0..w {
            let j_lo = 2usize.saturating_sub(c);
            let j_hi = (w + 2 - c).min(5);
            let mut acc = 0.0;
            for i in i_lo..i_hi {
                let row = (r + i - 2) * w;
                let k = &kernel[i];
                for j in j_lo..j_hi {
                    acc += k[j] * src[row + c + j - 2];
                }
            }
            out[r * w + c] = acc;
        }
    }
    Grid::from_vec(h, w, out).expect("shape")
}

/// Zero-padded true convolution (kernel flipped in both axes).
pub fn convolve5(plane: &Grid<f64>, kernel: &Kernel5) -> Grid<f64> {
    let mut flipped = [[0.0; 5]; 5];
    for i in 0..5 {
        for j in 0..5 {
            flipped[i][j] = kernel[4 - i][4 - j];
        }
    }
    correlate5(plane, &flipped)
}

/// Rescales to [0, 1]; a constant plane becomes all zeros.
pub fn min_max_normalize(plane: &Grid<f64>) -> Grid<f64> {
    let (lo, hi) = plane
        .as_slice()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    if !(span > 0.0) {
        return plane.map(|_| 0.0);
    }
    plane.map(|&v| (v - lo) / span)
}

/// Per-channel min-max normalized convolution responses; ridge lines
/// (ramp resets between touching instances) are the maxima.
pub fn edge_responses(dist: &Tensor, bank: &SobelBank) -> Vec<Grid<f64>> {
    (0..dist.channels().min(4))
        .map(|k| {
            let plane = min_max_normalize(&dist.channel(k).map(|&v| v as f64));
            min_max_normalize(&convolve5(&plane, bank.kernel(k)))
        })
        .collect()
}

/// `E = 1` where the largest normalized response exceeds `theta1`.
pub fn edge_mask(dist: &Tensor, bank: &SobelBank, theta1: f64) -> Result<Mask> {
    if dist.channels() != 4 {
        return shape_err(format!("distance tensor needs 4 channels, got {}", dist.channels()));
    }
    let responses = edge_responses(dist, bank);
    let (h, w) = (dist.height(), dist.width());
    Ok(Grid::from_fn(h, w, |r, c| {
        responses.iter().any(|resp| *resp.get(r, c) > theta1)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct FloodEntry {
    key: u32,
    idx: u32,
}

impl Ord for FloodEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; reverse for lowest (value, raster index)
        (other.key, other.idx).cmp(&(self.key, self.idx))
    }
}

impl PartialOrd for FloodEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Order-preserving map of `f32` onto `u32` (same order as `total_cmp`).
#[inline]
fn sortable_bits(v: f32) -> u32 {
    let b = v.to_bits();
    if b & 0x8000_0000 != 0 {
        !b
    } else {
        b | 0x8000_0000
    }
}

/// Marker-controlled watershed by priority flood over 8-neighbours.
///
/// Marker pixels inside `mask` seed the flood. A pixel takes the label of
/// the first finalized neighbour that reaches it and is finalized when it
/// is the lowest `(topo, raster index)` pixel on the frontier. Pixels
/// outside `mask` or unreachable from any marker stay 0.
pub fn watershed(topo: &Grid<f32>, markers: &LabelMap, mask: &Mask) -> Result<LabelMap> {
    if topo.shape() != markers.shape() || topo.shape() != mask.shape() {
        return shape_err("watershed inputs differ in shape");
    }
    let (h, w) = topo.shape();
    let mut labels = vec![0u32; h * w];
    let mut queued = vec![false; h * w];
    let mut heap = BinaryHeap::new();
    let m = mask.as_slice();
    let t = topo.as_slice();

    for (i, &id) in markers.as_slice().iter().enumerate() {
        if id != 0 && m[i] {
            labels[i] = id;
            queued[i] = true;
        }
    }

    let push_neighbors = |i: usize,
                              labels: &mut Vec<u32>,
                              queued: &mut Vec<bool>,
                              heap: &mut BinaryHeap<FloodEntry>| {
        let (r, c) = (i / w, i % w);
        for &(dr, dc) in &NEIGHBORS_8 {
            let nr = r as isize + dr;
            let nc = c as isize + dc;
            if nr < 0 || nc < 0 || nr >= h as isize || nc >= w as isize {
                continue;
            }
            let j = nr as usize * w + nc as usize;
            if m[j] && !queued[j] {
                queued[j] = true;
                labels[j] = labels[i];
                heap.push(FloodEntry {
                    key: sortable_bits(t[j]),
                    idx: j as u32,
                });
            }
        }
    };

    for i in 0..h * w {
        if labels[i] != 0 && markers.as_slice()[i] != 0 {
            push_neighbors(i, &mut labels, &mut queued, &mut heap);
        }
    }
    while let Some(FloodEntry { idx, .. }) = heap.pop() {
        push_neighbors(idx as usize, &mut labels, &mut queued, &mut heap);
    }
    LabelMap::from_vec(h, w, labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostprocessConfig {
    pub theta1: f64,
    pub theta2: usize,
    pub profile: MagProfile,
}

impl PostprocessConfig {
    pub const DEFAULT_THETA1: f64 = 0.57;

    pub fn new(profile: MagProfile) -> Self {
        PostprocessConfig {
            theta1: Self::DEFAULT_THETA1,
            theta2: profile.min_instance_area,
            profile,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta1 > 0.0 && self.theta1 <= 1.0) {
            return arg_err(format!("theta1 must lie in (0, 1], got {}", self.theta1));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceType {
    pub id: u32,
    #[serde(rename = "type")]
    pub type_id: u32,
    pub vote_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceTypeTable {
    pub instances: Vec<InstanceType>,
}

impl InstanceTypeTable {
    pub fn type_of(&self, id: u32) -> Option<u32> {
        self.instances
            .binary_search_by_key(&id, |row| row.id)
            .ok()
            .map(|i| self.instances[i].type_id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PostprocessOutput {
    pub labels: LabelMap,
    pub types: Option<InstanceTypeTable>,
}

/// Intermediate rasters of the pipeline, exposed for inspection and tests.
#[derive(Debug, Clone)]
pub struct Stages {
    pub foreground: Mask,
    pub edges: Mask,
    pub markers: LabelMap,
    pub topo: Grid<f32>,
    pub flooded: LabelMap,
}

pub fn postprocess_stages(prob: &Tensor, dist: &Tensor, cfg: &PostprocessConfig) -> Result<Stages> {
    cfg.validate()?;
    if prob.channels() != 3 {
        return shape_err(format!("probability tensor needs 3 channels, got {}", prob.channels()));
    }
    if dist.channels() != 4 {
        return shape_err(format!("distance tensor needs 4 channels, got {}", dist.channels()));
    }
    if (prob.height(), prob.width()) != (dist.height(), dist.width()) {
        return shape_err(format!(
            "probability {:?} vs distance {:?}",
            prob.shape(),
            dist.shape()
        ));
    }
    let (h, w) = (prob.height(), prob.width());
    let foreground = Grid::from_vec(
        h,
        w,
        (0..h * w)
            .map(|i| {
                let p = prob.pixel(i);
                p[0] + p[1] > p[2]
            })
            .collect(),
    )?;
    let edges = edge_mask(dist, &SobelBank::new(), cfg.theta1)?;
    let seeds = Grid::from_vec(
        h,
        w,
        (0..h * w)
            .map(|i| {
                let p = prob.pixel(i);
                p[1] > p[0] && p[1] > p[2] && !edges.as_slice()[i]
            })
            .collect(),
    )?;
    let markers = connected_components(&seeds);
    let topo = Grid::from_vec(
        h,
        w,
        (0..h * w)
            .map(|i| {
                let inner = foreground.as_slice()[i] && !edges.as_slice()[i];
                (1.0 - prob.pixel(i)[1]) + if inner { 0.0 } else { 1.0 }
            })
            .collect(),
    )?;
    let flooded = watershed(&topo, &markers, &foreground)?;
    Ok(Stages {
        foreground,
        edges,
        markers,
        topo,
        flooded,
    })
}

/// Full post-processing; see the module docs for the steps.
pub fn postprocess(
    prob: &Tensor,
    dist: &Tensor,
    type_prob: Option<&Tensor>,
    cfg: &PostprocessConfig,
) -> Result<PostprocessOutput> {
    if let Some(tp) = type_prob {
        if (tp.height(), tp.width()) != (prob.height(), prob.width()) {
            return shape_err(format!(
                "type map {:?} vs probability {:?}",
                tp.shape(),
                prob.shape()
            ));
        }
    }
    let stages = postprocess_stages(prob, dist, cfg)?;
    let labels = remove_small_instances(&stages.flooded, cfg.theta2);
    let types = type_prob.map(|tp| assign_types(&labels, tp)).transpose()?;
    Ok(PostprocessOutput { labels, types })
}

/// Drops instances below `min_area` pixels and renumbers the rest `1..=n`.
pub fn remove_small_instances(labels: &LabelMap, min_area: usize) -> LabelMap {
    let ids = labels.ids();
    let mut areas = vec![0usize; ids.len()];
    for &v in labels.as_slice() {
        if v != 0 {
            areas[ids.binary_search(&v).unwrap()] += 1;
        }
    }
    let keep: Vec<u32> = ids
        .iter()
        .zip(&areas)
        .filter(|(_, &a)| a >= min_area)
        .map(|(&id, _)| id)
        .collect();
    labels.retain_ids(&keep).relabel_sequential()
}

/// Majority vote of per-pixel type argmax inside each instance.
///
/// Channel 0 is background and does not vote. Vote ties go to the lower
/// type id. An instance with no non-background votes takes the
/// non-background type with the highest mean probability, and its vote
/// fraction is that mean probability.
pub fn assign_types(labels: &LabelMap, type_prob: &Tensor) -> Result<InstanceTypeTable> {
    let n_types = type_prob.channels();
    if n_types < 2 {
        return arg_err("type map needs a background channel and at least one type");
    }
    if (type_prob.height(), type_prob.width()) != labels.shape() {
        return shape_err("type map and label map differ in shape");
    }
    let ids = labels.ids();
    let mut votes = vec![vec![0usize; n_types]; ids.len()];
    let mut prob_sum = vec![vec![0f64; n_types]; ids.len()];
    let mut area = vec![0usize; ids.len()];
    for (i, &v) in labels.as_slice().iter().enumerate() {
        if v == 0 {
            continue;
        }
        let k = ids.binary_search(&v).unwrap();
        area[k] += 1;
        votes[k][type_prob.argmax(i)] += 1;
        for (acc, &p) in prob_sum[k].iter_mut().zip(type_prob.pixel(i)) {
            *acc += p as f64;
        }
    }
    let instances = ids
        .iter()
        .enumerate()
        .map(|(k, &id)| {
            let best = (1..n_types).fold(1, |b, t| if votes[k][t] > votes[k][b] { t } else { b });
            if votes[k][best] > 0 {
                InstanceType {
                    id,
                    type_id: best as u32,
                    vote_fraction: votes[k][best] as f64 / area[k] as f64,
                }
            } else {
                let best = (1..n_types).fold(1, |b, t| {
                    if prob_sum[k][t] > prob_sum[k][b] {
                        t
                    } else {
                        b
                    }
                });
                InstanceType {
                    id,
                    type_id: best as u32,
                    vote_fraction: prob_sum[k][best] / area[k] as f64,
                }
            }
        })
        .collect();
    Ok(InstanceTypeTable { instances })
}
