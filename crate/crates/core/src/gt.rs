//! Training targets derived from an annotated label map: the ternary
//! boundary/body/background map, four directional distance maps and the
//! regression weight mask.

use std::ops::Deref;

use crate::error::{arg_err, shape_err, Result};
use crate::grid::{dilate, remove_small_components, Grid, LabelMap, MagProfile, Mask, StructuringElement};
use crate::tensor::Tensor;

/// Pixel class codes of the ternary map.
pub const BD: u8 = 1;
pub const CB: u8 = 2;
pub const BG: u8 = 3;

/// Weight given to pixels outside the dilated foreground.
pub const BACKGROUND_WEIGHT: f32 = 0.05;

/// Per-pixel class codes in {BD=1, CB=2, BG=3}.
#[derive(Debug, Clone, PartialEq)]
pub struct TernaryMap(Grid<u8>);

impl TernaryMap {
    pub fn new(codes: Grid<u8>) -> Result<Self> {
        if let Some(bad) = codes.as_slice().iter().find(|&&v| !(BD..=BG).contains(&v)) {
            return arg_err(format!("ternary code {bad} outside {{1,2,3}}"));
        }
        Ok(TernaryMap(codes))
    }

    pub fn into_grid(self) -> Grid<u8> {
        self.0
    }

    /// BD ∪ CB.
    pub fn foreground(&self) -> Mask {
        self.0.map(|&v| v == BD || v == CB)
    }

    pub fn class_mask(&self, code: u8) -> Mask {
        self.0.map(|&v| v == code)
    }
}

impl Deref for TernaryMap {
    type Target = Grid<u8>;
    fn deref(&self) -> &Grid<u8> {
        &self.0
    }
}

/// Morphology used when deriving the ternary map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TernaryParams {
    /// Dilation applied to each instance when counting overlaps.
    pub overlap_se: StructuringElement,
    /// Element of the two sequential expansion dilations.
    pub expand_se: StructuringElement,
    /// Residual components below this many pixels are reassigned.
    pub cleanup_min_area: usize,
}

impl From<&MagProfile> for TernaryParams {
    fn from(p: &MagProfile) -> Self {
        TernaryParams {
            overlap_se: p.gt_dilate,
            expand_se: p.gt_dilate,
            cleanup_min_area: p.cleanup_min_area,
        }
    }
}

pub fn ternary_from_labels(labels: &LabelMap, profile: &MagProfile) -> TernaryMap {
    ternary_with_params(labels, &TernaryParams::from(profile))
}

pub fn ternary_with_params(labels: &LabelMap, params: &TernaryParams) -> TernaryMap {
    let (h, w) = labels.shape();
    let fg = labels.foreground();
    let crowded = overlap_counts(labels, &params.overlap_se).map(|&t| t > 1);
    let expanded = dilate(&dilate(&crowded, &params.expand_se), &params.expand_se);

    let mut bd = expanded.and(&fg);
    let mut cb = Grid::from_fn(h, w, |r, c| *fg.get(r, c) && !*bd.get(r, c));

    if params.cleanup_min_area > 1 {
        let demoted = remove_small_components(&mut bd, params.cleanup_min_area);
        cb = cb.or(&demoted);
        remove_small_components(&mut cb, params.cleanup_min_area);
    }

    let codes = Grid::from_fn(h, w, |r, c| {
        if *bd.get(r, c) {
            BD
        } else if *cb.get(r, c) {
            CB
        } else {
            BG
        }
    });
    TernaryMap(codes)
}

/// Number of distinct instances whose dilation covers each pixel.
fn overlap_counts(labels: &LabelMap, se: &StructuringElement) -> Grid<u32> {
    let (h, w) = labels.shape();
    let offsets = se.offsets();
    let mut count = Grid::filled(h, w, 0u32);

    // pixels grouped by instance so each instance is stamped once per pixel
    let mut by_id: Vec<(u32, usize)> = labels
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0)
        .map(|(i, &v)| (v, i))
        .collect();
    by_id.sort_unstable();

    let mut last = Grid::filled(h, w, 0u32);
    for (id, i) in by_id {
        let (r, c) = (i / w, i % w);
        for &(dr, dc) in &offsets {
            if let Some((nr, nc)) = labels.offset(r, c, dr, dc) {
                let j = nr * w + nc;
                if last.as_slice()[j] != id {
                    last.as_mut_slice()[j] = id;
                    count.as_mut_slice()[j] += 1;
                }
            }
        }
    }
    count
}

/// Four per-instance normalized distance maps, channels ordered
/// (vertical, horizontal, diagonal TL→BR, diagonal BL→TR).
///
/// Raw values are signed distances from the line through the instance
/// centroid orthogonal to each direction. Positive and negative values are
/// scaled separately so each non-degenerate channel spans exactly [-1, 1]
/// inside every instance. Raw distances are kept as exact integers scaled
/// by the instance area, so zero-extent directions come out exactly 0.
pub fn distance_maps_from_labels(labels: &LabelMap) -> Tensor {
    let (h, w) = labels.shape();
    let mut out = Tensor::zeros(h, w, 4);
    let ids = labels.ids();
    if ids.is_empty() {
        return out;
    }

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); ids.len()];
    for (i, &v) in labels.as_slice().iter().enumerate() {
        if v != 0 {
            members[ids.binary_search(&v).unwrap()].push(i);
        }
    }

    for pixels in &members {
        let n = pixels.len() as i64;
        let (sum_r, sum_c) = pixels.iter().fold((0i64, 0i64), |(sr, sc), &i| {
            (sr + (i / w) as i64, sc + (i % w) as i64)
        });
        let raw: Vec<[i64; 4]> = pixels
            .iter()
            .map(|&i| {
                let dr = n * (i / w) as i64 - sum_r;
                let dc = n * (i % w) as i64 - sum_c;
                [dr, dc, dr + dc, dc - dr]
            })
            .collect();
        for k in 0..4 {
            let pos = raw.iter().map(|v| v[k]).max().unwrap().max(0);
            let neg = raw.iter().map(|v| v[k]).min().unwrap().min(0);
            for (&i, v) in pixels.iter().zip(&raw) {
                let x = v[k];
                let value = if x > 0 {
                    x as f64 / pos as f64
                } else if x < 0 {
                    x as f64 / -(neg as f64)
                } else {
                    0.0
                };
                out.set(i / w, i % w, k, value as f32);
            }
        }
    }
    out
}

/// 1.0 inside the dilated BD ∪ CB foreground, 0.05 elsewhere.
pub fn weight_mask(ternary: &TernaryMap, profile: &MagProfile) -> Grid<f32> {
    weight_mask_with(ternary, &profile.post_dilate)
}

pub fn weight_mask_with(ternary: &TernaryMap, se: &StructuringElement) -> Grid<f32> {
    dilate(&ternary.foreground(), se).map(|&inside| if inside { 1.0 } else { BACKGROUND_WEIGHT })
}

/// One-hot encoding of class indices in `0..channels`.
pub fn one_hot_indices(indices: &Grid<u8>, channels: usize) -> Result<Tensor> {
    let (h, w) = indices.shape();
    let mut out = Tensor::zeros(h, w, channels);
    for (i, &v) in indices.as_slice().iter().enumerate() {
        let k = v as usize;
        if k >= channels {
            return arg_err(format!(
                "class {v} at pixel ({}, {}) out of range for {channels} channels",
                i / w,
                i % w
            ));
        }
        out.pixel_mut(i)[k] = 1.0;
    }
    Ok(out)
}

/// Three-channel (BD, CB, BG) one-hot tensor.
pub fn one_hot_ternary(ternary: &TernaryMap) -> Tensor {
    one_hot_indices(&ternary.map(|&v| v - 1), 3).expect("ternary codes are valid")
}

/// One-hot encoding of per-pixel type ids.
pub fn one_hot_types(types: &Grid<u8>, channels: usize) -> Result<Tensor> {
    one_hot_indices(types, channels)
}

/// Per-pixel argmax mapped back to ternary codes.
pub fn ternary_from_prob(prob: &Tensor) -> Result<TernaryMap> {
    if prob.channels() != 3 {
        return shape_err(format!("expected 3 channels, got {}", prob.channels()));
    }
    let codes = Grid::from_fn(prob.height(), prob.width(), |r, c| {
        prob.argmax(r * prob.width() + c) as u8 + 1
    });
    TernaryMap::new(codes)
}
