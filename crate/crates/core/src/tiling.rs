//! Tiling of large rasters into overlapping square tiles and weighted
//! blending of per-tile predictions back into one raster.
//!
//! The image is reflect-padded by half a tile on every side, then padded
//! further at the bottom/right until the tile grid fits exactly. Blending
//! accumulates `Σ w·pred` and `Σ w` per pixel and divides, so the window
//! does not need to form a partition of unity.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, shape_err, Error, Result};
use crate::tensor::Tensor;

pub const DEFAULT_TILE: usize = 256;
pub const WINDOW_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileGrid {
    pub height: usize,
    pub width: usize,
    pub tile: usize,
    pub stride: usize,
    pub pad_top: usize,
    pub pad_left: usize,
    pub padded_height: usize,
    pub padded_width: usize,
    /// `(row, col)` offsets into the padded raster, row-major.
    pub offsets: Vec<(usize, usize)>,
}

fn axis_extent(n: usize, tile: usize, stride: usize) -> usize {
    let extent = n + tile;
    let rem = (extent - tile) % stride;
    if rem == 0 {
        extent
    } else {
        extent + stride - rem
    }
}

pub fn plan_tiles(height: usize, width: usize, tile: usize, stride: usize) -> Result<TileGrid> {
    if height == 0 || width == 0 {
        return arg_err("image must be non-empty");
    }
    if tile < 2 || tile % 2 != 0 {
        return arg_err(format!("tile size must be even and >= 2, got {tile}"));
    }
    if stride != tile / 2 {
        return arg_err(format!("stride must be tile/2 = {}, got {stride}", tile / 2));
    }
    let padded_height = axis_extent(height, tile, stride);
    let padded_width = axis_extent(width, tile, stride);
    let rows: Vec<usize> = (0..=padded_height - tile).step_by(stride).collect();
    let cols: Vec<usize> = (0..=padded_width - tile).step_by(stride).collect();
    let offsets = rows
        .iter()
        .flat_map(|&r| cols.iter().map(move |&c| (r, c)))
        .collect();
    Ok(TileGrid {
        height,
        width,
        tile,
        stride,
        pad_top: tile / 2,
        pad_left: tile / 2,
        padded_height,
        padded_width,
        offsets,
    })
}

/// Mirror index without repeating the edge pixel (`dcb|abcd|cba`), folded
/// as often as needed for pads wider than the image.
pub fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

pub fn pad_reflect(image: &Tensor, grid: &TileGrid) -> Result<Tensor> {
    if (image.height(), image.width()) != (grid.height, grid.width) {
        return shape_err(format!(
            "image {}x{} vs planned {}x{}",
            image.height(),
            image.width(),
            grid.height,
            grid.width
        ));
    }
    let ch = image.channels();
    let mut out = Tensor::zeros(grid.padded_height, grid.padded_width, ch);
    for r in 0..grid.padded_height {
        let sr = reflect_index(r as isize - grid.pad_top as isize, grid.height);
        for c in 0..grid.padded_width {
            let sc = reflect_index(c as isize - grid.pad_left as isize, grid.width);
            let src = sr * grid.width + sc;
            out.pixel_mut(r * grid.padded_width + c)
                .copy_from_slice(image.pixel(src));
        }
    }
    Ok(out)
}

pub fn crop(src: &Tensor, top: usize, left: usize, height: usize, width: usize) -> Tensor {
    let ch = src.channels();
    let mut out = Tensor::zeros(height, width, ch);
    for r in 0..height {
        let from = ((top + r) * src.width() + left) * ch;
        let to = r * width * ch;
        out.as_mut_slice()[to..to + width * ch]
            .copy_from_slice(&src.as_slice()[from..from + width * ch]);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tile {
    pub row: usize,
    pub col: usize,
    pub data: Tensor,
}

pub fn extract_tiles(image: &Tensor, grid: &TileGrid) -> Result<Vec<Tile>> {
    let padded = pad_reflect(image, grid)?;
    Ok(grid
        .offsets
        .par_iter()
        .map(|&(row, col)| Tile {
            row,
            col,
            data: crop(&padded, row, col, grid.tile, grid.tile),
        })
        .collect())
}

/// Separable blending window built from a 1-D quadratic spline bump.
#[derive(Debug, Clone, PartialEq)]
pub struct BlendWindow {
    profile: Vec<f64>,
}

impl BlendWindow {
    pub fn size(&self) -> usize {
        self.profile.len()
    }

    pub fn profile(&self) -> &[f64] {
        &self.profile
    }

    #[inline]
    pub fn weight(&self, r: usize, c: usize) -> f64 {
        self.profile[r] * self.profile[c]
    }
}

/// 1-D profile value at `t ∈ (0, 1)`: with the triangle `τ = 1 − |2t − 1|`,
/// `s = 2τ²` for `τ < ½` and `1 − 2(1 − τ)²` otherwise.
pub fn spline_profile(t: f64) -> f64 {
    let tau = 1.0 - (2.0 * t - 1.0).abs();
    if tau < 0.5 {
        2.0 * tau * tau
    } else {
        1.0 - 2.0 * (1.0 - tau) * (1.0 - tau)
    }
}

/// Second-order spline window sampled at pixel centres and floored at
/// [`WINDOW_FLOOR`].
pub fn spline_window(tile: usize) -> Result<BlendWindow> {
    if tile < 2 || tile % 2 != 0 {
        return arg_err(format!("window size must be even and >= 2, got {tile}"));
    }
    let profile = (0..tile)
        .map(|i| spline_profile((i as f64 + 0.5) / tile as f64).max(WINDOW_FLOOR))
        .collect();
    Ok(BlendWindow { profile })
}

/// Weighted average of tile predictions, cropped back to the image.
pub fn blend_untile(tiles: &[Tile], grid: &TileGrid, window: &BlendWindow) -> Result<Tensor> {
    if window.size() != grid.tile {
        return shape_err(format!("window {} vs tile {}", window.size(), grid.tile));
    }
    let mut by_offset: HashMap<(usize, usize), &Tile> = HashMap::with_capacity(tiles.len());
    for t in tiles {
        if !grid.offsets.contains(&(t.row, t.col)) {
            return arg_err(format!("tile at ({}, {}) is not in the plan", t.row, t.col));
        }
        if by_offset.insert((t.row, t.col), t).is_some() {
            return arg_err(format!("duplicate tile at ({}, {})", t.row, t.col));
        }
    }
    let channels = match tiles.first() {
        Some(t) => t.data.channels(),
        None => return Err(Error::MissingTile(grid.offsets[0].0, grid.offsets[0].1)),
    };
    for &(r, c) in &grid.offsets {
        let Some(t) = by_offset.get(&(r, c)) else {
            return Err(Error::MissingTile(r, c));
        };
        if t.data.shape() != (grid.tile, grid.tile, channels) {
            return shape_err(format!(
                "tile at ({r}, {c}) has shape {:?}, expected {:?}",
                t.data.shape(),
                (grid.tile, grid.tile, channels)
            ));
        }
    }

    let (ph, pw) = (grid.padded_height, grid.padded_width);
    let mut acc = vec![0f64; ph * pw * channels];
    let mut norm = vec![0f64; ph * pw];
    for &(r0, c0) in &grid.offsets {
        let t = by_offset[&(r0, c0)];
        for r in 0..grid.tile {
            for c in 0..grid.tile {
                let wgt = window.weight(r, c);
                let dst = (r0 + r) * pw + (c0 + c);
                norm[dst] += wgt;
                let src = t.data.pixel(r * grid.tile + c);
                for (a, &v) in acc[dst * channels..(dst + 1) * channels].iter_mut().zip(src) {
                    *a += wgt * v as f64;
                }
            }
        }
    }

    let mut out = Tensor::zeros(grid.height, grid.width, channels);
    for r in 0..grid.height {
        for c in 0..grid.width {
            let src = (r + grid.pad_top) * pw + (c + grid.pad_left);
            let n = norm[src];
            let px = out.pixel_mut(r * grid.width + c);
            for (k, v) in px.iter_mut().enumerate() {
                *v = (acc[src * channels + k] / n) as f32;
            }
        }
    }
    Ok(out)
}
