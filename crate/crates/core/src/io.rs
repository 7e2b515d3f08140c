//! On-disk formats.
//!
//! * label maps: single-channel 16-bit PNG, 0 = background
//! * binary masks: 8-bit PNG with values {0, 255}
//! * code maps (ternary classes, type ids): 8-bit PNG
//! * real tensors: raw little-endian `f32`, row-major, channel-last, with a
//!   JSON sidecar next to it (same stem, `.json` extension)

use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, Luma, Rgb};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, LabelMap, Mask};
use crate::stain::RgbImage;
use crate::tensor::Tensor;

pub const DTYPE_F32: &str = "f32";
pub const ORDER_CHANNEL_LAST: &str = "row-major-channel-last";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSidecar {
    pub shape: [usize; 3],
    pub dtype: String,
    pub order: String,
}

pub fn sidecar_path(data_path: &Path) -> PathBuf {
    data_path.with_extension("json")
}

pub fn write_tensor(path: &Path, tensor: &Tensor) -> Result<()> {
    let mut bytes = Vec::with_capacity(tensor.as_slice().len() * 4);
    for v in tensor.as_slice() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    let (h, w, c) = tensor.shape();
    let sidecar = TensorSidecar {
        shape: [h, w, c],
        dtype: DTYPE_F32.to_string(),
        order: ORDER_CHANNEL_LAST.to_string(),
    };
    fs::write(sidecar_path(path), serde_json::to_string(&sidecar)?)?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let side_path = sidecar_path(path);
    let sidecar: TensorSidecar = serde_json::from_slice(&fs::read(&side_path)?)
        .map_err(|e| Error::Malformed(format!("sidecar {}: {e}", side_path.display())))?;
    if sidecar.dtype != DTYPE_F32 || sidecar.order != ORDER_CHANNEL_LAST {
        return Err(Error::Malformed(format!(
            "sidecar {}: unsupported dtype/order {}/{}",
            side_path.display(),
            sidecar.dtype,
            sidecar.order
        )));
    }
    let bytes = fs::read(path)?;
    let [h, w, c] = sidecar.shape;
    if bytes.len() != h * w * c * 4 {
        return Err(Error::Malformed(format!(
            "{}: {} bytes, sidecar shape {:?} needs {}",
            path.display(),
            bytes.len(),
            sidecar.shape,
            h * w * c * 4
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Tensor::from_vec(h, w, c, data)
}

pub fn write_label_png(path: &Path, labels: &LabelMap) -> Result<()> {
    let (h, w) = labels.shape();
    let mut px = Vec::with_capacity(h * w);
    for &v in labels.as_slice() {
        if v > u16::MAX as u32 {
            return Err(Error::InvalidArgument(format!(
                "instance id {v} does not fit a 16-bit label PNG"
            )));
        }
        px.push(v as u16);
    }
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(w as u32, h as u32, px).expect("buffer size");
    img.save(path)?;
    Ok(())
}

/// Reads an 8- or 16-bit single-channel PNG as instance ids.
pub fn read_label_png(path: &Path) -> Result<LabelMap> {
    let img = image::open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<u32> = match img {
        DynamicImage::ImageLuma8(b) => b.into_raw().into_iter().map(u32::from).collect(),
        DynamicImage::ImageLuma16(b) => b.into_raw().into_iter().map(u32::from).collect(),
        other => {
            return Err(Error::Malformed(format!(
                "{}: label maps must be single-channel, got {:?}",
                path.display(),
                other.color()
            )))
        }
    };
    LabelMap::from_vec(h, w, data)
}

pub fn write_code_png(path: &Path, codes: &Grid<u8>) -> Result<()> {
    let (h, w) = codes.shape();
    let img: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(w as u32, h as u32, codes.as_slice().to_vec()).expect("buffer size");
    img.save(path)?;
    Ok(())
}

pub fn read_code_png(path: &Path) -> Result<Grid<u8>> {
    let img = image::open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(b) => Grid::from_vec(h, w, b.into_raw()),
        other => Err(Error::Malformed(format!(
            "{}: expected an 8-bit single-channel PNG, got {:?}",
            path.display(),
            other.color()
        ))),
    }
}

pub fn write_mask_png(path: &Path, mask: &Mask) -> Result<()> {
    write_code_png(path, &mask.map(|&b| if b { 255 } else { 0 }))
}

pub fn read_mask_png(path: &Path) -> Result<Mask> {
    Ok(read_code_png(path)?.map(|&v| v != 0))
}

pub fn read_rgb_png(path: &Path) -> Result<RgbImage> {
    let img = image::open(path)?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img.pixels().map(|p| p.0).collect();
    Grid::from_vec(h, w, data)
}

pub fn write_rgb_png(path: &Path, rgb: &RgbImage) -> Result<()> {
    let (h, w) = rgb.shape();
    let raw: Vec<u8> = rgb.as_slice().iter().flat_map(|p| p.iter().copied()).collect();
    let img: ImageBuffer<Rgb<u8>, Vec<u8>> =
        ImageBuffer::from_raw(w as u32, h as u32, raw).expect("buffer size");
    img.save(path)?;
    Ok(())
}
