//! Channel-last real-valued tensors (`height × width × channels`).

use crate::error::{shape_err, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        assert!(height >= 1 && width >= 1 && channels >= 1);
        Tensor {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn from_vec(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return shape_err(format!("empty tensor shape {height}x{width}x{channels}"));
        }
        if data.len() != height * width * channels {
            return shape_err(format!(
                "{} values for a {height}x{width}x{channels} tensor",
                data.len()
            ));
        }
        Ok(Tensor {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut t = Tensor::zeros(height, width, channels);
        for r in 0..height {
            for c in 0..width {
                for k in 0..channels {
                    t.set(r, c, k, f(r, c, k));
                }
            }
        }
        t
    }

    /// Stacks single-channel grids of equal shape.
    pub fn from_channels(planes: &[Grid<f32>]) -> Result<Self> {
        let Some(first) = planes.first() else {
            return shape_err("no channels");
        };
        let (h, w) = first.shape();
        if planes.iter().any(|p| p.shape() != (h, w)) {
            return shape_err("channel planes differ in shape");
        }
        let n = planes.len();
        let mut t = Tensor::zeros(h, w, n);
        for (k, p) in planes.iter().enumerate() {
            for (i, &v) in p.as_slice().iter().enumerate() {
                t.data[i * n + k] = v;
            }
        }
        Ok(t)
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
    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize, k: usize) -> f32 {
        self.data[(r * self.width + c) * self.channels + k]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, k: usize, v: f32) {
        let i = (r * self.width + c) * self.channels + k;
        self.data[i] = v;
    }

    /// Channel vector of the pixel with flat index `i`.
    #[inline]
    pub fn pixel(&self, i: usize) -> &[f32] {
        &self.data[i * self.channels..(i + 1) * self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.channels..(i + 1) * self.channels]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn channel(&self, k: usize) -> Grid<f32> {
        assert!(k < self.channels);
        let data = (0..self.pixels()).map(|i| self.data[i * self.channels + k]).collect();
        Grid::from_vec(self.height, self.width, data).expect("consistent shape")
    }

    pub fn set_channel(&mut self, k: usize, plane: &Grid<f32>) {
        assert_eq!(plane.shape(), (self.height, self.width));
        for (i, &v) in plane.as_slice().iter().enumerate() {
            self.data[i * self.channels + k] = v;
        }
    }

    /// Index of the largest channel at pixel `i`; ties go to the lower index.
    pub fn argmax(&self, i: usize) -> usize {
        let px = self.pixel(i);
        let mut best = 0;
        for k in 1..px.len() {
            if px[k] > px[best] {
                best = k;
            }
        }
        best
    }

    pub fn ensure_same_shape(&self, other: &Tensor, what: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return shape_err(format!(
                "{what}: {:?} vs {:?}",
                self.shape(),
                other.shape()
            ));
        }
        Ok(())
    }
}
