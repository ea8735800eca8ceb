//! Dense rank-3 tensor used for every activation in the layer graph.
//!
//! Data is stored channel-major, then row-major within a channel
//! (`index = (c * height + y) * width + x`), which is also the order used by
//! the on-disk formats. Plain vectors are represented as `(len, 1, 1)` so a
//! single type flows through convolutional and dense layers alike.

use crate::error::{Error, Result};

/// Shape of a [`GridTensor`]: channels, height, width.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Shape { channels, height, width }
    }

    /// Shape of a flat vector of `len` entries.
    pub const fn vector(len: usize) -> Self {
        Shape { channels: len, height: 1, width: 1 }
    }

    /// Total number of scalar entries.
    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// True when the shape has no spatial extent (a plain vector).
    pub fn is_vector(&self) -> bool {
        self.height == 1 && self.width == 1
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

/// Channel-major dense tensor of `f64` values.
#[derive(Clone, Debug, PartialEq)]
pub struct GridTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl GridTensor {
    /// Tensor of zeros with the given shape.
    pub fn zeros(shape: Shape) -> Self {
        GridTensor { shape, data: vec![0.0; shape.len()] }
    }

    /// Wrap an existing buffer; `data.len()` must match the shape.
    pub fn from_vec(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::Format(format!(
                "buffer of {} values cannot fill shape {shape}",
                data.len()
            )));
        }
        Ok(GridTensor { shape, data })
    }

    /// Flat vector tensor from a slice.
    pub fn from_slice(values: &[f64]) -> Self {
        GridTensor { shape: Shape::vector(values.len()), data: values.to_vec() }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        debug_assert!(c < self.shape.channels && y < self.shape.height && x < self.shape.width);
        self.data[(c * self.shape.height + y) * self.shape.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, value: f64) {
        debug_assert!(c < self.shape.channels && y < self.shape.height && x < self.shape.width);
        self.data[(c * self.shape.height + y) * self.shape.width + x] = value;
    }

    /// Contiguous row `(c, y, ..)` as a slice.
    #[inline]
    pub fn row(&self, c: usize, y: usize) -> &[f64] {
        let start = (c * self.shape.height + y) * self.shape.width;
        &self.data[start..start + self.shape.width]
    }

    /// Contiguous row `(c, y, ..)` as a mutable slice.
    #[inline]
    pub fn row_mut(&mut self, c: usize, y: usize) -> &mut [f64] {
        let start = (c * self.shape.height + y) * self.shape.width;
        &mut self.data[start..start + self.shape.width]
    }

    /// One whole channel as a slice.
    #[inline]
    pub fn channel(&self, c: usize) -> &[f64] {
        let plane = self.shape.height * self.shape.width;
        &self.data[c * plane..(c + 1) * plane]
    }

    /// Reset all entries to zero, keeping the allocation.
    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    /// True when every entry is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
