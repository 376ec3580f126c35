//! Dense row-major gray-scale image of `f64` samples.
//!
//! `GrayImage` is the single carrier type of the crate: masks, skeletons,
//! feature maps and kernel outputs all use it. Every constructor rejects
//! empty shapes and non-finite samples, so downstream code can assume
//! finite data.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {height}x{width}"
            )));
        }
        if data.len() != height * width {
            return Err(Error::InvalidImage(format!(
                "data length {} does not match {height}x{width}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidImage(format!(
                "non-finite sample at row {}, col {}",
                i / width,
                i % width
            )));
        }
        Ok(Self { height, width, data })
    }

    /// Image with every pixel set to `value`.
    ///
    /// Panics on a zero dimension or non-finite value.
    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "dimensions must be positive");
        assert!(value.is_finite(), "fill value must be finite");
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    /// Builds an image by evaluating `f(row, col)` at every pixel.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self::new(height, width, data)
    }

    /// Internal constructor for results of operations on finite inputs.
    pub(crate) fn from_vec_unchecked(height: usize, width: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width);
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
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

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    /// Sample at `(row + dy, col + dx)` with coordinates clamped to the frame.
    #[inline]
    pub fn get_clamped(&self, row: usize, col: usize, dy: isize, dx: isize) -> f64 {
        self.data[self.clamped_index(row, col, dy, dx)]
    }

    #[inline]
    pub(crate) fn clamped_index(&self, row: usize, col: usize, dy: isize, dx: isize) -> usize {
        let r = (row as isize + dy).clamp(0, self.height as isize - 1) as usize;
        let c = (col as isize + dx).clamp(0, self.width as isize - 1) as usize;
        r * self.width + c
    }

    /// Linear index of `(row + dy, col + dx)`, or `None` when outside the frame.
    #[inline]
    pub(crate) fn offset_index(&self, row: usize, col: usize, dy: isize, dx: isize) -> Option<usize> {
        let r = row as isize + dy;
        let c = col as isize + dx;
        if r < 0 || c < 0 || r >= self.height as isize || c >= self.width as isize {
            None
        } else {
            Some(r as usize * self.width + c as usize)
        }
    }

    /// Returns a copy with one pixel replaced.
    pub fn with_pixel(&self, row: usize, col: usize, value: f64) -> Result<Self> {
        if row >= self.height || col >= self.width {
            return Err(Error::InvalidParameter(format!(
                "pixel ({row}, {col}) outside {}x{} image",
                self.height, self.width
            )));
        }
        if !value.is_finite() {
            return Err(Error::InvalidImage("non-finite pixel value".into()));
        }
        let mut data = self.data.clone();
        data[row * self.width + col] = value;
        Ok(Self::from_vec_unchecked(self.height, self.width, data))
    }

    pub fn ensure_same_shape(&self, other: &GrayImage) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::SizeMismatch {
                expected: self.shape(),
                found: other.shape(),
            });
        }
        Ok(())
    }

    /// Applies `f` to every sample. Fails if `f` produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.height, self.width, self.data.iter().map(|&v| f(v)).collect())
    }

    /// Pixelwise combination of two same-shaped images.
    pub fn zip_map(&self, other: &GrayImage, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.ensure_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Self::new(self.height, self.width, data)
    }

    pub(crate) fn map_unchecked(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_vec_unchecked(self.height, self.width, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn neg(&self) -> Self {
        self.map_unchecked(|v| -v)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn dot(&self, other: &GrayImage) -> Result<f64> {
        self.ensure_same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute pixelwise difference.
    pub fn max_abs_diff(&self, other: &GrayImage) -> Result<f64> {
        self.ensure_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn all(&self, pred: impl Fn(f64) -> bool) -> bool {
        self.data.iter().all(|&v| pred(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes_and_values() {
        assert!(GrayImage::new(0, 3, vec![]).is_err());
        assert!(GrayImage::new(2, 2, vec![0.0; 3]).is_err());
        assert!(GrayImage::new(1, 2, vec![0.0, f64::NAN]).is_err());
        assert!(GrayImage::new(1, 1, vec![f64::INFINITY]).is_err());
        assert!(GrayImage::new(2, 3, vec![0.5; 6]).is_ok());
    }

    #[test]
    fn clamped_access_replicates_edges() {
        let img = GrayImage::from_fn(2, 3, |r, c| (r * 3 + c) as f64).unwrap();
        assert_eq!(img.get_clamped(0, 0, -1, -1), 0.0);
        assert_eq!(img.get_clamped(1, 2, 1, 1), 5.0);
        assert_eq!(img.get_clamped(0, 1, 5, 0), 4.0);
        assert_eq!(img.offset_index(0, 0, -1, 0), None);
        assert_eq!(img.offset_index(1, 1, 0, 1), Some(5));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let a = GrayImage::zeros(2, 2);
        let b = GrayImage::zeros(2, 3);
        assert_eq!(
            a.dot(&b),
            Err(Error::SizeMismatch {
                expected: (2, 2),
                found: (2, 3)
            })
        );
    }
}
