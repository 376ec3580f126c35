//! Smooth gray-scale morphology and the differentiable skeleton.
//!
//! Smooth dilation replaces the window max by a log-sum-exp at temperature
//! `alpha`:
//!
//! ```text
//! D_a(u)(x) = alpha * ln( sum_{z in B} exp(u(x+z) / alpha) )
//! E_a(u)    = -D_a(-u)
//! ```
//!
//! It is bracketed by the classical operator,
//! `D(u) <= D_a(u) <= D(u) + alpha * ln|B|`, and its derivative with respect
//! to the window samples is the softmax kernel `K_D(u)(x, .)`. The erosion
//! kernel is the corresponding softmin.
//!
//! Windows use replicate-edge sampling: every pixel sees all `|B|` entries of
//! the element, with out-of-frame coordinates clamped to the nearest edge
//! pixel. Constant images are then exact fixed points of `D_a o E_a`, so
//! flat regions (and the frame) contribute nothing to the skeleton.
//!
//! The smooth skeleton is
//!
//! ```text
//! S_a(u) = ReLU(1 - ReLU(1 - sum_{j=0..J} (e^j - D_a(e^{j+1}))))
//! ```
//!
//! with `e^0 = u` and `e^{i+1} = E_a(e^i)`. [`smooth_skeleton`] records every
//! intermediate on a [`SkeletonTape`], and [`smooth_skeleton_vjp`] walks the
//! tape backwards to apply the transposed derivative to a cotangent.

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::morph::StructuringElement;

/// Default number of skeleton levels for the smooth skeleton.
pub const DEFAULT_SMOOTH_LEVELS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothParams {
    alpha: f64,
    levels: usize,
    element: StructuringElement,
}

impl SmoothParams {
    pub fn new(alpha: f64, levels: usize, element: StructuringElement) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be positive and finite, got {alpha}"
            )));
        }
        Ok(Self { alpha, levels, element })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn element(&self) -> &StructuringElement {
        &self.element
    }

    pub fn with_levels(&self, levels: usize) -> Self {
        Self { levels, ..self.clone() }
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(alpha, self.levels, self.element.clone())
    }
}

/// Softmax weights over the element entries at one pixel, aligned with
/// [`StructuringElement::offsets`].
#[derive(Debug, Clone, PartialEq)]
pub struct PixelKernel {
    pub offsets: Vec<(isize, isize)>,
    pub weights: Vec<f64>,
}

// Gathers the window around (r, c) into `buf`, scaled by `sign`.
#[inline]
fn gather(u: &GrayImage, b: &StructuringElement, r: usize, c: usize, sign: f64, buf: &mut Vec<f64>) {
    buf.clear();
    buf.extend(b.offsets().iter().map(|&(dy, dx)| sign * u.get_clamped(r, c, dy, dx)));
}

// Shifted log-sum-exp: returns (max, sum of exp((v - max)/alpha)).
#[inline]
fn shifted_sum(vals: &[f64], alpha: f64) -> (f64, f64) {
    let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s = vals.iter().map(|&v| ((v - m) / alpha).exp()).sum();
    (m, s)
}

fn smooth_max_image(u: &GrayImage, p: &SmoothParams, sign: f64) -> GrayImage {
    let (h, w) = u.shape();
    let b = p.element();
    let mut buf = Vec::with_capacity(b.len());
    let mut out = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            gather(u, b, r, c, sign, &mut buf);
            let (m, s) = shifted_sum(&buf, p.alpha);
            out.push(m + p.alpha * s.ln());
        }
    }
    GrayImage::from_vec_unchecked(h, w, out)
}

/// Log-sum-exp dilation at temperature `alpha`.
pub fn smooth_dilate(u: &GrayImage, p: &SmoothParams) -> GrayImage {
    smooth_max_image(u, p, 1.0)
}

/// Smooth erosion, defined as `-smooth_dilate(-u)`.
pub fn smooth_erode(u: &GrayImage, p: &SmoothParams) -> GrayImage {
    smooth_max_image(u, p, -1.0).neg()
}

fn pixel_kernel(u: &GrayImage, p: &SmoothParams, row: usize, col: usize, sign: f64) -> Result<PixelKernel> {
    if row >= u.height() || col >= u.width() {
        return Err(Error::InvalidParameter(format!(
            "pixel ({row}, {col}) outside {}x{} image",
            u.height(),
            u.width()
        )));
    }
    let b = p.element();
    let mut buf = Vec::with_capacity(b.len());
    gather(u, b, row, col, sign, &mut buf);
    let (m, s) = shifted_sum(&buf, p.alpha);
    let weights = buf.iter().map(|&v| ((v - m) / p.alpha).exp() / s).collect();
    Ok(PixelKernel {
        offsets: b.offsets().to_vec(),
        weights,
    })
}

/// Smooth dilation kernel `K_D(u)(x, .)`: softmax of the window at `(row, col)`.
pub fn dilation_kernel(u: &GrayImage, p: &SmoothParams, row: usize, col: usize) -> Result<PixelKernel> {
    pixel_kernel(u, p, row, col, 1.0)
}

/// Smooth erosion kernel `K_E(u)(x, .)`: softmin of the window at `(row, col)`.
pub fn erosion_kernel(u: &GrayImage, p: &SmoothParams, row: usize, col: usize) -> Result<PixelKernel> {
    pixel_kernel(u, p, row, col, -1.0)
}

// Applies the transposed Jacobian of the smooth dilation (sign = 1) or
// erosion (sign = -1) at `v` to `s`: each pixel scatters s(x) * K(x, z)
// onto the (clamped) window sample it was computed from.
fn smooth_adjoint(v: &GrayImage, p: &SmoothParams, s: &GrayImage, sign: f64) -> GrayImage {
    let (h, w) = v.shape();
    let b = p.element();
    let mut buf = Vec::with_capacity(b.len());
    let mut out = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let g = s.get(r, c);
            if g == 0.0 {
                continue;
            }
            gather(v, b, r, c, sign, &mut buf);
            let (m, total) = shifted_sum(&buf, p.alpha);
            let scale = g / total;
            for (&(dy, dx), &val) in b.offsets().iter().zip(&buf) {
                out[v.clamped_index(r, c, dy, dx)] += scale * ((val - m) / p.alpha).exp();
            }
        }
    }
    GrayImage::from_vec_unchecked(h, w, out)
}

/// Transposed derivative of [`smooth_dilate`] at `v`, applied to `s`.
pub fn smooth_dilate_vjp(v: &GrayImage, p: &SmoothParams, s: &GrayImage) -> Result<GrayImage> {
    v.ensure_same_shape(s)?;
    Ok(smooth_adjoint(v, p, s, 1.0))
}

/// Transposed derivative of [`smooth_erode`] at `v`, applied to `s`.
pub fn smooth_erode_vjp(v: &GrayImage, p: &SmoothParams, s: &GrayImage) -> Result<GrayImage> {
    v.ensure_same_shape(s)?;
    Ok(smooth_adjoint(v, p, s, -1.0))
}

#[inline]
fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Heaviside step with `H(0) = 0`.
#[inline]
fn heaviside(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

#[inline]
fn project_scalar(x: f64) -> f64 {
    relu(1.0 - relu(1.0 - x))
}

/// Projection onto `[0, 1]` written as `ReLU(1 - ReLU(1 - u))`.
pub fn project_unit(u: &GrayImage) -> GrayImage {
    u.map_unchecked(project_scalar)
}

/// Every intermediate of one smooth-skeleton evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonTape {
    params: SmoothParams,
    /// `e^0 = u, e^1, ..., e^{J+1}`.
    erosions: Vec<GrayImage>,
    /// `D_a(e^{j+1})` for `j = 0..=J`.
    dilations: Vec<GrayImage>,
    /// `S_j = e^j - D_a(e^{j+1})`.
    levels: Vec<GrayImage>,
    sum: GrayImage,
    projected: GrayImage,
}

impl SkeletonTape {
    pub fn params(&self) -> &SmoothParams {
        &self.params
    }

    pub fn input(&self) -> &GrayImage {
        &self.erosions[0]
    }

    pub fn erosions(&self) -> &[GrayImage] {
        &self.erosions
    }

    pub fn dilations(&self) -> &[GrayImage] {
        &self.dilations
    }

    pub fn levels(&self) -> &[GrayImage] {
        &self.levels
    }

    /// Pre-projection sum of the levels.
    pub fn sum(&self) -> &GrayImage {
        &self.sum
    }

    pub fn output(&self) -> &GrayImage {
        &self.projected
    }

    /// Recomputes the projected skeleton from the recorded stages.
    pub fn replay(&self) -> GrayImage {
        let (h, w) = self.sum.shape();
        let mut acc = vec![0.0; h * w];
        for j in 0..self.dilations.len() {
            let d = smooth_dilate(&self.erosions[j + 1], &self.params);
            for ((a, &e), &dv) in acc.iter_mut().zip(self.erosions[j].data()).zip(d.data()) {
                *a += e - dv;
            }
        }
        project_unit(&GrayImage::from_vec_unchecked(h, w, acc))
    }
}

/// Smooth skeleton of `u` with its evaluation tape.
pub fn smooth_skeleton(u: &GrayImage, p: &SmoothParams) -> (GrayImage, SkeletonTape) {
    let depth = p.levels();
    let mut erosions = Vec::with_capacity(depth + 2);
    erosions.push(u.clone());
    for i in 0..=depth {
        let next = smooth_erode(&erosions[i], p);
        erosions.push(next);
    }

    let (h, w) = u.shape();
    let mut dilations = Vec::with_capacity(depth + 1);
    let mut levels = Vec::with_capacity(depth + 1);
    let mut acc = vec![0.0; h * w];
    for j in 0..=depth {
        let d = smooth_dilate(&erosions[j + 1], p);
        let level: Vec<f64> = erosions[j].data().iter().zip(d.data()).map(|(e, dv)| e - dv).collect();
        for (a, l) in acc.iter_mut().zip(&level) {
            *a += l;
        }
        dilations.push(d);
        levels.push(GrayImage::from_vec_unchecked(h, w, level));
    }
    let sum = GrayImage::from_vec_unchecked(h, w, acc);
    let projected = project_unit(&sum);
    let tape = SkeletonTape {
        params: p.clone(),
        erosions,
        dilations,
        levels,
        sum,
        projected: projected.clone(),
    };
    (projected, tape)
}

/// Applies the transposed derivative of the smooth skeleton (recorded on
/// `tape`) to `cotangent`.
///
/// The projection contributes `H(1 - ReLU(1 - s)) * H(1 - s)` with `H(0) = 0`,
/// so the gradient vanishes wherever the pre-projection sum is `<= 0` or `>= 1`.
pub fn smooth_skeleton_vjp(tape: &SkeletonTape, cotangent: &GrayImage) -> Result<GrayImage> {
    tape.sum.ensure_same_shape(cotangent)?;
    let p = &tape.params;
    let depth = tape.dilations.len() - 1;

    let g_sum = tape.sum.zip_map(cotangent, |s, c| {
        c * heaviside(1.0 - relu(1.0 - s)) * heaviside(1.0 - s)
    })?;
    let neg_g_sum = g_sum.neg();

    // grads[i] accumulates d/d e^i.
    let mut grads: Vec<Vec<f64>> = vec![g_sum.data().to_vec(); depth + 1];
    grads.push(vec![0.0; g_sum.len()]);

    for j in 0..=depth {
        let back = smooth_adjoint(&tape.erosions[j + 1], p, &neg_g_sum, 1.0);
        for (g, b) in grads[j + 1].iter_mut().zip(back.data()) {
            *g += b;
        }
    }

    let (h, w) = g_sum.shape();
    for i in (1..=depth + 1).rev() {
        let upstream = GrayImage::from_vec_unchecked(h, w, std::mem::take(&mut grads[i]));
        let back = smooth_adjoint(&tape.erosions[i - 1], p, &upstream, -1.0);
        for (g, b) in grads[i - 1].iter_mut().zip(back.data()) {
            *g += b;
        }
    }
    Ok(GrayImage::from_vec_unchecked(h, w, std::mem::take(&mut grads[0])))
}
