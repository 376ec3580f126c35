//! Binary soft-threshold-dynamics energy.
//!
//! The boundary-length surrogate is `R(u) = lambda * <u, f * (1 - u)>` with a
//! truncated, unit-sum Gaussian `f`. Its supporting hyperplane at `u` has
//! slope `p = lambda * f * (1 - 2u)`, which is what the solver linearizes
//! with. The full objective adds a linear fidelity term, a binary entropy
//! barrier and the skeleton-matching cost.

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::solver::{skeleton_cost, SolverConfig};

/// Clamp applied to `u` before taking logarithms in the entropy term.
pub const ENTROPY_EPS: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKernel {
    size: usize,
    sigma: f64,
    weights: Vec<f64>,
}

impl GaussianKernel {
    /// Samples `exp(-|y|^2 / (2 sigma^2))` on the `size x size` grid of integer
    /// offsets centred at the origin and normalizes to unit sum.
    pub fn new(size: usize, sigma: f64) -> Result<Self> {
        if size == 0 || size.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "kernel size must be odd and positive, got {size}"
            )));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive and finite, got {sigma}"
            )));
        }
        let half = (size / 2) as isize;
        let mut weights = Vec::with_capacity(size * size);
        for dy in -half..=half {
            for dx in -half..=half {
                let d2 = (dy * dy + dx * dx) as f64;
                weights.push((-d2 / (2.0 * sigma * sigma)).exp());
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self { size, sigma, weights })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Row-major `size x size` weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, dy: isize, dx: isize) -> f64 {
        let half = (self.size / 2) as isize;
        self.weights[((dy + half) * self.size as isize + dx + half) as usize]
    }

    /// `(f * v)(x) = sum_y f(y) v(x - y)` with replicate-edge borders.
    pub fn convolve(&self, v: &GrayImage) -> GrayImage {
        let (h, w) = v.shape();
        let half = (self.size / 2) as isize;
        let mut out = Vec::with_capacity(h * w);
        for r in 0..h {
            for c in 0..w {
                let mut acc = 0.0;
                let mut k = 0;
                for dy in -half..=half {
                    for dx in -half..=half {
                        acc += self.weights[k] * v.get_clamped(r, c, -dy, -dx);
                        k += 1;
                    }
                }
                out.push(acc);
            }
        }
        GrayImage::from_vec_unchecked(h, w, out)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be nonnegative and finite, got {lambda}"
        )));
    }
    Ok(())
}

/// `lambda * sum_x u(x) (f * (1 - u))(x)`.
pub fn td_regularizer(u: &GrayImage, f: &GaussianKernel, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let smoothed = f.convolve(&u.map_unchecked(|v| 1.0 - v));
    Ok(lambda * u.dot(&smoothed)?)
}

/// `lambda * f * (1 - 2u)`.
pub fn td_subgradient(u: &GrayImage, f: &GaussianKernel, lambda: f64) -> Result<GrayImage> {
    check_lambda(lambda)?;
    let conv = f.convolve(&u.map_unchecked(|v| 1.0 - 2.0 * v));
    Ok(conv.map_unchecked(|v| lambda * v))
}

/// `t ln t` extended by continuity with `0 ln 0 = 0`.
#[inline]
pub fn xlogx(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        t * t.ln()
    }
}

/// `sum_x u ln u + (1 - u) ln(1 - u)` with `u` clamped to `[eps, 1 - eps]`.
pub fn binary_entropy_sum(u: &GrayImage) -> f64 {
    u.data()
        .iter()
        .map(|&v| {
            let t = v.clamp(ENTROPY_EPS, 1.0 - ENTROPY_EPS);
            xlogx(t) + xlogx(1.0 - t)
        })
        .sum()
}

/// Objective value
/// `<-o, u> + gamma * entropy(u) + R(u) + 1/2 |S_a(u) - skel_target|^2`.
pub fn total_energy(
    u: &GrayImage,
    o: &GrayImage,
    f: &GaussianKernel,
    cfg: &SolverConfig,
    skel_target: &GrayImage,
) -> Result<f64> {
    u.ensure_same_shape(o)?;
    u.ensure_same_shape(skel_target)?;
    let fidelity = -o.dot(u)?;
    let entropy = cfg.gamma * binary_entropy_sum(u);
    let reg = td_regularizer(u, f, cfg.lambda)?;
    let skel = skeleton_cost(u, skel_target, &cfg.smooth_params()?)?;
    Ok(fidelity + entropy + reg + skel)
}
