//! Independent numerical oracles.
//!
//! Central finite differences check the hand-written skeleton adjoint and the
//! skeleton-cost gradient; grid search checks the closed-form `u` update; the
//! remaining audits check the log-sum-exp bounds and the L1 duality identity.
//! Nothing here calls the adjoint code it is used to validate.

use rand::Rng;

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::morph::{dilate, erode};
use crate::smooth::{smooth_dilate, smooth_erode, smooth_skeleton, SkeletonTape, SmoothParams};
use crate::solver::{subproblem_objective, SolverConfig};

/// Default central-difference step.
pub const DEFAULT_STEP: f64 = 1e-5;
/// Pass threshold on the per-pixel relative error.
pub const GRAD_REL_TOL: f64 = 1e-3;
/// Sampled pixels whose own pre-projection skeleton sum lies within this
/// distance of a ReLU kink (0 or 1) are skipped.
pub const KINK_MARGIN: f64 = 0.05;
/// Every pre-projection value that a sampled pixel can influence must stay
/// at least this far from a kink, so the `+-step` probes stay on one branch.
pub const KINK_GUARD: f64 = 1e-3;
/// Denominator floor of the relative error, so vanishing gradients compare
/// on an absolute scale.
pub const REL_FLOOR: f64 = 1e-6;
/// Number of points of the `u` subproblem grid search.
pub const SUBPROBLEM_GRID: usize = 10_000;

/// Worst-case agreement between an analytic and a finite-difference gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub worst_pixel: (usize, usize),
    pub step: f64,
    pub samples: usize,
}

impl GradCheckReport {
    pub fn passes(&self, rel_tol: f64) -> bool {
        self.samples > 0 && self.max_rel_error <= rel_tol
    }

    /// Folds another report into this one, keeping the worst offender.
    pub fn merge(&mut self, other: &GradCheckReport) {
        if other.max_rel_error > self.max_rel_error || self.samples == 0 {
            self.max_rel_error = other.max_rel_error;
            self.worst_pixel = other.worst_pixel;
        }
        self.max_abs_error = self.max_abs_error.max(other.max_abs_error);
        self.samples += other.samples;
    }

    pub fn empty(step: f64) -> Self {
        Self {
            max_rel_error: 0.0,
            max_abs_error: 0.0,
            worst_pixel: (0, 0),
            step,
            samples: 0,
        }
    }
}

fn check_step(step: f64) -> Result<()> {
    if step.is_finite() && step > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "finite-difference step must be positive, got {step}"
        )))
    }
}

fn perturbed(u: &GrayImage, index: usize, delta: f64) -> GrayImage {
    let mut data = u.data().to_vec();
    data[index] += delta;
    GrayImage::from_vec_unchecked(u.height(), u.width(), data)
}

fn evaluate(f: &impl Fn(&GrayImage) -> f64, u: &GrayImage) -> Result<f64> {
    let v = f(u);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            what: "finite-difference functional".into(),
            iteration: 0,
        })
    }
}

/// Central difference of `f` at one pixel.
pub fn finite_diff_at(f: impl Fn(&GrayImage) -> f64, u: &GrayImage, row: usize, col: usize, step: f64) -> Result<f64> {
    check_step(step)?;
    let i = row * u.width() + col;
    let plus = evaluate(&f, &perturbed(u, i, step))?;
    let minus = evaluate(&f, &perturbed(u, i, -step))?;
    Ok((plus - minus) / (2.0 * step))
}

/// Central-difference gradient `(f(u + h e_x) - f(u - h e_x)) / 2h` at every pixel.
pub fn finite_diff(f: impl Fn(&GrayImage) -> f64, u: &GrayImage, step: f64) -> Result<GrayImage> {
    check_step(step)?;
    let mut out = Vec::with_capacity(u.len());
    for i in 0..u.len() {
        let plus = evaluate(&f, &perturbed(u, i, step))?;
        let minus = evaluate(&f, &perturbed(u, i, -step))?;
        out.push((plus - minus) / (2.0 * step));
    }
    GrayImage::new(u.height(), u.width(), out)
}

/// Central difference of `f` along direction `d`.
pub fn directional_diff(f: impl Fn(&GrayImage) -> f64, u: &GrayImage, d: &GrayImage, step: f64) -> Result<f64> {
    check_step(step)?;
    u.ensure_same_shape(d)?;
    let plus = u.zip_map(d, |a, b| a + step * b)?;
    let minus = u.zip_map(d, |a, b| a - step * b)?;
    Ok((evaluate(&f, &plus)? - evaluate(&f, &minus)?) / (2.0 * step))
}

/// `|a - n| / max(|a|, |n|, REL_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares `analytic` against central differences of `f` at `pixels`.
pub fn check_gradient(
    f: impl Fn(&GrayImage) -> f64,
    u: &GrayImage,
    analytic: &GrayImage,
    pixels: &[(usize, usize)],
    step: f64,
) -> Result<GradCheckReport> {
    u.ensure_same_shape(analytic)?;
    let mut report = GradCheckReport::empty(step);
    for &(r, c) in pixels {
        let numeric = finite_diff_at(&f, u, r, c, step)?;
        let a = analytic.get(r, c);
        let rel = relative_error(a, numeric);
        if rel > report.max_rel_error || report.samples == 0 {
            report.max_rel_error = rel;
            report.worst_pixel = (r, c);
        }
        report.max_abs_error = report.max_abs_error.max((a - numeric).abs());
        report.samples += 1;
    }
    Ok(report)
}

/// Chebyshev radius over which one input pixel can move the skeleton sum.
pub fn influence_radius(p: &SmoothParams) -> usize {
    (p.levels() + 2) * p.element().radius()
}

/// Pixels at which finite differences of the smooth skeleton are reliable:
/// the pixel's own pre-projection sum is at least [`KINK_MARGIN`] from
/// 0 and 1, and every sum it influences is at least [`KINK_GUARD`] away.
pub fn kink_safe_pixels(tape: &SkeletonTape) -> Vec<(usize, usize)> {
    let sum = tape.sum();
    let (h, w) = sum.shape();
    let dist = |v: f64| v.abs().min((1.0 - v).abs());
    let reach = influence_radius(tape.params()) as isize;
    let mut out = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if dist(sum.get(r, c)) < KINK_MARGIN {
                continue;
            }
            let guarded = (-reach..=reach).all(|dy| {
                (-reach..=reach).all(|dx| match sum.offset_index(r, c, dy, dx) {
                    Some(i) => dist(sum.data()[i]) >= KINK_GUARD,
                    None => true,
                })
            });
            if guarded {
                out.push((r, c));
            }
        }
    }
    out
}

/// Checks `vjp` (claimed to be `(dS_a/du)^T cotangent`) against finite
/// differences of `u -> <S_a(u), cotangent>` at kink-safe pixels.
pub fn check_skeleton_vjp(
    u: &GrayImage,
    p: &SmoothParams,
    cotangent: &GrayImage,
    vjp: &GrayImage,
    step: f64,
) -> Result<GradCheckReport> {
    let (_, tape) = smooth_skeleton(u, p);
    let pixels = kink_safe_pixels(&tape);
    let functional = |v: &GrayImage| {
        let (s, _) = smooth_skeleton(v, p);
        s.data().iter().zip(cotangent.data()).map(|(a, b)| a * b).sum::<f64>()
    };
    check_gradient(functional, u, vjp, &pixels, step)
}

/// Checks a claimed gradient of `w -> 1/2 |S_a(w) - skel_g|^2`.
pub fn check_skeleton_cost_grad(
    w: &GrayImage,
    skel_g: &GrayImage,
    p: &SmoothParams,
    grad: &GrayImage,
    step: f64,
) -> Result<GradCheckReport> {
    w.ensure_same_shape(skel_g)?;
    let (_, tape) = smooth_skeleton(w, p);
    let pixels = kink_safe_pixels(&tape);
    let cost = |v: &GrayImage| {
        let (s, _) = smooth_skeleton(v, p);
        0.5 * s
            .data()
            .iter()
            .zip(skel_g.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
    };
    check_gradient(cost, w, grad, &pixels, step)
}

/// Result of [`dual_l1_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct DualL1Report {
    /// `|y|_1`.
    pub l1: f64,
    /// `<sign(y), y>` with `sign(0) = 0`.
    pub dual_value: f64,
    /// Largest `<q, y>` over the random feasible `q`.
    pub max_feasible: f64,
    pub samples: usize,
}

impl DualL1Report {
    pub fn holds(&self) -> bool {
        self.l1 == self.dual_value && self.max_feasible <= self.l1
    }
}

/// Evaluates both sides of `|y|_1 = max_{|q|_inf <= 1} <q, y>`: the maximizer
/// `sign(y)` and `samples` random feasible `q`.
pub fn dual_l1_check(y: &GrayImage, samples: usize, rng: &mut impl Rng) -> DualL1Report {
    let l1: f64 = y.data().iter().map(|v| v.abs()).sum();
    let sign = |v: f64| {
        if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        }
    };
    let dual_value: f64 = y.data().iter().map(|&v| sign(v) * v).sum();
    let mut max_feasible = f64::NEG_INFINITY;
    for _ in 0..samples {
        let inner: f64 = y.data().iter().map(|&v| rng.gen_range(-1.0..=1.0) * v).sum();
        max_feasible = max_feasible.max(inner);
    }
    DualL1Report {
        l1,
        dual_value,
        max_feasible,
        samples,
    }
}

/// Largest violation of `D(u) <= D_a(u) <= D(u) + alpha ln|B|` and of the
/// mirrored erosion bound over all pixels. Zero when both hold.
pub fn sandwich_audit(u: &GrayImage, p: &SmoothParams) -> f64 {
    let b = p.element();
    let gap = p.alpha() * (b.len() as f64).ln();
    let (d, da) = (dilate(u, b), smooth_dilate(u, p));
    let (e, ea) = (erode(u, b), smooth_erode(u, p));
    let mut worst: f64 = 0.0;
    for i in 0..u.len() {
        let (dv, dav) = (d.data()[i], da.data()[i]);
        let (ev, eav) = (e.data()[i], ea.data()[i]);
        worst = worst.max(dv - dav).max(dav - dv - gap);
        worst = worst.max(eav - ev).max(ev - gap - eav);
    }
    worst
}

/// Largest `D_a(u) - D(u)` over the image.
pub fn dilation_gap(u: &GrayImage, p: &SmoothParams) -> f64 {
    let d = dilate(u, p.element());
    let da = smooth_dilate(u, p);
    da.data()
        .iter()
        .zip(d.data())
        .fold(f64::NEG_INFINITY, |m, (a, b)| m.max(a - b))
}

/// Grid-search minimizer of the per-pixel `u` subproblem over
/// [`SUBPROBLEM_GRID`] evenly spaced points in `[1e-6, 1 - 1e-6]`.
pub fn pixel_subproblem_oracle(o: f64, p: f64, q: f64, cfg: &SolverConfig) -> Result<f64> {
    if !(cfg.gamma.is_finite() && cfg.gamma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma must be positive, got {}",
            cfg.gamma
        )));
    }
    let (lo, hi) = (1e-6, 1.0 - 1e-6);
    let n = SUBPROBLEM_GRID;
    let mut best = (f64::INFINITY, lo);
    for i in 0..n {
        let u = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let phi = subproblem_objective(u, o, p, q, cfg.gamma, cfg.eta);
        if phi < best.0 {
            best = (phi, u);
        }
    }
    Ok(best.1)
}

/// Minimum value found by the grid search of [`pixel_subproblem_oracle`].
pub fn pixel_subproblem_grid_min(o: f64, p: f64, q: f64, cfg: &SolverConfig) -> Result<f64> {
    let u = pixel_subproblem_oracle(o, p, q, cfg)?;
    Ok(subproblem_objective(u, o, p, q, cfg.gamma, cfg.eta))
}
