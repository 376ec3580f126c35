//! Skeleton-prior mask refinement.
//!
//! Minimizes
//!
//! ```text
//! <-o, u> + gamma * (<u, ln u> + <1-u, ln(1-u)>) + R(u) + C(u)
//! ```
//!
//! where `C(u) = 1/2 |S_a(u) - S_a(g)|^2` compares smooth skeletons. The
//! skeleton cost is split off onto an auxiliary `w` coupled to `u` through
//! `eta * |w - u|_1`; the L1 norm is written in its dual form with
//! `|q|_inf <= 1`. Each outer iteration then does
//!
//! 1. `q <- clamp(q + (w - u), -1, 1)`
//! 2. `w <- w - iota * (dC/dw(w) + eta * q)`
//! 3. `p <- lambda * f * (1 - 2u)`, `u <- sigmoid((o - p + eta * q) / gamma)`
//!
//! until `max |u_next - u| < tol` or `max_iter` iterations have run.

use crate::energy::{td_subgradient, total_energy, xlogx, GaussianKernel};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::morph::StructuringElement;
use crate::smooth::{smooth_skeleton, smooth_skeleton_vjp, SmoothParams, DEFAULT_SMOOTH_LEVELS};

/// Solver hyperparameters. Defaults follow the reference settings
/// (k = 5, T = 20, gamma = 1, lambda = 1, alpha = 0.05, eta = 1, iota = 0.01).
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Entropy weight.
    pub gamma: f64,
    /// Threshold-dynamics weight.
    pub lambda: f64,
    /// Morphology temperature.
    pub alpha: f64,
    /// L1 penalty weight coupling `w` and `u`.
    pub eta: f64,
    /// Step size of the `w` update.
    pub iota: f64,
    pub kernel_size: usize,
    pub sigma: f64,
    /// Skeleton depth `J`.
    pub levels: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub element: StructuringElement,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            lambda: 1.0,
            alpha: 0.05,
            eta: 1.0,
            iota: 1e-2,
            kernel_size: 5,
            sigma: 1.0,
            levels: DEFAULT_SMOOTH_LEVELS,
            max_iter: 20,
            tol: 1e-4,
            element: StructuringElement::square(1),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )))
            }
        };
        let nonnegative = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "{name} must be nonnegative and finite, got {v}"
                )))
            }
        };
        positive("gamma", self.gamma)?;
        nonnegative("lambda", self.lambda)?;
        positive("alpha", self.alpha)?;
        nonnegative("eta", self.eta)?;
        positive("iota", self.iota)?;
        positive("sigma", self.sigma)?;
        positive("tol", self.tol)?;
        if self.kernel_size == 0 || self.kernel_size.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "kernel_size must be odd and positive, got {}",
                self.kernel_size
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be positive".into()));
        }
        Ok(())
    }

    pub fn smooth_params(&self) -> Result<SmoothParams> {
        SmoothParams::new(self.alpha, self.levels, self.element.clone())
    }

    pub fn gaussian(&self) -> Result<GaussianKernel> {
        GaussianKernel::new(self.kernel_size, self.sigma)
    }
}

/// Iterates of the splitting scheme plus per-iteration diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub u: GrayImage,
    pub w: GrayImage,
    pub q: GrayImage,
    pub p: GrayImage,
    pub iter: usize,
    pub energy_trace: Vec<f64>,
    /// `max |u^{t+1} - u^t|` per iteration.
    pub residual_trace: Vec<f64>,
}

impl SolverState {
    pub fn final_residual(&self) -> Option<f64> {
        self.residual_trace.last().copied()
    }
}

/// Logistic function, kept strictly inside `(0, 1)` in floating point.
pub fn sigmoid(x: f64) -> f64 {
    let s = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// `1/2 sum (S_a(w) - skel_g)^2`.
pub fn skeleton_cost(w: &GrayImage, skel_g: &GrayImage, p: &SmoothParams) -> Result<f64> {
    w.ensure_same_shape(skel_g)?;
    let (s, _) = smooth_skeleton(w, p);
    Ok(0.5
        * s.data()
            .iter()
            .zip(skel_g.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>())
}

/// Cost and its gradient `(dS_a/dw)^T (S_a(w) - skel_g)` from one skeleton pass.
pub fn skeleton_cost_and_grad(w: &GrayImage, skel_g: &GrayImage, p: &SmoothParams) -> Result<(f64, GrayImage)> {
    w.ensure_same_shape(skel_g)?;
    let (s, tape) = smooth_skeleton(w, p);
    let residual = s.zip_map(skel_g, |a, b| a - b)?;
    let cost = 0.5 * residual.data().iter().map(|r| r * r).sum::<f64>();
    let grad = smooth_skeleton_vjp(&tape, &residual)?;
    Ok((cost, grad))
}

pub fn skeleton_cost_grad(w: &GrayImage, skel_g: &GrayImage, p: &SmoothParams) -> Result<GrayImage> {
    skeleton_cost_and_grad(w, skel_g, p).map(|(_, g)| g)
}

/// Dual ascent step projected onto `|q|_inf <= 1`.
pub fn update_q(q: &GrayImage, w: &GrayImage, u: &GrayImage) -> Result<GrayImage> {
    q.ensure_same_shape(w)?;
    q.ensure_same_shape(u)?;
    let data = q
        .data()
        .iter()
        .zip(w.data())
        .zip(u.data())
        .map(|((&qv, &wv), &uv)| (qv + (wv - uv)).clamp(-1.0, 1.0))
        .collect();
    GrayImage::new(q.height(), q.width(), data)
}

/// One explicit gradient step on `C(w) + eta <q, w>`. `w` is not projected.
pub fn update_w(w: &GrayImage, q_next: &GrayImage, skel_g: &GrayImage, cfg: &SolverConfig) -> Result<GrayImage> {
    w.ensure_same_shape(q_next)?;
    let grad = skeleton_cost_grad(w, skel_g, &cfg.smooth_params()?)?;
    step_w(w, &grad, q_next, cfg)
}

fn step_w(w: &GrayImage, grad: &GrayImage, q_next: &GrayImage, cfg: &SolverConfig) -> Result<GrayImage> {
    let data = w
        .data()
        .iter()
        .zip(grad.data())
        .zip(q_next.data())
        .map(|((&wv, &g), &qv)| wv - cfg.iota * (g + cfg.eta * qv))
        .collect();
    GrayImage::new(w.height(), w.width(), data)
}

/// Closed-form minimizer of the per-pixel subproblem:
/// `u = sigmoid((o - p + eta * q) / gamma)`.
pub fn update_u(o: &GrayImage, p: &GrayImage, q_next: &GrayImage, cfg: &SolverConfig) -> Result<GrayImage> {
    if !(cfg.gamma.is_finite() && cfg.gamma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma must be positive, got {}",
            cfg.gamma
        )));
    }
    o.ensure_same_shape(p)?;
    o.ensure_same_shape(q_next)?;
    let data = o
        .data()
        .iter()
        .zip(p.data())
        .zip(q_next.data())
        .map(|((&ov, &pv), &qv)| sigmoid((ov - pv + cfg.eta * qv) / cfg.gamma))
        .collect();
    GrayImage::new(o.height(), o.width(), data)
}

/// Per-pixel objective of the `u` subproblem:
/// `(-o + p - eta q) u + gamma (u ln u + (1-u) ln(1-u))`.
pub fn subproblem_objective(u: f64, o: f64, p: f64, q: f64, gamma: f64, eta: f64) -> f64 {
    (-o + p - eta * q) * u + gamma * (xlogx(u) + xlogx(1.0 - u))
}

/// `u = sigmoid(o)`, `w = (u + skel_g) / 2`, `q = clamp(w - u, -1, 1)`, `p = 0`.
pub fn init_state(o: &GrayImage, skel_g: &GrayImage) -> Result<SolverState> {
    o.ensure_same_shape(skel_g)?;
    let u = o.map(sigmoid)?;
    let w = u.zip_map(skel_g, |a, b| (a + b) / 2.0)?;
    let q = w.zip_map(&u, |a, b| (a - b).clamp(-1.0, 1.0))?;
    let p = GrayImage::zeros(o.height(), o.width());
    Ok(SolverState {
        u,
        w,
        q,
        p,
        iter: 0,
        energy_trace: Vec::new(),
        residual_trace: Vec::new(),
    })
}

fn check_finite(img: &GrayImage, what: &str, iteration: usize) -> Result<()> {
    if img.all(f64::is_finite) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            what: what.into(),
            iteration,
        })
    }
}

/// Refines `o` toward masks whose smooth skeleton matches that of `prior`.
/// The prior's skeleton is computed once up front.
pub fn refine(o: &GrayImage, prior: &GrayImage, cfg: &SolverConfig) -> Result<(GrayImage, SolverState)> {
    cfg.validate()?;
    o.ensure_same_shape(prior)?;
    if !prior.all(|v| (0.0..=1.0).contains(&v)) {
        return Err(Error::InvalidParameter("prior mask must lie in [0, 1]".into()));
    }
    let (skel_g, _) = smooth_skeleton(prior, &cfg.smooth_params()?);
    refine_with_skeleton(o, &skel_g, cfg)
}

/// Same as [`refine`] but takes the target skeleton directly.
pub fn refine_with_skeleton(o: &GrayImage, skel_g: &GrayImage, cfg: &SolverConfig) -> Result<(GrayImage, SolverState)> {
    refine_observed(o, skel_g, cfg, |_| {})
}

/// [`refine_with_skeleton`] calling `observe` on the state after every iteration.
pub fn refine_observed(
    o: &GrayImage,
    skel_g: &GrayImage,
    cfg: &SolverConfig,
    mut observe: impl FnMut(&SolverState),
) -> Result<(GrayImage, SolverState)> {
    cfg.validate()?;
    o.ensure_same_shape(skel_g)?;
    if !skel_g.all(|v| (0.0..=1.0).contains(&v)) {
        return Err(Error::InvalidParameter("target skeleton must lie in [0, 1]".into()));
    }
    let params = cfg.smooth_params()?;
    let f = cfg.gaussian()?;
    let mut state = init_state(o, skel_g)?;

    while state.iter < cfg.max_iter {
        let t = state.iter + 1;
        let q_next = update_q(&state.q, &state.w, &state.u)?;
        let (_, grad) = skeleton_cost_and_grad(&state.w, skel_g, &params)?;
        check_finite(&grad, "skeleton gradient", t)?;
        let w_next = step_w(&state.w, &grad, &q_next, cfg).map_err(|_| Error::NonFinite {
            what: "w".into(),
            iteration: t,
        })?;
        let p = td_subgradient(&state.u, &f, cfg.lambda)?;
        check_finite(&p, "p", t)?;
        let u_next = update_u(o, &p, &q_next, cfg).map_err(|e| match e {
            Error::InvalidImage(_) => Error::NonFinite {
                what: "u".into(),
                iteration: t,
            },
            other => other,
        })?;
        let residual = u_next.max_abs_diff(&state.u)?;
        let energy = total_energy(&u_next, o, &f, cfg, skel_g)?;
        if !energy.is_finite() {
            return Err(Error::NonFinite {
                what: "energy".into(),
                iteration: t,
            });
        }

        state.q = q_next;
        state.w = w_next;
        state.p = p;
        state.u = u_next;
        state.iter = t;
        state.energy_trace.push(energy);
        state.residual_trace.push(residual);
        observe(&state);

        if residual < cfg.tol {
            break;
        }
    }
    Ok((state.u.clone(), state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn logit_mask(m: &GrayImage) -> GrayImage {
        m.map(|v| {
            let t = v.clamp(1e-4, 1.0 - 1e-4);
            (t / (1.0 - t)).ln()
        })
        .unwrap()
    }

    #[test]
    fn defaults_and_validation() {
        let cfg = SolverConfig::default();
        assert_eq!(
            (
                cfg.kernel_size,
                cfg.max_iter,
                cfg.gamma,
                cfg.lambda,
                cfg.alpha,
                cfg.eta,
                cfg.iota
            ),
            (5, 20, 1.0, 1.0, 0.05, 1.0, 0.01)
        );
        cfg.validate().unwrap();
        for bad in [
            SolverConfig {
                gamma: 0.0,
                ..cfg.clone()
            },
            SolverConfig {
                tol: 0.0,
                ..cfg.clone()
            },
            SolverConfig {
                kernel_size: 4,
                ..cfg.clone()
            },
            SolverConfig {
                lambda: -1.0,
                ..cfg.clone()
            },
            SolverConfig {
                max_iter: 0,
                ..cfg.clone()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn sigmoid_stays_open() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(800.0) < 1.0);
        assert!(sigmoid(-800.0) > 0.0);
        assert!((sigmoid(2.0) - 0.880_797_077_977_882_3).abs() < 1e-15);
    }

    #[test]
    fn cost_cases() {
        let p = SmoothParams::new(0.05, 2, StructuringElement::square(1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = GrayImage::from_fn(8, 8, |_, _| rng.gen::<f64>()).unwrap();
        let (sg, _) = smooth_skeleton(&g, &p);
        assert_eq!(skeleton_cost(&g, &sg, &p).unwrap(), 0.0);
        assert!(skeleton_cost_grad(&g, &sg, &p).unwrap().all(|v| v == 0.0));

        let z = GrayImage::zeros(6, 6);
        assert_eq!(skeleton_cost(&z, &z, &p).unwrap(), 0.0);

        let w = GrayImage::from_fn(8, 8, |_, _| rng.gen::<f64>()).unwrap();
        let (sw, _) = smooth_skeleton(&w, &p);
        let direct = 0.5
            * sw.data()
                .iter()
                .zip(sg.data())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>();
        assert!((skeleton_cost(&w, &sg, &p).unwrap() - direct).abs() < 1e-14);
        assert!(skeleton_cost(&w, &GrayImage::zeros(7, 8), &p).is_err());
    }

    #[test]
    fn cost_grad_is_linear_in_residual() {
        let p = SmoothParams::new(0.05, 1, StructuringElement::square(1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let w = GrayImage::from_fn(7, 7, |_, _| rng.gen_range(0.1..0.9)).unwrap();
        let (sw, tape) = smooth_skeleton(&w, &p);
        let target = GrayImage::from_fn(7, 7, |_, _| rng.gen::<f64>()).unwrap();
        let r1 = sw.zip_map(&target, |a, b| a - b).unwrap();
        let r2 = r1.map(|v| 2.0 * v).unwrap();
        let g1 = smooth_skeleton_vjp(&tape, &r1).unwrap();
        let g2 = smooth_skeleton_vjp(&tape, &r2).unwrap();
        for (a, b) in g1.data().iter().zip(g2.data()) {
            assert!((2.0 * a - b).abs() <= 1e-14 * (1.0 + b.abs()));
        }
        assert_eq!(skeleton_cost_grad(&w, &target, &p).unwrap(), g1);
    }

    #[test]
    fn q_update_clamps() {
        let q = GrayImage::new(1, 3, vec![0.5, -0.9, 0.2]).unwrap();
        let w = GrayImage::new(1, 3, vec![0.8, -0.5, 0.3]).unwrap();
        let u = GrayImage::new(1, 3, vec![0.0, 0.0, 0.3]).unwrap();
        let next = update_q(&q, &w, &u).unwrap();
        assert_eq!(next.data(), &[1.0, -1.0, 0.2]);
        assert!(update_q(&q, &GrayImage::zeros(1, 2), &u).is_err());
    }

    #[test]
    fn w_update_steps() {
        let cfg = SolverConfig::default();
        // A flat prior skeleton equal to S_a(w): zero gradient.
        let w = GrayImage::filled(6, 6, 0.3);
        let (sw, _) = smooth_skeleton(&w, &cfg.smooth_params().unwrap());
        let zero_q = GrayImage::zeros(6, 6);
        assert_eq!(update_w(&w, &zero_q, &sw, &cfg).unwrap(), w);
        let ones = GrayImage::filled(6, 6, 1.0);
        let stepped = update_w(&w, &ones, &sw, &cfg).unwrap();
        assert!(stepped.all(|v| (v - 0.29).abs() < 1e-15));

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = GrayImage::from_fn(6, 6, |_, _| rng.gen_range(0.1..0.9)).unwrap();
        let q = GrayImage::from_fn(6, 6, |_, _| rng.gen_range(-1.0..1.0)).unwrap();
        let grad = skeleton_cost_grad(&w, &sw, &cfg.smooth_params().unwrap()).unwrap();
        let expected = GrayImage::from_fn(6, 6, |r, c| w.get(r, c) - 0.01 * (grad.get(r, c) + q.get(r, c))).unwrap();
        assert!(update_w(&w, &q, &sw, &cfg).unwrap().max_abs_diff(&expected).unwrap() < 1e-15);
    }

    #[test]
    fn u_update_cases() {
        let cfg = SolverConfig::default();
        let z = GrayImage::zeros(2, 2);
        assert!(update_u(&z, &z, &z, &cfg).unwrap().all(|v| v == 0.5));

        let o = GrayImage::filled(1, 1, 4.59512);
        let u = update_u(&o, &GrayImage::zeros(1, 1), &GrayImage::zeros(1, 1), &cfg).unwrap();
        assert!((u.get(0, 0) - 0.99).abs() < 1e-5);
        // grid-search cross-check
        let best = (1..10_000)
            .map(|i| i as f64 / 10_000.0)
            .min_by(|a, b| {
                subproblem_objective(*a, 4.59512, 0.0, 0.0, 1.0, 1.0)
                    .total_cmp(&subproblem_objective(*b, 4.59512, 0.0, 0.0, 1.0, 1.0))
            })
            .unwrap();
        assert!((best - 0.99).abs() <= 1e-4);

        let sharper = SolverConfig {
            gamma: 0.5,
            ..cfg.clone()
        };
        let o = GrayImage::new(1, 2, vec![1.0, -1.0]).unwrap();
        let base = update_u(&o, &GrayImage::zeros(1, 2), &GrayImage::zeros(1, 2), &cfg).unwrap();
        let sharp = update_u(&o, &GrayImage::zeros(1, 2), &GrayImage::zeros(1, 2), &sharper).unwrap();
        assert!(sharp.get(0, 0) > base.get(0, 0));
        assert!(sharp.get(0, 1) < base.get(0, 1));
        assert!(update_u(&o, &o, &o, &SolverConfig { gamma: 0.0, ..cfg }).is_err());
    }

    #[test]
    fn init_cases() {
        let z = GrayImage::zeros(3, 3);
        let s = init_state(&z, &z).unwrap();
        assert!(s.u.all(|v| v == 0.5) && s.w.all(|v| v == 0.25) && s.q.all(|v| v == -0.25));
        assert_eq!(s.iter, 0);
        assert!(s.energy_trace.is_empty() && s.residual_trace.is_empty());

        let s = init_state(&z, &GrayImage::filled(3, 3, 1.0)).unwrap();
        assert!(s.w.all(|v| v == 0.75) && s.q.all(|v| v == 0.25));

        let s = init_state(&GrayImage::filled(3, 3, 40.0), &GrayImage::filled(3, 3, 1.0)).unwrap();
        assert!(s.u.all(|v| v > 1.0 - 1e-12) && s.w.all(|v| v > 1.0 - 1e-12) && s.q.all(|v| v.abs() < 1e-12));
        assert!(init_state(&z, &GrayImage::zeros(3, 4)).is_err());
    }

    #[test]
    fn huge_tolerance_runs_once() {
        let cfg = SolverConfig {
            tol: 10.0,
            ..SolverConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let o = GrayImage::from_fn(10, 10, |_, _| rng.gen_range(-2.0..2.0)).unwrap();
        let prior = GrayImage::from_fn(10, 10, |r, _| if r == 5 { 1.0 } else { 0.0 }).unwrap();
        let (_, state) = refine(&o, &prior, &cfg).unwrap();
        assert_eq!(state.iter, 1);
        assert_eq!(state.energy_trace.len(), 1);
        assert_eq!(state.residual_trace.len(), 1);
    }

    #[test]
    fn decoupled_solver_returns_sigmoid() {
        let cfg = SolverConfig {
            eta: 0.0,
            lambda: 0.0,
            ..SolverConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let o = GrayImage::from_fn(9, 9, |_, _| rng.gen_range(-3.0..3.0)).unwrap();
        let prior = GrayImage::from_fn(9, 9, |r, c| if r == c { 1.0 } else { 0.0 }).unwrap();
        let (u, state) = refine(&o, &prior, &cfg).unwrap();
        assert_eq!(u, o.map(sigmoid).unwrap());
        assert_eq!(state.residual_trace, vec![0.0]);
    }

    #[test]
    fn clean_mask_stays_put() {
        let mask = GrayImage::from_fn(24, 24, |r, c| {
            if (8..=15).contains(&r) && (4..=19).contains(&c) {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let cfg = SolverConfig {
            lambda: 0.0,
            ..SolverConfig::default()
        };
        let o = logit_mask(&mask);
        let (u, state) = refine(&o, &mask, &cfg).unwrap();
        assert!(state.iter <= 20);
        assert!(u.max_abs_diff(&o.map(sigmoid).unwrap()).unwrap() <= 0.05);
    }

    #[test]
    fn rejects_bad_prior() {
        let cfg = SolverConfig::default();
        let o = GrayImage::zeros(4, 4);
        assert!(refine(&o, &GrayImage::filled(4, 4, 1.5), &cfg).is_err());
        assert!(matches!(
            refine(&o, &GrayImage::zeros(4, 5), &cfg),
            Err(Error::SizeMismatch { .. })
        ));
    }
}
