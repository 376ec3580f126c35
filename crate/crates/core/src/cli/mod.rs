//! Command-line workflows: `skeletonize`, `refine`, `metrics`, `gradcheck`.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success (also `--help`, `--version`) |
//! | 1 | I/O failure |
//! | 2 | invalid flags or configuration |
//! | 3 | input file not found |
//! | 4 | unreadable image format |
//! | 5 | image size mismatch |
//! | 6 | non-finite solver state |
//! | 7 | gradient check failed |

pub mod config;
pub mod imageio;
pub mod manifest;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::image::GrayImage;
use crate::metrics::{evaluate, DEFAULT_THRESHOLD};
use crate::morph::{classic_skeleton, default_levels, StructuringElement};
use crate::numcheck::{
    check_skeleton_cost_grad, check_skeleton_vjp, dual_l1_check, pixel_subproblem_grid_min, sandwich_audit,
    GradCheckReport, DEFAULT_STEP, GRAD_REL_TOL,
};
use crate::smooth::{smooth_skeleton, smooth_skeleton_vjp, SmoothParams, DEFAULT_SMOOTH_LEVELS};
use crate::solver::{refine, refine_with_skeleton, skeleton_cost_grad, subproblem_objective, update_u, SolverConfig};
use manifest::RunManifest;

/// Clamp applied to mask values before taking the logit.
pub const MASK_EPS: f64 = 1e-4;

const SANDWICH_TOL: f64 = 1e-10;
const SUBPROBLEM_TOL: f64 = 1e-8;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Clap(#[from] clap::Error),
    #[error("{0}")]
    Usage(String),
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("cannot decode {}: {reason}", path.display())]
    Format { path: PathBuf, reason: String },
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("gradient check failed: {0}")]
    CheckFailed(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Clap(e) => e.exit_code(),
            CliError::Io { .. } => 1,
            CliError::Usage(_) => 2,
            CliError::MissingFile(_) => 3,
            CliError::Format { .. } => 4,
            CliError::SizeMismatch(_) => 5,
            CliError::Solver(_) => 6,
            CliError::CheckFailed(_) => 7,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::SizeMismatch { .. } => CliError::SizeMismatch(e.to_string()),
            Error::NonFinite { .. } => CliError::Solver(e.to_string()),
            Error::InvalidParameter(m) | Error::InvalidImage(m) => CliError::Usage(m),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "morsp",
    version,
    about = "Smooth morphology, skeletons and skeleton-prior mask refinement"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the classical or smooth skeleton of an image.
    Skeletonize(SkeletonizeArgs),
    /// Refine a rough mask toward a skeleton prior.
    Refine(Box<RefineArgs>),
    /// Compare a prediction against ground truth.
    Metrics(MetricsArgs),
    /// Run the finite-difference and oracle checks on random inputs.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Classic,
    Smooth,
}

#[derive(Debug, Args)]
pub struct SkeletonizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value = "classic")]
    pub mode: Mode,
    /// Temperature of the smooth mode.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Skeleton depth. Classic mode defaults to the depth at which the
    /// image erodes away (at most 10), smooth mode to 5.
    #[arg(long)]
    pub levels: Option<usize>,
    /// Structuring element as `square:R` or `disk:R`.
    #[arg(long, default_value = "square:1")]
    pub element: StructuringElement,
    /// Manifest path (default: `<output>.manifest`).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("prior").required(true).args(["skeleton_prior", "prior_mask"])))]
pub struct RefineArgs {
    /// Rough mask in [0, 1].
    #[arg(long)]
    pub mask: PathBuf,
    /// Ready-made target skeleton.
    #[arg(long)]
    pub skeleton_prior: Option<PathBuf>,
    /// Mask whose smooth skeleton becomes the target.
    #[arg(long)]
    pub prior_mask: Option<PathBuf>,
    /// Soft output `u`.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub binary_output: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Per-iteration `iter,energy,residual` CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Manifest path (default: `<output>.manifest`).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// `key=value` solver settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub iota: Option<f64>,
    #[arg(long)]
    pub kernel_size: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub element: Option<StructuringElement>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Element for the cl-Dice skeletons.
    #[arg(long, default_value = "square:1")]
    pub element: StructuringElement,
    /// Skeleton depth for cl-Dice (default: enough for both images).
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Random images per skeleton depth.
    #[arg(long, default_value_t = 20)]
    pub images: usize,
    /// Side length of the random images.
    #[arg(long, default_value_t = 12)]
    pub size: usize,
    /// Highest skeleton depth checked (depths 0 through this).
    #[arg(long, default_value_t = 2)]
    pub max_levels: usize,
    #[arg(long, default_value_t = DEFAULT_STEP)]
    pub step: f64,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Scale the analytic gradients by 1.01 before checking.
    #[arg(long, hide = true)]
    pub corrupt_gradient: bool,
}

/// Parses `args` (including the program name) and runs the command,
/// writing reports to `out`.
pub fn run<I, T>(args: I, out: &mut impl Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    match cli.command {
        Command::Skeletonize(a) => cmd_skeletonize(&a),
        Command::Refine(a) => cmd_refine(&a),
        Command::Metrics(a) => cmd_metrics(&a, out),
        Command::Gradcheck(a) => cmd_gradcheck(&a, out),
    }
}

fn default_manifest(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_manifest(path: &Path, m: &RunManifest) -> Result<(), CliError> {
    let text = m.to_text().map_err(|e| CliError::Usage(e.to_string()))?;
    write_text(path, &text)
}

fn report_io(out: &mut impl Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(|source| CliError::Io {
        path: PathBuf::from("<stdout>"),
        source,
    })
}

fn check_threshold(t: f64) -> Result<(), CliError> {
    if t.is_finite() && (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(CliError::Usage(format!("threshold must lie in [0, 1], got {t}")))
    }
}

fn ensure_same_size(a: &GrayImage, a_path: &Path, b: &GrayImage, b_path: &Path) -> Result<(), CliError> {
    if a.shape() == b.shape() {
        Ok(())
    } else {
        Err(CliError::SizeMismatch(format!(
            "{} is {}x{} but {} is {}x{}",
            a_path.display(),
            a.width(),
            a.height(),
            b_path.display(),
            b.width(),
            b.height()
        )))
    }
}

/// Feature map whose sigmoid recovers the mask: `ln(m / (1 - m))` on the
/// mask clamped to `[MASK_EPS, 1 - MASK_EPS]`.
pub fn mask_to_features(m: &GrayImage) -> GrayImage {
    m.map(|v| {
        let t = v.clamp(MASK_EPS, 1.0 - MASK_EPS);
        (t / (1.0 - t)).ln()
    })
    .expect("logit of a clamped mask is finite")
}

pub fn binarize(u: &GrayImage, threshold: f64) -> GrayImage {
    u.map(|v| if v > threshold { 1.0 } else { 0.0 })
        .expect("binary values are finite")
}

pub fn cmd_skeletonize(a: &SkeletonizeArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let smooth = if a.mode == Mode::Smooth {
        Some(SmoothParams::new(
            a.alpha,
            a.levels.unwrap_or(DEFAULT_SMOOTH_LEVELS),
            a.element.clone(),
        )?)
    } else {
        None
    };
    let u = imageio::read_gray(&a.input)?;
    let (skel, levels) = match smooth {
        Some(p) => (smooth_skeleton(&u, &p).0, p.levels()),
        None => {
            let levels = a.levels.unwrap_or_else(|| default_levels(&u, &a.element));
            (classic_skeleton(&u, &a.element, levels), levels)
        }
    };
    imageio::write_gray(&a.output, &skel)?;

    let mut m = RunManifest::new("skeletonize");
    let mode = if a.mode == Mode::Smooth { "smooth" } else { "classic" };
    m.config.push(("mode".into(), mode.into()));
    if a.mode == Mode::Smooth {
        m.config.push(("alpha".into(), a.alpha.to_string()));
    }
    m.config.push(("levels".into(), levels.to_string()));
    m.config.push(("element".into(), a.element.to_string()));
    m.inputs.push(("image".into(), path_str(&a.input)));
    m.outputs.push(("skeleton".into(), path_str(&a.output)));
    m.duration_s = start.elapsed().as_secs_f64();
    write_manifest(&a.manifest.clone().unwrap_or_else(|| default_manifest(&a.output)), &m)
}

/// Solver settings from defaults, then the config file, then flags.
pub fn resolve_config(a: &RefineArgs) -> Result<SolverConfig, CliError> {
    let mut cfg = SolverConfig::default();
    if let Some(path) = &a.config {
        config::load(path, &mut cfg)?;
    }
    macro_rules! take {
        ($($f:ident),*) => { $( if let Some(v) = &a.$f { cfg.$f = v.clone(); } )* };
    }
    take!(
        gamma,
        lambda,
        alpha,
        eta,
        iota,
        kernel_size,
        sigma,
        levels,
        max_iter,
        tol,
        element
    );
    cfg.validate()?;
    Ok(cfg)
}

pub fn cmd_refine(a: &RefineArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let cfg = resolve_config(a)?;
    check_threshold(a.threshold)?;

    let mask = imageio::read_gray(&a.mask)?;
    let (prior_path, prior_is_mask) = match (&a.prior_mask, &a.skeleton_prior) {
        (Some(p), _) => (p, true),
        (None, Some(p)) => (p, false),
        (None, None) => {
            return Err(CliError::Usage(
                "one of --prior-mask or --skeleton-prior is required".into(),
            ))
        }
    };
    let prior = imageio::read_gray(prior_path)?;
    ensure_same_size(&mask, &a.mask, &prior, prior_path)?;

    let o = mask_to_features(&mask);
    let (u, state) = if prior_is_mask {
        refine(&o, &prior, &cfg)?
    } else {
        refine_with_skeleton(&o, &prior, &cfg)?
    };

    imageio::write_gray(&a.output, &u)?;
    if let Some(path) = &a.binary_output {
        imageio::write_gray(path, &binarize(&u, a.threshold))?;
    }
    if let Some(path) = &a.trace {
        let mut csv = String::from("iter,energy,residual\n");
        for (i, (e, r)) in state.energy_trace.iter().zip(&state.residual_trace).enumerate() {
            writeln!(csv, "{},{e},{r}", i + 1).unwrap();
        }
        write_text(path, &csv)?;
    }

    let mut m = RunManifest::new("refine");
    m.config = config::entries(&cfg);
    m.config.push(("threshold".into(), a.threshold.to_string()));
    m.inputs.push(("mask".into(), path_str(&a.mask)));
    let prior_key = if prior_is_mask { "prior_mask" } else { "skeleton_prior" };
    m.inputs.push((prior_key.into(), path_str(prior_path)));
    if let Some(path) = &a.config {
        m.inputs.push(("config".into(), path_str(path)));
    }
    m.outputs.push(("soft".into(), path_str(&a.output)));
    if let Some(path) = &a.binary_output {
        m.outputs.push(("binary".into(), path_str(path)));
    }
    if let Some(path) = &a.trace {
        m.outputs.push(("trace".into(), path_str(path)));
    }
    m.iterations = state.iter;
    m.final_residual = state.final_residual();
    m.duration_s = start.elapsed().as_secs_f64();
    write_manifest(&a.manifest.clone().unwrap_or_else(|| default_manifest(&a.output)), &m)
}

pub fn cmd_metrics(a: &MetricsArgs, out: &mut impl Write) -> Result<(), CliError> {
    let start = Instant::now();
    check_threshold(a.threshold)?;
    let pred = imageio::read_gray(&a.pred)?;
    let gt = imageio::read_gray(&a.gt)?;
    ensure_same_size(&pred, &a.pred, &gt, &a.gt)?;
    let levels = a
        .levels
        .unwrap_or_else(|| default_levels(&pred, &a.element).max(default_levels(&gt, &a.element)));
    let r = evaluate(&pred, &gt, a.threshold, &a.element, levels)?;
    let c = r.counts;
    let text = format!(
        "precision={:.4}\nrecall={:.4}\nf1={:.4}\niou={:.4}\ncl_dice={:.4}\ntp={}\nfp={}\nfn={}\ntn={}\n",
        r.precision, r.recall, r.f1, r.iou, r.cl_dice, c.tp, c.fp, c.fn_, c.tn
    );
    report_io(out, &text)?;
    if let Some(path) = &a.manifest {
        let mut m = RunManifest::new("metrics");
        m.config.push(("threshold".into(), a.threshold.to_string()));
        m.config.push(("element".into(), a.element.to_string()));
        m.config.push(("levels".into(), levels.to_string()));
        m.inputs.push(("pred".into(), path_str(&a.pred)));
        m.inputs.push(("gt".into(), path_str(&a.gt)));
        m.duration_s = start.elapsed().as_secs_f64();
        write_manifest(path, &m)?;
    }
    Ok(())
}

/// Outcome of [`gradcheck_suite`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckSummary {
    pub vjp: GradCheckReport,
    /// `(image index, depth)` of the worst VJP sample.
    pub vjp_worst_case: (usize, usize),
    pub cost_grad: GradCheckReport,
    pub cost_grad_worst_case: (usize, usize),
    pub sandwich_violation: f64,
    pub dual_l1_ok: bool,
    pub subproblem_excess: f64,
    pub subproblem_instances: usize,
}

impl GradcheckSummary {
    pub fn passes(&self) -> bool {
        self.vjp.passes(GRAD_REL_TOL)
            && self.cost_grad.passes(GRAD_REL_TOL)
            && self.sandwich_violation <= SANDWICH_TOL
            && self.dual_l1_ok
            && self.subproblem_excess <= SUBPROBLEM_TOL
    }
}

fn random_image(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> GrayImage {
    GrayImage::from_fn(n, n, |_, _| rng.gen_range(lo..hi)).expect("random samples are finite")
}

fn track(total: &mut GradCheckReport, worst: &mut (usize, usize), r: &GradCheckReport, case: (usize, usize)) {
    if r.samples > 0 && (total.samples == 0 || r.max_rel_error > total.max_rel_error) {
        *worst = case;
    }
    total.merge(r);
}

/// Runs every check on seeded random inputs.
pub fn gradcheck_suite(a: &GradcheckArgs) -> Result<GradcheckSummary, CliError> {
    if a.size == 0 || a.images == 0 {
        return Err(CliError::Usage("--size and --images must be positive".into()));
    }
    if !(a.step.is_finite() && a.step > 0.0) {
        return Err(CliError::Usage(format!("--step must be positive, got {}", a.step)));
    }
    let base = SmoothParams::new(a.alpha, 0, StructuringElement::square(1))?;
    let scale = if a.corrupt_gradient { 1.01 } else { 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);

    let mut vjp = GradCheckReport::empty(a.step);
    let mut cost = GradCheckReport::empty(a.step);
    let (mut vjp_worst, mut cost_worst) = ((0, 0), (0, 0));
    let mut sandwich: f64 = 0.0;
    let mut dual_ok = true;
    for i in 0..a.images {
        for levels in 0..=a.max_levels {
            let p = base.with_levels(levels);
            let u = random_image(&mut rng, a.size, 0.1, 0.9);
            let cot = random_image(&mut rng, a.size, -1.0, 1.0);
            let (_, tape) = smooth_skeleton(&u, &p);
            let g = smooth_skeleton_vjp(&tape, &cot)?.map(|v| v * scale)?;
            let r = check_skeleton_vjp(&u, &p, &cot, &g, a.step)?;
            track(&mut vjp, &mut vjp_worst, &r, (i, levels));

            let w = random_image(&mut rng, a.size, 0.1, 0.9);
            let target = smooth_skeleton(&random_image(&mut rng, a.size, 0.0, 1.0), &p).0;
            let g = skeleton_cost_grad(&w, &target, &p)?.map(|v| v * scale)?;
            let r = check_skeleton_cost_grad(&w, &target, &p, &g, a.step)?;
            track(&mut cost, &mut cost_worst, &r, (i, levels));
        }
        let u = random_image(&mut rng, a.size, 0.0, 1.0);
        sandwich = sandwich.max(sandwich_audit(&u, &base));
        let y = random_image(&mut rng, a.size, -1.0, 1.0);
        dual_ok &= dual_l1_check(&y, 100, &mut rng).holds();
    }

    let cfg = SolverConfig {
        alpha: a.alpha,
        ..SolverConfig::default()
    };
    let n = 1000;
    let row = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
        GrayImage::from_fn(1, n, |_, _| rng.gen_range(lo..hi)).expect("random samples are finite")
    };
    let o = row(&mut rng, -5.0, 5.0);
    let p = row(&mut rng, -2.0, 2.0);
    let q = row(&mut rng, -1.0, 1.0);
    let u = update_u(&o, &p, &q, &cfg)?;
    let mut excess = f64::NEG_INFINITY;
    for k in 0..n {
        let (ok, pk, qk) = (o.get(0, k), p.get(0, k), q.get(0, k));
        let phi = subproblem_objective(u.get(0, k), ok, pk, qk, cfg.gamma, cfg.eta);
        excess = excess.max(phi - pixel_subproblem_grid_min(ok, pk, qk, &cfg)?);
    }

    Ok(GradcheckSummary {
        vjp,
        vjp_worst_case: vjp_worst,
        cost_grad: cost,
        cost_grad_worst_case: cost_worst,
        sandwich_violation: sandwich,
        dual_l1_ok: dual_ok,
        subproblem_excess: excess,
        subproblem_instances: n,
    })
}

pub fn cmd_gradcheck(a: &GradcheckArgs, out: &mut impl Write) -> Result<(), CliError> {
    let start = Instant::now();
    let s = gradcheck_suite(a)?;
    let status = if s.passes() { "pass" } else { "fail" };
    let where_ = |r: &GradCheckReport, (img, lv): (usize, usize)| {
        format!(
            "image={img} levels={lv} pixel=({},{})",
            r.worst_pixel.0, r.worst_pixel.1
        )
    };
    let mut text = String::new();
    writeln!(text, "seed={}", a.seed).unwrap();
    writeln!(text, "alpha={}", a.alpha).unwrap();
    writeln!(text, "step={:e}", a.step).unwrap();
    writeln!(text, "vjp_max_rel_error={:.3e}", s.vjp.max_rel_error).unwrap();
    writeln!(text, "vjp_max_abs_error={:.3e}", s.vjp.max_abs_error).unwrap();
    writeln!(text, "vjp_samples={}", s.vjp.samples).unwrap();
    writeln!(text, "vjp_worst={}", where_(&s.vjp, s.vjp_worst_case)).unwrap();
    writeln!(text, "cost_grad_max_rel_error={:.3e}", s.cost_grad.max_rel_error).unwrap();
    writeln!(text, "cost_grad_samples={}", s.cost_grad.samples).unwrap();
    writeln!(text, "cost_grad_worst={}", where_(&s.cost_grad, s.cost_grad_worst_case)).unwrap();
    writeln!(
        text,
        "max_rel_error={:.3e}",
        s.vjp.max_rel_error.max(s.cost_grad.max_rel_error)
    )
    .unwrap();
    writeln!(text, "sandwich_max_violation={:.3e}", s.sandwich_violation).unwrap();
    writeln!(text, "dual_l1={}", if s.dual_l1_ok { "ok" } else { "violated" }).unwrap();
    writeln!(text, "subproblem_max_excess={:.3e}", s.subproblem_excess).unwrap();
    writeln!(text, "status={status}").unwrap();
    report_io(out, &text)?;

    if let Some(path) = &a.manifest {
        let mut m = RunManifest::new("gradcheck");
        m.config.push(("seed".into(), a.seed.to_string()));
        m.config.push(("alpha".into(), a.alpha.to_string()));
        m.config.push(("images".into(), a.images.to_string()));
        m.config.push(("size".into(), a.size.to_string()));
        m.config.push(("max_levels".into(), a.max_levels.to_string()));
        m.config.push(("step".into(), a.step.to_string()));
        m.outputs.push(("status".into(), status.into()));
        m.duration_s = start.elapsed().as_secs_f64();
        write_manifest(path, &m)?;
    }

    if s.passes() {
        return Ok(());
    }
    let mut worst = Vec::new();
    if !s.vjp.passes(GRAD_REL_TOL) {
        worst.push(format!(
            "skeleton VJP rel error {:.3e} at {}",
            s.vjp.max_rel_error,
            where_(&s.vjp, s.vjp_worst_case)
        ));
    }
    if !s.cost_grad.passes(GRAD_REL_TOL) {
        worst.push(format!(
            "skeleton cost gradient rel error {:.3e} at {}",
            s.cost_grad.max_rel_error,
            where_(&s.cost_grad, s.cost_grad_worst_case)
        ));
    }
    if s.sandwich_violation > SANDWICH_TOL {
        worst.push(format!("sandwich bound violated by {:.3e}", s.sandwich_violation));
    }
    if !s.dual_l1_ok {
        worst.push("dual L1 identity violated".into());
    }
    if s.subproblem_excess > SUBPROBLEM_TOL {
        worst.push(format!("u-update above grid minimum by {:.3e}", s.subproblem_excess));
    }
    Err(CliError::CheckFailed(worst.join("; ")))
}
