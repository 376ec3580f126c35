//! Smooth gray-scale morphology, differentiable morphological skeletons and
//! skeleton-prior mask refinement.
//!
//! - [`morph`]: classical dilation, erosion and skeleton.
//! - [`smooth`]: log-sum-exp morphology, smooth skeleton and its adjoint.
//! - [`energy`]: threshold-dynamics regularizer and the full objective.
//! - [`solver`]: the splitting scheme that refines a rough mask.
//! - [`numcheck`]: finite-difference and duality oracles.
//! - [`metrics`]: F1, IoU, precision, recall and cl-Dice.
//! - [`cli`]: file formats and the command-line workflows.

pub mod cli;
pub mod energy;
pub mod error;
pub mod image;
pub mod metrics;
pub mod morph;
pub mod numcheck;
pub mod smooth;
pub mod solver;

pub use error::{Error, Result};
pub use image::GrayImage;
pub use morph::{ElementShape, StructuringElement};
pub use smooth::{SkeletonTape, SmoothParams};
pub use solver::{SolverConfig, SolverState};
