//! Differentiable mask generation from 2D Gaussian splats.
//!
//! The crate is organised bottom-up:
//!
//! - [`grid`]: scalar fields, binary masks and PGM I/O shared by everything else.
//! - [`splat`]: one anisotropic Gaussian splat, its rasterizer and analytic gradients.
//! - [`levelset`]: exact signed Euclidean distance transform and the sigmoid
//!   reconversion from a level set back to a soft mask.
//! - [`loss`]: focal, Dice, L2 and dual-task consistency losses plus their weighted total.
//! - [`optim`]: Adam, a finite-difference gradient checker and the two fitting procedures.
//! - [`metrics`]: confusion-based segmentation metrics, ROC AUC, average precision, k-fold splits.
//! - [`synth`]: synthetic lesion shapes and the paired augmentation pipeline.
//!
//! Pixel `(i, j)` is column `i`, row `j`, stored row-major with its center at the
//! continuous coordinate `(i + 0.5, j + 0.5)`.

pub mod error;
pub mod grid;
pub mod levelset;
pub mod loss;
pub mod metrics;
pub mod optim;
pub mod splat;
pub mod synth;

mod reduce;

pub use error::{Error, Result};
pub use grid::{threshold, BinaryMask, ScalarField};
pub use levelset::{signed_edt, BoundaryRule, LevelSetField};
pub use loss::{LossBreakdown, LossWeights};
pub use metrics::{ConfusionCounts, EvalReport, FoldAssignment};
pub use optim::{AdamConfig, AdamState, FitConfig, FitResult};
pub use splat::{GaussianSplat, SplatGradient};
pub use synth::{AugmentationConfig, ShapeSpec};
