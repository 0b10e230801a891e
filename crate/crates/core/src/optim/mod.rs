//! Adam, a finite-difference gradient checker and the fitting procedures.

mod adam;
mod fit;
mod gradcheck;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use fit::{
    agreement_dice, dual_objective, fit_dual_task, fit_dual_task_observed, fit_splat, fit_splat_observed, moment_init,
    splat_objective, DualTarget, EpochState, Evaluation, FitConfig, FitMode, FitResult, SoftMaskHead,
};
pub use gradcheck::{central_difference, gradient_check, DEFAULT_STEP, GRADCHECK_FLOOR};
