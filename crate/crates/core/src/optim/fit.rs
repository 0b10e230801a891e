//! Fitting a splat (and optionally a free level-set grid) to a mask.

use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use crate::error::{Error, Result};
use crate::grid::{threshold, BinaryMask, ScalarField, DEFAULT_THRESHOLD};
use crate::levelset::{sigmoid, signed_edt_with, BoundaryRule, LevelSetField};
use crate::loss::{
    dice_loss_grad, dtc_loss_grad, l2_loss_grad, total_loss, DtcSchedule, LossBreakdown, LossComponents, LossWeights,
};
use crate::metrics::{confusion, dice};
use crate::splat::{render, render_backward, GaussianSplat, SplatGradient, SCALE_EPSILON};

/// Turns a rendered splat `G` into the mask prediction `M = sigmoid(kappa (G - 0.5))`.
///
/// The head sharpens the Gaussian falloff into a near-binary mask without moving
/// its 0.5 crossing, so `threshold(M, 0.5)` and `threshold(G, 0.5)` agree. With
/// `sharpness = 0` the head is the identity and `M = G`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftMaskHead {
    pub sharpness: f64,
}

impl SoftMaskHead {
    pub fn new(sharpness: f64) -> Result<Self> {
        if !(sharpness >= 0.0 && sharpness.is_finite()) {
            return Err(Error::invalid(
                "mask_sharpness",
                format!("must be finite and >= 0, got {sharpness}"),
            ));
        }
        Ok(Self { sharpness })
    }

    pub fn identity() -> Self {
        Self { sharpness: 0.0 }
    }

    pub fn apply(&self, g: &ScalarField) -> ScalarField {
        if self.sharpness == 0.0 {
            return g.clone();
        }
        let k = self.sharpness;
        let values = g.values().iter().map(|&v| sigmoid(k * (v - 0.5))).collect();
        ScalarField::from_parts_unchecked(g.width(), g.height(), values)
    }

    /// Chains `dLoss/dM` back to `dLoss/dG` given the head output `m`.
    pub fn backward(&self, m: &ScalarField, d_m: &ScalarField) -> ScalarField {
        if self.sharpness == 0.0 {
            return d_m.clone();
        }
        let k = self.sharpness;
        let values = m
            .values()
            .iter()
            .zip(d_m.values())
            .map(|(&mv, &d)| d * k * mv * (1.0 - mv))
            .collect();
        ScalarField::from_parts_unchecked(m.width(), m.height(), values)
    }
}

/// Labeled target of a dual-task fit: the mask and its signed distance level set.
#[derive(Clone, Debug, PartialEq)]
pub struct DualTarget {
    pub mask: BinaryMask,
    pub level_set: LevelSetField,
}

impl DualTarget {
    /// `clip` limits the target level set to `[-clip, clip]`.
    pub fn new(mask: BinaryMask, rule: BoundaryRule, clip: Option<f64>) -> Result<Self> {
        let mut level_set = signed_edt_with(&mask, rule)?;
        if let Some(radius) = clip {
            level_set = level_set.clipped(radius)?;
        }
        Ok(Self { mask, level_set })
    }
}

/// Loss value and gradients at one parameter point.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub breakdown: LossBreakdown,
    pub splat_grad: SplatGradient,
    /// Gradient with respect to the level-set grid; `None` for splat-only objectives.
    pub lsf_grad: Option<ScalarField>,
    /// Mask prediction `M`.
    pub mask: ScalarField,
    /// Level-set reconversion `M'`; `None` for splat-only objectives.
    pub reconverted: Option<ScalarField>,
}

/// `lambda_dice Dice(M, Y) + lambda_m L2(M, Y)` and its splat gradient.
pub fn splat_objective(
    splat: &GaussianSplat,
    target: &BinaryMask,
    weights: &LossWeights,
    head: SoftMaskHead,
) -> Result<Evaluation> {
    let (w, h) = target.dims();
    let g = render(splat, w, h)?;
    let m = head.apply(&g);
    let (dice_value, d_dice) = dice_loss_grad(&m, target)?;
    let (mask_value, d_mask) = l2_loss_grad(&m, &target.to_field())?;
    let components = LossComponents {
        mask_loss: mask_value,
        dice_loss: dice_value,
        ..LossComponents::default()
    };
    let breakdown = total_loss(components, weights, 0.0)?;
    let d_m = combine(&[(weights.lambda_dice, &d_dice), (weights.lambda_m, &d_mask)]);
    let splat_grad = render_backward(splat, &head.backward(&m, &d_m))?;
    Ok(Evaluation {
        breakdown,
        splat_grad,
        lsf_grad: None,
        mask: m,
        reconverted: None,
    })
}

/// Dual-task total loss for the splat branch `M` and level-set branch `L`.
///
/// With a target, the mask L2, level-set L2 and Dice terms are active alongside
/// `lambda_dtc * L2(M', M)`; without one only the consistency term remains.
/// The classification term is not modelled and contributes 0.
pub fn dual_objective(
    splat: &GaussianSplat,
    lsf: &LevelSetField,
    target: Option<&DualTarget>,
    weights: &LossWeights,
    head: SoftMaskHead,
    lambda_dtc: f64,
) -> Result<Evaluation> {
    let (w, h) = lsf.dims();
    let g = render(splat, w, h)?;
    let m = head.apply(&g);
    let dtc = dtc_loss_grad(lsf, &m, weights)?;
    let mut components = LossComponents {
        dtc_loss: dtc.loss,
        ..LossComponents::default()
    };
    let (d_m, d_l) = match target {
        Some(t) => {
            t.mask.ensure_same_dims_as(lsf.dims())?;
            let (dice_value, d_dice) = dice_loss_grad(&m, &t.mask)?;
            let (mask_value, d_mask) = l2_loss_grad(&m, &t.mask.to_field())?;
            let (lsf_value, d_lsf) = l2_loss_grad(lsf.as_field(), t.level_set.as_field())?;
            components.dice_loss = dice_value;
            components.mask_loss = mask_value;
            components.lsf_loss = lsf_value;
            let d_m = combine(&[
                (weights.lambda_dice, &d_dice),
                (weights.lambda_m, &d_mask),
                (lambda_dtc, &dtc.d_mask),
            ]);
            let d_l = combine(&[(weights.lambda_l, &d_lsf), (lambda_dtc, &dtc.d_lsf)]);
            (d_m, d_l)
        }
        None => (
            combine(&[(lambda_dtc, &dtc.d_mask)]),
            combine(&[(lambda_dtc, &dtc.d_lsf)]),
        ),
    };
    let breakdown = total_loss(components, weights, lambda_dtc)?;
    let splat_grad = render_backward(splat, &head.backward(&m, &d_m))?;
    Ok(Evaluation {
        breakdown,
        splat_grad,
        lsf_grad: Some(d_l),
        mask: m,
        reconverted: Some(dtc.reconverted),
    })
}

fn combine(terms: &[(f64, &ScalarField)]) -> ScalarField {
    let first = terms[0].1;
    let values = (0..first.len())
        .map(|k| terms.iter().map(|(w, f)| w * f.values()[k]).sum())
        .collect();
    ScalarField::from_parts_unchecked(first.width(), first.height(), values)
}

trait SameDims {
    fn ensure_same_dims_as(&self, dims: (usize, usize)) -> Result<()>;
}

impl SameDims for BinaryMask {
    fn ensure_same_dims_as(&self, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::ShapeMismatch {
                expected: dims,
                actual: self.dims(),
            });
        }
        Ok(())
    }
}

/// Optimizer and schedule settings shared by both fitting procedures.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub epochs: usize,
    /// Adam settings for the five splat parameters.
    pub adam: AdamConfig,
    /// Learning rate for the level-set grid (same betas and eps as `adam`).
    pub lsf_lr: f64,
    /// Sharpness of the [`SoftMaskHead`]; 0 uses the raw Gaussian as the mask.
    pub mask_sharpness: f64,
    /// Epochs without improvement before the learning rates are cut.
    pub patience: usize,
    /// Absolute improvement that resets the patience counter.
    pub plateau_threshold: f64,
    pub lr_factor: f64,
    /// The fit stops (converged) once the rates have been cut this many times.
    pub max_lr_decays: usize,
    /// Splat fits stop as soon as the thresholded render equals the target.
    pub stop_on_exact_match: bool,
    pub dtc_schedule: DtcSchedule,
    /// Boundary rule for the target level set of labeled dual fits.
    pub boundary_rule: BoundaryRule,
    /// Optional clip radius for the target level set; off by default.
    pub lsf_clip: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            epochs: 400,
            adam: AdamConfig::default(),
            lsf_lr: 0.1,
            mask_sharpness: 40.0,
            patience: 25,
            plateau_threshold: 1e-4,
            lr_factor: 0.5,
            max_lr_decays: 6,
            stop_on_exact_match: true,
            dtc_schedule: DtcSchedule::Exponential,
            boundary_rule: BoundaryRule::OuterRing,
            lsf_clip: None,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs", "must be at least 1"));
        }
        self.adam.validate()?;
        AdamConfig::with_lr(self.lsf_lr).validate()?;
        SoftMaskHead::new(self.mask_sharpness)?;
        if !(self.plateau_threshold >= 0.0 && self.plateau_threshold.is_finite()) {
            return Err(Error::invalid("plateau_threshold", "must be finite and >= 0"));
        }
        if !(self.lr_factor > 0.0 && self.lr_factor < 1.0) {
            return Err(Error::invalid(
                "lr_factor",
                format!("must lie in (0, 1), got {}", self.lr_factor),
            ));
        }
        Ok(())
    }

    fn head(&self) -> SoftMaskHead {
        SoftMaskHead {
            sharpness: self.mask_sharpness,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    Splat,
    DualLabeled,
    DualUnlabeled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub mode: FitMode,
    pub splat: GaussianSplat,
    pub level_set: Option<LevelSetField>,
    /// Total loss at every epoch, evaluated before that epoch's update.
    pub loss_trace: Vec<f64>,
    /// Unweighted consistency loss per epoch (dual fits only).
    pub dtc_trace: Vec<f64>,
    pub epochs_run: usize,
    pub converged: bool,
    /// Equal to the last entry of `loss_trace`; the returned parameters produced it.
    pub final_loss: f64,
    pub final_breakdown: LossBreakdown,
    /// Dice between the thresholded mask prediction and the target.
    pub target_dice: Option<f64>,
    /// Dice between the thresholded splat mask `M` and level-set mask `M'`.
    pub cross_branch_dice: Option<f64>,
    pub initial_cross_branch_dice: Option<f64>,
}

/// Snapshot handed to fit observers once per epoch, before the update.
#[derive(Debug)]
pub struct EpochState<'a> {
    pub epoch: usize,
    pub splat: &'a GaussianSplat,
    pub level_set: Option<&'a LevelSetField>,
    pub mask: &'a ScalarField,
    pub breakdown: &'a LossBreakdown,
    pub lr: f64,
}

/// Learning-rate reduction on plateau (absolute threshold, no cooldown).
#[derive(Clone, Debug)]
struct Plateau {
    best: f64,
    bad_epochs: usize,
    decays: usize,
}

impl Plateau {
    fn new() -> Self {
        Self {
            best: f64::INFINITY,
            bad_epochs: 0,
            decays: 0,
        }
    }

    /// Returns true when the rates should be cut.
    fn observe(&mut self, value: f64, cfg: &FitConfig) -> bool {
        if value < self.best - cfg.plateau_threshold {
            self.best = value;
            self.bad_epochs = 0;
            return false;
        }
        self.bad_epochs += 1;
        if self.bad_epochs > cfg.patience {
            self.bad_epochs = 0;
            self.decays += 1;
            return true;
        }
        false
    }
}

/// Dice of two hard masks, taking two empty masks as perfect agreement.
pub fn agreement_dice(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let c = confusion(a, b)?;
    if c.tp + c.fp + c.fn_ == 0 {
        return Ok(1.0);
    }
    dice(&c)
}

fn cross_branch(eval: &Evaluation) -> Result<Option<f64>> {
    match &eval.reconverted {
        Some(r) => Ok(Some(agreement_dice(
            &threshold(&eval.mask, DEFAULT_THRESHOLD),
            &threshold(r, DEFAULT_THRESHOLD),
        )?)),
        None => Ok(None),
    }
}

/// Fits the splat so that its mask prediction matches `target`.
pub fn fit_splat(
    target: &BinaryMask,
    init: GaussianSplat,
    weights: &LossWeights,
    cfg: &FitConfig,
) -> Result<FitResult> {
    fit_splat_observed(target, init, weights, cfg, |_| {})
}

pub fn fit_splat_observed(
    target: &BinaryMask,
    init: GaussianSplat,
    weights: &LossWeights,
    cfg: &FitConfig,
    observer: impl FnMut(&EpochState),
) -> Result<FitResult> {
    target.ensure_both_classes()?;
    run(Problem::Splat { target }, init, weights, cfg, observer)
}

/// Jointly fits the splat branch and a free level-set grid.
///
/// `target = None` trains both branches from the consistency term alone.
pub fn fit_dual_task(
    target: Option<&BinaryMask>,
    init_splat: GaussianSplat,
    init_lsf: LevelSetField,
    weights: &LossWeights,
    cfg: &FitConfig,
) -> Result<FitResult> {
    fit_dual_task_observed(target, init_splat, init_lsf, weights, cfg, |_| {})
}

pub fn fit_dual_task_observed(
    target: Option<&BinaryMask>,
    init_splat: GaussianSplat,
    init_lsf: LevelSetField,
    weights: &LossWeights,
    cfg: &FitConfig,
    observer: impl FnMut(&EpochState),
) -> Result<FitResult> {
    cfg.validate()?;
    let dual_target = match target {
        Some(mask) => {
            mask.ensure_same_dims_as(init_lsf.dims())?;
            Some(DualTarget::new(mask.clone(), cfg.boundary_rule, cfg.lsf_clip)?)
        }
        None => None,
    };
    run(
        Problem::Dual {
            target: dual_target.as_ref(),
            lsf: init_lsf,
        },
        init_splat,
        weights,
        cfg,
        observer,
    )
}

enum Problem<'a> {
    Splat {
        target: &'a BinaryMask,
    },
    Dual {
        target: Option<&'a DualTarget>,
        lsf: LevelSetField,
    },
}

fn run(
    mut problem: Problem,
    init: GaussianSplat,
    weights: &LossWeights,
    cfg: &FitConfig,
    mut observer: impl FnMut(&EpochState),
) -> Result<FitResult> {
    cfg.validate()?;
    weights.validate()?;
    init.validate()?;
    let head = cfg.head();
    let mode = match &problem {
        Problem::Splat { .. } => FitMode::Splat,
        Problem::Dual { target: Some(_), .. } => FitMode::DualLabeled,
        Problem::Dual { target: None, .. } => FitMode::DualUnlabeled,
    };

    let mut splat = init;
    let mut splat_opt = AdamState::new(cfg.adam, 5)?;
    let mut lsf_opt = match &problem {
        Problem::Dual { lsf, .. } => Some(AdamState::new(
            AdamConfig {
                lr: cfg.lsf_lr,
                ..cfg.adam
            },
            lsf.as_field().len(),
        )?),
        Problem::Splat { .. } => None,
    };
    let mut plateau = Plateau::new();
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    let mut dtc_trace = Vec::new();
    let mut converged = false;
    let mut initial_cross = None;

    let evaluate = |splat: &GaussianSplat, problem: &Problem, epoch: usize| -> Result<Evaluation> {
        match problem {
            Problem::Splat { target } => splat_objective(splat, target, weights, head),
            Problem::Dual { target, lsf } => {
                let lambda = cfg.dtc_schedule.weight(epoch, cfg.epochs, weights.lambda_dtc);
                dual_objective(splat, lsf, *target, weights, head, lambda)
            }
        }
    };

    let mut eval;
    let mut epoch = 0;
    loop {
        eval = evaluate(&splat, &problem, epoch)?;
        let b = eval.breakdown;
        loss_trace.push(b.total);
        if let Problem::Dual { lsf, .. } = &problem {
            dtc_trace.push(b.dtc_loss);
            if epoch == 0 {
                initial_cross = cross_branch(&eval)?;
            }
            observer(&EpochState {
                epoch,
                splat: &splat,
                level_set: Some(lsf),
                mask: &eval.mask,
                breakdown: &b,
                lr: splat_opt.lr(),
            });
        } else {
            observer(&EpochState {
                epoch,
                splat: &splat,
                level_set: None,
                mask: &eval.mask,
                breakdown: &b,
                lr: splat_opt.lr(),
            });
        }

        if let Problem::Splat { target } = &problem {
            if cfg.stop_on_exact_match && threshold(&eval.mask, DEFAULT_THRESHOLD) == **target {
                converged = true;
                break;
            }
        }
        if epoch + 1 == cfg.epochs {
            break;
        }
        // The ramped consistency weight makes the scheduled total drift upwards;
        // plateaus are judged on the loss at the terminal weight instead.
        let monitored = b.total - b.lambda_dtc * b.dtc_loss + weights.lambda_dtc * b.dtc_loss;
        if plateau.observe(monitored, cfg) {
            if plateau.decays > cfg.max_lr_decays {
                converged = true;
                break;
            }
            splat_opt.set_lr(splat_opt.lr() * cfg.lr_factor);
            if let Some(opt) = lsf_opt.as_mut() {
                opt.set_lr(opt.lr() * cfg.lr_factor);
            }
        }

        let mut params = splat.to_array();
        splat_opt.step(&mut params, &eval.splat_grad.to_array())?;
        splat = GaussianSplat::from_array(params);
        splat.project_scales();
        if let (Problem::Dual { lsf, .. }, Some(opt), Some(grad)) = (&mut problem, lsf_opt.as_mut(), &eval.lsf_grad) {
            let (w, h) = lsf.dims();
            let mut values = lsf.as_field().values().to_vec();
            opt.step(&mut values, grad.values())?;
            *lsf = LevelSetField::from_field(ScalarField::new(w, h, values)?);
        }
        epoch += 1;
    }

    let target_dice = match &problem {
        Problem::Splat { target } => Some(agreement_dice(&threshold(&eval.mask, DEFAULT_THRESHOLD), target)?),
        Problem::Dual { target: Some(t), .. } => {
            Some(agreement_dice(&threshold(&eval.mask, DEFAULT_THRESHOLD), &t.mask)?)
        }
        Problem::Dual { target: None, .. } => None,
    };
    let cross_branch_dice = cross_branch(&eval)?;
    let level_set = match problem {
        Problem::Dual { lsf, .. } => Some(lsf),
        Problem::Splat { .. } => None,
    };
    let epochs_run = loss_trace.len();
    Ok(FitResult {
        mode,
        splat,
        level_set,
        final_loss: eval.breakdown.total,
        final_breakdown: eval.breakdown,
        loss_trace,
        dtc_trace,
        epochs_run,
        converged,
        target_dice,
        cross_branch_dice,
        initial_cross_branch_dice: initial_cross,
    })
}

/// `sqrt(2 / ln 2)`: maps the standard deviation of a uniformly filled ellipse
/// to the scale whose 0.5 level set has the same extent.
const STD_TO_SCALE: f64 = 1.698_643_600_576_038;

/// Closed-form initialization from mask moments.
///
/// `mu` is the foreground centroid, `r` the principal-axis angle of the second
/// moment matrix and the scales come from its eigenvalues. Each pixel is treated
/// as a unit square, adding `1/12` to both variances.
pub fn moment_init(mask: &BinaryMask) -> Result<GaussianSplat> {
    let n = mask.count_foreground();
    if n == 0 {
        return Err(Error::UndefinedBoundary { missing: "foreground" });
    }
    let (w, h) = mask.dims();
    let mut sx = 0.0;
    let mut sy = 0.0;
    for j in 0..h {
        for i in 0..w {
            if mask.get(i, j) {
                sx += i as f64 + 0.5;
                sy += j as f64 + 0.5;
            }
        }
    }
    let nf = n as f64;
    let (mx, my) = (sx / nf, sy / nf);
    let (mut cxx, mut cxy, mut cyy) = (0.0, 0.0, 0.0);
    for j in 0..h {
        for i in 0..w {
            if mask.get(i, j) {
                let dx = i as f64 + 0.5 - mx;
                let dy = j as f64 + 0.5 - my;
                cxx += dx * dx;
                cxy += dx * dy;
                cyy += dy * dy;
            }
        }
    }
    cxx = cxx / nf + 1.0 / 12.0;
    cyy = cyy / nf + 1.0 / 12.0;
    cxy /= nf;
    let mean = 0.5 * (cxx + cyy);
    let half_diff = 0.5 * (cxx - cyy);
    let root = (half_diff * half_diff + cxy * cxy).sqrt();
    let major = mean + root;
    let minor = (mean - root).max(0.0);
    let r = 0.5 * (2.0 * cxy).atan2(cxx - cyy);
    let mut splat = GaussianSplat::from_array([mx, my, major.sqrt() * STD_TO_SCALE, minor.sqrt() * STD_TO_SCALE, r]);
    splat.s_x = splat.s_x.max(SCALE_EPSILON);
    splat.s_y = splat.s_y.max(SCALE_EPSILON);
    Ok(splat)
}
