//! Segmentation and consistency losses and their weighted total.
//!
//! L2 terms are mean squared errors. Each differentiable loss has a `*_grad`
//! companion returning the value together with the gradient field with respect to
//! its first (prediction) argument.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ensure_dims, BinaryMask, ScalarField};
pub use crate::levelset::DtcSign;
use crate::levelset::{lsf_to_soft_mask_signed, LevelSetField, DEFAULT_STEEPNESS};
use crate::reduce::{pairwise_sum, pairwise_sum_by};

/// Probabilities are clamped into `[PROB_CLAMP, 1 - PROB_CLAMP]` before taking logs.
pub const PROB_CLAMP: f64 = 1e-7;

/// Added to both the numerator and the denominator of the Dice ratio.
pub const DICE_SMOOTHING: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub lambda_m: f64,
    pub lambda_l: f64,
    pub lambda_dice: f64,
    /// Weight of the consistency term; the terminal value when it is ramped.
    pub lambda_dtc: f64,
    pub focal_gamma: f64,
    pub focal_alpha: f64,
    pub k_sigmoid: f64,
    pub dtc_sign: DtcSign,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_m: 0.25,
            lambda_l: 0.5,
            lambda_dice: 0.5,
            lambda_dtc: 1.0,
            focal_gamma: 2.0,
            focal_alpha: 0.25,
            k_sigmoid: DEFAULT_STEEPNESS,
            dtc_sign: DtcSign::InteriorHigh,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let non_negative = [
            ("lambda_m", self.lambda_m),
            ("lambda_l", self.lambda_l),
            ("lambda_dice", self.lambda_dice),
            ("lambda_dtc", self.lambda_dtc),
            ("focal_gamma", self.focal_gamma),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if !(self.focal_alpha > 0.0 && self.focal_alpha < 1.0) {
            return Err(Error::invalid(
                "focal_alpha",
                format!("must lie in (0, 1), got {}", self.focal_alpha),
            ));
        }
        if !(self.k_sigmoid > 0.0 && self.k_sigmoid.is_finite()) {
            return Err(Error::invalid(
                "k_sigmoid",
                format!("must be positive, got {}", self.k_sigmoid),
            ));
        }
        Ok(())
    }

    /// Parses a flat JSON object; missing fields keep their defaults.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let w: Self = serde_json::from_str(s)?;
        w.validate()?;
        Ok(w)
    }

    /// Parses a flat TOML table; missing fields keep their defaults.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let w: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        w.validate()?;
        Ok(w)
    }
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Two-sided focal loss summed over `K` classes:
///
/// `-sum_i [ y_i ln(p_i) (1 - p_i)^gamma alpha + (1 - y_i) ln(1 - p_i) p_i^gamma (1 - alpha) ]`
///
/// `y` must be one-hot when `K >= 2`; with a single class it is the binary label.
pub fn focal_loss(p: &[f64], y: &[f64], gamma: f64, alpha: f64) -> Result<f64> {
    if p.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: p.len(),
            actual: y.len(),
        });
    }
    if p.is_empty() {
        return Err(Error::invalid("p", "needs at least one class"));
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid("y", "labels must be 0 or 1"));
    }
    if y.len() > 1 && y.iter().filter(|&&v| v == 1.0).count() != 1 {
        return Err(Error::invalid("y", "multi-class labels must be one-hot"));
    }
    if let Some(index) = p.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let loss = p
        .iter()
        .zip(y)
        .map(|(&pi, &yi)| {
            let pi = clamp_prob(pi);
            let pos = yi * pi.ln() * (1.0 - pi).powf(gamma) * alpha;
            let neg = (1.0 - yi) * (1.0 - pi).ln() * pi.powf(gamma) * (1.0 - alpha);
            -(pos + neg)
        })
        .sum();
    Ok(loss)
}

/// Soft Dice loss `1 - (2 sum(x y) + eps) / (sum(x) + sum(y) + eps)`.
pub fn dice_loss(x: &ScalarField, y: &BinaryMask) -> Result<f64> {
    dice_parts(x, y).map(|p| p.loss())
}

struct DiceParts {
    intersection: f64,
    denominator: f64,
}

impl DiceParts {
    fn loss(&self) -> f64 {
        1.0 - (2.0 * self.intersection + DICE_SMOOTHING) / self.denominator
    }
}

fn dice_parts(x: &ScalarField, y: &BinaryMask) -> Result<DiceParts> {
    ensure_dims(x.dims(), y.dims())?;
    if let Some(k) = x.values().iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::invalid(
            "x",
            format!("soft mask value {} at {k} outside [0, 1]", x.values()[k]),
        ));
    }
    let xv = x.values();
    let yv = y.values();
    let intersection = pairwise_sum_by(xv.len(), &|k| if yv[k] { xv[k] } else { 0.0 });
    let sum_x = pairwise_sum(xv);
    let sum_y = y.count_foreground() as f64;
    Ok(DiceParts {
        intersection,
        denominator: sum_x + sum_y + DICE_SMOOTHING,
    })
}

/// Dice loss and its gradient with respect to `x`.
pub fn dice_loss_grad(x: &ScalarField, y: &BinaryMask) -> Result<(f64, ScalarField)> {
    let parts = dice_parts(x, y)?;
    let numerator = 2.0 * parts.intersection + DICE_SMOOTHING;
    let den = parts.denominator;
    let den2 = den * den;
    let grad = y
        .values()
        .iter()
        .map(|&yk| {
            let yk = if yk { 1.0 } else { 0.0 };
            -(2.0 * yk * den - numerator) / den2
        })
        .collect();
    Ok((
        parts.loss(),
        ScalarField::from_parts_unchecked(x.width(), x.height(), grad),
    ))
}

/// Mean squared difference.
pub fn l2_loss(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    ensure_dims(a.dims(), b.dims())?;
    let (av, bv) = (a.values(), b.values());
    Ok(pairwise_sum_by(av.len(), &|k| (av[k] - bv[k]).powi(2)) / av.len() as f64)
}

/// Mean squared difference and its gradient with respect to `a`.
pub fn l2_loss_grad(a: &ScalarField, b: &ScalarField) -> Result<(f64, ScalarField)> {
    let loss = l2_loss(a, b)?;
    let scale = 2.0 / a.len() as f64;
    let grad = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| scale * (x - y))
        .collect();
    Ok((loss, ScalarField::from_parts_unchecked(a.width(), a.height(), grad)))
}

/// Consistency between a level set and a mask prediction: the L2 distance between
/// the sigmoid reconversion of `lsf` and `mask_pred`.
pub fn dtc_loss(lsf: &LevelSetField, mask_pred: &ScalarField, weights: &LossWeights) -> Result<f64> {
    let reconverted = lsf_to_soft_mask_signed(lsf, weights.k_sigmoid, weights.dtc_sign)?;
    l2_loss(&reconverted, mask_pred)
}

/// Value and gradients of [`dtc_loss`].
#[derive(Clone, Debug)]
pub struct DtcGrad {
    pub loss: f64,
    /// Gradient with respect to the level set.
    pub d_lsf: ScalarField,
    /// Gradient with respect to the mask prediction.
    pub d_mask: ScalarField,
    /// The reconverted soft mask.
    pub reconverted: ScalarField,
}

pub fn dtc_loss_grad(lsf: &LevelSetField, mask_pred: &ScalarField, weights: &LossWeights) -> Result<DtcGrad> {
    let reconverted = lsf_to_soft_mask_signed(lsf, weights.k_sigmoid, weights.dtc_sign)?;
    let (loss, d_reconverted) = l2_loss_grad(&reconverted, mask_pred)?;
    let slope = weights.dtc_sign.factor() * weights.k_sigmoid;
    let (w, h) = reconverted.dims();
    let d_lsf = d_reconverted
        .values()
        .iter()
        .zip(reconverted.values())
        .map(|(g, s)| g * slope * s * (1.0 - s))
        .collect();
    let d_mask = d_reconverted.values().iter().map(|g| -g).collect();
    Ok(DtcGrad {
        loss,
        d_lsf: ScalarField::from_parts_unchecked(w, h, d_lsf),
        d_mask: ScalarField::from_parts_unchecked(w, h, d_mask),
        reconverted,
    })
}

/// Unweighted component losses feeding [`total_loss`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub class_loss: f64,
    pub mask_loss: f64,
    pub lsf_loss: f64,
    pub dtc_loss: f64,
    pub dice_loss: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub class_loss: f64,
    pub mask_loss: f64,
    pub lsf_loss: f64,
    pub dtc_loss: f64,
    pub dice_loss: f64,
    /// Weight applied to `dtc_loss` for this evaluation.
    pub lambda_dtc: f64,
    pub total: f64,
}

/// `class + lambda_m mask + lambda_l lsf + lambda_dtc dtc + lambda_dice dice`.
///
/// `lambda_dtc` is passed separately so that a schedule can override the
/// configured weight.
pub fn total_loss(c: LossComponents, weights: &LossWeights, lambda_dtc: f64) -> Result<LossBreakdown> {
    let parts = [c.class_loss, c.mask_loss, c.lsf_loss, c.dtc_loss, c.dice_loss];
    if let Some(index) = parts.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let total = c.class_loss
        + weights.lambda_m * c.mask_loss
        + weights.lambda_l * c.lsf_loss
        + lambda_dtc * c.dtc_loss
        + weights.lambda_dice * c.dice_loss;
    Ok(LossBreakdown {
        class_loss: c.class_loss,
        mask_loss: c.mask_loss,
        lsf_loss: c.lsf_loss,
        dtc_loss: c.dtc_loss,
        dice_loss: c.dice_loss,
        lambda_dtc,
        total,
    })
}

/// How the consistency weight evolves over training.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DtcSchedule {
    /// [`dtc_schedule`] ramp up to `lambda_dtc`.
    #[default]
    Exponential,
    /// `lambda_dtc` at every epoch.
    Constant,
}

impl DtcSchedule {
    pub fn weight(self, epoch: usize, total_epochs: usize, lambda_max: f64) -> f64 {
        match self {
            DtcSchedule::Exponential => dtc_schedule(epoch, total_epochs, lambda_max),
            DtcSchedule::Constant => lambda_max,
        }
    }
}

/// Exponential ramp `lambda_max exp(-5 (1 - t)^2)` with `t = epoch / total_epochs`,
/// pinned to 0 at epoch 0 and to `lambda_max` at the last epoch.
pub fn dtc_schedule(epoch: usize, total_epochs: usize, lambda_max: f64) -> f64 {
    if epoch == 0 && total_epochs > 0 {
        return 0.0;
    }
    if total_epochs == 0 || epoch >= total_epochs {
        return lambda_max;
    }
    let t = epoch as f64 / total_epochs as f64;
    lambda_max * (-5.0 * (1.0 - t).powi(2)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelset::{lsf_to_soft_mask, signed_edt};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn focal_single_class_hand_value() {
        let l = focal_loss(&[0.5], &[1.0], 2.0, 0.25).unwrap();
        let expected = -(0.5f64.ln()) * 0.25 * 0.25;
        assert_relative_eq!(l, expected, max_relative = 1e-15);
        assert!((l - 0.04332).abs() < 1e-5);
    }

    #[test]
    fn focal_confident_correct_vanishes() {
        let a = focal_loss(&[0.999], &[1.0], 2.0, 0.25).unwrap();
        let b = focal_loss(&[1.0 - 1e-6], &[1.0], 2.0, 0.25).unwrap();
        assert!(b < a && b < 1e-12);
        // Both one-hot branches contribute.
        let two = focal_loss(&[0.7, 0.3], &[1.0, 0.0], 0.0, 0.25).unwrap();
        let expected = -(0.25 * 0.7f64.ln() + 0.75 * 0.7f64.ln());
        assert_relative_eq!(two, expected, max_relative = 1e-14);
    }

    #[test]
    fn focal_input_errors() {
        assert!(matches!(
            focal_loss(&[0.5, 0.5], &[1.0], 2.0, 0.25),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(focal_loss(&[0.5, 0.5], &[1.0, 1.0], 2.0, 0.25).is_err());
        assert!(focal_loss(&[0.5], &[0.5], 2.0, 0.25).is_err());
        // Clamping keeps the endpoints finite.
        assert!(focal_loss(&[0.0], &[1.0], 2.0, 0.25).unwrap().is_finite());
    }

    proptest! {
        #[test]
        fn focal_reduces_to_half_bce(p in prop::collection::vec(0.0f64..=1.0, 1..6), hot in 0usize..6, single in any::<bool>()) {
            let k = p.len();
            let y: Vec<f64> = if k == 1 {
                vec![if single { 1.0 } else { 0.0 }]
            } else {
                (0..k).map(|i| if i == hot % k { 1.0 } else { 0.0 }).collect()
            };
            let bce: f64 = p.iter().zip(&y).map(|(&pi, &yi)| {
                let pi = pi.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                -(yi * pi.ln() + (1.0 - yi) * (1.0 - pi).ln())
            }).sum();
            let focal = focal_loss(&p, &y, 0.0, 0.5).unwrap();
            prop_assert!((focal - 0.5 * bce).abs() <= 1e-10 * (0.5 * bce).abs().max(1e-300));
        }
    }

    fn square(w: usize, x0: usize, y0: usize, side: usize) -> BinaryMask {
        BinaryMask::from_fn(w, w, |i, j| {
            (x0..x0 + side).contains(&i) && (y0..y0 + side).contains(&j)
        })
        .unwrap()
    }

    #[test]
    fn dice_fixed_points() {
        let y = square(8, 1, 1, 2);
        assert!(dice_loss(&y.to_field(), &y).unwrap().abs() < 1e-15);
        let disjoint = square(8, 5, 5, 2);
        let d = dice_loss(&disjoint.to_field(), &y).unwrap();
        assert_relative_eq!(d, 1.0 - DICE_SMOOTHING / (8.0 + DICE_SMOOTHING), epsilon = 1e-15);
        let half = BinaryMask::from_fn(8, 8, |i, j| (2..4).contains(&i) && (1..3).contains(&j)).unwrap();
        let d = dice_loss(&half.to_field(), &y).unwrap();
        assert_relative_eq!(d, 0.5, epsilon = 1e-6);
        let empty = BinaryMask::empty(8, 8).unwrap();
        assert!(dice_loss(&empty.to_field(), &empty).unwrap().abs() < 1e-12);
    }

    #[test]
    fn dice_rejects_bad_input() {
        let y = square(4, 0, 0, 2);
        assert!(matches!(
            dice_loss(&ScalarField::zeros(3, 4).unwrap(), &y),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(dice_loss(&ScalarField::filled(4, 4, 1.5).unwrap(), &y).is_err());
    }

    #[test]
    fn l2_cases() {
        let a = ScalarField::filled(3, 2, 1.0).unwrap();
        let b = ScalarField::zeros(3, 2).unwrap();
        assert_eq!(l2_loss(&a, &a).unwrap(), 0.0);
        assert_eq!(l2_loss(&a, &b).unwrap(), 1.0);
        assert!(l2_loss(&a, &ScalarField::zeros(2, 3).unwrap()).is_err());
    }

    #[test]
    fn l2_matches_reversed_summation() {
        let a = ScalarField::from_fn(13, 11, |i, j| ((i * 7 + j * 3) as f64).sin()).unwrap();
        let b = ScalarField::from_fn(13, 11, |i, j| ((i + 2 * j) as f64).cos()).unwrap();
        let mut oracle = 0.0;
        for k in (0..a.len()).rev() {
            oracle += (a.values()[k] - b.values()[k]).powi(2);
        }
        oracle /= a.len() as f64;
        assert_relative_eq!(l2_loss(&a, &b).unwrap(), oracle, max_relative = 1e-13);
    }

    fn ellipse_mask(n: usize) -> BinaryMask {
        BinaryMask::from_fn(n, n, |i, j| {
            let x = i as f64 + 0.5 - 16.3;
            let y = j as f64 + 0.5 - 15.8;
            (x / 9.0).powi(2) + (y / 5.5).powi(2) < 1.0
        })
        .unwrap()
    }

    #[test]
    fn dtc_of_matching_branches() {
        let w = LossWeights::default();
        let m = ellipse_mask(32);
        let l = signed_edt(&m).unwrap();
        // Every pixel off the zero level saturates; each zero-level pixel reads 0.5
        // against a hard 0 and contributes 0.25.
        let zeros = l.as_field().values().iter().filter(|&&v| v == 0.0).count();
        let expected = 0.25 * zeros as f64 / m.len() as f64;
        assert_relative_eq!(dtc_loss(&l, &m.to_field(), &w).unwrap(), expected, max_relative = 1e-12);
        let interior = LevelSetField::from_field(l.as_field().map(|v| if v == 0.0 { 0.1 } else { v }).unwrap());
        assert!(dtc_loss(&interior, &m.to_field(), &w).unwrap() < 1e-3);
        let soft = lsf_to_soft_mask(&l, w.k_sigmoid).unwrap();
        assert_eq!(dtc_loss(&l, &soft, &w).unwrap(), 0.0);
    }

    #[test]
    fn dtc_of_inverted_prediction() {
        let w = LossWeights::default();
        let l = signed_edt(&ellipse_mask(32)).unwrap();
        let soft = lsf_to_soft_mask(&l, w.k_sigmoid).unwrap();
        let inverted = soft.map(|v| 1.0 - v).unwrap();
        let expected = soft.values().iter().map(|v| (1.0 - 2.0 * v).powi(2)).sum::<f64>() / soft.len() as f64;
        let got = dtc_loss(&l, &inverted, &w).unwrap();
        assert_relative_eq!(got, expected, max_relative = 1e-12);
        // Only the zero-level pixels sit at 0.5.
        assert!(got > 0.8);
    }

    #[test]
    fn total_breakdown() {
        let w = LossWeights::default();
        let zero = total_loss(LossComponents::default(), &w, 0.1).unwrap();
        assert_eq!(zero.total, 0.0);
        let ones = LossComponents {
            class_loss: 1.0,
            mask_loss: 1.0,
            lsf_loss: 1.0,
            dtc_loss: 1.0,
            dice_loss: 1.0,
        };
        let b = total_loss(ones, &w, 0.1).unwrap();
        assert!((b.total - 2.35).abs() < 1e-12);
        let bad = LossComponents {
            dtc_loss: f64::NAN,
            ..ones
        };
        assert!(total_loss(bad, &w, 0.1).is_err());
    }

    #[test]
    fn defaults_and_config_parsing() {
        let w = LossWeights::default();
        assert_eq!((w.lambda_m, w.lambda_l, w.lambda_dice), (0.25, 0.5, 0.5));
        assert_eq!((w.focal_gamma, w.focal_alpha, w.k_sigmoid), (2.0, 0.25, 1500.0));
        let t = LossWeights::from_toml_str("lambda_m = 1.0\ndtc_sign = 1\n").unwrap();
        assert_eq!(t.lambda_m, 1.0);
        assert_eq!(t.dtc_sign, DtcSign::Literal);
        assert_eq!(t.lambda_l, 0.5);
        let j = LossWeights::from_json_str(r#"{"k_sigmoid": 10}"#).unwrap();
        assert_eq!(j.k_sigmoid, 10.0);
        assert!(LossWeights::from_json_str(r#"{"focal_alpha": 1.5}"#).is_err());
        assert!(LossWeights::from_json_str(r#"{"nonsense": 1}"#).is_err());
    }

    #[test]
    fn schedule_endpoints() {
        assert_eq!(dtc_schedule(0, 100, 2.0), 0.0);
        assert_eq!(dtc_schedule(100, 100, 2.0), 2.0);
        assert_relative_eq!(dtc_schedule(50, 100, 1.0), (-1.25f64).exp(), max_relative = 1e-15);
        assert!((dtc_schedule(50, 100, 1.0) - 0.2865).abs() < 1e-4);
        let mut prev = 0.0;
        for e in 0..=100 {
            let v = dtc_schedule(e, 100, 1.0);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn dice_grad_matches_finite_differences() {
        let y = ellipse_mask(12);
        let x = ScalarField::from_fn(12, 12, |i, j| 0.1 + 0.8 * (((i * 5 + j * 3) % 7) as f64 / 7.0)).unwrap();
        let (_, g) = dice_loss_grad(&x, &y).unwrap();
        let h = 1e-6;
        for k in [0, 17, 40, 77, 143] {
            let mut plus = x.values().to_vec();
            let mut minus = x.values().to_vec();
            plus[k] += h;
            minus[k] -= h;
            let fp = dice_loss(&ScalarField::new(12, 12, plus).unwrap(), &y).unwrap();
            let fm = dice_loss(&ScalarField::new(12, 12, minus).unwrap(), &y).unwrap();
            assert_relative_eq!(g.values()[k], (fp - fm) / (2.0 * h), max_relative = 1e-6);
        }
    }

    #[test]
    fn dtc_grad_matches_finite_differences() {
        let w = LossWeights {
            k_sigmoid: 2.0,
            ..LossWeights::default()
        };
        let l = LevelSetField::from_field(ScalarField::from_fn(6, 5, |i, j| i as f64 - 2.7 + 0.3 * j as f64).unwrap());
        let m = ScalarField::from_fn(6, 5, |i, j| ((i + j) % 3) as f64 / 3.0).unwrap();
        let g = dtc_loss_grad(&l, &m, &w).unwrap();
        let h = 1e-6;
        for k in 0..30 {
            let bump = |field: &ScalarField, d: f64| {
                let mut v = field.values().to_vec();
                v[k] += d;
                ScalarField::new(6, 5, v).unwrap()
            };
            let fd_l = (dtc_loss(&LevelSetField::from_field(bump(l.as_field(), h)), &m, &w).unwrap()
                - dtc_loss(&LevelSetField::from_field(bump(l.as_field(), -h)), &m, &w).unwrap())
                / (2.0 * h);
            let fd_m = (dtc_loss(&l, &bump(&m, h), &w).unwrap() - dtc_loss(&l, &bump(&m, -h), &w).unwrap()) / (2.0 * h);
            assert!((g.d_lsf.values()[k] - fd_l).abs() < 1e-8);
            assert!((g.d_mask.values()[k] - fd_m).abs() < 1e-8);
        }
    }

    fn binary_pair() -> impl Strategy<Value = (BinaryMask, BinaryMask)> {
        (
            prop::collection::vec(any::<bool>(), 48),
            prop::collection::vec(any::<bool>(), 48),
        )
            .prop_map(|(a, b)| {
                let mut b = b;
                b[0] = true;
                (BinaryMask::new(8, 6, a).unwrap(), BinaryMask::new(8, 6, b).unwrap())
            })
    }

    proptest! {
        #[test]
        fn dice_loss_complements_dice_score((x, y) in binary_pair()) {
            let loss = dice_loss(&x.to_field(), &y).unwrap();
            let score = crate::metrics::mask_dice(&crate::grid::threshold(&x.to_field(), 0.5), &y).unwrap();
            prop_assert!((loss + score - 1.0).abs() < 1e-6);
        }

        #[test]
        fn losses_are_non_negative(
            soft in prop::collection::vec(0.0f64..=1.0, 48),
            other in prop::collection::vec(-5.0f64..5.0, 48),
            (_, y) in binary_pair(),
        ) {
            let x = ScalarField::new(8, 6, soft.clone()).unwrap();
            let l = ScalarField::new(8, 6, other).unwrap();
            prop_assert!(dice_loss(&x, &y).unwrap() >= 0.0);
            prop_assert!(l2_loss(&x, &l).unwrap() >= 0.0);
            let lsf = LevelSetField::from_field(l);
            prop_assert!(dtc_loss(&lsf, &x, &LossWeights::default()).unwrap() >= 0.0);
            let labels: Vec<f64> = y.values().iter().map(|&b| f64::from(u8::from(b))).collect();
            for (p, t) in soft.iter().zip(&labels) {
                prop_assert!(focal_loss(&[*p], &[*t], 2.0, 0.25).unwrap() >= 0.0);
            }
        }
    }
}
