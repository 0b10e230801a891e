//! Synthetic lesion masks and the paired augmentation pipeline.
//!
//! Three shape families give ground-truth-known targets: a thresholded splat
//! (ellipse), an ellipse with a shifted ellipse removed (crescent) and an ellipse
//! whose boundary radius is modulated by a seeded harmonic series (blob).

use std::f64::consts::{LN_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{pixel_center, BinaryMask, ScalarField};
use crate::splat::{render, GaussianSplat};

/// At most this many boundary harmonics perturb a blob.
pub const MAX_HARMONICS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeKind {
    /// `render(splat) > threshold`
    Ellipse { splat: GaussianSplat, threshold: f64 },
    /// `(render(primary) > threshold) && !(render(secondary) > threshold)`
    Crescent {
        primary: GaussianSplat,
        secondary: GaussianSplat,
        threshold: f64,
    },
    /// `base` ellipse whose normalised boundary radius is scaled by
    /// `1 + sum_h a_h cos(f_h theta + phi_h)`; `amplitude` bounds `sum |a_h|`.
    Blob {
        base: GaussianSplat,
        threshold: f64,
        amplitude: f64,
        harmonics: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    #[serde(flatten)]
    pub kind: ShapeKind,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeFamily {
    Ellipse,
    Crescent,
    Blob,
}

impl ShapeFamily {
    pub const ALL: [ShapeFamily; 3] = [ShapeFamily::Ellipse, ShapeFamily::Crescent, ShapeFamily::Blob];

    pub fn name(self) -> &'static str {
        match self {
            ShapeFamily::Ellipse => "ellipse",
            ShapeFamily::Crescent => "crescent",
            ShapeFamily::Blob => "blob",
        }
    }
}

impl std::str::FromStr for ShapeFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ellipse" => Ok(ShapeFamily::Ellipse),
            "crescent" => Ok(ShapeFamily::Crescent),
            "blob" => Ok(ShapeFamily::Blob),
            other => Err(Error::invalid("kind", format!("unknown shape family {other:?}"))),
        }
    }
}

/// One boundary harmonic of a blob.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub frequency: u32,
    pub amplitude: f64,
    pub phase: f64,
}

/// Ground truth behind a generated mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrueParams {
    /// The generating (ellipse) or primary/base splat.
    pub splat: GaussianSplat,
    pub secondary: Option<GaussianSplat>,
    pub harmonics: Vec<Harmonic>,
    pub foreground_pixels: usize,
}

impl ShapeSpec {
    pub fn family(&self) -> ShapeFamily {
        match self.kind {
            ShapeKind::Ellipse { .. } => ShapeFamily::Ellipse,
            ShapeKind::Crescent { .. } => ShapeFamily::Crescent,
            ShapeKind::Blob { .. } => ShapeFamily::Blob,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check_t = |t: f64| {
            if t > 0.0 && t < 1.0 {
                Ok(())
            } else {
                Err(Error::invalid("threshold", format!("must lie in (0, 1), got {t}")))
            }
        };
        match self.kind {
            ShapeKind::Ellipse { splat, threshold } => {
                splat.validate()?;
                check_t(threshold)
            }
            ShapeKind::Crescent {
                primary,
                secondary,
                threshold,
            } => {
                primary.validate()?;
                secondary.validate()?;
                check_t(threshold)
            }
            ShapeKind::Blob {
                base,
                threshold,
                amplitude,
                harmonics,
            } => {
                base.validate()?;
                check_t(threshold)?;
                if !(0.0..=0.5).contains(&amplitude) {
                    return Err(Error::invalid(
                        "amplitude",
                        format!("must lie in [0, 0.5], got {amplitude}"),
                    ));
                }
                if harmonics == 0 || harmonics > MAX_HARMONICS {
                    return Err(Error::invalid("harmonics", format!("must lie in 1..={MAX_HARMONICS}")));
                }
                Ok(())
            }
        }
    }
}

/// Frequencies 2..=5 with amplitudes decaying as `1/h`, scaled so that their
/// absolute sum is at most `amplitude`.
fn blob_harmonics(amplitude: f64, count: usize, seed: u64) -> Vec<Harmonic> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<(f64, f64)> = (1..=count)
        .map(|h| (rng.random_range(0.5..1.0) / h as f64, rng.random_range(0.0..2.0 * PI)))
        .collect();
    let norm: f64 = raw.iter().map(|r| r.0).sum();
    raw.iter()
        .enumerate()
        .map(|(h, &(a, phase))| Harmonic {
            frequency: h as u32 + 2,
            amplitude: amplitude * a / norm,
            phase,
        })
        .collect()
}

/// Rasterizes `spec`; a pure function of `(spec, width, height)`.
pub fn generate(spec: &ShapeSpec, width: usize, height: usize) -> Result<(BinaryMask, TrueParams)> {
    spec.validate()?;
    let (mask, truth) = match spec.kind {
        ShapeKind::Ellipse { splat, threshold } => {
            let mask = render(&splat, width, height)?.threshold(threshold);
            (
                mask,
                TrueParams {
                    splat,
                    secondary: None,
                    harmonics: vec![],
                    foreground_pixels: 0,
                },
            )
        }
        ShapeKind::Crescent {
            primary,
            secondary,
            threshold,
        } => {
            let a = render(&primary, width, height)?.threshold(threshold);
            let b = render(&secondary, width, height)?.threshold(threshold);
            let values = a.values().iter().zip(b.values()).map(|(&x, &y)| x && !y).collect();
            let mask = BinaryMask::new(width, height, values)?;
            (
                mask,
                TrueParams {
                    splat: primary,
                    secondary: Some(secondary),
                    harmonics: vec![],
                    foreground_pixels: 0,
                },
            )
        }
        ShapeKind::Blob {
            base,
            threshold,
            amplitude,
            harmonics,
        } => {
            let hs = blob_harmonics(amplitude, harmonics, spec.seed);
            let g = render(&base, width, height)?;
            let (sin, cos) = base.r.sin_cos();
            let mask = BinaryMask::from_fn(width, height, |i, j| {
                let dx = pixel_center(i) - base.mu_x;
                let dy = pixel_center(j) - base.mu_y;
                let u = (cos * dx + sin * dy) / base.s_x;
                let v = (-sin * dx + cos * dy) / base.s_y;
                let theta = v.atan2(u);
                let f = 1.0
                    + hs.iter()
                        .map(|h| h.amplitude * (h.frequency as f64 * theta + h.phase).cos())
                        .sum::<f64>();
                // The radius scales by f, so the level G = t moves to G = t^(f^2).
                g.get(i, j) > threshold.powf(f * f)
            })?;
            (
                mask,
                TrueParams {
                    splat: base,
                    secondary: None,
                    harmonics: hs,
                    foreground_pixels: 0,
                },
            )
        }
    };
    let fg = mask.count_foreground();
    if fg == 0 {
        return Err(Error::DegenerateShape("foreground"));
    }
    if fg == mask.len() {
        return Err(Error::DegenerateShape("background"));
    }
    Ok((
        mask,
        TrueParams {
            foreground_pixels: fg,
            ..truth
        },
    ))
}

/// Scale product `s_x s_y` whose 0.5 level set encloses `area` square pixels.
pub fn scale_product_for_area(area: f64) -> f64 {
    area / (2.0 * PI * LN_2)
}

/// Draws a random shape of `family` centred near the middle of the grid.
///
/// Sizes are proportional to `min(width, height)`; at 64 px the ellipse major
/// scale lies in `[5, 10]` and the minor in `[4, 8]`.
pub fn sample_spec(family: ShapeFamily, seed: u64, width: usize, height: usize) -> ShapeSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = width.min(height) as f64 / 64.0;
    let cx = width as f64 / 2.0 + rng.random_range(-4.0..4.0) * unit;
    let cy = height as f64 / 2.0 + rng.random_range(-4.0..4.0) * unit;
    let r = rng.random_range(0.0..PI);
    let kind = match family {
        ShapeFamily::Ellipse => ShapeKind::Ellipse {
            splat: GaussianSplat {
                mu_x: cx,
                mu_y: cy,
                s_x: rng.random_range(5.0..10.0) * unit,
                s_y: rng.random_range(4.0..8.0) * unit,
                r,
            },
            threshold: 0.5,
        },
        ShapeFamily::Crescent => {
            let s = rng.random_range(9.0..12.0) * unit;
            let primary = GaussianSplat {
                mu_x: cx,
                mu_y: cy,
                s_x: s,
                s_y: s * rng.random_range(0.85..1.0),
                r,
            };
            let dir = rng.random_range(0.0..2.0 * PI);
            let shift = s * rng.random_range(0.6..0.9);
            let shrink = rng.random_range(0.85..1.0);
            let secondary = GaussianSplat {
                mu_x: cx + shift * dir.cos(),
                mu_y: cy + shift * dir.sin(),
                s_x: primary.s_x * shrink,
                s_y: primary.s_y * shrink,
                r,
            };
            ShapeKind::Crescent {
                primary,
                secondary,
                threshold: 0.5,
            }
        }
        ShapeFamily::Blob => ShapeKind::Blob {
            base: GaussianSplat {
                mu_x: cx,
                mu_y: cy,
                s_x: rng.random_range(7.0..10.0) * unit,
                s_y: rng.random_range(6.0..9.0) * unit,
                r,
            },
            threshold: 0.5,
            amplitude: rng.random_range(0.15..0.3),
            harmonics: MAX_HARMONICS,
        },
    };
    ShapeSpec { kind, seed }
}

/// An ellipse with the same 0.5-level area as `area` pixels, random aspect in
/// `[0.6, 1]`, centred near the middle of the grid.
pub fn area_matched_ellipse(area: usize, seed: u64, width: usize, height: usize) -> ShapeSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let aspect: f64 = rng.random_range(0.6..1.0);
    let product = scale_product_for_area(area as f64);
    let s_x = (product / aspect).sqrt();
    let splat = GaussianSplat {
        mu_x: width as f64 / 2.0 + rng.random_range(-2.0..2.0),
        mu_y: height as f64 / 2.0 + rng.random_range(-2.0..2.0),
        s_x,
        s_y: s_x * aspect,
        r: rng.random_range(0.0..PI),
    };
    ShapeSpec {
        kind: ShapeKind::Ellipse { splat, threshold: 0.5 },
        seed,
    }
}

// Augmentation

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentationConfig {
    pub p_flip_h: f64,
    pub p_flip_v: f64,
    pub p_rotate: f64,
    pub p_noise: f64,
    pub p_resize_crop: f64,
    pub noise_sigma: f64,
    /// Candidate rotations in degrees; each must be a multiple of 90.
    pub rotations: Vec<i32>,
    /// Side length of the resize-and-center-crop output.
    pub target_size: usize,
    /// Resize factor range relative to `target_size`.
    pub scale_range: (f64, f64),
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        Self {
            p_flip_h: 0.5,
            p_flip_v: 0.5,
            p_rotate: 0.5,
            p_noise: 0.5,
            p_resize_crop: 0.5,
            noise_sigma: 0.05,
            rotations: vec![90, 180, 270],
            target_size: 224,
            scale_range: (0.8, 1.2),
        }
    }
}

impl AugmentationConfig {
    /// Every probability set to 0.
    pub fn none() -> Self {
        Self {
            p_flip_h: 0.0,
            p_flip_v: 0.0,
            p_rotate: 0.0,
            p_noise: 0.0,
            p_resize_crop: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("p_flip_h", self.p_flip_h),
            ("p_flip_v", self.p_flip_v),
            ("p_rotate", self.p_rotate),
            ("p_noise", self.p_noise),
            ("p_resize_crop", self.p_resize_crop),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(name, format!("probability {p} outside [0, 1]")));
            }
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid("noise_sigma", "must be finite and >= 0"));
        }
        if let Some(d) = self.rotations.iter().find(|d| *d % 90 != 0) {
            return Err(Error::invalid(
                "rotations",
                format!("{d} is not a multiple of 90 degrees"),
            ));
        }
        if self.p_rotate > 0.0 && self.rotations.is_empty() {
            return Err(Error::invalid("rotations", "empty while p_rotate > 0"));
        }
        if self.target_size == 0 {
            return Err(Error::invalid("target_size", "must be positive"));
        }
        let (lo, hi) = self.scale_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::invalid("scale_range", format!("invalid range ({lo}, {hi})")));
        }
        Ok(())
    }
}

/// One concrete draw of the augmentation pipeline.
///
/// Geometric steps run in the order flip-h, flip-v, rotate, resize-crop; noise is
/// added to the field last.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentPlan {
    pub flip_h: bool,
    pub flip_v: bool,
    /// Counter-clockwise quarter turns (as displayed, y down), 0..4.
    pub quarter_turns: u8,
    /// `(scale, target_size)` of the resize-and-center-crop step.
    pub resize_crop: Option<(f64, usize)>,
    /// Seed of the noise draw, if noise is applied.
    pub noise: Option<(f64, u64)>,
}

impl AugmentPlan {
    pub fn identity() -> Self {
        Self {
            flip_h: false,
            flip_v: false,
            quarter_turns: 0,
            resize_crop: None,
            noise: None,
        }
    }

    /// Draws a plan; every call consumes the same number of random values.
    pub fn sample(cfg: &AugmentationConfig, rng: &mut impl Rng) -> Result<Self> {
        cfg.validate()?;
        let u: [f64; 5] = std::array::from_fn(|_| rng.random());
        let rot_pick = rng.random_range(0..cfg.rotations.len().max(1));
        let scale = rng.random_range(cfg.scale_range.0..=cfg.scale_range.1);
        let noise_seed: u64 = rng.random();
        let quarter_turns = if u[2] < cfg.p_rotate {
            (cfg.rotations[rot_pick] / 90).rem_euclid(4) as u8
        } else {
            0
        };
        Ok(Self {
            flip_h: u[0] < cfg.p_flip_h,
            flip_v: u[1] < cfg.p_flip_v,
            quarter_turns,
            resize_crop: (u[4] < cfg.p_resize_crop).then_some((scale, cfg.target_size)),
            noise: (u[3] < cfg.p_noise && cfg.noise_sigma > 0.0).then_some((cfg.noise_sigma, noise_seed)),
        })
    }

    pub fn apply_field(&self, field: &ScalarField) -> Result<ScalarField> {
        let mut out = self.geometric_field(field)?;
        if let Some((sigma, seed)) = self.noise {
            let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid("noise_sigma", e.to_string()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (w, h) = out.dims();
            let values = out.values().iter().map(|v| v + normal.sample(&mut rng)).collect();
            out = ScalarField::new(w, h, values)?;
        }
        Ok(out)
    }

    fn geometric_field(&self, field: &ScalarField) -> Result<ScalarField> {
        let mut out = field.clone();
        if self.flip_h {
            out = flip_h(&out);
        }
        if self.flip_v {
            out = flip_v(&out);
        }
        out = rotate_quarters(&out, self.quarter_turns);
        if let Some((scale, size)) = self.resize_crop {
            out = resize_crop_field(&out, scale, size)?;
        }
        Ok(out)
    }

    pub fn apply_mask(&self, mask: &BinaryMask) -> Result<BinaryMask> {
        let mut out = mask.to_field();
        if self.flip_h {
            out = flip_h(&out);
        }
        if self.flip_v {
            out = flip_v(&out);
        }
        out = rotate_quarters(&out, self.quarter_turns);
        if let Some((scale, size)) = self.resize_crop {
            out = resize_crop_nearest(&out, scale, size);
        }
        Ok(out.threshold(0.5))
    }

    /// Maps a prediction made in the augmented frame back to an original
    /// `width x height` frame. Exact for flips and rotations; the resize-crop
    /// step is undone by bilinear resampling with edge clamping.
    pub fn invert_field(&self, field: &ScalarField, width: usize, height: usize) -> Result<ScalarField> {
        let (rw, rh) = if self.quarter_turns % 2 == 1 {
            (height, width)
        } else {
            (width, height)
        };
        let mut out = match self.resize_crop {
            Some((scale, size)) => uncrop_field(field, scale, size, rw, rh)?,
            None => field.clone(),
        };
        out = rotate_quarters(&out, (4 - self.quarter_turns % 4) % 4);
        if self.flip_v {
            out = flip_v(&out);
        }
        if self.flip_h {
            out = flip_h(&out);
        }
        ensure_out_dims(&out, width, height)?;
        Ok(out)
    }
}

fn ensure_out_dims(f: &ScalarField, width: usize, height: usize) -> Result<()> {
    if f.dims() != (width, height) {
        return Err(Error::ShapeMismatch {
            expected: (width, height),
            actual: f.dims(),
        });
    }
    Ok(())
}

/// Applies one seeded draw of the pipeline to a field/mask pair.
pub fn augment(
    field: &ScalarField,
    mask: &BinaryMask,
    cfg: &AugmentationConfig,
    seed: u64,
) -> Result<(ScalarField, BinaryMask)> {
    if field.dims() != mask.dims() {
        return Err(Error::ShapeMismatch {
            expected: field.dims(),
            actual: mask.dims(),
        });
    }
    let plan = AugmentPlan::sample(cfg, &mut ChaCha8Rng::seed_from_u64(seed))?;
    Ok((plan.apply_field(field)?, plan.apply_mask(mask)?))
}

/// Averages `predict` over `rounds` augmented copies of `field`, each mapped
/// back to the original frame. Predictions must lie in `[0, 1]`.
pub fn test_time_average(
    mut predict: impl FnMut(&ScalarField) -> Result<ScalarField>,
    field: &ScalarField,
    cfg: &AugmentationConfig,
    rounds: usize,
    seed: u64,
) -> Result<ScalarField> {
    if rounds == 0 {
        return Err(Error::invalid("rounds", "must be at least 1"));
    }
    let (w, h) = field.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = vec![0.0; w * h];
    for _ in 0..rounds {
        let plan = AugmentPlan::sample(cfg, &mut rng)?;
        let pred = predict(&plan.apply_field(field)?)?;
        if let Some(k) = pred.values().iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid(
                "predict",
                format!("output {} at {k} outside [0, 1]", pred.values()[k]),
            ));
        }
        let back = plan.invert_field(&pred, w, h)?;
        for (s, v) in sum.iter_mut().zip(back.values()) {
            *s += v;
        }
    }
    let n = rounds as f64;
    ScalarField::new(w, h, sum.into_iter().map(|s| (s / n).clamp(0.0, 1.0)).collect())
}

// Resampling primitives

pub fn flip_h(f: &ScalarField) -> ScalarField {
    let (w, h) = f.dims();
    remap(f, w, h, |i, j| f.get(w - 1 - i, j))
}

pub fn flip_v(f: &ScalarField) -> ScalarField {
    let (w, h) = f.dims();
    remap(f, w, h, |i, j| f.get(i, h - 1 - j))
}

/// Rotates by `q` quarter turns; one turn sends pixel `(i, j)` to `(j, w - 1 - i)`
/// in a `h x w` output.
pub fn rotate_quarters(f: &ScalarField, q: u8) -> ScalarField {
    let (w, h) = f.dims();
    match q % 4 {
        0 => f.clone(),
        1 => remap(f, h, w, |i, j| f.get(w - 1 - j, i)),
        2 => remap(f, w, h, |i, j| f.get(w - 1 - i, h - 1 - j)),
        _ => remap(f, h, w, |i, j| f.get(j, h - 1 - i)),
    }
}

fn remap(_src: &ScalarField, w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> ScalarField {
    let mut values = Vec::with_capacity(w * h);
    for j in 0..h {
        for i in 0..w {
            values.push(f(i, j));
        }
    }
    ScalarField::from_parts_unchecked(w, h, values)
}

/// Bilinear sample at continuous coordinate `(x, y)`, clamping to the edge pixels.
pub fn sample_bilinear(f: &ScalarField, x: f64, y: f64) -> f64 {
    let (w, h) = f.dims();
    let fx = (x - 0.5).clamp(0.0, (w - 1) as f64);
    let fy = (y - 0.5).clamp(0.0, (h - 1) as f64);
    let i0 = fx.floor() as usize;
    let j0 = fy.floor() as usize;
    let i1 = (i0 + 1).min(w - 1);
    let j1 = (j0 + 1).min(h - 1);
    let tx = fx - i0 as f64;
    let ty = fy - j0 as f64;
    let top = f.get(i0, j0) * (1.0 - tx) + f.get(i1, j0) * tx;
    let bottom = f.get(i0, j1) * (1.0 - tx) + f.get(i1, j1) * tx;
    top * (1.0 - ty) + bottom * ty
}

fn sample_nearest(f: &ScalarField, x: f64, y: f64) -> f64 {
    let (w, h) = f.dims();
    let i = (x.floor().max(0.0) as usize).min(w - 1);
    let j = (y.floor().max(0.0) as usize).min(h - 1);
    f.get(i, j)
}

// Output pixel (x, y) of a size x size crop reads source coordinate
// c_src + (x - size / 2) * src_extent / (size * scale) along each axis.
fn crop_source(x: f64, size: usize, extent: usize, scale: f64) -> f64 {
    extent as f64 / 2.0 + (x - size as f64 / 2.0) * extent as f64 / (size as f64 * scale)
}

/// Resizes to `size * scale` square pixels and center-crops (or edge-pads) to
/// `size x size`, bilinearly.
pub fn resize_crop_field(f: &ScalarField, scale: f64, size: usize) -> Result<ScalarField> {
    let (w, h) = f.dims();
    ScalarField::from_fn(size, size, |i, j| {
        sample_bilinear(
            f,
            crop_source(pixel_center(i), size, w, scale),
            crop_source(pixel_center(j), size, h, scale),
        )
    })
}

fn resize_crop_nearest(f: &ScalarField, scale: f64, size: usize) -> ScalarField {
    let (w, h) = f.dims();
    remap(f, size, size, |i, j| {
        sample_nearest(
            f,
            crop_source(pixel_center(i), size, w, scale),
            crop_source(pixel_center(j), size, h, scale),
        )
    })
}

fn uncrop_field(f: &ScalarField, scale: f64, size: usize, width: usize, height: usize) -> Result<ScalarField> {
    let inv =
        |x: f64, extent: usize| size as f64 / 2.0 + (x - extent as f64 / 2.0) * size as f64 * scale / extent as f64;
    ScalarField::from_fn(width, height, |i, j| {
        sample_bilinear(f, inv(pixel_center(i), width), inv(pixel_center(j), height))
    })
}

/// Rotates a field by an arbitrary angle about its center with bilinear
/// interpolation and edge clamping. Positive angles turn the same way as
/// [`rotate_quarters`]; the output keeps the input dimensions.
pub fn rotate_field_bilinear(f: &ScalarField, degrees: f64) -> Result<ScalarField> {
    let (w, h) = f.dims();
    let (s, c) = degrees.to_radians().sin_cos();
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    ScalarField::from_fn(w, h, |i, j| {
        let x = pixel_center(i) - cx;
        let y = pixel_center(j) - cy;
        // Inverse of the forward map (x, y) -> (y, -x) generalised to angle theta.
        let sx = c * x - s * y;
        let sy = s * x + c * y;
        sample_bilinear(f, sx + cx, sy + cy)
    })
}
