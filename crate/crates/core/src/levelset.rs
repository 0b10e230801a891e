//! Signed Euclidean distance level sets.
//!
//! A level set stores, per pixel, the distance from its center to the nearest
//! boundary pixel center: negative inside the foreground, positive outside and
//! exactly zero on the boundary set. Distances are in pixels and unnormalised.
//!
//! The fast transform is the two-pass separable lower-envelope algorithm. All
//! squared distances are integers on the pixel lattice, and the envelope is built
//! with exact rational intersection tests, so it agrees bit-for-bit with the
//! exhaustive [`brute_force_edt`].

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{write_pgm, BinaryMask, ScalarField};

/// Which discrete pixels carry the zero level.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryRule {
    /// Foreground pixels with at least one background 4-neighbour; pixels
    /// outside the grid count as background.
    InnerRing,
    /// Background pixels with at least one foreground 4-neighbour inside the grid.
    ///
    /// Every foreground pixel is then strictly negative, so the sigmoid
    /// reconversion thresholds back to the original mask exactly.
    #[default]
    OuterRing,
}

/// Signed distance field. Any finite field is accepted so that a level set can
/// also serve as a free optimisation variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LevelSetField(ScalarField);

impl LevelSetField {
    pub fn from_field(field: ScalarField) -> Self {
        Self(field)
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Ok(Self(ScalarField::zeros(width, height)?))
    }

    pub fn as_field(&self) -> &ScalarField {
        &self.0
    }

    pub fn into_field(self) -> ScalarField {
        self.0
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    /// Clamps every distance into `[-radius, radius]`.
    pub fn clipped(&self, radius: f64) -> Result<Self> {
        if radius.is_nan() || radius <= 0.0 {
            return Err(Error::invalid("clip radius", "must be positive"));
        }
        Ok(Self(self.0.map(|v| v.clamp(-radius, radius))?))
    }

    /// Foreground estimate: pixels with strictly negative level.
    pub fn interior(&self) -> BinaryMask {
        BinaryMask::from_fn(self.0.width(), self.0.height(), |i, j| self.0.get(i, j) < 0.0)
            .expect("dimensions already validated")
    }
}

impl From<LevelSetField> for ScalarField {
    fn from(l: LevelSetField) -> Self {
        l.0
    }
}

/// Boundary membership per pixel under `rule`.
pub fn boundary_set(mask: &BinaryMask, rule: BoundaryRule) -> Vec<bool> {
    let (w, h) = mask.dims();
    let mut out = Vec::with_capacity(w * h);
    for j in 0..h {
        for i in 0..w {
            let here = mask.get(i, j);
            // `None` marks a neighbour outside the grid.
            let neighbours = [
                (i > 0).then(|| mask.get(i - 1, j)),
                (i + 1 < w).then(|| mask.get(i + 1, j)),
                (j > 0).then(|| mask.get(i, j - 1)),
                (j + 1 < h).then(|| mask.get(i, j + 1)),
            ];
            let on_boundary = match rule {
                BoundaryRule::InnerRing => here && neighbours.iter().any(|n| *n != Some(true)),
                BoundaryRule::OuterRing => !here && neighbours.contains(&Some(true)),
            };
            out.push(on_boundary);
        }
    }
    out
}

fn sign_squared(mask: &BinaryMask, sq: &[u64]) -> LevelSetField {
    let values = mask
        .values()
        .iter()
        .zip(sq)
        .map(|(&fg, &d2)| {
            if d2 == 0 {
                0.0
            } else if fg {
                -(d2 as f64).sqrt()
            } else {
                (d2 as f64).sqrt()
            }
        })
        .collect();
    LevelSetField(ScalarField::from_parts_unchecked(mask.width(), mask.height(), values))
}

/// Exact squared distance from every pixel to the nearest boundary pixel.
pub fn squared_boundary_distances(mask: &BinaryMask, rule: BoundaryRule) -> Result<Vec<u64>> {
    mask.ensure_both_classes()?;
    let (w, h) = mask.dims();
    let boundary = boundary_set(mask, rule);

    // Pass 1: per column, 1D distance to the nearest boundary row.
    let mut col = vec![None::<u64>; w * h];
    for i in 0..w {
        let mut last: Option<usize> = None;
        for j in 0..h {
            if boundary[j * w + i] {
                last = Some(j);
            }
            col[j * w + i] = last.map(|b| (j - b) as u64);
        }
        let mut next: Option<usize> = None;
        for j in (0..h).rev() {
            if boundary[j * w + i] {
                next = Some(j);
            }
            if let Some(b) = next {
                let d = (b - j) as u64;
                let slot = &mut col[j * w + i];
                *slot = Some(slot.map_or(d, |cur| cur.min(d)));
            }
        }
    }

    // Pass 2: per row, lower envelope of parabolas (x - p)^2 + col(p)^2.
    let mut out = vec![0u64; w * h];
    let mut envelope = Envelope::with_capacity(w);
    for j in 0..h {
        envelope.clear();
        for p in 0..w {
            if let Some(d) = col[j * w + p] {
                envelope.push(p as i64, (d * d) as i64);
            }
        }
        envelope.evaluate(&mut out[j * w..(j + 1) * w]);
    }
    Ok(out)
}

/// `num / den` with `den > 0`.
#[derive(Clone, Copy)]
struct Frac {
    num: i128,
    den: i128,
}

impl Frac {
    fn le(self, other: Frac) -> bool {
        self.num * other.den <= other.num * self.den
    }

    fn lt_int(self, x: i64) -> bool {
        self.num < x as i128 * self.den
    }
}

struct Envelope {
    /// Parabola vertex positions and heights.
    sites: Vec<(i64, i64)>,
    /// Left boundary of each parabola's region; `None` is minus infinity.
    starts: Vec<Option<Frac>>,
}

impl Envelope {
    fn with_capacity(n: usize) -> Self {
        Self {
            sites: Vec::with_capacity(n),
            starts: Vec::with_capacity(n),
        }
    }

    fn clear(&mut self) {
        self.sites.clear();
        self.starts.clear();
    }

    fn intersect((p, fp): (i64, i64), (q, fq): (i64, i64)) -> Frac {
        Frac {
            num: ((fq + q * q) - (fp + p * p)) as i128,
            den: (2 * (q - p)) as i128,
        }
    }

    fn push(&mut self, q: i64, fq: i64) {
        loop {
            let Some(&top) = self.sites.last() else {
                self.sites.push((q, fq));
                self.starts.push(None);
                return;
            };
            let s = Self::intersect(top, (q, fq));
            match *self.starts.last().expect("parallel vectors") {
                Some(start) if s.le(start) => {
                    self.sites.pop();
                    self.starts.pop();
                }
                _ => {
                    self.sites.push((q, fq));
                    self.starts.push(Some(s));
                    return;
                }
            }
        }
    }

    fn evaluate(&self, out: &mut [u64]) {
        let mut k = 0;
        for (x, slot) in out.iter_mut().enumerate() {
            let x = x as i64;
            while k + 1 < self.sites.len() && self.starts[k + 1].expect("only the first start is open").lt_int(x) {
                k += 1;
            }
            let (p, fp) = self.sites[k];
            *slot = ((x - p) * (x - p) + fp) as u64;
        }
    }
}

/// Signed distance transform with the default [`BoundaryRule`].
pub fn signed_edt(mask: &BinaryMask) -> Result<LevelSetField> {
    signed_edt_with(mask, BoundaryRule::default())
}

pub fn signed_edt_with(mask: &BinaryMask, rule: BoundaryRule) -> Result<LevelSetField> {
    let sq = squared_boundary_distances(mask, rule)?;
    Ok(sign_squared(mask, &sq))
}

/// Exhaustive `O(n * |boundary|)` squared distances, used as a test oracle.
pub fn brute_force_squared_distances(mask: &BinaryMask, rule: BoundaryRule) -> Result<Vec<u64>> {
    mask.ensure_both_classes()?;
    let (w, h) = mask.dims();
    let boundary: Vec<(i64, i64)> = boundary_set(mask, rule)
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(k, _)| ((k % w) as i64, (k / w) as i64))
        .collect();
    let mut out = Vec::with_capacity(w * h);
    for j in 0..h as i64 {
        for i in 0..w as i64 {
            let best = boundary
                .iter()
                .map(|&(bi, bj)| ((i - bi) * (i - bi) + (j - bj) * (j - bj)) as u64)
                .min()
                .expect("a two-class mask always has boundary pixels");
            out.push(best);
        }
    }
    Ok(out)
}

pub fn brute_force_edt(mask: &BinaryMask) -> Result<LevelSetField> {
    brute_force_edt_with(mask, BoundaryRule::default())
}

pub fn brute_force_edt_with(mask: &BinaryMask, rule: BoundaryRule) -> Result<LevelSetField> {
    let sq = brute_force_squared_distances(mask, rule)?;
    Ok(sign_squared(mask, &sq))
}

/// Orientation of the sigmoid that turns a level set back into a soft mask.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum DtcSign {
    /// `sigmoid(-k L)`: interior (negative L) maps above 0.5. Serialised as `-1`.
    #[default]
    InteriorHigh,
    /// `sigmoid(k L)` exactly as written in the loss definition. Serialised as `+1`.
    Literal,
}

impl DtcSign {
    pub fn factor(self) -> f64 {
        match self {
            DtcSign::InteriorHigh => -1.0,
            DtcSign::Literal => 1.0,
        }
    }
}

impl TryFrom<i8> for DtcSign {
    type Error = String;

    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            -1 => Ok(DtcSign::InteriorHigh),
            1 => Ok(DtcSign::Literal),
            other => Err(format!("dtc_sign must be -1 or +1, got {other}")),
        }
    }
}

impl From<DtcSign> for i8 {
    fn from(s: DtcSign) -> i8 {
        s.factor() as i8
    }
}

/// Default sigmoid steepness for level-set reconversion.
pub const DEFAULT_STEEPNESS: f64 = 1500.0;

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `sigmoid(-k L)`: 0.5 on the zero level, above 0.5 inside.
pub fn lsf_to_soft_mask(lsf: &LevelSetField, k: f64) -> Result<ScalarField> {
    lsf_to_soft_mask_signed(lsf, k, DtcSign::InteriorHigh)
}

pub fn lsf_to_soft_mask_signed(lsf: &LevelSetField, k: f64, sign: DtcSign) -> Result<ScalarField> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::invalid(
            "k",
            format!("sigmoid steepness must be positive, got {k}"),
        ));
    }
    let scale = sign.factor() * k;
    lsf.0.map(|l| sigmoid(scale * l))
}

/// Affine map used to store a level set as a `[0, 1]` raster:
/// `level = offset + scale * pixel`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSetMapping {
    pub width: usize,
    pub height: usize,
    pub offset: f64,
    pub scale: f64,
}

/// Path of the JSON sidecar that accompanies a level-set raster.
pub fn sidecar_path(pgm_path: &Path) -> PathBuf {
    pgm_path.with_extension("json")
}

/// Writes `lsf` as a 16-bit PGM plus a JSON sidecar holding the affine mapping.
pub fn write_level_set(lsf: &LevelSetField, pgm_path: impl AsRef<Path>) -> Result<LevelSetMapping> {
    let pgm_path = pgm_path.as_ref();
    let (lo, hi) = lsf.0.min_max();
    let scale = if hi > lo { hi - lo } else { 1.0 };
    let mapping = LevelSetMapping {
        width: lsf.0.width(),
        height: lsf.0.height(),
        offset: lo,
        scale,
    };
    let normalised = lsf.0.map(|v| (v - lo) / scale)?;
    write_pgm(&normalised, pgm_path)?;
    fs::write(sidecar_path(pgm_path), serde_json::to_string_pretty(&mapping)?)?;
    Ok(mapping)
}

/// Inverse of [`write_level_set`], exact up to 16-bit quantization.
pub fn read_level_set(pgm_path: impl AsRef<Path>) -> Result<LevelSetField> {
    let pgm_path = pgm_path.as_ref();
    let mapping: LevelSetMapping = serde_json::from_str(&fs::read_to_string(sidecar_path(pgm_path))?)?;
    let raster = crate::grid::read_pgm(pgm_path)?;
    raster.ensure_same_dims((mapping.width, mapping.height))?;
    Ok(LevelSetField(raster.map(|p| mapping.offset + mapping.scale * p)?))
}
