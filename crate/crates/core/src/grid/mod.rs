//! Scalar fields, binary masks and their file formats.
//!
//! Both grids are row-major with pixel `(i, j)` = column `i`, row `j`, origin at
//! the top-left corner (PGM raster order). Continuous evaluations sample pixel
//! centers at `(i + 0.5, j + 0.5)`.

mod pgm;

pub use pgm::{decode_pgm, encode_pgm, read_mask_pgm, read_pgm, write_mask_pgm, write_pgm, PgmEncoding};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default binarization threshold, the midpoint of a logistic soft mask.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Continuous coordinate of the center of pixel index `i`.
#[inline]
pub fn pixel_center(i: usize) -> f64 {
    i as f64 + 0.5
}

fn check_dims(width: usize, height: usize) -> Result<usize> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions { width, height });
    }
    width
        .checked_mul(height)
        .ok_or(Error::InvalidDimensions { width, height })
}

/// A `width x height` grid of finite reals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawField")]
pub struct ScalarField {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct RawField {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl TryFrom<RawField> for ScalarField {
    type Error = Error;

    fn try_from(raw: RawField) -> Result<Self> {
        ScalarField::new(raw.width, raw.height, raw.values)
    }
}

impl ScalarField {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        let n = check_dims(width, height)?;
        if values.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { width, height, values })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        let n = check_dims(width, height)?;
        Self::new(width, height, vec![value; n])
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::filled(width, height, 0.0)
    }

    /// Builds a field by evaluating `f(i, j)` at every pixel in raster order.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let n = check_dims(width, height)?;
        let mut values = Vec::with_capacity(n);
        for j in 0..height {
            for i in 0..width {
                values.push(f(i, j));
            }
        }
        Self::new(width, height, values)
    }

    /// Applies `f` to every value; fails if any output is not finite.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Result<Self> {
        Self::new(self.width, self.height, self.values.iter().map(|&v| f(v)).collect())
    }

    pub(crate) fn from_parts_unchecked(width: usize, height: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), width * height);
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self { width, height, values }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.width + i]
    }

    /// Index and value of the largest entry; the first one wins on ties.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (k, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = k;
            }
        }
        (best % self.width, best / self.width)
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn threshold(&self, t: f64) -> BinaryMask {
        threshold(self, t)
    }

    pub fn ensure_same_dims(&self, other: (usize, usize)) -> Result<()> {
        ensure_dims(self.dims(), other)
    }
}

pub(crate) fn ensure_dims(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected != actual {
        return Err(Error::ShapeMismatch { expected, actual });
    }
    Ok(())
}

/// A `width x height` grid of {0, 1} pixels.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    values: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, values: Vec<bool>) -> Result<Self> {
        let n = check_dims(width, height)?;
        if values.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: values.len(),
            });
        }
        Ok(Self { width, height, values })
    }

    /// Accepts raw 0/1 bytes; any other byte is rejected.
    pub fn from_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        let values = bytes
            .iter()
            .enumerate()
            .map(|(k, &b)| match b {
                0 => Ok(false),
                1 => Ok(true),
                _ => Err(Error::invalid(
                    "mask",
                    format!("pixel {k} has value {b}, expected 0 or 1"),
                )),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(width, height, values)
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let n = check_dims(width, height)?;
        let mut values = Vec::with_capacity(n);
        for j in 0..height {
            for i in 0..width {
                values.push(f(i, j));
            }
        }
        Self::new(width, height, values)
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        Self::from_fn(width, height, |_, _| false)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.values[j * self.width + i]
    }

    pub fn count_foreground(&self) -> usize {
        self.values.iter().filter(|&&v| v).count()
    }

    pub fn has_both_classes(&self) -> bool {
        let fg = self.count_foreground();
        fg > 0 && fg < self.values.len()
    }

    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|v| !v).collect(),
        }
    }

    /// 0.0 / 1.0 field view of the mask.
    pub fn to_field(&self) -> ScalarField {
        ScalarField::from_parts_unchecked(
            self.width,
            self.height,
            self.values.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect(),
        )
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.values.iter().map(|&v| u8::from(v)).collect()
    }

    /// Fails with [`Error::UndefinedBoundary`] unless both classes are present.
    pub fn ensure_both_classes(&self) -> Result<()> {
        let fg = self.count_foreground();
        if fg == 0 {
            Err(Error::UndefinedBoundary { missing: "foreground" })
        } else if fg == self.values.len() {
            Err(Error::UndefinedBoundary { missing: "background" })
        } else {
            Ok(())
        }
    }
}

/// Pixel is 1 iff the field value is strictly greater than `t`.
pub fn threshold(field: &ScalarField, t: f64) -> BinaryMask {
    BinaryMask {
        width: field.width,
        height: field.height,
        values: field.values.iter().map(|&v| v > t).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constructor_rejects_bad_input() {
        assert!(matches!(
            ScalarField::new(0, 3, vec![]),
            Err(Error::InvalidDimensions { .. })
        ));
        assert!(matches!(
            ScalarField::new(2, 2, vec![0.0; 3]),
            Err(Error::LengthMismatch { expected: 4, actual: 3 })
        ));
        assert!(matches!(
            ScalarField::new(2, 1, vec![0.0, f64::NAN]),
            Err(Error::NonFinite { index: 1 })
        ));
        assert!(BinaryMask::from_bytes(2, 1, &[0, 2]).is_err());
    }

    #[test]
    fn raster_order_is_row_major() {
        let f = ScalarField::from_fn(3, 2, |i, j| (10 * j + i) as f64).unwrap();
        assert_eq!(f.values(), &[0.0, 1.0, 2.0, 10.0, 11.0, 12.0]);
        assert_eq!(f.get(2, 1), 12.0);
        assert_eq!(f.argmax(), (2, 1));
    }

    #[test]
    fn threshold_is_strict() {
        let f = ScalarField::filled(4, 3, 0.7).unwrap();
        assert_eq!(threshold(&f, 0.5).count_foreground(), 12);
        let f = ScalarField::filled(4, 3, 0.5).unwrap();
        assert_eq!(threshold(&f, 0.5).count_foreground(), 0);
    }

    #[test]
    fn deserialization_validates() {
        let bad = r#"{"width":2,"height":1,"values":[1.0]}"#;
        assert!(serde_json::from_str::<ScalarField>(bad).is_err());
        let good = r#"{"width":2,"height":1,"values":[1.0,2.0]}"#;
        let f: ScalarField = serde_json::from_str(good).unwrap();
        assert_eq!(f.dims(), (2, 1));
    }

    proptest! {
        #[test]
        fn threshold_is_monotone(values in prop::collection::vec(-2.0f64..2.0, 24), t1 in -2.0f64..2.0, dt in 0.0f64..1.0) {
            let f = ScalarField::new(6, 4, values).unwrap();
            let lo = threshold(&f, t1);
            let hi = threshold(&f, t1 + dt);
            for (a, b) in lo.values().iter().zip(hi.values()) {
                prop_assert!(!(*b && !*a));
            }
        }
    }
}
