//! A single anisotropic 2D Gaussian splat.
//!
//! The splat is parameterised by its center `(mu_x, mu_y)`, per-axis scales
//! `(s_x, s_y)` and a rotation `r` in radians. Its covariance is
//! `R(r) diag(s_x^2, s_y^2) R(r)^T` and it renders as
//! `G(x, y) = exp(-0.5 d^T Sigma^-1 d)` with `d = (x - mu_x, y - mu_y)`, sampled at
//! every pixel center. Amplitude is fixed at 1 and is not a parameter.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{pixel_center, ScalarField};
use crate::reduce::pairwise_sum;

/// Lower bound on both scales, in pixels.
pub const SCALE_EPSILON: f64 = 1e-3;

/// Number of trainable parameters per splat.
pub const SPLAT_PARAMS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianSplat {
    pub mu_x: f64,
    pub mu_y: f64,
    pub s_x: f64,
    pub s_y: f64,
    pub r: f64,
}

impl GaussianSplat {
    pub fn new(mu_x: f64, mu_y: f64, s_x: f64, s_y: f64, r: f64) -> Result<Self> {
        let splat = Self {
            mu_x,
            mu_y,
            s_x,
            s_y,
            r,
        };
        splat.validate()?;
        Ok(splat)
    }

    pub fn isotropic(mu_x: f64, mu_y: f64, s: f64) -> Result<Self> {
        Self::new(mu_x, mu_y, s, s, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let scales_ok = |s: f64| s.is_finite() && s >= SCALE_EPSILON;
        if !scales_ok(self.s_x) || !scales_ok(self.s_y) {
            return Err(Error::DegenerateScale {
                s_x: self.s_x,
                s_y: self.s_y,
                min: SCALE_EPSILON,
            });
        }
        for (index, v) in [self.mu_x, self.mu_y, self.r].into_iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { index });
            }
        }
        Ok(())
    }

    /// `[mu_x, mu_y, s_x, s_y, r]`
    pub fn to_array(&self) -> [f64; SPLAT_PARAMS] {
        [self.mu_x, self.mu_y, self.s_x, self.s_y, self.r]
    }

    pub fn from_array(p: [f64; SPLAT_PARAMS]) -> Self {
        Self {
            mu_x: p[0],
            mu_y: p[1],
            s_x: p[2],
            s_y: p[3],
            r: p[4],
        }
    }

    /// Clamps both scales onto the feasible set `s >= SCALE_EPSILON`.
    pub fn project_scales(&mut self) {
        self.s_x = self.s_x.max(SCALE_EPSILON);
        self.s_y = self.s_y.max(SCALE_EPSILON);
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            mu_x: self.mu_x + dx,
            mu_y: self.mu_y + dy,
            ..*self
        }
    }

    /// Area of the `G > level` region, `2 pi s_x s_y ln(1/level)`.
    pub fn level_area(&self, level: f64) -> f64 {
        2.0 * PI * self.s_x * self.s_y * (1.0 / level).ln()
    }

    /// CSV record `mu_x,mu_y,s_x,s_y,r`.
    pub fn to_csv_record(&self) -> String {
        format!("{},{},{},{},{}", self.mu_x, self.mu_y, self.s_x, self.s_y, self.r)
    }

    pub const CSV_HEADER: &'static str = "mu_x,mu_y,s_x,s_y,r";
}

impl fmt::Display for GaussianSplat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_csv_record())
    }
}

impl FromStr for GaussianSplat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let fields: Vec<&str> = s.trim().split(',').map(str::trim).collect();
        if fields.len() != SPLAT_PARAMS {
            return Err(Error::invalid(
                "splat",
                format!("expected {SPLAT_PARAMS} comma-separated fields, got {}", fields.len()),
            ));
        }
        let mut p = [0.0; SPLAT_PARAMS];
        for (slot, field) in p.iter_mut().zip(&fields) {
            *slot = field
                .parse()
                .map_err(|_| Error::invalid("splat", format!("not a number: {field:?}")))?;
        }
        let splat = Self::from_array(p);
        splat.validate()?;
        Ok(splat)
    }
}

/// Symmetric 2x2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Covariance {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Covariance {
    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let half_trace = 0.5 * self.trace();
        let disc = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.xy).sqrt();
        [half_trace - disc, half_trace + disc]
    }
}

/// `R(r) diag(s_x^2, s_y^2) R(r)^T`.
pub fn build_covariance(splat: &GaussianSplat) -> Result<Covariance> {
    splat.validate()?;
    let (s, c) = reduced_angle(splat.r).sin_cos();
    let a = splat.s_x * splat.s_x;
    let b = splat.s_y * splat.s_y;
    Ok(Covariance {
        xx: c * c * a + s * s * b,
        xy: c * s * (a - b),
        yy: s * s * a + c * c * b,
    })
}

// R(r + pi) = -R(r) leaves Sigma unchanged; reducing first makes that exact
// whenever r + pi is itself representable.
fn reduced_angle(r: f64) -> f64 {
    r.rem_euclid(PI)
}

/// Per-pixel evaluation state shared by the forward and backward passes.
struct Kernel {
    mu_x: f64,
    mu_y: f64,
    cos: f64,
    sin: f64,
    inv_a: f64,
    inv_b: f64,
}

impl Kernel {
    fn new(splat: &GaussianSplat) -> Result<Self> {
        splat.validate()?;
        let (sin, cos) = reduced_angle(splat.r).sin_cos();
        Ok(Self {
            mu_x: splat.mu_x,
            mu_y: splat.mu_y,
            cos,
            sin,
            inv_a: 1.0 / (splat.s_x * splat.s_x),
            inv_b: 1.0 / (splat.s_y * splat.s_y),
        })
    }

    /// Local-frame coordinates `(u, v) = R^T d` and the Gaussian value.
    #[inline]
    fn eval(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let dx = x - self.mu_x;
        let dy = y - self.mu_y;
        let u = self.cos * dx + self.sin * dy;
        let v = -self.sin * dx + self.cos * dy;
        let q = u * u * self.inv_a + v * v * self.inv_b;
        (u, v, (-0.5 * q).exp())
    }
}

/// Rasterizes the splat densely over a `width x height` grid.
pub fn render(splat: &GaussianSplat, width: usize, height: usize) -> Result<ScalarField> {
    let kernel = Kernel::new(splat)?;
    ScalarField::from_fn(width, height, |i, j| kernel.eval(pixel_center(i), pixel_center(j)).2)
}

/// Gradient of a scalar loss with respect to the five splat parameters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SplatGradient {
    pub d_mu_x: f64,
    pub d_mu_y: f64,
    pub d_s_x: f64,
    pub d_s_y: f64,
    pub d_r: f64,
}

impl SplatGradient {
    pub fn to_array(&self) -> [f64; SPLAT_PARAMS] {
        [self.d_mu_x, self.d_mu_y, self.d_s_x, self.d_s_y, self.d_r]
    }

    pub fn from_array(g: [f64; SPLAT_PARAMS]) -> Self {
        Self {
            d_mu_x: g[0],
            d_mu_y: g[1],
            d_s_x: g[2],
            d_s_y: g[3],
            d_r: g[4],
        }
    }
}

impl Add for SplatGradient {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        let (a, b) = (self.to_array(), rhs.to_array());
        Self::from_array(std::array::from_fn(|k| a[k] + b[k]))
    }
}

impl Mul<f64> for SplatGradient {
    type Output = Self;

    fn mul(self, rhs: f64) -> Self {
        Self::from_array(self.to_array().map(|g| g * rhs))
    }
}

/// Backpropagates `upstream = dLoss/dG` (one entry per pixel) to the splat parameters.
///
/// Per pixel, with `(u, v)` the local-frame offset and `w = upstream * G`:
///
/// ```text
/// dG/dmu_x = G (u cos / s_x^2 - v sin / s_y^2)
/// dG/dmu_y = G (u sin / s_x^2 + v cos / s_y^2)
/// dG/ds_x  = G u^2 / s_x^3
/// dG/ds_y  = G v^2 / s_y^3
/// dG/dr    = -G u v (1 / s_x^2 - 1 / s_y^2)
/// ```
///
/// Pixel contributions are combined with a pairwise reduction in raster order.
pub fn render_backward(splat: &GaussianSplat, upstream: &ScalarField) -> Result<SplatGradient> {
    let kernel = Kernel::new(splat)?;
    let (width, height) = upstream.dims();
    let n = width * height;
    let inv_sx3 = kernel.inv_a / splat.s_x;
    let inv_sy3 = kernel.inv_b / splat.s_y;

    let mut terms: [Vec<f64>; SPLAT_PARAMS] = std::array::from_fn(|_| Vec::with_capacity(n));
    for j in 0..height {
        let y = pixel_center(j);
        for i in 0..width {
            let (u, v, g) = kernel.eval(pixel_center(i), y);
            let w = upstream.get(i, j) * g;
            let ua = u * kernel.inv_a;
            let vb = v * kernel.inv_b;
            terms[0].push(w * (ua * kernel.cos - vb * kernel.sin));
            terms[1].push(w * (ua * kernel.sin + vb * kernel.cos));
            terms[2].push(w * u * u * inv_sx3);
            terms[3].push(w * v * v * inv_sy3);
            terms[4].push(-w * u * v * (kernel.inv_a - kernel.inv_b));
        }
    }
    Ok(SplatGradient::from_array(std::array::from_fn(|k| {
        pairwise_sum(&terms[k])
    })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn covariance_cases() {
        let iso = build_covariance(&GaussianSplat::new(0.0, 0.0, 3.0, 3.0, 0.7).unwrap()).unwrap();
        assert_relative_eq!(iso.xx, 9.0, epsilon = 1e-12);
        assert_relative_eq!(iso.yy, 9.0, epsilon = 1e-12);
        assert!(iso.xy.abs() < 1e-12);

        let axis = build_covariance(&GaussianSplat::new(0.0, 0.0, 2.0, 1.0, 0.0).unwrap()).unwrap();
        assert_eq!((axis.xx, axis.xy, axis.yy), (4.0, 0.0, 1.0));

        let quarter = build_covariance(&GaussianSplat::new(0.0, 0.0, 2.0, 1.0, FRAC_PI_2).unwrap()).unwrap();
        assert_relative_eq!(quarter.xx, 1.0, epsilon = 1e-12);
        assert_relative_eq!(quarter.yy, 4.0, epsilon = 1e-12);
        assert!(quarter.xy.abs() < 1e-12);
        assert_relative_eq!(quarter.det(), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_scale_is_rejected() {
        let bad = GaussianSplat::from_array([1.0, 1.0, 0.0, 1.0, 0.0]);
        assert!(matches!(build_covariance(&bad), Err(Error::DegenerateScale { .. })));
        assert!(matches!(render(&bad, 4, 4), Err(Error::DegenerateScale { .. })));
        let up = ScalarField::zeros(4, 4).unwrap();
        assert!(matches!(render_backward(&bad, &up), Err(Error::DegenerateScale { .. })));
    }

    #[test]
    fn center_pixel_and_one_sigma() {
        let splat = GaussianSplat::new(16.5, 16.5, 4.0, 4.0, 0.0).unwrap();
        let field = render(&splat, 32, 32).unwrap();
        assert_eq!(field.get(16, 16), 1.0);
        assert_eq!(field.argmax(), (16, 16));
        assert_relative_eq!(field.get(20, 16), (-0.5f64).exp(), epsilon = 1e-15);
        assert!(field.values().iter().all(|&v| v > 0.0 && v <= 1.0));
        assert_eq!(field.values().iter().filter(|&&v| v == 1.0).count(), 1);
    }

    #[test]
    fn off_center_never_reaches_one() {
        let splat = GaussianSplat::new(16.2, 16.5, 4.0, 3.0, 0.3).unwrap();
        let field = render(&splat, 32, 32).unwrap();
        assert!(field.values().iter().all(|&v| v < 1.0));
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let splat = GaussianSplat::new(10.3, 9.1, 3.0, 2.0, 0.4).unwrap();
        let g = render_backward(&splat, &ScalarField::zeros(20, 20).unwrap()).unwrap();
        assert_eq!(g, SplatGradient::default());
    }

    #[test]
    fn symmetric_splat_has_no_center_gradient() {
        let splat = GaussianSplat::new(8.0, 8.0, 2.5, 2.5, 0.0).unwrap();
        let up = ScalarField::from_fn(16, 16, |i, j| {
            let dx = pixel_center(i) - 8.0;
            let dy = pixel_center(j) - 8.0;
            (-(dx * dx + dy * dy) / 20.0).exp()
        })
        .unwrap();
        let g = render_backward(&splat, &up).unwrap();
        assert!(g.d_mu_x.abs() < 1e-12, "{}", g.d_mu_x);
        assert!(g.d_mu_y.abs() < 1e-12, "{}", g.d_mu_y);
        assert!(g.d_r.abs() < 1e-12, "{}", g.d_r);
    }

    #[test]
    fn csv_record_round_trips() {
        let splat = GaussianSplat::new(1.5, 2.25, 3.0, 0.5, -1.0).unwrap();
        let back: GaussianSplat = splat.to_csv_record().parse().unwrap();
        assert_eq!(back, splat);
        assert!("1,2,3".parse::<GaussianSplat>().is_err());
        assert!(matches!(
            "1,2,0,1,0".parse::<GaussianSplat>(),
            Err(Error::DegenerateScale { .. })
        ));
    }

    // Scales of at least 1 keep every value on a 24 x 20 grid above f64 underflow.
    fn splat_strategy() -> impl Strategy<Value = GaussianSplat> {
        (2.0f64..22.0, 2.0f64..18.0, 1.0f64..8.0, 1.0f64..8.0, -10.0f64..10.0)
            .prop_map(|(x, y, a, b, r)| GaussianSplat::new(x, y, a, b, r).unwrap())
    }

    proptest! {
        #[test]
        fn half_turn_period(s in splat_strategy()) {
            let turned = GaussianSplat::new(s.mu_x, s.mu_y, s.s_x, s.s_y, s.r + PI).unwrap();
            let (a, b) = (render(&s, 24, 20).unwrap(), render(&turned, 24, 20).unwrap());
            if reduced_angle(s.r) == reduced_angle(turned.r) {
                prop_assert_eq!(a, b);
            } else {
                for (x, y) in a.values().iter().zip(b.values()) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn quarter_turn_swaps_scales(s in splat_strategy()) {
            let swapped = GaussianSplat::new(s.mu_x, s.mu_y, s.s_y, s.s_x, s.r + FRAC_PI_2).unwrap();
            let (a, b) = (render(&s, 24, 20).unwrap(), render(&swapped, 24, 20).unwrap());
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn values_in_unit_interval(s in splat_strategy()) {
            let g = render(&s, 24, 20).unwrap();
            prop_assert!(g.values().iter().all(|&v| v > 0.0 && v <= 1.0));
        }

        #[test]
        fn isotropic_decreases_with_distance(x in 2.0f64..22.0, y in 2.0f64..18.0, sc in 1.0f64..8.0) {
            let s = GaussianSplat::isotropic(x, y, sc).unwrap();
            let g = render(&s, 24, 20).unwrap();
            let mut by_distance: Vec<(f64, f64)> = (0..20)
                .flat_map(|j| (0..24).map(move |i| (i, j)))
                .map(|(i, j)| ((i as f64 + 0.5 - x).hypot(j as f64 + 0.5 - y), g.get(i, j)))
                .collect();
            by_distance.sort_by(|a, b| a.0.total_cmp(&b.0));
            for w in by_distance.windows(2) {
                if w[0].0 < w[1].0 {
                    prop_assert!(w[0].1 >= w[1].1);
                }
            }
        }

        #[test]
        fn covariance_eigenvalues_are_squared_scales(s in splat_strategy()) {
            let [lo, hi] = build_covariance(&s).unwrap().eigenvalues();
            let (a, b) = (s.s_x * s.s_x, s.s_y * s.s_y);
            prop_assert!((lo - a.min(b)).abs() < 1e-12);
            prop_assert!((hi - a.max(b)).abs() < 1e-12);
        }
    }
}
