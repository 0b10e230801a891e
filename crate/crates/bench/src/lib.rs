//! Fixtures shared by the benchmarks.

use gsmask::levelset::signed_edt;
use gsmask::optim::DualTarget;
use gsmask::synth::{generate, sample_spec, ShapeFamily};
use gsmask::{threshold, BinaryMask, BoundaryRule, GaussianSplat, LevelSetField, ScalarField};

/// A splat roughly centred in an `n x n` grid, covering about a fifth of its width.
pub fn centred_splat(n: usize) -> GaussianSplat {
    let c = n as f64 / 2.0;
    GaussianSplat::new(c + 0.3, c - 0.7, 0.14 * n as f64, 0.09 * n as f64, 0.6).unwrap()
}

pub fn ellipse_mask(n: usize) -> BinaryMask {
    threshold(&gsmask::splat::render(&centred_splat(n), n, n).unwrap(), 0.5)
}

pub fn blob_mask(n: usize, seed: u64) -> BinaryMask {
    generate(&sample_spec(ShapeFamily::Blob, seed, n, n), n, n).unwrap().0
}

/// Deterministic salt-and-pepper mask, the worst case for boundary extraction.
pub fn noise_mask(n: usize, seed: u64) -> BinaryMask {
    let mut state = seed | 1;
    BinaryMask::from_fn(n, n, |_, _| {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state & 1 == 1
    })
    .unwrap()
}

pub fn upstream(n: usize) -> ScalarField {
    ScalarField::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 11) as f64 / 10.0 - 0.5).unwrap()
}

/// Target and level set for one dual-task objective evaluation on an `n x n` grid.
pub fn dual_problem(n: usize) -> (DualTarget, LevelSetField) {
    let mask = blob_mask(n, 1);
    let lsf = signed_edt(&mask).unwrap();
    (DualTarget::new(mask, BoundaryRule::OuterRing, None).unwrap(), lsf)
}
