//! Order-fixed reductions.
//!
//! Every sum over pixels goes through a pairwise tree so that the result only
//! depends on the input order, never on how work might be split between threads.

const LEAF: usize = 16;

pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= LEAF {
        return values.iter().fold(0.0, |acc, v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Pairwise sum of `f(i)` for `i in 0..n` without materialising the terms.
pub(crate) fn pairwise_sum_by(n: usize, f: &impl Fn(usize) -> f64) -> f64 {
    fn go(lo: usize, hi: usize, f: &impl Fn(usize) -> f64) -> f64 {
        if hi - lo <= LEAF {
            return (lo..hi).fold(0.0, |acc, i| acc + f(i));
        }
        let mid = lo + (hi - lo) / 2;
        go(lo, mid, f) + go(mid, hi, f)
    }
    go(0, n, f)
}
