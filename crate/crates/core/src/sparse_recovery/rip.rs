//! Empirical restricted-isometry verifiers for small instances.

use crate::index::{binomial, for_each_combination};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Supports per check above which the verifiers switch to sampling.
pub const EXHAUSTIVE_SUPPORT_LIMIT: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnumerationMode {
    Exhaustive,
    Sampled { supports: u64 },
}

/// Result of an RIP measurement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RipReport {
    pub k: usize,
    pub mode: EnumerationMode,
    /// `l2/l2` constant `delta_k`; `None` for `l2/l1` reports.
    pub delta: Option<f64>,
    /// `l2/l1` constants `(gamma_lb, gamma_ub)`; estimates, not certificates.
    pub gamma: Option<(f64, f64)>,
}

fn supports_of(cols: usize, k: usize, mut visit: impl FnMut(&[usize])) -> EnumerationMode {
    let all: Vec<usize> = (0..cols).collect();
    if binomial(cols, k) <= EXHAUSTIVE_SUPPORT_LIMIT {
        for_each_combination(&all, k, &mut visit);
        EnumerationMode::Exhaustive
    } else {
        let samples = 10_000u64;
        let mut rng = ChaCha8Rng::seed_from_u64(0x717);
        for _ in 0..samples {
            let mut s: Vec<usize> = Vec::with_capacity(k);
            while s.len() < k {
                let c = rng.gen_range(0..cols);
                if !s.contains(&c) {
                    s.push(c);
                }
            }
            s.sort_unstable();
            visit(&s);
        }
        EnumerationMode::Sampled { supports: samples }
    }
}

/// `l2/l2` RIP constant of order `k`:
/// `delta_k = max_S max(|lambda_max - 1|, |1 - lambda_min|)` of the
/// normalized Gram `(1/n) B_S^T B_S`.
pub fn rip_l2l2_check(b: &DMatrix<f64>, k: usize) -> RipReport {
    let n = b.nrows() as f64;
    let mut delta: f64 = 0.0;
    let mode = supports_of(b.ncols(), k, |s| {
        let mut gram = DMatrix::zeros(k, k);
        for (a, &ca) in s.iter().enumerate() {
            for (c, &cc) in s.iter().enumerate() {
                gram[(a, c)] = b.column(ca).dot(&b.column(cc)) / n;
            }
        }
        let eig = gram.symmetric_eigenvalues();
        let lo = eig.min();
        let hi = eig.max();
        delta = delta.max((hi - 1.0).abs()).max((1.0 - lo).abs());
    });
    RipReport {
        k,
        mode,
        delta: Some(delta),
        gamma: None,
    }
}

/// `l2/l1` RIP estimate of order `k`: per support, the extremes of
/// `(1/n) ||B_S x||_1` over `samples` random unit vectors plus the
/// coordinate directions; `gamma_lb = 1 - min`, `gamma_ub = max - 1`.
pub fn rip_l2l1_check(b: &DMatrix<f64>, k: usize, samples: usize, seed: u64) -> RipReport {
    let n = b.nrows() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mode = supports_of(b.ncols(), k, |s| {
        let cols: Vec<_> = s.iter().map(|&c| b.column(c)).collect();
        let mut probe = |x: &DVector<f64>| {
            let norm = x.norm();
            if norm < 1e-14 {
                return;
            }
            let mut l1 = 0.0;
            for row in 0..b.nrows() {
                let mut acc = 0.0;
                for (j, col) in cols.iter().enumerate() {
                    acc += col[row] * x[j];
                }
                l1 += acc.abs();
            }
            let ratio = l1 / n / norm;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        };
        for j in 0..k {
            let mut e = DVector::zeros(k);
            e[j] = 1.0;
            probe(&e);
        }
        for _ in 0..samples {
            let x = DVector::from_fn(k, |_, _| rng.gen_range(-1.0..=1.0));
            probe(&x);
        }
    });
    RipReport {
        k,
        mode,
        delta: None,
        gamma: Some((1.0 - lo, hi - 1.0)),
    }
}
