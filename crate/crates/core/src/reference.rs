//! Brute-force reference implementations backing the test suites.
//!
//! Everything here is deliberately independent of the production solvers:
//! the simplex tableau and ISTA share no code with the primal-dual scheme or
//! the homotopy path, and the support search is plain enumeration. Keep it
//! that way; these are the oracles the solvers are judged against.

use crate::index::{binomial, for_each_combination};
use nalgebra::{DMatrix, DVector};

/// Residual norm selector for the reference routines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualNorm {
    L2,
    L1,
}

fn residual_norm(norm: ResidualNorm, v: &DVector<f64>) -> f64 {
    match norm {
        ResidualNorm::L2 => v.norm(),
        ResidualNorm::L1 => v.iter().map(|x| x.abs()).sum(),
    }
}

fn shrink(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// All supports of size at most `k_max` whose least-squares fit reaches
/// residual `tol`; the "sparsest consistent vector" oracle. Returns
/// `(support, coefficients)` pairs sorted by support size.
pub fn consistent_supports(
    b: &DMatrix<f64>,
    y: &DVector<f64>,
    k_max: usize,
    tol: f64,
) -> Vec<(Vec<usize>, DVector<f64>)> {
    let cols: Vec<usize> = (0..b.ncols()).collect();
    let mut out = Vec::new();
    if y.norm() <= tol {
        out.push((Vec::new(), DVector::zeros(0)));
    }
    for k in 1..=k_max.min(b.ncols()) {
        assert!(
            binomial(b.ncols(), k) <= 5_000_000,
            "support search too large"
        );
        for_each_combination(&cols, k, |s| {
            let sub = DMatrix::from_fn(b.nrows(), k, |r, c| b[(r, s[c])]);
            let svd = sub.clone().svd(true, true);
            if let Ok(z) = svd.solve(y, 1e-12) {
                if (&sub * &z - y).norm() <= tol {
                    out.push((s.to_vec(), z));
                }
            }
        });
    }
    out.sort_by_key(|(s, _)| s.len());
    out
}

/// Exact minimum-l1 value over solutions supported on at most `k_max`
/// columns with residual within `nu`. Exhaustive in the support, exact
/// (via active-sign enumeration) per support for the l2 ball; used to
/// cross-check the solvers on planted instances where the optimum is known
/// to be sparse.
pub fn min_l1_over_supports(
    b: &DMatrix<f64>,
    y: &DVector<f64>,
    nu: f64,
    k_max: usize,
    norm: ResidualNorm,
) -> Option<f64> {
    if residual_norm(norm, y) <= nu {
        return Some(0.0);
    }
    let cols: Vec<usize> = (0..b.ncols()).collect();
    let mut best: Option<f64> = None;
    for k in 1..=k_max.min(b.ncols()) {
        for_each_combination(&cols, k, |s| {
            let sub = DMatrix::from_fn(b.nrows(), k, |r, c| b[(r, s[c])]);
            let value = match norm {
                ResidualNorm::L2 => min_l1_fixed_support_l2(&sub, y, nu),
                ResidualNorm::L1 => min_l1_fixed_support_l1(&sub, y, nu),
            };
            if let Some(v) = value {
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        });
    }
    best
}

/// `min ||z||_1 s.t. ||y - Sz||_2 <= nu` for a small fixed support, via
/// projected subgradient descent polished by a penalized Newton-free line
/// search. Small and slow, only for tiny `S`.
fn min_l1_fixed_support_l2(s: &DMatrix<f64>, y: &DVector<f64>, nu: f64) -> Option<f64> {
    let k = s.ncols();
    // feasibility: least squares residual must reach nu
    let svd = s.clone().svd(true, true);
    let ls = svd.solve(y, 1e-12).ok()?;
    let min_resid = (s * &ls - y).norm();
    if min_resid > nu * (1.0 + 1e-9) + 1e-12 {
        return None;
    }
    if nu == 0.0 {
        // unique least-squares interpolant on the support
        return Some(ls.iter().map(|v| v.abs()).sum());
    }
    // shrink along the path z(t) = argmin ||z||_1 + t residual; penalized
    // proximal gradient at decreasing penalties, keeping the best feasible
    let mut best = ls.iter().map(|v| v.abs()).sum::<f64>();
    let lmax = (s.transpose() * y).amax();
    let lip = {
        let sv = s.clone().svd(false, false);
        let top = sv.singular_values.max();
        top * top
    };
    for step in 0..60 {
        let lambda = lmax * 0.85f64.powi(step);
        let mut z = DVector::zeros(k);
        for _ in 0..20_000 {
            let grad = s.transpose() * (s * &z - y);
            let mut next = &z - &grad / lip;
            for v in next.iter_mut() {
                *v = shrink(*v, lambda / lip);
            }
            let delta = (&next - &z).norm();
            z = next;
            if delta < 1e-12 {
                break;
            }
        }
        if (s * &z - y).norm() <= nu * (1.0 + 1e-9) + 1e-12 {
            best = best.min(z.iter().map(|v| v.abs()).sum());
        }
    }
    Some(best)
}

/// `min ||z||_1 s.t. ||y - Sz||_1 <= nu` on a fixed support, via the simplex
/// reference below.
fn min_l1_fixed_support_l1(s: &DMatrix<f64>, y: &DVector<f64>, nu: f64) -> Option<f64> {
    simplex_p2(s, y, nu).map(|z| z.iter().map(|v| v.abs()).sum())
}

/// Dense two-phase simplex (Bland's rule) on the LP form of `(P2)`:
///
/// ```text
/// min 1'(z+ + z-)  s.t.  B(z+ - z-) + r+ - r- = y,
///                        1'(r+ + r-) + s = nu,   all vars >= 0.
/// ```
///
/// Returns the optimal `z` or `None` when infeasible. Intended for
/// instances with at most ~20 columns.
pub fn simplex_p2(b: &DMatrix<f64>, y: &DVector<f64>, nu: f64) -> Option<DVector<f64>> {
    let n = b.nrows();
    let p = b.ncols();
    // variables: z+ (p), z- (p), r+ (n), r- (n), slack (1)
    let nv = 2 * p + 2 * n + 1;
    let rows = n + 1;
    let mut a = DMatrix::zeros(rows, nv);
    let mut rhs = DVector::zeros(rows);
    for r in 0..n {
        for c in 0..p {
            a[(r, c)] = b[(r, c)];
            a[(r, p + c)] = -b[(r, c)];
        }
        a[(r, 2 * p + r)] = 1.0;
        a[(r, 2 * p + n + r)] = -1.0;
        rhs[r] = y[r];
    }
    for j in 0..n {
        a[(n, 2 * p + j)] = 1.0;
        a[(n, 2 * p + n + j)] = 1.0;
    }
    a[(n, 2 * p + 2 * n)] = 1.0;
    rhs[n] = nu;

    let mut cost = DVector::zeros(nv);
    for c in 0..2 * p {
        cost[c] = 1.0;
    }

    let z = simplex_standard_form(&a, &rhs, &cost)?;
    Some(DVector::from_fn(p, |j, _| z[j] - z[p + j]))
}

/// Two-phase primal simplex for `min c'x s.t. Ax = b, x >= 0` with Bland's
/// anti-cycling rule. Dense tableau; small instances only.
pub fn simplex_standard_form(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &DVector<f64>,
) -> Option<DVector<f64>> {
    let m = a.nrows();
    let n = a.ncols();
    // phase 1: artificial variables
    let mut tab = DMatrix::zeros(m + 1, n + m + 1);
    for r in 0..m {
        let flip = if b[r] < 0.0 { -1.0 } else { 1.0 };
        for cc in 0..n {
            tab[(r, cc)] = flip * a[(r, cc)];
        }
        tab[(r, n + r)] = 1.0;
        tab[(r, n + m)] = flip * b[r];
    }
    // phase-1 objective: sum of artificials
    for cc in 0..n {
        let s: f64 = (0..m).map(|r| tab[(r, cc)]).sum();
        tab[(m, cc)] = -s;
    }
    tab[(m, n + m)] = -(0..m).map(|r| tab[(r, n + m)]).sum::<f64>();
    let mut basis: Vec<usize> = (n..n + m).collect();
    pivot_until_optimal(&mut tab, &mut basis, n + m)?;
    if tab[(m, n + m)].abs() > 1e-7 {
        return None; // infeasible
    }
    // drive remaining artificials out of the basis where possible
    for r in 0..m {
        if basis[r] >= n {
            if let Some(cc) = (0..n).find(|&cc| tab[(r, cc)].abs() > 1e-9) {
                pivot(&mut tab, r, cc);
                basis[r] = cc;
            }
        }
    }
    // phase 2: rebuild objective over original variables
    for cc in 0..=n + m {
        tab[(m, cc)] = 0.0;
    }
    for cc in 0..n {
        tab[(m, cc)] = c[cc];
    }
    // make reduced costs consistent with the basis
    for r in 0..m {
        let bc = basis[r];
        if bc < n && c[bc] != 0.0 {
            let coef = tab[(m, bc)];
            if coef != 0.0 {
                for cc in 0..=n + m {
                    tab[(m, cc)] -= coef * tab[(r, cc)];
                }
            }
        }
    }
    // forbid artificials from re-entering
    for art in n..n + m {
        if !basis.contains(&art) {
            for r in 0..m {
                tab[(r, art)] = 0.0;
            }
            tab[(m, art)] = 1.0;
        }
    }
    pivot_until_optimal(&mut tab, &mut basis, n + m)?;
    let mut x = DVector::zeros(n);
    for r in 0..m {
        if basis[r] < n {
            x[basis[r]] = tab[(r, n + m)];
        }
    }
    Some(x)
}

fn pivot_until_optimal(
    tab: &mut DMatrix<f64>,
    basis: &mut [usize],
    rhs_col: usize,
) -> Option<()> {
    let m = tab.nrows() - 1;
    for _ in 0..200_000 {
        // Bland: smallest index with negative reduced cost
        let entering = (0..rhs_col).find(|&cc| tab[(m, cc)] < -1e-9);
        let Some(e) = entering else {
            return Some(());
        };
        // ratio test, Bland ties by smallest basis index
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for r in 0..m {
            if tab[(r, e)] > 1e-9 {
                let ratio = tab[(r, rhs_col)] / tab[(r, e)];
                if ratio < best - 1e-12
                    || (ratio < best + 1e-12 && leave.is_some_and(|l| basis[r] < basis[l]))
                {
                    best = ratio;
                    leave = Some(r);
                }
            }
        }
        let l = leave?; // unbounded otherwise
        pivot(tab, l, e);
        basis[l] = e;
    }
    None // cycling guard tripped
}

fn pivot(tab: &mut DMatrix<f64>, row: usize, col: usize) {
    let piv = tab[(row, col)];
    let ncols = tab.ncols();
    for cc in 0..ncols {
        tab[(row, cc)] /= piv;
    }
    for r in 0..tab.nrows() {
        if r != row {
            let f = tab[(r, col)];
            if f != 0.0 {
                for cc in 0..ncols {
                    tab[(r, cc)] -= f * tab[(row, cc)];
                }
            }
        }
    }
}

/// `(P1)` reference: ISTA on the Lagrangian `0.5||y-Bz||^2 + lambda||z||_1`
/// with bisection on `lambda` until the residual matches `nu`. Independent
/// of both production paths.
pub fn ista_p1_reference(b: &DMatrix<f64>, y: &DVector<f64>, nu: f64) -> DVector<f64> {
    if y.norm() <= nu {
        return DVector::zeros(b.ncols());
    }
    let lip = {
        let sv = b.clone().svd(false, false);
        let top = sv.singular_values.max();
        (top * top).max(1e-12)
    };
    let ista = |lambda: f64| -> DVector<f64> {
        let mut z = DVector::zeros(b.ncols());
        for _ in 0..50_000 {
            let grad = b.transpose() * (b * &z - y);
            let mut next = &z - &grad / lip;
            for v in next.iter_mut() {
                *v = shrink(*v, lambda / lip);
            }
            let delta = (&next - &z).norm();
            z = next;
            if delta < 1e-13 * (1.0 + z.norm()) {
                break;
            }
        }
        z
    };
    if nu == 0.0 {
        return ista(1e-11 * (b.transpose() * y).amax());
    }
    let mut lo = 0.0;
    let mut hi = (b.transpose() * y).amax();
    let mut best = ista(hi);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let z = ista(mid);
        let r = (b * &z - y).norm();
        if r > nu {
            hi = mid;
        } else {
            lo = mid;
            best = z;
        }
        if (hi - lo) < 1e-12 * hi.max(1.0) {
            break;
        }
    }
    best
}
