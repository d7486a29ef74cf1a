//! Solver contracts against the independent reference implementations.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spamrec::reference::{
    consistent_supports, ista_p1_reference, simplex_p2, ResidualNorm,
};
use spamrec::sampling::MeasureOperator;
use spamrec::sparse_recovery::{solve_p1, solve_p2, RecoveryProblem};

fn rademacher(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
}

fn l1(v: &DVector<f64>) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// P1 solutions are feasible and l1-optimal against the ISTA bisection
/// reference on small noisy instances.
#[test]
fn p1_optimality_against_ista_reference() {
    for seed in 0..12 {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
        let b = rademacher(12, 18, seed);
        let mut a = DVector::zeros(18);
        for _ in 0..2 {
            a[rng.gen_range(0..18)] = rng.gen_range(-1.5..1.5);
        }
        let noise = DVector::from_fn(12, |_, _| rng.gen_range(-0.02..0.02));
        let y = &b * &a + noise;
        let nu = 0.02 * (12f64).sqrt();
        let z = solve_p1(&RecoveryProblem::new(
            MeasureOperator::Dense(b.clone()),
            y.clone(),
            nu,
        ))
        .unwrap();
        let resid = (&y - &b * &z).norm();
        assert!(resid <= nu * (1.0 + 1e-6) + 1e-9, "feasibility: {resid} vs {nu}");
        let z_ref = ista_p1_reference(&b, &y, nu);
        let ref_l1 = l1(&z_ref);
        assert!(
            l1(&z) <= ref_l1 * (1.0 + 1e-4) + 1e-9,
            "seed {seed}: l1 {} vs reference {ref_l1}",
            l1(&z)
        );
    }
}

/// P2 solutions are l1-optimal against the dense simplex reference.
#[test]
fn p2_optimality_against_simplex_reference() {
    for seed in 0..12 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let b = rademacher(10, 16, 77 + seed);
        let mut a = DVector::zeros(16);
        for _ in 0..2 {
            a[rng.gen_range(0..16)] = rng.gen_range(-1.0..1.0);
        }
        let noise = DVector::from_fn(10, |_, _| rng.gen_range(-0.01..0.01));
        let y = &b * &a + noise;
        let nu = 0.01 * 10.0;
        let z = solve_p2(&RecoveryProblem::new(
            MeasureOperator::Dense(b.clone()),
            y.clone(),
            nu,
        ))
        .unwrap();
        let resid = l1(&(&y - &b * &z));
        assert!(resid <= nu * (1.0 + 1e-6) + 1e-9);
        let z_ref = simplex_p2(&b, &y, nu).expect("simplex feasible");
        let ref_l1 = l1(&z_ref);
        assert!(
            l1(&z) <= ref_l1 * (1.0 + 1e-4) + 1e-9,
            "seed {seed}: l1 {} vs simplex {ref_l1}",
            l1(&z)
        );
    }
}

/// The exhaustive support-search oracle confirms planted vectors are the
/// sparsest consistent solutions, and P1 recovers them.
#[test]
fn planted_is_sparsest_and_recovered() {
    let b = rademacher(40, 64, 4242);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut a = DVector::zeros(64);
    let mut support = Vec::new();
    while support.len() < 3 {
        let j = rng.gen_range(0..64);
        if !support.contains(&j) {
            support.push(j);
            a[j] = rng.gen_range(0.5..1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        }
    }
    support.sort_unstable();
    let y = &b * &a;
    // no 1- or 2-sparse solution exists; the only 3-sparse one is `a`
    let sols = consistent_supports(&b, &y, 3, 1e-8);
    assert_eq!(sols.len(), 1, "supports found: {:?}", sols.iter().map(|s| &s.0).collect::<Vec<_>>());
    assert_eq!(sols[0].0, support);
    let z = solve_p1(&RecoveryProblem::new(MeasureOperator::Dense(b), y, 0.0)).unwrap();
    assert!((&z - &a).norm() <= 1e-6);
}

/// Exact recovery property: noiseless k-sparse instances with
/// `n >= 4 k log(cols/k)` succeed in at least 95% of trials.
#[test]
fn exact_recovery_rate_noiseless() {
    let cols = 50;
    let k = 3;
    let n = (4.0 * k as f64 * (cols as f64 / k as f64).ln()).ceil() as usize; // 34
    let mut hits = 0;
    for trial in 0..100u64 {
        let b = rademacher(n, cols, 31_000 + trial);
        let mut rng = ChaCha8Rng::seed_from_u64(trial);
        let mut a = DVector::zeros(cols);
        let mut placed = 0;
        while placed < k {
            let j = rng.gen_range(0..cols);
            if a[j] == 0.0 {
                a[j] = rng.gen_range(0.4..1.4) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                placed += 1;
            }
        }
        let y = &b * &a;
        if let Ok(z) = solve_p1(&RecoveryProblem::new(MeasureOperator::Dense(b), y, 0.0)) {
            if (&z - &a).norm() <= 1e-6 {
                hits += 1;
            }
        }
    }
    assert!(hits >= 95, "exact recovery in {hits}/100 trials");
}

/// Increasing the noise radius never increases the optimal l1 value.
#[test]
fn l1_value_monotone_in_radius() {
    let b = rademacher(14, 20, 5150);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut a = DVector::zeros(20);
    a[3] = 1.0;
    a[11] = -0.8;
    let y = &b * &a + DVector::from_fn(14, |_, _| rng.gen_range(-0.05..0.05));
    let op = MeasureOperator::Dense(b);
    let mut last = f64::INFINITY;
    for nu in [0.0, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0] {
        let z = solve_p1(&RecoveryProblem::new(op.clone(), y.clone(), nu)).unwrap();
        let value = l1(&z);
        assert!(
            value <= last * (1.0 + 1e-6) + 1e-9,
            "l1 value rose from {last} to {value} at nu = {nu}"
        );
        last = value;
    }
}

/// Bilinear planted recovery through P2, cross-checked by support search.
#[test]
fn p2_bilinear_planted_recovery() {
    let d = 8;
    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|a| ((a + 1)..d).map(move |b| (a, b)))
        .collect();
    let n = 60;
    let mut hits = 0;
    for trial in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + trial);
        let mut b = DMatrix::zeros(n, pairs.len());
        for u in 0..n {
            let beta: Vec<f64> = (0..d)
                .map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
                .collect();
            for (c, &(i, j)) in pairs.iter().enumerate() {
                b[(u, c)] = beta[i] * beta[j];
            }
        }
        let mut a = DVector::zeros(pairs.len());
        a[rng.gen_range(0..pairs.len())] = 1.0;
        loop {
            let c = rng.gen_range(0..pairs.len());
            if a[c] == 0.0 {
                a[c] = -0.7;
                break;
            }
        }
        let y = &b * &a;
        let z = solve_p2(&RecoveryProblem::new(MeasureOperator::Dense(b), y, 0.0)).unwrap();
        if (&z - &a).norm() <= 1e-6 {
            hits += 1;
        }
    }
    assert!(hits >= 19, "bilinear exact recovery {hits}/20");
}

/// P2 with a radius at least `||y||_1` returns zero.
#[test]
fn p2_huge_radius_returns_zero() {
    let b = rademacher(6, 10, 1);
    let y = DVector::from_fn(6, |i, _| i as f64 / 10.0);
    let nu = l1(&y);
    let z = solve_p2(&RecoveryProblem::new(MeasureOperator::Dense(b), y, nu)).unwrap();
    assert!(z.iter().all(|&v| v == 0.0));
}

/// Basis pursuit agrees with the simplex optimum on tie-heavy sign-matrix
/// instances (exact correlation ties are the norm there, and duplicate
/// columns must fall back rather than certify).
#[test]
fn p1_matches_simplex_on_tie_heavy_instances() {
    let mut checked = 0;
    for seed in 0..400u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = rademacher(6, 9, 10_000 + seed);
        let mut a = DVector::zeros(9);
        for _ in 0..2 {
            a[rng.gen_range(0..9)] = rng.gen_range(-1.5..1.5);
        }
        let y = &b * &a;
        if y.norm() < 1e-9 {
            continue;
        }
        let Ok(z) = solve_p1(&RecoveryProblem::new(
            MeasureOperator::Dense(b.clone()),
            y.clone(),
            0.0,
        )) else {
            continue; // degenerate instances may report non-convergence
        };
        let zs = simplex_p2(&b, &y, 0.0).unwrap();
        assert!(
            l1(&z) <= l1(&zs) * (1.0 + 1e-6) + 1e-9,
            "seed {seed}: l1 {} vs simplex {}",
            l1(&z),
            l1(&zs)
        );
        checked += 1;
    }
    assert!(checked >= 380, "only {checked} instances checked");
}

/// Least-squares reference on the supports vs min_l1 search sanity.
#[test]
fn min_l1_search_matches_planted_value() {
    use spamrec::reference::min_l1_over_supports;
    let b = rademacher(12, 10, 3133);
    let mut a = DVector::zeros(10);
    a[2] = 1.25;
    let y = &b * &a;
    let best = min_l1_over_supports(&b, &y, 0.0, 2, ResidualNorm::L2).unwrap();
    assert!((best - 1.25).abs() < 1e-9);
}
