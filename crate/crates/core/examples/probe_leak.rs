use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spamrec::reference::simplex_p2;
use spamrec::sampling::MeasureOperator;
use spamrec::sparse_recovery::{solve_p1, RecoveryProblem};

fn main() {
    for seed in [295u64, 399, 30, 36, 63] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = DMatrix::from_fn(6, 9, |_, _| if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
        let mut a = DVector::zeros(9);
        for _ in 0..2 {
            a[rng.gen_range(0..9)] = rng.gen_range(-1.5..1.5);
        }
        let y = &b * &a;
        if y.norm() < 1e-9 { continue; }
        let z = solve_p1(&RecoveryProblem::new(MeasureOperator::Dense(b.clone()), y.clone(), 0.0)).unwrap();
        let zs = simplex_p2(&b, &y, 0.0).unwrap();
        let l1z: f64 = z.iter().map(|v| v.abs()).sum();
        let l1s: f64 = zs.iter().map(|v| v.abs()).sum();
        // dual feasibility of z's support
        let support: Vec<usize> = (0..9).filter(|&j| z[j].abs() > 1e-12).collect();
        let k = support.len();
        let sub = DMatrix::from_fn(6, k, |r, c| b[(r, support[c])]);
        let s = DVector::from_fn(k, |c, _| z[support[c]].signum());
        let dual_ok = (sub.transpose() * &sub).cholesky().map(|ch| {
            let w = &sub * ch.solve(&s);
            (b.transpose() * w).amax()
        });
        println!("seed {seed}: l1(z)={l1z:.6} l1(simplex)={l1s:.6} support={support:?} dual max |B^T w| = {dual_ok:?} feas={:.1e}",
            (&y - &b * &z).norm());
    }
}
