// hunts small instances where solve_p1(nu=0) is suboptimal vs the simplex
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spamrec::reference::simplex_p2;
use spamrec::sampling::MeasureOperator;
use spamrec::sparse_recovery::{solve_p1, RecoveryProblem};

fn main() {
    let mut bad = 0;
    for seed in 0..2000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 6;
        let cols = 9;
        let b = DMatrix::from_fn(n, cols, |_, _| if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
        let mut a = DVector::zeros(cols);
        for _ in 0..2 {
            a[rng.gen_range(0..cols)] = rng.gen_range(-1.5..1.5);
        }
        let y = &b * &a;
        if y.norm() < 1e-9 { continue; }
        let z = match solve_p1(&RecoveryProblem::new(MeasureOperator::Dense(b.clone()), y.clone(), 0.0)) {
            Ok(z) => z,
            Err(_) => continue,
        };
        let zs = simplex_p2(&b, &y, 0.0).unwrap();
        let l1z: f64 = z.iter().map(|v| v.abs()).sum();
        let l1s: f64 = zs.iter().map(|v| v.abs()).sum();
        if l1z > l1s * (1.0 + 1e-6) + 1e-9 {
            bad += 1;
            if bad <= 3 {
                println!("seed {seed}: l1 {l1z:.6} vs simplex {l1s:.6}");
            }
        }
    }
    println!("{bad}/2000 suboptimal");
}
