// quick repro of the failing seed
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spamrec::sampling::MeasureOperator;
use spamrec::sparse_recovery::{solve_p1, RecoveryProblem};

fn main() {
    for seed in 0..40u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let b = DMatrix::from_fn(40, 64, |_, _| if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = DVector::zeros(64);
        for _ in 0..3 {
            let j = rng.gen_range(0..64);
            a[j] = rng.gen_range(0.5..1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        }
        let y = &b * &a;
        let op = MeasureOperator::Dense(b);
        let p = RecoveryProblem::new(op, y, 0.0).with_sparsity(3);
        match solve_p1(&p) {
            Ok(z) => {
                let err = (&z - &a).norm();
                if err > 1e-6 { println!("seed {seed}: SOLVED but err {err:.2e}"); }
            }
            Err(e) => println!("seed {seed}: ERROR {e}"),
        }
    }
    println!("done");
}
