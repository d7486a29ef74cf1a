use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let seed = 295u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = DMatrix::from_fn(6, 9, |_, _| if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
    let mut a = DVector::zeros(9);
    for _ in 0..2 {
        a[rng.gen_range(0..9)] = rng.gen_range(-1.5..1.5);
    }
    println!("a = {:?}", a.iter().copied().collect::<Vec<f64>>());
    let support = [2usize, 3, 8];
    let sub = DMatrix::from_fn(6, 3, |r, c| b[(r, support[c])]);
    let gram = sub.transpose() * &sub;
    println!("gram = {gram}");
    let s = DVector::from_vec(vec![1.0, 1.0, 1.0]);
    match gram.clone().cholesky() {
        Some(ch) => {
            let x = ch.solve(&s);
            println!("x = {x}");
            let w = &sub * &x;
            println!("B_S^T w = {}", sub.transpose() * &w);
        }
        None => println!("cholesky failed"),
    }
    println!("det(gram) = {}", gram.determinant());
}
