// step-by-step trace of the LASSO path on a failing seed
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let seed = 30u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 6;
    let cols = 9;
    let b = DMatrix::from_fn(n, cols, |_, _| if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
    let mut a = DVector::zeros(cols);
    for _ in 0..2 {
        a[rng.gen_range(0..cols)] = rng.gen_range(-1.5..1.5);
    }
    let y = &b * &a;
    println!("a = {:?}", a.iter().copied().collect::<Vec<f64>>());

    let mut z: DVector<f64> = DVector::zeros(cols);
    let mut residual = y.clone();
    let mut corr = b.transpose() * &residual;
    let mut active: Vec<usize> = Vec::new();
    let mut signs: Vec<f64> = Vec::new();
    let join = corr.iamax();
    active.push(join);
    signs.push(corr[join].signum());
    println!("start: lambda={:.4} join {}", corr.amax(), join);

    for step in 0..12 {
        let lambda = active.iter().map(|&ca| corr[ca].abs()).fold(0.0, f64::max);
        let k = active.len();
        let mut gram = DMatrix::zeros(k, k);
        for (ai, &ca) in active.iter().enumerate() {
            for (bi, &cb) in active.iter().enumerate() {
                gram[(ai, bi)] = b.column(ca).dot(&b.column(cb));
            }
        }
        let s = DVector::from_vec(signs.clone());
        let Some(chol) = gram.clone().cholesky() else { println!("  singular gram"); break; };
        let d = chol.solve(&s);
        let mut v = DVector::zeros(n);
        for (ai, &ca) in active.iter().enumerate() {
            v += b.column(ca) * d[ai];
        }
        let bv = b.transpose() * &v;
        let mut gamma = lambda;
        let mut event = String::from("lambda-zero");
        for j in 0..cols {
            if active.contains(&j) { continue; }
            for (num, den) in [(lambda - corr[j], 1.0 - bv[j]), (lambda + corr[j], 1.0 + bv[j])] {
                if den > 1e-12 {
                    let g = num / den;
                    if g > 1e-12 && g < gamma - 1e-12 {
                        gamma = g;
                        event = format!("join {j}");
                    }
                }
            }
        }
        for (ai, &ca) in active.iter().enumerate() {
            if d[ai].abs() > 1e-14 {
                let g = -z[ca] / d[ai];
                if g > 1e-12 && g < gamma - 1e-12 {
                    gamma = g;
                    event = format!("drop {ca}");
                }
            }
        }
        println!("step {step}: lambda={lambda:.5} active={active:?} signs={signs:?} gamma={gamma:.5} event={event}");
        for (ai, &ca) in active.iter().enumerate() {
            z[ca] += gamma * d[ai];
        }
        residual -= &v * gamma;
        corr = b.transpose() * &residual;
        println!("   corr after: {:?}", corr.iter().map(|c| (c * 1000.0).round() / 1000.0).collect::<Vec<f64>>());
        if event.starts_with("join") {
            let j: usize = event[5..].parse().unwrap();
            active.push(j);
            signs.push(corr[j].signum());
        } else if event.starts_with("drop") {
            let ca: usize = event[5..].parse().unwrap();
            let pos = active.iter().position(|&x| x == ca).unwrap();
            z[ca] = 0.0;
            active.remove(pos);
            signs.remove(pos);
        } else {
            println!("   end: residual {:.2e}, z {:?}", residual.norm(), z.iter().copied().collect::<Vec<f64>>());
            break;
        }
        if residual.norm() < 1e-12 { println!("   interpolated"); break; }
    }
}
