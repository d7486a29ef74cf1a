//! Anchored-ANOVA invariants of canonical models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spamrec::model::{
    anchored_anova, canonical_form_check, extract_component, synth_spam, FactorProfile, SynthSpec,
};
use spamrec::IndexTuple;

fn small_model(seed: u64) -> spamrec::SpamModel {
    synth_spam(&SynthSpec {
        d: 6,
        r0: 2,
        sparsities: vec![1, 1],
        holder_l: 1.0,
        alpha: 1.0,
        margins: vec![0.5, 0.35],
        mu: -0.3,
        seed,
        profile: FactorProfile::default(),
    })
    .unwrap()
}

/// `sum_{U subseteq [d]} f_U(x_U) = f(x)` at random points.
#[test]
fn anchored_reconstruction_sums_to_f() {
    for seed in 0..3 {
        let model = small_model(seed);
        let f = |x: &[f64]| model.evaluate_unchecked(x);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        for _ in 0..34 {
            let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let mut total = 0.0;
            for mask in 0u32..(1 << 6) {
                let u: Vec<usize> = (0..6).filter(|&b| mask >> b & 1 == 1).collect();
                total += if u.is_empty() {
                    model.evaluate_unchecked(&[0.0; 6])
                } else {
                    anchored_anova(f, &u, &x).unwrap()
                };
            }
            let direct = model.evaluate_unchecked(&x);
            assert!(
                (total - direct).abs() <= 1e-9 * (1.0 + direct.abs()),
                "seed {seed}: {total} vs {direct}"
            );
        }
    }
}

/// `f_U(x) = 0` whenever `x_j = 0` for some `j` in `U`.
#[test]
fn anchoring_vanishes_on_zero_coordinates() {
    let model = small_model(7);
    let f = |x: &[f64]| model.evaluate_unchecked(x);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let mut x: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let mut u: Vec<usize> = (0..6).filter(|_| rng.gen_bool(0.4)).collect();
        if u.is_empty() {
            u.push(rng.gen_range(0..6));
        }
        let zeroed = u[rng.gen_range(0..u.len())];
        x[zeroed] = 0.0;
        let v = anchored_anova(f, &u, &x).unwrap();
        assert!(v.abs() <= 1e-10, "f_U with zero coordinate gave {v}");
    }
}

/// `f_U` vanishes for every `U` outside the subset closure of the supports.
#[test]
fn anova_vanishes_off_support_closure() {
    let model = small_model(11);
    let f = |x: &[f64]| model.evaluate_unchecked(x);
    let closure = model.supports.closure();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    for mask in 1u32..(1 << 6) {
        let u: Vec<usize> = (0..6).filter(|&b| mask >> b & 1 == 1).collect();
        let tuple = IndexTuple::new(u.clone()).unwrap();
        if closure.contains(&tuple) {
            continue;
        }
        let v = anchored_anova(f, &u, &x).unwrap();
        assert!(v.abs() <= 1e-9, "off-closure U {tuple} gave {v}");
    }
}

/// Component extraction agrees with the anchored ANOVA on the same tuple.
#[test]
fn extraction_matches_anova() {
    let model = synth_spam(&SynthSpec {
        d: 10,
        r0: 3,
        sparsities: vec![1, 1, 1],
        holder_l: 1.0,
        alpha: 1.0,
        margins: vec![0.5, 0.35, 0.3],
        mu: 0.4,
        seed: 23,
        profile: FactorProfile::default(),
    })
    .unwrap();
    assert!(canonical_form_check(&model, 7).is_canonical());
    let f = |x: &[f64]| model.evaluate_unchecked(x);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for tuple in model.supports.all() {
        let r = tuple.order();
        let pts: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..r).map(|_| rng.gen_range(-1.0..=1.0)).collect())
            .collect();
        let by_extract = extract_component(f, 10, tuple, &pts, &model.supports).unwrap();
        for (point, got) in pts.iter().zip(&by_extract) {
            let mut x = vec![0.0; 10];
            for (l, &var) in tuple.vars().iter().enumerate() {
                x[var] = point[l];
            }
            let by_anova = anchored_anova(f, tuple.vars(), &x).unwrap();
            assert!((got - by_anova).abs() <= 1e-9, "{tuple}: {got} vs {by_anova}");
            // and both equal the stored ground-truth component
            let truth = model
                .component(tuple)
                .unwrap()
                .eval_restricted(point, model.alpha);
            assert!((got - truth).abs() <= 1e-9, "{tuple}: {got} vs truth {truth}");
        }
    }
}
