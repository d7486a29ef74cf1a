//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured figures. Run with `cargo test --test acceptance`.
//!
//! The batch criteria share one standard setting: d = 30, r0 = 3,
//! sparsities (3, 2, 1), L = 1, alpha = 1, margins (0.8, 0.6, 0.5),
//! theory-formula grids, calibrated measurement counts, thresholds
//! eps_i = D_i / 3, pruned verified hash families.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spamrec::model::{anchored_anova, extract_component, synth_spam, FactorProfile, SynthSpec};
use spamrec::oracle::{NoiseModel, NoisePattern};
use spamrec::pipeline::theta_ceiling;
use spamrec_cli::config::{ExperimentConfig, TargetSpec};
use spamrec_cli::experiment::{audit_queries, run_experiment, ExperimentReport};
use std::sync::OnceLock;
use std::time::Instant;

fn criterion(number: u32, name: &str, ok: bool, details: String) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {number:2} {name}: {verdict} ({details})");
    assert!(ok, "criterion {number} ({name}) failed: {details}");
}

const D: usize = 30;
const MARGINS: [f64; 3] = [0.8, 0.6, 0.5];
const SPARSITIES: [usize; 3] = [3, 2, 1];

fn standard_synth(seed: u64) -> SynthSpec {
    SynthSpec {
        d: D,
        r0: 3,
        sparsities: SPARSITIES.to_vec(),
        holder_l: 1.0,
        alpha: 1.0,
        margins: MARGINS.to_vec(),
        mu: 0.2,
        seed,
        profile: FactorProfile::default(),
    }
}

fn standard_config(noise: NoiseModel, trials: usize, seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        target: TargetSpec::Synth(standard_synth(seed ^ 0x5151)),
        model_params: None,
        noise,
        trials,
        seed,
        success_floor: 0.0,
        calibrate: true,
        calibration_reps: 24,
        parallel_trials: true,
        options: Default::default(),
        overrides: Vec::new(),
    };
    cfg.options.hash_pruning = true;
    cfg.options.c1 = 1.05;
    cfg
}

struct Batch {
    report: ExperimentReport,
    exact_trials: usize,
    seconds: f64,
}

fn run_batch(noise: NoiseModel, trials: usize, seed: u64) -> Batch {
    let cfg = standard_config(noise, trials, seed);
    let t0 = Instant::now();
    let outcome = run_experiment(&cfg).expect("batch runs");
    let seconds = t0.elapsed().as_secs_f64();
    let exact_trials = outcome
        .report
        .trials
        .iter()
        .filter(|t| t.fully_exact == Some(true))
        .count();
    Batch {
        report: outcome.report,
        exact_trials,
        seconds,
    }
}

fn noiseless_batch() -> &'static Batch {
    static BATCH: OnceLock<Batch> = OnceLock::new();
    BATCH.get_or_init(|| run_batch(NoiseModel::Noiseless, 50, 74_000))
}

/// Criterion 1 — signed-sum identity (100 random canonical models, d=20,
/// r0=3, random (x, beta, h)), error <= 1e-9, under 10 seconds.
#[test]
fn criterion_01_signed_sum_identity() {
    use spamrec::hashing::HashFn;
    use spamrec::sampling::{build_query_points, signed_sum, RademacherVector};
    use std::sync::Arc;

    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let model = synth_spam(&SynthSpec {
            d: 20,
            r0: 3,
            sparsities: vec![2, 1, 1],
            holder_l: 1.0,
            alpha: 1.0,
            margins: vec![0.6, 0.5, 0.4],
            mu: 0.35,
            seed,
            profile: FactorProfile::default(),
        })
        .unwrap();
        let active: Arc<Vec<usize>> = Arc::new((0..20).collect());
        let h = HashFn {
            domain: (0..20).collect(),
            buckets: (0..20).map(|_| rng.gen_range(0..3) as u8).collect(),
            t: 3,
        };
        let beta = RademacherVector::draw(active.clone(), &mut rng);
        let x: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let batch = build_query_points(&x, &beta, &h, 3, &active).unwrap();
        let values: Vec<f64> = batch
            .points
            .iter()
            .map(|p| model.evaluate_unchecked(p))
            .collect();
        let lhs = signed_sum(&values).unwrap();
        let mut rhs = 0.0;
        for tuple in model.supports.order(3) {
            if h.injective_on(tuple) {
                let slots: Vec<u32> = tuple.vars().iter().map(|&v| v as u32).collect();
                rhs += beta.product_over_slots(&slots)
                    * model
                        .component(tuple)
                        .unwrap()
                        .eval_restricted(&tuple.restrict(&x), model.alpha);
            }
        }
        worst = worst.max((lhs - rhs).abs());
    }
    let secs = t0.elapsed().as_secs_f64();
    criterion(
        1,
        "signed-sum identity",
        worst <= 1e-9 && secs < 10.0,
        format!("max |lhs - rhs| = {worst:.2e} over 100 models in {secs:.2}s"),
    );
}

/// Criterion 2 — anchored-ANOVA reconstruction and anchoring at d <= 6.
#[test]
fn criterion_02_anchored_anova_reconstruction() {
    let mut worst_sum: f64 = 0.0;
    let mut worst_anchor: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for seed in 0..4 {
        let model = synth_spam(&SynthSpec {
            d: 6,
            r0: 2,
            sparsities: vec![1, 1],
            holder_l: 1.0,
            alpha: 1.0,
            margins: vec![0.5, 0.4],
            mu: 0.8,
            seed,
            profile: FactorProfile::default(),
        })
        .unwrap();
        let f = |p: &[f64]| model.evaluate_unchecked(p);
        for _ in 0..25 {
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
            worst_sum = worst_sum.max((total - model.evaluate_unchecked(&x)).abs());

            // anchoring: zero one coordinate of a random subset
            let mut u: Vec<usize> = (0..6).filter(|_| rng.gen_bool(0.5)).collect();
            if u.is_empty() {
                u.push(0);
            }
            let mut xz = x.clone();
            xz[u[rng.gen_range(0..u.len())]] = 0.0;
            worst_anchor = worst_anchor.max(anchored_anova(f, &u, &xz).unwrap().abs());
        }
    }
    criterion(
        2,
        "anchored-ANOVA reconstruction",
        worst_sum <= 1e-9 && worst_anchor <= 1e-10,
        format!("reconstruction error {worst_sum:.2e}, anchoring residue {worst_anchor:.2e}"),
    );
}

/// Criterion 3 — component extraction matches ground truth on a 5^|j| grid
/// for every tuple recovered from a d=30, r0=3 model.
#[test]
fn criterion_03_component_extraction() {
    use spamrec::oracle::OracleSession;
    use spamrec::pipeline::recover_all;
    use spamrec_cli::experiment::resolve_recovery;
    use std::sync::Arc;

    let cfg = standard_config(NoiseModel::Noiseless, 1, 30_303);
    let (_, recovery, _) = resolve_recovery(&cfg).unwrap();
    let model = Arc::new(synth_spam(&standard_synth(cfg.seed ^ 0x5151)).unwrap());
    let session = OracleSession::new_model(model.clone(), NoiseModel::Noiseless, cfg.seed);
    let result = recover_all(&session, &recovery).unwrap();
    let recovered: Vec<_> = result.supports.all().cloned().collect();
    assert!(!recovered.is_empty(), "recovery found nothing to extract");

    let f = |p: &[f64]| model.evaluate_unchecked(p);
    let mut worst: f64 = 0.0;
    let mut tuples_checked = 0;
    for tuple in &recovered {
        let r = tuple.order();
        let mut pts = Vec::new();
        let mut point = vec![0.0; r];
        let total = 5usize.pow(r as u32);
        for idx in 0..total {
            let mut rem = idx;
            for slot in 0..r {
                point[slot] = -1.0 + 2.0 * (rem % 5) as f64 / 4.0;
                rem /= 5;
            }
            pts.push(point.clone());
        }
        let got = extract_component(f, D, tuple, &pts, &result.supports).unwrap();
        let comp = model.component(tuple).expect("recovered tuple is genuine");
        for (p, v) in pts.iter().zip(&got) {
            worst = worst.max((v - comp.eval_restricted(p, model.alpha)).abs());
        }
        tuples_checked += 1;
    }
    criterion(
        3,
        "component extraction",
        worst <= 1e-9 && tuples_checked == 6,
        format!("max error {worst:.2e} over {tuples_checked} recovered tuples"),
    );
}

/// Criterion 4 — noiseless exact support recovery, 50 trials, >= 48 exact,
/// under 10 minutes.
#[test]
fn criterion_04_noiseless_recovery() {
    let batch = noiseless_batch();
    criterion(
        4,
        "noiseless exact recovery",
        batch.exact_trials >= 48 && batch.seconds < 600.0,
        format!(
            "{}/50 trials fully exact in {:.1}s (mean queries {:.0})",
            batch.exact_trials, batch.seconds, batch.report.aggregates.mean_queries
        ),
    );
}

/// Criterion 5 — bounded adversarial noise at 10% of the ceiling:
/// >= 45/50 exact, and the theta = 0 rate stays at the criterion-4 level.
#[test]
fn criterion_05_bounded_noise_recovery() {
    let params = spamrec::pipeline::ModelParams {
        d: D,
        r0: 3,
        holder_l: 1.0,
        alpha: 1.0,
        margins: MARGINS.to_vec(),
        sparsities: SPARSITIES.to_vec(),
    };
    let theta = 0.1 * theta_ceiling(&params, 1.0, 1.0);
    let noisy = run_batch(
        NoiseModel::Bounded {
            theta,
            pattern: NoisePattern::ConstantPlus,
        },
        50,
        75_000,
    );
    let clean = noiseless_batch();
    criterion(
        5,
        "bounded-noise recovery",
        noisy.exact_trials >= 45 && clean.exact_trials >= 48,
        format!(
            "theta = {theta:.5}: {}/50 exact with adversarial constant noise in {:.1}s; \
             theta = 0 rate {}/50",
            noisy.exact_trials, noisy.seconds, clean.exact_trials
        ),
    );
}

/// Criterion 6 — Gaussian noise with resampling (N_i <= 16 by the formula):
/// >= 45/50 exact, and measured per-order query counts equal the plan
/// exactly on every run.
#[test]
fn criterion_06_gaussian_noise_recovery() {
    let sigma = 0.1; // N = (1, 2, 7) by the resampling formulas, all <= 16
    let batch = run_batch(NoiseModel::Gaussian { sigma }, 50, 76_000);
    let resamples: Vec<usize> = batch
        .report
        .recovery
        .orders
        .iter()
        .map(|o| o.n_resample)
        .collect();
    let audit = audit_queries(&batch.report);
    let resampling_on = resamples.iter().any(|&n| n > 1) && resamples.iter().all(|&n| n <= 16);
    criterion(
        6,
        "Gaussian-noise recovery",
        batch.exact_trials >= 45 && audit.ok && resampling_on,
        format!(
            "sigma = {sigma}: {}/50 exact in {:.1}s, N = {:?}, query audit {} entries all exact = {}",
            batch.exact_trials,
            batch.seconds,
            resamples,
            audit.entries.len(),
            audit.ok
        ),
    );
}

/// Criterion 7 — sparse recovery property form: planted 3-sparse P1
/// (d=64, n=40) and bilinear P2 (C(10,2) columns, n=120), >= 95/100 each.
#[test]
fn criterion_07_sparse_recovery_rates() {
    use nalgebra::{DMatrix, DVector};
    use spamrec::sampling::MeasureOperator;
    use spamrec::sparse_recovery::{solve_p1, solve_p2, RecoveryProblem};

    let mut p1_hits = 0;
    for trial in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(70_100 + trial);
        let b = DMatrix::from_fn(40, 64, |_, _| if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
        let mut a = DVector::zeros(64);
        let mut placed = 0;
        while placed < 3 {
            let j = rng.gen_range(0..64);
            if a[j] == 0.0 {
                a[j] = rng.gen_range(0.4..1.6) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                placed += 1;
            }
        }
        let y = &b * &a;
        if let Ok(z) = solve_p1(&RecoveryProblem::new(MeasureOperator::Dense(b), y, 0.0)) {
            if (&z - &a).norm() <= 1e-6 {
                p1_hits += 1;
            }
        }
    }

    let d = 10;
    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|i| ((i + 1)..d).map(move |j| (i, j)))
        .collect();
    let mut p2_hits = 0;
    for trial in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(70_700 + trial);
        let mut b = DMatrix::zeros(120, pairs.len());
        for u in 0..120 {
            let beta: Vec<f64> = (0..d)
                .map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
                .collect();
            for (c, &(i, j)) in pairs.iter().enumerate() {
                b[(u, c)] = beta[i] * beta[j];
            }
        }
        let mut a = DVector::zeros(pairs.len());
        let mut placed = 0;
        while placed < 2 {
            let c = rng.gen_range(0..pairs.len());
            if a[c] == 0.0 {
                a[c] = rng.gen_range(0.4..1.6) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                placed += 1;
            }
        }
        let y = &b * &a;
        if let Ok(z) = solve_p2(&RecoveryProblem::new(MeasureOperator::Dense(b), y, 0.0)) {
            if (&z - &a).norm() <= 1e-6 {
                p2_hits += 1;
            }
        }
    }
    criterion(
        7,
        "sparse recovery rates",
        p1_hits >= 95 && p2_hits >= 95,
        format!("P1 {p1_hits}/100, bilinear P2 {p2_hits}/100"),
    );
}

/// Criterion 8 — RIP verifiers: exact zeros on the canonical examples and
/// exact degree-1 homogeneity of the l2/l1 estimates.
#[test]
fn criterion_08_rip_verifiers() {
    use nalgebra::DMatrix;
    use spamrec::sparse_recovery::{rip_l2l1_check, rip_l2l2_check};

    let col = DMatrix::from_row_slice(6, 1, &[1.0, -1.0, 1.0, 1.0, -1.0, -1.0]);
    let d1 = rip_l2l2_check(&col, 1).delta.unwrap();

    let ortho = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]);
    let d2 = rip_l2l2_check(&ortho, 2).delta.unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let b = DMatrix::from_fn(20, 8, |_, _| if rng.gen_bool(0.5) { 1.0 } else { -1.0 });
    let (lb, ub) = rip_l2l1_check(&b, 2, 300, 9).gamma.unwrap();
    let (lb3, ub3) = rip_l2l1_check(&(&b * 3.0), 2, 300, 9).gamma.unwrap();
    let homogeneous = ((1.0 - lb3) - 3.0 * (1.0 - lb)).abs() <= 1e-9
        && ((1.0 + ub3) - 3.0 * (1.0 + ub)).abs() <= 1e-9;

    criterion(
        8,
        "RIP verifiers",
        d1 == 0.0 && d2.abs() < 1e-12 && homogeneous,
        format!("delta_1 = {d1:.1e}, delta_2 = {d2:.1e}, homogeneity exact = {homogeneous}"),
    );
}

/// Criterion 9 — hash families: exhaustive perfection for d <= 12, t <= 3
/// over 100 seeds, at most one rebuild on average, exact size formula.
#[test]
fn criterion_09_hash_families() {
    use spamrec::hashing::{build_hash_family, family_size, verify_perfect};
    let mut attempts = 0usize;
    let mut builds = 0usize;
    let mut sizes_ok = true;
    let mut perfect = true;
    for seed in 0..100u64 {
        for (d, t) in [(12usize, 2usize), (12, 3), (10, 2), (10, 3)] {
            let domain: Vec<usize> = (0..d).collect();
            let family = build_hash_family(&domain, t, 2.0, seed * 31 + d as u64).unwrap();
            builds += 1;
            attempts += family.attempts;
            sizes_ok &= family.functions.len() == family_size(d, t, 2.0);
            perfect &= verify_perfect(&family, None).is_ok();
        }
    }
    let avg_rebuilds = attempts as f64 / builds as f64 - 1.0;
    criterion(
        9,
        "hash families",
        perfect && sizes_ok && avg_rebuilds <= 1.0,
        format!(
            "{builds} builds, avg rebuilds {avg_rebuilds:.3}, sizes exact = {sizes_ok}, all perfect = {perfect}"
        ),
    );
}

/// Criterion 10 — byte-identical reports for identical config and seed
/// (sequential mode, through the binary).
#[test]
fn criterion_10_reproducibility() {
    use std::process::Command;
    let dir = std::env::temp_dir().join(format!("spamrec-acc10-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let cfg_path = dir.join("exp.json");
    std::fs::write(
        &cfg_path,
        r#"{
  "target": {"synth": {"d": 14, "r0": 2, "sparsities": [2, 1],
             "holder_l": 1.0, "alpha": 1.0, "margins": [0.6, 0.45],
             "mu": 0.3, "seed": 1010}},
  "noise": {"kind": "gaussian", "sigma": 0.02},
  "trials": 3,
  "seed": 2020,
  "success_floor": 0.0,
  "calibrate": true,
  "parallel_trials": false,
  "options": {"hash_pruning": true, "c1": 1.05}
}"#,
    )
    .unwrap();
    for out in ["a", "b"] {
        let status = Command::new(env!("CARGO_BIN_EXE_spamrec"))
            .args(["experiment", "--config"])
            .arg(&cfg_path)
            .arg("--out")
            .arg(dir.join(out))
            .status()
            .unwrap();
        assert!(status.success(), "experiment run failed");
    }
    let a = std::fs::read(dir.join("a/report.json")).unwrap();
    let b = std::fs::read(dir.join("b/report.json")).unwrap();
    criterion(
        10,
        "byte-identical reports",
        a == b,
        format!("two sequential runs, {} bytes each", a.len()),
    );
}
