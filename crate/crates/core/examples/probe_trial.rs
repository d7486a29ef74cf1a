// times one full d=30 r0=3 noiseless recovery at theory parameters
use spamrec::model::{synth_spam, FactorProfile, SynthSpec};
use spamrec::oracle::{NoiseModel, OracleSession};
use spamrec::pipeline::*;
use std::sync::Arc;
use std::time::Instant;

fn main() {
    let spec = SynthSpec {
        d: 30, r0: 3, sparsities: vec![3, 2, 1],
        holder_l: 1.0, alpha: 1.0,
        margins: vec![0.8, 0.6, 0.5],
        mu: 0.2, seed: 12,
        profile: FactorProfile::default(),
    };
    let params = ModelParams {
        d: 30, r0: 3, holder_l: 1.0, alpha: 1.0,
        margins: vec![0.8, 0.6, 0.5], sparsities: vec![3, 2, 1],
    };
    let opts = ParamOptions { c1: 1.05, hash_pruning: true, ..Default::default() };
    let t0 = Instant::now();
    let (mut cfg, _) = choose_parameters(&params, NoiseModel::Noiseless, &opts, 5).unwrap();
    println!("formula n: {:?}", cfg.orders.iter().map(|o| o.n).collect::<Vec<_>>());
    println!("m: {:?}", cfg.orders.iter().map(|o| o.m).collect::<Vec<_>>());
    calibrate_measurements(&mut cfg, &params, 24, 999).unwrap();
    println!("calibrated n: {:?}  (calibration took {:.2?})",
        cfg.orders.iter().map(|o| o.n).collect::<Vec<_>>(), t0.elapsed());

    let model = Arc::new(synth_spam(&spec).unwrap());
    let session = OracleSession::new_model(model.clone(), NoiseModel::Noiseless, 5);
    let t1 = Instant::now();
    let result = recover_all(&session, &cfg).unwrap();
    let elapsed = t1.elapsed();
    for r in &result.per_order {
        println!("order {}: |H|={} grid={} queries={} support={:?} failures={}",
            r.order, r.family_size, r.grid_points_per_hash, r.queries,
            r.support.iter().map(|t| format!("{t}")).collect::<Vec<_>>(),
            r.solver_failures.len());
    }
    let want: Vec<String> = model.supports.all().map(|t| format!("{t}")).collect();
    println!("truth: {want:?}");
    println!("total queries {} (plan {}), trial time {:.2?}",
        result.total_queries, result.expected_queries(), elapsed);
    let exact = (1..=3).all(|r| {
        result.supports.order(r).cloned().collect::<Vec<_>>()
            == model.supports.order(r).cloned().collect::<Vec<_>>()
    });
    println!("exact: {exact}");
}
