// dissects a failing order-1 stage from the criterion-4 batch
use spamrec::model::{synth_spam, FactorProfile, SynthSpec};
use spamrec::oracle::{NoiseModel, OracleSession};
use spamrec::pipeline::*;
use std::sync::Arc;

fn main() {
    let spec = SynthSpec {
        d: 30, r0: 3, sparsities: vec![3, 2, 1],
        holder_l: 1.0, alpha: 1.0, margins: vec![0.8, 0.6, 0.5],
        mu: 0.2, seed: 40001,
        profile: FactorProfile::default(),
    };
    let model = Arc::new(synth_spam(&spec).unwrap());
    println!("true supports:");
    for t in model.supports.all() { println!("  S{}: {t}", t.order()); }
    println!("components:");
    for c in &model.components {
        println!("  {} amp {:.3}{}", c.tuple, c.amplitude,
            if model.supports.contains(&c.tuple) { "" } else { "  (induced)" });
    }
    let params = ModelParams {
        d: 30, r0: 3, holder_l: 1.0, alpha: 1.0,
        margins: vec![0.8, 0.6, 0.5], sparsities: vec![3, 2, 1],
    };
    let opts = ParamOptions { c1: 1.05, hash_pruning: true, ..Default::default() };
    let (mut cfg, _) = choose_parameters(&params, NoiseModel::Noiseless, &opts, 41001).unwrap();
    calibrate_measurements(&mut cfg, &params, 24, 41001).unwrap();
    cfg.seed = 41001;
    let session = OracleSession::new_model(model.clone(), NoiseModel::Noiseless, 41001);
    let result = recover_all(&session, &cfg).unwrap();
    for r in &result.per_order {
        println!("order {}: active {:?}", r.order, r.active);
        println!("  recovered {:?}", r.support.iter().map(|t| format!("{t}")).collect::<Vec<_>>());
    }
}
