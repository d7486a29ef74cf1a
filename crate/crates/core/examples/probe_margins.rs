// probes achievable margins of the synthetic component family
use spamrec::model::{synth_spam, FactorProfile, SynthSpec};

fn main() {
    for (d1, d2, d3) in [(0.80, 0.60, 0.50), (0.75, 0.55, 0.45), (0.70, 0.50, 0.40)] {
        let mut ok = 0;
        for seed in 0..50 {
            let spec = SynthSpec {
                d: 30, r0: 3, sparsities: vec![3, 2, 1],
                holder_l: 1.0, alpha: 1.0,
                margins: vec![d1, d2, d3],
                mu: 0.2, seed,
                profile: FactorProfile::default(),
            };
            if synth_spam(&spec).is_ok() { ok += 1; }
        }
        println!("margins ({d1}, {d2}, {d3}): {ok}/50 generations feasible");
    }
}
