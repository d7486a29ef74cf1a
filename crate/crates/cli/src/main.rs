use clap::{Parser, Subcommand};
use spamrec::model::{anchored_anova, synth_spam, SpamModel, SynthSpec};
use spamrec_cli::config::ExperimentConfig;
use spamrec_cli::experiment::{audit_queries, run_experiment, write_outputs};
use spamrec_cli::serve::serve_echo;
use spamrec_cli::CliError;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "spamrec",
    about = "Recovers the interaction supports of sparse additive models from point queries"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic model file from a generator spec (JSON).
    Synth {
        /// Generator spec; see the README for the schema.
        #[arg(long)]
        config: PathBuf,
        /// Override the generator seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output model file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One recovery run; prints the result summary as JSON.
    Recover {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Write report.json/results.csv here as well.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Noise override: `noiseless`, `bounded:<theta>[:constant_plus]`
        /// or `gaussian:<sigma>`.
        #[arg(long)]
        noise: Option<String>,
        /// Query this child process instead of the configured target.
        #[arg(long)]
        oracle_cmd: Option<String>,
        /// Query this TCP endpoint instead of the configured target.
        #[arg(long)]
        oracle_tcp: Option<String>,
    },
    /// Batch of trials with aggregate statistics and report files.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Output directory for report.json and results.csv.
        #[arg(long)]
        out: PathBuf,
        /// Noise override: `noiseless`, `bounded:<theta>[:constant_plus]`
        /// or `gaussian:<sigma>`.
        #[arg(long)]
        noise: Option<String>,
        /// Query this child process instead of the configured target.
        #[arg(long)]
        oracle_cmd: Option<String>,
        /// Query this TCP endpoint instead of the configured target.
        #[arg(long)]
        oracle_tcp: Option<String>,
    },
    /// Recount the query plan of a finished experiment report.
    Audit {
        /// Path to report.json.
        #[arg(long)]
        report: PathBuf,
    },
    /// Anchored-ANOVA decomposition of a model file at one point.
    Anova {
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated coordinates.
        #[arg(long)]
        point: String,
        /// Restrict to subsets of these comma-separated variables
        /// (required when d > 16).
        #[arg(long)]
        vars: Option<String>,
    },
    /// Reference external-oracle server (zeros, or a model file).
    ServeEcho {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Listen on this TCP address instead of stdin/stdout.
        #[arg(long)]
        tcp: Option<String>,
    },
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Synth { config, seed, out } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| CliError::Config(format!("read {}: {e}", config.display())))?;
            let mut spec: SynthSpec = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", config.display())))?;
            if let Some(s) = seed {
                spec.seed = s;
            }
            let model = synth_spam(&spec)?;
            let json = model.to_json();
            match out {
                Some(path) => std::fs::write(path, json)?,
                None => println!("{json}"),
            }
            Ok(0)
        }
        Command::Recover {
            config,
            seed,
            out,
            noise,
            oracle_cmd,
            oracle_tcp,
        } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            apply_overrides(&mut cfg, noise, oracle_cmd, oracle_tcp)?;
            cfg.trials = 1;
            let outcome = run_experiment(&cfg)?;
            if let Some(dir) = out {
                write_outputs(&outcome, &dir)?;
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&outcome.report.trials[0])?
            );
            floor_code(&cfg, &outcome)
        }
        Command::Experiment {
            config,
            seed,
            trials,
            out,
            noise,
            oracle_cmd,
            oracle_tcp,
        } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            apply_overrides(&mut cfg, noise, oracle_cmd, oracle_tcp)?;
            // fail before consuming any queries if the sink is unusable
            std::fs::create_dir_all(&out)
                .map_err(|e| CliError::Config(format!("output dir {}: {e}", out.display())))?;
            let probe = out.join(".write-probe");
            std::fs::write(&probe, b"")
                .map_err(|e| CliError::Config(format!("output dir {}: {e}", out.display())))?;
            let _ = std::fs::remove_file(&probe);

            let outcome = run_experiment(&cfg)?;
            write_outputs(&outcome, &out)?;
            let rate = outcome.report.aggregates.full_exact_rate;
            eprintln!(
                "trials: {}  full-exact rate: {}  mean queries: {}",
                cfg.trials,
                rate.map_or("n/a".into(), |r| format!("{r:.4}")),
                outcome.report.aggregates.mean_queries,
            );
            floor_code(&cfg, &outcome)
        }
        Command::Audit { report } => {
            let text = std::fs::read_to_string(&report)
                .map_err(|e| CliError::Config(format!("read {}: {e}", report.display())))?;
            let report: spamrec_cli::experiment::ExperimentReport = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("parse report: {e}")))?;
            let audit = audit_queries(&report);
            println!("{}", serde_json::to_string_pretty(&audit)?);
            Ok(if audit.ok { 0 } else { 1 })
        }
        Command::Anova { model, point, vars } => {
            let text = std::fs::read_to_string(&model)
                .map_err(|e| CliError::Config(format!("read {}: {e}", model.display())))?;
            let model = SpamModel::from_json(&text)?;
            let x = parse_floats(&point)?;
            if x.len() != model.d {
                return Err(CliError::Config(format!(
                    "point has {} coordinates, model dimension is {}",
                    x.len(),
                    model.d
                )));
            }
            let subsets: Vec<Vec<usize>> = match vars {
                Some(list) => {
                    let vs = parse_vars(&list, model.d)?;
                    all_subsets(&vs)
                }
                None => {
                    if model.d > 16 {
                        return Err(CliError::Config(
                            "d > 16: pass --vars to restrict the decomposition".into(),
                        ));
                    }
                    all_subsets(&(0..model.d).collect::<Vec<_>>())
                }
            };
            let f = |p: &[f64]| model.evaluate_unchecked(p);
            let mut components = serde_json::Map::new();
            let mut sum = 0.0;
            for u in &subsets {
                let v = if u.is_empty() {
                    model.evaluate_unchecked(&vec![0.0; model.d])
                } else {
                    anchored_anova(f, u, &x).map_err(|e| CliError::Config(e.to_string()))?
                };
                sum += v;
                if v.abs() > 1e-12 {
                    let key = format!(
                        "({})",
                        u.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
                    );
                    components.insert(key, serde_json::json!(v));
                }
            }
            let out = serde_json::json!({
                "components": components,
                "sum": sum,
                "f": model.evaluate(&x)?,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(0)
        }
        Command::ServeEcho { model, tcp } => {
            serve_echo(model.as_deref().and_then(|p| p.to_str()), tcp.as_deref())?;
            Ok(0)
        }
    }
}

fn apply_overrides(
    cfg: &mut ExperimentConfig,
    noise: Option<String>,
    oracle_cmd: Option<String>,
    oracle_tcp: Option<String>,
) -> Result<(), CliError> {
    if let Some(raw) = noise {
        cfg.noise = parse_noise(&raw)?;
    }
    match (oracle_cmd, oracle_tcp) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "pass only one of --oracle-cmd and --oracle-tcp".into(),
            ))
        }
        (Some(cmd), None) => {
            cfg.target = spamrec_cli::config::TargetSpec::Oracle(format!("cmd:{cmd}"));
        }
        (None, Some(addr)) => {
            cfg.target = spamrec_cli::config::TargetSpec::Oracle(format!("tcp:{addr}"));
        }
        (None, None) => {}
    }
    cfg.validate()
}

fn parse_noise(raw: &str) -> Result<spamrec::oracle::NoiseModel, CliError> {
    use spamrec::oracle::{NoiseModel, NoisePattern};
    let parts: Vec<&str> = raw.split(':').collect();
    match parts.as_slice() {
        ["noiseless"] => Ok(NoiseModel::Noiseless),
        ["bounded", theta] | ["bounded", theta, "uniform"] => Ok(NoiseModel::Bounded {
            theta: theta
                .parse()
                .map_err(|e| CliError::Config(format!("bad theta {theta:?}: {e}")))?,
            pattern: NoisePattern::Uniform,
        }),
        ["bounded", theta, "constant_plus"] => Ok(NoiseModel::Bounded {
            theta: theta
                .parse()
                .map_err(|e| CliError::Config(format!("bad theta {theta:?}: {e}")))?,
            pattern: NoisePattern::ConstantPlus,
        }),
        ["gaussian", sigma] => Ok(NoiseModel::Gaussian {
            sigma: sigma
                .parse()
                .map_err(|e| CliError::Config(format!("bad sigma {sigma:?}: {e}")))?,
        }),
        _ => Err(CliError::Config(format!(
            "bad noise spec {raw:?}; use noiseless, bounded:<theta>[:constant_plus] or gaussian:<sigma>"
        ))),
    }
}

fn floor_code(
    cfg: &ExperimentConfig,
    outcome: &spamrec_cli::experiment::ExperimentOutcome,
) -> Result<i32, CliError> {
    match outcome.report.aggregates.full_exact_rate {
        Some(rate) if rate + 1e-12 < cfg.success_floor => Ok(1),
        _ => Ok(0),
    }
}

fn parse_floats(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Config(format!("bad coordinate {t:?}: {e}")))
        })
        .collect()
}

fn parse_vars(s: &str, d: usize) -> Result<Vec<usize>, CliError> {
    let mut vs: Vec<usize> = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|e| CliError::Config(format!("bad variable {t:?}: {e}")))
        })
        .collect::<Result<_, _>>()?;
    vs.sort_unstable();
    vs.dedup();
    if let Some(&v) = vs.iter().find(|&&v| v >= d) {
        return Err(CliError::Config(format!("variable {v} outside 0..{d}")));
    }
    if vs.len() > 16 {
        return Err(CliError::Config("at most 16 variables in --vars".into()));
    }
    Ok(vs)
}

fn all_subsets(vars: &[usize]) -> Vec<Vec<usize>> {
    (0u32..(1 << vars.len()))
        .map(|mask| {
            (0..vars.len())
                .filter(|&b| mask >> b & 1 == 1)
                .map(|b| vars[b])
                .collect()
        })
        .collect()
}
