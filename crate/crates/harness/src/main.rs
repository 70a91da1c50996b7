use clap::{Parser, Subcommand};
use drc_core::drc::drc_from_ldc;
use drc_core::drc_ex::{conversion_drc, conversion_operator, ex_transfers_auto};
use drc_core::lds::{simulate, Ldc, LdcPolicy, TAIL_TOL};
use drc_core::sysid;
use drc_harness::config::{ExperimentConfig, NominalSpec};
use drc_harness::experiment::{build_loss, build_system, certify, noise_for, nominal_kind, run_experiment};
use drc_harness::output::{emit_outputs, write_scaling};
use drc_harness::scaling::scaling_study;
use drc_harness::{HarnessError, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;

/// Disturbance response control experiments.
///
/// Any `--key=value` not listed below overrides a field of the JSON config
/// (dotted keys reach nested fields, e.g. `--noise.seed=3`).
#[derive(Parser)]
#[command(name = "drc", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[arg(skip)]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Roll out the plant under the nominal controller (or zero input).
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Explore with Gaussian inputs and fit the Markov operator.
    Estimate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run one experiment and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Regret against horizon over several seeds.
    Scaling {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',')]
        horizons: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        seeds: Vec<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print the strong-convexity certificate for the configured instance.
    Certify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Convert an LDC (JSON) into a DRC of length `m` around the configured nominal.
    Convert {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        controller: PathBuf,
    },
}

const KNOWN_FLAGS: &[&str] = &["config", "out", "horizons", "seeds", "controller", "help", "version"];

fn split_args() -> (Vec<String>, Vec<String>) {
    let mut keep = Vec::new();
    let mut overrides = Vec::new();
    for a in std::env::args() {
        match a.strip_prefix("--").and_then(|s| s.split_once('=')) {
            Some((k, _)) if !KNOWN_FLAGS.contains(&k) => overrides.push(a),
            _ => keep.push(a),
        }
    }
    (keep, overrides)
}

fn load(path: &PathBuf, overrides: &[String]) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path)?.with_overrides(overrides)
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    drc_harness::init_thread_pool();
    let (args, overrides) = split_args();
    let mut cli = Cli::parse_from(args);
    cli.overrides = overrides;
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let ov = &cli.overrides;
    match cli.cmd {
        Cmd::Simulate { config, out } => {
            let cfg = load(&config, ov)?;
            let sys = build_system(&cfg.system)?;
            let noise = noise_for(&cfg, &sys)?;
            let loss = build_loss(&cfg.loss, sys.dy(), sys.du(), cfg.t);
            let pi = match &cfg.nominal {
                NominalSpec::StaticGain { .. } => match nominal_kind(&cfg.nominal, &sys)? {
                    drc_core::drc_ex::NominalKind::InternallyStable(pi) => pi,
                    _ => unreachable!(),
                },
                NominalSpec::None => Ldc::zero(sys.du(), sys.dy()),
                _ => return Err(HarnessError::Config("simulate supports no nominal or a static gain".into())),
            };
            let mut policy = LdcPolicy::new(&pi);
            let tr = simulate(&sys, &mut policy, &noise, cfg.t, Some(loss.as_ref()))?;
            std::fs::create_dir_all(&out)?;
            let mut w = csv::Writer::from_path(out.join("trace.csv"))?;
            let mut header = vec!["t".to_string()];
            header.extend((0..sys.dy()).map(|i| format!("y{i}")));
            header.extend((0..sys.du()).map(|i| format!("u{i}")));
            header.push("loss".into());
            w.write_record(&header)?;
            for t in 0..tr.len() {
                let mut rec = vec![(t + 1).to_string()];
                rec.extend(tr.y[t].iter().map(|v| v.to_string()));
                rec.extend(tr.u[t].iter().map(|v| v.to_string()));
                rec.push(tr.loss[t].to_string());
                w.write_record(&rec)?;
            }
            w.flush()?;
            println!("total loss {:.6}", tr.total_loss());
        }
        Cmd::Estimate { config } => {
            let cfg = load(&config, ov)?;
            let sys = build_system(&cfg.system)?;
            let h = cfg.h();
            let n = cfg.n.unwrap_or(cfg.t);
            let mut c = cfg.clone();
            c.t = n;
            let noise = noise_for(&c, &sys)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let tr = sysid::explore(&sys, &noise, n, &mut rng)?;
            let est = sysid::fit_markov(&tr.y, &tr.u, h)?.with_truth(&sys.markov(h));
            println!("{}", serde_json::to_string_pretty(&est)?);
        }
        Cmd::Run { config, out } => {
            let cfg = load(&config, ov)?;
            let res = run_experiment(&cfg)?;
            let dir = cfg.output.clone().unwrap_or(out);
            for p in emit_outputs(&res, &dir, cfg.plot)? {
                log::info!("wrote {}", p.display());
            }
            println!("final regret {:.6}", res.report.final_regret());
        }
        Cmd::Scaling { config, horizons, seeds, out } => {
            let cfg = load(&config, ov)?;
            if horizons.is_empty() {
                return Err(HarnessError::Config("--horizons is required".into()));
            }
            let rep = scaling_study(&cfg, &horizons, &seeds)?;
            std::fs::create_dir_all(&out)?;
            write_scaling(&out.join("scaling.csv"), &rep)?;
            println!("slope {:.4} (stderr {:.4})", rep.slope, rep.stderr);
        }
        Cmd::Certify { config } => {
            let cfg = load(&config, ov)?;
            let sys = build_system(&cfg.system)?;
            let kind = nominal_kind(&cfg.nominal, &sys)?;
            let nominal = kind.ldcex(&sys)?;
            let set = ex_transfers_auto(&sys, &nominal, TAIL_TOL)?;
            let loss = build_loss(&cfg.loss, sys.dy(), sys.du(), cfg.t);
            let a = loss.constants().alpha.ok_or_else(|| HarnessError::Config("loss is not strongly convex".into()))?;
            let cert = certify(&cfg, &sys, &kind, &set, a);
            println!("{}", serde_json::to_string_pretty(&cert)?);
        }
        Cmd::Convert { config, controller } => {
            let cfg = load(&config, ov)?;
            let sys = build_system(&cfg.system)?;
            let pi: Ldc = serde_json::from_str(&std::fs::read_to_string(controller)?)?;
            let drc = match cfg.nominal {
                NominalSpec::None => drc_from_ldc(&pi, &sys, cfg.m)?,
                _ => {
                    let kind = nominal_kind(&cfg.nominal, &sys)?;
                    conversion_drc(&conversion_operator(&sys, &kind, &pi, TAIL_TOL)?, cfg.m)
                }
            };
            println!("{}", serde_json::to_string_pretty(&drc)?);
        }
    }
    Ok(())
}
