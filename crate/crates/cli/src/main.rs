//! `eqpricing`: run pricing policies on market instances, sweep horizons, check
//! the lower-bound constructions and fit regret scaling.
//!
//! Precedence: command-line flags override fields of the `--config` document,
//! which override built-in defaults.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use eqpricing::harness::{
    fit_scaling, read_summary, run_experiment, write_summary, write_trajectory, ExperimentConfig,
    PolicyConfig, PolicyKind, ScalingModel,
};
use eqpricing::hardness::{verify_lower_bound, write_hardness};

#[derive(Parser)]
#[command(name = "eqpricing", version, about = "Online equilibrium-pricing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; replication r uses seed + r.
    #[arg(long)]
    seed: Option<u64>,
    /// Policy id, or `constant:<price>`.
    #[arg(long)]
    policy: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// One run; writes the per-period CSV.
    Run {
        #[command(flatten)]
        common: Common,
        /// Horizon (default: the config's first horizon or the instance horizon).
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Every horizon x replication; writes the summary CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated ascending horizons.
        #[arg(long, value_delimiter = ',')]
        horizons: Option<Vec<usize>>,
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Analytic minimum and Monte Carlo checks of the i.i.d.-cost lower bound.
    Hardness {
        #[arg(long, default_value_t = 1e-4)]
        step: f64,
        /// Comma-separated prices to simulate.
        #[arg(long, value_delimiter = ',', default_value = "0,0.125,0.25,0.5")]
        prices: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        periods: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit regret scaling over the horizons of a summary CSV (replication means).
    Fit {
        /// Summary CSV written by `sweep`.
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Model::PowerLaw)]
        model: Model,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    PowerLaw,
    LogLog,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn parse_policy(s: &str, base: Option<PolicyConfig>) -> Result<PolicyConfig> {
    if let Some(price) = s.strip_prefix("constant:") {
        let mut cfg = PolicyConfig::new(PolicyKind::ConstantPrice);
        cfg.price = Some(price.parse().with_context(|| format!("bad price `{price}`"))?);
        return Ok(cfg);
    }
    let kind = PolicyKind::from_id(s)?;
    Ok(match base {
        Some(mut b) => {
            b.kind = kind;
            b
        }
        None => PolicyConfig::new(kind),
    })
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let Some(path) = &common.config else {
        bail!("--config is required");
    };
    let mut cfg = ExperimentConfig::from_file(path)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(p) = &common.policy {
        cfg.policy = parse_policy(p, Some(cfg.policy.clone()))?;
    }
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn real_main() -> Result<()> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => bail!("{}", e.to_string().trim_end()),
        Err(e) => e.exit(),
    };
    match cli.command {
        Command::Run { common, horizon } => {
            let mut cfg = load(&common)?;
            let t = match horizon.or_else(|| cfg.horizons.first().copied()) {
                Some(t) => t,
                None => cfg.instance_spec()?.horizon,
            };
            cfg.horizons = vec![t];
            cfg.replications = 1;
            cfg.keep_trajectory = true;
            let records = run_experiment(&cfg)?;
            write_trajectory(&records[0].trajectory, output(cfg.out.as_deref())?)?;
        }
        Command::Sweep {
            common,
            horizons,
            replications,
        } => {
            let mut cfg = load(&common)?;
            if let Some(h) = horizons {
                cfg.horizons = h;
            }
            if let Some(r) = replications {
                cfg.replications = r;
            }
            cfg.keep_trajectory = false;
            let records = run_experiment(&cfg)?;
            write_summary(&records, output(cfg.out.as_deref())?)?;
        }
        Command::Hardness {
            step,
            prices,
            periods,
            seed,
            out,
        } => {
            let report = verify_lower_bound(step, &prices, periods, seed)?;
            eprintln!(
                "{}",
                serde_json::json!({"argmin": report.argmin, "minimum": report.minimum})
            );
            write_hardness(&report.rows, output(out.as_deref())?)?;
        }
        Command::Fit { input, model, out } => {
            let rows = read_summary(
                File::open(&input).with_context(|| format!("cannot open {}", input.display()))?,
            )?;
            let model = match model {
                Model::PowerLaw => ScalingModel::PowerLaw,
                Model::LogLog => ScalingModel::LogLog,
            };
            let mut horizons: Vec<usize> = rows.iter().map(|r| r.horizon).collect();
            horizons.sort_unstable();
            horizons.dedup();
            let mean = |t: usize, f: &dyn Fn(&eqpricing::harness::SummaryRow) -> f64| {
                let v: Vec<f64> = rows.iter().filter(|r| r.horizon == t).map(f).collect();
                v.iter().sum::<f64>() / v.len() as f64
            };
            let metrics: [(&str, &dyn Fn(&eqpricing::harness::SummaryRow) -> f64); 4] = [
                ("U_T", &|r| r.unmet),
                ("C_T", &|r| r.cost_regret),
                ("P_T", &|r| r.payment_regret),
                ("proxy_reg", &|r| r.proxy_reg),
            ];
            let mut report = serde_json::Map::new();
            for (name, f) in metrics {
                let pts: Vec<(f64, f64)> = horizons.iter().map(|&t| (t as f64, mean(t, f))).collect();
                let value = match fit_scaling(&pts, model) {
                    Ok(fit) => serde_json::to_value(fit)?,
                    Err(e) => serde_json::json!({"error": e.to_string()}),
                };
                report.insert(name.to_string(), value);
            }
            let mut w = output(out.as_deref())?;
            serde_json::to_writer_pretty(&mut w, &report)?;
            writeln!(w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e
                .downcast_ref::<eqpricing::Error>()
                .map(eqpricing::Error::kind)
                .unwrap_or("error");
            eprintln!(
                "{}",
                serde_json::json!({"error": kind, "message": format!("{e:#}")})
            );
            ExitCode::FAILURE
        }
    }
}
