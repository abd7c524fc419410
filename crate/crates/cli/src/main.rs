use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use evagg::scenario::{self, output};
use evagg::{SimulationConfig, Variant};

#[derive(Parser)]
#[command(name = "evagg", version, about = "EV fleet aggregation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Uncontrolled day: IMM envelope against the aggregate model predictions.
    Predict(Common),
    /// Closed-loop tracking of a reference built from an uncontrolled pre-run.
    Track {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = ReferenceKind::Levels)]
        reference: ReferenceKind,
    },
    /// Prediction errors over several fleet sizes.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated fleet sizes.
        #[arg(long, value_delimiter = ',', default_value = "500,5000,10000")]
        sizes: Vec<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReferenceKind {
    /// A new level from the central band every period, held until the next.
    Levels,
    /// Uncontrolled power with a short level excursion every period.
    Disturbance,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Model variants, comma-separated (ssm, essm).
    #[arg(long, value_delimiter = ',')]
    variant: Vec<Variant>,
    /// Overrides the configured fleet size.
    #[arg(long)]
    n_ev: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<SimulationConfig> {
        let mut config = match &self.config {
            Some(path) => SimulationConfig::load(path)
                .with_context(|| format!("reading {}", path.display()))?,
            None => SimulationConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if !self.variant.is_empty() {
            config.variants = self.variant.clone();
        }
        if let Some(n) = self.n_ev {
            config.n_ev = n;
        }
        config.validate()?;
        Ok(config)
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Predict(common) => {
            let config = common.load()?;
            let started = Instant::now();
            let run = scenario::run_prediction_experiment(&config)?;
            output::write_run(&common.out, &run)?;
            for row in run.errors() {
                println!(
                    "{} n_ev={} upper={} lower={} power={}",
                    row.variant,
                    row.n_ev,
                    fmt_pct(row.upper_err),
                    fmt_pct(row.lower_err),
                    fmt_pct(row.power_err)
                );
            }
            eprintln!("finished in {:.1} s", started.elapsed().as_secs_f64());
        }
        Command::Track { common, reference } => {
            let config = common.load()?;
            if config.n_ev == 0 {
                bail!("tracking needs at least one EV");
            }
            let pre = scenario::run_prediction_experiment(&config)?;
            let period = config.reference_period_steps();
            let reference = match reference {
                ReferenceKind::Levels => {
                    scenario::generate_reference(&pre.imm, period, config.seed)
                }
                ReferenceKind::Disturbance => {
                    let baseline = pre.imm_component(|e| e.p_ev);
                    scenario::disturbance_reference(
                        &baseline,
                        &pre.imm,
                        period,
                        config.disturbance_steps(),
                        config.seed,
                    )
                }
            };
            let runs = scenario::run_tracking_experiment(&config, &reference)?;
            output::write_tracking_runs(&common.out, &runs)?;
            for s in runs.iter().filter_map(|r| r.tracking) {
                println!(
                    "{} rms={:.2} kW ({:.3}% of {:.0} kW) saturated_steps={}",
                    s.driver, s.rms_kw, s.rms_pct, s.fleet_rated_kw, s.saturated_steps
                );
            }
        }
        Command::Sweep { common, sizes } => {
            let config = common.load()?;
            let rows = scenario::run_sweep(&config, &sizes)?;
            output::write_sweep(&common.out, &rows)?;
            for row in rows {
                println!(
                    "{:>6} {:<4} upper={} lower={} power={}",
                    row.n_ev,
                    row.variant,
                    fmt_pct(row.upper_err),
                    fmt_pct(row.lower_err),
                    fmt_pct(row.power_err)
                );
            }
        }
    }
    Ok(())
}

fn fmt_pct(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.2}%")).unwrap_or_else(|| "-".into())
}
