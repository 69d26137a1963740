//! `smfc`: ingest SMFC traces, train per-horizon quantile ensembles, score
//! them, and simulate activation schedules against naive and oracle baselines.
//!
//! Every command reads its settings from built-in defaults, then an optional
//! `--config` file of `key = value` lines, then flags. The effective
//! configuration is written into every file a command produces.

pub mod commands;
pub mod config;
pub mod pipeline;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "smfc", version, about = "Soil microbial fuel cell energy forecasting and scheduling")]
pub struct Cli {
    /// `key = value` file applied before flags.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and sanitize a trace; write the cleaned trace and a report.
    Ingest(Overrides),
    /// Train one quantile ensemble per horizon.
    Train(Overrides),
    /// Score trained ensembles on the test split.
    Evaluate {
        #[command(flatten)]
        overrides: Overrides,
        /// Ensemble file; defaults to `<out-dir>/model_<horizon>s.smfc` per horizon.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Run activation schedules from ensemble forecasts, the naive baseline and the oracle.
    Simulate {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Ensemble members to schedule from.
        #[arg(long, default_value = "lower,median,upper")]
        members: String,
    },
    /// Four-fold walk-forward cross-validation.
    Cv(Overrides),
    /// Write a seeded synthetic trace.
    Synth(SynthArgs),
}

/// Flags shared by the pipeline commands. Each one overrides the config
/// key of the same name (dashes become underscores).
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Sample CSV: timestamp,voltage,current,power,ec,temp,vwc.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Epoch seconds or RFC 3339; defaults to the first sample.
    #[arg(long)]
    pub deployment_start: Option<String>,
    /// Comma-separated horizons in seconds (180, 300, 900, 1800, 3600).
    #[arg(long)]
    pub horizons: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Interval quantile levels.
    #[arg(long, value_name = "LOWER,UPPER")]
    pub quantiles: Option<String>,
    /// Internal resistance in ohms.
    #[arg(long)]
    pub r_int: Option<f64>,
    #[arg(long)]
    pub efficiency: Option<f64>,
    /// Energy per activation in joules.
    #[arg(long)]
    pub e_act: Option<f64>,
    /// matched_load or measured_vi.
    #[arg(long)]
    pub energy_model: Option<String>,
    #[arg(long)]
    pub initial_stored: Option<f64>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub val_fraction: Option<f64>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[arg(long)]
    pub hidden_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub clip_norm: Option<f64>,
    /// Overrides the per-horizon default.
    #[arg(long)]
    pub batch_size: Option<usize>,
}

impl Overrides {
    fn pairs(&self) -> anyhow::Result<Vec<(&'static str, String)>> {
        let mut out = Vec::new();
        let mut push = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k, v));
            }
        };
        let s = |x: &Option<f64>| x.map(|v| v.to_string());
        push("trace", self.trace.as_ref().map(|p| p.display().to_string()));
        push("deployment_start", self.deployment_start.clone());
        push("horizons", self.horizons.clone());
        push("seed", self.seed.map(|v| v.to_string()));
        push("out_dir", self.out_dir.as_ref().map(|p| p.display().to_string()));
        push("r_int", s(&self.r_int));
        push("efficiency", s(&self.efficiency));
        push("e_act", s(&self.e_act));
        push("energy_model", self.energy_model.clone());
        push("initial_stored", s(&self.initial_stored));
        push("train_fraction", s(&self.train_fraction));
        push("val_fraction", s(&self.val_fraction));
        push("test_fraction", s(&self.test_fraction));
        push("hidden_size", self.hidden_size.map(|v| v.to_string()));
        push("max_epochs", self.max_epochs.map(|v| v.to_string()));
        push("patience", self.patience.map(|v| v.to_string()));
        push("learning_rate", s(&self.learning_rate));
        push("clip_norm", s(&self.clip_norm));
        push("batch_size", self.batch_size.map(|v| v.to_string()));
        if let Some(q) = &self.quantiles {
            let Some((lo, hi)) = q.split_once(',') else {
                anyhow::bail!("--quantiles expects LOWER,UPPER, got `{q}`");
            };
            out.push(("lower_quantile", lo.trim().to_string()));
            out.push(("upper_quantile", hi.trim().to_string()));
        }
        Ok(out)
    }

    /// Defaults, then the config file, then these flags.
    pub fn resolve(&self, config_file: Option<&std::path::Path>) -> anyhow::Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = config_file {
            cfg.apply_file(path)?;
        }
        for (k, v) in self.pairs()? {
            cfg.set(k, &v).map_err(|e| e.context(format!("--{}", k.replace('_', "-"))))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 14.0)]
    pub days: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Volts.
    #[arg(long, default_value_t = 0.45)]
    pub base_voltage: f64,
    /// Start of a linear decline, as a fraction of the trace.
    #[arg(long, requires = "decline")]
    pub decline_start: Option<f64>,
    /// Total relative drop of the decline, e.g. 0.3.
    #[arg(long)]
    pub decline: Option<f64>,
    /// Constant features, no noise or outages.
    #[arg(long)]
    pub constant: bool,
    #[arg(long)]
    pub outage_rate: Option<f64>,
}

/// Runs a parsed command line. Returns the number of non-fatal errors
/// (for example a horizon without enough data); fatal errors are `Err`.
pub fn run(cli: &Cli) -> anyhow::Result<usize> {
    let file = cli.config.as_deref();
    match &cli.command {
        Command::Ingest(o) => commands::ingest(&o.resolve(file)?),
        Command::Train(o) => commands::train(&o.resolve(file)?),
        Command::Evaluate { overrides, model } => commands::evaluate(&overrides.resolve(file)?, model.as_deref()),
        Command::Simulate { overrides, model, members } => {
            commands::simulate(&overrides.resolve(file)?, model.as_deref(), members)
        }
        Command::Cv(o) => commands::cv(&o.resolve(file)?),
        Command::Synth(args) => commands::synth(args),
    }
}
