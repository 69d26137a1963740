//! Run configuration: built-in defaults, then a `key = value` file, then
//! command-line flags. Later sources override earlier ones.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use smfc_core::dataset::{parse_timestamp, Horizon, SplitSpec};
use smfc_core::forecast::QuantileLevels;
use smfc_core::harvestsim::HarvestConfig;
use smfc_core::neural::AdamParams;
use smfc_core::{ModelConfig, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub trace: Option<PathBuf>,
    /// Epoch seconds; `None` means the first sample's timestamp.
    pub deployment_start: Option<f64>,
    pub horizons: Vec<Horizon>,
    pub split: SplitSpec,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub levels: QuantileLevels,
    pub hidden_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub clip_norm: f64,
    /// `None` uses the per-horizon default.
    pub batch_size: Option<usize>,
    pub harvest: HarvestConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        Self {
            trace: None,
            deployment_start: None,
            horizons: Horizon::ALL.to_vec(),
            split: SplitSpec::default(),
            seed: 0,
            out_dir: PathBuf::from("out"),
            levels: QuantileLevels::default(),
            hidden_size: ModelConfig::default().hidden_size,
            max_epochs: train.max_epochs,
            patience: train.patience,
            learning_rate: train.adam.learning_rate,
            clip_norm: train.clip_norm,
            batch_size: None,
            harvest: HarvestConfig::default(),
        }
    }
}

/// Every recognised key, in the order [`RunConfig::render`] prints them.
pub const KEYS: &[&str] = &[
    "trace",
    "deployment_start",
    "horizons",
    "train_fraction",
    "val_fraction",
    "test_fraction",
    "seed",
    "out_dir",
    "lower_quantile",
    "upper_quantile",
    "hidden_size",
    "max_epochs",
    "patience",
    "learning_rate",
    "clip_norm",
    "batch_size",
    "r_int",
    "efficiency",
    "e_act",
    "energy_model",
    "initial_stored",
];

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    value.parse().with_context(|| format!("invalid value `{value}` for `{key}`"))
}

pub fn parse_horizons(value: &str) -> Result<Vec<Horizon>> {
    let mut out = Vec::new();
    for part in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let h: Horizon = part.parse().with_context(|| format!("bad horizon `{part}`"))?;
        if !out.contains(&h) {
            out.push(h);
        }
    }
    if out.is_empty() {
        bail!("no horizons given");
    }
    Ok(out)
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "trace" => self.trace = (!value.is_empty()).then(|| PathBuf::from(value)),
            "deployment_start" => {
                self.deployment_start = match value {
                    "" | "auto" => None,
                    v => Some(parse_timestamp(v).with_context(|| format!("invalid deployment start `{v}`"))?),
                }
            }
            "horizons" => self.horizons = parse_horizons(value)?,
            "train_fraction" => self.split.train_fraction = num(key, value)?,
            "val_fraction" => self.split.val_fraction = num(key, value)?,
            "test_fraction" => self.split.test_fraction = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "lower_quantile" => self.levels.lower = num(key, value)?,
            "upper_quantile" => self.levels.upper = num(key, value)?,
            "hidden_size" => self.hidden_size = num(key, value)?,
            "max_epochs" => self.max_epochs = num(key, value)?,
            "patience" => self.patience = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "clip_norm" => self.clip_norm = num(key, value)?,
            "batch_size" => {
                self.batch_size = match value {
                    "" | "auto" => None,
                    v => Some(num(key, v)?),
                }
            }
            "r_int" => self.harvest.internal_resistance = num(key, value)?,
            "efficiency" => self.harvest.efficiency = num(key, value)?,
            "e_act" => self.harvest.activation_energy = num(key, value)?,
            "energy_model" => self.harvest.energy_model = value.parse()?,
            "initial_stored" => self.harvest.initial_stored_energy = num(key, value)?,
            other => bail!("unknown configuration key `{other}`"),
        }
        Ok(())
    }

    /// Applies a `key = value` file. Blank lines and `#` comments are ignored.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{}:{}: expected `key = value`", path.display(), n + 1);
            };
            self.set(key.trim(), value).with_context(|| format!("{}:{}", path.display(), n + 1))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        QuantileLevels::new(self.levels.lower, self.levels.upper)?;
        self.harvest.validate()?;
        self.model_config().validate()?;
        for &h in &self.horizons {
            self.train_config(h).validate()?;
        }
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig { hidden_size: self.hidden_size, seed: self.seed, ..Default::default() }
    }

    pub fn train_config(&self, horizon: Horizon) -> TrainConfig {
        TrainConfig {
            adam: AdamParams { learning_rate: self.learning_rate, ..Default::default() },
            batch_size: self.batch_size.unwrap_or(horizon.default_batch_size()),
            max_epochs: self.max_epochs,
            patience: self.patience,
            clip_norm: self.clip_norm,
        }
    }

    pub fn value(&self, key: &str) -> String {
        let opt = |v: Option<String>| v.unwrap_or_else(|| "auto".into());
        match key {
            "trace" => self.trace.as_ref().map_or(String::new(), |p| p.display().to_string()),
            "deployment_start" => opt(self.deployment_start.map(|t| t.to_string())),
            "horizons" => self.horizons.iter().map(|h| h.seconds().to_string()).collect::<Vec<_>>().join(","),
            "train_fraction" => self.split.train_fraction.to_string(),
            "val_fraction" => self.split.val_fraction.to_string(),
            "test_fraction" => self.split.test_fraction.to_string(),
            "seed" => self.seed.to_string(),
            "out_dir" => self.out_dir.display().to_string(),
            "lower_quantile" => self.levels.lower.to_string(),
            "upper_quantile" => self.levels.upper.to_string(),
            "hidden_size" => self.hidden_size.to_string(),
            "max_epochs" => self.max_epochs.to_string(),
            "patience" => self.patience.to_string(),
            "learning_rate" => self.learning_rate.to_string(),
            "clip_norm" => self.clip_norm.to_string(),
            "batch_size" => opt(self.batch_size.map(|b| b.to_string())),
            "r_int" => self.harvest.internal_resistance.to_string(),
            "efficiency" => self.harvest.efficiency.to_string(),
            "e_act" => self.harvest.activation_energy.to_string(),
            "energy_model" => self.harvest.energy_model.to_string(),
            "initial_stored" => self.harvest.initial_stored_energy.to_string(),
            other => unreachable!("unknown key {other}"),
        }
    }

    /// The effective configuration as `key = value` lines, one per key.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for key in KEYS {
            let _ = writeln!(s, "{key} = {}", self.value(key));
        }
        s
    }

    /// [`render`](Self::render) with every line prefixed by `# `, for
    /// embedding in data files.
    pub fn header(&self) -> String {
        self.render().lines().map(|l| format!("# {l}\n")).collect()
    }
}
