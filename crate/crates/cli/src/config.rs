//! Experiment configuration, read from TOML. Every field has a default so an
//! empty file is a valid config; command-line flags override file values.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use noisyboost::alloc::ChernoffOptions;
use noisyboost::data::{CsvOptions, SplitSpec};
use noisyboost::eval::{db_grid, EvalMode, Policy};
use noisyboost::noise::NoiseChannelSet;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub split: SplitConfig,
    pub train: TrainConfig,
    pub channel: ChannelConfig,
    pub sweep: SweepSection,
    pub chernoff: ChernoffSection,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    pub label_column: String,
    pub positive_label: String,
    /// Column skipped as an identifier; empty for none.
    pub id_column: String,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            path: PathBuf::from("data/wdbc.csv"),
            label_column: "diagnosis".into(),
            positive_label: "M".into(),
            id_column: "id".into(),
        }
    }
}

impl DataConfig {
    pub fn csv_options(&self) -> CsvOptions {
        let mut opts = CsvOptions::new(self.label_column.as_str(), self.positive_label.as_str());
        opts.id_column = (!self.id_column.is_empty()).then(|| self.id_column.clone());
        opts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            test_fraction: 0.3,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub rounds: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { rounds: 10 }
    }
}

/// Either one noise level for every channel or one per channel.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigmas: Option<Vec<f64>>,
}

impl ChannelConfig {
    pub fn channels(&self, count: usize) -> Result<NoiseChannelSet> {
        let set = match (&self.sigma, &self.sigmas) {
            (Some(_), Some(_)) => bail!("channel: set either sigma or sigmas, not both"),
            (_, Some(list)) => {
                if list.len() != count {
                    bail!("channel: {} sigmas given for {count} classifiers", list.len());
                }
                NoiseChannelSet::new(list.clone())?
            }
            (s, None) => NoiseChannelSet::uniform(s.unwrap_or(1.0), count)?,
        };
        Ok(set)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    Auto,
    Exact,
    Montecarlo,
}

impl From<ModeName> for EvalMode {
    fn from(m: ModeName) -> Self {
        match m {
            ModeName::Auto => EvalMode::Auto,
            ModeName::Exact => EvalMode::Exact,
            ModeName::Montecarlo => EvalMode::MonteCarlo,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Explicit total-SNR grid in dB; overrides start/stop/step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<Vec<f64>>,
    pub start_db: f64,
    pub stop_db: f64,
    pub step_db: f64,
    pub policies: Vec<String>,
    pub mode: ModeName,
    pub trials: usize,
    pub seed: u64,
    /// Noisy error level at which SNR gains are read off.
    pub target_error: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            snr_db: None,
            start_db: 0.0,
            stop_db: 30.0,
            step_db: 0.5,
            policies: Policy::ALL.iter().map(|p| p.name().to_string()).collect(),
            mode: ModeName::Auto,
            trials: 10_000,
            seed: 0,
            target_error: 0.1,
        }
    }
}

impl SweepSection {
    pub fn grid(&self) -> Result<Vec<f64>> {
        match &self.snr_db {
            Some(list) if list.is_empty() => bail!("sweep: snr_db is empty"),
            Some(list) => Ok(list.clone()),
            None => Ok(db_grid(self.start_db, self.stop_db, self.step_db)?),
        }
    }

    pub fn policies(&self) -> Result<Vec<Policy>> {
        if self.policies.is_empty() {
            bail!("sweep: no policies listed");
        }
        self.policies
            .iter()
            .map(|p| p.parse::<Policy>().map_err(Into::into))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChernoffSection {
    pub s0: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for ChernoffSection {
    fn default() -> Self {
        let d = ChernoffOptions::default();
        Self {
            s0: d.s0,
            epsilon: d.floor,
            max_iters: d.max_iterations,
            tol: d.tolerance,
        }
    }
}

impl ChernoffSection {
    pub fn options(&self) -> Result<ChernoffOptions> {
        let opts = ChernoffOptions {
            s0: self.s0,
            floor: self.epsilon,
            max_iterations: self.max_iters,
            tolerance: self.tol,
        };
        opts.validate()?;
        Ok(opts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// Checks every parameter that does not depend on the data.
    pub fn validate(&self) -> Result<()> {
        SplitSpec::new(self.split.test_fraction, self.split.seed)?;
        if self.train.rounds == 0 {
            bail!("train: rounds must be at least 1");
        }
        if self.channel.sigma.is_some() && self.channel.sigmas.is_some() {
            bail!("channel: set either sigma or sigmas, not both");
        }
        let grid = self.sweep.grid()?;
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            bail!("sweep: SNR grid must be strictly increasing");
        }
        self.sweep.policies()?;
        if self.sweep.trials == 0 {
            bail!("sweep: trials must be at least 1");
        }
        if !(self.sweep.target_error > 0.0 && self.sweep.target_error < 1.0) {
            bail!("sweep: target_error must lie in (0, 1)");
        }
        self.chernoff.options()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(ExperimentConfig::parse("").unwrap(), ExperimentConfig::default());
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = ExperimentConfig::default();
        cfg.channel.sigmas = Some(vec![1.0, 2.0]);
        cfg.sweep.snr_db = Some(vec![0.0, 5.0]);
        let back = ExperimentConfig::parse(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ExperimentConfig::parse("[train]\nroundz = 3\n").is_err());
        let cfg = ExperimentConfig::parse("[train]\nrounds = 0\n").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig::parse("[sweep]\npolicies = [\"bagging\"]\n").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig::parse("[channel]\nsigma = 1.0\nsigmas = [1.0]\n").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn channel_resolution() {
        let c = ChannelConfig {
            sigma: Some(2.0),
            sigmas: None,
        };
        assert_eq!(c.channels(3).unwrap().sigmas(), &[2.0; 3]);
        let c = ChannelConfig {
            sigma: None,
            sigmas: Some(vec![1.0, 2.0]),
        };
        assert!(c.channels(3).is_err());
        assert_eq!(ChannelConfig::default().channels(2).unwrap().sigmas(), &[1.0; 2]);
    }

    #[test]
    fn grid_sources() {
        let s = SweepSection::default();
        assert_eq!(s.grid().unwrap().len(), 61);
        let s = SweepSection {
            snr_db: Some(vec![3.0]),
            ..Default::default()
        };
        assert_eq!(s.grid().unwrap(), vec![3.0]);
    }
}
