//! JSON run configurations. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use encgan::data::{SplitCounts, SyntheticCorpusConfig};
use encgan::evaluation::SweepSpec;
use encgan::model::ModelConfig;
use encgan::scoring::{ScoreConfig, ScoreVariant};
use encgan::training::TrainConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Where a dataset comes from: rendered shapes or labeled PNG folders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum DataSource {
    Synthetic {
        #[serde(default)]
        corpus: SyntheticCorpusConfig,
        #[serde(default)]
        counts: SplitCounts,
    },
    Folders {
        train: PathBuf,
        test: PathBuf,
        resolution: usize,
        #[serde(default = "one")]
        channels: usize,
    },
}

fn one() -> usize {
    1
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic { corpus: SyntheticCorpusConfig::default(), counts: SplitCounts::default() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenDataConfig {
    pub source: DataSource,
    /// Anomaly fraction of the training stream.
    pub gamma: f64,
    /// Rotated copies added per training-pool image before mixing.
    pub rotations: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainCmdConfig {
    /// Dataset directory written by `gen-data`.
    pub data: PathBuf,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScoreCmdConfig {
    pub checkpoint: PathBuf,
    /// Dataset directory; its test split is scored.
    pub data: Option<PathBuf>,
    /// Alternatively a folder with PNGs and `manifest.csv`.
    pub folder: Option<PathBuf>,
    pub score: ScoreConfig,
    /// Also dump 𝒢(ℰ(Q)) for every query as PNG.
    pub reconstructions: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateCmdConfig {
    /// Scores file from `score`; requires `labels`.
    pub scores: Option<PathBuf>,
    /// CSV with `source_id` and `label` columns.
    pub labels: Option<PathBuf>,
    /// Alternatively score a dataset directory's test split here.
    pub checkpoint: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub score: ScoreConfig,
    pub variant: ScoreVariant,
    pub bins: usize,
}

impl Default for EvaluateCmdConfig {
    fn default() -> Self {
        Self {
            scores: None,
            labels: None,
            checkpoint: None,
            data: None,
            score: ScoreConfig::default(),
            variant: ScoreVariant::Combined,
            bins: 50,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepCmdConfig {
    pub source: DataSource,
    pub rotations: usize,
    pub sweep: SweepSpec,
}

pub fn load<C: DeserializeOwned + Default>(path: Option<&Path>) -> Result<C, CliError> {
    let Some(path) = path else { return Ok(C::default()) };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::MissingInput(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
