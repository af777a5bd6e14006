use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{contaminate, ContaminationSpec, Label, LabeledDataset};
use crate::error::{Error, Result};
use crate::model::{FrozenModel, ModelConfig};
use crate::scalar::Scalar;
use crate::scoring::{score_images, ScoreConfig, ScoreReport, ScoreVariant};
use crate::training::{train, EncoderMode, TrainConfig};

use super::roc::{compute_roc, RocResult};

/// Scores of a labeled evaluation set under one model.
#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationReport<T> {
    pub reports: Vec<ScoreReport<T>>,
    pub labels: Vec<Label>,
}

impl<T: Scalar> EvaluationReport<T> {
    pub fn labeled(&self, variant: ScoreVariant) -> Vec<(f64, Label)> {
        self.reports.iter().zip(&self.labels).map(|(r, &l)| (variant.pick(r).real(), l)).collect()
    }

    pub fn roc(&self, variant: ScoreVariant) -> Result<RocResult> {
        compute_roc(&self.labeled(variant))
    }

    /// Median latent norm of the samples carrying `label`.
    pub fn median_norm(&self, label: Label) -> Option<f64> {
        let mut n: Vec<f64> = self
            .reports
            .iter()
            .zip(&self.labels)
            .filter(|(_, &l)| l == label)
            .map(|(r, _)| r.latent.norm().real())
            .collect();
        median(&mut n)
    }
}

pub fn evaluate_model<T: Scalar>(model: &FrozenModel<T>, set: &LabeledDataset, config: &ScoreConfig) -> Result<EvaluationReport<T>> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let images: Vec<_> = set.samples.iter().map(|s| s.image.clone()).collect();
    let reports = score_images(model, &images, config)?;
    Ok(EvaluationReport { reports, labels: set.samples.iter().map(|s| s.label).collect() })
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 { values[m] } else { (values[m - 1] + values[m]) / 2.0 })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepGrid {
    pub gammas: Vec<f64>,
    pub encoder_modes: Vec<EncoderMode>,
    pub score_variants: Vec<ScoreVariant>,
    pub seeds: Vec<u64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            gammas: vec![0.0, 0.02],
            encoder_modes: vec![EncoderMode::JointImageSpace, EncoderMode::JointLatentSpace, EncoderMode::PostHoc],
            score_variants: ScoreVariant::ALL.to_vec(),
            seeds: vec![0, 1, 2],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub grid: SweepGrid,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub score: ScoreConfig,
    /// Upper bound on outer steps summed over all training runs.
    pub max_total_steps: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            grid: SweepGrid::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            score: ScoreConfig::default(),
            max_total_steps: 1_000_000,
        }
    }
}

impl SweepSpec {
    pub fn runs(&self) -> Vec<(f64, EncoderMode, u64)> {
        let mut out = Vec::new();
        for &g in &self.grid.gammas {
            for &m in &self.grid.encoder_modes {
                for &s in &self.grid.seeds {
                    out.push((g, m, s));
                }
            }
        }
        out
    }

    pub fn steps_per_run(&self, mode: EncoderMode) -> usize {
        let phases = self.train.phase_resolutions(self.model.resolution).len();
        let posthoc = if mode == EncoderMode::PostHoc { self.train.posthoc_steps() } else { 0 };
        phases * self.train.steps_per_phase + posthoc
    }

    pub fn total_steps(&self) -> usize {
        self.runs().iter().map(|&(_, m, _)| self.steps_per_run(m)).sum()
    }
}

/// Median AUC per (mode, variant), one `(γ, auc)` entry per contamination level.
pub type SweepTable = BTreeMap<(EncoderMode, ScoreVariant), Vec<(f64, Option<f64>)>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub gamma: f64,
    pub mode: EncoderMode,
    pub variant: ScoreVariant,
    pub seed: u64,
    pub auc: Option<f64>,
    pub error: Option<String>,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunLatentStats {
    pub gamma: f64,
    pub mode: EncoderMode,
    pub seed: u64,
    pub median_norm_normal: f64,
    pub median_norm_anomaly: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
    pub latent: Vec<RunLatentStats>,
    pub seeds: Vec<u64>,
    pub steps_per_phase: usize,
}

impl SweepResult {
    /// Median AUC over seeds for one (γ, mode, variant), ignoring failed cells.
    pub fn median_auc(&self, gamma: f64, mode: EncoderMode, variant: ScoreVariant) -> Option<f64> {
        let mut v: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.gamma == gamma && c.mode == mode && c.variant == variant)
            .filter_map(|c| c.auc)
            .collect();
        median(&mut v)
    }

    /// Median AUCs keyed by `(mode, variant)` then γ.
    pub fn table(&self) -> SweepTable {
        let mut gammas: Vec<f64> = self.cells.iter().map(|c| c.gamma).collect();
        gammas.sort_by(f64::total_cmp);
        gammas.dedup();
        let mut out = BTreeMap::new();
        for c in &self.cells {
            out.entry((c.mode, c.variant)).or_insert_with(|| gammas.iter().map(|&g| (g, None)).collect::<Vec<_>>());
        }
        for ((mode, variant), row) in out.iter_mut() {
            for (g, v) in row.iter_mut() {
                *v = self.median_auc(*g, *mode, *variant);
            }
        }
        out
    }

    pub fn failures(&self) -> impl Iterator<Item = &SweepCell> {
        self.cells.iter().filter(|c| c.auc.is_none())
    }
}

/// Trains one model on `train_pool` contaminated at `gamma`.
pub fn train_cell<T: Scalar>(
    train_pool: &LabeledDataset,
    spec: &SweepSpec,
    gamma: f64,
    mode: EncoderMode,
    seed: u64,
) -> Result<FrozenModel<T>> {
    let normals = train_pool.images_with(Label::Normal);
    let anomalies = train_pool.images_with(Label::Anomaly);
    let contamination = ContaminationSpec::new(gamma, normals.len(), seed)?;
    let (stream, _audit) = contaminate(&normals, &anomalies, &contamination)?;
    let model = ModelConfig { init_seed: seed, ..spec.model.clone() };
    let config = TrainConfig { encoder_mode: mode, seed, ..spec.train.clone() };
    train::<T>(&stream, &model, &config)?.bundle.freeze()
}

/// Every (γ, mode, seed) run trains once and is scored under every variant.
/// Failed runs are recorded per cell and do not stop the sweep.
pub fn run_sweep<T: Scalar>(
    train_pool: &LabeledDataset,
    test: &LabeledDataset,
    spec: &SweepSpec,
    jobs: usize,
) -> Result<SweepResult> {
    let total = spec.total_steps();
    if total > spec.max_total_steps {
        return Err(Error::Budget(format!("{total} outer steps requested, budget is {}", spec.max_total_steps)));
    }
    if test.count(Label::Normal) == 0 || test.count(Label::Anomaly) == 0 {
        return Err(Error::SingleClass);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let runs = spec.runs();
    let outcomes: Vec<(Vec<SweepCell>, Option<RunLatentStats>)> = pool.install(|| {
        runs.par_iter()
            .map(|&(gamma, mode, seed)| {
                let steps = spec.steps_per_run(mode);
                let result = train_cell::<T>(train_pool, spec, gamma, mode, seed)
                    .and_then(|m| evaluate_model(&m, test, &spec.score));
                let cell = |variant, auc, error| SweepCell { gamma, mode, variant, seed, auc, error, steps };
                match result {
                    Ok(report) => {
                        let cells = spec
                            .grid
                            .score_variants
                            .iter()
                            .map(|&v| match report.roc(v) {
                                Ok(r) => cell(v, Some(r.auc), None),
                                Err(e) => cell(v, None, Some(e.to_string())),
                            })
                            .collect();
                        let latent = RunLatentStats {
                            gamma,
                            mode,
                            seed,
                            median_norm_normal: report.median_norm(Label::Normal).unwrap_or(f64::NAN),
                            median_norm_anomaly: report.median_norm(Label::Anomaly).unwrap_or(f64::NAN),
                        };
                        (cells, Some(latent))
                    }
                    Err(e) => {
                        log::warn!("sweep cell gamma={gamma} mode={mode} seed={seed} failed: {e}");
                        let msg = e.to_string();
                        (spec.grid.score_variants.iter().map(|&v| cell(v, None, Some(msg.clone()))).collect(), None)
                    }
                }
            })
            .collect()
    });
    let mut cells = Vec::new();
    let mut latent = Vec::new();
    for (c, l) in outcomes {
        cells.extend(c);
        latent.extend(l);
    }
    Ok(SweepResult { cells, latent, seeds: spec.grid.seeds.clone(), steps_per_phase: spec.train.steps_per_phase })
}
