use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use encgan::data::{
    augment_rotations, contaminate, generate_splits, ingest_folder, load_dataset, write_dataset, ContaminationSpec,
    ExportedDataset, Label, LabeledDataset,
};
use encgan::evaluation::report::{
    histogram_svg, roc_svg, sweep_markdown, write_json, write_latent_csvs, write_roc_csv, write_sweep_csv,
};
use encgan::evaluation::{
    compute_roc, evaluate_model, latent_analysis, run_sweep, trapezoid_area, Histogram, RocPoint, RocResult, SweepCell,
    SweepResult,
};
use encgan::model::{checkpoint_load, checkpoint_save, ModelBundle};
use encgan::scoring::{read_scores_csv, write_png, write_scores_csv, ScoreRow, ScoreVariant};
use encgan::training::{train_with, TrainHooks, TrainLogRecord, TrainLogWriter};
use encgan::Frozen;
use serde::{Deserialize, Serialize};

use crate::config::{DataSource, EvaluateCmdConfig, GenDataConfig, ScoreCmdConfig, SweepCmdConfig, TrainCmdConfig};
use crate::error::CliError;

pub const RESOLVED_CONFIG: &str = "resolved_config.json";

type Result<T> = std::result::Result<T, CliError>;

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| encgan::Error::io(dir, e).into())
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::MissingInput(format!("{} does not exist", path.display())))
    }
}

fn write_resolved<S: Serialize>(out: &Path, config: &S) -> Result<()> {
    ensure_dir(out)?;
    Ok(write_json(&out.join(RESOLVED_CONFIG), config)?)
}

/// Labeled training pool and test set.
fn build_corpus(source: &DataSource, seed: Option<u64>) -> Result<(LabeledDataset, LabeledDataset)> {
    match source {
        DataSource::Synthetic { corpus, counts } => {
            let mut corpus = corpus.clone();
            if let Some(s) = seed {
                corpus.seed = s;
            }
            let splits = generate_splits(&corpus, counts)?;
            Ok((splits.train, splits.test))
        }
        DataSource::Folders { train, test, resolution, channels } => {
            require(train)?;
            require(test)?;
            let (train, r1) = ingest_folder(train, *resolution, *channels)?;
            let (test, r2) = ingest_folder(test, *resolution, *channels)?;
            let skipped = r1.skipped.len() + r2.skipped.len();
            if skipped > 0 {
                log::warn!("{skipped} undecodable files skipped");
            }
            Ok((train, test))
        }
    }
}

pub fn gen_data(mut cfg: GenDataConfig, out: &Path, seed: Option<u64>) -> Result<()> {
    if let Some(s) = seed {
        cfg.seed = s;
        if let DataSource::Synthetic { corpus, .. } = &mut cfg.source {
            corpus.seed = s;
        }
    }
    write_resolved(out, &cfg)?;
    let (mut pool, test) = build_corpus(&cfg.source, None)?;
    if cfg.rotations > 0 {
        pool = augment_rotations(&pool, cfg.rotations, cfg.seed)?;
    }
    let normals = pool.images_with(Label::Normal);
    let spec = ContaminationSpec::new(cfg.gamma, normals.len(), cfg.seed)?;
    let (stream, audit) = contaminate(&normals, &pool.images_with(Label::Anomaly), &spec)?;
    let data = ExportedDataset {
        resolution: pool.resolution,
        channels: pool.channels,
        seed: cfg.seed,
        train: Some(stream),
        test: Some(test),
        audit: Some(audit),
    };
    let meta = write_dataset(out, &data)?;
    log::info!("wrote {} training and {} test images", spec.normals() + spec.anomalies(), meta.test_normals.unwrap_or(0) + meta.test_anomalies.unwrap_or(0));
    Ok(())
}

struct CliHooks {
    log: TrainLogWriter<fs::File>,
    checkpoints: PathBuf,
}

impl TrainHooks<f32> for CliHooks {
    fn record(&mut self, record: &TrainLogRecord) -> encgan::Result<()> {
        self.log.append(record)
    }

    fn phase_end(&mut self, label: &str, bundle: &ModelBundle<f32>) -> encgan::Result<()> {
        checkpoint_save(bundle, &self.checkpoints.join(label))
    }
}

pub fn train(mut cfg: TrainCmdConfig, out: &Path, seed: Option<u64>) -> Result<()> {
    if let Some(s) = seed {
        cfg.train.seed = s;
        cfg.model.init_seed = s;
    }
    require(&cfg.data)?;
    let (_, data) = load_dataset(&cfg.data)?;
    let stream = data.train.ok_or_else(|| CliError::MissingInput(format!("{} has no training split", cfg.data.display())))?;
    if cfg.model.resolution != data.resolution || cfg.model.image_channels != data.channels {
        log::warn!(
            "using dataset geometry {}x{}x{} instead of the configured model geometry",
            data.resolution,
            data.resolution,
            data.channels
        );
        cfg.model.resolution = data.resolution;
        cfg.model.image_channels = data.channels;
    }
    write_resolved(out, &cfg)?;
    let mut hooks = CliHooks { log: TrainLogWriter::create(&out.join("train_log.csv"))?, checkpoints: out.join("checkpoints") };
    let outcome = train_with::<f32>(&stream, &cfg.model, &cfg.train, &mut hooks)?;
    checkpoint_save(&outcome.bundle, &out.join("checkpoint"))?;
    Ok(())
}

fn load_frozen(path: &Path) -> Result<Frozen> {
    require(path)?;
    Ok(checkpoint_load::<f32>(path)?.freeze()?)
}

fn sanitize(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn eval_set(data: Option<&Path>, folder: Option<&Path>, resolution: usize, channels: usize) -> Result<LabeledDataset> {
    match (data, folder) {
        (Some(d), None) => {
            require(d)?;
            let (_, ds) = load_dataset(d)?;
            ds.test.ok_or_else(|| CliError::MissingInput(format!("{} has no labeled test split", d.display())))
        }
        (None, Some(f)) => {
            require(f)?;
            Ok(ingest_folder(f, resolution, channels)?.0)
        }
        _ => Err(CliError::Config("exactly one of `data` and `folder` must be given".into())),
    }
}

pub fn score(cfg: ScoreCmdConfig, out: &Path) -> Result<()> {
    write_resolved(out, &cfg)?;
    let model = load_frozen(&cfg.checkpoint)?;
    let set = eval_set(cfg.data.as_deref(), cfg.folder.as_deref(), model.config.resolution, model.config.image_channels)?;
    let report = evaluate_model(&model, &set, &cfg.score)?;
    let rows: Vec<ScoreRow> =
        set.samples.iter().zip(&report.reports).map(|(s, r)| ScoreRow::from_report(&s.source_id, r)).collect();
    write_scores_csv(&out.join("scores.csv"), &rows)?;
    if cfg.reconstructions {
        let dir = out.join("reconstructions");
        ensure_dir(&dir)?;
        for (s, r) in set.samples.iter().zip(&report.reports) {
            let path = dir.join(format!("{}.png", sanitize(&s.source_id)));
            write_png(&path, &r.reconstruction, model.config.resolution, model.config.image_channels)?;
        }
    }
    Ok(())
}

fn read_labels(path: &Path) -> Result<HashMap<String, Label>> {
    require(path)?;
    let mut r = csv::Reader::from_path(path).map_err(encgan::Error::from)?;
    let headers = r.headers().map_err(encgan::Error::from)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Config(format!("{}: missing `{name}` column", path.display())))
    };
    let (id, label) = (col("source_id")?, col("label")?);
    let mut out = HashMap::new();
    for rec in r.records() {
        let rec = rec.map_err(encgan::Error::from)?;
        let l = Label::parse(&rec[label])
            .ok_or_else(|| CliError::Config(format!("{}: unknown label `{}`", path.display(), &rec[label])))?;
        out.insert(rec[id].to_string(), l);
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub variant: ScoreVariant,
    pub auc: f64,
    pub positives: usize,
    pub negatives: usize,
    pub auc_by_variant: Vec<(ScoreVariant, f64)>,
    pub median_norm_normal: Option<f64>,
    pub median_norm_anomaly: Option<f64>,
}

/// Chosen-variant ROC, AUC of every variant, median latent norms (normal, anomaly).
type Evaluated = (RocResult, Vec<(ScoreVariant, f64)>, (Option<f64>, Option<f64>));

pub fn evaluate(cfg: EvaluateCmdConfig, out: &Path) -> Result<()> {
    write_resolved(out, &cfg)?;
    let (roc, by_variant, norms): Evaluated =
        match (&cfg.scores, &cfg.checkpoint) {
            (Some(scores), None) => {
                let labels_path =
                    cfg.labels.as_ref().ok_or_else(|| CliError::Config("`scores` needs a `labels` file".into()))?;
                require(scores)?;
                let rows = read_scores_csv(scores)?;
                let labels = read_labels(labels_path)?;
                let mut by_variant = Vec::new();
                let mut chosen = None;
                for v in ScoreVariant::ALL {
                    let mut pairs = Vec::with_capacity(rows.len());
                    for r in &rows {
                        let l = labels.get(&r.source_id).ok_or_else(|| {
                            CliError::Config(format!("no label for `{}` in {}", r.source_id, labels_path.display()))
                        })?;
                        pairs.push((r.value(v), *l));
                    }
                    let roc = compute_roc(&pairs)?;
                    by_variant.push((v, roc.auc));
                    if v == cfg.variant {
                        chosen = Some(roc);
                    }
                }
                (chosen.expect("variant is one of ALL"), by_variant, (None, None))
            }
            (None, Some(ckpt)) => {
                let model = load_frozen(ckpt)?;
                let set = eval_set(cfg.data.as_deref(), None, model.config.resolution, model.config.image_channels)?;
                let report = evaluate_model(&model, &set, &cfg.score)?;
                let by_variant =
                    ScoreVariant::ALL.iter().map(|&v| Ok((v, report.roc(v)?.auc))).collect::<Result<Vec<_>>>()?;
                let analysis = latent_analysis(&model, &set, cfg.bins)?;
                write_latent_csvs(out, &analysis)?;
                let series: Vec<(&str, &Histogram)> =
                    analysis.per_label.iter().map(|s| (s.label.as_str(), &s.histogram)).collect();
                fs::write(out.join("latent_histograms.svg"), histogram_svg(&series, "latent coefficients"))
                    .map_err(|e| encgan::Error::io(out, e))?;
                let norms = (report.median_norm(Label::Normal), report.median_norm(Label::Anomaly));
                (report.roc(cfg.variant)?, by_variant, norms)
            }
            _ => return Err(CliError::Config("give either `scores` + `labels` or `checkpoint` + `data`".into())),
        };
    write_roc_csv(&out.join("roc.csv"), &roc)?;
    fs::write(out.join("roc.svg"), roc_svg(&roc, cfg.variant.as_str())).map_err(|e| encgan::Error::io(out, e))?;
    let summary = EvaluationSummary {
        variant: cfg.variant,
        auc: roc.auc,
        positives: roc.positives,
        negatives: roc.negatives,
        auc_by_variant: by_variant,
        median_norm_normal: norms.0,
        median_norm_anomaly: norms.1,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(())
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    table: Vec<SweepTableRow>,
    latent: &'a [encgan::evaluation::RunLatentStats],
    failed_cells: usize,
}

#[derive(Serialize)]
struct SweepTableRow {
    mode: String,
    variant: String,
    median_auc: Vec<(f64, Option<f64>)>,
}

pub fn sweep(mut cfg: SweepCmdConfig, out: &Path, seed: Option<u64>, jobs: usize) -> Result<()> {
    if let (Some(s), DataSource::Synthetic { corpus, .. }) = (seed, &mut cfg.source) {
        corpus.seed = s;
    }
    write_resolved(out, &cfg)?;
    let (mut pool, test) = build_corpus(&cfg.source, None)?;
    if cfg.rotations > 0 {
        pool = augment_rotations(&pool, cfg.rotations, pool.len() as u64)?;
    }
    cfg.sweep.model.resolution = pool.resolution;
    cfg.sweep.model.image_channels = pool.channels;
    let result = run_sweep::<f32>(&pool, &test, &cfg.sweep, jobs)?;
    write_sweep_csv(&out.join("sweep.csv"), &result)?;
    let summary = SweepSummary {
        table: result
            .table()
            .into_iter()
            .map(|((m, v), row)| SweepTableRow { mode: m.to_string(), variant: v.to_string(), median_auc: row })
            .collect(),
        latent: &result.latent,
        failed_cells: result.failures().count(),
    };
    write_json(&out.join("summary.json"), &summary)?;
    fs::write(out.join("sweep.md"), sweep_markdown(&result)).map_err(|e| encgan::Error::io(out, e))?;
    Ok(())
}

#[derive(Deserialize)]
struct SweepCsvRow {
    gamma: f64,
    mode: encgan::training::EncoderMode,
    variant: ScoreVariant,
    seed: u64,
    auc: Option<f64>,
    error: Option<String>,
}

/// Renders whatever results exist in `dir` into `report.md` and SVGs.
pub fn report(dir: &Path) -> Result<()> {
    require(dir)?;
    let mut md = String::from("# Run report\n\n");
    let mut found = false;

    let roc_path = dir.join("roc.csv");
    if roc_path.is_file() {
        found = true;
        let mut r = csv::Reader::from_path(&roc_path).map_err(encgan::Error::from)?;
        let points: Vec<RocPoint> =
            r.deserialize().collect::<std::result::Result<_, _>>().map_err(encgan::Error::from)?;
        let roc = RocResult { auc: trapezoid_area(&points), points, positives: 0, negatives: 0 };
        fs::write(dir.join("roc.svg"), roc_svg(&roc, "ROC")).map_err(|e| encgan::Error::io(dir, e))?;
        md += &format!("## ROC\n\nAUC {:.4} over {} operating points.\n\n![ROC](roc.svg)\n\n", roc.auc, roc.points.len());
    }

    let summary_path = dir.join("summary.json");
    if summary_path.is_file() && roc_path.is_file() {
        let text = fs::read_to_string(&summary_path).map_err(|e| encgan::Error::io(&summary_path, e))?;
        if let Ok(s) = serde_json::from_str::<EvaluationSummary>(&text) {
            md += "| score | AUC |\n|---|---|\n";
            for (v, a) in &s.auc_by_variant {
                md += &format!("| {v} | {a:.4} |\n");
            }
            if let (Some(n), Some(a)) = (s.median_norm_normal, s.median_norm_anomaly) {
                md += &format!("\nMedian latent norm: normal {n:.4}, anomaly {a:.4}.\n");
            }
            md.push('\n');
        }
    }

    let hist_path = dir.join("latent_histograms.csv");
    if hist_path.is_file() {
        found = true;
        let mut r = csv::Reader::from_path(&hist_path).map_err(encgan::Error::from)?;
        let mut by_label: Vec<(String, Histogram)> = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(encgan::Error::from)?;
            let parse = |i: usize| rec[i].parse::<f64>().map_err(|e| CliError::Config(format!("{}: {e}", hist_path.display())));
            let (label, lo, hi, count) = (rec[0].to_string(), parse(1)?, parse(2)?, parse(3)? as usize);
            if by_label.last().map(|(l, _)| l != &label).unwrap_or(true) {
                by_label.push((label, Histogram { edges: vec![lo], counts: Vec::new() }));
            }
            let h = &mut by_label.last_mut().expect("pushed").1;
            h.edges.push(hi);
            h.counts.push(count);
        }
        let series: Vec<(&str, &Histogram)> = by_label.iter().map(|(l, h)| (l.as_str(), h)).collect();
        fs::write(dir.join("latent_histograms.svg"), histogram_svg(&series, "latent coefficients"))
            .map_err(|e| encgan::Error::io(dir, e))?;
        md += "## Latent coefficients\n\n![histograms](latent_histograms.svg)\n\n";
    }

    let sweep_path = dir.join("sweep.csv");
    if sweep_path.is_file() {
        found = true;
        let mut r = csv::Reader::from_path(&sweep_path).map_err(encgan::Error::from)?;
        let cells: Vec<SweepCell> = r
            .deserialize::<SweepCsvRow>()
            .map(|row| {
                row.map(|c| SweepCell {
                    gamma: c.gamma,
                    mode: c.mode,
                    variant: c.variant,
                    seed: c.seed,
                    auc: c.auc,
                    error: c.error,
                    steps: 0,
                })
            })
            .collect::<std::result::Result<_, _>>()
            .map_err(encgan::Error::from)?;
        let mut seeds: Vec<u64> = cells.iter().map(|c| c.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        let steps = fs::read_to_string(dir.join(RESOLVED_CONFIG))
            .ok()
            .and_then(|t| serde_json::from_str::<SweepCmdConfig>(&t).ok())
            .map(|c| c.sweep.train.steps_per_phase)
            .unwrap_or(0);
        let result = SweepResult { cells, latent: Vec::new(), seeds, steps_per_phase: steps };
        md += "## Sweep\n\n";
        md += &sweep_markdown(&result);
        md.push('\n');
    }

    let log_path = dir.join("train_log.csv");
    if log_path.is_file() {
        found = true;
        let mut r = csv::Reader::from_path(&log_path).map_err(encgan::Error::from)?;
        let recs: Vec<TrainLogRecord> =
            r.deserialize().collect::<std::result::Result<_, _>>().map_err(encgan::Error::from)?;
        if let Some(last) = recs.last() {
            md += &format!(
                "## Training\n\n{} logged steps; final step {} at {}x{}: critic {:.4}, wasserstein {:.4}, generator {:.4}, encoder {:.5}.\n\n",
                recs.len(),
                last.step,
                last.phase_resolution,
                last.phase_resolution,
                last.critic_loss,
                last.wasserstein,
                last.generator_loss,
                last.encoder_loss
            );
        }
    }

    if !found {
        return Err(CliError::MissingInput(format!("{} holds no results to report", dir.display())));
    }
    fs::write(dir.join("report.md"), md).map_err(|e| encgan::Error::io(dir, e))?;
    Ok(())
}
