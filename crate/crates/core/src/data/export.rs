//! On-disk dataset layout: `meta.json`, one little-endian f32 tensor per
//! split, `labels.csv` for the evaluation split and an optional `audit.csv`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{AuditEntry, AuditLog, Image, Label, LabeledDataset, LabeledSample, TrainStream, ValueRange};

pub const DATASET_FORMAT_VERSION: u32 = 1;
const TRAIN_FILE: &str = "train.f32";
const TEST_FILE: &str = "test.f32";
const LABELS_FILE: &str = "labels.csv";
const AUDIT_FILE: &str = "audit.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitMeta {
    pub name: String,
    pub file: String,
    pub count: usize,
    pub labeled: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub format_version: u32,
    pub resolution: usize,
    pub channels: usize,
    pub seed: u64,
    pub gamma: Option<f64>,
    pub contamination_seed: Option<u64>,
    pub train_normals: Option<usize>,
    pub train_anomalies: Option<usize>,
    pub test_normals: Option<usize>,
    pub test_anomalies: Option<usize>,
    pub splits: Vec<SplitMeta>,
}

/// A training stream and/or labeled evaluation split sharing one geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct ExportedDataset {
    pub resolution: usize,
    pub channels: usize,
    pub seed: u64,
    pub train: Option<TrainStream>,
    pub test: Option<LabeledDataset>,
    /// Analysis-only provenance of the training stream.
    pub audit: Option<AuditLog>,
}

fn write_images<'a>(path: &Path, images: impl Iterator<Item = &'a Image>) -> Result<()> {
    let mut bytes = Vec::new();
    for img in images {
        for v in img.values() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_images(path: &Path, count: usize, resolution: usize, channels: usize) -> Result<Vec<Image>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let per = resolution * resolution * channels;
    if bytes.len() != count * per * 4 {
        return Err(Error::format(path, format!("expected {} bytes, found {}", count * per * 4, bytes.len())));
    }
    let floats: Vec<f32> = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    floats
        .chunks(per.max(1))
        .take(count)
        .map(|c| Image::new(resolution, resolution, channels, c.to_vec(), ValueRange::SYMMETRIC))
        .collect()
}

pub fn write_dataset(dir: &Path, data: &ExportedDataset) -> Result<DatasetMeta> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut splits = Vec::new();
    let mut meta = DatasetMeta {
        format_version: DATASET_FORMAT_VERSION,
        resolution: data.resolution,
        channels: data.channels,
        seed: data.seed,
        gamma: data.audit.as_ref().map(|a| a.spec.gamma()),
        contamination_seed: data.audit.as_ref().map(|a| a.spec.seed()),
        train_normals: data.audit.as_ref().map(|a| a.spec.normals()),
        train_anomalies: data.audit.as_ref().map(|a| a.spec.anomalies()),
        test_normals: data.test.as_ref().map(|t| t.count(Label::Normal)),
        test_anomalies: data.test.as_ref().map(|t| t.count(Label::Anomaly)),
        splits: Vec::new(),
    };
    if let Some(train) = &data.train {
        write_images(&dir.join(TRAIN_FILE), train.images().iter())?;
        splits.push(SplitMeta { name: "train".into(), file: TRAIN_FILE.into(), count: train.len(), labeled: false });
    }
    if let Some(test) = &data.test {
        write_images(&dir.join(TEST_FILE), test.samples.iter().map(|s| &s.image))?;
        let path = dir.join(LABELS_FILE);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["index", "source_id", "label"])?;
        for (i, s) in test.samples.iter().enumerate() {
            w.write_record([i.to_string().as_str(), s.source_id.as_str(), s.label.as_str()])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        splits.push(SplitMeta { name: "test".into(), file: TEST_FILE.into(), count: test.len(), labeled: true });
    }
    if let Some(audit) = &data.audit {
        let path = dir.join(AUDIT_FILE);
        let mut w = csv::Writer::from_path(&path)?;
        for e in &audit.entries {
            w.serialize(e)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    meta.splits = splits;
    let path = dir.join("meta.json");
    fs::write(&path, serde_json::to_string_pretty(&meta)?).map_err(|e| Error::io(&path, e))?;
    Ok(meta)
}

#[derive(Deserialize)]
struct LabelRow {
    index: usize,
    source_id: String,
    label: Label,
}

/// Reads a dataset directory. The training stream never touches `labels.csv`.
pub fn load_dataset(dir: &Path) -> Result<(DatasetMeta, ExportedDataset)> {
    let path = dir.join("meta.json");
    if !path.is_file() {
        return Err(Error::MissingManifest(path));
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let meta: DatasetMeta = serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
    if meta.format_version != DATASET_FORMAT_VERSION {
        return Err(Error::format(&path, format!("unsupported dataset format version {}", meta.format_version)));
    }
    let mut out = ExportedDataset {
        resolution: meta.resolution,
        channels: meta.channels,
        seed: meta.seed,
        train: None,
        test: None,
        audit: None,
    };
    for split in &meta.splits {
        let images = read_images(&dir.join(&split.file), split.count, meta.resolution, meta.channels)?;
        match (split.name.as_str(), split.labeled) {
            ("train", false) => out.train = Some(TrainStream::new(images)),
            ("test", true) => {
                let path = dir.join(LABELS_FILE);
                let mut r = csv::Reader::from_path(&path)?;
                let rows: Vec<LabelRow> = r.deserialize().collect::<std::result::Result<_, _>>()?;
                if rows.len() != images.len() || rows.iter().enumerate().any(|(i, row)| row.index != i) {
                    return Err(Error::format(&path, "labels do not match the test tensor"));
                }
                let samples = images
                    .into_iter()
                    .zip(rows)
                    .map(|(image, row)| LabeledSample { image, label: row.label, source_id: row.source_id })
                    .collect();
                out.test = Some(LabeledDataset { resolution: meta.resolution, channels: meta.channels, samples });
            }
            (name, _) => return Err(Error::format(&path, format!("unexpected split `{name}`"))),
        }
    }
    let audit_path = dir.join(AUDIT_FILE);
    if audit_path.is_file() {
        if let (Some(g), Some(n), Some(seed)) = (meta.gamma, meta.train_normals, meta.contamination_seed) {
            let mut r = csv::Reader::from_path(&audit_path)?;
            let entries: Vec<AuditEntry> = r.deserialize().collect::<std::result::Result<_, _>>()?;
            out.audit = Some(AuditLog { spec: super::ContaminationSpec::new(g, n, seed)?, entries });
        }
    }
    Ok((meta, out))
}
