//! Datasets: synthetic generation, folder ingestion, rotation augmentation,
//! contamination of training streams, and on-disk export.
//!
//! Labels live only in [`LabeledDataset`]. Training consumes a [`TrainStream`],
//! which has no label field at all; the matching [`AuditLog`] exists for
//! analysis and is never read by the trainer.

mod augment;
mod contaminate;
mod export;
mod ingest;
mod synthetic;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub use augment::{augment_rotations, augment_rotations_with, rotate_image};
pub use contaminate::{anomaly_count, contaminate, AuditEntry, AuditLog, ContaminationSpec, TrainStream};
pub use export::{load_dataset, write_dataset, DatasetMeta, ExportedDataset, SplitMeta};
pub use ingest::{ingest_folder, map_u8, IngestReport};
pub use synthetic::{generate_splits, generate_synthetic, AnomalyFamily, NormalFamily, SplitCounts, SyntheticCorpusConfig, SyntheticSplits};

/// Closed value interval every pixel must lie in.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueRange {
    pub lo: f32,
    pub hi: f32,
}

impl ValueRange {
    /// The training range `[−1, 1]`.
    pub const SYMMETRIC: ValueRange = ValueRange { lo: -1.0, hi: 1.0 };

    pub fn contains(&self, v: f32) -> bool {
        v >= self.lo && v <= self.hi
    }
}

/// A `W×H×D` image stored channel-major (`[d][y][x]`).
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    depth: usize,
    values: Vec<f32>,
    range: ValueRange,
}

impl Image {
    pub fn new(width: usize, height: usize, depth: usize, values: Vec<f32>, range: ValueRange) -> Result<Self> {
        if width == 0 || height == 0 || depth == 0 {
            return Err(Error::InvalidConfig("image dimensions must be positive".into()));
        }
        let n = width * height * depth;
        if values.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: values.len() });
        }
        if let Some(v) = values.iter().find(|&&v| !range.contains(v)) {
            return Err(Error::InvalidConfig(format!("pixel value {v} outside [{}, {}]", range.lo, range.hi)));
        }
        Ok(Self { width, height, depth, values, range })
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn depth(&self) -> usize {
        self.depth
    }
    pub fn values(&self) -> &[f32] {
        &self.values
    }
    pub fn range(&self) -> ValueRange {
        self.range
    }
    /// N_X = W·H·D
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min_value(&self) -> f32 {
        self.values.iter().copied().fold(f32::INFINITY, f32::min)
    }

    pub fn to_scalars<T: Scalar>(&self) -> Vec<T> {
        self.values.iter().map(|&v| T::from_f32(v).expect("finite pixel")).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Normal,
    Anomaly,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Normal => "normal",
            Label::Anomaly => "anomaly",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" => Some(Label::Normal),
            "anomaly" => Some(Label::Anomaly),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub image: Image,
    pub label: Label,
    pub source_id: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub resolution: usize,
    pub channels: usize,
    pub samples: Vec<LabeledSample>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.samples.iter().filter(|s| s.label == label).count()
    }

    /// Images with the given label, in dataset order.
    pub fn images_with(&self, label: Label) -> Vec<Image> {
        self.samples.iter().filter(|s| s.label == label).map(|s| s.image.clone()).collect()
    }

    /// Stacks all images into an `[n, d, h, w]` tensor.
    pub fn to_tensor<T: Scalar>(&self) -> Tensor<T> {
        images_to_tensor(self.samples.iter().map(|s| &s.image))
    }
}

pub fn images_to_tensor<'a, T: Scalar>(images: impl IntoIterator<Item = &'a Image>) -> Tensor<T> {
    let mut data = Vec::new();
    let mut shape = None;
    let mut n = 0;
    for img in images {
        shape.get_or_insert([img.depth, img.height, img.width]);
        data.extend(img.values.iter().map(|&v| T::from_f32(v).expect("finite pixel")));
        n += 1;
    }
    let [d, h, w] = shape.unwrap_or([1, 1, 1]);
    Tensor::from_vec(&[n, d, h, w], data).expect("uniform image shapes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_invariants_are_enforced() {
        assert!(Image::new(2, 2, 1, vec![0.0; 4], ValueRange::SYMMETRIC).is_ok());
        assert!(matches!(
            Image::new(2, 2, 1, vec![0.0; 3], ValueRange::SYMMETRIC),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(Image::new(2, 2, 1, vec![0.0, 0.0, 1.5, 0.0], ValueRange::SYMMETRIC).is_err());
    }
}
