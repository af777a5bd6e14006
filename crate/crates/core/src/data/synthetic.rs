//! Parametric raster shapes on a dark background: filled discs for normal
//! samples, crosses and hollow squares for anomalies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Image, Label, LabeledDataset, LabeledSample, ValueRange};

const SUPERSAMPLE: usize = 4;
const BACKGROUND: f32 = -1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalFamily {
    /// Filled disc, jittered radius, centre and brightness.
    Disc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyFamily {
    Cross,
    HollowSquare,
    /// Crosses and hollow squares alternating.
    CrossOrSquare,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticCorpusConfig {
    pub resolution: usize,
    pub channels: usize,
    pub normal_family: NormalFamily,
    pub anomaly_family: AnomalyFamily,
    pub normals: usize,
    pub anomalies: usize,
    /// Standard deviation of additive Gaussian pixel noise (before clamping).
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticCorpusConfig {
    fn default() -> Self {
        Self {
            resolution: 16,
            channels: 1,
            normal_family: NormalFamily::Disc,
            anomaly_family: AnomalyFamily::CrossOrSquare,
            normals: 500,
            anomalies: 500,
            noise: 0.05,
            seed: 0,
        }
    }
}

enum Shape {
    Disc { cx: f64, cy: f64, r: f64 },
    Cross { cx: f64, cy: f64, arm: f64, half_width: f64 },
    HollowSquare { cx: f64, cy: f64, half: f64, border: f64 },
}

impl Shape {
    fn covers(&self, x: f64, y: f64) -> bool {
        match *self {
            Shape::Disc { cx, cy, r } => (x - cx).powi(2) + (y - cy).powi(2) <= r * r,
            Shape::Cross { cx, cy, arm, half_width } => {
                let (dx, dy) = ((x - cx).abs(), (y - cy).abs());
                (dx <= half_width && dy <= arm) || (dy <= half_width && dx <= arm)
            }
            Shape::HollowSquare { cx, cy, half, border } => {
                let m = (x - cx).abs().max((y - cy).abs());
                m <= half && m >= half - border
            }
        }
    }
}

fn draw_shape<R: Rng>(rng: &mut R, res: f64, label: Label, family: (NormalFamily, AnomalyFamily), index: usize) -> Shape {
    let jitter = res / 8.0;
    let cx = res / 2.0 + rng.random_range(-jitter..=jitter);
    let cy = res / 2.0 + rng.random_range(-jitter..=jitter);
    match label {
        Label::Normal => match family.0 {
            NormalFamily::Disc => Shape::Disc { cx, cy, r: rng.random_range(0.2..=0.34) * res },
        },
        Label::Anomaly => {
            let cross = match family.1 {
                AnomalyFamily::Cross => true,
                AnomalyFamily::HollowSquare => false,
                AnomalyFamily::CrossOrSquare => index.is_multiple_of(2),
            };
            if cross {
                Shape::Cross {
                    cx,
                    cy,
                    arm: rng.random_range(0.26..=0.38) * res,
                    half_width: rng.random_range(0.06..=0.1) * res,
                }
            } else {
                Shape::HollowSquare {
                    cx,
                    cy,
                    half: rng.random_range(0.22..=0.34) * res,
                    border: rng.random_range(0.08..=0.12) * res,
                }
            }
        }
    }
}

fn render<R: Rng>(rng: &mut R, shape: &Shape, res: usize, channels: usize, noise: f64) -> Result<Image> {
    let noise = Normal::new(0.0, noise.max(0.0)).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let step = 1.0 / SUPERSAMPLE as f64;
    let mut coverage = vec![0f64; res * res];
    for y in 0..res {
        for x in 0..res {
            let mut hits = 0;
            for sy in 0..SUPERSAMPLE {
                for sx in 0..SUPERSAMPLE {
                    let px = x as f64 + (sx as f64 + 0.5) * step;
                    let py = y as f64 + (sy as f64 + 0.5) * step;
                    hits += usize::from(shape.covers(px, py));
                }
            }
            coverage[y * res + x] = hits as f64 / (SUPERSAMPLE * SUPERSAMPLE) as f64;
        }
    }
    let mut values = Vec::with_capacity(res * res * channels);
    for _ in 0..channels {
        let fg = rng.random_range(0.3..=1.0);
        for &c in &coverage {
            let v = BACKGROUND as f64 + (fg - BACKGROUND as f64) * c + noise.sample(rng);
            values.push(v.clamp(-1.0, 1.0) as f32);
        }
    }
    Image::new(res, res, channels, values, ValueRange::SYMMETRIC)
}

/// Renders `normals` normal and `anomalies` anomalous images, normals first.
pub fn generate_synthetic(config: &SyntheticCorpusConfig) -> Result<LabeledDataset> {
    if ![8, 16, 32].contains(&config.resolution) {
        return Err(Error::UnsupportedResolution(config.resolution));
    }
    if config.normals + config.anomalies == 0 || config.channels == 0 {
        return Err(Error::ZeroCount);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let family = (config.normal_family, config.anomaly_family);
    let res = config.resolution as f64;
    let mut samples = Vec::with_capacity(config.normals + config.anomalies);
    for (label, count) in [(Label::Normal, config.normals), (Label::Anomaly, config.anomalies)] {
        for i in 0..count {
            let shape = draw_shape(&mut rng, res, label, family, i);
            let image = render(&mut rng, &shape, config.resolution, config.channels, config.noise)?;
            samples.push(LabeledSample { image, label, source_id: format!("{}-{i:05}", label.as_str()) });
        }
    }
    Ok(LabeledDataset { resolution: config.resolution, channels: config.channels, samples })
}

/// Sample counts for a train/test corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitCounts {
    pub train_normals: usize,
    /// Pool of anomalies available for contaminating the training stream.
    pub train_anomalies: usize,
    pub test_normals: usize,
    pub test_anomalies: usize,
}

impl Default for SplitCounts {
    fn default() -> Self {
        Self { train_normals: 2000, train_anomalies: 200, test_normals: 256, test_anomalies: 256 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSplits {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}

/// Train and test splits from independent seeds derived from `base.seed`.
pub fn generate_splits(base: &SyntheticCorpusConfig, counts: &SplitCounts) -> Result<SyntheticSplits> {
    let train = generate_synthetic(&SyntheticCorpusConfig {
        normals: counts.train_normals,
        anomalies: counts.train_anomalies,
        seed: base.seed.wrapping_mul(2),
        ..base.clone()
    })?;
    let test = generate_synthetic(&SyntheticCorpusConfig {
        normals: counts.test_normals,
        anomalies: counts.test_anomalies,
        seed: base.seed.wrapping_mul(2).wrapping_add(1),
        ..base.clone()
    })?;
    Ok(SyntheticSplits { train, test })
}
