//! Anomaly losses and scores against a frozen generator/encoder pair.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Image;
use crate::error::{Error, Result};
use crate::model::{FrozenModel, LatentVector};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Ranges below this are treated as constant images.
pub const DEGENERATE_RANGE: f64 = 1e-12;
const SCORE_CHUNK: usize = 64;

/// `(x − min x) / (max x − min x)` over the whole tensor; all zeros when the
/// range is degenerate.
pub fn minmax_normalize<T: Scalar>(x: &[T]) -> Vec<T> {
    let Some(&first) = x.first() else { return Vec::new() };
    let (lo, hi) = x.iter().fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if range.real() < DEGENERATE_RANGE {
        return vec![T::zero(); x.len()];
    }
    x.iter().map(|&v| (v - lo) / range).collect()
}

fn same_len(q: usize, r: usize) -> Result<()> {
    if q != r {
        return Err(Error::DimensionMismatch { expected: q, got: r });
    }
    Ok(())
}

/// `‖w(Q) − w(R)‖₂ / N_X`
pub fn residual_normalized<T: Scalar>(query: &[T], recon: &[T]) -> Result<T> {
    same_len(query.len(), recon.len())?;
    if query.is_empty() {
        return Ok(T::zero());
    }
    let (wq, wr) = (minmax_normalize(query), minmax_normalize(recon));
    let ss: T = wq.iter().zip(&wr).map(|(&a, &b)| (a - b) * (a - b)).sum();
    Ok(ss.sqrt() / T::lit(query.len() as f64))
}

/// `‖Q − R‖₂`
pub fn residual_raw<T: Scalar>(query: &[T], recon: &[T]) -> Result<T> {
    same_len(query.len(), recon.len())?;
    Ok(query.iter().zip(recon).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>().sqrt())
}

/// `−‖ẑ‖₂ / √N_z`
pub fn origin_distance<T: Scalar>(z: &[T]) -> T {
    if z.is_empty() {
        return T::zero();
    }
    -z.iter().map(|&v| v * v).sum::<T>().sqrt() / T::lit(z.len() as f64).sqrt()
}

/// Which loss is used as the anomaly score.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreVariant {
    /// L_n alone.
    Residual,
    /// L_r alone.
    RawResidual,
    /// L_o alone.
    Origin,
    /// λ·L_n + (1−λ)·L_o
    Combined,
}

impl ScoreVariant {
    pub const ALL: [ScoreVariant; 4] =
        [ScoreVariant::Residual, ScoreVariant::RawResidual, ScoreVariant::Origin, ScoreVariant::Combined];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScoreVariant::Residual => "residual",
            ScoreVariant::RawResidual => "raw_residual",
            ScoreVariant::Origin => "origin",
            ScoreVariant::Combined => "combined",
        }
    }

    pub fn pick<T: Scalar>(&self, report: &ScoreReport<T>) -> T {
        match self {
            ScoreVariant::Residual => report.residual,
            ScoreVariant::RawResidual => report.raw_residual,
            ScoreVariant::Origin => report.origin,
            ScoreVariant::Combined => report.score,
        }
    }
}

impl std::fmt::Display for ScoreVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "RawScoreConfig")]
pub struct ScoreConfig {
    lambda: f64,
    alpha: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScoreConfig {
    #[serde(default = "default_lambda")]
    lambda: f64,
    #[serde(default)]
    alpha: f64,
}

fn default_lambda() -> f64 {
    0.05
}

impl TryFrom<RawScoreConfig> for ScoreConfig {
    type Error = Error;
    fn try_from(raw: RawScoreConfig) -> Result<Self> {
        ScoreConfig::new(raw.lambda, raw.alpha)
    }
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self { lambda: default_lambda(), alpha: 0.0 }
    }
}

impl ScoreConfig {
    pub fn new(lambda: f64, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidConfig(format!("lambda must lie in [0, 1], got {lambda}")));
        }
        if alpha.is_nan() {
            return Err(Error::InvalidConfig("alpha must not be NaN".into()));
        }
        Ok(Self { lambda, alpha })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `λ·L_n + (1−λ)·L_o`
    pub fn combine<T: Scalar>(&self, residual: T, origin: T) -> T {
        let l = T::lit(self.lambda);
        l * residual + (T::one() - l) * origin
    }
}

/// Per-query scoring result.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreReport<T> {
    pub latent: LatentVector<T>,
    pub reconstruction: Vec<T>,
    /// L_n
    pub residual: T,
    /// L_r
    pub raw_residual: T,
    /// L_o
    pub origin: T,
    /// a
    pub score: T,
    pub is_anomaly: bool,
}

fn report<T: Scalar>(query: &[T], latent: LatentVector<T>, recon: Vec<T>, config: &ScoreConfig) -> Result<ScoreReport<T>> {
    let residual = residual_normalized(query, &recon)?;
    let raw_residual = residual_raw(query, &recon)?;
    let origin = origin_distance(latent.as_slice());
    let score = config.combine(residual, origin);
    Ok(ScoreReport {
        latent,
        reconstruction: recon,
        residual,
        raw_residual,
        origin,
        score,
        is_anomaly: score.real() > config.alpha,
    })
}

/// Scores a single image.
pub fn anomaly_score<T: Scalar>(model: &FrozenModel<T>, query: &Image, config: &ScoreConfig) -> Result<ScoreReport<T>> {
    let mut out = score_images(model, std::slice::from_ref(query), config)?;
    Ok(out.pop().expect("one report"))
}

/// Scores a `[n, c, r, r]` batch. Results are independent of how the batch is chunked.
pub fn score_batch<T: Scalar>(model: &FrozenModel<T>, images: &Tensor<T>, config: &ScoreConfig) -> Result<Vec<ScoreReport<T>>> {
    let (n, c, h, w) = images.dims4();
    let item = images.item_len();
    let chunks: Vec<Result<Vec<ScoreReport<T>>>> = (0..n)
        .collect::<Vec<_>>()
        .par_chunks(SCORE_CHUNK)
        .map(|idx| {
            let mut data = Vec::with_capacity(idx.len() * item);
            for &i in idx {
                data.extend_from_slice(images.item(i));
            }
            let batch = Tensor::from_vec(&[idx.len(), c, h, w], data)?;
            let latents = model.encode(&batch)?;
            let recon = model.generate(&latents)?;
            latents
                .into_iter()
                .enumerate()
                .map(|(k, z)| report(batch.item(k), z, recon.item(k).to_vec(), config))
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(n);
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

pub fn score_images<T: Scalar>(model: &FrozenModel<T>, images: &[Image], config: &ScoreConfig) -> Result<Vec<ScoreReport<T>>> {
    if images.is_empty() {
        return Ok(Vec::new());
    }
    let r = model.config.resolution;
    if let Some(bad) = images.iter().find(|i| i.width() != r || i.height() != r) {
        return Err(Error::ResolutionMismatch { expected: r, got: bad.width() });
    }
    score_batch(model, &crate::data::images_to_tensor(images), config)
}

/// One row of a scores file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub source_id: String,
    #[serde(rename = "L_n")]
    pub residual: f64,
    #[serde(rename = "L_r")]
    pub raw_residual: f64,
    #[serde(rename = "L_o")]
    pub origin: f64,
    #[serde(rename = "a")]
    pub score: f64,
    pub is_anomaly: bool,
}

impl ScoreRow {
    pub fn from_report<T: Scalar>(source_id: &str, r: &ScoreReport<T>) -> Self {
        Self {
            source_id: source_id.to_string(),
            residual: r.residual.real(),
            raw_residual: r.raw_residual.real(),
            origin: r.origin.real(),
            score: r.score.real(),
            is_anomaly: r.is_anomaly,
        }
    }

    pub fn value(&self, variant: ScoreVariant) -> f64 {
        match variant {
            ScoreVariant::Residual => self.residual,
            ScoreVariant::RawResidual => self.raw_residual,
            ScoreVariant::Origin => self.origin,
            ScoreVariant::Combined => self.score,
        }
    }
}

pub fn write_scores_csv(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_scores_csv(path: &Path) -> Result<Vec<ScoreRow>> {
    if !path.is_file() {
        return Err(Error::io(path, std::io::Error::from(std::io::ErrorKind::NotFound)));
    }
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Writes a square image from `[−1, 1]` values as an 8-bit PNG.
pub fn write_png(path: &Path, values: &[f32], resolution: usize, channels: usize) -> Result<()> {
    let plane = resolution * resolution;
    same_len(plane * channels, values.len())?;
    let to_u8 = |v: f32| (((v.clamp(-1.0, 1.0) + 1.0) * 127.5).round()) as u8;
    let r = resolution as u32;
    let result = if channels == 1 {
        image::GrayImage::from_fn(r, r, |x, y| image::Luma([to_u8(values[(y * r + x) as usize])])).save(path)
    } else if channels == 3 {
        image::RgbImage::from_fn(r, r, |x, y| {
            let i = (y * r + x) as usize;
            image::Rgb([to_u8(values[i]), to_u8(values[plane + i]), to_u8(values[2 * plane + i])])
        })
        .save(path)
    } else {
        return Err(Error::InvalidConfig(format!("cannot write {channels}-channel PNG")));
    };
    result.map_err(|e| Error::format(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minmax_examples() {
        assert_eq!(minmax_normalize(&[0.0, 2.0, 4.0]), vec![0.0, 0.5, 1.0]);
        assert_eq!(minmax_normalize(&[-1.0, 1.0]), vec![0.0, 1.0]);
        assert_eq!(minmax_normalize(&[3.0f64; 5]), vec![0.0; 5]);
    }

    #[test]
    fn lambda_is_range_checked() {
        assert!(ScoreConfig::new(1.2, 0.0).is_err());
        assert!(ScoreConfig::new(-0.1, 0.0).is_err());
        assert!(serde_json::from_str::<ScoreConfig>(r#"{"lambda": 2.0}"#).is_err());
        let c: ScoreConfig = serde_json::from_str(r#"{"alpha": 0.5}"#).unwrap();
        assert_eq!(c.lambda(), 0.05);
        assert!(serde_json::from_str::<ScoreConfig>(r#"{"lamda": 0.5}"#).is_err());
    }

    #[test]
    fn png_round_trip_endpoints() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.png");
        write_png(&p, &[-1.0, 1.0, 0.0, 1.0], 2, 1).unwrap();
        let img = image::open(&p).unwrap().to_luma8();
        assert_eq!(img.into_raw(), vec![0, 255, 128, 255]);
    }
}
