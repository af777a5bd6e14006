use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::{Label, LabeledDataset};
use crate::error::{Error, Result};
use crate::model::FrozenModel;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `counts.len() + 1` ascending edges; the last bin is closed.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn with_edges(lo: f64, hi: f64, bins: usize) -> Self {
        let bins = bins.max(1);
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        let edges = (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect();
        Self { edges, counts: vec![0; bins] }
    }

    pub fn add(&mut self, v: f64) {
        let bins = self.counts.len();
        let (lo, hi) = (self.edges[0], self.edges[bins]);
        let pos = ((v - lo) / (hi - lo) * bins as f64).floor();
        let idx = if pos.is_nan() || pos < 0.0 { 0 } else { (pos as usize).min(bins - 1) };
        self.counts[idx] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (i, f) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - f) + sorted[i + 1] * f
    } else {
        sorted[i]
    }
}

impl NormStats {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySet);
        }
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        Ok(Self {
            count: s.len(),
            mean: s.iter().sum::<f64>() / s.len() as f64,
            median: quantile(&s, 0.5),
            q1: quantile(&s, 0.25),
            q3: quantile(&s, 0.75),
            min: s[0],
            max: s[s.len() - 1],
        })
    }
}

/// Mean-centred projection onto the leading eigenvectors of the covariance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// Unit-length principal directions, most variance first.
    pub components: Vec<Vec<f64>>,
    pub variances: Vec<f64>,
}

impl Pca {
    pub fn fit(rows: &[Vec<f64>], k: usize) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptySet);
        }
        let d = rows[0].len();
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: r.len() });
        }
        let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
        let centred = DMatrix::from_fn(n, d, |i, j| rows[i][j] - mean[j]);
        let cov = centred.transpose() * &centred / n as f64;
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let mut components = Vec::new();
        let mut variances = Vec::new();
        for &i in order.iter().take(k.min(d)) {
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            // fix the sign: largest-magnitude entry positive
            let pivot = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if pivot < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            components.push(v);
            variances.push(eig.eigenvalues[i].max(0.0));
        }
        Ok(Self { mean, components, variances })
    }

    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let c = DVector::from_iterator(v.len(), v.iter().zip(&self.mean).map(|(a, m)| a - m));
        self.components.iter().map(|p| DVector::from_column_slice(p).dot(&c)).collect()
    }

    pub fn reconstruct(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (p, &c) in self.components.iter().zip(coords) {
            for (o, &pv) in out.iter_mut().zip(p) {
                *o += c * pv;
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelSummary {
    pub label: Label,
    pub histogram: Histogram,
    pub norms: NormStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedSample {
    pub source_id: String,
    pub label: Label,
    pub latent: Vec<f64>,
    pub norm: f64,
    /// Coordinates on the first two principal components.
    pub projection: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentAnalysis {
    pub latent_dim: usize,
    pub per_label: Vec<LabelSummary>,
    pub samples: Vec<EncodedSample>,
    pub pca: Pca,
}

impl LatentAnalysis {
    pub fn summary(&self, label: Label) -> Option<&LabelSummary> {
        self.per_label.iter().find(|s| s.label == label)
    }
}

/// Encodes every sample and summarizes coefficients and norms by label.
pub fn latent_analysis<T: Scalar>(model: &FrozenModel<T>, set: &LabeledDataset, bins: usize) -> Result<LatentAnalysis> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let images: Vec<_> = set.samples.iter().map(|s| s.image.clone()).collect();
    let mut latents = Vec::with_capacity(images.len());
    for chunk in images.chunks(64) {
        let z = model.encode(&crate::data::images_to_tensor(chunk))?;
        latents.extend(z.into_iter().map(|v| v.0.iter().map(|x| x.real()).collect::<Vec<f64>>()));
    }
    latent_analysis_from(set, latents, bins)
}

/// As [`latent_analysis`] for latents computed elsewhere, in dataset order.
pub fn latent_analysis_from(set: &LabeledDataset, latents: Vec<Vec<f64>>, bins: usize) -> Result<LatentAnalysis> {
    if latents.is_empty() {
        return Err(Error::EmptySet);
    }
    if latents.len() != set.len() {
        return Err(Error::DimensionMismatch { expected: set.len(), got: latents.len() });
    }
    let latent_dim = latents[0].len();
    let pca = Pca::fit(&latents, 2)?;
    let (lo, hi) = latents
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));

    let samples: Vec<EncodedSample> = set
        .samples
        .iter()
        .zip(latents)
        .map(|(s, z)| {
            let p = pca.project(&z);
            EncodedSample {
                source_id: s.source_id.clone(),
                label: s.label,
                norm: z.iter().map(|v| v * v).sum::<f64>().sqrt(),
                projection: [p.first().copied().unwrap_or(0.0), p.get(1).copied().unwrap_or(0.0)],
                latent: z,
            }
        })
        .collect();

    let mut per_label = Vec::new();
    for label in [Label::Normal, Label::Anomaly] {
        let mine: Vec<&EncodedSample> = samples.iter().filter(|s| s.label == label).collect();
        if mine.is_empty() {
            continue;
        }
        let mut histogram = Histogram::with_edges(lo, hi, bins);
        mine.iter().flat_map(|s| &s.latent).for_each(|&v| histogram.add(v));
        let norms = NormStats::from_values(&mine.iter().map(|s| s.norm).collect::<Vec<_>>())?;
        per_label.push(LabelSummary { label, histogram, norms });
    }
    Ok(LatentAnalysis { latent_dim, per_label, samples, pca })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartiles() {
        let s = NormStats::from_values(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max), (1.0, 2.0, 3.0, 4.0, 5.0));
        assert_eq!(s.mean, 3.0);
    }

    #[test]
    fn planar_latents_reconstruct_exactly() {
        let u = [1.0, 2.0, 0.0, -1.0, 0.5];
        let v = [0.0, 1.0, 1.0, 1.0, -2.0];
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let (a, b) = ((i as f64 * 0.7).sin() * 3.0, (i as f64 * 1.3).cos());
                (0..5).map(|j| 0.25 + a * u[j] + b * v[j]).collect()
            })
            .collect();
        let pca = Pca::fit(&rows, 2).unwrap();
        for r in &rows {
            let back = pca.reconstruct(&pca.project(r));
            let err: f64 = back.iter().zip(r).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(err < 1e-9, "residual {err}");
        }
    }

    #[test]
    fn histogram_edges_and_counts() {
        let mut h = Histogram::with_edges(0.0, 1.0, 4);
        for v in [0.0, 0.1, 0.3, 0.99, 1.0] {
            h.add(v);
        }
        assert_eq!(h.counts, vec![2, 1, 0, 2]);
        assert_eq!(h.total(), 5);
    }
}
