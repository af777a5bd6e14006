//! Mixing anomalies into label-free training streams.

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::Image;

/// Number of anomalies giving fraction `gamma` next to `normals` normal samples,
/// rounded half away from zero.
pub fn anomaly_count(gamma: f64, normals: usize) -> Result<usize> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidConfig(format!("gamma must lie in [0, 1), got {gamma}")));
    }
    Ok((gamma * normals as f64 / (1.0 - gamma)).round() as usize)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContaminationSpec {
    gamma: f64,
    normals: usize,
    anomalies: usize,
    seed: u64,
}

impl ContaminationSpec {
    pub fn new(gamma: f64, normals: usize, seed: u64) -> Result<Self> {
        Ok(Self { gamma, normals, anomalies: anomaly_count(gamma, normals)?, seed })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    /// N_n
    pub fn normals(&self) -> usize {
        self.normals
    }
    /// N_a
    pub fn anomalies(&self) -> usize {
        self.anomalies
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// N_a / (N_n + N_a), or 0 for an empty stream.
    pub fn realized_fraction(&self) -> f64 {
        let total = self.normals + self.anomalies;
        if total == 0 {
            0.0
        } else {
            self.anomalies as f64 / total as f64
        }
    }
}

/// Unlabeled training images in presentation order.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainStream {
    images: Vec<Image>,
}

impl TrainStream {
    pub fn new(images: Vec<Image>) -> Self {
        Self { images }
    }
    pub fn images(&self) -> &[Image] {
        &self.images
    }
    pub fn len(&self) -> usize {
        self.images.len()
    }
    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

/// Where a stream position came from. Kept apart from the stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub position: usize,
    pub anomalous: bool,
    /// Index into the normal or anomaly pool passed to [`contaminate`].
    pub pool_index: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditLog {
    pub spec: ContaminationSpec,
    pub entries: Vec<AuditEntry>,
}

impl AuditLog {
    pub fn anomalous_positions(&self) -> Vec<usize> {
        self.entries.iter().filter(|e| e.anomalous).map(|e| e.position).collect()
    }
}

/// Takes the first N_n normals, samples N_a anomalies without replacement and
/// shuffles them together.
pub fn contaminate(normals: &[Image], anomalies: &[Image], spec: &ContaminationSpec) -> Result<(TrainStream, AuditLog)> {
    if normals.len() < spec.normals {
        return Err(Error::InsufficientNormals { needed: spec.normals, available: normals.len() });
    }
    if anomalies.len() < spec.anomalies {
        return Err(Error::InsufficientAnomalies { needed: spec.anomalies, available: anomalies.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut picks: Vec<(bool, usize)> = (0..spec.normals).map(|i| (false, i)).collect();
    let mut chosen = index::sample(&mut rng, anomalies.len(), spec.anomalies).into_vec();
    chosen.sort_unstable();
    picks.extend(chosen.into_iter().map(|j| (true, j)));
    picks.shuffle(&mut rng);

    let images = picks
        .iter()
        .map(|&(anom, i)| if anom { anomalies[i].clone() } else { normals[i].clone() })
        .collect();
    let entries = picks
        .iter()
        .enumerate()
        .map(|(position, &(anomalous, pool_index))| AuditEntry { position, anomalous, pool_index })
        .collect();
    Ok((TrainStream::new(images), AuditLog { spec: spec.clone(), entries }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ValueRange;

    fn pool(n: usize, v: f32) -> Vec<Image> {
        (0..n)
            .map(|i| Image::new(1, 1, 1, vec![v * (i as f32 / n.max(1) as f32)], ValueRange::SYMMETRIC).unwrap())
            .collect()
    }

    #[test]
    fn counts() {
        assert_eq!(anomaly_count(0.0, 1000).unwrap(), 0);
        assert_eq!(anomaly_count(0.02, 1000).unwrap(), 20);
        assert_eq!(anomaly_count(0.02, 525_657).unwrap(), 10_728);
        assert!(anomaly_count(1.0, 10).is_err());
        assert!(anomaly_count(-0.1, 10).is_err());
    }

    #[test]
    fn clean_stream_holds_exactly_the_normals() {
        let normals = pool(50, 1.0);
        let spec = ContaminationSpec::new(0.0, 50, 9).unwrap();
        let (stream, audit) = contaminate(&normals, &[], &spec).unwrap();
        assert_eq!(stream.len(), 50);
        assert!(audit.anomalous_positions().is_empty());
        let mut got: Vec<f32> = stream.images().iter().map(|i| i.values()[0]).collect();
        got.sort_by(f32::total_cmp);
        let want: Vec<f32> = normals.iter().map(|i| i.values()[0]).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn audit_matches_stream() {
        let normals = pool(100, 1.0);
        let anomalies = pool(30, -1.0);
        let spec = ContaminationSpec::new(0.1, 100, 4).unwrap();
        let (stream, audit) = contaminate(&normals, &anomalies, &spec).unwrap();
        assert_eq!(spec.anomalies(), 11);
        assert_eq!(stream.len(), 111);
        for e in &audit.entries {
            let src = if e.anomalous { &anomalies[e.pool_index] } else { &normals[e.pool_index] };
            assert_eq!(&stream.images()[e.position], src);
        }
    }

    #[test]
    fn small_pool_is_an_error() {
        let spec = ContaminationSpec::new(0.5, 10, 0).unwrap();
        assert!(matches!(
            contaminate(&pool(10, 1.0), &pool(3, -1.0), &spec),
            Err(Error::InsufficientAnomalies { needed: 10, available: 3 })
        ));
    }
}
