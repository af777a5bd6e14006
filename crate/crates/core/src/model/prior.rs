use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A point in latent space (z or ẑ). Never renormalized after encoding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentVector<T>(pub Vec<T>);

impl<T: Scalar> LatentVector<T> {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> T {
        self.0.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }
}

/// Prior samples: the raw Gaussian draws and their unit-length versions fed to 𝒢.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorDraw<T> {
    pub raw: Vec<LatentVector<T>>,
    pub unit: Vec<LatentVector<T>>,
}

/// Draws `n` vectors from 𝒩(0, I) in `dim` dimensions and rescales each to unit ℓ2 length.
pub fn sample_prior<T: Scalar>(n: usize, dim: usize, seed: u64) -> Result<PriorDraw<T>> {
    sample_prior_with(&mut ChaCha8Rng::seed_from_u64(seed), n, dim)
}

pub fn sample_prior_with<T: Scalar, R: Rng>(rng: &mut R, n: usize, dim: usize) -> Result<PriorDraw<T>> {
    if n == 0 || dim == 0 {
        return Err(Error::InvalidConfig("prior needs n ≥ 1 and dim ≥ 1".into()));
    }
    let mut raw = Vec::with_capacity(n);
    let mut unit = Vec::with_capacity(n);
    for _ in 0..n {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        unit.push(LatentVector(v.iter().map(|&x| T::lit(x / norm)).collect()));
        raw.push(LatentVector(v.into_iter().map(T::lit).collect()));
    }
    Ok(PriorDraw { raw, unit })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_vectors_have_unit_norm() {
        let d = sample_prior::<f64>(50, 512, 9).unwrap();
        for v in &d.unit {
            assert!((v.norm() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn raw_coefficients_are_centred() {
        // Monte-Carlo oracle: mean of 1e5 standard normals has std 1/sqrt(1e5) ≈ 0.0032.
        let d = sample_prior::<f64>(200, 500, 11).unwrap();
        let all: Vec<f64> = d.raw.iter().flat_map(|v| v.0.iter().copied()).collect();
        assert_eq!(all.len(), 100_000);
        let mean = all.iter().sum::<f64>() / all.len() as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        let var = all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / all.len() as f64;
        assert!((var - 1.0).abs() < 0.03, "var {var}");
    }

    #[test]
    fn seeded_draws_repeat() {
        assert_eq!(sample_prior::<f32>(4, 16, 5).unwrap(), sample_prior::<f32>(4, 16, 5).unwrap());
        assert!(sample_prior::<f32>(0, 16, 5).is_err());
    }
}
