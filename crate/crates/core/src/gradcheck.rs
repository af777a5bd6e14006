//! Central finite differences for checking analytic parameter gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::model::{ModelBundle, ModelConfig, Phase};
use crate::tensor::Tensor;
use crate::training::losses::{
    critic_loss_and_grad, critic_objective, generator_encoder_grads, generator_encoder_objective, PhasedCritic,
};
use crate::training::EncoderMode;

/// Starting step for [`central_differences`].
pub const STEP: f64 = 1e-6;

/// Central differences of `f` with respect to every parameter exposed by `params`.
///
/// When the forward and backward quotients disagree, an activation kink sits
/// inside the step and the step is shrunk until it no longer does.
pub fn central_differences<N: Clone>(
    net: &N,
    params: impl Fn(&mut N) -> Vec<&mut Tensor<f64>>,
    f: impl Fn(&N) -> f64,
) -> Vec<f64> {
    let mut probe = net.clone();
    let sizes: Vec<usize> = params(&mut probe).iter().map(|t| t.len()).collect();
    let at = |ti: usize, i: usize, d: f64| {
        let mut n = net.clone();
        params(&mut n)[ti].data_mut()[i] += d;
        f(&n)
    };
    let mut out = Vec::with_capacity(sizes.iter().sum());
    for (ti, &len) in sizes.iter().enumerate() {
        for i in 0..len {
            let centre = at(ti, i, 0.0);
            let mut h = STEP;
            let estimate = loop {
                let (p, m) = (at(ti, i, h), at(ti, i, -h));
                let (fwd, bwd) = ((p - centre) / h, (centre - m) / h);
                if (fwd - bwd).abs() <= 1e-3 * (fwd.abs() + bwd.abs()) + 1e-6 || h <= 1e-9 {
                    break (p - m) / (2.0 * h);
                }
                h /= 10.0;
            };
            out.push(estimate);
        }
    }
    out
}

/// `‖analytic − numeric‖₂ / ‖numeric‖₂`.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient lengths");
    let diff = analytic.iter().zip(numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let scale = numeric.iter().map(|b| b * b).sum::<f64>().sqrt().max(1e-12);
    diff / scale
}

/// All parameter values of a network, in `params_mut` order.
pub fn flatten(tensors: Vec<&mut Tensor<f64>>) -> Vec<f64> {
    tensors.into_iter().flat_map(|t| t.data().to_vec()).collect()
}

/// Geometry of the toy networks: a few hundred parameters per network.
pub fn toy_config(seed: u64) -> ModelConfig {
    ModelConfig { latent_dim: 3, channels: 2, image_channels: 1, resolution: 8, init_seed: seed }
}

/// Odd seeds check the fade-in blend, even seeds the settled network.
pub fn toy_phase(seed: u64) -> Phase {
    Phase { resolution: 8, fade: if seed % 2 == 1 { 0.4 } else { 1.0 } }
}

/// Uniform entries in `[-scale, scale)`.
pub fn uniform_tensor(rng: &mut impl Rng, shape: &[usize], scale: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-scale..scale)).collect()).expect("shape")
}

/// Rows of unit length.
pub fn unit_rows(rng: &mut impl Rng, n: usize, dim: usize) -> Tensor<f64> {
    let mut t = uniform_tensor(rng, &[n, dim], 1.0);
    for b in 0..n {
        let norm = t.item(b).iter().map(|v| v * v).sum::<f64>().sqrt();
        t.item_mut(b).iter_mut().for_each(|v| *v /= norm);
    }
    t
}

/// Relative gradient errors of one toy configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToyErrors {
    /// Critic loss including the gradient penalty, w.r.t. θ_D.
    pub critic: f64,
    /// Generator loss + d_I, w.r.t. θ_G and θ_E.
    pub image_space: (f64, f64),
    /// Generator loss + d_z, w.r.t. θ_G and θ_E.
    pub latent_space: (f64, f64),
}

impl ToyErrors {
    pub fn max(&self) -> f64 {
        [self.critic, self.image_space.0, self.image_space.1, self.latent_space.0, self.latent_space.1]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Analytic against numeric gradients for every trained loss on toy networks in f64.
pub fn toy_gradient_errors(seed: u64) -> Result<ToyErrors> {
    let b = ModelBundle::<f64>::new(toy_config(seed))?;
    let phase = toy_phase(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let disc = b.discriminator()?.clone();

    let real = uniform_tensor(&mut rng, &[3, 1, 8, 8], 1.0);
    let fake = uniform_tensor(&mut rng, &[3, 1, 8, 8], 1.0);
    let eps: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
    let (_, mut g_disc) = critic_loss_and_grad(&disc, phase, &real, &fake, &eps, 10.0);
    let fd = central_differences(&disc, |n| n.params_mut(), |n| {
        critic_objective(&PhasedCritic { net: n, phase }, &real, &fake, &eps, 10.0).loss
    });
    let critic = relative_error(&flatten(g_disc.params_mut()), &fd);

    let z = unit_rows(&mut rng, 3, 3);
    let joint = |mode: EncoderMode| {
        let (gen, enc) = (&b.generator, &b.encoder);
        let (_, mut g_gen, mut g_enc) = generator_encoder_grads(gen, &disc, enc, phase, &z, mode, false);
        let total = |g: &_, e: &_| {
            let l = generator_encoder_objective(g, &disc, e, phase, &z, mode);
            l.generator + l.encoder
        };
        let fd_gen = central_differences(gen, |n| n.params_mut(), |n| total(n, enc));
        let fd_enc = central_differences(enc, |n| n.params_mut(), |n| total(gen, n));
        (relative_error(&flatten(g_gen.params_mut()), &fd_gen), relative_error(&flatten(g_enc.params_mut()), &fd_enc))
    };
    let image_space = joint(EncoderMode::JointImageSpace);
    let latent_space = joint(EncoderMode::JointLatentSpace);
    Ok(ToyErrors { critic, image_space, latent_space })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_and_kinked_functions() {
        let x = Tensor::from_vec(&[3], vec![0.5, -2.0, 1e-8]).unwrap();
        let g = central_differences(&x, |t| vec![t], |t| {
            let d = t.data();
            d[0] * d[0] + 3.0 * d[1] + d[2].abs()
        });
        assert!((g[0] - 1.0).abs() < 1e-8);
        assert!((g[1] - 3.0).abs() < 1e-8);
        assert!((g[2] - 1.0).abs() < 1e-6, "kink at 0 within the first step: {}", g[2]);
        assert_eq!(relative_error(&[1.0, 0.0], &[1.0, 0.0]), 0.0);
    }
}
