//! Analytic gradients against central finite differences on small networks in f64.

use encgan::gradcheck::{
    central_differences, flatten, relative_error, toy_config, toy_gradient_errors, toy_phase, uniform_tensor,
    unit_rows,
};
use encgan::model::{ModelBundle, Phase};
use encgan::tensor::Tensor;
use encgan::training::losses::{
    encoder_only_grads, generator_encoder_grads, image_reconstruction_loss, Critic, PhasedCritic,
};
use encgan::training::EncoderMode;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-4;
const SEEDS: u64 = 10;

fn toy(seed: u64) -> ModelBundle<f64> {
    ModelBundle::new(toy_config(seed)).unwrap()
}

#[test]
fn toy_networks_are_small() {
    let mut b = toy(0);
    let count = |v: Vec<&mut Tensor<f64>>| v.iter().map(|t| t.len()).sum::<usize>();
    let d = count(b.discriminator.as_mut().unwrap().params_mut());
    let g = count(b.generator.params_mut());
    let e = count(b.encoder.params_mut());
    assert!(d <= 500, "critic has {d} parameters");
    assert!(g + e <= 500, "generator + encoder have {} parameters", g + e);
}

#[test]
fn critic_input_gradient() {
    for seed in 0..SEEDS {
        let b = toy(seed);
        let phase = toy_phase(seed);
        let x = uniform_tensor(&mut ChaCha8Rng::seed_from_u64(100 + seed), &[2, 1, 8, 8], 1.0);
        let disc = b.discriminator.as_ref().unwrap();
        let analytic = PhasedCritic { net: disc, phase }.input_gradients(&x);
        let fd = central_differences(&x, |t| vec![t], |t| disc.forward(t, phase).data().iter().sum());
        let err = relative_error(analytic.data(), &fd);
        assert!(err < TOL, "seed {seed}: relative error {err:e}");
    }
}

#[test]
fn every_trained_loss_on_ten_seeds() {
    for seed in 0..SEEDS {
        let e = toy_gradient_errors(seed).unwrap();
        assert!(e.max() < TOL, "seed {seed}: {e:?}");
    }
}

#[test]
fn encoder_only_gradient() {
    for seed in 0..SEEDS {
        let b = toy(seed);
        let phase = Phase::full(8);
        let z = unit_rows(&mut ChaCha8Rng::seed_from_u64(400 + seed), 3, 3);
        let gen = &b.generator;
        let (_, mut g_enc) = encoder_only_grads(gen, &b.encoder, phase, &z);
        let fd = central_differences(&b.encoder, |n| n.params_mut(), |n| {
            image_reconstruction_loss(|t| gen.forward(t, phase), |t| n.forward(t, phase), &z)
        });
        let err = relative_error(&flatten(g_enc.params_mut()), &fd);
        assert!(err < TOL, "seed {seed}: relative error {err:e}");
    }
}

#[test]
fn stop_gradient_leaves_encoder_gradient_unchanged() {
    let b = toy(3);
    let phase = Phase::full(8);
    let z = unit_rows(&mut ChaCha8Rng::seed_from_u64(9), 2, 3);
    let disc = b.discriminator.clone().unwrap();
    let mode = EncoderMode::JointImageSpace;
    let (l1, mut g1, mut e1) = generator_encoder_grads(&b.generator, &disc, &b.encoder, phase, &z, mode, false);
    let (l2, mut g2, mut e2) = generator_encoder_grads(&b.generator, &disc, &b.encoder, phase, &z, mode, true);
    assert_eq!(l1, l2);
    assert_eq!(flatten(e1.params_mut()), flatten(e2.params_mut()));
    assert_ne!(flatten(g1.params_mut()), flatten(g2.params_mut()));
}
