use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{images_to_tensor, TrainStream};
use crate::error::{Error, Result};
use crate::model::{sample_prior_with, ModelBundle, ModelConfig, Phase};
use crate::nn::avgpool2;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::losses::{critic_loss_and_grad, encoder_only_grads, generator_encoder_grads, CriticLoss, GenEncLoss};
use super::optim::Adam;
use super::{EncoderMode, TrainConfig};

/// One row of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRecord {
    pub step: usize,
    pub phase_resolution: usize,
    pub fade: f64,
    pub batch_size: usize,
    pub critic_loss: f64,
    pub wasserstein: f64,
    pub gradient_penalty: f64,
    pub generator_loss: f64,
    pub encoder_loss: f64,
    /// Seconds since training started.
    pub wall_time: f64,
}

/// Callbacks invoked by [`train_with`].
pub trait TrainHooks<T> {
    fn record(&mut self, _record: &TrainLogRecord) -> Result<()> {
        Ok(())
    }
    /// Called after each growth phase (and after the post-hoc encoder stage) with its label.
    fn phase_end(&mut self, _label: &str, _bundle: &ModelBundle<T>) -> Result<()> {
        Ok(())
    }
}

impl<T> TrainHooks<T> for () {}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome<T> {
    pub bundle: ModelBundle<T>,
    pub log: Vec<TrainLogRecord>,
}

pub fn train<T: Scalar>(stream: &TrainStream, model: &ModelConfig, config: &TrainConfig) -> Result<TrainOutcome<T>> {
    train_with(stream, model, config, &mut ())
}

/// Average-pools `[n, c, r, r]` down to `[n, c, target, target]`.
fn downsample<T: Scalar>(x: &Tensor<T>, target: usize) -> Tensor<T> {
    let mut out = x.clone();
    while out.dims4().2 > target {
        out = avgpool2(&out);
    }
    out
}

fn gather<T: Scalar>(pool: &Tensor<T>, idx: &[usize]) -> Tensor<T> {
    let (_, c, h, w) = pool.dims4();
    let mut data = Vec::with_capacity(idx.len() * pool.item_len());
    for &i in idx {
        data.extend_from_slice(pool.item(i));
    }
    Tensor::from_vec(&[idx.len(), c, h, w], data).expect("gathered shape")
}

fn latent_tensor<T: Scalar, R: Rng>(rng: &mut R, n: usize, dim: usize) -> Result<Tensor<T>> {
    let draw = sample_prior_with::<T, R>(rng, n, dim)?;
    let mut data = Vec::with_capacity(n * dim);
    for v in draw.unit {
        data.extend(v.0);
    }
    Tensor::from_vec(&[n, dim], data)
}

fn check_finite(values: &[(&str, f64)], phase: Phase) -> Result<()> {
    if values.iter().all(|(_, v)| v.is_finite()) {
        return Ok(());
    }
    let detail: Vec<String> = values.iter().map(|(k, v)| format!("{k}={v}")).collect();
    Err(Error::NonFinite(format!("resolution {}, fade {}: {}", phase.resolution, phase.fade, detail.join(", "))))
}

fn at_step<V>(step: usize, r: Result<V>) -> Result<V> {
    r.map_err(|e| match e {
        Error::NonFinite(m) => Error::NonFinite(format!("step {step}, {m}")),
        other => other,
    })
}

fn check_stream(stream: &TrainStream, model: &ModelConfig) -> Result<()> {
    if stream.is_empty() {
        return Err(Error::EmptyStream);
    }
    for img in stream.images() {
        if img.width() != model.resolution || img.height() != model.resolution {
            return Err(Error::ResolutionMismatch { expected: model.resolution, got: img.width() });
        }
        if img.depth() != model.image_channels {
            return Err(Error::DimensionMismatch { expected: model.image_channels, got: img.depth() });
        }
    }
    Ok(())
}

/// One Adam state per network.
#[derive(Clone, Debug)]
pub struct Optimizers<T> {
    pub generator: Adam<T>,
    pub discriminator: Adam<T>,
    pub encoder: Adam<T>,
}

impl<T: Scalar> Optimizers<T> {
    pub fn new(config: &TrainConfig) -> Self {
        let adam = || Adam::new(config.learning_rate, config.beta1, config.beta2, config.adam_epsilon);
        Self { generator: adam(), discriminator: adam(), encoder: adam() }
    }
}

fn apply<T: Scalar, N>(opt: &mut Adam<T>, net: &mut N, grad: &mut N, params: impl Fn(&mut N) -> Vec<&mut Tensor<T>>) {
    let grads: Vec<&Tensor<T>> = params(grad).into_iter().map(|g| &*g).collect();
    opt.update(params(net), grads);
}

/// Updates θ_D on one batch of real images and prior draws `z` (unit length).
/// Nothing is modified when the loss is not finite.
pub fn critic_step<T: Scalar>(
    bundle: &mut ModelBundle<T>,
    real: &Tensor<T>,
    z: &Tensor<T>,
    eps: &[T],
    config: &TrainConfig,
    opt: &mut Adam<T>,
) -> Result<CriticLoss<T>> {
    if real.batch() != z.batch() || eps.len() != z.batch() {
        return Err(Error::DimensionMismatch { expected: real.batch(), got: z.batch() });
    }
    let phase = bundle.phase;
    let fake = bundle.generator.forward(z, phase);
    let disc = bundle.discriminator.as_mut().ok_or(Error::MissingDiscriminator)?;
    let (loss, mut grad) = critic_loss_and_grad(disc, phase, real, &fake, eps, T::lit(config.gp_weight));
    check_finite(
        &[
            ("critic_loss", loss.loss.real()),
            ("wasserstein", loss.wasserstein.real()),
            ("gradient_penalty", loss.gradient_penalty.real()),
        ],
        phase,
    )?;
    apply(opt, disc, &mut grad, |n| n.params_mut());
    Ok(loss)
}

/// Updates θ_G, and θ_E in the joint modes, on one batch of prior draws.
/// θ_D is read but never written.
pub fn generator_encoder_step<T: Scalar>(
    bundle: &mut ModelBundle<T>,
    z: &Tensor<T>,
    config: &TrainConfig,
    opts: &mut Optimizers<T>,
) -> Result<GenEncLoss<T>> {
    let phase = bundle.phase;
    let disc = bundle.discriminator.as_ref().ok_or(Error::MissingDiscriminator)?;
    let (loss, mut g_gen, mut g_enc) = generator_encoder_grads(
        &bundle.generator,
        disc,
        &bundle.encoder,
        phase,
        z,
        config.encoder_mode,
        config.stop_inner_gradient,
    );
    check_finite(&[("generator_loss", loss.generator.real()), ("encoder_loss", loss.encoder.real())], phase)?;
    apply(&mut opts.generator, &mut bundle.generator, &mut g_gen, |n| n.params_mut());
    if config.encoder_mode != EncoderMode::PostHoc {
        apply(&mut opts.encoder, &mut bundle.encoder, &mut g_enc, |n| n.params_mut());
    }
    Ok(loss)
}

/// Encoder-only update against the current (frozen) generator, minimizing d_I.
pub fn encoder_step<T: Scalar>(bundle: &mut ModelBundle<T>, z: &Tensor<T>, opt: &mut Adam<T>) -> Result<T> {
    let phase = bundle.phase;
    let (d_i, mut g_enc) = encoder_only_grads(&bundle.generator, &bundle.encoder, phase, z);
    check_finite(&[("encoder_loss", d_i.real())], phase)?;
    apply(opt, &mut bundle.encoder, &mut g_enc, |n| n.params_mut());
    Ok(d_i)
}

/// Runs the growth schedule, alternating `n_critic` critic updates with one
/// generator/encoder update per outer step.
pub fn train_with<T: Scalar>(
    stream: &TrainStream,
    model: &ModelConfig,
    config: &TrainConfig,
    hooks: &mut dyn TrainHooks<T>,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    model.validate()?;
    check_stream(stream, model)?;
    let resolutions = config.phase_resolutions(model.resolution);
    if resolutions.last() != Some(&model.resolution) || resolutions.iter().any(|r| !model.resolutions().contains(r)) {
        return Err(Error::PhaseSchedule(format!(
            "phases {resolutions:?} do not end at target resolution {}",
            model.resolution
        )));
    }

    let start = Instant::now();
    let mut bundle = ModelBundle::<T>::new(model.clone())?;
    let full: Tensor<T> = images_to_tensor(stream.images());
    let mut data_rng = ChaCha8Rng::seed_from_u64(config.seed);
    data_rng.set_stream(1);
    let mut prior_rng = ChaCha8Rng::seed_from_u64(config.seed);
    prior_rng.set_stream(2);
    let mut mix_rng = ChaCha8Rng::seed_from_u64(config.seed);
    mix_rng.set_stream(3);

    let mut opts = Optimizers::new(config);
    let n = full.batch();
    let mut log = Vec::new();
    let mut step = 0usize;

    for (pi, &res) in resolutions.iter().enumerate() {
        let pool = downsample(&full, res);
        let batch = config.batch_size(pi, resolutions.len());
        for s in 0..config.steps_per_phase {
            bundle.phase = Phase::new(res, config.fade_at(pi, s))?;

            let mut critic = None;
            for _ in 0..config.n_critic {
                let idx: Vec<usize> = (0..batch).map(|_| data_rng.random_range(0..n)).collect();
                let real = gather(&pool, &idx);
                let z = latent_tensor::<T, _>(&mut prior_rng, batch, model.latent_dim)?;
                let eps: Vec<T> = (0..batch).map(|_| T::lit(mix_rng.random::<f64>())).collect();
                critic = Some(at_step(step, critic_step(&mut bundle, &real, &z, &eps, config, &mut opts.discriminator))?);
            }
            let critic = critic.expect("n_critic ≥ 1");

            let z = latent_tensor::<T, _>(&mut prior_rng, batch, model.latent_dim)?;
            let ge = at_step(step, generator_encoder_step(&mut bundle, &z, config, &mut opts))?;

            if step.is_multiple_of(config.log_every) || s + 1 == config.steps_per_phase {
                let rec = TrainLogRecord {
                    step,
                    phase_resolution: res,
                    fade: bundle.phase.fade,
                    batch_size: batch,
                    critic_loss: critic.loss.real(),
                    wasserstein: critic.wasserstein.real(),
                    gradient_penalty: critic.gradient_penalty.real(),
                    generator_loss: ge.generator.real(),
                    encoder_loss: ge.encoder.real(),
                    wall_time: start.elapsed().as_secs_f64(),
                };
                hooks.record(&rec)?;
                log.push(rec);
            }
            step += 1;
        }
        bundle.phase = Phase::full(res);
        hooks.phase_end(&format!("phase{pi}_res{res}"), &bundle)?;
    }
    bundle.phase = Phase::full(model.resolution);

    if config.encoder_mode == EncoderMode::PostHoc {
        let batch = config.batch_end;
        let total = config.posthoc_steps();
        for s in 0..total {
            let z = latent_tensor::<T, _>(&mut prior_rng, batch, model.latent_dim)?;
            let d_i = at_step(step, encoder_step(&mut bundle, &z, &mut opts.encoder))?;
            if step.is_multiple_of(config.log_every) || s + 1 == total {
                let rec = TrainLogRecord {
                    step,
                    phase_resolution: model.resolution,
                    fade: 1.0,
                    batch_size: batch,
                    critic_loss: f64::NAN,
                    wasserstein: f64::NAN,
                    gradient_penalty: f64::NAN,
                    generator_loss: f64::NAN,
                    encoder_loss: d_i.real(),
                    wall_time: start.elapsed().as_secs_f64(),
                };
                hooks.record(&rec)?;
                log.push(rec);
            }
            step += 1;
        }
        hooks.phase_end("posthoc_encoder", &bundle)?;
    }
    Ok(TrainOutcome { bundle, log })
}

/// Append-only CSV writer for [`TrainLogRecord`]s.
pub struct TrainLogWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl TrainLogWriter<std::fs::File> {
    pub fn create(path: &Path) -> Result<Self> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(Self { inner: csv::Writer::from_writer(file) })
    }
}

impl<W: Write> TrainLogWriter<W> {
    pub fn new(writer: W) -> Self {
        Self { inner: csv::Writer::from_writer(writer) }
    }

    pub fn append(&mut self, record: &TrainLogRecord) -> Result<()> {
        self.inner.serialize(record)?;
        self.inner.flush().map_err(|e| Error::io("<train log>", e))
    }

    pub fn into_inner(self) -> Result<W> {
        self.inner.into_inner().map_err(|e| Error::io("<train log>", e.into_error()))
    }
}
