//! Generator, critic and encoder networks plus the bundle that carries them
//! through training, checkpointing and scoring.

mod checkpoint;
mod downnet;
mod generator;
mod prior;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Conv2d, Linear};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub use checkpoint::{checkpoint_load, checkpoint_save, strip_discriminator, CHECKPOINT_VERSION};
pub use downnet::{Discriminator, DownBlock, DownNet, DownTraceAll, Encoder};
pub use generator::{Generator, GeneratorTrace, UpBlock};
pub use prior::{sample_prior, sample_prior_with, LatentVector, PriorDraw};

pub const DEFAULT_LATENT_DIM: usize = 512;

/// Current growth state: active resolution and how far its newest layers are faded in.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub resolution: usize,
    pub fade: f64,
}

impl Phase {
    pub fn new(resolution: usize, fade: f64) -> Result<Self> {
        if resolution < 4 || !resolution.is_power_of_two() {
            return Err(Error::UnsupportedResolution(resolution));
        }
        if !(0.0..=1.0).contains(&fade) {
            return Err(Error::InvalidConfig(format!("fade-in coefficient {fade} outside [0, 1]")));
        }
        Ok(Self { resolution, fade })
    }

    /// Stable phase at `resolution` (fade fully in).
    pub fn full(resolution: usize) -> Self {
        Self { resolution, fade: 1.0 }
    }

    /// 0 for 4×4, 1 for 8×8, ...
    pub fn level(&self) -> usize {
        (self.resolution.trailing_zeros() - 2) as usize
    }
}

/// Topology of one bundle. All three networks share channel width and depth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_latent_dim")]
    pub latent_dim: usize,
    #[serde(default = "default_channels")]
    pub channels: usize,
    #[serde(default = "default_image_channels")]
    pub image_channels: usize,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default)]
    pub init_seed: u64,
}

fn default_latent_dim() -> usize {
    DEFAULT_LATENT_DIM
}
fn default_channels() -> usize {
    16
}
fn default_image_channels() -> usize {
    1
}
fn default_resolution() -> usize {
    16
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            latent_dim: default_latent_dim(),
            channels: default_channels(),
            image_channels: default_image_channels(),
            resolution: default_resolution(),
            init_seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        Phase::new(self.resolution, 1.0)?;
        if self.latent_dim == 0 || self.channels == 0 || self.image_channels == 0 {
            return Err(Error::InvalidConfig("latent_dim, channels and image_channels must be positive".into()));
        }
        Ok(())
    }

    pub fn levels(&self) -> usize {
        Phase::full(self.resolution).level()
    }

    /// Resolutions from 4 up to the target, inclusive.
    pub fn resolutions(&self) -> Vec<usize> {
        (0..=self.levels()).map(|l| 4 << l).collect()
    }

    pub fn network_specs(&self) -> [NetworkSpec; 3] {
        let resolutions = self.resolutions();
        let spec = |kind, output: &str| NetworkSpec {
            kind,
            base_channels: self.channels,
            resolutions: resolutions.clone(),
            activation: "leaky_relu(0.2)".into(),
            normalization: "none".into(),
            output: output.into(),
        };
        [
            spec(NetworkKind::Generator, "tanh"),
            spec(NetworkKind::Discriminator, "linear(1)"),
            spec(NetworkKind::Encoder, &format!("linear({})", self.latent_dim)),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkKind {
    Generator,
    Discriminator,
    Encoder,
}

/// Descriptive topology record written into checkpoint manifests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub kind: NetworkKind,
    pub base_channels: usize,
    pub resolutions: Vec<usize>,
    pub activation: String,
    pub normalization: String,
    pub output: String,
}

/// Parameters θ_G, θ_D, θ_E with topology and growth state.
///
/// `discriminator` is `None` for scoring-only bundles loaded from checkpoints
/// whose critic section was removed.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle<T> {
    pub config: ModelConfig,
    pub generator: Generator<T>,
    pub discriminator: Option<Discriminator<T>>,
    pub encoder: Encoder<T>,
    pub phase: Phase,
}

impl<T: Scalar> ModelBundle<T> {
    /// Deterministic initialization from `config.init_seed`; phase starts fully at the target
    /// resolution (training rewinds it when growing progressively).
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let levels = config.levels();
        let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
        rng.set_stream(1);
        let generator = Generator::init(config.latent_dim, config.channels, config.image_channels, levels, &mut rng);
        rng.set_stream(2);
        let discriminator = DownNet::init(config.image_channels, config.channels, levels, 1, 1.0, &mut rng);
        rng.set_stream(3);
        let head_gain = 1.0 / (config.latent_dim as f64).sqrt();
        let encoder =
            DownNet::init(config.image_channels, config.channels, levels, config.latent_dim, head_gain, &mut rng);
        let phase = Phase::full(config.resolution);
        Ok(Self { config, generator, discriminator: Some(discriminator), encoder, phase })
    }

    pub fn discriminator(&self) -> Result<&Discriminator<T>> {
        self.discriminator.as_ref().ok_or(Error::MissingDiscriminator)
    }

    pub fn is_complete(&self) -> bool {
        self.phase.resolution == self.config.resolution && self.phase.fade == 1.0
    }

    /// Generate images at the current phase. `z` must match `latent_dim`.
    pub fn generate(&self, z: &[LatentVector<T>]) -> Result<Tensor<T>> {
        let zt = latent_batch(z, self.config.latent_dim)?;
        Ok(self.generator.forward(&zt, self.phase))
    }

    /// Encode a batch `[n, c, r, r]` at the current phase resolution.
    pub fn encode(&self, images: &Tensor<T>) -> Result<Vec<LatentVector<T>>> {
        check_image_batch(images, self.config.image_channels, self.phase.resolution)?;
        let out = self.encoder.forward(images, self.phase);
        Ok((0..out.batch()).map(|b| LatentVector(out.item(b).to_vec())).collect())
    }

    /// Critic scores of a batch at the current phase resolution.
    pub fn discriminate(&self, images: &Tensor<T>) -> Result<Vec<T>> {
        check_image_batch(images, self.config.image_channels, self.phase.resolution)?;
        Ok(self.discriminator()?.forward(images, self.phase).into_data())
    }

    /// Drops the critic and fixes the parameters for scoring. Fails if growth is incomplete.
    pub fn freeze(self) -> Result<FrozenModel<T>> {
        if !self.is_complete() {
            return Err(Error::NotFrozen { resolution: self.phase.resolution, fade: self.phase.fade });
        }
        Ok(FrozenModel { config: self.config, generator: self.generator, encoder: self.encoder })
    }

    /// Frozen copy that leaves this bundle intact.
    pub fn frozen(&self) -> Result<FrozenModel<T>> {
        let mut b = self.clone();
        b.discriminator = None;
        b.freeze()
    }

    /// All named tensors, prefixed by network.
    pub fn named_params(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (n, t) in self.generator.named_params() {
            out.push((format!("generator.{n}"), t));
        }
        if let Some(d) = &self.discriminator {
            for (n, t) in d.named_params() {
                out.push((format!("discriminator.{n}"), t));
            }
        }
        for (n, t) in self.encoder.named_params() {
            out.push((format!("encoder.{n}"), t));
        }
        out
    }
}

/// Test-time model: θ_G and θ_E only, at the final resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct FrozenModel<T> {
    pub config: ModelConfig,
    pub generator: Generator<T>,
    pub encoder: Encoder<T>,
}

impl<T: Scalar> FrozenModel<T> {
    pub fn phase(&self) -> Phase {
        Phase::full(self.config.resolution)
    }

    pub fn encode(&self, images: &Tensor<T>) -> Result<Vec<LatentVector<T>>> {
        check_image_batch(images, self.config.image_channels, self.config.resolution)?;
        let out = self.encoder.forward(images, self.phase());
        Ok((0..out.batch()).map(|b| LatentVector(out.item(b).to_vec())).collect())
    }

    pub fn generate(&self, z: &[LatentVector<T>]) -> Result<Tensor<T>> {
        let zt = latent_batch(z, self.config.latent_dim)?;
        Ok(self.generator.forward(&zt, self.phase()))
    }
}

pub(crate) fn latent_batch<T: Scalar>(z: &[LatentVector<T>], dim: usize) -> Result<Tensor<T>> {
    let rows: Vec<Vec<T>> = z.iter().map(|v| v.0.clone()).collect();
    for r in &rows {
        if r.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: r.len() });
        }
    }
    Tensor::stack(&rows, &[dim])
}

fn check_image_batch<T: Scalar>(images: &Tensor<T>, channels: usize, resolution: usize) -> Result<()> {
    if images.shape().len() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, got: images.shape().len() });
    }
    let (_, c, h, w) = images.dims4();
    if c != channels {
        return Err(Error::DimensionMismatch { expected: channels, got: c });
    }
    if h != resolution || w != resolution {
        return Err(Error::ResolutionMismatch { expected: resolution, got: h.max(w) });
    }
    Ok(())
}

pub(crate) fn named_conv<'a, T>(out: &mut Vec<(String, &'a Tensor<T>)>, prefix: &str, c: &'a Conv2d<T>) {
    out.push((format!("{prefix}.weight"), &c.weight));
    out.push((format!("{prefix}.bias"), &c.bias));
}

pub(crate) fn named_linear<'a, T>(out: &mut Vec<(String, &'a Tensor<T>)>, prefix: &str, l: &'a Linear<T>) {
    out.push((format!("{prefix}.weight"), &l.weight));
    out.push((format!("{prefix}.bias"), &l.bias));
}
