use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the encoder is trained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderMode {
    /// Jointly with 𝒢, image-space reconstruction loss d_I.
    JointImageSpace,
    /// Jointly with 𝒢, latent-space reconstruction loss d_z.
    JointLatentSpace,
    /// After GAN training, against a frozen 𝒢, minimizing d_I.
    PostHoc,
}

impl EncoderMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            EncoderMode::JointImageSpace => "joint_image_space",
            EncoderMode::JointLatentSpace => "joint_latent_space",
            EncoderMode::PostHoc => "post_hoc",
        }
    }
}

impl std::fmt::Display for EncoderMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub encoder_mode: EncoderMode,
    pub n_critic: usize,
    pub gp_weight: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    /// Batch size in the first growth phase.
    pub batch_start: usize,
    /// Batch size in the last growth phase (and the only one without growing).
    pub batch_end: usize,
    /// Outer iterations per growth phase.
    pub steps_per_phase: usize,
    /// Encoder-only iterations after GAN training in post-hoc mode; defaults to `steps_per_phase`.
    pub posthoc_steps: Option<usize>,
    /// Progressive growing; `None` enables it for target resolutions ≥ 16.
    pub progressive: Option<bool>,
    /// Detach the inner 𝒢(z) from the encoder loss (only the reconstruction path trains θ_G).
    pub stop_inner_gradient: bool,
    pub seed: u64,
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            encoder_mode: EncoderMode::JointImageSpace,
            n_critic: 1,
            gp_weight: 10.0,
            learning_rate: 1e-3,
            beta1: 0.0,
            beta2: 0.99,
            adam_epsilon: 1e-8,
            batch_start: 32,
            batch_end: 16,
            steps_per_phase: 1000,
            posthoc_steps: None,
            progressive: None,
            stop_inner_gradient: false,
            seed: 0,
            log_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_critic == 0 {
            return bad("n_critic must be positive");
        }
        if self.gp_weight.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return bad("gp_weight must be positive");
        }
        if self.learning_rate.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("moment decays must lie in [0, 1)");
        }
        if self.batch_start == 0 || self.batch_end == 0 {
            return bad("batch sizes must be positive");
        }
        if self.log_every == 0 {
            return bad("log_every must be positive");
        }
        Ok(())
    }

    pub fn is_progressive(&self, target_resolution: usize) -> bool {
        self.progressive.unwrap_or(target_resolution >= 16)
    }

    /// Resolutions trained, in order.
    pub fn phase_resolutions(&self, target_resolution: usize) -> Vec<usize> {
        if self.is_progressive(target_resolution) {
            let mut r = vec![4];
            while *r.last().expect("non-empty") < target_resolution {
                r.push(r.last().expect("non-empty") * 2);
            }
            r
        } else {
            vec![target_resolution]
        }
    }

    /// Batch size for phase `index` of `count`, interpolated linearly from start to end.
    pub fn batch_size(&self, index: usize, count: usize) -> usize {
        if count <= 1 {
            return self.batch_end;
        }
        let t = index as f64 / (count - 1) as f64;
        let b = self.batch_start as f64 + (self.batch_end as f64 - self.batch_start as f64) * t;
        (b.round() as usize).max(1)
    }

    /// Fade-in coefficient at `step` of a phase: linear over the first half, then 1.
    /// The first phase (and non-progressive runs) have nothing to fade in.
    pub fn fade_at(&self, phase_index: usize, step: usize) -> f64 {
        if phase_index == 0 || self.steps_per_phase < 2 {
            return 1.0;
        }
        let half = self.steps_per_phase as f64 / 2.0;
        (step as f64 / half).min(1.0)
    }

    pub fn posthoc_steps(&self) -> usize {
        self.posthoc_steps.unwrap_or(self.steps_per_phase)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules() {
        let c = TrainConfig { batch_start: 128, batch_end: 32, steps_per_phase: 10, ..Default::default() };
        assert_eq!(c.phase_resolutions(16), vec![4, 8, 16]);
        assert_eq!(c.phase_resolutions(8), vec![8]);
        assert_eq!((0..3).map(|i| c.batch_size(i, 3)).collect::<Vec<_>>(), vec![128, 80, 32]);
        assert_eq!(c.fade_at(0, 0), 1.0);
        assert_eq!(c.fade_at(1, 0), 0.0);
        assert_eq!(c.fade_at(1, 2), 0.4);
        assert_eq!(c.fade_at(1, 5), 1.0);
        assert_eq!(c.fade_at(1, 9), 1.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<TrainConfig>(r#"{"n_critc": 2}"#).unwrap_err();
        assert!(err.to_string().contains("n_critc"));
    }
}
