//! GAN-based anomaly detection with an encoder trained jointly with the
//! generator.
//!
//! Numeric code is generic over [`Scalar`]; the aliases below fix the
//! precision for the common cases. Training and scoring normally run in
//! `f32`, gradient checks in `f64`.

pub mod data;
pub mod dual;
pub mod error;
pub mod evaluation;
pub mod gradcheck;
pub mod model;
pub mod nn;
pub mod scalar;
pub mod scoring;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Bundle = model::ModelBundle<f32>;
pub type Bundle64 = model::ModelBundle<f64>;
pub type Frozen = model::FrozenModel<f32>;
pub type Frozen64 = model::FrozenModel<f64>;
pub type Latent = model::LatentVector<f32>;
pub type Latent64 = model::LatentVector<f64>;
pub type Report = scoring::ScoreReport<f32>;
pub type Report64 = scoring::ScoreReport<f64>;
pub type Outcome = training::TrainOutcome<f32>;
pub type Outcome64 = training::TrainOutcome<f64>;
