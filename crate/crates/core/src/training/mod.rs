//! Alternating optimization of the critic, generator and encoder.

mod config;
pub mod losses;
mod optim;
mod trainer;

pub use config::{EncoderMode, TrainConfig};
pub use losses::{CriticLoss, GenEncLoss};
pub use optim::Adam;
pub use trainer::{
    critic_step, encoder_step, generator_encoder_step, train, train_with, Optimizers, TrainHooks, TrainLogRecord,
    TrainLogWriter, TrainOutcome,
};
