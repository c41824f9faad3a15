//! Para-active learning simulator: active-learning sifters running on many
//! nodes feed a passive updater, either in synchronous rounds or through an
//! asynchronous totally ordered broadcast. Includes sequential baselines,
//! a delayed importance-weighted active learner over finite classes, and
//! the matching cost/bound calculators.

pub mod cli;
pub mod data;
pub mod engine;
pub mod error;
pub mod learners;
pub mod metrics;
pub mod rng;
pub mod sampling;
pub mod verify;

pub use error::{Error, Result};
