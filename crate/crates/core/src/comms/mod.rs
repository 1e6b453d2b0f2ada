//! Signal models, samplers and baseline estimators for the experiments.

pub mod isi;
pub mod metrics;
pub mod radar;
pub mod rng;
pub mod trial;
