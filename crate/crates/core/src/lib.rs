pub mod acquisition;
pub mod baselines;
pub mod benchmarks;
pub mod design;
pub mod error;
pub mod gp;
pub mod harness;
pub mod metrics;
pub mod moo;
mod optim;
pub mod pareto;
pub mod usemo;

pub use error::{Error, Result};
