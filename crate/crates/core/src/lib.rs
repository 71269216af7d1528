//! Simulation of federated learning over a shared wireless uplink, where a
//! drift-plus-penalty scheduler picks per-round selection probabilities and
//! transmit powers under long-term average power budgets.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod lambertw;
pub mod model;
pub mod rng;
pub mod scheduler;
pub mod simulator;

pub use config::{parse_config, parse_config_str, RunConfig};
pub use error::{Error, Result};
pub use lambertw::lambert_w0;
pub use simulator::{run, RoundRecord, RunOutput};
