pub mod error;
pub mod model;
pub mod slo_dist;
pub mod search;
pub mod baselines;
pub mod dispatch;
pub mod cluster_sim;
pub mod workload;
pub mod metrics;
pub mod scenario;

pub use error::{Error, Result};
