//! Extension of consistent families of nearly independent measures with prescribed
//! marginals, and perturbation of partitions on finite towers so that their iterates
//! become exactly independent on most fibers.

pub mod corrector;
pub mod extension;
pub mod measure;
pub mod rds;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
