//! Skew products over a ±1 Bernoulli base at desk scale: the shift-by-base-symbol
//! system, its cocycle, the sign-of-window partition, fiberwise mixing on cylinders
//! and towers read off a base orbit.

mod mixing;
mod sign;
mod system;
mod tower;

pub use mixing::{mixing_coefficient_at, relative_mixing_coefficient, MixingReport};
pub use sign::{
    counterexample_check, independence_forced_distance, shift_distance, sign_flip_probability,
    walk_probability, Convention, CounterexampleReport, Estimate, ShiftMethod,
};
pub use system::{BaseSequence, Cylinder, FiberSequence, SkewPoint, SkewProduct};
pub use tower::{build_tower_from_base, FiberTemplate, TowerSpec};

use thiserror::Error;

use crate::corrector::CorrectorError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RdsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("coordinate {coord} leaves the fiber window [{lo}, {hi}]; use a larger W")]
    Window { coord: i64, lo: i64, hi: i64 },
    #[error(transparent)]
    Corrector(#[from] CorrectorError),
}
