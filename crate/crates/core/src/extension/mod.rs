//! Extension of a consistent family of finite-dimensional marginals to a
//! δ-independent measure on a window, one coordinate at a time.

mod claim;
mod hypotheses;
mod inclusion_exclusion;
mod oracle;
mod right_inverse;

pub use claim::{
    extend_family, extend_family_sequential, extend_one_index, ExtensionStep, ExtensionTrace,
    SequentialExtension, StepRecord,
};
pub use hypotheses::{verify_hypotheses, HypothesisReport, Violation};
pub use inclusion_exclusion::{inclusion_exclusion_extension, MAX_PARTS};
pub use oracle::{brute_force_extension_exists, FeasibilityProblem, OracleOutcome, ORACLE_MAX_CELLS};
pub use right_inverse::{bounded_right_inverse, ProjectionOperator, RightInverse};

use serde::Serialize;
use thiserror::Error;

use crate::measure::{IndexSet, MeasureError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtensionError {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("at index {index}: {source}")]
    AtIndex {
        index: i64,
        #[source]
        source: MeasureError,
    },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("members on {first} and {second} disagree by {gap:e}")]
    Inconsistent {
        first: IndexSet,
        second: IndexSet,
        gap: f64,
    },
    #[error("anchor pair is invalid: {0}")]
    Anchor(String),
    #[error("at index {index}: σ has negative mass {margin:e} at cell {cell:?}")]
    Positivity {
        index: i64,
        margin: f64,
        cell: Vec<usize>,
    },
    #[error("at index {index}: condition {condition} fails with gap {gap:e}")]
    Consistency {
        index: i64,
        condition: &'static str,
        gap: f64,
    },
    #[error("at index {index}: independence defect {defect:e} exceeds β = {beta:e}")]
    Independence { index: i64, defect: f64, beta: f64 },
    #[error("linear algebra failure: {0}")]
    Numerical(String),
}

impl ExtensionError {
    pub(crate) fn at(index: i64) -> impl FnOnce(MeasureError) -> ExtensionError {
        move |source| ExtensionError::AtIndex { index, source }
    }
}

/// The pair `(β, δ)` of the extension theorem:
/// `β = α^N / 2N` and `δ = β α^N / 4C′N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Thresholds {
    pub beta: f64,
    pub delta: f64,
}

pub fn thresholds(alpha: f64, n: usize, c_prime: f64) -> Result<Thresholds, ExtensionError> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(ExtensionError::Domain(format!("alpha {alpha} outside (0, 1/2]")));
    }
    if n == 0 || !(c_prime >= 1.0) {
        return Err(ExtensionError::Domain("need N ≥ 1 and C′ ≥ 1".into()));
    }
    let beta = alpha.powi(n as i32) / (2.0 * n as f64);
    let delta = beta * alpha.powi(n as i32) / (4.0 * c_prime * n as f64);
    Ok(Thresholds { beta, delta })
}
