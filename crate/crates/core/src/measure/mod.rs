//! Finite measures on product spaces `A^K`: projections, products, distances,
//! consistency, conditioning and δ-independence.
//!
//! All operations are pure: they take measures by reference and return fresh values.

mod dense;
mod family;
mod index;
mod literal;

pub use dense::{
    cell_count, consistency_gap, is_consistent, relative_product, sup_distance, DenseMeasure,
    IndexOrder, MeasureKind, NullAtoms, SCAN_ALL_LIMIT,
};
pub(crate) use dense::{for_each_cell, sub_strides};
pub use family::MarginalFamily;
pub use index::{Alphabet, IndexSet};
pub use literal::{FamilySpec, MeasureLiteral, MemberSpec};

use thiserror::Error;

/// Default tolerance for probability and consistency checks.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Hard cap on the number of cells of a dense table.
pub const MAX_CELLS: usize = 1 << 24;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("capacity exceeded: {cells} cells/items requested, cap is {cap}")]
    Capacity { cells: String, cap: usize },
    #[error("table length {got} does not match the expected {expected}")]
    Length { expected: usize, got: usize },
    #[error("not a probability measure: {0}")]
    NotProbability(String),
    #[error("zero-mass conditioning atom: {0}")]
    ZeroMass(String),
    #[error("inconsistent measures: projection gap {gap:e} exceeds tolerance {tol:e}")]
    Inconsistent { gap: f64, tol: f64 },
    #[error("singular relative product: {0}")]
    Singular(String),
}
