//! Perturbing a partition on a finite Rokhlin tower so that its iterates along
//! chosen times become independent: names on towers, correcting measures,
//! painting, the iterated construction and exact fiber surgery.

mod krengel;
mod paint;
mod rounding;
mod spec;
mod surgery;
mod tower;

pub use krengel::{iterate_krengel, KrengelConfig, KrengelOutcome, KrengelStep};
pub use paint::{
    paint_tower, BudgetChecks, ExtensionSummary, PaintConfig, PaintOutcome, PaintReport,
    ShiftRecord, ShiftStatus,
};
pub use rounding::{largest_remainder, round_matrix};
pub use spec::{Generator, LabelSpec, TowerFile};
pub use surgery::{fiber_surgery, SurgeryReport};
pub use tower::{name_distribution, LabeledPartition, LevelFlags, Tower, Transfer, MAX_TOWER_CELLS};

use rayon::prelude::*;
use thiserror::Error;

use crate::extension::ExtensionError;
use crate::measure::{
    sup_distance, DenseMeasure, IndexSet, MeasureError, MeasureKind, NullAtoms, IndexOrder,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CorrectorError {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Extension(#[from] ExtensionError),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("correcting measure is negative at cell {cell:?} (mass {margin:e})")]
    NegativeCell { cell: Vec<usize>, margin: f64 },
    #[error("quantization: {0}")]
    Quantization(String),
    #[error("no usable mixing time at step {step}: {detail}")]
    MixingSupply { step: usize, detail: String },
}

/// `η = (1/10) · (α^{k+1}/2) · δ · ε`.
pub fn choose_eta(alpha: f64, k: usize, delta: f64, epsilon: f64) -> Result<f64, CorrectorError> {
    if !(alpha > 0.0 && delta > 0.0 && epsilon > 0.0) || k == 0 {
        return Err(CorrectorError::Domain("choose_eta needs positive arguments".into()));
    }
    Ok(0.1 * alpha.powi(k as i32 + 1) / 2.0 * delta * epsilon)
}

/// `ξ = (target − (1 − t)·ν) / t`, so that `(1 − t)ν + tξ = target`.
///
/// Fails with [`CorrectorError::NegativeCell`] if ξ has a negative cell.
pub fn correcting_measure_toward(
    nu: &DenseMeasure,
    target: &DenseMeasure,
    t: f64,
) -> Result<DenseMeasure, CorrectorError> {
    if !(t > 0.0 && t < 1.0) {
        return Err(CorrectorError::Domain(format!("blend weight {t} outside (0, 1)")));
    }
    let blended = target.linear_combination(1.0 / t, nu, -(1.0 - t) / t)?;
    let margin = blended.min_cell();
    if margin < -1e-12 {
        let c = blended
            .table()
            .iter()
            .position(|&x| x == margin)
            .unwrap_or_default();
        return Err(CorrectorError::NegativeCell {
            cell: blended.digits_of(c),
            margin,
        });
    }
    let table = blended.table().iter().map(|&x| x.max(0.0)).collect();
    Ok(DenseMeasure::new(
        nu.alphabet(),
        nu.support().clone(),
        table,
        MeasureKind::Probability,
    )?)
}

/// The correcting measure toward the product of `ν`'s one-dimensional marginals
/// (given explicitly as measures on single coordinates).
pub fn correcting_measure(
    nu: &DenseMeasure,
    marginals: &[DenseMeasure],
    t: f64,
) -> Result<DenseMeasure, CorrectorError> {
    let covered: IndexSet = marginals.iter().flat_map(|m| m.support().iter()).collect();
    if covered != *nu.support() || marginals.iter().any(|m| m.support().len() != 1) {
        return Err(CorrectorError::Domain(format!(
            "marginals must be one per coordinate of {}",
            nu.support()
        )));
    }
    for m in marginals {
        let gap = sup_distance(&nu.project(m.support())?, m)?;
        if gap > 1e-9 {
            return Err(CorrectorError::Domain(format!(
                "marginal on {} differs from ν's by {gap:e}",
                m.support()
            )));
        }
    }
    let target = DenseMeasure::product(nu.alphabet(), marginals)?;
    correcting_measure_toward(nu, &target, t)
}

/// Defects at shift `j`: ascending independence defect of the names over `j + K`,
/// and the defect of time `j + m` given the names over `j + K`.
pub(crate) fn shift_defects(
    view: &[Vec<u8>],
    alphabet: crate::measure::Alphabet,
    columns: &[usize],
    j: usize,
    k: &IndexSet,
    m: i64,
) -> Result<(f64, f64), CorrectorError> {
    let k_prime = k.with(m);
    let nu = tower::names_over(view, alphabet, columns, j, &k_prime)?;
    let window_k = k.shifted(j as i64);
    let within = nu
        .project(&window_k)?
        .independence_defect(&IndexOrder::Ascending, NullAtoms::Skip)?;
    let new_time = nu.coordinate_defect(&window_k, j as i64 + m, NullAtoms::Skip)?;
    Ok((within, new_time))
}

/// Flags for every shift `j` with `j + m` inside the tower: `in_e` when the names over
/// `j + K` have ascending defect above `tol`, `in_e1` when time `j + m` has defect
/// above `eta` given them. Shifts above `height − 1 − m` are left unflagged (they
/// form the top error set).
pub fn measure_flags(
    tower: &Tower,
    p: &LabeledPartition,
    k: &IndexSet,
    m: usize,
    eta: f64,
    tol: f64,
) -> Result<LevelFlags, CorrectorError> {
    p.check_fits(tower)?;
    let view = p.column_view(tower);
    let columns: Vec<usize> = (0..tower.atom_count()).collect();
    let h = tower.height();
    let mut flags = LevelFlags::clear(h);
    let shifts = h.saturating_sub(m);
    let defects = (0..shifts)
        .into_par_iter()
        .map(|j| shift_defects(&view, p.alphabet(), &columns, j, k, m as i64))
        .collect::<Result<Vec<_>, _>>()?;
    for (j, (within, new_time)) in defects.into_iter().enumerate() {
        flags.in_e[j] = within > tol;
        flags.in_e1[j] = new_time > eta;
    }
    Ok(flags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Alphabet;

    fn bin() -> Alphabet {
        Alphabet::binary()
    }

    fn pair(table: Vec<f64>) -> DenseMeasure {
        DenseMeasure::probability(bin(), IndexSet::new(vec![0, 1]).unwrap(), table).unwrap()
    }

    fn halves() -> Vec<DenseMeasure> {
        vec![
            DenseMeasure::on_coordinate(bin(), 0, vec![0.5, 0.5]).unwrap(),
            DenseMeasure::on_coordinate(bin(), 1, vec![0.5, 0.5]).unwrap(),
        ]
    }

    #[test]
    fn eta_example() {
        let eta = choose_eta(0.5, 1, 1.0 / 512.0, 0.1).unwrap();
        assert!((eta - 1.0 / 409_600.0).abs() < 1e-18);
        let double = choose_eta(0.5, 1, 1.0 / 512.0, 0.2).unwrap();
        assert!((double - 2.0 * eta).abs() < 1e-18);
    }

    #[test]
    fn correcting_examples() {
        let xi = correcting_measure(&pair(vec![0.26, 0.24, 0.24, 0.26]), &halves(), 0.1).unwrap();
        for (x, e) in xi.table().iter().zip([0.16, 0.34, 0.34, 0.16]) {
            assert!((x - e).abs() < 1e-12);
        }
        let same = correcting_measure(&pair(vec![0.25; 4]), &halves(), 0.1).unwrap();
        assert!(same.table().iter().all(|&x| (x - 0.25).abs() < 1e-15));
        match correcting_measure(&pair(vec![0.4, 0.1, 0.1, 0.4]), &halves(), 0.1) {
            Err(CorrectorError::NegativeCell { cell, margin }) => {
                assert_eq!(cell, vec![0, 0]);
                assert!((margin + 1.1).abs() < 1e-12);
            }
            other => panic!("expected a negative cell, got {other:?}"),
        }
    }
}
