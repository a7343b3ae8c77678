use serde::Serialize;

use crate::measure::{
    consistency_gap, IndexOrder, IndexSet, MarginalFamily, NullAtoms, SCAN_ALL_LIMIT,
};

/// A single failed hypothesis, with its location and magnitude.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// (F): the members through `index` cover more than `N` coordinates.
    Neighbourhood { index: i64, size: usize, bound: usize },
    /// (M1): two members disagree on their common coordinates.
    Consistency { first: IndexSet, second: IndexSet, gap: f64 },
    /// (M2): a one-dimensional atom below α.
    SmallAtom { support: IndexSet, index: i64, symbol: usize, mass: f64 },
    /// (M3): a member is not δ-independent.
    Dependence { support: IndexSet, defect: f64, delta: f64 },
    /// The defect could not be evaluated.
    Undefined { support: IndexSet, detail: String },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub violations: Vec<Violation>,
    pub max_neighbourhood: usize,
    pub max_consistency_gap: f64,
    pub min_atom: f64,
    pub max_delta_defect: f64,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks (F), pairwise consistency at `tol`, one-dimensional atoms ≥ α, and
/// δ-independence of every member (best ordering when `|K| ≤ 8`, ascending otherwise).
pub fn verify_hypotheses(family: &MarginalFamily, delta: f64, tol: f64) -> HypothesisReport {
    let mut violations = Vec::new();
    let bound = family.n_bound();
    let mut max_neighbourhood = 0;
    for index in family.union_support().iter() {
        let size = family.neighbourhood(index).len();
        max_neighbourhood = max_neighbourhood.max(size);
        if size > bound {
            violations.push(Violation::Neighbourhood { index, size, bound });
        }
    }

    let members = family.members();
    let mut max_consistency_gap: f64 = 0.0;
    for (i, m) in members.iter().enumerate() {
        for o in &members[..i] {
            match consistency_gap(o, m) {
                Ok(gap) => {
                    max_consistency_gap = max_consistency_gap.max(gap);
                    if gap > tol {
                        violations.push(Violation::Consistency {
                            first: o.support().clone(),
                            second: m.support().clone(),
                            gap,
                        });
                    }
                }
                Err(e) => violations.push(Violation::Undefined {
                    support: m.support().clone(),
                    detail: e.to_string(),
                }),
            }
        }
    }

    let mut min_atom = f64::INFINITY;
    let mut max_delta_defect: f64 = 0.0;
    for m in members {
        for index in m.support().iter() {
            let Ok(marginal) = m.marginal(index) else { continue };
            for (symbol, &mass) in marginal.iter().enumerate() {
                min_atom = min_atom.min(mass);
                if mass < family.alpha() - tol {
                    violations.push(Violation::SmallAtom {
                        support: m.support().clone(),
                        index,
                        symbol,
                        mass,
                    });
                }
            }
        }
        let order = if m.support().len() <= SCAN_ALL_LIMIT {
            IndexOrder::ScanAll
        } else {
            IndexOrder::Ascending
        };
        match m.independence_defect(&order, NullAtoms::Reject) {
            Ok(defect) => {
                max_delta_defect = max_delta_defect.max(defect);
                if defect > delta {
                    violations.push(Violation::Dependence {
                        support: m.support().clone(),
                        defect,
                        delta,
                    });
                }
            }
            Err(e) => violations.push(Violation::Undefined {
                support: m.support().clone(),
                detail: e.to_string(),
            }),
        }
    }

    HypothesisReport {
        violations,
        max_neighbourhood,
        max_consistency_gap,
        min_atom: if min_atom.is_finite() { min_atom } else { 1.0 },
        max_delta_defect,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{Alphabet, DenseMeasure, DEFAULT_TOL};

    fn bin() -> Alphabet {
        Alphabet::binary()
    }

    #[test]
    fn exact_products_pass() {
        let m0 = DenseMeasure::on_coordinate(bin(), 0, vec![0.4, 0.6]).unwrap();
        let m1 = DenseMeasure::on_coordinate(bin(), 1, vec![0.5, 0.5]).unwrap();
        let p = DenseMeasure::product(bin(), &[m0, m1.clone()]).unwrap();
        let fam = MarginalFamily::new(bin(), vec![p, m1], 0.4, 2).unwrap();
        let r = verify_hypotheses(&fam, 1e-6, DEFAULT_TOL);
        assert!(r.passed(), "{:?}", r.violations);
        assert!(r.max_delta_defect < 1e-12);
        assert!((r.min_atom - 0.4).abs() < 1e-12);
    }

    #[test]
    fn small_atom_and_neighbourhood_are_flagged() {
        let m0 = DenseMeasure::on_coordinate(bin(), 0, vec![0.2, 0.8]).unwrap();
        let m01 = DenseMeasure::uniform(bin(), IndexSet::interval(1, 2)).unwrap();
        let fam = MarginalFamily::new(bin(), vec![m0, m01], 0.3, 1).unwrap();
        let r = verify_hypotheses(&fam, 0.1, DEFAULT_TOL);
        assert!(r.violations.iter().any(|v| matches!(
            v,
            Violation::SmallAtom { index: 0, symbol: 0, mass, .. } if (mass - 0.2).abs() < 1e-12
        )));
        assert!(r
            .violations
            .iter()
            .any(|v| matches!(v, Violation::Neighbourhood { size: 2, bound: 1, .. })));
    }
}
