use crate::measure::{
    cell_count, for_each_cell, sub_strides, Alphabet, DenseMeasure, IndexSet, MarginalFamily,
};

use super::ExtensionError;

/// Largest window table the oracle accepts.
pub const ORACLE_MAX_CELLS: usize = 1 << 16;

const SOLVER_TOL: f64 = 1e-7;
const PIVOT_TOL: f64 = 1e-11;

/// `{x ≥ 0, Σx = 1, π_K x = μ_K for every member}` over the cells of `A^window`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeasibilityProblem {
    alphabet: Alphabet,
    window: IndexSet,
    cells: usize,
    /// Each row: the cells it sums and its right-hand side.
    rows: Vec<(Vec<usize>, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleOutcome {
    pub feasible: bool,
    pub witness: Option<DenseMeasure>,
    /// Phase-one objective at termination (total artificial mass).
    pub infeasibility: f64,
}

impl FeasibilityProblem {
    pub fn from_family(family: &MarginalFamily, window: &IndexSet) -> Result<Self, ExtensionError> {
        let union = family.union_support();
        if !union.is_subset(window) {
            return Err(ExtensionError::Domain(format!(
                "family support {union} is not inside the window {window}"
            )));
        }
        let alphabet = family.alphabet();
        let cells = cell_count(alphabet, window.len())?;
        if cells > ORACLE_MAX_CELLS {
            return Err(ExtensionError::Capacity(format!(
                "oracle window has {cells} cells, cap is {ORACLE_MAX_CELLS}"
            )));
        }
        let a = alphabet.size();
        let mut rows = vec![((0..cells).collect::<Vec<_>>(), 1.0)];
        for m in family.members() {
            let strides = sub_strides(a, window, m.support())?;
            let base = rows.len();
            rows.extend(m.table().iter().map(|&t| (Vec::new(), t)));
            for_each_cell(a, window.len(), &[strides], |c, _, mapped| {
                rows[base + mapped[0]].0.push(c);
            });
        }
        Ok(Self {
            alphabet,
            window: window.clone(),
            cells,
            rows,
        })
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    /// Largest violation of any constraint (including `x ≥ 0`) by `m`.
    pub fn max_violation(&self, m: &DenseMeasure) -> Result<f64, ExtensionError> {
        if m.support() != &self.window || m.alphabet() != self.alphabet {
            return Err(ExtensionError::Domain(format!(
                "candidate lives on {}, the problem on {}",
                m.support(),
                self.window
            )));
        }
        let x = m.table();
        let neg = x.iter().fold(0.0f64, |acc, &v| acc.max(-v));
        Ok(self.rows.iter().fold(neg, |acc, (cells, rhs)| {
            acc.max((cells.iter().map(|&c| x[c]).sum::<f64>() - rhs).abs())
        }))
    }

    /// Phase one of the simplex method with one artificial per row. Dantzig pricing,
    /// falling back to Bland's rule after a run of degenerate pivots.
    pub fn solve(&self) -> Result<OracleOutcome, ExtensionError> {
        let m = self.rows.len();
        let n = self.cells;
        let width = n + 1;
        let mut t = vec![0.0; m * width];
        for (i, (cells, rhs)) in self.rows.iter().enumerate() {
            for &c in cells {
                t[i * width + c] = 1.0;
            }
            t[i * width + n] = *rhs;
        }
        // Reduced costs of the phase-one objective; the last entry is −objective.
        let mut d = vec![0.0; width];
        for i in 0..m {
            for j in 0..width {
                d[j] -= t[i * width + j];
            }
        }
        let mut basis: Vec<Option<usize>> = vec![None; m];
        let mut degenerate_run = 0usize;
        let max_iter = 50 * (m + n);
        for _ in 0..max_iter {
            let bland = degenerate_run > 50;
            let entering = if bland {
                (0..n).find(|&j| d[j] < -PIVOT_TOL)
            } else {
                (0..n)
                    .filter(|&j| d[j] < -PIVOT_TOL)
                    .min_by(|&a, &b| d[a].total_cmp(&d[b]))
            };
            let Some(j) = entering else {
                return Ok(self.finish(&t, &basis, width, -d[n]));
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = t[i * width + j];
                if a > PIVOT_TOL {
                    let ratio = t[i * width + n] / a;
                    let better = match leave {
                        None => true,
                        Some((r, best)) => {
                            ratio < best - 1e-12
                                || (ratio <= best + 1e-12
                                    && basis_key(basis[i], n) < basis_key(basis[r], n))
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                return Err(ExtensionError::Numerical("phase one is unbounded".into()));
            };
            degenerate_run = if ratio.abs() < 1e-12 { degenerate_run + 1 } else { 0 };
            let p = t[r * width + j];
            for k in 0..width {
                t[r * width + k] /= p;
            }
            let pivot_row: Vec<f64> = t[r * width..(r + 1) * width].to_vec();
            for i in 0..m {
                if i == r {
                    continue;
                }
                let f = t[i * width + j];
                if f != 0.0 {
                    for k in 0..width {
                        t[i * width + k] -= f * pivot_row[k];
                    }
                }
            }
            let f = d[j];
            for k in 0..width {
                d[k] -= f * pivot_row[k];
            }
            basis[r] = Some(j);
        }
        Err(ExtensionError::Numerical("simplex iteration limit reached".into()))
    }

    fn finish(&self, t: &[f64], basis: &[Option<usize>], width: usize, objective: f64) -> OracleOutcome {
        let n = self.cells;
        let mut x = vec![0.0; n];
        for (i, b) in basis.iter().enumerate() {
            if let Some(j) = b {
                x[*j] = t[i * width + n].max(0.0);
            }
        }
        let witness = DenseMeasure::signed(self.alphabet, self.window.clone(), x)
            .ok()
            .and_then(|w| w.into_probability(SOLVER_TOL).ok());
        let witness = witness.filter(|w| {
            objective <= SOLVER_TOL && self.max_violation(w).is_ok_and(|v| v <= SOLVER_TOL)
        });
        OracleOutcome {
            feasible: witness.is_some(),
            witness,
            infeasibility: objective.max(0.0),
        }
    }
}

// Artificial variables rank after structural ones for tie-breaking.
fn basis_key(b: Option<usize>, n: usize) -> usize {
    b.unwrap_or(n)
}

/// Decides by linear feasibility whether the family has a common extension to `A^window`.
pub fn brute_force_extension_exists(
    family: &MarginalFamily,
    window: &IndexSet,
) -> Result<OracleOutcome, ExtensionError> {
    FeasibilityProblem::from_family(family, window)?.solve()
}
