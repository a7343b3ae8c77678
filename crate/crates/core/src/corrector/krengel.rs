use std::collections::BTreeSet;

use serde::Serialize;

use crate::measure::{IndexOrder, IndexSet, NullAtoms};

use super::paint::ShiftStatus;
use super::tower::names_over;
use super::{
    choose_eta, measure_flags, paint_tower, CorrectorError, LabeledPartition, PaintConfig,
    PaintReport, Tower,
};

#[derive(Clone, Debug, PartialEq)]
pub struct KrengelConfig {
    pub seed: u64,
    pub alpha: f64,
    /// Fixed η for every step; defaults to `choose_eta(α, |K|, α/2, ε_i)`.
    pub eta: Option<f64>,
    pub beta: Option<f64>,
    /// Defect over `j + K` up to which a shift counts as independent after earlier steps.
    pub independence_tol: f64,
}

impl Default for KrengelConfig {
    fn default() -> Self {
        Self {
            seed: 0x5eed,
            alpha: 0.4,
            eta: None,
            beta: None,
            independence_tol: 2e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KrengelStep {
    pub step: usize,
    pub epsilon: f64,
    pub m: usize,
    pub k: IndexSet,
    pub eta: f64,
    /// Candidates tried before `m`, with the reason each was skipped.
    pub rejected: Vec<(usize, String)>,
    pub report: PaintReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KrengelOutcome {
    pub q: LabeledPartition,
    pub times: Vec<usize>,
    pub steps: Vec<KrengelStep>,
    /// Mass of the levels excluded at some step (flagged shifts and top levels).
    pub cumulative_error_mass: f64,
    /// Sum over steps of the largest per-level distance.
    pub cumulative_distance: f64,
    /// Largest per-level distance between `P` and the final partition.
    pub distance_to_p: f64,
    /// Largest ascending defect over `{0} ∪ times` on shifts never excluded.
    pub final_max_defect: f64,
}

/// Runs `steps` painting steps with budgets `ε_i = ε/2^i`. Step `i` takes the first
/// time `m` in `mixing_times` beyond every time chosen so far for which the tower is
/// tall enough (`M > 10m/ε_i`) and the flagged mass stays below `ε_i/10`.
pub fn iterate_krengel(
    tower: &Tower,
    p: &LabeledPartition,
    mixing_times: &[usize],
    epsilon: f64,
    steps: usize,
    cfg: &KrengelConfig,
) -> Result<KrengelOutcome, CorrectorError> {
    p.check_fits(tower)?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(CorrectorError::Domain(format!("ε = {epsilon} outside (0, 1)")));
    }
    let h = tower.height();
    let mut q = p.clone();
    let mut k = IndexSet::singleton(0);
    let mut times = Vec::new();
    let mut log = Vec::new();
    let mut bad: BTreeSet<usize> = BTreeSet::new();
    let mut cumulative_distance = 0.0;

    for step in 1..=steps {
        let eps_i = epsilon / f64::powi(2.0, step as i32);
        let eta = match cfg.eta {
            Some(e) => e,
            None => choose_eta(cfg.alpha, k.len(), cfg.alpha / 2.0, eps_i)?,
        };
        let top = k.last().expect("non-empty") as usize;
        let mut rejected = Vec::new();
        let mut chosen = None;
        for &m in mixing_times.iter().filter(|&&m| m > top) {
            if (h as f64) <= 10.0 * m as f64 / eps_i {
                rejected.push((m, format!("tower height {h} ≤ 10·m/ε_i")));
                continue;
            }
            let flags = measure_flags(tower, &q, &k, m, eta, cfg.independence_tol)?;
            let flagged = (0..h).filter(|&j| flags.is_flagged(j)).count() as f64 / h as f64;
            if flagged >= eps_i / 10.0 {
                rejected.push((m, format!("flagged mass {flagged:.4} ≥ ε_i/10")));
                continue;
            }
            chosen = Some((m, flags));
            break;
        }
        let Some((m, flags)) = chosen else {
            return Err(CorrectorError::MixingSupply {
                step,
                detail: format!(
                    "no candidate beyond {top} passes: {}",
                    rejected
                        .iter()
                        .map(|(m, why)| format!("m={m}: {why}"))
                        .collect::<Vec<_>>()
                        .join("; ")
                ),
            });
        };
        let paint_cfg = PaintConfig {
            seed: cfg.seed.wrapping_add(step as u64),
            beta: cfg.beta,
            eta: Some(eta),
            flags: Some(flags),
            independence_tol: cfg.independence_tol,
        };
        let out = paint_tower(tower, &q, &k, m, eps_i, cfg.alpha, &paint_cfg)?;
        for s in &out.report.shifts {
            if s.status != ShiftStatus::Corrected {
                bad.insert(s.shift);
            }
        }
        cumulative_distance += out.report.max_level_distance;
        q = out.q;
        log.push(KrengelStep {
            step,
            epsilon: eps_i,
            m,
            k: k.clone(),
            eta,
            rejected,
            report: out.report,
        });
        times.push(m);
        k = k.with(m as i64);
    }

    let span = k.last().expect("non-empty") as usize;
    let view = q.column_view(tower);
    let all: Vec<usize> = (0..tower.atom_count()).collect();
    let mut final_max_defect: f64 = 0.0;
    if !times.is_empty() {
        for j in (0..h.saturating_sub(span)).filter(|j| !bad.contains(j)) {
            let d = names_over(&view, q.alphabet(), &all, j, &k)?
                .independence_defect(&IndexOrder::Ascending, NullAtoms::Skip)?;
            final_max_defect = final_max_defect.max(d);
        }
    }
    let distance_to_p = (0..h).map(|l| p.level_distance(&q, l)).fold(0.0, f64::max);
    Ok(KrengelOutcome {
        q,
        times,
        steps: log,
        cumulative_error_mass: bad.len() as f64 / h as f64,
        cumulative_distance,
        distance_to_p,
        final_max_defect,
    })
}
