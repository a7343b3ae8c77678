use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::extension::{extend_family_sequential, thresholds};
use crate::measure::{DenseMeasure, IndexSet, MarginalFamily};

use super::rounding::{largest_remainder, round_matrix};
use super::tower::names_over;
use super::{
    choose_eta, correcting_measure_toward, measure_flags, shift_defects, CorrectorError,
    LabeledPartition, LevelFlags, Tower,
};

#[derive(Clone, Debug, PartialEq)]
pub struct PaintConfig {
    pub seed: u64,
    /// Threshold handed to the extension engine; defaults to `α/2`.
    pub beta: Option<f64>,
    /// Flagging threshold for the new time; defaults to `choose_eta(α, |K|, α/2, ε)`.
    pub eta: Option<f64>,
    /// Precomputed flags; measured from `P` when absent.
    pub flags: Option<LevelFlags>,
    /// Tolerance on the defect over `j + K` below which a shift counts as independent.
    pub independence_tol: f64,
}

impl Default for PaintConfig {
    fn default() -> Self {
        Self {
            seed: 0x5eed,
            beta: None,
            eta: None,
            flags: None,
            independence_tol: 1e-9,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftStatus {
    Corrected,
    /// Names over `j + K` not independent.
    FlaggedE,
    /// Time `m` not η-independent of the names over `j + K`.
    FlaggedE1,
    /// The correcting measure would be negative; moved to the E₁ set.
    Positivity,
    /// `j + m` leaves the tower.
    Top,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShiftRecord {
    pub shift: usize,
    pub status: ShiftStatus,
    /// Defect of time `j + m` given the names over `j + K`, before and after.
    pub defect_before: Option<f64>,
    pub defect_after: Option<f64>,
    /// Ascending independence defect of the names over `j + K ∪ {m}` after painting.
    pub joint_defect_after: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtensionSummary {
    pub members: usize,
    pub n_bound: usize,
    pub max_beta_defect: f64,
    pub max_b_norm: f64,
    pub min_positivity_margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BudgetChecks {
    /// `N = k² + 1` as stated for the shifted family, and the measured bound.
    pub stated_n_bound: usize,
    pub measured_n_bound: usize,
    pub stated_delta: f64,
    pub stated_eta: f64,
    /// Largest pre-paint defect over corrected shifts, to compare with `stated_eta`.
    pub max_defect_before_corrected: f64,
    pub e3_below_budget: bool,
    pub e1_below_budget: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PaintReport {
    pub m: usize,
    pub epsilon: f64,
    pub alpha: f64,
    pub eta: f64,
    pub beta: f64,
    pub b0_atoms: usize,
    pub degenerate_split: bool,
    pub e_mass: f64,
    pub e1_mass: f64,
    pub e1_positivity_mass: f64,
    pub e2_mass: f64,
    pub e3_mass: f64,
    pub error_mass: f64,
    pub level_distance: Vec<f64>,
    pub max_level_distance: f64,
    pub level_distribution_gap: Vec<f64>,
    pub max_distribution_gap: f64,
    pub max_defect_after: f64,
    pub max_joint_defect_after: f64,
    /// `|A| / M₀`.
    pub quantization_bound: f64,
    pub shifts: Vec<ShiftRecord>,
    pub extension: Option<ExtensionSummary>,
    pub budget: BudgetChecks,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PaintOutcome {
    pub q: LabeledPartition,
    pub report: PaintReport,
}

fn level_rng(seed: u64, n: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(n as u64 + 1))
}

/// One step of painting names on the tower: makes the partition's time `m`
/// independent of its names over `K` on every unflagged shift, changing labels only
/// on a set `B₀` of columns of mass `ε/10`.
pub fn paint_tower(
    tower: &Tower,
    p: &LabeledPartition,
    k: &IndexSet,
    m: usize,
    epsilon: f64,
    alpha: f64,
    cfg: &PaintConfig,
) -> Result<PaintOutcome, CorrectorError> {
    p.check_fits(tower)?;
    let h = tower.height();
    let n_atoms = tower.atom_count();
    let alphabet = p.alphabet();
    if k.is_empty() || k.first().is_some_and(|f| f < 0) {
        return Err(CorrectorError::Domain(format!("K = {k} must be a non-empty set of offsets ≥ 0")));
    }
    if (m as i64) <= k.last().expect("non-empty") {
        return Err(CorrectorError::Domain(format!("m = {m} must exceed max K")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) || !(alpha > 0.0 && alpha <= 0.5) {
        return Err(CorrectorError::Domain("need 0 < ε < 1 and 0 < α ≤ 1/2".into()));
    }
    if (h as f64) <= 10.0 * m as f64 / epsilon {
        return Err(CorrectorError::Domain(format!(
            "tower height {h} does not exceed 10·m/ε = {}",
            10.0 * m as f64 / epsilon
        )));
    }
    let kk = k.len();
    let k_prime = k.with(m as i64);
    let beta = cfg.beta.unwrap_or(alpha / 2.0);
    let eta = match cfg.eta {
        Some(e) => e,
        None => choose_eta(alpha, kk, alpha / 2.0, epsilon)?,
    };
    let flags = match &cfg.flags {
        Some(f) => f.clone(),
        None => measure_flags(tower, p, k, m, eta, cfg.independence_tol)?,
    };
    let view = p.column_view(tower);
    let all: Vec<usize> = (0..n_atoms).collect();
    let valid = h - m;

    let before = (0..valid)
        .into_par_iter()
        .map(|j| shift_defects(&view, alphabet, &all, j, k, m as i64).map(|d| d.1))
        .collect::<Result<Vec<_>, _>>()?;

    let mut status: Vec<ShiftStatus> = (0..h)
        .map(|j| {
            if j >= valid {
                ShiftStatus::Top
            } else if flags.in_e.get(j).copied().unwrap_or(false) {
                ShiftStatus::FlaggedE
            } else if flags.in_e1.get(j).copied().unwrap_or(false) {
                ShiftStatus::FlaggedE1
            } else {
                ShiftStatus::Corrected
            }
        })
        .collect();

    let b0_atoms = (epsilon / 10.0 * n_atoms as f64).floor() as usize;
    let mut q_view = view.clone();
    let mut extension = None;
    let mut measured_n_bound = 0;

    if b0_atoms > 0 {
        let b0 = select_b0(&view, b0_atoms, cfg.seed);
        let t = b0_atoms as f64 / n_atoms as f64;

        let marginals: Vec<DenseMeasure> = (0..h)
            .map(|l| {
                let d = p.level_distribution(l);
                DenseMeasure::on_coordinate(alphabet, l as i64, d)
            })
            .collect::<Result<_, _>>()?;
        let candidates: Vec<usize> = (0..valid).filter(|&j| status[j] == ShiftStatus::Corrected).collect();
        let xis = candidates
            .par_iter()
            .map(|&j| {
                let window = k_prime.shifted(j as i64);
                let target = DenseMeasure::product(
                    alphabet,
                    &window.iter().map(|l| marginals[l as usize].clone()).collect::<Vec<_>>(),
                )?;
                let nu = names_over(&view, alphabet, &all, j, &k_prime)?;
                match correcting_measure_toward(&nu, &target, t) {
                    Ok(xi) => Ok(Some(xi)),
                    Err(CorrectorError::NegativeCell { .. }) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<Vec<_>, CorrectorError>>()?;
        let mut members = Vec::new();
        for (&j, xi) in candidates.iter().zip(xis) {
            match xi {
                Some(xi) => members.push(xi),
                None => status[j] = ShiftStatus::Positivity,
            }
        }

        if !members.is_empty() {
            let probe = MarginalFamily::new(alphabet, members.clone(), alpha, 1)?;
            measured_n_bound = probe.max_neighbourhood();
            let family = MarginalFamily::new(alphabet, members, alpha, measured_n_bound)?;
            let ext = extend_family_sequential(&family, &IndexSet::interval(0, h as i64 - 1), beta)?;
            extension = Some(ExtensionSummary {
                members: family.members().len(),
                n_bound: measured_n_bound,
                max_beta_defect: ext.trace.max_beta_defect(),
                max_b_norm: ext.trace.max_b_norm(),
                min_positivity_margin: ext.trace.min_positivity_margin(),
            });
            paint_columns(&mut q_view, &view, &b0, &ext.trace.steps, alphabet.size(), cfg.seed)?;
        }
    }

    let q = LabeledPartition::from_column_view(alphabet, tower, &q_view);
    let after = (0..valid)
        .into_par_iter()
        .map(|j| {
            let (_, new_time) = shift_defects(&q_view, alphabet, &all, j, k, m as i64)?;
            let joint = names_over(&q_view, alphabet, &all, j, &k_prime)?
                .independence_defect(&crate::measure::IndexOrder::Ascending, crate::measure::NullAtoms::Skip)?;
            Ok((new_time, joint))
        })
        .collect::<Result<Vec<_>, CorrectorError>>()?;

    let shifts: Vec<ShiftRecord> = (0..h)
        .map(|j| ShiftRecord {
            shift: j,
            status: status[j],
            defect_before: before.get(j).copied(),
            defect_after: after.get(j).map(|a| a.0),
            joint_defect_after: after.get(j).map(|a| a.1),
        })
        .collect();
    let count = |s: ShiftStatus| status.iter().filter(|&&x| x == s).count() as f64 / h as f64;
    let e_mass = count(ShiftStatus::FlaggedE);
    let e1_mass = count(ShiftStatus::FlaggedE1);
    let e1_positivity_mass = count(ShiftStatus::Positivity);
    let e3_mass = m as f64 / h as f64;
    let corrected = shifts.iter().filter(|s| s.status == ShiftStatus::Corrected);
    let max_defect_after = corrected.clone().filter_map(|s| s.defect_after).fold(0.0, f64::max);
    let max_joint_defect_after = corrected.clone().filter_map(|s| s.joint_defect_after).fold(0.0, f64::max);
    let max_defect_before_corrected = corrected.filter_map(|s| s.defect_before).fold(0.0, f64::max);

    let level_distance: Vec<f64> = (0..h).map(|l| p.level_distance(&q, l)).collect();
    let level_distribution_gap: Vec<f64> = (0..h)
        .map(|l| {
            p.level_distribution(l)
                .iter()
                .zip(q.level_distribution(l))
                .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
        })
        .collect();
    let stated_n_bound = kk * kk + 1;
    let stated_delta = thresholds(alpha, stated_n_bound, 1.0)?.delta;
    let report = PaintReport {
        m,
        epsilon,
        alpha,
        eta,
        beta,
        b0_atoms,
        degenerate_split: b0_atoms == 0,
        e_mass,
        e1_mass,
        e1_positivity_mass,
        e2_mass: 0.0,
        e3_mass,
        error_mass: e_mass + e1_mass + e1_positivity_mass + e3_mass,
        max_level_distance: level_distance.iter().copied().fold(0.0, f64::max),
        level_distance,
        max_distribution_gap: level_distribution_gap.iter().copied().fold(0.0, f64::max),
        level_distribution_gap,
        max_defect_after,
        max_joint_defect_after,
        quantization_bound: if b0_atoms > 0 {
            alphabet.size() as f64 / b0_atoms as f64
        } else {
            0.0
        },
        shifts,
        extension,
        budget: BudgetChecks {
            stated_n_bound,
            measured_n_bound,
            stated_delta,
            stated_eta: choose_eta(alpha, kk, stated_delta, epsilon)?,
            max_defect_before_corrected,
            e3_below_budget: e3_mass < epsilon / 10.0,
            e1_below_budget: e1_mass + e1_positivity_mass < epsilon / 10.0,
        },
    };
    Ok(PaintOutcome { q, report })
}

/// `M₀` columns split proportionally off every class of equal full names, by largest
/// remainder with seeded tie-breaking; within a class the columns are drawn at random.
fn select_b0(view: &[Vec<u8>], b0_atoms: usize, seed: u64) -> Vec<usize> {
    let n_atoms = view.first().map_or(0, Vec::len);
    let mut classes: BTreeMap<Vec<u8>, Vec<usize>> = BTreeMap::new();
    for b in 0..n_atoms {
        classes.entry(view.iter().map(|l| l[b]).collect()).or_default().push(b);
    }
    let classes: Vec<Vec<usize>> = classes.into_values().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let quotas: Vec<f64> = classes
        .iter()
        .map(|c| c.len() as f64 * b0_atoms as f64 / n_atoms as f64)
        .collect();
    let mut priority: Vec<usize> = (0..classes.len()).collect();
    priority.shuffle(&mut rng);
    let take = largest_remainder(&quotas, b0_atoms as u64, &priority);
    let mut b0 = Vec::with_capacity(b0_atoms);
    for (mut class, n) in classes.into_iter().zip(take) {
        class.shuffle(&mut rng);
        b0.extend_from_slice(&class[..n as usize]);
    }
    b0.sort_unstable();
    b0
}

/// Paints the `B₀` columns level by level following the extension's steps: the columns
/// are grouped by their painted values on `R̄`, each group receives the conditional law
/// of the new level given `R̄`, and the counts are rounded so that the level keeps
/// exactly the `B₀` symbol counts of `P`. Levels no member covers keep `P`.
fn paint_columns(
    q_view: &mut [Vec<u8>],
    p_view: &[Vec<u8>],
    b0: &[usize],
    steps: &[crate::extension::ExtensionStep],
    a: usize,
    seed: u64,
) -> Result<(), CorrectorError> {
    for step in steps {
        let Some(sigma) = &step.sigma else { continue };
        let n = step.index as usize;
        let r_levels: Vec<usize> = step.r_bar.iter().map(|l| l as usize).collect();
        let n_pos = step.s_bar.position(step.index).expect("n ∈ S̄");
        let mut groups: BTreeMap<Vec<u8>, Vec<usize>> = BTreeMap::new();
        for &b in b0 {
            groups
                .entry(r_levels.iter().map(|&l| q_view[l][b]).collect())
                .or_default()
                .push(b);
        }
        let n_marginal = sigma.marginal(step.index)?;
        let mut digits = vec![0usize; step.s_bar.len()];
        let mut targets = Vec::with_capacity(groups.len());
        let mut row_sums = Vec::with_capacity(groups.len());
        for (y, members) in &groups {
            let mut it = y.iter();
            for (i, d) in digits.iter_mut().enumerate() {
                if i != n_pos {
                    *d = *it.next().expect("R̄ digits") as usize;
                }
            }
            let mut kappa: Vec<f64> = (0..a)
                .map(|s| {
                    digits[n_pos] = s;
                    sigma.value(&digits)
                })
                .collect();
            let mass: f64 = kappa.iter().sum();
            if mass > 1e-15 {
                kappa.iter_mut().for_each(|x| *x /= mass);
            } else {
                kappa.clone_from(&n_marginal);
            }
            let c = members.len() as f64;
            targets.push(kappa.iter().map(|x| c * x).collect::<Vec<_>>());
            row_sums.push(members.len() as u64);
        }
        let mut col_sums = vec![0u64; a];
        for &b in b0 {
            col_sums[p_view[n][b] as usize] += 1;
        }
        let counts = round_matrix(&targets, &row_sums, &col_sums)?;
        let mut rng = level_rng(seed, n);
        for ((_, members), row) in groups.into_iter().zip(counts) {
            let mut members = members;
            members.shuffle(&mut rng);
            let mut it = members.into_iter();
            for (s, &cnt) in row.iter().enumerate() {
                for b in it.by_ref().take(cnt as usize) {
                    q_view[n][b] = s as u8;
                }
            }
        }
    }
    Ok(())
}
