use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::measure::IndexSet;

use super::tower::{name_counts, window_levels};
use super::{CorrectorError, LabeledPartition, Tower};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SurgeryReport {
    /// Shifts operated on, in order.
    pub surgeries: Vec<usize>,
    /// Levels whose labels changed.
    pub changed_levels: Vec<usize>,
    /// Eligible shifts `i` (with `i + max K` inside the tower).
    pub eligible_shifts: usize,
    /// Eligible shifts still dependent at the end (empty on success).
    pub remaining_dependent: Vec<usize>,
}

/// Exact integer test: the counts over `i + K` factor as the product of the level counts.
fn exactly_independent(
    view: &[Vec<u8>],
    tower: &Tower,
    p: &LabeledPartition,
    all: &[usize],
    i: usize,
    k: &IndexSet,
) -> Result<bool, CorrectorError> {
    if k.len() <= 1 {
        return Ok(true);
    }
    let levels = window_levels(tower.height(), i, k)?;
    let counts = name_counts(view, p.alphabet(), all, i, k)?;
    let level_counts: Vec<Vec<u128>> = levels.iter().map(|&l| symbol_counts(view, l, p.alphabet().size())).collect();
    let n = all.len() as u128;
    let scale = checked_pow(n, levels.len() - 1)?;
    let a = p.alphabet().size();
    for (cell, &c) in counts.iter().enumerate() {
        let mut rest = cell;
        let mut prod: u128 = 1;
        for lc in level_counts.iter().rev() {
            prod = prod
                .checked_mul(lc[rest % a])
                .ok_or_else(overflow)?;
            rest /= a;
        }
        if (c as u128).checked_mul(scale).ok_or_else(overflow)? != prod {
            return Ok(false);
        }
    }
    Ok(true)
}

fn symbol_counts(view: &[Vec<u8>], level: usize, a: usize) -> Vec<u128> {
    let mut out = vec![0u128; a];
    for &s in &view[level] {
        out[s as usize] += 1;
    }
    out
}

fn overflow() -> CorrectorError {
    CorrectorError::Capacity("exact count arithmetic overflows 128 bits".into())
}

fn checked_pow(n: u128, e: usize) -> Result<u128, CorrectorError> {
    (0..e).try_fold(1u128, |acc, _| acc.checked_mul(n).ok_or_else(overflow))
}

/// Replaces the labels on the levels `i₁ + K` of every listed bad shift so that the
/// names over every eligible shift become exactly independent, keeping each level's
/// symbol counts and leaving all other levels untouched.
///
/// Within each class of columns sharing the labels on the neighbouring windows, the
/// block receives exactly `n_c · ∏ C_l(x_l) / N^|K|` columns of each tuple `x`; a
/// non-integral count is a quantization error. Shifts made dependent by a surgery are
/// queued and treated in ascending order.
pub fn fiber_surgery(
    tower: &Tower,
    p: &LabeledPartition,
    k: &IndexSet,
    bad_shifts: &[usize],
    seed: u64,
) -> Result<(LabeledPartition, SurgeryReport), CorrectorError> {
    p.check_fits(tower)?;
    if k.is_empty() || k.first().is_some_and(|f| f < 0) {
        return Err(CorrectorError::Domain(format!("K = {k} must be a non-empty set of offsets ≥ 0")));
    }
    let span = k.last().expect("non-empty") as usize;
    if span >= tower.height() {
        return Err(CorrectorError::Domain(format!(
            "tower of height {} is shorter than max K + 1",
            tower.height()
        )));
    }
    let eligible = tower.height() - span;
    if let Some(&b) = bad_shifts.iter().find(|&&b| b >= eligible) {
        return Err(CorrectorError::Domain(format!(
            "bad shift {b} is not eligible (window leaves the tower)"
        )));
    }
    let a = p.alphabet().size();
    let all: Vec<usize> = (0..tower.atom_count()).collect();
    let n = all.len() as u128;
    let mut view = p.column_view(tower);
    let mut queue: BTreeSet<usize> = bad_shifts.iter().copied().collect();
    let mut surgeries = Vec::new();
    let mut changed = BTreeSet::new();
    let budget = 4 * eligible + bad_shifts.len();

    while let Some(i1) = queue.pop_first() {
        if exactly_independent(&view, tower, p, &all, i1, k)? {
            continue;
        }
        if surgeries.len() >= budget {
            break;
        }
        let block = window_levels(tower.height(), i1, k)?;
        let block_set: BTreeSet<usize> = block.iter().copied().collect();
        let overlapping: Vec<usize> = (0..eligible)
            .filter(|&i| i != i1 && k.iter().any(|o| block_set.contains(&(i + o as usize))))
            .collect();
        let outside: BTreeSet<usize> = overlapping
            .iter()
            .flat_map(|&i| k.iter().map(move |o| i + o as usize))
            .filter(|l| !block_set.contains(l))
            .collect();

        let level_counts: Vec<Vec<u128>> = block.iter().map(|&l| symbol_counts(&view, l, a)).collect();
        let denom = checked_pow(n, block.len())?;
        let mut classes: BTreeMap<Vec<u8>, Vec<usize>> = BTreeMap::new();
        for &b in &all {
            classes
                .entry(outside.iter().map(|&l| view[l][b]).collect())
                .or_default()
                .push(b);
        }
        let tuples = a.pow(block.len() as u32);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i1 as u64).wrapping_mul(0x2545_f491_4f6c_dd1d));
        for (_, mut members) in classes {
            let n_c = members.len() as u128;
            members.shuffle(&mut rng);
            let mut it = members.into_iter();
            for cell in 0..tuples {
                let mut rest = cell;
                let mut digits = vec![0usize; block.len()];
                let mut num = n_c;
                for (pos, lc) in level_counts.iter().enumerate().rev() {
                    digits[pos] = rest % a;
                    rest /= a;
                    num = num.checked_mul(lc[digits[pos]]).ok_or_else(overflow)?;
                }
                if !num.is_multiple_of(denom) {
                    return Err(CorrectorError::Quantization(format!(
                        "a class of {n_c} columns cannot carry the product law of the block at shift {i1}; \
                         use an atom count divisible by {denom} / gcd with the class sizes"
                    )));
                }
                for b in it.by_ref().take((num / denom) as usize) {
                    for (pos, &l) in block.iter().enumerate() {
                        view[l][b] = digits[pos] as u8;
                    }
                }
            }
        }
        surgeries.push(i1);
        changed.extend(block.iter().copied());
        for i in overlapping {
            if !exactly_independent(&view, tower, p, &all, i, k)? {
                queue.insert(i);
            }
        }
    }

    let remaining_dependent = (0..eligible)
        .filter_map(|i| match exactly_independent(&view, tower, p, &all, i, k) {
            Ok(true) => None,
            Ok(false) => Some(Ok(i)),
            Err(e) => Some(Err(e)),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let q = LabeledPartition::from_column_view(p.alphabet(), tower, &view);
    Ok((
        q,
        SurgeryReport {
            surgeries,
            changed_levels: changed.into_iter().collect(),
            eligible_shifts: eligible,
            remaining_dependent,
        },
    ))
}
