use crate::measure::{consistency_gap, DenseMeasure, IndexSet, MeasureKind, DEFAULT_TOL};

use super::ExtensionError;

/// Most parts accepted; the formula sums over all `2^parts − 1` non-empty subsets.
pub const MAX_PARTS: usize = 20;

/// Common signed extension of a consistent family `{μ_{K_i}}` to `A^K`, `K = ∪K_i`:
///
/// `μ = Σ_{∅≠J} (−1)^{|J|+1} μ_J`, where `μ_J` is the common projection of the
/// `μ_{K_j}, j ∈ J` onto `∩K_j` times the `q`-marginal on the remaining coordinates
/// of `K`. `q` defaults to the uniform probability on `A^K`.
pub fn inclusion_exclusion_extension(
    parts: &[DenseMeasure],
    q: Option<&DenseMeasure>,
) -> Result<DenseMeasure, ExtensionError> {
    let first = parts
        .first()
        .ok_or_else(|| ExtensionError::Domain("no parts to extend".into()))?;
    if parts.len() > MAX_PARTS {
        return Err(ExtensionError::Capacity(format!(
            "{} parts, at most {MAX_PARTS} supported",
            parts.len()
        )));
    }
    let alphabet = first.alphabet();
    let support: IndexSet = parts.iter().flat_map(|p| p.support().iter()).collect();
    for (i, p) in parts.iter().enumerate() {
        if p.alphabet() != alphabet {
            return Err(ExtensionError::Domain(format!("part {i} uses another alphabet")));
        }
        for (j, o) in parts[..i].iter().enumerate() {
            let gap = consistency_gap(p, o)?;
            if gap > DEFAULT_TOL {
                return Err(ExtensionError::Inconsistent {
                    first: o.support().clone(),
                    second: p.support().clone(),
                    gap,
                });
            }
            let _ = j;
        }
    }
    let uniform;
    let q = match q {
        Some(q) => {
            if q.support() != &support || q.kind() != MeasureKind::Probability {
                return Err(ExtensionError::Domain(format!(
                    "reference measure must be a probability on {support}"
                )));
            }
            if q.min_cell() <= 0.0 {
                return Err(ExtensionError::Domain(
                    "reference measure must be strictly positive".into(),
                ));
            }
            q
        }
        None => {
            uniform = DenseMeasure::uniform(alphabet, support.clone())?;
            &uniform
        }
    };

    let mut acc = vec![0.0; q.table().len()];
    for subset in 1usize..(1 << parts.len()) {
        let members: Vec<&DenseMeasure> = (0..parts.len())
            .filter(|i| subset & (1 << i) != 0)
            .map(|i| &parts[i])
            .collect();
        let common = members
            .iter()
            .skip(1)
            .fold(members[0].support().clone(), |c, m| c.intersection(m.support()));
        let rest = support.difference(&common);
        let term = members[0].project(&common)?.tensor(&q.project(&rest)?)?;
        let sign = if members.len() % 2 == 1 { 1.0 } else { -1.0 };
        for (a, t) in acc.iter_mut().zip(term.table()) {
            *a += sign * t;
        }
    }
    Ok(DenseMeasure::signed(alphabet, support, acc)?)
}
