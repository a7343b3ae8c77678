use serde::{Deserialize, Serialize};

use crate::corrector::{Tower, Transfer};

use super::RdsError;

/// How the fiber map over a base point acts on the atoms of one tower level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FiberTemplate {
    Identity,
    /// The shift `S^{ω_j}` as a rotation of the atom ring by `ω_j`.
    ShiftRing,
    /// Independent seeded random bijections.
    SeededPermutation { seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TowerSpec {
    pub transfer: Transfer,
    pub tower: Tower,
}

/// The tower `R_ω` of height `height` read along the base orbit `ω_0, ω_1, …`:
/// level `j` moves to level `j + 1` by the fiber map over `θʲω`.
pub fn build_tower_from_base(
    orbit: &[i8],
    height: usize,
    atoms: usize,
    template: FiberTemplate,
) -> Result<TowerSpec, RdsError> {
    if orbit.len() < height {
        return Err(RdsError::Domain(format!(
            "base orbit of length {} is shorter than the tower height {height}",
            orbit.len()
        )));
    }
    if orbit.iter().any(|&s| s != 1 && s != -1) {
        return Err(RdsError::Domain("base orbit symbols must be ±1".into()));
    }
    let transfer = match template {
        FiberTemplate::Identity => Transfer::Identity,
        FiberTemplate::ShiftRing => {
            Transfer::Rotations(orbit[..height.saturating_sub(1)].iter().map(|&s| i64::from(s)).collect())
        }
        FiberTemplate::SeededPermutation { seed } => Transfer::SeededPermutation(seed),
    };
    let tower = Tower::new(height, atoms, &transfer)?;
    Ok(TowerSpec { transfer, tower })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rds::BaseSequence;

    #[test]
    fn templates() {
        let orbit = BaseSequence::new(5).window(6);
        let id = build_tower_from_base(&orbit, 6, 7, FiberTemplate::Identity).unwrap();
        assert!((0..6).all(|j| (0..7).all(|b| id.tower.atom(j, b) == b)));

        let ring = build_tower_from_base(&orbit, 6, 7, FiberTemplate::ShiftRing).unwrap();
        let mut pos = 0i64;
        for j in 0..6 {
            assert_eq!(ring.tower.atom(j, 0), pos.rem_euclid(7) as usize);
            if j < 5 {
                pos += i64::from(orbit[j]);
            }
        }
        assert!(build_tower_from_base(&orbit, 7, 7, FiberTemplate::Identity).is_err());
    }
}
