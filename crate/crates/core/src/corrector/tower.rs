use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::measure::{cell_count, Alphabet, DenseMeasure, IndexSet, MeasureKind};

use super::CorrectorError;

/// Largest `height · atom_count` accepted.
pub const MAX_TOWER_CELLS: usize = 1 << 27;

/// Fiber maps between consecutive levels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Transfer {
    Identity,
    /// Independent uniformly random bijections, one per level, from a seed.
    SeededPermutation(u64),
    /// Rotation of the atom ring by `shifts[j]` from level `j` to `j + 1`.
    Rotations(Vec<i64>),
}

impl std::str::FromStr for Transfer {
    type Err = CorrectorError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "identity" {
            return Ok(Transfer::Identity);
        }
        if let Some(seed) = s.strip_prefix("seeded_permutation:") {
            return seed
                .parse()
                .map(Transfer::SeededPermutation)
                .map_err(|_| CorrectorError::Domain(format!("bad permutation seed in {s:?}")));
        }
        Err(CorrectorError::Domain(format!(
            "unknown transfer {s:?} (expected \"identity\" or \"seeded_permutation:<seed>\")"
        )))
    }
}

/// A Rokhlin tower over one base point: `height` fibers of `atom_count` equal-mass
/// atoms and bijective transfer maps between consecutive levels.
///
/// A *column* is the orbit of a base atom: column `b` meets level `j` in
/// `atom(j, b)`. All name computations run over columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Tower {
    height: usize,
    atoms: usize,
    columns: Vec<Vec<u32>>,
}

impl Tower {
    pub fn new(height: usize, atoms: usize, transfer: &Transfer) -> Result<Self, CorrectorError> {
        check_size(height, atoms)?;
        let maps: Vec<Vec<u32>> = match transfer {
            Transfer::Identity => vec![(0..atoms as u32).collect(); height.saturating_sub(1)],
            Transfer::SeededPermutation(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (1..height)
                    .map(|_| {
                        let mut p: Vec<u32> = (0..atoms as u32).collect();
                        p.shuffle(&mut rng);
                        p
                    })
                    .collect()
            }
            Transfer::Rotations(shifts) => {
                if shifts.len() + 1 < height {
                    return Err(CorrectorError::Domain(format!(
                        "{} rotations for a tower of height {height}",
                        shifts.len()
                    )));
                }
                let n = atoms as i64;
                shifts[..height - 1]
                    .iter()
                    .map(|&s| (0..n).map(|a| (a + s).rem_euclid(n) as u32).collect())
                    .collect()
            }
        };
        Self::from_maps(height, atoms, maps)
    }

    /// Tower from explicit maps `maps[j]: level j → level j+1`.
    pub fn from_maps(height: usize, atoms: usize, maps: Vec<Vec<u32>>) -> Result<Self, CorrectorError> {
        check_size(height, atoms)?;
        if maps.len() + 1 != height {
            return Err(CorrectorError::Domain(format!(
                "{} transfer maps for a tower of height {height}",
                maps.len()
            )));
        }
        for (j, map) in maps.iter().enumerate() {
            let mut seen = vec![false; atoms];
            if map.len() != atoms
                || !map.iter().all(|&a| (a as usize) < atoms && !std::mem::replace(&mut seen[a as usize], true))
            {
                return Err(CorrectorError::Domain(format!("transfer map {j} is not a bijection")));
            }
        }
        let mut columns = Vec::with_capacity(height);
        columns.push((0..atoms as u32).collect::<Vec<_>>());
        for map in &maps {
            let prev = columns.last().expect("non-empty");
            let next = prev.iter().map(|&a| map[a as usize]).collect();
            columns.push(next);
        }
        Ok(Self { height, atoms, columns })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn atom_count(&self) -> usize {
        self.atoms
    }

    /// The atom of column `b` at level `j`.
    pub fn atom(&self, j: usize, b: usize) -> usize {
        self.columns[j][b] as usize
    }
}

fn check_size(height: usize, atoms: usize) -> Result<(), CorrectorError> {
    if height == 0 || atoms == 0 {
        return Err(CorrectorError::Domain("tower height and atom count must be positive".into()));
    }
    if atoms > u32::MAX as usize || height.saturating_mul(atoms) > MAX_TOWER_CELLS {
        return Err(CorrectorError::Capacity(format!(
            "tower of {height} × {atoms} atoms exceeds {MAX_TOWER_CELLS}"
        )));
    }
    Ok(())
}

/// A partition of every level: `levels[j][atom]` is the symbol of that atom.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledPartition {
    alphabet: Alphabet,
    levels: Vec<Vec<u8>>,
}

impl LabeledPartition {
    pub fn new(alphabet: Alphabet, levels: Vec<Vec<u8>>) -> Result<Self, CorrectorError> {
        let width = levels.first().map_or(0, Vec::len);
        if levels.iter().any(|l| l.len() != width) {
            return Err(CorrectorError::Domain("levels have different atom counts".into()));
        }
        if levels.iter().flatten().any(|&s| s as usize >= alphabet.size()) {
            return Err(CorrectorError::Domain("label outside the alphabet".into()));
        }
        Ok(Self { alphabet, levels })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn height(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, j: usize) -> &[u8] {
        &self.levels[j]
    }

    pub fn levels(&self) -> &[Vec<u8>] {
        &self.levels
    }

    pub(crate) fn check_fits(&self, tower: &Tower) -> Result<(), CorrectorError> {
        if self.levels.len() != tower.height || self.levels.iter().any(|l| l.len() != tower.atoms) {
            return Err(CorrectorError::Domain(format!(
                "partition shape does not match a {} × {} tower",
                tower.height, tower.atoms
            )));
        }
        Ok(())
    }

    /// Symbol distribution on level `j`.
    pub fn level_distribution(&self, j: usize) -> Vec<f64> {
        let counts = self.level_counts(j);
        let n = self.levels[j].len() as f64;
        counts.iter().map(|&c| c as f64 / n).collect()
    }

    pub fn level_counts(&self, j: usize) -> Vec<u64> {
        let mut counts = vec![0u64; self.alphabet.size()];
        for &s in &self.levels[j] {
            counts[s as usize] += 1;
        }
        counts
    }

    /// `μ{P ≠ Q}` on level `j`.
    pub fn level_distance(&self, other: &Self, j: usize) -> f64 {
        let a = &self.levels[j];
        let b = &other.levels[j];
        a.iter().zip(b).filter(|(x, y)| x != y).count() as f64 / a.len() as f64
    }

    /// Labels read along columns: `out[j][b]` is the symbol of column `b` at level `j`.
    pub(crate) fn column_view(&self, tower: &Tower) -> Vec<Vec<u8>> {
        (0..tower.height)
            .map(|j| {
                let level = &self.levels[j];
                tower.columns[j].iter().map(|&a| level[a as usize]).collect()
            })
            .collect()
    }

    pub(crate) fn from_column_view(
        alphabet: Alphabet,
        tower: &Tower,
        view: &[Vec<u8>],
    ) -> Self {
        let levels = view
            .iter()
            .enumerate()
            .map(|(j, col)| {
                let mut level = vec![0u8; tower.atoms];
                for (b, &s) in col.iter().enumerate() {
                    level[tower.columns[j][b] as usize] = s;
                }
                level
            })
            .collect();
        Self { alphabet, levels }
    }

    /// Independent labels with law `probs` on every atom of every level.
    pub fn iid(tower: &Tower, probs: &[f64], seed: u64) -> Result<Self, CorrectorError> {
        let alphabet = Alphabet::new(probs.len())?;
        let total: f64 = probs.iter().sum();
        if probs.iter().any(|&p| p < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(CorrectorError::Domain(format!("{probs:?} is not a probability vector")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let levels = (0..tower.height)
            .map(|_| {
                (0..tower.atoms)
                    .map(|_| {
                        let mut u: f64 = rng.random();
                        let mut s = 0;
                        while s + 1 < probs.len() && u >= probs[s] {
                            u -= probs[s];
                            s += 1;
                        }
                        s as u8
                    })
                    .collect()
            })
            .collect();
        Ok(Self { alphabet, levels })
    }

    /// Binary labels read off the column index: column `b` carries bit `(j mod bits)` of
    /// `b` at level `j`, flipped independently with probability `flip_rate`.
    ///
    /// With `atom_count` a multiple of `2^bits` and no flips, the labels over any set of
    /// levels that are distinct mod `bits` are exactly independent and uniform.
    pub fn base_bits(
        tower: &Tower,
        bits: u32,
        flip_rate: f64,
        seed: u64,
    ) -> Result<Self, CorrectorError> {
        if bits == 0 || bits > 31 {
            return Err(CorrectorError::Domain(format!("bits = {bits} outside 1..=31")));
        }
        if !(0.0..=1.0).contains(&flip_rate) {
            return Err(CorrectorError::Domain(format!("flip rate {flip_rate} outside [0, 1]")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let view: Vec<Vec<u8>> = (0..tower.height)
            .map(|j| {
                let bit = (j as u32) % bits;
                (0..tower.atoms)
                    .map(|b| {
                        let s = ((b >> bit) & 1) as u8;
                        if flip_rate > 0.0 && rng.random::<f64>() < flip_rate {
                            1 - s
                        } else {
                            s
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self::from_column_view(Alphabet::binary(), tower, &view))
    }
}

/// Per-level bookkeeping flags. `in_e`: the partition is not independent over the
/// current window at this shift; `in_e1`: the new time is not η-independent here.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelFlags {
    pub in_e: Vec<bool>,
    pub in_e1: Vec<bool>,
}

impl LevelFlags {
    pub fn clear(height: usize) -> Self {
        Self {
            in_e: vec![false; height],
            in_e1: vec![false; height],
        }
    }

    pub fn is_flagged(&self, j: usize) -> bool {
        self.in_e.get(j).copied().unwrap_or(false) || self.in_e1.get(j).copied().unwrap_or(false)
    }
}

/// Empirical distribution of the names over `j + K`, read along every column.
pub fn name_distribution(
    tower: &Tower,
    p: &LabeledPartition,
    j: usize,
    k: &IndexSet,
) -> Result<DenseMeasure, CorrectorError> {
    p.check_fits(tower)?;
    let view = p.column_view(tower);
    let columns: Vec<usize> = (0..tower.atoms).collect();
    names_over(&view, p.alphabet, &columns, j, k)
}

/// Name distribution over `j + K` of the given columns (uniform weights).
pub(crate) fn names_over(
    view: &[Vec<u8>],
    alphabet: Alphabet,
    columns: &[usize],
    j: usize,
    k: &IndexSet,
) -> Result<DenseMeasure, CorrectorError> {
    let counts = name_counts(view, alphabet, columns, j, k)?;
    let n = columns.len().max(1) as f64;
    let table = counts.iter().map(|&c| c as f64 / n).collect();
    Ok(DenseMeasure::new(alphabet, k.shifted(j as i64), table, MeasureKind::Probability)?)
}

/// Integer name counts over `j + K` of the given columns, in lexicographic cell order.
pub(crate) fn name_counts(
    view: &[Vec<u8>],
    alphabet: Alphabet,
    columns: &[usize],
    j: usize,
    k: &IndexSet,
) -> Result<Vec<u64>, CorrectorError> {
    let levels = window_levels(view.len(), j, k)?;
    let a = alphabet.size();
    let mut counts = vec![0u64; cell_count(alphabet, levels.len())?];
    for &b in columns {
        let cell = levels.iter().fold(0usize, |acc, &l| acc * a + view[l][b] as usize);
        counts[cell] += 1;
    }
    Ok(counts)
}

/// Levels `j + k`, ascending, checked against the tower height.
pub(crate) fn window_levels(height: usize, j: usize, k: &IndexSet) -> Result<Vec<usize>, CorrectorError> {
    k.iter()
        .map(|o| {
            let l = j as i64 + o;
            if o < 0 || l >= height as i64 {
                Err(CorrectorError::Domain(format!(
                    "window {j} + {k} leaves a tower of height {height}"
                )))
            } else {
                Ok(l as usize)
            }
        })
        .collect()
}
