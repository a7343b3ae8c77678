use std::fmt;

use serde::{Deserialize, Serialize};

use super::MeasureError;

/// Finite alphabet `{0, .., size-1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Alphabet(usize);

impl Alphabet {
    pub const MAX_SIZE: usize = 256;

    pub fn new(size: usize) -> Result<Self, MeasureError> {
        if !(2..=Self::MAX_SIZE).contains(&size) {
            return Err(MeasureError::Domain(format!(
                "alphabet size {size} outside [2, {}]",
                Self::MAX_SIZE
            )));
        }
        Ok(Self(size))
    }

    pub fn binary() -> Self {
        Self(2)
    }

    #[inline]
    pub fn size(self) -> usize {
        self.0
    }

    /// Largest alphabet compatible with every one-dimensional atom having mass at least `alpha`.
    pub fn max_size_for(alpha: f64) -> usize {
        (1.0 / alpha + 1e-12).floor() as usize
    }
}

impl TryFrom<usize> for Alphabet {
    type Error = MeasureError;
    fn try_from(size: usize) -> Result<Self, Self::Error> {
        Self::new(size)
    }
}

impl From<Alphabet> for usize {
    fn from(a: Alphabet) -> usize {
        a.0
    }
}

/// Strictly increasing finite set of coordinates.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<i64>", into = "Vec<i64>")]
pub struct IndexSet(Vec<i64>);

impl IndexSet {
    pub fn new(indices: Vec<i64>) -> Result<Self, MeasureError> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MeasureError::Domain(format!(
                "index set {indices:?} is not strictly increasing"
            )));
        }
        Ok(Self(indices))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn singleton(i: i64) -> Self {
        Self(vec![i])
    }

    /// Contiguous range `lo..=hi` (empty when `hi < lo`).
    pub fn interval(lo: i64, hi: i64) -> Self {
        Self((lo..=hi).collect())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = i64> + '_ {
        self.0.iter().copied()
    }

    pub fn first(&self) -> Option<i64> {
        self.0.first().copied()
    }

    pub fn last(&self) -> Option<i64> {
        self.0.last().copied()
    }

    pub fn contains(&self, i: i64) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn position(&self, i: i64) -> Option<usize> {
        self.0.binary_search(&i).ok()
    }

    pub fn is_subset(&self, other: &IndexSet) -> bool {
        self.0.iter().all(|&i| other.contains(i))
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        self.0.iter().chain(other.0.iter()).copied().collect()
    }

    pub fn intersection(&self, other: &IndexSet) -> IndexSet {
        Self(self.0.iter().copied().filter(|&i| other.contains(i)).collect())
    }

    pub fn difference(&self, other: &IndexSet) -> IndexSet {
        Self(self.0.iter().copied().filter(|&i| !other.contains(i)).collect())
    }

    pub fn with(&self, i: i64) -> IndexSet {
        self.union(&IndexSet::singleton(i))
    }

    pub fn shifted(&self, offset: i64) -> IndexSet {
        Self(self.0.iter().map(|&i| i + offset).collect())
    }

    /// Position of every element of `self` inside `sup`. Fails unless `self ⊆ sup`.
    pub(crate) fn positions_in(&self, sup: &IndexSet) -> Result<Vec<usize>, MeasureError> {
        self.0
            .iter()
            .map(|&i| {
                sup.position(i).ok_or_else(|| {
                    MeasureError::Domain(format!("index {i} of {self} is not in {sup}"))
                })
            })
            .collect()
    }
}

impl FromIterator<i64> for IndexSet {
    fn from_iter<T: IntoIterator<Item = i64>>(iter: T) -> Self {
        let mut v: Vec<i64> = iter.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }
}

impl TryFrom<Vec<i64>> for IndexSet {
    type Error = MeasureError;
    fn try_from(v: Vec<i64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<IndexSet> for Vec<i64> {
    fn from(s: IndexSet) -> Vec<i64> {
        s.0
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (n, i) in self.0.iter().enumerate() {
            if n > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}
