use serde::{Deserialize, Serialize};

use super::{Alphabet, DenseMeasure, IndexSet, MarginalFamily, MeasureError, MeasureKind};

/// JSON literal of a measure: `{alphabet_size, indices, table, kind}`.
///
/// `table` is lexicographic over the ascending `indices`, the smallest index
/// varying slowest: for indices `[i_1 < .. < i_k]` the cell of the tuple
/// `(x_1, .., x_k)` sits at position `Σ x_j · |A|^(k-j)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureLiteral {
    pub alphabet_size: usize,
    pub indices: Vec<i64>,
    pub table: Vec<f64>,
    #[serde(default = "probability_kind")]
    pub kind: MeasureKind,
}

fn probability_kind() -> MeasureKind {
    MeasureKind::Probability
}

impl TryFrom<MeasureLiteral> for DenseMeasure {
    type Error = MeasureError;
    fn try_from(lit: MeasureLiteral) -> Result<Self, Self::Error> {
        DenseMeasure::new(
            Alphabet::new(lit.alphabet_size)?,
            IndexSet::new(lit.indices)?,
            lit.table,
            lit.kind,
        )
    }
}

impl From<&DenseMeasure> for MeasureLiteral {
    fn from(m: &DenseMeasure) -> Self {
        Self {
            alphabet_size: m.alphabet().size(),
            indices: m.support().as_slice().to_vec(),
            table: m.table().to_vec(),
            kind: m.kind(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberSpec {
    pub indices: Vec<i64>,
    pub table: Vec<f64>,
}

/// JSON family file: `{alphabet_size, alpha, N, members: [{indices, table}], window: [lo, hi]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub alphabet_size: usize,
    pub alpha: f64,
    #[serde(rename = "N")]
    pub n_bound: usize,
    pub members: Vec<MemberSpec>,
    pub window: [i64; 2],
}

impl FamilySpec {
    pub fn build(&self) -> Result<(MarginalFamily, IndexSet), MeasureError> {
        let alphabet = Alphabet::new(self.alphabet_size)?;
        let members = self
            .members
            .iter()
            .enumerate()
            .map(|(i, m)| {
                IndexSet::new(m.indices.clone())
                    .and_then(|k| DenseMeasure::probability(alphabet, k, m.table.clone()))
                    .map_err(|e| MeasureError::Domain(format!("members[{i}]: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let family = MarginalFamily::new(alphabet, members, self.alpha, self.n_bound)?;
        let window = IndexSet::interval(self.window[0], self.window[1]);
        Ok((family, window))
    }

    pub fn from_family(family: &MarginalFamily, window: [i64; 2]) -> Self {
        Self {
            alphabet_size: family.alphabet().size(),
            alpha: family.alpha(),
            n_bound: family.n_bound(),
            members: family
                .members()
                .iter()
                .map(|m| MemberSpec {
                    indices: m.support().as_slice().to_vec(),
                    table: m.table().to_vec(),
                })
                .collect(),
            window,
        }
    }
}
