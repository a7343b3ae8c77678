use super::{Alphabet, DenseMeasure, IndexSet, MeasureError, MeasureKind};

/// Prescribed marginals `{μ_K}` over finite coordinate sets, together with the
/// lower bound `alpha` on one-dimensional atoms and the neighbourhood bound `N`.
///
/// The constructor only checks shape. Whether the hypotheses of the extension
/// theorem hold is a question for `extension::verify_hypotheses`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalFamily {
    alphabet: Alphabet,
    members: Vec<DenseMeasure>,
    alpha: f64,
    n_bound: usize,
}

impl MarginalFamily {
    pub fn new(
        alphabet: Alphabet,
        members: Vec<DenseMeasure>,
        alpha: f64,
        n_bound: usize,
    ) -> Result<Self, MeasureError> {
        if !(alpha > 0.0 && alpha <= 0.5) {
            return Err(MeasureError::Domain(format!("alpha {alpha} outside (0, 1/2]")));
        }
        if n_bound == 0 {
            return Err(MeasureError::Domain("N must be positive".into()));
        }
        for (i, m) in members.iter().enumerate() {
            if m.alphabet() != alphabet {
                return Err(MeasureError::Domain(format!("member {i} uses another alphabet")));
            }
            if m.kind() != MeasureKind::Probability {
                return Err(MeasureError::NotProbability(format!("member {i} on {}", m.support())));
            }
            if members[..i].iter().any(|o| o.support() == m.support()) {
                return Err(MeasureError::Domain(format!(
                    "support {} listed twice",
                    m.support()
                )));
            }
        }
        Ok(Self {
            alphabet,
            members,
            alpha,
            n_bound,
        })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn members(&self) -> &[DenseMeasure] {
        &self.members
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n_bound(&self) -> usize {
        self.n_bound
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// `∪𝓕`.
    pub fn union_support(&self) -> IndexSet {
        self.members
            .iter()
            .flat_map(|m| m.support().iter())
            .collect()
    }

    /// Members whose support contains `n`.
    pub fn containing(&self, n: i64) -> impl Iterator<Item = &DenseMeasure> + '_ {
        self.members.iter().filter(move |m| m.support().contains(n))
    }

    /// `|∪{K ∈ 𝓕 : n ∈ K}|`.
    pub fn neighbourhood(&self, n: i64) -> IndexSet {
        self.containing(n).flat_map(|m| m.support().iter()).collect()
    }

    /// The smallest `N` for which condition (F) holds.
    pub fn max_neighbourhood(&self) -> usize {
        self.union_support()
            .iter()
            .map(|n| self.neighbourhood(n).len())
            .max()
            .unwrap_or(0)
    }
}
