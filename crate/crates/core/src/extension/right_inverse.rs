use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::measure::{
    cell_count, for_each_cell, sub_strides, Alphabet, DenseMeasure, IndexSet, DEFAULT_TOL,
};

use super::ExtensionError;

/// The projection `Π: (signed measures on A^R̄) → ⊕_R (signed measures on A^R)`.
///
/// Coefficient vectors of the codomain are the per-target tables concatenated
/// in the order of `targets`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionOperator {
    alphabet: Alphabet,
    domain: IndexSet,
    targets: Vec<IndexSet>,
    offsets: Vec<usize>,
    domain_dim: usize,
    codomain_dim: usize,
}

impl ProjectionOperator {
    pub fn new(
        alphabet: Alphabet,
        domain: IndexSet,
        targets: Vec<IndexSet>,
    ) -> Result<Self, ExtensionError> {
        if targets.is_empty() {
            return Err(ExtensionError::Domain("projection needs at least one target".into()));
        }
        if let Some(t) = targets.iter().find(|t| !t.is_subset(&domain)) {
            return Err(ExtensionError::Domain(format!("target {t} is not inside {domain}")));
        }
        let domain_dim = cell_count(alphabet, domain.len())?;
        let mut offsets = Vec::with_capacity(targets.len());
        let mut codomain_dim = 0;
        for t in &targets {
            offsets.push(codomain_dim);
            codomain_dim += cell_count(alphabet, t.len())?;
        }
        Ok(Self {
            alphabet,
            domain,
            targets,
            offsets,
            domain_dim,
            codomain_dim,
        })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn domain(&self) -> &IndexSet {
        &self.domain
    }

    pub fn targets(&self) -> &[IndexSet] {
        &self.targets
    }

    pub fn domain_dim(&self) -> usize {
        self.domain_dim
    }

    pub fn codomain_dim(&self) -> usize {
        self.codomain_dim
    }

    pub fn apply(&self, v: &DenseMeasure) -> Result<Vec<DenseMeasure>, ExtensionError> {
        if v.support() != &self.domain || v.alphabet() != self.alphabet {
            return Err(ExtensionError::Domain(format!(
                "Π acts on measures over {}, got {}",
                self.domain,
                v.support()
            )));
        }
        self.targets
            .iter()
            .map(|t| Ok(v.project(t)?.into_signed()))
            .collect()
    }

    /// Matrix of Π in the cell bases.
    pub fn matrix(&self) -> Result<DMatrix<f64>, ExtensionError> {
        let a = self.alphabet.size();
        let maps = self
            .targets
            .iter()
            .map(|t| sub_strides(a, &self.domain, t))
            .collect::<Result<Vec<_>, _>>()?;
        let mut m = DMatrix::zeros(self.codomain_dim, self.domain_dim);
        for_each_cell(a, self.domain.len(), &maps, |c, _, mapped| {
            for (off, r) in self.offsets.iter().zip(mapped) {
                m[(off + r, c)] = 1.0;
            }
        });
        Ok(m)
    }

    pub(crate) fn flatten(&self, family: &[DenseMeasure]) -> Result<DVector<f64>, ExtensionError> {
        if family.len() != self.targets.len() {
            return Err(ExtensionError::Domain(format!(
                "expected {} components, got {}",
                self.targets.len(),
                family.len()
            )));
        }
        let mut out = Vec::with_capacity(self.codomain_dim);
        for (t, m) in self.targets.iter().zip(family) {
            if m.support() != t || m.alphabet() != self.alphabet {
                return Err(ExtensionError::Domain(format!(
                    "component on {} where {t} was expected",
                    m.support()
                )));
            }
            out.extend_from_slice(m.table());
        }
        Ok(DVector::from_vec(out))
    }

    /// `{Π(e_c)}` over all cells `c` of `A^R̄`: a spanning set of the range.
    pub fn spanning_set(&self) -> Result<Vec<Vec<DenseMeasure>>, ExtensionError> {
        (0..self.domain_dim)
            .map(|c| {
                let mut table = vec![0.0; self.domain_dim];
                table[c] = 1.0;
                self.apply(&DenseMeasure::signed(self.alphabet, self.domain.clone(), table)?)
            })
            .collect()
    }
}

/// A right inverse `B` of `Π` with `B(w) = v` for a fixed anchor pair `(v, w)`:
/// `B(u) = P⁺u + (v − P⁺w)⟨w,u⟩/⟨w,w⟩`, with `P⁺` the Moore–Penrose pseudo-inverse.
#[derive(Clone, Debug)]
pub struct RightInverse {
    op: ProjectionOperator,
    pinv: DMatrix<f64>,
    correction: DVector<f64>,
    w: DVector<f64>,
    w_norm2: f64,
    anchor_v: DenseMeasure,
    norm_bound: f64,
}

impl RightInverse {
    pub fn operator(&self) -> &ProjectionOperator {
        &self.op
    }

    pub fn anchor(&self) -> &DenseMeasure {
        &self.anchor_v
    }

    /// Measured `‖B‖`: the largest `‖Bu‖∞ / ‖u‖∞` over an orthonormal basis of the range of Π.
    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn apply(&self, u: &[DenseMeasure]) -> Result<DenseMeasure, ExtensionError> {
        let x = self.apply_vec(&self.op.flatten(u)?);
        Ok(DenseMeasure::signed(
            self.op.alphabet,
            self.op.domain.clone(),
            x.iter().copied().collect(),
        )?)
    }

    fn apply_vec(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.pinv * u + &self.correction * (self.w.dot(u) / self.w_norm2)
    }
}

pub fn bounded_right_inverse(
    op: ProjectionOperator,
    v: &DenseMeasure,
    w: &[DenseMeasure],
) -> Result<RightInverse, ExtensionError> {
    let w_vec = op.flatten(w)?;
    let w_norm2 = w_vec.norm_squared();
    if w_norm2 == 0.0 {
        return Err(ExtensionError::Domain("anchor family w is zero".into()));
    }
    let projected = op.flatten(&op.apply(v)?)?;
    let gap = (&projected - &w_vec).amax();
    if gap > DEFAULT_TOL {
        return Err(ExtensionError::Anchor(format!("Π(v) differs from w by {gap:e}")));
    }
    // nalgebra's bidiagonal SVD loses accuracy on these 0/1 matrices with heavily
    // repeated singular values, so diagonalize the smaller Gram matrix instead. The
    // nonzero singular values of Π are ≥ 1, far from the rank cutoff.
    let matrix = op.matrix()?;
    let tall = matrix.nrows() >= matrix.ncols();
    let gram = if tall { matrix.transpose() * &matrix } else { &matrix * matrix.transpose() };
    let eig = SymmetricEigen::new(gram);
    let l_max = eig.eigenvalues.max().max(0.0);
    let mut pinv = DMatrix::zeros(op.domain_dim, op.codomain_dim);
    let mut recomposed = DMatrix::zeros(op.codomain_dim, op.domain_dim);
    let mut basis = Vec::new();
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l > l_max * 1e-12 {
            let s = l.sqrt();
            let e = eig.eigenvectors.column(i).into_owned();
            let (u_i, v_i) = if tall {
                (&matrix * &e / s, e)
            } else {
                let v = matrix.transpose() * &e / s;
                (e, v)
            };
            pinv += &v_i * u_i.transpose() / s;
            recomposed += &u_i * v_i.transpose() * s;
            basis.push(u_i);
        }
    }
    let s_max = l_max.sqrt();
    let residual = (&recomposed - &matrix).amax();
    if residual > 1e-9 * s_max.max(1.0) {
        return Err(ExtensionError::Numerical(format!("decomposition of Π has residual {residual:e}")));
    }
    let v_vec = DVector::from_column_slice(v.table());
    let correction = &v_vec - &pinv * &w_vec;
    let mut b = RightInverse {
        op,
        pinv,
        correction,
        w: w_vec,
        w_norm2,
        anchor_v: v.clone().into_signed(),
        norm_bound: 0.0,
    };
    b.norm_bound = basis
        .iter()
        .map(|e| b.apply_vec(e).amax() / e.amax())
        .fold(0.0, f64::max);
    if !b.norm_bound.is_finite() {
        return Err(ExtensionError::Numerical("right inverse has a non-finite norm".into()));
    }
    Ok(b)
}
