use serde::{Deserialize, Serialize};

use super::{Alphabet, IndexSet, MeasureError, DEFAULT_TOL, MAX_CELLS};

/// Whether a table is a general signed measure or a probability measure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    Signed,
    Probability,
}

/// Coordinate ordering used when measuring δ-independence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IndexOrder {
    /// The support in ascending order.
    Ascending,
    /// An explicit permutation of the support.
    Given(Vec<i64>),
    /// Minimum over every ordering of the support (only for supports of size ≤ 8).
    ScanAll,
}

/// What to do with a conditioning atom of zero mass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NullAtoms {
    Reject,
    Skip,
}

/// Largest support accepted by [`IndexOrder::ScanAll`].
pub const SCAN_ALL_LIMIT: usize = 8;

const NULL_MASS: f64 = 1e-15;

/// Number of cells of `A^K`, or a capacity error beyond [`MAX_CELLS`].
pub fn cell_count(alphabet: Alphabet, k: usize) -> Result<usize, MeasureError> {
    let mut cells: u128 = 1;
    for _ in 0..k {
        cells *= alphabet.size() as u128;
        if cells > MAX_CELLS as u128 {
            return Err(MeasureError::Capacity {
                cells: format!("{}^{}", alphabet.size(), k),
                cap: MAX_CELLS,
            });
        }
    }
    Ok(cells as usize)
}

/// Per-position strides of `sub` inside a lexicographic table over `sup`
/// (zero for positions of `sup` not in `sub`).
pub(crate) fn sub_strides(
    base: usize,
    sup: &IndexSet,
    sub: &IndexSet,
) -> Result<Vec<usize>, MeasureError> {
    let pos = sub.positions_in(sup)?;
    let mut strides = vec![0usize; sup.len()];
    let mut s = 1usize;
    for &p in pos.iter().rev() {
        strides[p] = s;
        s *= base;
    }
    Ok(strides)
}

/// Visits every cell of `A^k` in lexicographic order. For each cell the callback gets
/// the linear cell index, the digit tuple, and the linear index of the tuple's
/// restriction under each stride map.
pub(crate) fn for_each_cell(
    base: usize,
    k: usize,
    maps: &[Vec<usize>],
    mut f: impl FnMut(usize, &[usize], &[usize]),
) {
    let mut digits = vec![0usize; k];
    let mut mapped = vec![0usize; maps.len()];
    let mut cell = 0usize;
    loop {
        f(cell, &digits, &mapped);
        cell += 1;
        let mut p = k;
        loop {
            if p == 0 {
                return;
            }
            p -= 1;
            if digits[p] + 1 < base {
                digits[p] += 1;
                for (m, s) in mapped.iter_mut().zip(maps) {
                    *m += s[p];
                }
                break;
            }
            for (m, s) in mapped.iter_mut().zip(maps) {
                *m -= (base - 1) * s[p];
            }
            digits[p] = 0;
        }
    }
}

/// A (possibly signed) measure on `A^K` stored as a full lexicographic table.
///
/// Cell order is row-major over the ascending support: the smallest index varies
/// slowest. On the empty support the table has a single cell (the total mass).
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMeasure {
    alphabet: Alphabet,
    support: IndexSet,
    table: Vec<f64>,
    kind: MeasureKind,
}

impl DenseMeasure {
    pub fn new(
        alphabet: Alphabet,
        support: IndexSet,
        table: Vec<f64>,
        kind: MeasureKind,
    ) -> Result<Self, MeasureError> {
        let expected = cell_count(alphabet, support.len())?;
        if table.len() != expected {
            return Err(MeasureError::Length {
                expected,
                got: table.len(),
            });
        }
        if let Some(bad) = table.iter().position(|x| !x.is_finite()) {
            return Err(MeasureError::Domain(format!("cell {bad} is not finite")));
        }
        let m = Self {
            alphabet,
            support,
            table,
            kind,
        };
        if kind == MeasureKind::Probability {
            m.check_probability(DEFAULT_TOL)?;
        }
        Ok(m)
    }

    pub fn probability(
        alphabet: Alphabet,
        support: IndexSet,
        table: Vec<f64>,
    ) -> Result<Self, MeasureError> {
        Self::new(alphabet, support, table, MeasureKind::Probability)
    }

    pub fn signed(
        alphabet: Alphabet,
        support: IndexSet,
        table: Vec<f64>,
    ) -> Result<Self, MeasureError> {
        Self::new(alphabet, support, table, MeasureKind::Signed)
    }

    /// The unique probability measure on `A^∅`.
    pub fn unit(alphabet: Alphabet) -> Self {
        Self {
            alphabet,
            support: IndexSet::empty(),
            table: vec![1.0],
            kind: MeasureKind::Probability,
        }
    }

    pub fn uniform(alphabet: Alphabet, support: IndexSet) -> Result<Self, MeasureError> {
        let n = cell_count(alphabet, support.len())?;
        Self::probability(alphabet, support, vec![1.0 / n as f64; n])
    }

    /// One-dimensional measure on `{index}`.
    pub fn on_coordinate(
        alphabet: Alphabet,
        index: i64,
        weights: Vec<f64>,
    ) -> Result<Self, MeasureError> {
        Self::probability(alphabet, IndexSet::singleton(index), weights)
    }

    /// Table built by evaluating `f` on every digit tuple.
    pub fn from_fn(
        alphabet: Alphabet,
        support: IndexSet,
        kind: MeasureKind,
        mut f: impl FnMut(&[usize]) -> f64,
    ) -> Result<Self, MeasureError> {
        let n = cell_count(alphabet, support.len())?;
        let mut table = Vec::with_capacity(n);
        for_each_cell(alphabet.size(), support.len(), &[], |_, d, _| table.push(f(d)));
        Self::new(alphabet, support, table, kind)
    }

    /// Product measure `⊗ factors` over pairwise disjoint supports.
    pub fn product(alphabet: Alphabet, factors: &[DenseMeasure]) -> Result<Self, MeasureError> {
        factors
            .iter()
            .try_fold(Self::unit(alphabet), |acc, f| acc.tensor(f))
    }

    #[inline]
    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    #[inline]
    pub fn support(&self) -> &IndexSet {
        &self.support
    }

    #[inline]
    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn into_table(self) -> Vec<f64> {
        self.table
    }

    #[inline]
    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    pub fn total_mass(&self) -> f64 {
        self.table.iter().sum()
    }

    pub fn min_cell(&self) -> f64 {
        self.table.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.table.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Linear index of a digit tuple over the support.
    pub fn cell_index(&self, digits: &[usize]) -> usize {
        let a = self.alphabet.size();
        digits.iter().fold(0, |acc, &d| acc * a + d)
    }

    /// Digit tuple of a linear cell index.
    pub fn digits_of(&self, mut cell: usize) -> Vec<usize> {
        let a = self.alphabet.size();
        let mut d = vec![0; self.support.len()];
        for slot in d.iter_mut().rev() {
            *slot = cell % a;
            cell /= a;
        }
        d
    }

    pub fn value(&self, digits: &[usize]) -> f64 {
        self.table[self.cell_index(digits)]
    }

    pub fn check_probability(&self, tol: f64) -> Result<(), MeasureError> {
        if let Some((i, &v)) = self
            .table
            .iter()
            .enumerate()
            .find(|(_, &v)| v < -tol)
        {
            return Err(MeasureError::NotProbability(format!(
                "cell {i} has negative mass {v:e}"
            )));
        }
        let mass = self.total_mass();
        if (mass - 1.0).abs() > tol {
            return Err(MeasureError::NotProbability(format!(
                "total mass {mass} differs from 1"
            )));
        }
        Ok(())
    }

    /// Reinterprets as a probability measure, validating at `tol`.
    pub fn into_probability(mut self, tol: f64) -> Result<Self, MeasureError> {
        self.kind = MeasureKind::Probability;
        self.check_probability(tol)?;
        Ok(self)
    }

    pub fn into_signed(mut self) -> Self {
        self.kind = MeasureKind::Signed;
        self
    }

    fn same_frame(&self, other: &DenseMeasure) -> Result<(), MeasureError> {
        if self.alphabet != other.alphabet {
            return Err(MeasureError::Domain("alphabets differ".into()));
        }
        if self.support != other.support {
            return Err(MeasureError::Domain(format!(
                "supports differ: {} vs {}",
                self.support, other.support
            )));
        }
        Ok(())
    }

    /// `a·self + b·other` as a signed measure on the common support.
    pub fn linear_combination(
        &self,
        a: f64,
        other: &DenseMeasure,
        b: f64,
    ) -> Result<DenseMeasure, MeasureError> {
        self.same_frame(other)?;
        let table = self
            .table
            .iter()
            .zip(&other.table)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Self {
            alphabet: self.alphabet,
            support: self.support.clone(),
            table,
            kind: MeasureKind::Signed,
        })
    }

    pub fn scaled(&self, c: f64) -> DenseMeasure {
        Self {
            alphabet: self.alphabet,
            support: self.support.clone(),
            table: self.table.iter().map(|x| c * x).collect(),
            kind: MeasureKind::Signed,
        }
    }

    /// Product with a measure on a disjoint support.
    pub fn tensor(&self, other: &DenseMeasure) -> Result<DenseMeasure, MeasureError> {
        if self.alphabet != other.alphabet {
            return Err(MeasureError::Domain("alphabets differ".into()));
        }
        if !self.support.intersection(&other.support).is_empty() {
            return Err(MeasureError::Domain(format!(
                "tensor factors overlap: {} and {}",
                self.support, other.support
            )));
        }
        let support = self.support.union(&other.support);
        let a = self.alphabet.size();
        let maps = [
            sub_strides(a, &support, &self.support)?,
            sub_strides(a, &support, &other.support)?,
        ];
        let mut table = Vec::with_capacity(cell_count(self.alphabet, support.len())?);
        for_each_cell(a, support.len(), &maps, |_, _, m| {
            table.push(self.table[m[0]] * other.table[m[1]])
        });
        let kind = if self.kind == MeasureKind::Probability && other.kind == MeasureKind::Probability
        {
            MeasureKind::Probability
        } else {
            MeasureKind::Signed
        };
        Self::new(self.alphabet, support, table, kind)
    }

    /// Push-forward onto `A^J` for `J ⊆ K`.
    pub fn project(&self, target: &IndexSet) -> Result<DenseMeasure, MeasureError> {
        if target == &self.support {
            return Ok(self.clone());
        }
        let a = self.alphabet.size();
        let strides = sub_strides(a, &self.support, target)?;
        let mut table = vec![0.0; cell_count(self.alphabet, target.len())?];
        for_each_cell(a, self.support.len(), &[strides], |c, _, m| {
            table[m[0]] += self.table[c]
        });
        Ok(Self {
            alphabet: self.alphabet,
            support: target.clone(),
            table,
            kind: self.kind,
        })
    }

    /// One-dimensional marginal on coordinate `h`, as a weight vector over the alphabet.
    pub fn marginal(&self, h: i64) -> Result<Vec<f64>, MeasureError> {
        Ok(self.project(&IndexSet::singleton(h))?.table)
    }

    /// Product of the one-dimensional marginals.
    pub fn product_of_marginals(&self) -> Result<DenseMeasure, MeasureError> {
        if self.kind != MeasureKind::Probability {
            return Err(MeasureError::Domain(
                "product of marginals needs a probability measure".into(),
            ));
        }
        let factors = self
            .support
            .iter()
            .map(|h| self.project(&IndexSet::singleton(h)))
            .collect::<Result<Vec<_>, _>>()?;
        Self::product(self.alphabet, &factors)
    }

    /// Conditional law of the coordinates `K∖J` given the `J`-coordinates equal `y`.
    pub fn conditional_dist(
        &self,
        given: &IndexSet,
        y: &[usize],
    ) -> Result<DenseMeasure, MeasureError> {
        if y.len() != given.len() {
            return Err(MeasureError::Length {
                expected: given.len(),
                got: y.len(),
            });
        }
        let a = self.alphabet.size();
        if y.iter().any(|&s| s >= a) {
            return Err(MeasureError::Domain(format!("symbol outside alphabet in {y:?}")));
        }
        let pos = given.positions_in(&self.support)?;
        let rest = self.support.difference(given);
        let rest_strides = sub_strides(a, &self.support, &rest)?;
        let mut table = vec![0.0; cell_count(self.alphabet, rest.len())?];
        for_each_cell(a, self.support.len(), &[rest_strides], |c, d, m| {
            if pos.iter().zip(y).all(|(&p, &s)| d[p] == s) {
                table[m[0]] += self.table[c];
            }
        });
        let mass: f64 = table.iter().sum();
        if mass <= NULL_MASS {
            return Err(MeasureError::ZeroMass(format!(
                "conditioning atom {y:?} on {given} has mass {mass:e}"
            )));
        }
        table.iter_mut().for_each(|x| *x /= mass);
        Self::new(self.alphabet, rest, table, MeasureKind::Probability)
    }

    /// The slice `m(·, a)`: the signed measure on `K∖{coord}` obtained by fixing
    /// coordinate `coord` to `symbol` (no renormalisation).
    pub fn slice(&self, coord: i64, symbol: usize) -> Result<DenseMeasure, MeasureError> {
        let given = IndexSet::singleton(coord);
        let pos = given.positions_in(&self.support)?[0];
        let rest = self.support.difference(&given);
        let a = self.alphabet.size();
        let strides = sub_strides(a, &self.support, &rest)?;
        let mut table = vec![0.0; cell_count(self.alphabet, rest.len())?];
        for_each_cell(a, self.support.len(), &[strides], |c, d, m| {
            if d[pos] == symbol {
                table[m[0]] = self.table[c];
            }
        });
        Ok(Self {
            alphabet: self.alphabet,
            support: rest,
            table,
            kind: MeasureKind::Signed,
        })
    }

    /// Largest sup-norm gap between the law of `target` given an atom of the
    /// `prefix` partition and its unconditional law.
    pub fn coordinate_defect(
        &self,
        prefix: &IndexSet,
        target: i64,
        null: NullAtoms,
    ) -> Result<f64, MeasureError> {
        if prefix.is_empty() {
            return Ok(0.0);
        }
        if prefix.contains(target) {
            return Err(MeasureError::Domain(format!(
                "target {target} lies in the conditioning set {prefix}"
            )));
        }
        let a = self.alphabet.size();
        let prefix_strides = sub_strides(a, &self.support, prefix)?;
        let target_pos = IndexSet::singleton(target).positions_in(&self.support)?[0];
        let atoms = cell_count(self.alphabet, prefix.len())?;
        let mut atom_mass = vec![0.0; atoms];
        let mut joint = vec![0.0; atoms * a];
        for_each_cell(a, self.support.len(), &[prefix_strides], |c, d, m| {
            atom_mass[m[0]] += self.table[c];
            joint[m[0] * a + d[target_pos]] += self.table[c];
        });
        let total: f64 = atom_mass.iter().sum();
        let mut marginal = vec![0.0; a];
        for q in 0..atoms {
            for s in 0..a {
                marginal[s] += joint[q * a + s];
            }
        }
        marginal.iter_mut().for_each(|x| *x /= total);
        let mut defect: f64 = 0.0;
        for q in 0..atoms {
            if atom_mass[q] <= NULL_MASS {
                match null {
                    NullAtoms::Skip => continue,
                    NullAtoms::Reject => {
                        return Err(MeasureError::ZeroMass(format!(
                            "atom {q} of the partition over {prefix} has mass {:e}",
                            atom_mass[q]
                        )))
                    }
                }
            }
            for s in 0..a {
                defect = defect.max((joint[q * a + s] / atom_mass[q] - marginal[s]).abs());
            }
        }
        Ok(defect)
    }

    fn ordering_defect(&self, order: &[i64], null: NullAtoms) -> Result<f64, MeasureError> {
        let mut defect: f64 = 0.0;
        for i in 1..order.len() {
            let prefix: IndexSet = order[..i].iter().copied().collect();
            defect = defect.max(self.coordinate_defect(&prefix, order[i], null)?);
        }
        Ok(defect)
    }

    /// Smallest δ for which the measure is δ-independent under the given ordering
    /// (or under the best ordering for [`IndexOrder::ScanAll`]).
    pub fn delta_independence(&self, order: &IndexOrder) -> Result<f64, MeasureError> {
        self.independence_defect(order, NullAtoms::Reject)
    }

    pub fn independence_defect(
        &self,
        order: &IndexOrder,
        null: NullAtoms,
    ) -> Result<f64, MeasureError> {
        if self.kind != MeasureKind::Probability {
            return Err(MeasureError::Domain(
                "δ-independence needs a probability measure".into(),
            ));
        }
        match order {
            IndexOrder::Ascending => self.ordering_defect(self.support.as_slice(), null),
            IndexOrder::Given(v) => {
                let as_set: IndexSet = v.iter().copied().collect();
                if v.len() != self.support.len() || as_set != self.support {
                    return Err(MeasureError::Domain(format!(
                        "ordering {v:?} is not a permutation of {}",
                        self.support
                    )));
                }
                self.ordering_defect(v, null)
            }
            IndexOrder::ScanAll => self.best_ordering_defect(null),
        }
    }

    // Minimum over orderings by dynamic programming over prefix sets: the defect of an
    // ordering only depends on which set precedes each coordinate.
    fn best_ordering_defect(&self, null: NullAtoms) -> Result<f64, MeasureError> {
        let k = self.support.len();
        if k > SCAN_ALL_LIMIT {
            return Err(MeasureError::Capacity {
                cells: format!("{k}! orderings"),
                cap: SCAN_ALL_LIMIT,
            });
        }
        let idx = self.support.as_slice();
        let full = (1usize << k) - 1;
        let mut best = vec![f64::INFINITY; 1 << k];
        best[0] = 0.0;
        let mut last_err = None;
        for set in 1..=full {
            for h in 0..k {
                if set & (1 << h) == 0 || best[set ^ (1 << h)].is_infinite() {
                    continue;
                }
                let prev = set ^ (1 << h);
                let prefix: IndexSet = (0..k).filter(|&i| prev & (1 << i) != 0).map(|i| idx[i]).collect();
                match self.coordinate_defect(&prefix, idx[h], null) {
                    Ok(term) => best[set] = best[set].min(best[prev].max(term)),
                    Err(e @ MeasureError::ZeroMass(_)) => last_err = Some(e),
                    Err(e) => return Err(e),
                }
            }
        }
        if best[full].is_infinite() {
            return Err(last_err.unwrap_or_else(|| MeasureError::ZeroMass("no admissible ordering".into())));
        }
        Ok(best[full])
    }
}

/// Largest cell-wise gap between two measures on the same frame.
pub fn sup_distance(m1: &DenseMeasure, m2: &DenseMeasure) -> Result<f64, MeasureError> {
    m1.same_frame(m2)?;
    Ok(m1
        .table
        .iter()
        .zip(&m2.table)
        .fold(0.0, |acc, (x, y)| acc.max((x - y).abs())))
}

/// Whether the projections onto the common coordinates agree within `tol`.
pub fn is_consistent(m1: &DenseMeasure, m2: &DenseMeasure, tol: f64) -> bool {
    consistency_gap(m1, m2).is_ok_and(|g| g <= tol)
}

/// Sup-norm gap between the projections of two measures onto their common coordinates.
pub fn consistency_gap(m1: &DenseMeasure, m2: &DenseMeasure) -> Result<f64, MeasureError> {
    let common = m1.support.intersection(&m2.support);
    sup_distance(&m1.project(&common)?, &m2.project(&common)?)
}

/// Relative product `λ ×_{A^R̄} σ` with `R̄ = I ∩ S̄`:
/// `out(x) = λ(π_I x) σ(π_S̄ x) / λ(π_R̄ x)`.
pub fn relative_product(
    lambda: &DenseMeasure,
    sigma: &DenseMeasure,
    tol: f64,
) -> Result<DenseMeasure, MeasureError> {
    if lambda.alphabet != sigma.alphabet {
        return Err(MeasureError::Domain("alphabets differ".into()));
    }
    let overlap = lambda.support.intersection(&sigma.support);
    let lambda_r = lambda.project(&overlap)?;
    let sigma_r = sigma.project(&overlap)?;
    let gap = sup_distance(&lambda_r, &sigma_r)?;
    if gap > tol {
        return Err(MeasureError::Inconsistent { gap, tol });
    }
    if let Some(c) = lambda_r.table.iter().position(|&x| x <= 0.0) {
        return Err(MeasureError::Singular(format!(
            "overlap {} has a null cell {:?}",
            overlap,
            lambda_r.digits_of(c)
        )));
    }
    let support = lambda.support.union(&sigma.support);
    let a = lambda.alphabet.size();
    let maps = [
        sub_strides(a, &support, &lambda.support)?,
        sub_strides(a, &support, &sigma.support)?,
        sub_strides(a, &support, &overlap)?,
    ];
    let mut table = Vec::with_capacity(cell_count(lambda.alphabet, support.len())?);
    for_each_cell(a, support.len(), &maps, |_, _, m| {
        table.push(lambda.table[m[0]] * sigma.table[m[1]] / lambda_r.table[m[2]])
    });
    let kind = if lambda.kind == MeasureKind::Probability && sigma.kind == MeasureKind::Probability {
        MeasureKind::Probability
    } else {
        MeasureKind::Signed
    };
    DenseMeasure::new(lambda.alphabet, support, table, kind)
}
