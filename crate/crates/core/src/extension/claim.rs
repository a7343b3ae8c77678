use std::collections::BTreeMap;

use serde::Serialize;

use crate::measure::{
    relative_product, sup_distance, DenseMeasure, IndexOrder, IndexSet, MarginalFamily,
    MeasureError, MeasureKind, NullAtoms, DEFAULT_TOL,
};

use super::{bounded_right_inverse, ExtensionError, ProjectionOperator};

/// Negative cells of σ smaller than this in magnitude are rounding noise.
const POSITIVITY_FLOOR: f64 = 1e-12;

/// One application of the single-index extension step.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtensionStep {
    pub index: i64,
    pub s_bar: IndexSet,
    pub r_bar: IndexSet,
    /// `None` when no member contains the index and it was added as an independent uniform coordinate.
    pub sigma: Option<DenseMeasure>,
    pub positivity_margin: f64,
    pub beta_defect: f64,
    pub b_norm: f64,
}

/// Serializable view of a step (σ omitted).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub index: i64,
    pub s_bar: IndexSet,
    pub r_bar: IndexSet,
    pub independent_coordinate: bool,
    pub positivity_margin: f64,
    pub beta_defect: f64,
    pub b_norm: f64,
}

impl From<&ExtensionStep> for StepRecord {
    fn from(s: &ExtensionStep) -> Self {
        Self {
            index: s.index,
            s_bar: s.s_bar.clone(),
            r_bar: s.r_bar.clone(),
            independent_coordinate: s.sigma.is_none(),
            positivity_margin: s.positivity_margin,
            beta_defect: s.beta_defect,
            b_norm: s.b_norm,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExtensionTrace {
    pub steps: Vec<ExtensionStep>,
}

impl ExtensionTrace {
    pub fn records(&self) -> Vec<StepRecord> {
        self.steps.iter().map(StepRecord::from).collect()
    }

    pub fn max_beta_defect(&self) -> f64 {
        self.steps.iter().map(|s| s.beta_defect).fold(0.0, f64::max)
    }

    pub fn max_b_norm(&self) -> f64 {
        self.steps.iter().map(|s| s.b_norm).fold(0.0, f64::max)
    }

    pub fn min_positivity_margin(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.positivity_margin)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Builds σ on `S̄` for the index `n`. `lambda` must live on a support containing `R̄`;
/// `processed` is the set `I` of already extended indices.
fn build_step(
    family: &MarginalFamily,
    lambda: &DenseMeasure,
    processed: &IndexSet,
    n: i64,
    beta: f64,
) -> Result<ExtensionStep, ExtensionError> {
    let at = ExtensionError::at(n);
    if processed.contains(n) {
        return Err(ExtensionError::Domain(format!("index {n} is already in I")));
    }
    let alphabet = family.alphabet();
    let f_n: Vec<&DenseMeasure> = family.containing(n).collect();
    if f_n.is_empty() {
        return Ok(ExtensionStep {
            index: n,
            s_bar: IndexSet::singleton(n),
            r_bar: IndexSet::empty(),
            sigma: None,
            positivity_margin: 1.0 / alphabet.size() as f64,
            beta_defect: 0.0,
            b_norm: 0.0,
        });
    }
    let i_prime = processed.with(n);

    // Distinct R = K∩I, each with one member it came from; S = R∪{n}.
    let mut r_list: Vec<(IndexSet, &DenseMeasure)> = Vec::new();
    for k in &f_n {
        let r = k.support().intersection(processed);
        if !r_list.iter().any(|(o, _)| o == &r) {
            r_list.push((r, *k));
        }
    }
    let r_bar: IndexSet = r_list.iter().flat_map(|(r, _)| r.iter()).collect();
    let s_bar = r_bar.with(n);
    if !r_bar.is_subset(lambda.support()) {
        return Err(ExtensionError::Domain(format!(
            "λ on {} does not cover R̄ = {r_bar}",
            lambda.support()
        )));
    }

    let v = lambda.project(&r_bar).map_err(at)?;
    let targets: Vec<IndexSet> = r_list.iter().map(|(r, _)| r.clone()).collect();
    let w = r_list
        .iter()
        .map(|(r, k)| Ok(k.project(r)?.into_signed()))
        .collect::<Result<Vec<_>, MeasureError>>()
        .map_err(ExtensionError::at(n))?;
    let op = ProjectionOperator::new(alphabet, r_bar.clone(), targets)?;
    let b = bounded_right_inverse(op, &v, &w)?;

    let s_parts = r_list
        .iter()
        .map(|(r, k)| k.project(&r.with(n)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(ExtensionError::at(n))?;
    let slices = (0..alphabet.size())
        .map(|a| {
            let u = s_parts
                .iter()
                .map(|m| m.slice(n, a))
                .collect::<Result<Vec<_>, _>>()
                .map_err(ExtensionError::at(n))?;
            b.apply(&u)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let n_pos = s_bar.position(n).expect("n ∈ S̄");
    let mut rest = Vec::with_capacity(r_bar.len());
    let raw = DenseMeasure::from_fn(alphabet, s_bar.clone(), MeasureKind::Signed, |d| {
        rest.clear();
        rest.extend(d.iter().enumerate().filter(|&(i, _)| i != n_pos).map(|(_, &x)| x));
        slices[d[n_pos]].value(&rest)
    })
    .map_err(ExtensionError::at(n))?;

    let margin = raw.min_cell();
    if margin < -POSITIVITY_FLOOR {
        let cell = raw
            .table()
            .iter()
            .position(|&x| x == margin)
            .map(|c| raw.digits_of(c))
            .unwrap_or_default();
        return Err(ExtensionError::Positivity {
            index: n,
            margin,
            cell,
        });
    }
    let table = raw.table().iter().map(|&x| x.max(0.0)).collect();
    let sigma = DenseMeasure::probability(alphabet, s_bar.clone(), table).map_err(ExtensionError::at(n))?;

    let gap = sup_distance(&sigma.project(&r_bar).map_err(ExtensionError::at(n))?, &v)
        .map_err(ExtensionError::at(n))?;
    if gap > DEFAULT_TOL {
        return Err(ExtensionError::Consistency {
            index: n,
            condition: "(1) σ extends λ on R̄",
            gap,
        });
    }
    for k in &f_n {
        let target = k.support().intersection(&i_prime);
        let gap = sup_distance(
            &sigma.project(&target).map_err(ExtensionError::at(n))?,
            &k.project(&target).map_err(ExtensionError::at(n))?,
        )
        .map_err(ExtensionError::at(n))?;
        if gap > DEFAULT_TOL {
            return Err(ExtensionError::Consistency {
                index: n,
                condition: "(2) σ matches μ_K on K∩I′",
                gap,
            });
        }
    }
    let defect = sigma
        .coordinate_defect(&r_bar, n, NullAtoms::Skip)
        .map_err(ExtensionError::at(n))?;
    if defect > beta {
        return Err(ExtensionError::Independence {
            index: n,
            defect,
            beta,
        });
    }
    Ok(ExtensionStep {
        index: n,
        s_bar,
        r_bar,
        sigma: Some(sigma),
        positivity_margin: margin.max(0.0),
        beta_defect: defect,
        b_norm: b.norm_bound(),
    })
}

fn apply_step(lambda: &DenseMeasure, step: &ExtensionStep) -> Result<DenseMeasure, ExtensionError> {
    let at = ExtensionError::at(step.index);
    match &step.sigma {
        None => {
            let u = DenseMeasure::uniform(lambda.alphabet(), IndexSet::singleton(step.index))
                .map_err(ExtensionError::at(step.index))?;
            lambda.tensor(&u).map_err(at)
        }
        Some(sigma) => relative_product(lambda, sigma, DEFAULT_TOL).map_err(at),
    }
}

/// One extension step: the measure on `I ∪ {n}` and its log.
pub fn extend_one_index(
    family: &MarginalFamily,
    lambda: &DenseMeasure,
    n: i64,
    beta: f64,
) -> Result<(DenseMeasure, ExtensionStep), ExtensionError> {
    if lambda.kind() != MeasureKind::Probability {
        return Err(ExtensionError::Domain("λ must be a probability measure".into()));
    }
    let step = build_step(family, lambda, lambda.support(), n, beta)?;
    let out = apply_step(lambda, &step)?;
    Ok((out, step))
}

fn check_window(family: &MarginalFamily, window: &IndexSet) -> Result<(), ExtensionError> {
    let union = family.union_support();
    if !union.is_subset(window) {
        return Err(ExtensionError::Domain(format!(
            "family support {union} is not inside the window {window}"
        )));
    }
    Ok(())
}

/// Extends the family to a probability measure on the whole window, ascending
/// over the window's indices. After each step the measured ascending
/// independence defect of λ is audited against `beta`.
pub fn extend_family(
    family: &MarginalFamily,
    window: &IndexSet,
    beta: f64,
) -> Result<(DenseMeasure, ExtensionTrace), ExtensionError> {
    check_window(family, window)?;
    crate::measure::cell_count(family.alphabet(), window.len()).map_err(|e| {
        ExtensionError::Capacity(format!("{e}; use the sequential (frontier) extension instead"))
    })?;
    let mut lambda = DenseMeasure::unit(family.alphabet());
    let mut trace = ExtensionTrace::default();
    for n in window.iter() {
        let step = build_step(family, &lambda, lambda.support(), n, beta)?;
        lambda = apply_step(&lambda, &step)?;
        let audit = lambda
            .independence_defect(&IndexOrder::Ascending, NullAtoms::Skip)
            .map_err(ExtensionError::at(n))?;
        if audit > beta + POSITIVITY_FLOOR {
            return Err(ExtensionError::Independence {
                index: n,
                defect: audit,
                beta,
            });
        }
        trace.steps.push(step);
    }
    Ok((lambda, trace))
}

/// Result of the frontier-mode extension: the step log and the marginal of the
/// extension on the coordinates still referenced by a member at the end.
#[derive(Clone, Debug, PartialEq)]
pub struct SequentialExtension {
    pub trace: ExtensionTrace,
    pub frontier: DenseMeasure,
}

/// Same steps as [`extend_family`] but keeps λ only on the coordinates that a later
/// step can still condition on; a coordinate is dropped once every member containing
/// it lies at or below the current index. Each step's σ is identical to the dense
/// run because `R̄` only ever involves retained coordinates.
pub fn extend_family_sequential(
    family: &MarginalFamily,
    window: &IndexSet,
    beta: f64,
) -> Result<SequentialExtension, ExtensionError> {
    check_window(family, window)?;
    let mut last_use: BTreeMap<i64, i64> = window.iter().map(|l| (l, l)).collect();
    for m in family.members() {
        let top = m.support().last().expect("member supports are non-empty");
        for l in m.support().iter() {
            let e = last_use.entry(l).or_insert(l);
            *e = (*e).max(top);
        }
    }
    let mut lambda = DenseMeasure::unit(family.alphabet());
    let mut processed = IndexSet::empty();
    let mut trace = ExtensionTrace::default();
    for n in window.iter() {
        let step = build_step(family, &lambda, &processed, n, beta)?;
        lambda = apply_step(&lambda, &step)?;
        processed = processed.with(n);
        let keep: IndexSet = lambda.support().iter().filter(|l| last_use[l] > n).collect();
        if keep.len() < lambda.support().len() {
            lambda = lambda.project(&keep).map_err(ExtensionError::at(n))?;
        }
        trace.steps.push(step);
    }
    Ok(SequentialExtension {
        trace,
        frontier: lambda,
    })
}
