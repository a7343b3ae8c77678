use clap::Args;
use serde::Deserialize;
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use mf_core::corrector::{
    correcting_measure, iterate_krengel, paint_tower, KrengelConfig, PaintConfig, TowerFile,
};
use mf_core::extension::{
    brute_force_extension_exists, extend_family, extend_family_sequential, thresholds,
    verify_hypotheses, ExtensionError, FeasibilityProblem,
};
use mf_core::measure::{sup_distance, DenseMeasure, FamilySpec, IndexSet, MeasureLiteral};
use mf_core::rds::{counterexample_check, relative_mixing_coefficient, Cylinder, SkewProduct};

use crate::report::{Check, Failure, Outcome};
use crate::{Command, Common};

/// Measures up to this many cells are written into reports.
const REPORT_CELLS: usize = 4096;

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Dependence threshold δ; defaults to the theorem's δ(α, N, C′).
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    c_prime: f64,
}

#[derive(Args, Debug)]
pub struct ExtendArgs {
    /// Independence threshold β; defaults to α^N / 2N.
    #[arg(long)]
    beta: Option<f64>,
    /// `dense`, `sequential`, or `auto` (dense, falling back to sequential when too large).
    #[arg(long, default_value = "auto")]
    mode: String,
}

#[derive(Args, Debug)]
pub struct CorrectArgs {
    /// Blend weight t; overrides the file's `t`.
    #[arg(long)]
    t: Option<f64>,
    /// Sets t = ε/10 when no weight is given.
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args, Debug)]
pub struct PaintArgs {
    /// Offsets K (comma separated, containing 0).
    #[arg(long, value_delimiter = ',', default_value = "0")]
    k: Vec<i64>,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 0.4)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.4)]
    alpha: f64,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Args, Debug)]
pub struct KrengelArgs {
    /// Candidate times, ascending (comma separated).
    #[arg(long, value_delimiter = ',', required = true)]
    times: Vec<usize>,
    #[arg(long, default_value_t = 0.4)]
    epsilon: f64,
    #[arg(long, default_value_t = 1)]
    steps: usize,
    #[arg(long, default_value_t = 0.4)]
    alpha: f64,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Args, Debug)]
pub struct CounterexampleArgs {
    #[arg(long = "W", default_value_t = 10001)]
    w: usize,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
}

pub fn run(command: &Command, common: &Common, input: Option<&[u8]>) -> Result<Outcome, Failure> {
    match command {
        Command::Verify(a) => verify(a, common, parse(input)?),
        Command::Extend(a) => extend(a, common, parse(input)?),
        Command::Oracle => oracle(parse(input)?),
        Command::Correct(a) => correct(a, common, parse(input)?),
        Command::Paint(a) => paint(a, common, parse(input)?),
        Command::Krengel(a) => krengel(a, common, parse(input)?),
        Command::Counterexample(a) => {
            let file = match input {
                Some(_) => parse(input)?,
                None => ExperimentFile::default(),
            };
            counterexample(a, common, file)
        }
    }
}

fn parse<T: DeserializeOwned>(input: Option<&[u8]>) -> Result<T, Failure> {
    let bytes = input.ok_or_else(|| Failure::usage("usage", "this command needs --input"))?;
    serde_json::from_slice(bytes).map_err(|e| Failure::usage("malformed_input", e.to_string()))
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

fn literal_if_small(m: &DenseMeasure) -> Value {
    if m.table().len() <= REPORT_CELLS {
        to_value(&MeasureLiteral::from(m))
    } else {
        Value::Null
    }
}

fn verify(a: &VerifyArgs, common: &Common, spec: FamilySpec) -> Result<Outcome, Failure> {
    let (family, _) = spec.build()?;
    let th = thresholds(family.alpha(), family.n_bound(), a.c_prime)?;
    let delta = a.delta.unwrap_or(th.delta);
    let tol = common.tol.unwrap_or(1e-9);
    let r = verify_hypotheses(&family, delta, tol);
    let count = |kind: &str| {
        r.violations
            .iter()
            .filter(|v| to_value(v)["kind"] == kind)
            .count() as f64
    };
    let checks = vec![
        Check::at_most("neighbourhood", r.max_neighbourhood as f64, family.n_bound() as f64),
        Check::at_most("consistency", r.max_consistency_gap, tol),
        Check::at_least("small_atoms", r.min_atom, family.alpha()),
        Check::at_most("dependence", r.max_delta_defect, delta),
        Check::at_most("undefined", count("undefined"), 0.0),
    ];
    Ok(Outcome {
        checks,
        body: json!({ "thresholds": th, "delta": delta, "tol": tol, "hypotheses": r }),
    })
}

fn extend(a: &ExtendArgs, common: &Common, spec: FamilySpec) -> Result<Outcome, Failure> {
    let (family, window) = spec.build()?;
    let th = thresholds(family.alpha(), family.n_bound(), 1.0)?;
    let beta = a.beta.unwrap_or(th.beta);
    let tol = common.tol.unwrap_or(1e-9);
    let dense = match a.mode.as_str() {
        "dense" => Some(extend_family(&family, &window, beta)?),
        "sequential" => None,
        "auto" => match extend_family(&family, &window, beta) {
            Ok(r) => Some(r),
            Err(ExtensionError::Capacity(_)) => None,
            Err(e) => return Err(e.into()),
        },
        other => {
            return Err(Failure::usage(
                "usage",
                format!("unknown mode {other:?} (dense, sequential, auto)"),
            ))
        }
    };
    let (mode, measure, trace) = match dense {
        Some((m, t)) => ("dense", m, t),
        None => {
            let s = extend_family_sequential(&family, &window, beta)?;
            ("sequential", s.frontier, s.trace)
        }
    };
    let mut gap: f64 = 0.0;
    let mut checked = 0usize;
    for m in family.members().iter().filter(|m| m.support().is_subset(measure.support())) {
        gap = gap.max(sup_distance(&measure.project(m.support())?, m)?);
        checked += 1;
    }
    let checks = vec![
        Check::at_most("consistency", gap, tol),
        Check::at_most("beta_independence", trace.max_beta_defect(), beta + 1e-12),
    ];
    Ok(Outcome {
        checks,
        body: json!({
            "mode": mode,
            "beta": beta,
            "thresholds": th,
            "members_checked": checked,
            "max_consistency_gap": gap,
            "max_beta_defect": trace.max_beta_defect(),
            "max_b_norm": trace.max_b_norm(),
            "min_positivity_margin": trace.min_positivity_margin(),
            "steps": trace.records(),
            "support": measure.support(),
            "measure": literal_if_small(&measure),
        }),
    })
}

fn oracle(spec: FamilySpec) -> Result<Outcome, Failure> {
    let (family, window) = spec.build()?;
    let problem = FeasibilityProblem::from_family(&family, &window)?;
    let out = brute_force_extension_exists(&family, &window)?;
    let witness_violation = match &out.witness {
        Some(w) => problem.max_violation(w)?,
        None => f64::NAN,
    };
    let checks = vec![Check {
        name: "feasible",
        passed: out.feasible,
        value: out.infeasibility,
        bound: 0.0,
    }];
    Ok(Outcome {
        checks,
        body: json!({
            "feasible": out.feasible,
            "infeasibility": out.infeasibility,
            "rows": problem.row_count(),
            "witness_max_violation": if witness_violation.is_nan() { Value::Null } else { json!(witness_violation) },
            "witness": out.witness.as_ref().map(literal_if_small),
        }),
    })
}

#[derive(Deserialize)]
struct CorrectFile {
    measure: MeasureLiteral,
    #[serde(default)]
    t: Option<f64>,
}

fn correct(a: &CorrectArgs, common: &Common, file: CorrectFile) -> Result<Outcome, Failure> {
    let nu = DenseMeasure::try_from(file.measure)?;
    let t = a
        .t
        .or(file.t)
        .or(a.epsilon.map(|e| e / 10.0))
        .ok_or_else(|| Failure::usage("usage", "give the blend weight via --t, the file's \"t\" or --epsilon"))?;
    let marginals = nu
        .support()
        .iter()
        .map(|h| DenseMeasure::on_coordinate(nu.alphabet(), h, nu.marginal(h)?))
        .collect::<Result<Vec<_>, _>>()?;
    let xi = correcting_measure(&nu, &marginals, t)?;
    let target = DenseMeasure::product(nu.alphabet(), &marginals)?;
    let blend = nu.linear_combination(1.0 - t, &xi, t)?;
    let blend_gap = sup_distance(&blend, &target)?;
    let mut marginal_gap: f64 = 0.0;
    for m in &marginals {
        marginal_gap = marginal_gap.max(sup_distance(&xi.project(m.support())?, m)?);
    }
    let tol = common.tol.unwrap_or(1e-12);
    Ok(Outcome {
        checks: vec![
            Check::at_most("blend_identity", blend_gap, tol),
            Check::at_most("marginals", marginal_gap, tol),
        ],
        body: json!({
            "t": t,
            "xi": literal_if_small(&xi),
            "min_cell": xi.min_cell(),
            "distance_to_product": sup_distance(&xi, &target)?,
            "blend_gap": blend_gap,
            "marginal_gap": marginal_gap,
        }),
    })
}

fn paint(a: &PaintArgs, common: &Common, file: TowerFile) -> Result<Outcome, Failure> {
    let (tower, p) = file.build()?;
    let k = IndexSet::new(a.k.clone())?;
    let cfg = PaintConfig {
        seed: common.seed,
        beta: a.beta,
        eta: a.eta,
        flags: file.flags.clone(),
        ..PaintConfig::default()
    };
    let out = paint_tower(&tower, &p, &k, a.m, a.epsilon, a.alpha, &cfg)?;
    let r = &out.report;
    let tol = common.tol.unwrap_or(2e-3);
    Ok(Outcome {
        checks: vec![
            Check::at_most("level_distance", r.max_level_distance, a.epsilon / 10.0 + r.quantization_bound),
            Check::at_most("distribution_gap", r.max_distribution_gap, r.quantization_bound),
            Check::at_most("independence_defect", r.max_defect_after, tol),
            Check::below("error_mass", r.error_mass, a.epsilon),
        ],
        body: to_value(r),
    })
}

fn krengel(a: &KrengelArgs, common: &Common, file: TowerFile) -> Result<Outcome, Failure> {
    let (tower, p) = file.build()?;
    let cfg = KrengelConfig {
        seed: common.seed,
        alpha: a.alpha,
        eta: a.eta,
        beta: a.beta,
        ..KrengelConfig::default()
    };
    let out = iterate_krengel(&tower, &p, &a.times, a.epsilon, a.steps, &cfg)?;
    let tol = common.tol.unwrap_or(5e-3);
    Ok(Outcome {
        checks: vec![
            Check::below("error_mass", out.cumulative_error_mass, a.epsilon),
            Check::at_most("independence_defect", out.final_max_defect, tol),
        ],
        body: json!({
            "times": out.times,
            "cumulative_error_mass": out.cumulative_error_mass,
            "cumulative_distance": out.cumulative_distance,
            "distance_to_p": out.distance_to_p,
            "final_max_defect": out.final_max_defect,
            "steps": out.steps,
        }),
    })
}

#[derive(Deserialize)]
struct CylinderPair {
    a: Cylinder,
    b: Cylinder,
    n: usize,
    #[serde(default)]
    samples: Option<u64>,
}

/// `{W, n, samples, seed, cylinders}`; absent fields fall back to the flags.
#[derive(Deserialize, Default)]
struct ExperimentFile {
    #[serde(rename = "W", default)]
    w: Option<usize>,
    #[serde(default)]
    n: Option<usize>,
    #[serde(default)]
    samples: Option<u64>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    cylinders: Vec<CylinderPair>,
}

fn counterexample(a: &CounterexampleArgs, common: &Common, file: ExperimentFile) -> Result<Outcome, Failure> {
    let w = file.w.unwrap_or(a.w);
    let n = file.n.unwrap_or(a.n);
    let samples = file.samples.unwrap_or(a.samples);
    let seed = file.seed.unwrap_or(common.seed);
    let r = counterexample_check(w, n, samples, seed)?;
    let system = SkewProduct::new(w)?;
    let mixing = file
        .cylinders
        .iter()
        .map(|c| relative_mixing_coefficient(&system, &c.a, &c.b, c.n, c.samples.unwrap_or(samples), seed))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Outcome {
        checks: vec![
            Check::below("shift_distance", r.shift_distance, r.threshold),
            Check::below("fiber_distance", r.max_fiber_distance, r.threshold),
            Check::positive("parity_mass", r.parity_mass_empirical),
            Check::at_least("contradiction_margin", r.contradiction_margin, common.tol.unwrap_or(0.0)),
        ],
        body: json!({ "counterexample": r, "mixing": mixing }),
    })
}
