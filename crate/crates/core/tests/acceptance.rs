//! Acceptance harness: one line per criterion. Run with `cargo test --test acceptance`.
//!
//! A criterion may be listed as a documented red when the stated target disagrees
//! with an independently verified value; the harness then asserts the verified value
//! instead and still prints FAIL for the stated one.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use mf_core::corrector::{
    choose_eta, correcting_measure, fiber_surgery, name_distribution, paint_tower, LabeledPartition,
    PaintConfig, Tower, Transfer,
};
use mf_core::extension::{
    bounded_right_inverse, brute_force_extension_exists, extend_family, inclusion_exclusion_extension,
    thresholds, verify_hypotheses, FeasibilityProblem, ProjectionOperator,
};
use mf_core::measure::{
    consistency_gap, sup_distance, Alphabet, DenseMeasure, IndexOrder, IndexSet, MarginalFamily,
    MeasureKind, NullAtoms, DEFAULT_TOL,
};
use mf_core::rds::{
    counterexample_check, mixing_coefficient_at, relative_mixing_coefficient, shift_distance,
    BaseSequence, Cylinder, ShiftMethod, SkewProduct,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = (&'static str, Duration, fn() -> Verdict);

struct Verdict {
    passed: bool,
    /// Set when the only failing sub-check is a stated value that disagrees with a
    /// verified one; the verified value is asserted instead.
    documented_red: Option<&'static str>,
    detail: String,
}

impl Verdict {
    fn from(passed: bool, detail: String) -> Self {
        Self { passed, documented_red: None, detail }
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_probability(r: &mut ChaCha8Rng, alphabet: Alphabet, support: IndexSet, floor: f64) -> DenseMeasure {
    let cells = alphabet.size().pow(support.len() as u32);
    let mut t: Vec<f64> = (0..cells).map(|_| floor + r.random::<f64>()).collect();
    let s: f64 = t.iter().sum();
    t.iter_mut().for_each(|x| *x /= s);
    DenseMeasure::probability(alphabet, support, t).unwrap()
}

fn random_subset(r: &mut ChaCha8Rng, pool: &[i64]) -> IndexSet {
    loop {
        let picked: Vec<i64> = pool.iter().copied().filter(|_| r.random_bool(0.5)).collect();
        if !picked.is_empty() {
            return IndexSet::new(picked).unwrap();
        }
    }
}

fn lemma1_families() -> Verdict {
    let mut worst = 0.0f64;
    for seed in 0..500u64 {
        let mut r = rng(seed);
        let alphabet = Alphabet::new(r.random_range(2..=3)).unwrap();
        let len = r.random_range(1..=6i64);
        let pool: Vec<i64> = (0..len).collect();
        let g = random_probability(&mut r, alphabet, IndexSet::interval(0, len - 1), 0.0);
        let mut parts: Vec<IndexSet> = (0..r.random_range(1..=4)).map(|_| random_subset(&mut r, &pool)).collect();
        parts.sort_by(|a, b| a.as_slice().cmp(b.as_slice()));
        parts.dedup();
        let members: Vec<DenseMeasure> = parts.iter().map(|k| g.project(k).unwrap()).collect();
        let ext = inclusion_exclusion_extension(&members, None).unwrap();
        for m in &members {
            let back = ext.project(m.support()).unwrap();
            worst = worst.max(sup_distance(&back, &m.clone().into_signed()).unwrap());
        }
    }
    Verdict::from(worst <= 1e-9, format!("500 families, worst projection gap {worst:.1e} (≤ 1e-9)"))
}

fn lemma2_contract() -> Verdict {
    let (mut worst_v, mut worst_id, mut max_norm) = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..200u64 {
        let mut r = rng(1_000 + seed);
        let alphabet = Alphabet::new(r.random_range(2..=3)).unwrap();
        let dim = r.random_range(1..=4usize);
        let mut pool: Vec<i64> = (0..8).collect();
        for i in (1..pool.len()).rev() {
            pool.swap(i, r.random_range(0..=i));
        }
        let mut picked = pool[..dim].to_vec();
        picked.sort_unstable();
        let domain = IndexSet::new(picked).unwrap();
        let targets: Vec<IndexSet> =
            (0..r.random_range(1..=3)).map(|_| random_subset(&mut r, domain.as_slice())).collect();
        let v = random_probability(&mut r, alphabet, domain.clone(), 0.05);
        let op = ProjectionOperator::new(alphabet, domain, targets).unwrap();
        let w = op.apply(&v).unwrap();
        let b = bounded_right_inverse(op.clone(), &v, &w).unwrap();
        worst_v = worst_v.max(sup_distance(&b.apply(&w).unwrap(), &v.clone().into_signed()).unwrap());
        for u in op.spanning_set().unwrap() {
            for (x, y) in op.apply(&b.apply(&u).unwrap()).unwrap().iter().zip(&u) {
                worst_id = worst_id.max(sup_distance(x, y).unwrap());
            }
        }
        max_norm = max_norm.max(b.norm_bound());
    }
    Verdict::from(
        worst_v <= 1e-9 && worst_id <= 1e-9 && max_norm.is_finite(),
        format!("200 instances, |B(w) − v| {worst_v:.1e}, |Π∘B − id| {worst_id:.1e}, max ‖B‖ {max_norm:.2}"),
    )
}

/// A product of one-dimensional laws with atoms in `[lo, 1 − lo]`, perturbed cell-wise
/// by a relative factor `1 + eps·u` and renormalised.
fn near_product(r: &mut ChaCha8Rng, len: usize, lo: f64, eps: f64) -> DenseMeasure {
    let p: Vec<f64> = (0..len).map(|_| r.random_range(lo..1.0 - lo)).collect();
    let support = IndexSet::interval(0, len as i64 - 1);
    let mut t = DenseMeasure::from_fn(Alphabet::binary(), support.clone(), MeasureKind::Signed, |d| {
        d.iter().zip(&p).map(|(&x, &q)| if x == 0 { q } else { 1.0 - q }).product()
    })
    .unwrap()
    .into_table();
    for x in t.iter_mut() {
        *x *= 1.0 + eps * r.random_range(-1.0..1.0);
    }
    let s: f64 = t.iter().sum();
    t.iter_mut().for_each(|x| *x /= s);
    DenseMeasure::probability(Alphabet::binary(), support, t).unwrap()
}

fn proposition1_end_to_end() -> Verdict {
    let (mut accepted, mut attempts) = (0usize, 0u64);
    let (mut worst_gap, mut worst_lp, mut worst_beta_ratio) = (0.0f64, 0.0f64, 0.0f64);
    let mut failures = Vec::new();
    while accepted < 100 && attempts < 20_000 {
        attempts += 1;
        let mut r = rng(2_000_000 + attempts);
        let alpha = [0.3, 0.35, 0.4][r.random_range(0..3)];
        let len = r.random_range(4..=8usize);
        let eps = [0.0, 1e-7, 1e-6, 1e-5][r.random_range(0..4)];
        let g = near_product(&mut r, len, alpha + 0.02, eps);
        let top = len as i64 - 1;
        let mut supports: Vec<IndexSet> = (0..r.random_range(1..=4))
            .map(|_| {
                let s = r.random_range(0..=top);
                IndexSet::interval(s, (s + r.random_range(0..=1)).min(top))
            })
            .collect();
        supports.sort_by(|a, b| a.as_slice().cmp(b.as_slice()));
        supports.dedup();
        let members: Vec<DenseMeasure> = supports.iter().map(|k| g.project(k).unwrap()).collect();
        let n = MarginalFamily::new(Alphabet::binary(), members.clone(), alpha, 8).unwrap().max_neighbourhood();
        if !(1..=4).contains(&n) {
            continue;
        }
        let fam = MarginalFamily::new(Alphabet::binary(), members, alpha, n).unwrap();
        let window = IndexSet::interval(0, top);
        let beta = thresholds(alpha, n, 1.0).unwrap().beta;
        let (out, trace) = match extend_family(&fam, &window, beta) {
            Ok(x) => x,
            Err(e) => {
                // Only a failure if the family meets the hypotheses; checked below with C′ = 1.
                let delta = thresholds(alpha, n, 1.0).unwrap().delta;
                if verify_hypotheses(&fam, delta, DEFAULT_TOL).passed() {
                    failures.push(format!("attempt {attempts}: {e}"));
                    accepted += 1;
                }
                continue;
            }
        };
        let delta = thresholds(alpha, n, trace.max_b_norm().max(1.0)).unwrap().delta;
        if !verify_hypotheses(&fam, delta, DEFAULT_TOL).passed() {
            continue;
        }
        accepted += 1;
        for m in fam.members() {
            worst_gap = worst_gap.max(consistency_gap(&out, m).unwrap());
        }
        for s in &trace.steps {
            worst_beta_ratio = worst_beta_ratio.max(s.beta_defect / beta);
        }
        match brute_force_extension_exists(&fam, &window) {
            Ok(o) if o.feasible => {}
            Ok(_) => failures.push(format!("attempt {attempts}: oracle infeasible")),
            Err(e) => failures.push(format!("attempt {attempts}: oracle {e}")),
        }
        let problem = FeasibilityProblem::from_family(&fam, &window).unwrap();
        worst_lp = worst_lp.max(problem.max_violation(&out).unwrap());
    }
    let passed = accepted == 100 && failures.is_empty() && worst_gap <= 1e-9 && worst_lp <= 1e-7 && worst_beta_ratio <= 1.0;
    let mut detail = format!(
        "{accepted} families from {attempts} draws, consistency {worst_gap:.1e}, LP violation {worst_lp:.1e}, max step defect/β {worst_beta_ratio:.2}"
    );
    if let Some(f) = failures.first() {
        detail.push_str(&format!("; {} failures, first: {f}", failures.len()));
    }
    Verdict::from(passed, detail)
}

fn correcting_identity() -> Verdict {
    let (mut blend, mut marg, mut chain_ok, mut positive) = (0.0f64, 0.0f64, true, true);
    for seed in 0..1000u64 {
        let mut r = rng(3_000 + seed);
        let a = r.random_range(2..=3usize);
        let k = r.random_range(1..=3usize);
        let alphabet = Alphabet::new(a).unwrap();
        let alpha = 0.45 / a as f64;
        let ms: Vec<Vec<f64>> = (0..=k)
            .map(|_| {
                let w: Vec<f64> = (0..a).map(|_| r.random::<f64>() + 1e-9).collect();
                let s: f64 = w.iter().sum();
                let free = 1.0 - alpha * a as f64;
                w.iter().map(|x| alpha + free * x / s).collect()
            })
            .collect();
        let zero_sum = |r: &mut ChaCha8Rng| {
            let g: Vec<f64> = (0..a).map(|_| r.random_range(-1.0..1.0)).collect();
            let mean = g.iter().sum::<f64>() / a as f64;
            g.into_iter().map(|x| x - mean).collect::<Vec<_>>()
        };
        let (g, s) = (zero_sum(&mut r), zero_sum(&mut r));
        let eps = r.random_range(0.05..0.95);
        let delta = r.random_range(0.01..1.0);
        let c = r.random_range(-1.0..1.0);
        let t = eps / 10.0;
        let marginals: Vec<DenseMeasure> = ms
            .iter()
            .enumerate()
            .map(|(i, m)| DenseMeasure::on_coordinate(alphabet, i as i64, m.clone()).unwrap())
            .collect();
        let eta = choose_eta(alpha, k, delta, eps).unwrap();
        let prod = DenseMeasure::product(alphabet, &marginals).unwrap();
        let pert = DenseMeasure::from_fn(alphabet, IndexSet::interval(0, k as i64), MeasureKind::Signed, |d| {
            g[d[0]] * s[d[1]] * ms[2..].iter().zip(&d[2..]).map(|(m, &x)| m[x]).product::<f64>()
        })
        .unwrap();
        let scale = c * eta / pert.max_abs().max(1e-300);
        let nu = prod.linear_combination(1.0, &pert, scale).unwrap().into_probability(1e-9).unwrap();
        let xi = correcting_measure(&nu, &marginals, t).unwrap();
        for ((x, n), p) in xi.table().iter().zip(nu.table()).zip(prod.table()) {
            blend = blend.max(((1.0 - t) * n + t * x - p).abs());
        }
        for m in &marginals {
            marg = marg.max(sup_distance(&xi.project(m.support()).unwrap(), m).unwrap());
        }
        let gap = sup_distance(&xi, &prod).unwrap();
        let chain = 10.0 / eps * eta;
        chain_ok &= gap <= chain * (1.0 + 1e-9) + 1e-15
            && chain <= alpha.powi(k as i32 + 1) / 2.0 * delta * (1.0 + 1e-12)
            && chain <= delta;
        positive &= xi.min_cell() > 0.0;
    }
    Verdict::from(
        blend <= 1e-12 && marg <= 1e-12 && chain_ok && positive,
        format!("1000 pairs, blend {blend:.1e}, marginals {marg:.1e}, transfer chain {chain_ok}, ξ positive {positive}"),
    )
}

fn paint_step() -> Verdict {
    let (epsilon, alpha, m) = (0.4, 0.4, 2);
    let tower = Tower::new(64, 1 << 16, &Transfer::SeededPermutation(11)).unwrap();
    let p = LabeledPartition::base_bits(&tower, 16, 0.002, 3).unwrap();
    let out = match paint_tower(&tower, &p, &IndexSet::singleton(0), m, epsilon, alpha, &PaintConfig::default()) {
        Ok(o) => o,
        Err(e) => return Verdict::from(false, format!("paint_tower: {e}")),
    };
    let r = &out.report;
    let passed = r.max_level_distance <= epsilon / 10.0 + r.quantization_bound
        && r.max_distribution_gap <= r.quantization_bound
        && r.max_defect_after <= 2e-3
        && r.error_mass < epsilon
        && r.e3_mass <= m as f64 / 64.0;
    Verdict::from(
        passed,
        format!(
            "level distance {:.4} (≤ {:.4}), gap {:.1e} (≤ {:.1e}), defect {:.2e} (≤ 2e-3), E {:.4} (E₁ {:.4}, E₂ {:.4}, E₃ {:.4}) < {epsilon}",
            r.max_level_distance,
            epsilon / 10.0 + r.quantization_bound,
            r.max_distribution_gap,
            r.quantization_bound,
            r.max_defect_after,
            r.error_mass,
            r.e1_mass,
            r.e2_mass,
            r.e3_mass,
        ),
    )
}

fn surgery_exactness() -> Verdict {
    let h = 10usize;
    let atoms = 1usize << 12;
    let mut problems = Vec::new();
    let mut operated = 0usize;
    for seed in 0..50u64 {
        let t = Tower::new(h, atoms, &Transfer::SeededPermutation(seed)).unwrap();
        let p = LabeledPartition::base_bits(&t, 12, 0.0, 0).unwrap();
        let d = 1 + (seed % 4) as i64;
        let k = if seed % 3 == 0 {
            IndexSet::new(vec![0, d]).unwrap()
        } else {
            IndexSet::new(vec![0, d, d + 1 + (seed % 2) as i64]).unwrap()
        };
        let span = k.last().unwrap() as usize;
        let i = (seed as usize / 7) % (h - span);
        // Copy one level onto another inside the window `i + K` to break independence there.
        let (src, dst) = (i, i + d as usize);
        let mut view: Vec<Vec<u8>> =
            (0..h).map(|j| (0..atoms).map(|b| p.level(j)[t.atom(j, b)]).collect()).collect();
        view[dst] = view[src].clone();
        let levels = (0..h)
            .map(|j| {
                let mut l = vec![0u8; atoms];
                for b in 0..atoms {
                    l[t.atom(j, b)] = view[j][b];
                }
                l
            })
            .collect();
        let q0 = LabeledPartition::new(p.alphabet(), levels).unwrap();
        let defect = |q: &LabeledPartition, i: usize| {
            name_distribution(&t, q, i, &k)
                .unwrap()
                .independence_defect(&IndexOrder::Ascending, NullAtoms::Skip)
                .unwrap()
        };
        let bad: Vec<usize> = (0..h - span).filter(|&i| defect(&q0, i) > 0.0).collect();
        let (q, report) = match fiber_surgery(&t, &q0, &k, &bad, seed) {
            Ok(x) => x,
            Err(e) => {
                problems.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        operated += report.surgeries.len();
        if let Some(j) = (0..h - span).find(|&j| defect(&q, j) != 0.0) {
            problems.push(format!("seed {seed}: shift {j} still dependent"));
        }
        let touched: BTreeSet<usize> =
            report.surgeries.iter().flat_map(|&i| k.iter().map(move |o| i + o as usize)).collect();
        for l in 0..h {
            if !touched.contains(&l) && q.level(l) != q0.level(l) {
                problems.push(format!("seed {seed}: untouched level {l} changed"));
            }
            if q.level_counts(l) != q0.level_counts(l) {
                problems.push(format!("seed {seed}: level {l} distribution changed"));
            }
        }
    }
    let mut detail = format!("50 instances, {operated} surgeries, exact zero defect and untouched levels bit-identical");
    if let Some(p) = problems.first() {
        detail = format!("{} problems, first: {p}", problems.len());
    }
    Verdict::from(problems.is_empty(), detail)
}

fn counterexample_numbers() -> Verdict {
    let d3 = shift_distance(3, ShiftMethod::Exact).unwrap().value;
    let stated = d3 == 3.0 / 16.0;
    // Enumeration over the four symbols y₁..y₄ that the two sums read.
    let flips = (0..16u32)
        .filter(|bits| {
            let y: Vec<i32> = (0..4).map(|i| if bits >> i & 1 == 1 { 1 } else { -1 }).collect();
            (y[0] + y[1] + y[2]).signum() != (y[1] + y[2] + y[3]).signum()
        })
        .count();
    let enumerated = flips as f64 / 16.0;
    let d = shift_distance(10001, ShiftMethod::Exact).unwrap().value;
    let c = counterexample_check(10001, 10, 100_000, 0x5eed).unwrap();
    let rest = d3 == enumerated
        && d < 0.01
        && c.precondition_met
        && c.all_below_threshold
        && c.max_fiber_distance < 0.01
        && c.parity_mass_exact > 0.0
        && c.contradiction_margin >= 0.47
        && c.forced_distance == 0.5;
    let detail = format!(
        "shift_distance(3) = {d3} (stated 3/16; enumeration gives {flips}/16), shift_distance(10001) = {d:.5} < 0.01, \
         fiber distance {:.5}, margin {:.4} vs forced 1/2 (stated-value convention 1/4 margin {:.4})",
        c.max_fiber_distance,
        c.contradiction_margin,
        c.conventions.iter().find(|v| v.forced == 0.25).map_or(f64::NAN, |v| v.margin),
    );
    Verdict {
        passed: stated && rest,
        documented_red: (!stated && rest).then_some("the stated 3/16 halves P(S₃ = 1) once; the flip needs y₂ + y₃ = 0, probability 1/2, times 1/2"),
        detail,
    }
}

fn cocycle_and_mixing() -> Verdict {
    let mut r = rng(8);
    let mut cocycle_ok = true;
    for _ in 0..10_000 {
        let w = BaseSequence { seed: r.random(), pos: r.random_range(-10_000..10_000) };
        let (n, m) = (r.random_range(0..=64usize), r.random_range(0..=64usize));
        cocycle_ok &= w.cocycle(n + m) == w.cocycle(n) + w.shift(n as i64).cocycle(m);
    }
    let sys = SkewProduct::new(101).unwrap();
    let single = Cylinder::new(vec![(0, 1)]).unwrap();
    let pair = Cylinder::new(vec![(0, 1), (1, 1)]).unwrap();
    let disjoint = relative_mixing_coefficient(&sys, &single, &single, 7, 10_000, 8).unwrap();
    let far: Vec<f64> = [-9i64, -3, 2, 5, 11]
        .iter()
        .map(|&phi| mixing_coefficient_at(&sys, &pair, &single, phi).unwrap())
        .collect();
    let dependent = mixing_coefficient_at(&sys, &pair, &single, 1).unwrap();
    let passed = cocycle_ok && disjoint.max_abs == 0.0 && far.iter().all(|&x| x == 0.0) && dependent == 0.125;
    Verdict::from(
        passed,
        format!(
            "cocycle exact on 10^4 cases: {cocycle_ok}, disjoint max |coef| {} over {} samples, dependent case {dependent}",
            disjoint.max_abs, disjoint.samples
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("inclusion-exclusion reproduces every part", Duration::from_secs(10), lemma1_families),
        ("bounded right inverse contract", Duration::from_secs(10), lemma2_contract),
        ("family extension end to end", Duration::from_secs(600), proposition1_end_to_end),
        ("correcting-measure identity", Duration::from_secs(5), correcting_identity),
        ("paint step", Duration::from_secs(60), paint_step),
        ("surgery exactness", Duration::from_secs(30), surgery_exactness),
        ("counterexample numbers", Duration::from_secs(60), counterexample_numbers),
        ("cocycle and mixing sanity", Duration::from_secs(10), cocycle_and_mixing),
    ];
    let mut unexpected = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = run();
        let took = start.elapsed();
        let in_time = took <= *budget;
        let ok = v.passed && in_time;
        println!(
            "criterion {}: {} — {name}: {} [{:.2}s, budget {}s]",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            v.detail,
            took.as_secs_f64(),
            budget.as_secs(),
        );
        match (ok, v.documented_red) {
            (true, _) => {}
            (false, Some(why)) if in_time => println!("    documented red: {why}"),
            _ => unexpected += 1,
        }
    }
    if unexpected > 0 {
        println!("{unexpected} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
