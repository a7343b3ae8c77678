use mf_core::extension::{
    bounded_right_inverse, brute_force_extension_exists, extend_family, extend_family_sequential,
    extend_one_index, inclusion_exclusion_extension, thresholds, verify_hypotheses,
    FeasibilityProblem, ProjectionOperator,
};
use mf_core::measure::{
    is_consistent, sup_distance, Alphabet, DenseMeasure, IndexSet, MarginalFamily, MeasureKind,
    DEFAULT_TOL,
};
use proptest::prelude::*;

fn bin() -> Alphabet {
    Alphabet::binary()
}

/// A product of one-dimensional laws with atoms in `[lo, 1 − lo]`, multiplied cell-wise
/// by `1 + eps·u` and renormalised.
fn near_product(window: usize, lo: f64, eps: f64) -> impl Strategy<Value = DenseMeasure> {
    let cells = 1usize << window;
    (
        prop::collection::vec(lo..(1.0 - lo), window),
        prop::collection::vec(-1.0f64..1.0, cells),
    )
        .prop_map(move |(p, u)| {
            let support = IndexSet::interval(0, window as i64 - 1);
            let mut g = DenseMeasure::from_fn(bin(), support.clone(), MeasureKind::Signed, |d| {
                d.iter().zip(&p).map(|(&x, &q)| if x == 0 { q } else { 1.0 - q }).product()
            })
            .unwrap()
            .into_table();
            for (x, e) in g.iter_mut().zip(&u) {
                *x *= 1.0 + eps * e;
            }
            let total: f64 = g.iter().sum();
            g.iter_mut().for_each(|x| *x /= total);
            DenseMeasure::probability(bin(), support, g).unwrap()
        })
}

/// Members are projections of `g` onto intervals `[s, s + len − 1]` for distinct starts.
fn family_of(g: &DenseMeasure, starts: &[(i64, i64)], alpha: f64) -> MarginalFamily {
    let top = g.support().last().unwrap();
    let mut supports: Vec<IndexSet> = starts
        .iter()
        .map(|&(s, len)| IndexSet::interval(s.min(top), (s + len - 1).min(top)))
        .collect();
    supports.sort_by(|a, b| a.as_slice().cmp(b.as_slice()));
    supports.dedup();
    let members: Vec<_> = supports.iter().map(|k| g.project(k).unwrap()).collect();
    let probe = MarginalFamily::new(bin(), members.clone(), alpha, 1).unwrap();
    let n = probe.max_neighbourhood().max(1);
    MarginalFamily::new(bin(), members, alpha, n).unwrap()
}

fn intervals() -> impl Strategy<Value = Vec<(i64, i64)>> {
    prop::collection::vec((0i64..8, 1i64..3), 1..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inclusion_exclusion_reproduces_every_part(g in near_product(5, 0.1, 0.5), starts in intervals()) {
        let fam = family_of(&g, &starts, 0.1);
        let ext = inclusion_exclusion_extension(fam.members(), None).unwrap();
        for m in fam.members() {
            prop_assert!(sup_distance(&ext.project(m.support()).unwrap(), &m.clone().into_signed()).unwrap() < 1e-9);
        }
        prop_assert!((ext.total_mass() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn inclusion_exclusion_with_random_reference(g in near_product(4, 0.1, 0.5), q in near_product(4, 0.1, 0.9), starts in intervals()) {
        let fam = family_of(&g, &starts, 0.1);
        let union = fam.union_support();
        let q = q.project(&union).unwrap();
        let ext = inclusion_exclusion_extension(fam.members(), Some(&q)).unwrap();
        for m in fam.members() {
            prop_assert!(sup_distance(&ext.project(m.support()).unwrap(), &m.clone().into_signed()).unwrap() < 1e-9);
        }
    }

    #[test]
    fn right_inverse_contract(g in near_product(4, 0.1, 0.5), mask in prop::collection::vec(1u8..16, 1..4)) {
        let domain = g.support().clone();
        let targets: Vec<IndexSet> = mask
            .iter()
            .map(|m| (0..4).filter(|b| m & (1 << b) != 0).collect())
            .collect();
        let op = ProjectionOperator::new(bin(), domain, targets).unwrap();
        let w = op.apply(&g).unwrap();
        let b = bounded_right_inverse(op.clone(), &g, &w).unwrap();
        prop_assert!(sup_distance(&b.apply(&w).unwrap(), &g.clone().into_signed()).unwrap() < 1e-9);
        for u in op.spanning_set().unwrap() {
            let back = op.apply(&b.apply(&u).unwrap()).unwrap();
            for (x, y) in back.iter().zip(&u) {
                prop_assert!(sup_distance(x, y).unwrap() < 1e-9);
            }
        }
        prop_assert!(b.norm_bound().is_finite());
    }

    #[test]
    fn exact_products_extend_to_products(g in near_product(5, 0.3, 0.0), starts in intervals()) {
        let fam = family_of(&g, &starts, 0.3);
        let window = g.support().clone();
        let (out, trace) = extend_family(&fam, &window, 1e-9).unwrap();
        for step in &trace.steps {
            prop_assert!(step.beta_defect < 1e-9);
            if let Some(sigma) = &step.sigma {
                prop_assert!(sup_distance(sigma, &sigma.product_of_marginals().unwrap()).unwrap() < 1e-9);
            }
        }
        for m in fam.members() {
            prop_assert!(is_consistent(&out, m, 1e-9));
        }
    }

    #[test]
    fn steps_extend_the_previous_measure(g in near_product(5, 0.3, 0.02), starts in intervals()) {
        let fam = family_of(&g, &starts, 0.3);
        let mut lambda = DenseMeasure::unit(bin());
        for n in 0..5 {
            let (next, _) = extend_one_index(&fam, &lambda, n, 0.5).unwrap();
            prop_assert!(sup_distance(&next.project(lambda.support()).unwrap(), &lambda).unwrap() < 1e-12);
            lambda = next;
        }
    }

    #[test]
    fn dense_and_frontier_runs_agree(g in near_product(6, 0.3, 0.05), starts in intervals()) {
        let fam = family_of(&g, &starts, 0.3);
        let window = g.support().clone();
        let dense = extend_family(&fam, &window, 0.5).map(|(_, t)| t.records());
        let seq = extend_family_sequential(&fam, &window, 0.5).map(|s| s.trace.records());
        match (dense, seq) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.len(), b.len());
                for (x, y) in a.iter().zip(&b) {
                    prop_assert_eq!(&x.r_bar, &y.r_bar);
                    prop_assert!((x.beta_defect - y.beta_defect).abs() < 1e-9);
                }
            }
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "dense {:?} vs frontier {:?}", a.is_ok(), b.is_ok()),
        }
    }

    /// Families satisfying the hypotheses are extended, and the extension is a
    /// feasible point of the independent linear-programming oracle.
    #[test]
    fn oracle_agreement(g in near_product(6, 0.42, 4e-5), starts in intervals()) {
        let alpha = 0.4;
        let fam = family_of(&g, &starts, alpha);
        let window = IndexSet::interval(0, 5);
        let n = fam.n_bound();
        let beta = thresholds(alpha, n, 1.0).unwrap().beta;
        let (out, trace) = extend_family(&fam, &window, beta).unwrap();
        let c_prime = trace.max_b_norm().max(1.0);
        let delta = thresholds(alpha, n, c_prime).unwrap().delta;
        let report = verify_hypotheses(&fam, delta, DEFAULT_TOL);
        prop_assume!(report.passed());
        let oracle = brute_force_extension_exists(&fam, &window).unwrap();
        prop_assert!(oracle.feasible);
        let problem = FeasibilityProblem::from_family(&fam, &window).unwrap();
        prop_assert!(problem.max_violation(&out).unwrap() < 1e-7);
    }
}
