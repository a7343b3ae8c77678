use mf_core::rds::{
    shift_distance, BaseSequence, Cylinder, FiberSequence, ShiftMethod, SkewPoint, SkewProduct,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn cocycle_identity(seed in any::<u64>(), pos in -1000i64..1000, n in 0usize..=64, m in 0usize..=64) {
        let w = BaseSequence { seed, pos };
        prop_assert_eq!(w.cocycle(n + m), w.cocycle(n) + w.shift(n as i64).cocycle(m));
    }

    #[test]
    fn iterates_compose(seed in any::<u64>(), n in 0usize..40, m in 0usize..40) {
        let sys = SkewProduct::new(101).unwrap();
        let x = SkewPoint { omega: BaseSequence::new(seed), y: FiberSequence { seed: !seed, offset: 0 } };
        prop_assert_eq!(sys.iterate(&sys.iterate(&x, n), m), sys.iterate(&x, n + m));
    }

    #[test]
    fn fiber_maps_preserve_cylinder_mass(
        coords in prop::collection::btree_map(-20i64..20, prop::bool::ANY, 1..6),
        s in -5i64..=5,
    ) {
        let c = Cylinder::new(coords.into_iter().map(|(i, b)| (i, if b { 1 } else { -1 })).collect()).unwrap();
        prop_assert_eq!(c.preimage(s).mass(), c.mass());
        prop_assert_eq!(c.preimage(s).len(), c.len());
    }
}

#[test]
fn fiber_shift_preserves_empirical_mass() {
    let c = Cylinder::new(vec![(0, 1), (2, -1)]).unwrap();
    let n = 20_000u64;
    let hits = |s: i64| {
        (0..n)
            .filter(|&seed| c.contains(&FiberSequence { seed, offset: 0 }.shift(s)))
            .count() as f64
            / n as f64
    };
    for s in [-1, 0, 1, 7] {
        assert!((hits(s) - 0.25).abs() < 4.0 * (0.25f64 * 0.75 / n as f64).sqrt());
    }
}

#[test]
fn monte_carlo_agrees_with_exact() {
    let exact = shift_distance(101, ShiftMethod::Exact).unwrap().value;
    let mc = shift_distance(101, ShiftMethod::MonteCarlo { samples: 1_000_000, seed: 9 }).unwrap();
    assert!((mc.value - exact).abs() < 4.0 * mc.std_error, "{mc:?} vs {exact}");
}

#[test]
fn decreasing_with_square_root_decay() {
    let mut prev = f64::INFINITY;
    for w in (3..400).step_by(2) {
        let d = shift_distance(w, ShiftMethod::Exact).unwrap().value;
        assert!(d < prev, "W={w}");
        prev = d;
    }
    for w in [101usize, 1001, 10001] {
        let d = shift_distance(w, ShiftMethod::Exact).unwrap().value;
        let asym = 0.5 * (2.0 / (std::f64::consts::PI * w as f64)).sqrt();
        assert!((d / asym - 1.0).abs() < 0.05, "W={w}: {d} vs {asym}");
    }
}
