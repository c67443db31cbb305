use proptest::prelude::*;
use proptest::test_runner::RngSeed;

use semireg::setmap::dist_to_preimage;
use semireg::{Ball, GraphPoint, NormKind, Procedure, SetMap, Settings, ValueSet, Vector};

fn vec_of(dim: usize) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-10.0f64..10.0, dim).prop_map(Vector::from_vec)
}

fn triple() -> impl Strategy<Value = (Vector, Vector, Vector)> {
    (1usize..=6).prop_flat_map(|d| (vec_of(d), vec_of(d), vec_of(d)))
}

fn norm_kind() -> impl Strategy<Value = NormKind> {
    prop_oneof![Just(NormKind::Euclidean), Just(NormKind::Max)]
}

/// x ↦ {x² + c₁, sin x + c₂, −x + c₃}.
fn three_branches(c: [f64; 3]) -> SetMap {
    SetMap::finite(vec![
        Procedure::scalar("x^2", move |x| x * x + c[0]),
        Procedure::scalar("sin", move |x| x.sin() + c[1]),
        Procedure::scalar("-x", move |x| -x + c[2]),
    ])
    .unwrap()
}

fn sorted(v: &ValueSet) -> Vec<f64> {
    let ValueSet::Finite(pts) = v else { panic!("expected a finite value set, got {v:?}") };
    let mut out: Vec<f64> = pts.iter().map(|p| p[0]).collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Fixed seed so a failure reproduces on every run.
fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, rng_seed: RngSeed::Fixed(0x5EED), failure_persistence: None, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(1000))]

    #[test]
    fn triangle_inequality((a, b, c) in triple(), norm in norm_kind()) {
        let (ab, bc, ac) = (norm.dist(&a, &b), norm.dist(&b, &c), norm.dist(&a, &c));
        prop_assert!(ac <= ab + bc + 1e-12 * (1.0 + ab + bc));
        prop_assert_eq!(norm.dist(&a, &b), norm.dist(&b, &a));
        prop_assert_eq!(norm.dist(&a, &a), 0.0);
    }
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn zero_distance_iff_member(x in -3.0f64..3.0, c in prop::array::uniform3(-1.0f64..1.0), k in 0usize..3, delta in -1.0f64..1.0, norm in norm_kind()) {
        let f = three_branches(c);
        let s = Settings::with_norm(norm);
        let xs = Vector::from_element(1, x);
        let member = Vector::from_element(1, [x * x + c[0], x.sin() + c[1], -x + c[2]][k]);
        prop_assert_eq!(f.dist_to_value_set(&member, &xs, norm).unwrap(), 0.0);
        prop_assert!(f.on_graph(&GraphPoint::new(xs.clone(), member.clone()), &s).unwrap());
        let y = &member + Vector::from_element(1, delta);
        let d = f.dist_to_value_set(&y, &xs, norm).unwrap();
        let brute = sorted(&f.values(&xs).unwrap()).iter().map(|v| (v - y[0]).abs()).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(d, brute);
        prop_assert_eq!(d == 0.0, f.values(&xs).unwrap().contains(&y, norm, 0.0).unwrap());
        prop_assert_eq!(d <= s.tol_feas, f.on_graph(&GraphPoint::new(xs, y), &s).unwrap());
    }

    #[test]
    fn epigraph_distance_is_the_shortfall(x in -3.0f64..3.0, y in -5.0f64..15.0) {
        let f = SetMap::epigraph(Procedure::scalar("x^2", |x| x * x)).unwrap();
        let d = f.dist_to_value_set(&Vector::from_element(1, y), &Vector::from_element(1, x), NormKind::Euclidean).unwrap();
        prop_assert_eq!(d, (x * x - y).max(0.0));
    }

    #[test]
    fn sum_of_finite_maps_is_the_minkowski_sum(x in -3.0f64..3.0, c in prop::array::uniform3(-1.0f64..1.0), d in prop::array::uniform3(-1.0f64..1.0)) {
        let (f, g) = (three_branches(c), three_branches(d));
        let xs = Vector::from_element(1, x);
        let (fv, gv) = (sorted(&f.values(&xs).unwrap()), sorted(&g.values(&xs).unwrap()));
        let mut brute: Vec<f64> = fv.iter().flat_map(|a| gv.iter().map(move |b| a + b)).collect();
        brute.sort_by(f64::total_cmp);
        let sum = SetMap::sum(f, g).unwrap();
        prop_assert_eq!(sorted(&sum.values(&xs).unwrap()), brute);
    }
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn preimage_distance_is_monotone(x0 in -1.5f64..1.5, y in -1.0f64..1.0, r in 0.05f64..1.0, grow in 1.0f64..3.0, tol_exp in -10i32..-4) {
        // x³ − x has no closed-form preimage, so this exercises the grid search.
        let f = SetMap::scalar_fn("x^3 - x", |x| x * x * x - x);
        let x0 = Vector::from_element(1, x0);
        let y = Vector::from_element(1, y);
        let tight = Settings { tol_feas: 10f64.powi(tol_exp), ..Settings::default() };
        let loose = Settings { tol_feas: 10f64.powi(tol_exp + 2), ..Settings::default() };
        let small = Ball::closed(x0.clone(), r);
        let large = Ball::closed(x0.clone(), r * grow);
        // Equal up to the resolution of the final refinement steps.
        let d = dist_to_preimage(&f, &x0, &y, &small, &tight).unwrap() + 1e-10;
        prop_assert!(dist_to_preimage(&f, &x0, &y, &small, &loose).unwrap() <= d);
        prop_assert!(dist_to_preimage(&f, &x0, &y, &large, &tight).unwrap() <= d);
    }
}
