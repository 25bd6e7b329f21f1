use std::sync::OnceLock;

use nalgebra::DVector;
use proptest::prelude::*;
use smoothdist::{blend, build, shapes, BuildConfig, DagStructure};

fn square() -> &'static DagStructure {
    static S: OnceLock<DagStructure> = OnceLock::new();
    S.get_or_init(|| build(&shapes::unit_square(), &BuildConfig::new(0.1, 7)).unwrap())
}

fn wide_box() -> &'static DagStructure {
    static S: OnceLock<DagStructure> = OnceLock::new();
    S.get_or_init(|| build(&shapes::axis_box(&[0.0, 0.0], &[4.0, 1.0]), &BuildConfig::new(0.1, 3)).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn value_is_within_epsilon_above_distance(x in 0.0..1.0f64, y in 0.0..1.0f64) {
        let s = square();
        let q = DVector::from_vec(vec![x, y]);
        let q = s.transform.apply(&q);
        let exact = s.polytope.exact_boundary_distance(&q).unwrap();
        let r = blend::eval(s, &q).unwrap();
        prop_assert!(r.value >= exact - 1e-9, "{} < {}", r.value, exact);
        prop_assert!(r.value <= exact + s.epsilon() + 1e-9, "{} > {} + eps", r.value, exact);
    }

    #[test]
    fn weights_sum_to_one(x in 0.0..1.0f64, y in 0.0..1.0f64) {
        let s = square();
        let q = s.transform.apply(&DVector::from_vec(vec![x, y]));
        let r = blend::eval(s, &q).unwrap();
        let total: f64 = r.contributions.iter().map(|c| c.phi).sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn original_coordinates_scale_back(x in 0.0..4.0f64, y in 0.0..1.0f64) {
        let s = wide_box();
        let p = DVector::from_vec(vec![x, y]);
        let exact = x.min(4.0 - x).min(y).min(1.0 - y);
        let r = blend::eval_original(s, &p).unwrap();
        let eps = s.transform.length_to_original(s.epsilon());
        prop_assert!(r.value >= exact - 1e-9 && r.value <= exact + eps + 1e-9);
    }
}

#[test]
fn same_seed_builds_identical_structures() {
    let a = build(&shapes::corner_triangle(), &BuildConfig::new(0.2, 5)).unwrap();
    let b = build(&shapes::corner_triangle(), &BuildConfig::new(0.2, 5)).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
}

#[test]
fn json_round_trip_preserves_values_bitwise() {
    let s = square();
    let back = DagStructure::from_json(&s.to_json().unwrap()).unwrap();
    assert_eq!(back.to_json().unwrap(), s.to_json().unwrap());
    for q in smoothdist::sampling::sample_polytope(&s.polytope, 200, 1, 0) {
        let a = blend::eval(s, &q).unwrap();
        let b = blend::eval(&back, &q).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.gradient, b.gradient);
    }
}

#[test]
fn every_point_has_a_witness_patch() {
    let s = square();
    for q in smoothdist::sampling::sample_polytope(&s.polytope, 500, 2, 0) {
        let (v, patch) = s.witness_value(&q).unwrap();
        assert!(patch < s.patches.len());
        let exact = s.polytope.exact_boundary_distance(&q).unwrap();
        assert!(v >= exact - 1e-9 && v <= exact + s.epsilon() + 1e-9);
    }
}

#[test]
fn verification_passes_on_a_fresh_three_dimensional_build() {
    let p = shapes::random_polytope(3, 8, 4);
    let s = build(&p, &BuildConfig::new(0.2, 1)).unwrap();
    let opts = smoothdist::verify::VerifyOptions { samples: 2000, gradient_points: 200, hessian_points: 50, segments: 20, lemma_instances: 50, seed: 0 };
    let report = smoothdist::verify::verify(&s, &opts).unwrap();
    assert!(report.passed(), "{}", report.table());
}
