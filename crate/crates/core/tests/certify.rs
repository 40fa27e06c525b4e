mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surjkit::certify::{
    self, composition_preserves_rank, default_sample_points, detect_degenerate, independence_report, BoxSpec,
    CertificateStatus, CertifyError, CertifyOptions, FamilyFunction,
};
use surjkit::factory::{self, PreimageOptions};
use surjkit::phi::{make_diagonal_family, ScalarSpan, VectorSpanMember, VectorTerm};
use surjkit::rank::{numerical_rank, DEFAULT_RANK_TOL};

/// Plain bisection on `2 sinh(t) = y` over a fixed bracket.
fn bisect_phi1(y: f64) -> f64 {
    let (mut a, mut b) = (-50.0f64, 50.0f64);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if common::phi_ref(1.0, m) < y {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[test]
fn scalar_identity_case_matches_bisection() {
    let phi1 = VectorSpanMember::basis(vec![1.0]).unwrap();
    let e = factory::phi_compose(&phi1, &factory::identity(1).unwrap()).unwrap();
    let b = BoxSpec::cube(1, -3.0, 3.0, 13).unwrap();
    let cert = certify::certify_surjective_on_box(&e, &b, 1e-6).unwrap();
    assert!(cert.is_certified());
    for r in &cert.records {
        let t = r.preimage[0].to_f64();
        let oracle = bisect_phi1(r.target[0]);
        // slope of 2 sinh is at least 2, so the parameters agree to eps/2
        assert!((t - oracle).abs() <= 0.5e-6 + 1e-12, "{:?}: {t} vs {oracle}", r.target);
    }
}

#[test]
fn pipeline_certificate_rechecks_within_twice_stored_error() {
    let base = factory::surjection(2, 3).unwrap();
    let fam = make_diagonal_family(&[1.0], 3).unwrap();
    let member = fam[0].clone().with_base(base.clone()).unwrap();
    let b = BoxSpec::cube(3, -10.0, 10.0, 5).unwrap();
    let cert = certify::certify_member(&member, &b, 1e-3, CertifyOptions::default()).unwrap();
    assert!(cert.is_certified());
    let expr = factory::member_expr(&member).unwrap();
    let again = certify::recheck(&cert, &expr).unwrap();
    for (r, e) in cert.records.iter().zip(&again) {
        assert!(*e <= 2.0 * r.error.max(f64::MIN_POSITIVE) || *e == r.error, "{e} vs {}", r.error);
        assert!(*e <= 1e-3);
    }
}

#[test]
fn certificates_are_deterministic() {
    let e = factory::surjection(1, 2).unwrap();
    let b = BoxSpec::cube(2, -3.0, 3.0, 9).unwrap();
    let a = certify::certify_surjective_on_box(&e, &b, 1e-3).unwrap();
    let c = certify::certify_surjective_on_box(&e, &b, 1e-3).unwrap();
    assert_eq!(a, c);
}

#[test]
fn budget_and_argument_errors() {
    let e = factory::surjection(2, 3).unwrap();
    let b = BoxSpec::cube(3, -1.0, 1.0, 50).unwrap();
    assert!(matches!(
        certify::certify_surjective_on_box(&e, &b, 1e-3),
        Err(CertifyError::Budget { .. })
    ));
    let opts = CertifyOptions {
        budget: 1_000_000,
        ..Default::default()
    };
    let small = BoxSpec::cube(3, -1.0, 1.0, 3).unwrap();
    assert!(certify::certify_with(&e, &small, 1e-3, opts).is_ok());
    assert!(matches!(
        certify::certify_surjective_on_box(&e, &small, 0.0),
        Err(CertifyError::Argument(_))
    ));
    let wrong = BoxSpec::cube(2, -1.0, 1.0, 3).unwrap();
    assert!(matches!(certify::certify_surjective_on_box(&e, &wrong, 1e-3), Err(CertifyError::Box(_))));
}

#[test]
fn exhausted_refinement_is_reported_as_failed() {
    let e = factory::surjection(1, 2).unwrap();
    let b = BoxSpec::cube(2, -2.0, 2.0, 4).unwrap();
    let opts = CertifyOptions {
        budget: 100,
        preimage: PreimageOptions {
            max_doublings: 1,
            depth_cap: 4,
        },
    };
    let cert = certify::certify_with(&e, &b, 1e-6, opts).unwrap();
    assert!(matches!(cert.status, CertificateStatus::Failed { .. }));
    assert!(cert.records.iter().all(|r| r.note.is_some() || r.error <= 1e-6));
}

#[test]
fn composition_examples() {
    let base = factory::surjection(2, 3).unwrap();
    let pts: Vec<Vec<f64>> = default_sample_points(12).into_iter().map(|p| vec![p[0], 1.0]).collect();
    let one = make_diagonal_family(&[1.0], 3).unwrap();
    let c = composition_preserves_rank(&one, &base, &pts, DEFAULT_RANK_TOL, 10).unwrap();
    assert_eq!((c.composed.rank, c.image.rank), (1, 1));

    let mut fam = make_diagonal_family(&[1.0, 2.0], 3).unwrap();
    fam.push(fam[0].clone());
    let c = composition_preserves_rank(&fam, &base, &pts, DEFAULT_RANK_TOL, 10).unwrap();
    assert!(c.ranks_equal());
    assert_eq!(c.composed.rank, 2);
    assert!(!c.composed.full_rank());
}

#[test]
fn symmetric_small_grid_is_rank_deficient() {
    // odd functions on 16 symmetric points see only 8 distinct |x|
    let exps: Vec<f64> = (1..=10).map(|i| 0.5 * i as f64).collect();
    let fam: Vec<FamilyFunction> = exps
        .iter()
        .map(|&r| FamilyFunction::Scalar(ScalarSpan::basis(r).unwrap()))
        .collect();
    let pts: Vec<Vec<f64>> = (0..16).map(|i| vec![-2.0 + 4.0 * i as f64 / 15.0]).collect();
    let r = independence_report(&fam, &pts, DEFAULT_RANK_TOL, 1).unwrap();
    assert!(r.rank <= 8, "rank {}", r.rank);
    let r = independence_report(&fam, &default_sample_points(16), DEFAULT_RANK_TOL, 1).unwrap();
    assert_eq!(r.rank, 10);
}

#[test]
fn pivot_rank_agrees_with_svd_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..200 {
        let m = rng.gen_range(1..6);
        let n = rng.gen_range(1..8);
        let true_rank = rng.gen_range(0..=m.min(n));
        // product of random m×r and r×n factors has rank r generically
        let a = DMatrix::<f64>::from_fn(m, true_rank, |_, _| rng.gen_range(-1.0..1.0));
        let b = DMatrix::<f64>::from_fn(true_rank, n, |_, _| rng.gen_range(-1.0..1.0));
        let p = &a * &b;
        let rows: Vec<Vec<f64>> = (0..m).map(|i| (0..n).map(|j| p[(i, j)]).collect()).collect();
        let svd = p.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let svd_rank = svd.singular_values.iter().filter(|&&s| s > 1e-8 * smax).count();
        let ours = numerical_rank(&rows, DEFAULT_RANK_TOL).unwrap().rank;
        assert_eq!(ours, true_rank);
        assert_eq!(svd_rank, true_rank);
        assert_eq!(common::exact_rank(&rows).min(true_rank), true_rank);
    }
}

fn arb_member() -> impl Strategy<Value = VectorSpanMember> {
    let term = (prop_oneof![-3.0f64..-0.1, 0.1f64..3.0], prop::collection::vec(prop::sample::select(vec![0.5, 1.0, 2.0, 3.0]), 2));
    prop::collection::vec(term, 1..4).prop_map(|ts| {
        VectorSpanMember::new(
            2,
            ts.into_iter()
                .map(|(c, e)| VectorTerm {
                    coefficient: c,
                    exponents: e,
                })
                .collect(),
        )
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn degeneracy_dichotomy(m in arb_member()) {
        let reduced = surjkit::phi::component_reduce(&m);
        let fired = detect_degenerate(&m).is_some();
        prop_assert_eq!(fired, reduced.iter().any(ScalarSpan::is_zero));
    }

    #[test]
    fn diagonal_combinations_never_degenerate(cs in prop::collection::vec(-5.0f64..5.0, 3)) {
        prop_assume!(cs.iter().any(|&c| c != 0.0));
        let fam = make_diagonal_family(&[0.5, 1.5, 2.5], 3).unwrap();
        let parts: Vec<(f64, &VectorSpanMember)> = cs.iter().copied().zip(&fam).collect();
        let combo = VectorSpanMember::linear_combination(&parts).unwrap();
        prop_assert!(detect_degenerate(&combo).is_none());
    }

    #[test]
    fn adding_a_function_never_lowers_rank(exps in prop::collection::btree_set(1u32..=10, 1..8), extra in 1u32..=10) {
        let fam: Vec<FamilyFunction> = exps
            .iter()
            .map(|&r| FamilyFunction::Scalar(ScalarSpan::basis(0.5 * r as f64).unwrap()))
            .collect();
        let pts = default_sample_points(16);
        let before = independence_report(&fam, &pts, DEFAULT_RANK_TOL, 1).unwrap().rank;
        let mut more = fam.clone();
        more.push(FamilyFunction::Scalar(ScalarSpan::basis(0.5 * extra as f64).unwrap()));
        let after = independence_report(&more, &pts, DEFAULT_RANK_TOL, 1).unwrap().rank;
        prop_assert!(after >= before);
    }
}

#[test]
fn degenerate_member_reported_with_coordinate() {
    let m = VectorSpanMember::new(
        3,
        vec![
            VectorTerm {
                coefficient: 2.0,
                exponents: vec![1.0, 1.0, 4.0],
            },
            VectorTerm {
                coefficient: -2.0,
                exponents: vec![2.0, 1.0, 4.0],
            },
        ],
    )
    .unwrap();
    assert_eq!(detect_degenerate(&m).unwrap().coordinate, 2);
    let fam = make_diagonal_family(&[1.0], 3).unwrap();
    assert!(detect_degenerate(&fam[0]).is_none());
    let e = factory::phi_compose(&m, &factory::surjection(1, 3).unwrap()).unwrap();
    let b = BoxSpec::cube(3, -1.0, 1.0, 3).unwrap();
    assert!(matches!(
        certify::certify_surjective_on_box(&e, &b, 1e-3),
        Err(CertifyError::Degenerate(w)) if w.coordinate == 2
    ));
}
