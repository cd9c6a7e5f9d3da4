mod common;

use common::{brute, cohort, naive_sigma_sq, rel_err};
use proptest::prelude::*;
use refcurve::logrank::{classical_oslr, m_hat_zero, new_test, sigma_hat_sq, two_sample_logrank};
use refcurve::survival::{kaplan_meier, na_variance, nelson_aalen, Group, KmTarget};

fn arm(max_len: usize) -> impl Strategy<Value = Vec<(f64, bool)>> {
    prop::collection::vec(
        ((1u32..=8).prop_map(|k| k as f64 * 0.25), prop::bool::weighted(0.7)),
        1..=max_len,
    )
}

fn with_event(max_len: usize) -> impl Strategy<Value = Vec<(f64, bool)>> {
    arm(max_len).prop_filter("needs an event", |p| p.iter().any(|r| r.1))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn estimators_match_definitions(pairs in arm(12), probe in 0u32..=40) {
        let c = cohort(Group::A, &pairs);
        let na = nelson_aalen(&c).unwrap();
        let var = na_variance(&c).unwrap();
        let km = kaplan_meier(&c, KmTarget::Event).unwrap();
        let s = probe as f64 * 0.0625;
        let (b_na, b_var, b_km) = brute(&pairs, s);
        prop_assert_eq!(na.eval(s), b_na);
        prop_assert_eq!(var.eval(s), b_var);
        prop_assert_eq!(km.eval(s), b_km);
    }

    #[test]
    fn sorted_reduction_matches_double_sum(control in arm(12), experimental in arm(12)) {
        let (new, oslr) = sigma_hat_sq(&cohort(Group::A, &control), &cohort(Group::B, &experimental)).unwrap();
        let naive = naive_sigma_sq(&control, &experimental);
        prop_assert!(rel_err(new, naive) <= 1e-12, "{} vs {}", new, naive);
        prop_assert!(new >= oslr);
    }

    #[test]
    fn m_hat_matches_definition(control in arm(12), experimental in arm(12)) {
        let m = m_hat_zero(&cohort(Group::A, &control), &cohort(Group::B, &experimental)).unwrap();
        let events = experimental.iter().filter(|p| p.1).count() as f64;
        let expected: f64 = experimental.iter().map(|p| brute(&control, p.0).0).sum();
        let direct = (events - expected) / (experimental.len() as f64).sqrt();
        prop_assert!((m - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
    }
}

fn statistics(control: &[(f64, bool)], experimental: &[(f64, bool)], g: impl Fn(f64) -> f64) -> [Option<f64>; 3] {
    let a = cohort(Group::A, control).map_times(&g).unwrap();
    let b = cohort(Group::B, experimental).map_times(&g).unwrap();
    [
        new_test(&a, &b, 0.05).ok().map(|r| r.statistic),
        classical_oslr(&nelson_aalen(&a).unwrap(), &b, 0.05)
            .ok()
            .map(|r| r.statistic),
        two_sample_logrank(&a, &b, 0.05).ok().map(|r| r.statistic),
    ]
}

fn same(x: [Option<f64>; 3], y: [Option<f64>; 3]) -> bool {
    x.iter().zip(&y).all(|p| match p {
        (Some(u), Some(v)) => (u - v).abs() <= 1e-12,
        (None, None) => true,
        _ => false,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn statistics_depend_only_on_ranks(control in with_event(20), experimental in with_event(20)) {
        let base = statistics(&control, &experimental, |t| t);
        prop_assert!(same(base, statistics(&control, &experimental, |t| t * t)));
        prop_assert!(same(base, statistics(&control, &experimental, f64::ln_1p)));
    }

    #[test]
    fn new_variance_dominates(control in arm(30), experimental in arm(30)) {
        let (new, oslr) = sigma_hat_sq(&cohort(Group::A, &control), &cohort(Group::B, &experimental)).unwrap();
        prop_assert!(new >= oslr && oslr >= 0.0);
    }

    #[test]
    fn estimated_reference_agrees_with_new_numerator(control in arm(12), experimental in with_event(12)) {
        let a = cohort(Group::A, &control);
        let b = cohort(Group::B, &experimental);
        let oslr = classical_oslr(&nelson_aalen(&a).unwrap(), &b, 0.05).unwrap();
        prop_assert_eq!(oslr.m_hat, m_hat_zero(&a, &b).unwrap());
    }
}
