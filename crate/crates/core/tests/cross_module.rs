use approx::assert_relative_eq;
use paoi_core::bounds_mg::{rejection_probs, upper_bounds};
use paoi_core::exact_mm::ExactAnalysis;
use paoi_core::infinite::{fcfs_paoi, lcfs_initial_buffer_probs, lcfs_paoi_upper_bound};
use paoi_core::sim::{occupancy_probe, simulate, Discipline, SimConfig};
use paoi_core::{ClassSpec, ServiceDistribution, SystemSpec};
use proptest::prelude::*;

fn exp(rate: f64) -> ServiceDistribution {
    ServiceDistribution::exponential(rate).unwrap()
}

fn sim_config(seed: u64) -> SimConfig {
    SimConfig {
        seed,
        replications: 8,
        completions_per_replication: 40_000,
        warmup_completions: 4_000,
        confidence_level: 0.99,
        ..SimConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rejection_probabilities_agree_across_routes(
        mu in 0.1f64..5.0,
        rates in prop::collection::vec(0.01f64..5.0, 1..=3),
    ) {
        let spec = SystemSpec::new(rates.iter().map(|&l| ClassSpec::new(l, exp(mu))).collect()).unwrap();
        let chain = rejection_probs(&spec).unwrap();
        let ctmc = ExactAnalysis::new(&spec).unwrap();
        for c in 0..spec.len() {
            prop_assert!((chain.p[c] - ctmc.buffer_full_prob(c)).abs() < 1e-10);
        }
    }

    #[test]
    fn bounds_never_undercut_exact_values(
        mu in 0.1f64..5.0,
        l1 in 0.01f64..5.0,
        l2 in 0.01f64..5.0,
    ) {
        let spec = SystemSpec::new(vec![ClassSpec::new(l1, exp(mu)), ClassSpec::new(l2, exp(mu))]).unwrap();
        let bounds = upper_bounds(&spec).unwrap();
        let exact = ExactAnalysis::new(&spec).unwrap();
        for (c, b) in bounds.iter().enumerate() {
            prop_assert!(b.total >= exact.paoi(c).unwrap().total * (1.0 - 1e-12));
        }
    }
}

#[test]
fn simulated_buffer_occupancy_matches_ctmc() {
    let spec = SystemSpec::new(vec![
        ClassSpec::new(0.6, exp(1.0)),
        ClassSpec::new(0.4, exp(0.8)),
    ])
    .unwrap();
    let exact = ExactAnalysis::new(&spec).unwrap();
    let est = simulate(&spec, Discipline::Buffer1Replace, &sim_config(11)).unwrap();
    let probe = occupancy_probe(&est);
    for c in 0..2 {
        let e = &est.classes[c];
        assert!((probe[c] - exact.buffer_full_prob(c)).abs() <= e.buffer_full_halfwidth);
        assert!((e.paoi_mean - exact.paoi(c).unwrap().total).abs() <= e.ci_halfwidth);
    }
}

#[test]
fn fcfs_formula_matches_simulation_for_mixed_laws() {
    let spec = SystemSpec::new(vec![
        ClassSpec::new(0.3, ServiceDistribution::deterministic(1.0).unwrap()),
        ClassSpec::new(0.2, ServiceDistribution::uniform(0.5, 1.5).unwrap()),
        ClassSpec::new(0.2, ServiceDistribution::gamma(2.0, 2.0).unwrap()),
    ])
    .unwrap();
    let analytic = fcfs_paoi(&spec).unwrap();
    let est = simulate(&spec, Discipline::FcfsInfinite, &sim_config(12)).unwrap();
    for (a, e) in analytic.iter().zip(&est.classes) {
        assert!(
            (a.total - e.paoi_mean).abs() <= e.ci_halfwidth,
            "{} vs {}±{}",
            a.total,
            e.paoi_mean,
            e.ci_halfwidth
        );
    }
}

#[test]
fn lcfs_occupancy_and_bound_against_simulation() {
    let spec = SystemSpec::new(
        [0.03, 0.02, 0.02]
            .into_iter()
            .map(|l| ClassSpec::new(l, ServiceDistribution::uniform(0.0, 20.0).unwrap()))
            .collect(),
    )
    .unwrap();
    let p = lcfs_initial_buffer_probs(&spec).unwrap();
    let bound = lcfs_paoi_upper_bound(&spec).unwrap();
    let est = simulate(&spec, Discipline::LcfsInfinite, &sim_config(13)).unwrap();
    let probe = occupancy_probe(&est);
    for c in 0..3 {
        let e = &est.classes[c];
        assert!(
            (probe[c] - p[c]).abs() <= e.buffer_full_halfwidth,
            "class {c}: {} vs {}",
            probe[c],
            p[c]
        );
        assert!(bound[c].total >= e.paoi_mean - e.ci_halfwidth);
    }
}

#[test]
fn single_class_routes_share_the_service_component() {
    let spec = SystemSpec::new(vec![ClassSpec::new(0.7, exp(1.3))]).unwrap();
    let exact = ExactAnalysis::new(&spec).unwrap().paoi(0).unwrap();
    let bound = upper_bounds(&spec).unwrap()[0];
    assert_relative_eq!(exact.service, bound.service, max_relative = 1e-15);
    assert_relative_eq!(exact.buffer_busy, bound.buffer_busy, max_relative = 1e-10);
    assert_relative_eq!(exact.interarrival, bound.interarrival, max_relative = 1e-15);
}
