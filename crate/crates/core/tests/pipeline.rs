use proptest::prelude::*;
use restraint_core::lyapunov::{
    build_decrease_modulus, check_weak_petrov, verify_mrf_band, BandSpec, CandidateMrf, DecreaseModulus, ModulusParams,
    PetrovSpec,
};
use restraint_core::oracle::examples::{
    min_time_mrf, min_time_system, petrov_demo_rate, power_law_mrf, power_law_system, spiral_mrf,
};
use restraint_core::oracle::{compare_bound, hjb_value_iteration, region_maxima, spiral_oracle, HjbConfig, NodeKind};
use restraint_core::synthesis::{audit_synthesis, synthesize, SynthesisConfig};
use restraint_core::{Error, TargetSet, TrajectoryStatus, UniformGrid};

fn line(nodes: usize) -> UniformGrid {
    UniformGrid::with_counts(vec![-2.0], vec![2.0], vec![nodes]).unwrap()
}

fn certified_modulus(mrf: &CandidateMrf, s: f64, nodes: usize, delta: f64) -> (f64, DecreaseModulus) {
    let sys = power_law_system(0.0, s, 1.0, 1.0);
    let band = BandSpec {
        delta,
        sigma: Some(1.5),
        ..Default::default()
    };
    let report = verify_mrf_band(&sys, &TargetSet::point(vec![0.0]), mrf, &line(nodes), &band).unwrap();
    assert!(report.certified());
    (
        report.sigma,
        build_decrease_modulus(&report.m_hat_pairs(), &ModulusParams::default()).unwrap(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn min_time_synthesis_respects_bounds(x in prop_oneof![-1.45f64..-0.01, 0.01f64..1.45], eps in 0.05f64..0.5) {
        let mrf = min_time_mrf(0.9);
        let (sigma, modulus) = certified_modulus(&mrf, 0.0, 401, 1e-4);
        let cfg = SynthesisConfig { epsilon: eps, ..Default::default() };
        let sys = min_time_system();
        let out = synthesize(&sys, &TargetSet::point(vec![0.0]), &mrf, &modulus, &[x], sigma, &cfg).unwrap();
        prop_assert!(out.cost <= (1.0 + eps) * x.abs() / 0.9);
        prop_assert!(out.cost >= x.abs() - 1e-3 - 1e-9);
        let audit = audit_synthesis(&out, &sys, &mrf, &modulus, &cfg).unwrap();
        let failed: Vec<_> = audit.failures().map(|c| c.name.clone()).collect();
        prop_assert!(failed.is_empty(), "{:?}", failed);
    }

    #[test]
    fn oracle_below_synthesized_cost(x in 0.05f64..1.2) {
        let mrf = power_law_mrf(0.0, 1.0, 1.0, 1.0, 0.9);
        let (sigma, modulus) = certified_modulus(&mrf, 1.0, 4001, 1e-4);
        let sys = power_law_system(0.0, 1.0, 1.0, 1.0);
        let target = TargetSet::point(vec![0.0]);
        let out = synthesize(&sys, &target, &mrf, &modulus, &[x], sigma, &SynthesisConfig::default()).unwrap();
        let table = hjb_value_iteration(&sys, &target, &line(401), &HjbConfig::default()).unwrap();
        let v = table.interpolate(&[x]).unwrap();
        // the first-order oracle overshoots by about x h / 2
        prop_assert!(v <= out.cost + 0.5 * x * 0.01 + 1e-3, "V_h = {v}, cost = {}", out.cost);
    }
}

#[test]
fn refinement_reduces_oracle_error() {
    let sys = power_law_system(0.0, 1.0, 1.0, 1.0);
    let target = TargetSet::point(vec![0.0]);
    let errs: Vec<f64> = [101, 201, 401]
        .iter()
        .map(|&n| {
            let grid = line(n);
            let cfg = HjbConfig {
                h: grid.spacing(0),
                ..Default::default()
            };
            let t = hjb_value_iteration(&sys, &target, &grid, &cfg).unwrap();
            (0..grid.len())
                .map(|i| (t.values[i] - 0.5 * grid.point(i)[0].powi(2)).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
}

#[test]
fn inflated_modulus_stops_with_feedback_gap() {
    let sys = min_time_system();
    let mrf = min_time_mrf(0.9);
    let modulus = DecreaseModulus::from_knots(vec![(0.0, 0.0), (2.0, 2.0)], 1.0).unwrap();
    let r = synthesize(
        &sys,
        &TargetSet::point(vec![0.0]),
        &mrf,
        &modulus,
        &[1.0],
        1.5,
        &SynthesisConfig::default(),
    );
    match r {
        Err(Error::FeedbackGap { x, best }) => {
            assert_eq!(x, vec![1.0]);
            assert!((best + 1.0 / 1.9).abs() < 1e-12);
        }
        other => panic!("expected FeedbackGap, got {other:?}"),
    }
}

#[test]
fn petrov_candidate_synthesizes() {
    let sys = min_time_system();
    let target = TargetSet::point(vec![0.0]);
    let spec = PetrovSpec::default();
    let grid = UniformGrid::with_counts(vec![-1.0], vec![1.0], vec![401]).unwrap();
    let (report, mrf) = check_weak_petrov(&sys, &target, petrov_demo_rate(), &spec, &grid).unwrap();
    assert!(report.passed());
    // Phi(r) = 2 sqrt(r)
    assert!((mrf.value(&[0.25]) - 1.0).abs() < 1e-6);
    let band = BandSpec {
        delta: 1e-2,
        sigma: Some(1.9),
        ..Default::default()
    };
    let band_report = verify_mrf_band(&sys, &target, &mrf, &grid, &band).unwrap();
    assert!(band_report.certified(), "{:?}", band_report.verdict);
    let modulus = build_decrease_modulus(&band_report.m_hat_pairs(), &ModulusParams::default()).unwrap();
    let cfg = SynthesisConfig::default();
    let out = synthesize(&sys, &target, &mrf, &modulus, &[0.5], 1.9, &cfg).unwrap();
    assert!(out.cost <= out.cost_bound);
    assert!(audit_synthesis(&out, &sys, &mrf, &modulus, &cfg).unwrap().passed());
}

#[test]
fn spiral_oracle_vanishes_on_ring() {
    let cfg = HjbConfig {
        h: 0.02,
        ..Default::default()
    };
    let oracle = spiral_oracle(1.0, 0.05, 0.2, &cfg).unwrap();
    let table = &oracle.table;
    assert!(table.values.iter().all(|v| *v >= 0.0));
    assert!(table
        .kinds
        .iter()
        .zip(&table.values)
        .all(|(k, v)| *k != NodeKind::Target || *v == 0.0));
    let u0 = spiral_mrf(0.0, 1.0);
    let ring = |z: &[f64]| {
        let r = (z[0] * z[0] + z[1] * z[1]).sqrt();
        (3.0..4.0).contains(&r)
    };
    let (count, v_max, bound_max) = region_maxima(table, &u0, 1.0, ring);
    assert!(count > 100);
    assert!(v_max < 1e-9, "V_h on R up to {v_max}");
    assert!(bound_max == 0.0);
    let ueps = spiral_mrf(0.5, 1.0);
    let cmp = compare_bound(table, &ueps, 1.0, 1e-6);
    assert!(cmp.passed(), "worst margin {} at {:?}", cmp.worst_margin, cmp.worst_at);
}

#[test]
fn truncated_status_reports_level() {
    let mrf = min_time_mrf(0.9);
    let (sigma, modulus) = certified_modulus(&mrf, 0.0, 401, 1e-4);
    let cfg = SynthesisConfig {
        max_levels: 2,
        ..Default::default()
    };
    let out = synthesize(
        &min_time_system(),
        &TargetSet::point(vec![0.0]),
        &mrf,
        &modulus,
        &[1.0],
        sigma,
        &cfg,
    )
    .unwrap();
    assert_eq!(out.status(), TrajectoryStatus::Truncated);
    assert!((out.final_level - 0.25).abs() < 1e-8);
    assert!((out.final_distance - 0.25).abs() < 1e-8);
}
