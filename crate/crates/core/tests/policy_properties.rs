use std::sync::Arc;

use etfrp_core::engine::run_episode;
use etfrp_core::evaluation::{run_bench, stat, PolicySpec, ScenarioSource};
use etfrp_core::netmodel::{fixtures, generate_instance, validate_assignment, GeneratorParams};
use etfrp_core::planners::{HeuristicPolicy, PlannerPolicy, RandomPolicy};

fn single_truck(seed: u64) -> GeneratorParams {
    GeneratorParams {
        n_nodes: 10,
        n_chargers: 2,
        n_trucks: 1,
        stops_per_truck: 2 + (seed % 2) as usize,
        area_km: 150.0,
        battery_kwh: 200.0,
        ..GeneratorParams::default()
    }
}

#[test]
fn heuristic_on_deterministic_fixture() {
    let inst = Arc::new(fixtures::t1_deterministic());
    let m = run_episode(&inst, &mut HeuristicPolicy, 0, false).unwrap().metrics;
    assert!(m.success);
    assert_eq!(m.deliveries_completed, 2);
    assert_eq!(m.waiting_time_h, 0.0);
}

#[test]
fn planner_on_deterministic_fixture_takes_two_point_four_hours() {
    let inst = Arc::new(fixtures::t1_deterministic());
    let m = run_episode(&inst, &mut PlannerPolicy::default(), 0, false).unwrap().metrics;
    assert!(m.success);
    assert_eq!(m.total_time_h, 2.4);
}

#[test]
fn planner_succeeds_on_feasible_stochastic_single_truck_instances() {
    for seed in 0..100u64 {
        let inst = generate_instance(&single_truck(seed), seed).unwrap();
        assert!(validate_assignment(&inst, &inst.trucks[0]).feasible);
        let inst = Arc::new(inst);
        let m = run_episode(&inst, &mut PlannerPolicy::default(), seed, false).unwrap().metrics;
        assert!(m.success, "seed {seed}: {m:?}");
    }
}

#[test]
fn unmasked_random_succeeds_no_more_than_masked_random() {
    let inst = Arc::new(generate_instance(&single_truck(0), 77).unwrap());
    let (mut masked, mut unmasked) = (0, 0);
    for seed in 0..200u64 {
        masked += u32::from(run_episode(&inst, &mut RandomPolicy::masked(), seed, false).unwrap().metrics.success);
        unmasked += u32::from(run_episode(&inst, &mut RandomPolicy::unmasked(), seed, false).unwrap().metrics.success);
    }
    assert!(unmasked <= masked, "unmasked {unmasked} > masked {masked}");
}

#[test]
fn planner_beats_random_on_small_instances() {
    // ties count for nobody, and with two stops random often matches the plan
    let params = GeneratorParams {
        n_nodes: 8,
        n_chargers: 2,
        n_trucks: 1,
        stops_per_truck: 3,
        area_km: 200.0,
        ..GeneratorParams::default()
    };
    let (rep, rows) =
        run_bench(&ScenarioSource::Generated(params), &[PolicySpec::Planner, PolicySpec::Random], 50, 0).unwrap();
    assert_eq!(rows.len(), 100);
    let planner = rep.summary("planner").unwrap();
    assert!(planner.win_ratio >= 0.9, "planner win ratio {}", planner.win_ratio);
    assert_eq!(planner.normalized_reward, Some(1.0));
    assert!(stat(&planner.stats, "success").mean >= stat(&rep.summary("random").unwrap().stats, "success").mean);
}
