//! Non-learning policies: the rule-based heuristic, tour construction for
//! flexible delivery order, the nominal-model optimal search with an
//! executing wrapper, and uniform random baselines.

mod heuristic;
mod search;
pub mod tsp;

pub use heuristic::{heuristic_choice, heuristic_target, onward_reserve, HeuristicPolicy};
pub use search::{optimal_search, optimal_search_from, Plan, PlanStep, SearchError, SearchLimits};
pub use tsp::tsp_order;

use crate::engine::{Policy, PolicyError, WorldState};
use crate::stochastic::{RandomStreams, StreamId, StreamKind};

/// Executes per-truck optimal plans and replans when the realized state
/// leaves the plan.
///
/// In stochastic scenarios the plans debit `alpha` times the nominal leg
/// energy, so while energy coefficients stay within `alpha` the realized
/// battery is never below the planned one and the remaining plan stays
/// executable; replanning from the higher battery only removes charging.
/// Deterministic scenarios plan on nominal energy and never diverge.
#[derive(Debug, Clone)]
pub struct PlannerPolicy {
    pub limits: SearchLimits,
    /// Overrides the energy multiplier used for planning.
    pub consumption_factor: Option<f64>,
    plans: Vec<Option<(Plan, usize)>>,
    replans: u32,
    fallbacks: u32,
}

impl Default for PlannerPolicy {
    fn default() -> Self {
        Self::new(SearchLimits::default())
    }
}

impl PlannerPolicy {
    pub fn new(limits: SearchLimits) -> Self {
        Self { limits, consumption_factor: None, plans: Vec::new(), replans: 0, fallbacks: 0 }
    }

    /// Plans computed after the initial one, this episode.
    pub fn replans(&self) -> u32 {
        self.replans
    }

    /// Decisions handed to the heuristic because no plan was available.
    pub fn fallbacks(&self) -> u32 {
        self.fallbacks
    }

    fn limits_for(&self, world: &WorldState) -> SearchLimits {
        let cfg = &world.instance().config;
        let auto = if cfg.stochastic.deterministic { 1.0 } else { cfg.alpha };
        let factor = self.consumption_factor.unwrap_or(auto);
        SearchLimits { consumption_factor: factor, ..self.limits }
    }

    fn plan_from_here(&self, world: &WorldState, i: usize) -> Option<Plan> {
        let t = &world.trucks()[i];
        match optimal_search_from(world.instance(), &t.spec, t.node, t.battery, &t.remaining, self.limits_for(world)) {
            Ok(plan) => Some(plan),
            Err(SearchError::ExpansionLimit { best }) => best,
            Err(SearchError::Infeasible) => None,
        }
    }
}

impl Policy for PlannerPolicy {
    fn name(&self) -> String {
        "planner".into()
    }

    fn begin_episode(&mut self, world: &WorldState) -> Result<(), PolicyError> {
        self.plans = vec![None; world.trucks().len()];
        self.replans = 0;
        self.fallbacks = 0;
        Ok(())
    }

    fn act(&mut self, world: &WorldState) -> Result<usize, PolicyError> {
        let i = world.active_truck().ok_or_else(|| PolicyError("no active truck".into()))?;
        let set = world.action_set().ok_or_else(|| PolicyError("no action set".into()))?;
        if self.plans.len() != world.trucks().len() {
            self.plans = vec![None; world.trucks().len()];
        }
        let t = &world.trucks()[i];
        let on_plan = |plan: &Plan, k: usize| {
            plan.steps.get(k).is_some_and(|s| {
                s.node == t.node
                    && s.remaining == t.remaining
                    && (t.battery - s.battery).abs() <= 1e-9
                    && set.actions.get(s.action.index).is_some_and(|a| a.feasible)
            })
        };
        let cached = self.plans[i].as_ref().is_some_and(|(p, k)| on_plan(p, *k));
        if !cached {
            if self.plans[i].is_some() {
                self.replans += 1;
            }
            self.plans[i] = self.plan_from_here(world, i).map(|p| (p, 0));
            if !self.plans[i].as_ref().is_some_and(|(p, k)| on_plan(p, *k)) {
                self.plans[i] = None;
                self.fallbacks += 1;
                return Ok(heuristic_choice(world.instance(), &world.truck_view(i), set));
            }
        }
        let (plan, k) = self.plans[i].as_mut().expect("plan present");
        let index = plan.steps[*k].action.index;
        *k += 1;
        Ok(index)
    }
}

/// Uniform choice over the feasible slots, or over every slot when
/// `allow_infeasible` is set. Draws come from a policy stream seeded by the
/// episode seed, one lane per truck.
#[derive(Debug, Clone, Default)]
pub struct RandomPolicy {
    pub allow_infeasible: bool,
    streams: Option<RandomStreams>,
}

impl RandomPolicy {
    pub fn masked() -> Self {
        Self { allow_infeasible: false, streams: None }
    }

    pub fn unmasked() -> Self {
        Self { allow_infeasible: true, streams: None }
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> String {
        if self.allow_infeasible { "random-unmasked" } else { "random" }.into()
    }

    fn begin_episode(&mut self, world: &WorldState) -> Result<(), PolicyError> {
        self.streams = Some(RandomStreams::new(world.master_seed()));
        Ok(())
    }

    fn act(&mut self, world: &WorldState) -> Result<usize, PolicyError> {
        let i = world.active_truck().ok_or_else(|| PolicyError("no active truck".into()))?;
        let set = world.action_set().ok_or_else(|| PolicyError("no action set".into()))?;
        let streams = self.streams.get_or_insert_with(|| RandomStreams::new(world.master_seed()));
        let id = StreamId::new(StreamKind::Policy, i as u32);
        if self.allow_infeasible {
            return Ok(streams.below(id, set.actions.len().max(1)));
        }
        let feasible = set.feasible_indices();
        if feasible.is_empty() {
            return Ok(0);
        }
        Ok(feasible[streams.below(id, feasible.len())])
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::engine::run_episode;
    use crate::netmodel::fixtures;

    #[test]
    fn planner_matches_plan_in_deterministic_mode() {
        let inst = Arc::new(fixtures::t1_deterministic());
        let plan = optimal_search(&inst, 0, SearchLimits::default()).unwrap();
        let mut p = PlannerPolicy::default();
        let out = run_episode(&inst, &mut p, 0, false).unwrap();
        assert!(out.metrics.success);
        assert!((out.metrics.total_time_h - plan.nominal_cost).abs() < 1e-9);
        assert_eq!(p.replans(), 0);
        assert_eq!(p.fallbacks(), 0);
    }

    #[test]
    fn planner_with_charging_deterministic() {
        let mut inst = fixtures::t1_deterministic();
        inst.trucks[0].initial_battery = 80.0;
        let plan = optimal_search(&inst, 0, SearchLimits::default()).unwrap();
        let inst = Arc::new(inst);
        let mut p = PlannerPolicy::default();
        let out = run_episode(&inst, &mut p, 3, false).unwrap();
        assert!(out.metrics.success);
        assert_eq!(out.metrics.charging_sessions, 1);
        assert!((out.metrics.total_time_h - plan.nominal_cost).abs() < 1e-9);
    }

    #[test]
    fn planner_succeeds_on_stochastic_fixture() {
        let mut inst = fixtures::t1();
        inst.trucks[0].initial_battery = 100.0;
        let inst = Arc::new(inst);
        for seed in 0..20 {
            let out = run_episode(&inst, &mut PlannerPolicy::default(), seed, false).unwrap();
            assert!(out.metrics.success, "seed {seed}");
        }
    }

    #[test]
    fn single_feasible_action_is_taken() {
        // 40 kWh at the depot: only the charger leg passes headroom
        let mut inst = fixtures::t1_deterministic();
        inst.trucks[0].initial_battery = 40.0;
        let w = WorldState::reset(Arc::new(inst), 0);
        let set = w.action_set().unwrap();
        assert_eq!(set.feasible_indices(), vec![0]);
        let mut p = RandomPolicy::masked();
        p.begin_episode(&w).unwrap();
        for _ in 0..20 {
            assert_eq!(p.act(&w).unwrap(), 0);
        }
    }

    #[test]
    fn random_policy_is_reproducible() {
        let inst = Arc::new(fixtures::t1());
        let a = run_episode(&inst, &mut RandomPolicy::masked(), 11, true).unwrap();
        let b = run_episode(&inst, &mut RandomPolicy::masked(), 11, true).unwrap();
        assert_eq!(a.trace.unwrap().to_jsonl(), b.trace.unwrap().to_jsonl());
    }

    #[test]
    fn unmasked_random_can_pick_masked_slots() {
        let inst = Arc::new(fixtures::t1());
        let w = WorldState::reset(inst, 0);
        let mut p = RandomPolicy::unmasked();
        p.begin_episode(&w).unwrap();
        let set = w.action_set().unwrap().clone();
        let mut picked_masked = false;
        let mut pol_streams = RandomStreams::new(0);
        for _ in 0..200 {
            let k = pol_streams.below(StreamId::new(StreamKind::Policy, 0), set.actions.len());
            picked_masked |= !set.actions[k].feasible;
        }
        assert!(picked_masked);
        assert!(p.act(&w).unwrap() < set.actions.len());
    }
}
