use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use thiserror::Error;

use crate::actionspace::{build_action_set, ActionDescriptor, ActionKind, TruckView};
use crate::netmodel::{NetworkInstance, TruckSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchLimits {
    /// Battery resolution of the dominance check, kWh. Zero compares exact
    /// values.
    pub battery_quantum: f64,
    pub max_expansions: usize,
    /// Multiplier applied to nominal leg energy when debiting the battery.
    /// `1.0` plans on nominal dynamics; `alpha` plans conservatively.
    pub consumption_factor: f64,
}

impl Default for SearchLimits {
    fn default() -> Self {
        Self { battery_quantum: 1.0, max_expansions: 500_000, consumption_factor: 1.0 }
    }
}

impl SearchLimits {
    pub fn exact() -> Self {
        Self { battery_quantum: 0.0, ..Self::default() }
    }
}

/// One planned action together with the state it is planned from.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanStep {
    pub action: ActionDescriptor,
    pub node: usize,
    pub battery: f64,
    /// Pending deliveries before the action, assignment order.
    pub remaining: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
    /// Nominal hours: travel, unloading and charging durations.
    pub nominal_cost: f64,
    /// False when the search stopped early and this is the best goal found.
    pub optimal: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("no feasible plan exists")]
    Infeasible,
    #[error("expansion limit reached; best plan found so far: {}", .best.as_ref().map_or("none".to_string(), |p| format!("{:.6} h", p.nominal_cost)))]
    ExpansionLimit { best: Option<Plan> },
}

#[derive(Clone, Copy)]
struct Label {
    g: f64,
    /// Travel, charging and unloading hours, summed like episode metrics.
    parts: [f64; 3],
    node: usize,
    mask: u64,
    battery: f64,
    parent: Option<usize>,
    action: Option<ActionDescriptor>,
}

struct Open {
    g: f64,
    battery: f64,
    seq: usize,
}

impl PartialEq for Open {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Open {}
impl PartialOrd for Open {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Open {
    // Max-heap: cheapest first, then fuller battery, then FIFO.
    fn cmp(&self, o: &Self) -> Ordering {
        o.g.total_cmp(&self.g).then(self.battery.total_cmp(&o.battery)).then(o.seq.cmp(&self.seq))
    }
}

fn remaining_of(spec: &TruckSpec, mask: u64) -> Vec<usize> {
    spec.deliveries.iter().enumerate().filter(|(k, _)| mask & (1 << k) != 0).map(|(_, &d)| d).collect()
}

fn mask_of(spec: &TruckSpec, remaining: &[usize]) -> u64 {
    spec.deliveries.iter().enumerate().filter(|(_, d)| remaining.contains(d)).fold(0, |m, (k, _)| m | (1 << k))
}

fn reconstruct(arena: &[Label], spec: &TruckSpec, goal: usize) -> Plan {
    let mut steps = Vec::new();
    let mut at = goal;
    while let Some(p) = arena[at].parent {
        let before = &arena[p];
        steps.push(PlanStep {
            action: arena[at].action.expect("non-root label has an action"),
            node: before.node,
            battery: before.battery,
            remaining: remaining_of(spec, before.mask),
        });
        at = p;
    }
    steps.reverse();
    Plan { steps, nominal_cost: arena[goal].g, optimal: true }
}

/// Minimum nominal-time plan for truck `truck` from its initial state.
pub fn optimal_search(inst: &NetworkInstance, truck: usize, limits: SearchLimits) -> Result<Plan, SearchError> {
    let spec = &inst.trucks[truck];
    optimal_search_from(inst, spec, spec.start_node, spec.initial_battery, &spec.deliveries, limits)
}

/// Uniform-cost search over `(node, pending set, battery)` with successor
/// actions from the masked action set, queue-free stations and nominal
/// travel times. Labels at the same `(node, pending set)` are dominated by
/// any earlier-expanded label with at least the same battery bucket.
pub fn optimal_search_from(
    inst: &NetworkInstance,
    spec: &TruckSpec,
    node: usize,
    battery: f64,
    remaining: &[usize],
    limits: SearchLimits,
) -> Result<Plan, SearchError> {
    let unload = inst.config.nominal_unloading();
    let bucket = |b: f64| if limits.battery_quantum > 0.0 { (b / limits.battery_quantum + 1e-9).floor() } else { b };

    let mut arena = vec![Label {
        g: 0.0,
        parts: [0.0; 3],
        node,
        mask: mask_of(spec, remaining),
        battery,
        parent: None,
        action: None,
    }];
    let mut open = BinaryHeap::new();
    open.push(Open { g: 0.0, battery, seq: 0 });
    let mut closed: HashMap<(usize, u64), Vec<f64>> = HashMap::new();
    let mut best_goal: Option<usize> = None;
    let mut expansions = 0usize;

    while let Some(item) = open.pop() {
        let cur = arena[item.seq];
        if cur.mask == 0 {
            return Ok(reconstruct(&arena, spec, item.seq));
        }
        let key_b = bucket(cur.battery);
        let seen = closed.entry((cur.node, cur.mask)).or_default();
        if seen.iter().any(|&b| b >= key_b) {
            continue;
        }
        seen.push(key_b);

        expansions += 1;
        if expansions > limits.max_expansions {
            return Err(SearchError::ExpansionLimit {
                best: best_goal.map(|g| Plan { optimal: false, ..reconstruct(&arena, spec, g) }),
            });
        }

        let rem = remaining_of(spec, cur.mask);
        let view = TruckView { spec, node: cur.node, battery: cur.battery, remaining: &rem, now: 0.0 };
        let set = build_action_set(inst, &view, |_| true);
        for a in set.actions.iter().filter(|a| a.feasible) {
            let mut parts = cur.parts;
            let (next_node, mask, b) = match a.kind {
                ActionKind::NavigateDelivery => {
                    let d = a.target.expect("target");
                    let slot = spec.deliveries.iter().position(|&x| x == d).expect("assigned");
                    parts[0] += inst.tau(cur.node, d);
                    parts[2] += unload;
                    let b = cur.battery - limits.consumption_factor * inst.energy(cur.node, d);
                    (d, cur.mask & !(1 << slot), b)
                }
                ActionKind::NavigateCharger => {
                    let c = a.target.expect("target");
                    parts[0] += inst.tau(cur.node, c);
                    (c, cur.mask, cur.battery - limits.consumption_factor * inst.energy(cur.node, c))
                }
                ActionKind::Charge => {
                    if a.est_battery_after <= cur.battery {
                        continue;
                    }
                    parts[1] += a.duration.expect("duration");
                    (cur.node, cur.mask, a.est_battery_after)
                }
            };
            let g = parts[0] + parts[1] + parts[2];
            if closed.get(&(next_node, mask)).is_some_and(|v| v.iter().any(|&x| x >= bucket(b))) {
                continue;
            }
            arena.push(Label { g, parts, node: next_node, mask, battery: b, parent: Some(item.seq), action: Some(*a) });
            let idx = arena.len() - 1;
            if mask == 0 && best_goal.is_none_or(|k| g < arena[k].g) {
                best_goal = Some(idx);
            }
            open.push(Open { g, battery: b, seq: idx });
        }
    }
    Err(SearchError::Infeasible)
}
