use crate::actionspace::{ActionKind, ActionSet, TruckView};
use crate::engine::{Policy, PolicyError, WorldState};
use crate::netmodel::{DeliveryMode, NetworkInstance};

use super::tsp::tsp_order;

/// Delivery the heuristic steers toward: the next one in sequential mode,
/// the head of the current tour in flexible mode.
pub fn heuristic_target(inst: &NetworkInstance, view: &TruckView) -> Option<usize> {
    match view.spec.mode {
        DeliveryMode::Sequential => view.remaining.first().copied(),
        DeliveryMode::Flexible if view.remaining.is_empty() => None,
        DeliveryMode::Flexible => tsp_order(inst, view.node, view.remaining).first().copied(),
    }
}

/// Energy to keep in hand after reaching `target` so that some charger is
/// still reachable from there. Zero for the last delivery.
pub fn onward_reserve(inst: &NetworkInstance, view: &TruckView, target: usize) -> f64 {
    if view.remaining.len() <= 1 {
        return 0.0;
    }
    inst.chargers
        .iter()
        .map(|c| inst.energy(target, c.node))
        .min_by(f64::total_cmp)
        .map_or(0.0, |e| inst.config.alpha * e)
}

/// Rule-based choice over `set` for the truck described by `view`.
///
/// In order: head for the target delivery if it leaves the onward reserve;
/// charge at the current station (shortest duration that covers the next
/// leg plus reserve, else the longest); go to the nearest-detour charger
/// from which the target is reachable on a full battery; go to the target
/// on bare headroom; go to any reachable charger; take any feasible action.
pub fn heuristic_choice(inst: &NetworkInstance, view: &TruckView, set: &ActionSet) -> usize {
    let alpha = inst.config.alpha;
    let spec = view.spec;
    let avail = view.battery - spec.battery_floor;
    let Some(target) = heuristic_target(inst, view) else {
        return set.feasible_indices().first().copied().unwrap_or(0);
    };
    let reserve = onward_reserve(inst, view, target);
    let need = alpha * inst.energy(view.node, target) + reserve;

    let target_slot = set
        .actions
        .iter()
        .find(|a| a.kind == ActionKind::NavigateDelivery && a.target == Some(target) && a.feasible)
        .map(|a| a.index);
    if let Some(k) = target_slot {
        if need < avail {
            return k;
        }
    }

    let charges: Vec<_> = set.actions.iter().filter(|a| a.kind == ActionKind::Charge && a.feasible).collect();
    if !charges.is_empty() && view.battery < spec.battery_capacity {
        if let Some(a) = charges.iter().find(|a| a.est_battery_after - spec.battery_floor > need) {
            return a.index;
        }
        let longest = charges.last().expect("non-empty");
        if longest.est_battery_after > view.battery {
            return longest.index;
        }
    }

    let detour = |node: usize| inst.tau(view.node, node) + inst.tau(node, target) - inst.tau(view.node, target);
    let mut chargers: Vec<_> = set
        .actions
        .iter()
        .filter(|a| a.kind == ActionKind::NavigateCharger && a.feasible)
        .map(|a| (detour(a.target.expect("charger node")), a))
        .collect();
    chargers.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.index.cmp(&y.1.index)));
    let full = spec.battery_capacity - spec.battery_floor;
    if let Some((_, a)) =
        chargers.iter().find(|(_, a)| alpha * inst.energy(a.target.expect("charger node"), target) + reserve < full)
    {
        return a.index;
    }
    if let Some(k) = target_slot {
        return k;
    }
    if let Some((_, a)) = chargers.first() {
        return a.index;
    }
    set.feasible_indices().first().copied().unwrap_or(0)
}

/// Stateless rule-based baseline.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicPolicy;

impl Policy for HeuristicPolicy {
    fn name(&self) -> String {
        "heuristic".into()
    }

    fn act(&mut self, world: &WorldState) -> Result<usize, PolicyError> {
        let i = world.active_truck().ok_or_else(|| PolicyError("no active truck".into()))?;
        let set = world.action_set().ok_or_else(|| PolicyError("no action set".into()))?;
        Ok(heuristic_choice(world.instance(), &world.truck_view(i), set))
    }
}
