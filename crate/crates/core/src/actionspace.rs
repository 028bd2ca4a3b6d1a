//! State-dependent feasible action sets over a fixed-size enumeration.
//!
//! Slot layout for truck `i`: one navigation slot per station (station id
//! order), one navigation slot per assigned delivery (assignment order), one
//! charge slot per admissible duration (ascending). The layout is fixed per
//! truck; the mask varies with state.

use serde::{Deserialize, Serialize};

use crate::charging::integrate_charge;
use crate::netmodel::{DeliveryMode, NetworkInstance, TruckSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    NavigateDelivery,
    NavigateCharger,
    Charge,
}

impl ActionKind {
    /// Scalar type code used in action features.
    pub fn code(self) -> f64 {
        match self {
            ActionKind::NavigateDelivery => 0.0,
            ActionKind::NavigateCharger => 0.5,
            ActionKind::Charge => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionDescriptor {
    pub index: usize,
    pub kind: ActionKind,
    /// Node id for navigation; station id for charging (absent when the
    /// truck is not at a station).
    pub target: Option<usize>,
    /// Hours, charge slots only.
    pub duration: Option<f64>,
    pub feasible: bool,
    /// Estimated battery after the action under nominal dynamics, kWh.
    pub est_battery_after: f64,
    /// Estimated completion time, absolute hours.
    pub est_completion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSet {
    pub truck: usize,
    pub actions: Vec<ActionDescriptor>,
}

impl ActionSet {
    pub fn fixed_size(&self) -> usize {
        self.actions.len()
    }

    pub fn mask(&self) -> Vec<bool> {
        self.actions.iter().map(|a| a.feasible).collect()
    }

    pub fn feasible_indices(&self) -> Vec<usize> {
        self.actions.iter().filter(|a| a.feasible).map(|a| a.index).collect()
    }

    pub fn any_feasible(&self) -> bool {
        self.actions.iter().any(|a| a.feasible)
    }
}

/// The parts of a truck's state the action space depends on.
#[derive(Debug, Clone, Copy)]
pub struct TruckView<'a> {
    pub spec: &'a TruckSpec,
    pub node: usize,
    pub battery: f64,
    /// Pending deliveries in assignment order.
    pub remaining: &'a [usize],
    pub now: f64,
}

/// Next delivery in sequential mode; nearest remaining delivery (nominal
/// time, ties by node id) in flexible mode.
pub fn reference_delivery(inst: &NetworkInstance, view: &TruckView) -> Option<usize> {
    match view.spec.mode {
        DeliveryMode::Sequential => view.remaining.first().copied(),
        DeliveryMode::Flexible => view
            .remaining
            .iter()
            .copied()
            .min_by(|&a, &b| inst.tau(view.node, a).total_cmp(&inst.tau(view.node, b)).then(a.cmp(&b))),
    }
}

/// Incremental nominal travel time of visiting `station` on the way to the
/// reference delivery.
pub fn charger_detour(inst: &NetworkInstance, view: &TruckView, station: usize) -> Option<f64> {
    let d = reference_delivery(inst, view)?;
    let (n, c) = (view.node, inst.chargers[station].node);
    Some(inst.tau(n, c) + inst.tau(c, d) - inst.tau(n, d))
}

/// The `k` stations with the smallest detour, ties by station id.
pub fn candidate_chargers(inst: &NetworkInstance, view: &TruckView, k: usize) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> =
        (0..inst.chargers.len()).filter_map(|s| charger_detour(inst, view, s).map(|d| (d, s))).collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    scored.into_iter().take(k).map(|(_, s)| s).collect()
}

/// Strict energy headroom for the leg from the truck's node to `to`.
pub fn headroom_ok(inst: &NetworkInstance, view: &TruckView, to: usize) -> bool {
    inst.config.alpha * inst.energy(view.node, to) < view.battery - view.spec.battery_floor
}

/// Nominal `(battery, completion time)` after an action. `target` is a node
/// for navigation and a station for charging.
pub fn estimate_post_state(
    inst: &NetworkInstance,
    view: &TruckView,
    kind: ActionKind,
    target: Option<usize>,
    duration: Option<f64>,
) -> (f64, f64) {
    match kind {
        ActionKind::NavigateDelivery | ActionKind::NavigateCharger => {
            let v = target.expect("navigation has a target");
            (view.battery - inst.energy(view.node, v), view.now + inst.tau(view.node, v))
        }
        ActionKind::Charge => {
            let h = duration.expect("charge has a duration");
            let b = match target {
                Some(s) => {
                    let c = &inst.chargers[s];
                    integrate_charge(
                        view.battery,
                        view.spec.battery_capacity,
                        h,
                        c.eta,
                        c.p_max,
                        c.p_min,
                        inst.config.charge_dt,
                    )
                    .battery_after
                }
                None => view.battery,
            };
            (b, view.now + h)
        }
    }
}

/// Full fixed-size action set with feasibility flags. `port_free(s)` reports
/// whether station `s` has an idle port; it only matters when
/// `mask_full_stations` is set.
pub fn build_action_set(inst: &NetworkInstance, view: &TruckView, port_free: impl Fn(usize) -> bool) -> ActionSet {
    let cfg = &inst.config;
    let spec = view.spec;
    let mut actions = Vec::with_capacity(inst.chargers.len() + spec.deliveries.len() + cfg.duration_set.len());
    let candidates = candidate_chargers(inst, view, cfg.k_chg);

    for (s, c) in inst.chargers.iter().enumerate() {
        let feasible = candidates.contains(&s) && c.node != view.node && headroom_ok(inst, view, c.node);
        let (b, t) = estimate_post_state(inst, view, ActionKind::NavigateCharger, Some(c.node), None);
        actions.push(ActionDescriptor {
            index: actions.len(),
            kind: ActionKind::NavigateCharger,
            target: Some(c.node),
            duration: None,
            feasible,
            est_battery_after: b,
            est_completion: t,
        });
    }

    for &d in &spec.deliveries {
        let pending = view.remaining.contains(&d);
        let allowed = match spec.mode {
            DeliveryMode::Sequential => view.remaining.first() == Some(&d),
            DeliveryMode::Flexible => pending,
        };
        let feasible = allowed && headroom_ok(inst, view, d);
        let (b, t) = estimate_post_state(inst, view, ActionKind::NavigateDelivery, Some(d), None);
        actions.push(ActionDescriptor {
            index: actions.len(),
            kind: ActionKind::NavigateDelivery,
            target: Some(d),
            duration: None,
            feasible,
            est_battery_after: b,
            est_completion: t,
        });
    }

    let station = inst.station_at(view.node);
    let charge_ok = station.is_some_and(|s| !cfg.mask_full_stations || port_free(s));
    for &h in &cfg.duration_set {
        let (b, t) = estimate_post_state(inst, view, ActionKind::Charge, station, Some(h));
        actions.push(ActionDescriptor {
            index: actions.len(),
            kind: ActionKind::Charge,
            target: station,
            duration: Some(h),
            feasible: charge_ok,
            est_battery_after: b,
            est_completion: t,
        });
    }
    ActionSet { truck: spec.id, actions }
}
