//! Heterogeneous state graph and action graph handed to policies.
//!
//! Feature rows (all entries finite, normalised rows in `[0, 1]`):
//!
//! | entity   | row                                                                 |
//! |----------|---------------------------------------------------------------------|
//! | truck    | `[soc, status/5, remaining/K_i, elapsed/T, until_ready/T]`          |
//! | delivery | `[node/N, remaining/K_i of its truck]`                              |
//! | charger  | `[node/N, p_max/max p_max, eta, ports/max ports, busy/ports, queue/n_trucks]` |
//! | action   | `[type code, est battery/capacity, est completion/T (max 2)]`       |
//!
//! Edges connect every ordered pair of entities (trucks, pending deliveries,
//! chargers) and carry `[tau/max_tau, energy/max_energy]` for the directed
//! pair of anchor nodes. A routing truck is anchored at its destination.

use serde::{Deserialize, Serialize};

use crate::actionspace::ActionSet;
use crate::digest::fnv1a64;
use crate::engine::{TruckStatus, WorldState};

pub const TRUCK: u8 = 0;
pub const DELIVERY: u8 = 1;
pub const CHARGER: u8 = 2;

/// `(src_type, src_idx, dst_type, dst_idx, tau_norm, energy_norm)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge(pub u8, pub usize, pub u8, pub usize, pub f64, pub f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateGraph {
    pub truck_feats: Vec<[f64; 5]>,
    /// Lossless status encoding, one column per state-machine status.
    pub truck_status_onehot: Vec<[f64; 6]>,
    pub delivery_feats: Vec<[f64; 2]>,
    /// Owning truck of each pending delivery row.
    pub delivery_truck: Vec<usize>,
    pub charger_feats: Vec<[f64; 6]>,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionGraph {
    pub feats: Vec<[f64; 3]>,
    pub mask: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationGraph {
    pub active_truck: Option<usize>,
    pub state: StateGraph,
    pub actions: ActionGraph,
}

impl ObservationGraph {
    /// FNV-1a over the canonical JSON serialization.
    pub fn digest(&self) -> u64 {
        fnv1a64(&serde_json::to_vec(self).expect("observation serializes"))
    }
}

fn unit(x: f64) -> f64 {
    if x.is_finite() {
        x.clamp(0.0, 1.0)
    } else {
        0.0
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        0.0
    }
}

pub fn encode_state_graph(world: &WorldState) -> StateGraph {
    let inst = world.instance();
    let horizon = inst.config.horizon_t;
    let n_nodes = inst.n_nodes() as f64;
    let now = world.clock();

    let mut truck_feats = Vec::with_capacity(inst.trucks.len());
    let mut onehot = Vec::with_capacity(inst.trucks.len());
    let mut anchors = Vec::new();
    for (i, t) in world.trucks().iter().enumerate() {
        let k = t.spec.deliveries.len() as f64;
        truck_feats.push([
            unit(t.soc()),
            t.status.index() as f64 / 5.0,
            unit(ratio(t.remaining.len() as f64, k)),
            unit((now - t.last_decision_time) / horizon),
            unit((t.next_ready_estimate - now).max(0.0) / horizon),
        ]);
        let mut row = [0.0; 6];
        row[t.status.index()] = 1.0;
        onehot.push(row);
        let anchor = match t.status {
            TruckStatus::Routing => t.dest.unwrap_or(t.node),
            _ => t.node,
        };
        anchors.push((TRUCK, i, anchor));
    }

    let mut delivery_feats = Vec::new();
    let mut delivery_truck = Vec::new();
    for (i, t) in world.trucks().iter().enumerate() {
        let k = t.spec.deliveries.len() as f64;
        for &d in &t.remaining {
            anchors.push((DELIVERY, delivery_feats.len(), d));
            delivery_feats.push([d as f64 / n_nodes, unit(ratio(t.remaining.len() as f64, k))]);
            delivery_truck.push(i);
        }
    }

    let max_p = inst.chargers.iter().map(|c| c.p_max).fold(0.0, f64::max);
    let max_ports = inst.chargers.iter().map(|c| c.ports).max().unwrap_or(1) as f64;
    let n_trucks = inst.trucks.len().max(1) as f64;
    let mut charger_feats = Vec::with_capacity(inst.chargers.len());
    for (s, st) in world.stations().iter().enumerate() {
        let c = &st.spec;
        anchors.push((CHARGER, s, c.node));
        charger_feats.push([
            c.node as f64 / n_nodes,
            unit(ratio(c.p_max, max_p)),
            unit(c.eta),
            unit(ratio(c.ports as f64, max_ports)),
            unit(ratio(st.occupants().len() as f64, c.ports as f64)),
            unit(st.queue().len() as f64 / n_trucks),
        ]);
    }

    let (max_tau, max_e) = (inst.max_tau(), inst.max_energy());
    let mut edges = Vec::with_capacity(anchors.len() * anchors.len().saturating_sub(1));
    for (a, &(ta, ia, na)) in anchors.iter().enumerate() {
        for (b, &(tb, ib, nb)) in anchors.iter().enumerate() {
            if a != b {
                edges.push(Edge(
                    ta,
                    ia,
                    tb,
                    ib,
                    unit(ratio(inst.tau(na, nb), max_tau)),
                    unit(ratio(inst.energy(na, nb), max_e)),
                ));
            }
        }
    }

    StateGraph { truck_feats, truck_status_onehot: onehot, delivery_feats, delivery_truck, charger_feats, edges }
}

/// Action rows for `set`, padded with masked zero rows to `width`.
pub fn encode_action_graph(set: Option<&ActionSet>, world: &WorldState, width: usize) -> ActionGraph {
    let inst = world.instance();
    let horizon = inst.config.horizon_t;
    let mut feats = Vec::with_capacity(width);
    let mut mask = Vec::with_capacity(width);
    if let Some(set) = set {
        let cap = inst.trucks[set.truck].battery_capacity;
        for a in &set.actions {
            let t_norm = ratio(a.est_completion, horizon);
            feats.push([
                a.kind.code(),
                unit(ratio(a.est_battery_after, cap)),
                if t_norm.is_finite() { t_norm.clamp(0.0, 2.0) } else { 0.0 },
            ]);
            mask.push(u8::from(a.feasible));
        }
    }
    while feats.len() < width {
        feats.push([0.0; 3]);
        mask.push(0);
    }
    ActionGraph { feats, mask }
}

/// Full observation at the active truck's decision point.
pub fn encode(world: &WorldState) -> ObservationGraph {
    ObservationGraph {
        active_truck: world.active_truck(),
        state: encode_state_graph(world),
        actions: encode_action_graph(world.action_set(), world, world.instance().max_fixed_action_size()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actionspace::ActionKind;
    use crate::netmodel::fixtures::{self, t1_nodes::*};
    use std::sync::Arc;

    #[test]
    fn fresh_fixture_features() {
        let w = WorldState::reset(Arc::new(fixtures::t1_deterministic()), 0);
        let obs = encode(&w);
        let row = obs.state.truck_feats[0];
        assert_eq!(row[0], 1.0);
        assert_eq!(row[2], 1.0);
        assert_eq!(row[3], 0.0);
        assert_eq!(obs.state.delivery_feats.len(), 2);
        // M = 1 truck + 2 deliveries + 1 charger
        assert_eq!(obs.state.edges.len(), 4 * 3);
        assert_eq!(obs.actions.feats.len(), 15);
        assert_eq!(obs.actions.mask, vec![1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn delivered_nodes_are_omitted() {
        let mut w = WorldState::reset(Arc::new(fixtures::t1_deterministic()), 0);
        w.step(1).unwrap();
        let obs = encode(&w);
        assert_eq!(obs.state.delivery_feats.len(), 1);
        assert_eq!(obs.state.delivery_feats[0][0], D2 as f64 / 4.0);
        assert_eq!(obs.state.edges.len(), 3 * 2);
    }

    #[test]
    fn edges_are_directional() {
        let w = WorldState::reset(Arc::new(fixtures::t1_deterministic()), 0);
        let obs = encode(&w);
        let find = |st, si, dt, di| obs.state.edges.iter().find(|e| (e.0, e.1, e.2, e.3) == (st, si, dt, di)).unwrap();
        // truck at A; delivery rows 0 = D1, 1 = D2
        let fwd = find(TRUCK, 0, DELIVERY, 1);
        let back = find(DELIVERY, 1, TRUCK, 0);
        assert_eq!(fwd.4, 2.0 / 2.2);
        assert_eq!(back.4, 1.0);
    }

    #[test]
    fn charge_slot_features_at_station() {
        let mut inst = fixtures::t1_deterministic();
        inst.trucks[0].start_node = C1;
        inst.trucks[0].initial_battery = 200.0;
        let w = WorldState::reset(Arc::new(inst), 0);
        let obs = encode(&w);
        let slot = w.action_set().unwrap().actions.iter().position(|a| a.kind == ActionKind::Charge).unwrap();
        let b = obs.actions.feats[slot][1];
        assert!((b - 0.606).abs() < 0.002, "{b}");
        assert_eq!(obs.actions.feats[slot][0], 1.0);
        assert_eq!(obs.actions.feats[slot][2], 1.0 / 48.0);
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let w = WorldState::reset(Arc::new(fixtures::t1()), 4);
        let a = encode(&w);
        assert_eq!(a.digest(), encode(&w).digest());
        for k in 0..a.actions.mask.len() {
            let mut b = a.clone();
            b.actions.mask[k] ^= 1;
            assert_ne!(a.digest(), b.digest());
        }
    }

    #[test]
    fn all_features_finite_and_bounded() {
        let mut inst = fixtures::t1();
        inst.trucks[0].initial_battery = 1.0;
        let w = WorldState::reset(Arc::new(inst), 0);
        let obs = encode(&w);
        for r in &obs.state.truck_feats {
            assert!(r.iter().all(|x| (0.0..=1.0).contains(x)));
        }
        for r in &obs.actions.feats {
            assert!(r[1] >= 0.0 && r[1] <= 1.0 && r[2] >= 0.0 && r[2] <= 2.0);
        }
    }
}
