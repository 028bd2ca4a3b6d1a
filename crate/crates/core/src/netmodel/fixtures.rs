//! Small hand-built instances used by tests, docs and the CLI.

use super::{ChargerSpec, DeliveryMode, InstanceMeta, NetworkInstance, NodeKind, PoiNode, ScenarioConfig, TruckSpec};

/// Node ids of [`t1`].
pub mod t1_nodes {
    pub const A: usize = 0;
    pub const D1: usize = 1;
    pub const D2: usize = 2;
    pub const C1: usize = 3;
}

/// Four-node fixture: depot A, deliveries D1 and D2, one single-port
/// charger C1, one 400 kWh truck serving [D1, D2] in order.
///
/// Energy is 40 kWh per nominal hour on every leg. Default scenario
/// configuration (stochastic); use [`t1_deterministic`] for nominal runs.
pub fn t1() -> NetworkInstance {
    let tau =
        vec![vec![0.0, 1.0, 2.0, 0.5], vec![1.2, 0.0, 1.0, 0.6], vec![2.2, 1.1, 0.0, 1.5], vec![0.5, 0.5, 1.4, 0.0]];
    let energy = tau.iter().map(|row| row.iter().map(|t| 40.0 * t).collect()).collect();
    let kinds = [NodeKind::Depot, NodeKind::Delivery, NodeKind::Delivery, NodeKind::Charger];
    let coords = [(0.0, 0.0), (40.0, 0.0), (80.0, 0.0), (20.0, 10.0)];
    NetworkInstance {
        meta: InstanceMeta { name: "T1".into(), seed: None },
        nodes: kinds.iter().zip(coords).enumerate().map(|(id, (&kind, (x, y)))| PoiNode { id, kind, x, y }).collect(),
        tau,
        energy,
        chargers: vec![ChargerSpec { node: t1_nodes::C1, p_max: 50.0, p_min: 5.0, eta: 0.85, ports: 1 }],
        trucks: vec![TruckSpec {
            id: 0,
            start_node: t1_nodes::A,
            battery_capacity: 400.0,
            initial_battery: 400.0,
            battery_floor: 0.0,
            deliveries: vec![t1_nodes::D1, t1_nodes::D2],
            mode: DeliveryMode::Sequential,
        }],
        config: ScenarioConfig::default(),
    }
}

/// [`t1`] with every sampler switched to nominal values.
pub fn t1_deterministic() -> NetworkInstance {
    let mut inst = t1();
    inst.config = ScenarioConfig::deterministic();
    inst
}
