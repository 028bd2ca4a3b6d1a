//! Workloads shared by the simulator benchmarks.

use std::sync::Arc;

use etfrp_core::netmodel::{generate_instance, GeneratorParams};
use etfrp_core::NetworkInstance;

/// A contended fleet: more trucks than ports, several stops each.
pub fn fleet_instance(trucks: usize, seed: u64) -> Arc<NetworkInstance> {
    let params = GeneratorParams { n_trucks: trucks, stops_per_truck: 3, ..GeneratorParams::default() };
    Arc::new(generate_instance(&params, seed).expect("benchmark instance generates"))
}

/// Single-truck instance sized for the exact search.
pub fn search_instance(stops: usize, seed: u64) -> NetworkInstance {
    let params = GeneratorParams {
        n_nodes: 12,
        n_chargers: 3,
        n_trucks: 1,
        stops_per_truck: stops,
        area_km: 150.0,
        battery_kwh: 200.0,
        ..GeneratorParams::default()
    };
    generate_instance(&params, seed).expect("benchmark instance generates")
}
