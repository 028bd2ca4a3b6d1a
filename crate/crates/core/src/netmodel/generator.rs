use serde::{Deserialize, Serialize};

use super::{
    validate_assignment, ChargerSpec, DeliveryMode, InstanceError, InstanceMeta, NetworkInstance, NodeKind, PoiNode,
    ScenarioConfig, TruckSpec,
};
use crate::stochastic::{RandomStreams, StreamId, StreamKind};

const GEN: StreamId = StreamId::new(StreamKind::Generator, 0);

/// Synthetic instance generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub n_nodes: usize,
    pub n_chargers: usize,
    pub n_trucks: usize,
    pub stops_per_truck: usize,
    /// Side of the square sampling area, km.
    pub area_km: f64,
    pub speed_kmh: f64,
    pub kwh_per_km: f64,
    /// Upper bound of the per-arc multiplicative jitter `j_uv ~ U[0, jitter]`.
    pub asymmetry_jitter: f64,
    /// Inclusive range of port counts per station.
    pub port_range: (u32, u32),
    pub battery_kwh: f64,
    pub p_max: f64,
    pub p_min: f64,
    pub eta: f64,
    pub mode: DeliveryMode,
    /// Resampling attempts per truck before giving up.
    pub retry_budget: usize,
    pub config: ScenarioConfig,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            n_nodes: 40,
            n_chargers: 5,
            n_trucks: 5,
            stops_per_truck: 3,
            area_km: 160.0,
            speed_kmh: 40.0,
            kwh_per_km: 1.2,
            asymmetry_jitter: 0.1,
            port_range: (1, 3),
            battery_kwh: 400.0,
            p_max: 50.0,
            p_min: 5.0,
            eta: 0.85,
            mode: DeliveryMode::Sequential,
            retry_budget: 200,
            config: ScenarioConfig::default(),
        }
    }
}

/// Nominal time and energy matrices from planar points.
///
/// `tau[u][v] = d(u,v) / speed * (1 + j_uv)` and
/// `energy[u][v] = d(u,v) * kwh_per_km * (1 + j_uv)`, one jitter per ordered
/// pair drawn from `U[0, jitter]` in row-major order. Values are rounded to
/// the document precision.
pub fn build_matrices(
    points: &[(f64, f64)],
    speed_kmh: f64,
    kwh_per_km: f64,
    jitter: f64,
    streams: &mut RandomStreams,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = points.len();
    let mut tau = vec![vec![0.0; n]; n];
    let mut energy = vec![vec![0.0; n]; n];
    for u in 0..n {
        for v in 0..n {
            if u == v {
                continue;
            }
            let j = if jitter > 0.0 { jitter * streams.uniform(GEN) } else { 0.0 };
            let (dx, dy) = (points[u].0 - points[v].0, points[u].1 - points[v].1);
            let d = dx.hypot(dy);
            tau[u][v] = super::round_sig9(d / speed_kmh * (1.0 + j));
            energy[u][v] = super::round_sig9(d * kwh_per_km * (1.0 + j));
        }
    }
    (tau, energy)
}

/// Draws `k` distinct items from `pool` (partial Fisher-Yates).
fn sample_distinct(pool: &[usize], k: usize, streams: &mut RandomStreams) -> Vec<usize> {
    let mut p = pool.to_vec();
    for i in 0..k {
        let j = i + streams.below(GEN, p.len() - i);
        p.swap(i, j);
    }
    p.truncate(k);
    p
}

/// Builds a random instance whose every truck passes
/// [`validate_assignment`]. Pure in `(params, seed)`.
pub fn generate_instance(params: &GeneratorParams, seed: u64) -> Result<NetworkInstance, InstanceError> {
    let p = params;
    if p.n_nodes < p.n_chargers + p.stops_per_truck + 1 {
        return Err(InstanceError::GenerationInfeasible(format!(
            "need n_nodes >= n_chargers + stops_per_truck + 1 ({} < {})",
            p.n_nodes,
            p.n_chargers + p.stops_per_truck + 1
        )));
    }
    if p.stops_per_truck == 0 || p.port_range.0 == 0 || p.port_range.0 > p.port_range.1 {
        return Err(InstanceError::GenerationInfeasible(
            "stops_per_truck and port_range must be positive and ordered".into(),
        ));
    }
    let mut rng = RandomStreams::new(seed);
    let points: Vec<(f64, f64)> = (0..p.n_nodes)
        .map(|_| {
            let x = p.area_km * rng.uniform(GEN);
            let y = p.area_km * rng.uniform(GEN);
            (super::round_sig9(x), super::round_sig9(y))
        })
        .collect();
    let (tau, energy) = build_matrices(&points, p.speed_kmh, p.kwh_per_km, p.asymmetry_jitter, &mut rng);

    let nodes: Vec<PoiNode> = points
        .iter()
        .enumerate()
        .map(|(id, &(x, y))| PoiNode {
            id,
            kind: if id < p.n_chargers { NodeKind::Charger } else { NodeKind::Delivery },
            x,
            y,
        })
        .collect();
    let port_span = (p.port_range.1 - p.port_range.0 + 1) as usize;
    let chargers: Vec<ChargerSpec> = (0..p.n_chargers)
        .map(|node| ChargerSpec {
            node,
            p_max: p.p_max,
            p_min: p.p_min,
            eta: p.eta,
            ports: p.port_range.0 + rng.below(GEN, port_span) as u32,
        })
        .collect();

    let mut inst = NetworkInstance {
        meta: InstanceMeta { name: format!("gen-{}t{}s-{seed}", p.n_trucks, p.stops_per_truck), seed: Some(seed) },
        nodes,
        tau,
        energy,
        chargers,
        trucks: Vec::with_capacity(p.n_trucks),
        config: p.config.clone(),
    }
    .canonicalized();

    let candidates: Vec<usize> = (p.n_chargers..p.n_nodes).collect();
    for id in 0..p.n_trucks {
        let mut accepted = None;
        for _ in 0..p.retry_budget.max(1) {
            let origin = candidates[rng.below(GEN, candidates.len())];
            let pool: Vec<usize> = candidates.iter().copied().filter(|&c| c != origin).collect();
            let deliveries = sample_distinct(&pool, p.stops_per_truck, &mut rng);
            let truck = TruckSpec {
                id,
                start_node: origin,
                battery_capacity: p.battery_kwh,
                initial_battery: p.battery_kwh,
                battery_floor: 0.0,
                deliveries,
                mode: p.mode,
            };
            if validate_assignment(&inst, &truck).feasible {
                accepted = Some(truck);
                break;
            }
        }
        match accepted {
            Some(t) => inst.trucks.push(t),
            None => {
                return Err(InstanceError::GenerationInfeasible(format!(
                    "truck {id}: no feasible assignment within {} attempts",
                    p.retry_budget
                )))
            }
        }
    }
    let inst = inst.canonicalized();
    inst.validate()?;
    Ok(inst)
}
