//! Problem instances: POI nodes, asymmetric nominal cost matrices, charger
//! and truck specifications, and the scenario configuration.

mod feasibility;
pub mod fixtures;
mod generator;
mod io;
mod roads;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::fnv1a64;
use crate::engine::RewardParams;
use crate::stochastic::{StochasticParams, UnloadingModel};

pub use feasibility::{validate_assignment, FeasibilityReport};
pub use generator::{build_matrices, generate_instance, GeneratorParams};
pub use io::{load_instance, load_instance_file, round_sig9, save_instance, FORMAT_TAG};
pub use roads::{matrices_from_road_graph, RoadEdge, RoadGraph};

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("unsupported instance format `{0}`")]
    Format(String),
    #[error("invalid instance: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("instance generation infeasible: {0}")]
    GenerationInfeasible(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Plain,
    Delivery,
    Charger,
    Depot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoiNode {
    pub id: usize,
    pub kind: NodeKind,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargerSpec {
    pub node: usize,
    pub p_max: f64,
    pub p_min: f64,
    pub eta: f64,
    pub ports: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeliveryMode {
    /// Deliveries must be served in the assigned order.
    Sequential,
    /// Any remaining delivery may be served next.
    Flexible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruckSpec {
    pub id: usize,
    pub start_node: usize,
    pub battery_capacity: f64,
    pub initial_battery: f64,
    pub battery_floor: f64,
    pub deliveries: Vec<usize>,
    pub mode: DeliveryMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Safety multiplier applied to nominal leg energy in the headroom check.
    pub alpha: f64,
    /// Admissible charge durations in hours, strictly increasing.
    pub duration_set: Vec<f64>,
    /// Charging integration step in hours.
    pub charge_dt: f64,
    /// Normalisation horizon for time features, hours.
    pub horizon_t: f64,
    pub stochastic: StochasticParams,
    pub reward: RewardParams,
    /// Number of detour-screened charger candidates.
    pub k_chg: usize,
    /// Mask charge actions when every port at the station is busy.
    #[serde(default)]
    pub mask_full_stations: bool,
    /// Acknowledges `alpha` below the upper energy clip bound.
    #[serde(default)]
    pub allow_stranding_risk: bool,
    /// Trucks exceeding this many decisions are terminated as failures.
    #[serde(default = "default_decision_limit")]
    pub max_decisions_per_truck: u32,
}

fn default_decision_limit() -> u32 {
    256
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            alpha: 1.2,
            duration_set: (1..=12).map(f64::from).collect(),
            charge_dt: 0.01,
            horizon_t: 48.0,
            stochastic: StochasticParams::default(),
            reward: RewardParams::default(),
            k_chg: 5,
            mask_full_stations: false,
            allow_stranding_risk: false,
            max_decisions_per_truck: default_decision_limit(),
        }
    }
}

impl ScenarioConfig {
    pub fn deterministic() -> Self {
        Self { stochastic: StochasticParams::deterministic(), ..Self::default() }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.alpha >= 1.0) {
            out.push("config.alpha must be >= 1".into());
        }
        if self.alpha < self.stochastic.energy_clip.1 && !self.allow_stranding_risk {
            out.push(format!(
                "config.alpha {} is below the energy clip bound {}; set allow_stranding_risk to accept stranding",
                self.alpha, self.stochastic.energy_clip.1
            ));
        }
        if self.duration_set.is_empty()
            || self.duration_set[0] <= 0.0
            || self.duration_set.windows(2).any(|w| w[1] <= w[0])
        {
            out.push("config.duration_set must be non-empty, positive and strictly increasing".into());
        }
        if !(self.charge_dt > 0.0) {
            out.push("config.charge_dt must be > 0".into());
        }
        if !(self.horizon_t > 0.0) {
            out.push("config.horizon_t must be > 0".into());
        }
        if self.k_chg == 0 {
            out.push("config.k_chg must be >= 1".into());
        }
        if self.max_decisions_per_truck == 0 {
            out.push("config.max_decisions_per_truck must be >= 1".into());
        }
        out.extend(self.stochastic.violations());
        out.extend(self.reward.violations());
        out
    }

    /// Unloading time assumed by nominal planning.
    pub fn nominal_unloading(&self) -> f64 {
        self.stochastic.unloading.nominal()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Immutable problem description shared by every episode run on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkInstance {
    pub meta: InstanceMeta,
    pub nodes: Vec<PoiNode>,
    /// Nominal travel time in hours, `tau[from][to]`.
    pub tau: Vec<Vec<f64>>,
    /// Nominal traversal energy in kWh, `energy[from][to]`.
    pub energy: Vec<Vec<f64>>,
    pub chargers: Vec<ChargerSpec>,
    pub trucks: Vec<TruckSpec>,
    pub config: ScenarioConfig,
}

impl NetworkInstance {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn tau(&self, from: usize, to: usize) -> f64 {
        self.tau[from][to]
    }

    #[inline]
    pub fn energy(&self, from: usize, to: usize) -> f64 {
        self.energy[from][to]
    }

    /// Station index located at `node`, if any.
    pub fn station_at(&self, node: usize) -> Option<usize> {
        self.chargers.iter().position(|c| c.node == node)
    }

    /// Fixed action-set size for a truck: chargers + its deliveries + durations.
    pub fn fixed_action_size(&self, truck: usize) -> usize {
        self.chargers.len() + self.trucks[truck].deliveries.len() + self.config.duration_set.len()
    }

    pub fn max_fixed_action_size(&self) -> usize {
        (0..self.trucks.len()).map(|i| self.fixed_action_size(i)).max().unwrap_or(0)
    }

    pub fn max_tau(&self) -> f64 {
        self.tau.iter().flatten().copied().fold(0.0, f64::max)
    }

    pub fn max_energy(&self) -> f64 {
        self.energy.iter().flatten().copied().fold(0.0, f64::max)
    }

    /// Stable fingerprint of the canonical document.
    pub fn digest(&self) -> u64 {
        fnv1a64(save_instance(self).as_bytes())
    }

    /// Copy with every real-valued field rounded to nine significant digits,
    /// the precision of the instance document.
    pub fn canonicalized(&self) -> Self {
        let mut out = self.clone();
        for n in &mut out.nodes {
            n.x = round_sig9(n.x);
            n.y = round_sig9(n.y);
        }
        for row in out.tau.iter_mut().chain(out.energy.iter_mut()) {
            for v in row.iter_mut() {
                *v = round_sig9(*v);
            }
        }
        for c in &mut out.chargers {
            c.p_max = round_sig9(c.p_max);
            c.p_min = round_sig9(c.p_min);
            c.eta = round_sig9(c.eta);
        }
        for t in &mut out.trucks {
            t.battery_capacity = round_sig9(t.battery_capacity);
            t.initial_battery = round_sig9(t.initial_battery);
            t.battery_floor = round_sig9(t.battery_floor);
        }
        let cfg = &mut out.config;
        cfg.alpha = round_sig9(cfg.alpha);
        cfg.charge_dt = round_sig9(cfg.charge_dt);
        cfg.horizon_t = round_sig9(cfg.horizon_t);
        cfg.duration_set.iter_mut().for_each(|h| *h = round_sig9(*h));
        let s = &mut cfg.stochastic;
        s.travel_std_factor = round_sig9(s.travel_std_factor);
        s.rush_multiplier = round_sig9(s.rush_multiplier);
        for w in &mut s.rush_windows {
            *w = (round_sig9(w.0), round_sig9(w.1));
        }
        s.travel_clip = (round_sig9(s.travel_clip.0), round_sig9(s.travel_clip.1));
        s.energy_clip = (round_sig9(s.energy_clip.0), round_sig9(s.energy_clip.1));
        s.energy_noise_std = round_sig9(s.energy_noise_std);
        s.unloading = match s.unloading {
            UnloadingModel::Fixed { hours } => UnloadingModel::Fixed { hours: round_sig9(hours) },
            UnloadingModel::Gaussian { mean, std, clip } => UnloadingModel::Gaussian {
                mean: round_sig9(mean),
                std: round_sig9(std),
                clip: (round_sig9(clip.0), round_sig9(clip.1)),
            },
        };
        let r = &mut cfg.reward;
        r.lambda1 = round_sig9(r.lambda1);
        r.lambda2 = round_sig9(r.lambda2);
        r.lambda3 = round_sig9(r.lambda3);
        out
    }

    /// Checks every structural invariant and returns all failures at once.
    pub fn validate(&self) -> Result<(), InstanceError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(InstanceError::Validation(v))
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let n = self.nodes.len();
        if n == 0 {
            out.push("instance has no nodes".into());
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if node.id != i {
                out.push(format!("nodes[{i}].id is {} but ids must be dense 0..N-1", node.id));
            }
        }
        for (name, m) in [("tau", &self.tau), ("energy", &self.energy)] {
            if m.len() != n || m.iter().any(|row| row.len() != n) {
                out.push(format!("{name} must be a {n}x{n} matrix"));
                continue;
            }
            for (u, row) in m.iter().enumerate() {
                for (v, &x) in row.iter().enumerate() {
                    if !x.is_finite() {
                        out.push(format!("{name}[{u}][{v}] is not finite"));
                    } else if x < 0.0 {
                        out.push(format!("{name}[{u}][{v}] = {x}: negative cost"));
                    } else if u == v && x != 0.0 {
                        out.push(format!("{name}[{u}][{u}] must be 0"));
                    }
                }
            }
        }
        let node_ok = |id: usize| id < n;
        let mut seen_charger_nodes = std::collections::BTreeSet::new();
        for (k, c) in self.chargers.iter().enumerate() {
            if !node_ok(c.node) {
                out.push(format!("chargers[{k}].node {} is not a valid node", c.node));
            } else if self.nodes[c.node].kind != NodeKind::Charger {
                out.push(format!("chargers[{k}].node {} is not a charger node", c.node));
            }
            if !seen_charger_nodes.insert(c.node) {
                out.push(format!("chargers[{k}].node {} hosts more than one station", c.node));
            }
            if !(c.p_min > 0.0 && c.p_min <= c.p_max) {
                out.push(format!("chargers[{k}] must satisfy 0 < p_min <= p_max"));
            }
            if !(c.eta > 0.0 && c.eta <= 1.0) {
                out.push(format!("chargers[{k}].eta must be in (0, 1]"));
            }
            if c.ports == 0 {
                out.push(format!("chargers[{k}].ports must be >= 1"));
            }
        }
        for (k, t) in self.trucks.iter().enumerate() {
            if t.id != k {
                out.push(format!("trucks[{k}].id is {} but ids must be dense 0..I-1", t.id));
            }
            if !node_ok(t.start_node) {
                out.push(format!("trucks[{k}].start_node {} is not a valid node", t.start_node));
            }
            if !(0.0 <= t.battery_floor
                && t.battery_floor < t.initial_battery
                && t.initial_battery <= t.battery_capacity)
            {
                out.push(format!("trucks[{k}] must satisfy 0 <= battery_floor < initial_battery <= battery_capacity"));
            }
            if t.deliveries.is_empty() {
                out.push(format!("trucks[{k}].deliveries must be non-empty"));
            }
            if t.deliveries.len() > 64 {
                out.push(format!("trucks[{k}] has more than 64 deliveries"));
            }
            let mut seen = std::collections::BTreeSet::new();
            for &d in &t.deliveries {
                if !seen.insert(d) {
                    out.push(format!("trucks[{k}].deliveries contains {d} twice"));
                }
                if !node_ok(d) {
                    out.push(format!("trucks[{k}].deliveries references invalid node {d}"));
                } else if self.nodes[d].kind != NodeKind::Delivery {
                    out.push(format!("trucks[{k}].deliveries references non-delivery node {d}"));
                }
            }
        }
        out.extend(self.config.violations());
        out
    }
}
