//! Event-driven SMDP core: event queue, per-truck state machine, step
//! semantics, reward and metric accounting.
//!
//! Rewards are settled per truck. Whenever a truck is handed a decision, or
//! terminates, it settles `-lambda1 * (now - its previous decision time)`
//! plus `lambda2` per delivery completed in between, plus `lambda3` when it
//! terminated as a failure. A [`StepResult`] carries the sum of settlements
//! made while that step advanced the simulation, so the episode return is
//! `-lambda1 * total_time + lambda2 * deliveries + lambda3 * failures`.

mod episode;
mod world;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use episode::{run_episode, EpisodeError, EpisodeFailure, EpisodeOutcome, Policy, PolicyError};
pub use world::{TruckRuntime, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    /// Cost per elapsed hour.
    pub lambda1: f64,
    /// Bonus per completed delivery.
    pub lambda2: f64,
    /// Failure penalty (negative).
    pub lambda3: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self { lambda1: 1.0, lambda2: 500.0, lambda3: -1000.0 }
    }
}

impl RewardParams {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.lambda1 > 0.0) {
            out.push("reward.lambda1 must be > 0".into());
        }
        if !(self.lambda2 > 0.0) {
            out.push("reward.lambda2 must be > 0".into());
        }
        if !(self.lambda3 < 0.0) {
            out.push("reward.lambda3 must be < 0".into());
        }
        out
    }
}

/// `-lambda1 * delta_t + lambda2 * delivered + lambda3 * [failed]`.
pub fn compute_reward(delta_t: f64, delivered: u32, failed: bool, params: &RewardParams) -> f64 {
    let mut r = -params.lambda1 * delta_t + params.lambda2 * f64::from(delivered);
    if failed {
        r += params.lambda3;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruckStatus {
    ActionPending,
    Routing,
    WaitingOnChargerQueue,
    Charging,
    Unloading,
    Terminated,
}

impl TruckStatus {
    pub const ALL: [TruckStatus; 6] = [
        TruckStatus::ActionPending,
        TruckStatus::Routing,
        TruckStatus::WaitingOnChargerQueue,
        TruckStatus::Charging,
        TruckStatus::Unloading,
        TruckStatus::Terminated,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&s| s == self).expect("listed")
    }

    /// Edges of the operational state machine.
    pub fn can_transition(self, to: TruckStatus) -> bool {
        use TruckStatus::*;
        if to == Terminated {
            return self != Terminated;
        }
        matches!(
            (self, to),
            (ActionPending, Routing)
                | (ActionPending, Charging)
                | (ActionPending, WaitingOnChargerQueue)
                | (Routing, ActionPending)
                | (Routing, Unloading)
                | (WaitingOnChargerQueue, Charging)
                | (Charging, ActionPending)
                | (Unloading, ActionPending)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Success,
    /// Battery ran out mid-edge, or no feasible action existed at a decision.
    Stranded,
    InfeasibleAction,
    /// The per-truck decision budget was exhausted.
    DecisionLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Arrival,
    ChargeSessionEnd,
    UnloadingEnd,
    AdmittedFromQueue,
    DecisionRequired,
    /// Battery exhausted before reaching the destination.
    Depleted,
}

/// Scheduled event. Ordered by `(time, seq)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub seq: u64,
    pub kind: EventKind,
    pub truck: usize,
}

impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.time.total_cmp(&other.time).then(self.seq.cmp(&other.seq))
    }
}

/// Per-truck time and energy decomposition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TruckCounters {
    pub routing_h: f64,
    pub charging_h: f64,
    pub waiting_h: f64,
    pub unloading_h: f64,
    pub sessions: u32,
    pub deliveries: u32,
    pub energy_added: f64,
    pub energy_used: f64,
}

impl TruckCounters {
    pub fn total_h(&self) -> f64 {
        self.routing_h + self.charging_h + self.waiting_h + self.unloading_h
    }
}

/// One event handled while a step advanced the clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepEvent {
    pub t: f64,
    pub kind: EventKind,
    pub truck: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub reward: f64,
    pub done: bool,
    pub active_truck: Option<usize>,
    /// Hours since the next active truck's previous decision.
    pub elapsed: f64,
    pub info: Vec<StepEvent>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub reward_total: f64,
    pub success: bool,
    pub deliveries_completed: u32,
    pub charging_sessions: u32,
    pub charging_time_h: f64,
    pub waiting_time_h: f64,
    pub routing_time_h: f64,
    pub unloading_time_h: f64,
    pub total_time_h: f64,
    pub avg_finish_soc: f64,
    pub wall_clock_s: f64,
    pub trucks_succeeded: u32,
    pub strandings_mid_edge: u32,
    pub strandings_dead_end: u32,
    pub infeasible_actions: u32,
    pub decision_limit_hits: u32,
    pub decisions: u32,
}

impl EpisodeMetrics {
    /// Numeric view of every field, in declaration order.
    pub fn fields(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("reward_total", self.reward_total),
            ("success", f64::from(u8::from(self.success))),
            ("deliveries_completed", f64::from(self.deliveries_completed)),
            ("charging_sessions", f64::from(self.charging_sessions)),
            ("charging_time_h", self.charging_time_h),
            ("waiting_time_h", self.waiting_time_h),
            ("routing_time_h", self.routing_time_h),
            ("unloading_time_h", self.unloading_time_h),
            ("total_time_h", self.total_time_h),
            ("avg_finish_soc", self.avg_finish_soc),
            ("wall_clock_s", self.wall_clock_s),
            ("trucks_succeeded", f64::from(self.trucks_succeeded)),
            ("strandings_mid_edge", f64::from(self.strandings_mid_edge)),
            ("strandings_dead_end", f64::from(self.strandings_dead_end)),
            ("infeasible_actions", f64::from(self.infeasible_actions)),
            ("decision_limit_hits", f64::from(self.decision_limit_hits)),
            ("decisions", f64::from(self.decisions)),
        ]
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("action index {action} is out of range for an action set of size {size}")]
    ActionOutOfRange { action: usize, size: usize },
    #[error("the episode has already finished")]
    EpisodeFinished,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reward_formula() {
        let p = RewardParams::default();
        assert_eq!(compute_reward(2.0, 1, false, &p), 498.0);
        assert_eq!(compute_reward(0.0, 0, false, &p), 0.0);
        assert_eq!(compute_reward(3.0, 0, true, &p), -1003.0);
    }

    #[test]
    fn reward_param_signs() {
        assert!(RewardParams::default().violations().is_empty());
        let bad = RewardParams { lambda1: 0.0, lambda2: -1.0, lambda3: 5.0 };
        assert_eq!(bad.violations().len(), 3);
    }

    #[test]
    fn fsm_edges() {
        use TruckStatus::*;
        assert!(ActionPending.can_transition(Routing));
        assert!(Routing.can_transition(Unloading));
        assert!(WaitingOnChargerQueue.can_transition(Charging));
        assert!(Charging.can_transition(Terminated));
        assert!(!Routing.can_transition(Charging));
        assert!(!Unloading.can_transition(Routing));
        assert!(!Terminated.can_transition(Terminated));
        assert!(!Terminated.can_transition(ActionPending));
    }

    #[test]
    fn event_order_is_time_then_seq() {
        let e = |time, seq| Event { time, seq, kind: EventKind::Arrival, truck: 0 };
        let mut v = vec![e(1.0, 5), e(0.5, 9), e(1.0, 2)];
        v.sort();
        assert_eq!(v.iter().map(|x| x.seq).collect::<Vec<_>>(), vec![9, 2, 5]);
    }
}
