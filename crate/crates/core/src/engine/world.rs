use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};
use std::sync::Arc;

use super::{
    compute_reward, EngineError, EpisodeMetrics, Event, EventKind, StepEvent, StepResult, TerminationReason,
    TruckCounters, TruckStatus,
};
use crate::actionspace::{build_action_set, ActionKind, ActionSet, TruckView};
use crate::charging::{integrate_charge, AdmitOutcome, StationState};
use crate::netmodel::{DeliveryMode, NetworkInstance, TruckSpec};
use crate::stochastic::{
    sample_energy_coeff, sample_travel_time, sample_unloading, RandomStreams, StreamId, StreamKind,
};
use crate::trace::{RecordKind, SessionRecord, Trace, TraceRecord};

const TIEBREAK: StreamId = StreamId::new(StreamKind::Tiebreak, 0);

#[derive(Debug, Clone, Copy, PartialEq)]
struct Leg {
    depart: f64,
    tau: f64,
    energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Session {
    station: usize,
    requested_at: f64,
    start: Option<f64>,
    duration: f64,
}

/// Runtime state of one truck.
#[derive(Debug, Clone, PartialEq)]
pub struct TruckRuntime {
    pub spec: TruckSpec,
    pub status: TruckStatus,
    pub reason: Option<TerminationReason>,
    pub battery: f64,
    /// Current node, or the node last departed while routing.
    pub node: usize,
    pub dest: Option<usize>,
    /// Pending deliveries in assignment order.
    pub remaining: Vec<usize>,
    pub last_decision_time: f64,
    /// Nominal estimate of when the truck next needs a decision.
    pub next_ready_estimate: f64,
    pub counters: TruckCounters,
    pub decisions: u32,
    pub finish_time: Option<f64>,
    delivered_since_decision: u32,
    leg: Option<Leg>,
    session: Option<Session>,
    unloading: Option<f64>,
}

impl TruckRuntime {
    fn new(spec: &TruckSpec) -> Self {
        Self {
            spec: spec.clone(),
            status: TruckStatus::ActionPending,
            reason: None,
            battery: spec.initial_battery,
            node: spec.start_node,
            dest: None,
            remaining: spec.deliveries.clone(),
            last_decision_time: 0.0,
            next_ready_estimate: 0.0,
            counters: TruckCounters::default(),
            decisions: 0,
            finish_time: None,
            delivered_since_decision: 0,
            leg: None,
            session: None,
            unloading: None,
        }
    }

    pub fn soc(&self) -> f64 {
        self.battery / self.spec.battery_capacity
    }

    pub fn is_terminated(&self) -> bool {
        self.status == TruckStatus::Terminated
    }

    /// Station the truck is charging at or queued for.
    pub fn station(&self) -> Option<usize> {
        self.session.map(|s| s.station)
    }
}

/// Mutable simulation state of one episode.
#[derive(Debug, Clone)]
pub struct WorldState {
    inst: Arc<NetworkInstance>,
    clock: f64,
    seq: u64,
    events: BinaryHeap<Reverse<Event>>,
    trucks: Vec<TruckRuntime>,
    stations: Vec<StationState>,
    ready: BTreeSet<usize>,
    active: Option<usize>,
    actions: Option<ActionSet>,
    streams: RandomStreams,
    reward_total: f64,
    reset_reward: f64,
    step_reward: f64,
    step_elapsed: f64,
    step_info: Vec<StepEvent>,
    episode_step: u64,
    records: Option<Vec<TraceRecord>>,
    violations: Vec<String>,
    strandings_mid_edge: u32,
    strandings_dead_end: u32,
    infeasible_actions: u32,
    decision_limit_hits: u32,
}

impl WorldState {
    /// Starts an episode at `t = 0` and advances to the first decision.
    pub fn reset(inst: Arc<NetworkInstance>, seed: u64) -> Self {
        Self::with_streams(inst, RandomStreams::new(seed), false)
    }

    /// Like [`WorldState::reset`], keeping a full trace.
    pub fn reset_recording(inst: Arc<NetworkInstance>, seed: u64) -> Self {
        Self::with_streams(inst, RandomStreams::new(seed), true)
    }

    pub fn with_streams(inst: Arc<NetworkInstance>, mut streams: RandomStreams, record: bool) -> Self {
        streams.set_recording(record);
        let trucks: Vec<TruckRuntime> = inst.trucks.iter().map(TruckRuntime::new).collect();
        let stations = inst.chargers.iter().map(|c| StationState::new(*c)).collect();
        let mut w = Self {
            inst,
            clock: 0.0,
            seq: 0,
            events: BinaryHeap::new(),
            trucks,
            stations,
            ready: BTreeSet::new(),
            active: None,
            actions: None,
            streams,
            reward_total: 0.0,
            reset_reward: 0.0,
            step_reward: 0.0,
            step_elapsed: 0.0,
            step_info: Vec::new(),
            episode_step: 0,
            records: record.then(Vec::new),
            violations: Vec::new(),
            strandings_mid_edge: 0,
            strandings_dead_end: 0,
            infeasible_actions: 0,
            decision_limit_hits: 0,
        };
        for i in 0..w.trucks.len() {
            w.schedule(0.0, EventKind::DecisionRequired, i);
        }
        w.advance();
        w.reset_reward = w.step_reward;
        w
    }

    pub fn instance(&self) -> &NetworkInstance {
        &self.inst
    }

    pub fn instance_arc(&self) -> &Arc<NetworkInstance> {
        &self.inst
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn master_seed(&self) -> u64 {
        self.streams.master_seed()
    }

    pub fn trucks(&self) -> &[TruckRuntime] {
        &self.trucks
    }

    pub fn stations(&self) -> &[StationState] {
        &self.stations
    }

    pub fn active_truck(&self) -> Option<usize> {
        self.active
    }

    /// Action set issued to the active truck.
    pub fn action_set(&self) -> Option<&ActionSet> {
        self.actions.as_ref()
    }

    pub fn is_done(&self) -> bool {
        self.active.is_none()
    }

    pub fn episode_step(&self) -> u64 {
        self.episode_step
    }

    /// Reward settled while reset advanced to the first decision (zero unless
    /// a truck terminated at time 0).
    pub fn reset_reward(&self) -> f64 {
        self.reset_reward
    }

    /// Elapsed hours reported for the current active truck.
    pub fn elapsed(&self) -> f64 {
        self.step_elapsed
    }

    /// Invariant breaches observed so far (port capacity, FCFS, FSM).
    pub fn invariant_violations(&self) -> &[String] {
        &self.violations
    }

    /// Trucks ready at the current instant that have not been served yet.
    pub fn waiting_ready(&self) -> impl Iterator<Item = usize> + '_ {
        self.ready.iter().copied()
    }

    pub fn truck_view(&self, i: usize) -> TruckView<'_> {
        let t = &self.trucks[i];
        TruckView { spec: &t.spec, node: t.node, battery: t.battery, remaining: &t.remaining, now: self.clock }
    }

    pub fn build_action_set_for(&self, i: usize) -> ActionSet {
        build_action_set(&self.inst, &self.truck_view(i), |s| self.stations[s].has_free_port())
    }

    pub fn is_recording(&self) -> bool {
        self.records.is_some()
    }

    /// Drains the trace records produced so far.
    pub fn take_records(&mut self) -> Vec<TraceRecord> {
        self.records.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Trace of a recording world, consuming its records.
    pub fn take_trace(&mut self) -> Trace {
        Trace { header: Trace::header_for(&self.inst, self.master_seed()), records: self.take_records() }
    }

    pub fn metrics(&self) -> EpisodeMetrics {
        let mut m = EpisodeMetrics { reward_total: self.reward_total, ..Default::default() };
        let mut soc = 0.0;
        for t in &self.trucks {
            let c = &t.counters;
            m.deliveries_completed += c.deliveries;
            m.charging_sessions += c.sessions;
            m.charging_time_h += c.charging_h;
            m.waiting_time_h += c.waiting_h;
            m.routing_time_h += c.routing_h;
            m.unloading_time_h += c.unloading_h;
            m.decisions += t.decisions;
            soc += t.soc();
            if t.reason == Some(TerminationReason::Success) {
                m.trucks_succeeded += 1;
            }
        }
        m.total_time_h = m.routing_time_h + m.charging_time_h + m.waiting_time_h + m.unloading_time_h;
        m.avg_finish_soc = if self.trucks.is_empty() { 0.0 } else { soc / self.trucks.len() as f64 };
        m.success = m.trucks_succeeded as usize == self.trucks.len();
        m.strandings_mid_edge = self.strandings_mid_edge;
        m.strandings_dead_end = self.strandings_dead_end;
        m.infeasible_actions = self.infeasible_actions;
        m.decision_limit_hits = self.decision_limit_hits;
        m
    }

    /// Applies action `action` (an index into the active truck's action set)
    /// and advances to the next decision or the end of the episode.
    pub fn step(&mut self, action: usize) -> Result<StepResult, EngineError> {
        let i = self.active.ok_or(EngineError::EpisodeFinished)?;
        let set = self.actions.as_ref().expect("active truck has an action set");
        if action >= set.actions.len() {
            return Err(EngineError::ActionOutOfRange { action, size: set.actions.len() });
        }
        let chosen = set.actions[action];
        let obs_digest = self.records.is_some().then(|| crate::digest::to_hex(crate::obsgraph::encode(self).digest()));

        self.step_reward = 0.0;
        self.step_elapsed = 0.0;
        self.step_info.clear();
        self.episode_step += 1;
        self.active = None;
        self.actions = None;

        let rec_index = self.records.as_ref().map(|r| r.len());
        if let Some(records) = self.records.as_mut() {
            let mut rec = TraceRecord::new(self.clock, RecordKind::Decision, i);
            rec.obs_digest = obs_digest;
            rec.action = Some(action);
            records.push(rec);
        }

        if !chosen.feasible {
            self.infeasible_actions += 1;
            self.terminate(i, TerminationReason::InfeasibleAction);
        } else {
            match chosen.kind {
                ActionKind::NavigateCharger | ActionKind::NavigateDelivery => {
                    self.depart(i, chosen.target.expect("navigation target"))
                }
                ActionKind::Charge => self.request_charge(
                    i,
                    chosen.target.expect("feasible charge has a station"),
                    chosen.duration.expect("charge duration"),
                ),
            }
        }
        if let (Some(records), Some(k)) = (self.records.as_mut(), rec_index) {
            records[k].random_draws = self.streams.take_log();
        }

        self.advance();

        if let (Some(records), Some(k)) = (self.records.as_mut(), rec_index) {
            records[k].reward = Some(self.step_reward);
        }
        Ok(StepResult {
            reward: self.step_reward,
            done: self.active.is_none(),
            active_truck: self.active,
            elapsed: self.step_elapsed,
            info: self.step_info.clone(),
        })
    }

    fn schedule(&mut self, time: f64, kind: EventKind, truck: usize) {
        self.seq += 1;
        self.events.push(Reverse(Event { time, seq: self.seq, kind, truck }));
    }

    fn record(&mut self, mut rec: TraceRecord) {
        if let Some(records) = self.records.as_mut() {
            rec.random_draws = self.streams.take_log();
            records.push(rec);
        }
    }

    fn transition(&mut self, i: usize, to: TruckStatus) {
        let from = self.trucks[i].status;
        if !from.can_transition(to) {
            self.violations.push(format!("truck {i}: illegal transition {from:?} -> {to:?} at t={}", self.clock));
        }
        self.trucks[i].status = to;
    }

    fn settle(&mut self, i: usize, failed: bool) -> f64 {
        let t = &mut self.trucks[i];
        let dt = self.clock - t.last_decision_time;
        let r = compute_reward(dt, t.delivered_since_decision, failed, &self.inst.config.reward);
        t.last_decision_time = self.clock;
        t.delivered_since_decision = 0;
        self.step_reward += r;
        self.reward_total += r;
        dt
    }

    fn terminate(&mut self, i: usize, reason: TerminationReason) {
        self.transition(i, TruckStatus::Terminated);
        self.ready.remove(&i);
        let t = &mut self.trucks[i];
        t.reason = Some(reason);
        t.finish_time = Some(self.clock);
        t.dest = None;
        t.next_ready_estimate = self.clock;
        self.settle(i, reason != TerminationReason::Success);
        let mut rec = TraceRecord::new(self.clock, RecordKind::Terminated, i);
        rec.reason = Some(reason);
        self.record(rec);
    }

    fn is_valid_target(&self, i: usize, node: usize) -> bool {
        let t = &self.trucks[i];
        match t.spec.mode {
            DeliveryMode::Sequential => t.remaining.first() == Some(&node),
            DeliveryMode::Flexible => t.remaining.contains(&node),
        }
    }

    fn depart(&mut self, i: usize, to: usize) {
        let lane = i as u32;
        let from = self.trucks[i].node;
        let (tau, energy) = (self.inst.tau(from, to), self.inst.energy(from, to));
        let params = &self.inst.config.stochastic;
        let tau_r = sample_travel_time(tau, self.clock, params, &mut self.streams, lane);
        let xi = sample_energy_coeff(tau_r, tau, params, &mut self.streams, lane);
        let energy_r = xi * energy;
        self.transition(i, TruckStatus::Routing);
        let unload = if self.is_valid_target(i, to) { self.inst.config.nominal_unloading() } else { 0.0 };
        let t = &mut self.trucks[i];
        t.dest = Some(to);
        t.next_ready_estimate = self.clock + tau + unload;
        t.leg = Some(Leg { depart: self.clock, tau: tau_r, energy: energy_r });
        if energy_r > t.battery {
            let frac = if energy_r > 0.0 { t.battery / energy_r } else { 0.0 };
            self.schedule(self.clock + tau_r * frac, EventKind::Depleted, i);
        } else {
            self.schedule(self.clock + tau_r, EventKind::Arrival, i);
        }
    }

    fn request_charge(&mut self, i: usize, station: usize, duration: f64) {
        let outcome = self.stations[station].arrive(i, self.clock, duration);
        let session = Session { station, requested_at: self.clock, start: None, duration };
        match outcome {
            Ok(AdmitOutcome::Started { at }) => {
                self.transition(i, TruckStatus::Charging);
                let t = &mut self.trucks[i];
                t.session = Some(Session { start: Some(at), ..session });
                t.next_ready_estimate = at + duration;
                self.schedule(at + duration, EventKind::ChargeSessionEnd, i);
            }
            Ok(AdmitOutcome::Queued { .. }) => {
                self.transition(i, TruckStatus::WaitingOnChargerQueue);
                let release = self.stations[station].earliest_release().unwrap_or(self.clock);
                let t = &mut self.trucks[i];
                t.session = Some(session);
                t.next_ready_estimate = release + duration;
            }
            Err(e) => self.violations.push(format!("truck {i}: {e}")),
        }
    }

    fn become_ready(&mut self, i: usize) {
        self.transition(i, TruckStatus::ActionPending);
        self.trucks[i].next_ready_estimate = self.clock;
        self.schedule(self.clock, EventKind::DecisionRequired, i);
    }

    fn check_stations(&mut self) {
        for (s, st) in self.stations.iter().enumerate() {
            if let Err(e) = st.check_invariants() {
                self.violations.push(format!("station {s} at t={}: {e}", self.clock));
            }
        }
    }

    fn process(&mut self, ev: Event) {
        if ev.time < self.clock {
            self.violations.push(format!("clock moved backwards: {} -> {}", self.clock, ev.time));
        }
        self.clock = ev.time;
        let i = ev.truck;
        self.step_info.push(StepEvent { t: ev.time, kind: ev.kind, truck: i });
        match ev.kind {
            EventKind::Arrival => {
                let leg = self.trucks[i].leg.take().expect("arrival without a leg");
                let dest = self.trucks[i].dest.take().expect("arrival without a destination");
                let valid = self.is_valid_target(i, dest);
                let t = &mut self.trucks[i];
                t.counters.routing_h += leg.tau;
                t.counters.energy_used += leg.energy;
                t.battery = (t.battery - leg.energy).max(0.0);
                t.node = dest;
                if valid {
                    let u = sample_unloading(&self.inst.config.stochastic, &mut self.streams, i as u32);
                    self.transition(i, TruckStatus::Unloading);
                    self.trucks[i].unloading = Some(u);
                    self.trucks[i].next_ready_estimate = self.clock + u;
                    self.schedule(self.clock + u, EventKind::UnloadingEnd, i);
                    self.record(TraceRecord::new(ev.time, RecordKind::Arrival, i));
                } else {
                    self.record(TraceRecord::new(ev.time, RecordKind::Arrival, i));
                    self.become_ready(i);
                }
            }
            EventKind::Depleted => {
                let leg = self.trucks[i].leg.take().expect("depletion without a leg");
                let t = &mut self.trucks[i];
                t.counters.routing_h += self.clock - leg.depart;
                t.counters.energy_used += t.battery;
                t.battery = 0.0;
                self.strandings_mid_edge += 1;
                self.record(TraceRecord::new(ev.time, RecordKind::Depleted, i));
                self.terminate(i, TerminationReason::Stranded);
            }
            EventKind::UnloadingEnd => {
                let u = self.trucks[i].unloading.take().expect("unloading end without unloading");
                let t = &mut self.trucks[i];
                t.counters.unloading_h += u;
                t.counters.deliveries += 1;
                t.delivered_since_decision += 1;
                let node = t.node;
                t.remaining.retain(|&d| d != node);
                self.record(TraceRecord::new(ev.time, RecordKind::UnloadingEnd, i));
                self.become_ready(i);
            }
            EventKind::ChargeSessionEnd => self.end_session(i),
            EventKind::AdmittedFromQueue => {
                // Admissions happen inline when a port is released.
            }
            EventKind::DecisionRequired => {
                self.record(TraceRecord::new(ev.time, RecordKind::DecisionRequired, i));
                let t = &self.trucks[i];
                if t.remaining.is_empty() {
                    self.terminate(i, TerminationReason::Success);
                } else if t.decisions >= self.inst.config.max_decisions_per_truck {
                    self.decision_limit_hits += 1;
                    self.terminate(i, TerminationReason::DecisionLimit);
                } else if !self.build_action_set_for(i).any_feasible() {
                    self.strandings_dead_end += 1;
                    self.terminate(i, TerminationReason::Stranded);
                } else {
                    self.ready.insert(i);
                }
            }
        }
        self.check_stations();
    }

    fn end_session(&mut self, i: usize) {
        let session = self.trucks[i].session.take().expect("session end without a session");
        let start = session.start.expect("ended session had started");
        let spec = self.stations[session.station].spec;
        let t = &mut self.trucks[i];
        let out = integrate_charge(
            t.battery,
            t.spec.battery_capacity,
            session.duration,
            spec.eta,
            spec.p_max,
            spec.p_min,
            self.inst.config.charge_dt,
        );
        t.battery = out.battery_after;
        t.counters.energy_added += out.energy_added;
        t.counters.charging_h += session.duration;
        t.counters.sessions += 1;
        let mut rec = TraceRecord::new(self.clock, RecordKind::ChargeSessionEnd, i);
        rec.session = Some(SessionRecord {
            station: session.station,
            truck: i,
            arrive: session.requested_at,
            start,
            end: self.clock,
            energy_added: out.energy_added,
            waited: start - session.requested_at,
        });
        self.record(rec);

        match self.stations[session.station].release(i, self.clock) {
            Ok(Some(adm)) => {
                let j = adm.truck;
                self.transition(j, TruckStatus::Charging);
                let tj = &mut self.trucks[j];
                tj.counters.waiting_h += adm.waited;
                if let Some(s) = tj.session.as_mut() {
                    s.start = Some(adm.start_time);
                }
                tj.next_ready_estimate = adm.start_time + adm.duration;
                self.schedule(adm.start_time + adm.duration, EventKind::ChargeSessionEnd, j);
                self.step_info.push(StepEvent { t: self.clock, kind: EventKind::AdmittedFromQueue, truck: j });
                self.record(TraceRecord::new(self.clock, RecordKind::AdmittedFromQueue, j));
            }
            Ok(None) => {}
            Err(e) => self.violations.push(format!("truck {i}: {e}")),
        }
        self.become_ready(i);
    }

    /// Processes events until a truck can be handed a decision or every
    /// truck has terminated. Events sharing a timestamp are all processed
    /// before a ready truck is chosen; simultaneous ready trucks are ordered
    /// by a tiebreak draw.
    fn advance(&mut self) {
        loop {
            let next_time = self.events.peek().map(|Reverse(e)| e.time);
            let drain_first = match next_time {
                Some(t) => self.ready.is_empty() || t <= self.clock,
                None => false,
            };
            if drain_first {
                let Reverse(ev) = self.events.pop().expect("peeked");
                self.process(ev);
                continue;
            }
            if self.ready.is_empty() {
                return;
            }
            let pick = if self.ready.len() > 1 {
                let k = self.streams.below(TIEBREAK, self.ready.len());
                *self.ready.iter().nth(k).expect("k < len")
            } else {
                *self.ready.iter().next().expect("non-empty")
            };
            self.ready.remove(&pick);
            let set = self.build_action_set_for(pick);
            if !set.any_feasible() {
                self.strandings_dead_end += 1;
                self.terminate(pick, TerminationReason::Stranded);
                continue;
            }
            self.step_elapsed = self.settle(pick, false);
            self.trucks[pick].decisions += 1;
            self.active = Some(pick);
            self.actions = Some(set);
            self.record(TraceRecord::new(self.clock, RecordKind::Activate, pick));
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::fixtures::{self, t1_nodes::*};
    use crate::netmodel::generate_instance;
    use crate::netmodel::GeneratorParams;

    fn slot_of(world: &WorldState, kind: ActionKind, target: usize) -> usize {
        world.action_set().unwrap().actions.iter().find(|a| a.kind == kind && a.target == Some(target)).unwrap().index
    }

    #[test]
    fn reset_on_fixture() {
        let w = WorldState::reset(Arc::new(fixtures::t1()), 1);
        assert_eq!(w.active_truck(), Some(0));
        assert_eq!(w.trucks()[0].battery, 400.0);
        assert_eq!(w.trucks()[0].remaining, vec![D1, D2]);
        assert_eq!(w.clock(), 0.0);
        assert_eq!(w.reset_reward(), 0.0);
    }

    #[test]
    fn navigate_first_delivery_deterministic() {
        let mut w = WorldState::reset(Arc::new(fixtures::t1_deterministic()), 1);
        let a = slot_of(&w, ActionKind::NavigateDelivery, D1);
        let r = w.step(a).unwrap();
        assert_eq!(r.active_truck, Some(0));
        assert!((r.elapsed - 1.2).abs() < 1e-12);
        assert!((r.reward - (-1.2 + 500.0)).abs() < 1e-9, "{}", r.reward);
        let t = &w.trucks()[0];
        assert_eq!(t.battery, 360.0);
        assert_eq!(t.remaining, vec![D2]);
        assert_eq!(t.node, D1);
    }

    #[test]
    fn infeasible_action_terminates() {
        let mut inst = fixtures::t1_deterministic();
        inst.trucks[0].initial_battery = 40.0;
        let mut w = WorldState::reset(Arc::new(inst), 1);
        let a = slot_of(&w, ActionKind::NavigateDelivery, D2);
        assert!(!w.action_set().unwrap().actions[a].feasible);
        let r = w.step(a).unwrap();
        assert!(r.done);
        assert_eq!(r.reward, -1000.0);
        assert_eq!(w.trucks()[0].reason, Some(TerminationReason::InfeasibleAction));
        assert_eq!(w.step(0), Err(EngineError::EpisodeFinished));
    }

    #[test]
    fn out_of_range_is_an_error_and_keeps_the_episode() {
        let mut w = WorldState::reset(Arc::new(fixtures::t1()), 1);
        assert!(matches!(w.step(99), Err(EngineError::ActionOutOfRange { .. })));
        assert_eq!(w.active_truck(), Some(0));
    }

    #[test]
    fn mid_edge_stranding_when_alpha_is_too_small() {
        let mut inst = fixtures::t1();
        inst.config.alpha = 1.0;
        inst.config.allow_stranding_risk = true;
        inst.config.stochastic.energy_clip = (1.2, 1.2);
        inst.trucks[0].initial_battery = 41.0;
        let mut w = WorldState::reset(Arc::new(inst), 3);
        let a = slot_of(&w, ActionKind::NavigateDelivery, D1);
        assert!(w.action_set().unwrap().actions[a].feasible, "40 < 41");
        let r = w.step(a).unwrap();
        assert!(r.done);
        let t = &w.trucks()[0];
        assert_eq!(t.reason, Some(TerminationReason::Stranded));
        assert_eq!(t.battery, 0.0);
        assert!(r.reward < -1000.0);
        assert_eq!(w.metrics().strandings_mid_edge, 1);
    }

    #[test]
    fn fleet_reset_has_one_active_truck() {
        let p = GeneratorParams { n_trucks: 10, ..Default::default() };
        let inst = Arc::new(generate_instance(&p, 3).unwrap());
        let w = WorldState::reset(inst.clone(), 9);
        assert!(w.active_truck().is_some());
        assert_eq!(w.waiting_ready().count(), 9);
        let again = WorldState::reset(inst, 9);
        assert_eq!(again.active_truck(), w.active_truck());
    }

    #[test]
    fn charging_then_queue_on_single_port() {
        // Two trucks start at C1 with low battery; both charge, the second queues.
        let mut inst = fixtures::t1_deterministic();
        inst.trucks[0].start_node = C1;
        inst.trucks[0].initial_battery = 100.0;
        let mut second = inst.trucks[0].clone();
        second.id = 1;
        inst.trucks.push(second);
        let mut w = WorldState::reset(Arc::new(inst), 5);
        let charge1h = 3;
        let first = w.active_truck().unwrap();
        w.step(charge1h).unwrap();
        let other = w.active_truck().unwrap();
        assert_ne!(first, other);
        w.step(charge1h).unwrap();
        assert_eq!(w.trucks()[other].status, TruckStatus::Charging);
        assert_eq!(w.trucks()[other].counters.waiting_h, 1.0);
        assert_eq!(w.active_truck(), Some(first));
        assert_eq!(w.clock(), 1.0);
        assert!(w.invariant_violations().is_empty());
    }
}
