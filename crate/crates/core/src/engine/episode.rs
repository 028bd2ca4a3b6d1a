use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

use super::{EngineError, EpisodeMetrics, WorldState};
use crate::netmodel::NetworkInstance;
use crate::trace::Trace;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct PolicyError(pub String);

/// A decision callback. Called once per decision with the world paused at
/// the active truck; returns an index into [`WorldState::action_set`].
pub trait Policy {
    fn name(&self) -> String;

    /// Called after reset, before the first decision.
    fn begin_episode(&mut self, _world: &WorldState) -> Result<(), PolicyError> {
        Ok(())
    }

    fn act(&mut self, world: &WorldState) -> Result<usize, PolicyError>;

    /// Called once the episode is done.
    fn end_episode(&mut self, _world: &WorldState) -> Result<(), PolicyError> {
        Ok(())
    }
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn begin_episode(&mut self, world: &WorldState) -> Result<(), PolicyError> {
        (**self).begin_episode(world)
    }
    fn act(&mut self, world: &WorldState) -> Result<usize, PolicyError> {
        (**self).act(world)
    }
    fn end_episode(&mut self, world: &WorldState) -> Result<(), PolicyError> {
        (**self).end_episode(world)
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub metrics: EpisodeMetrics,
    /// Present when the episode was recorded.
    pub trace: Option<Trace>,
    /// Invariant breaches detected by the engine (empty in a correct run).
    pub violations: Vec<String>,
}

#[derive(Debug, Error)]
pub enum EpisodeFailure {
    #[error("policy failed: {0}")]
    Policy(#[from] PolicyError),
    #[error("engine rejected the policy's action: {0}")]
    Engine(#[from] EngineError),
}

/// A failed episode together with whatever was traced before the failure.
#[derive(Debug, Error)]
#[error("{source}")]
pub struct EpisodeError {
    #[source]
    pub source: EpisodeFailure,
    pub partial_trace: Option<Trace>,
}

/// Runs one episode to completion.
pub fn run_episode(
    inst: &Arc<NetworkInstance>,
    policy: &mut dyn Policy,
    seed: u64,
    record: bool,
) -> Result<EpisodeOutcome, EpisodeError> {
    let started = Instant::now();
    let mut world =
        if record { WorldState::reset_recording(inst.clone(), seed) } else { WorldState::reset(inst.clone(), seed) };
    let fail = |world: &mut WorldState, e: EpisodeFailure| EpisodeError {
        source: e,
        partial_trace: record.then(|| world.take_trace()),
    };
    if let Err(e) = policy.begin_episode(&world) {
        return Err(fail(&mut world, e.into()));
    }
    while !world.is_done() {
        let action = match policy.act(&world) {
            Ok(a) => a,
            Err(e) => return Err(fail(&mut world, e.into())),
        };
        if let Err(e) = world.step(action) {
            return Err(fail(&mut world, e.into()));
        }
    }
    if let Err(e) = policy.end_episode(&world) {
        return Err(fail(&mut world, e.into()));
    }
    let mut metrics = world.metrics();
    metrics.wall_clock_s = started.elapsed().as_secs_f64();
    Ok(EpisodeOutcome {
        metrics,
        trace: record.then(|| world.take_trace()),
        violations: world.invariant_violations().to_vec(),
    })
}
