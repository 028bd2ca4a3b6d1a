//! Event-driven simulator and benchmark toolkit for electric truck fleet
//! routing with shared, capacity-limited charging stations.
//!
//! A [`netmodel::NetworkInstance`] describes the road network, chargers,
//! trucks and scenario configuration. [`engine::WorldState`] advances the
//! fleet between decision points; at each one the active truck receives a
//! feasibility-masked [`actionspace::ActionSet`] and an
//! [`obsgraph::ObservationGraph`]. Policies live in [`planners`], the wire
//! protocol in [`envserver`], traces and replay in [`trace`], and batch
//! evaluation in [`evaluation`].
//!
//! ```
//! use std::sync::Arc;
//! use etfrp_core::{netmodel::fixtures, planners::PlannerPolicy, engine::run_episode};
//!
//! let inst = Arc::new(fixtures::t1_deterministic());
//! let out = run_episode(&inst, &mut PlannerPolicy::default(), 0, false).unwrap();
//! assert!(out.metrics.success);
//! assert!((out.metrics.total_time_h - 2.4).abs() < 1e-9);
//! ```

pub mod actionspace;
pub mod charging;
pub mod digest;
pub mod engine;
pub mod envserver;
pub mod evaluation;
pub mod netmodel;
pub mod obsgraph;
pub mod planners;
pub mod stochastic;
pub mod trace;

pub use actionspace::{ActionDescriptor, ActionKind, ActionSet};
pub use engine::{EpisodeMetrics, Policy, StepResult, TerminationReason, TruckStatus, WorldState};
pub use netmodel::{NetworkInstance, ScenarioConfig};
pub use trace::Trace;
