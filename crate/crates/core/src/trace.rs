//! Episode traces: newline-delimited JSON, header first, and bit-exact replay
//! against the instance that produced them.

use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::to_hex;
use crate::engine::{TerminationReason, WorldState};
use crate::netmodel::{NetworkInstance, ScenarioConfig};
use crate::stochastic::{Draw, RandomStreams};

pub const TRACE_FORMAT: &str = "etfrp-trace/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format_version: String,
    pub instance_digest: String,
    pub master_seed: u64,
    pub config: ScenarioConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    /// The active truck's action, with the digest of the observation it was
    /// chosen from and the reward returned by the step.
    Decision,
    /// A truck is handed the next decision.
    Activate,
    Arrival,
    ChargeSessionEnd,
    UnloadingEnd,
    AdmittedFromQueue,
    DecisionRequired,
    Depleted,
    Terminated,
}

/// A completed charging session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub station: usize,
    pub truck: usize,
    pub arrive: f64,
    pub start: f64,
    pub end: f64,
    pub energy_added: f64,
    pub waited: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    pub event_kind: RecordKind,
    pub truck: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obs_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<usize>,
    #[serde(default)]
    pub random_draws: Vec<Draw>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<SessionRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<TerminationReason>,
}

impl TraceRecord {
    pub fn new(t: f64, event_kind: RecordKind, truck: usize) -> Self {
        Self {
            t,
            event_kind,
            truck,
            obs_digest: None,
            action: None,
            random_draws: Vec::new(),
            reward: None,
            session: None,
            reason: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("trace is empty")]
    Empty,
    #[error("unsupported trace format `{0}`")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Trace {
    pub fn header_for(inst: &NetworkInstance, master_seed: u64) -> TraceHeader {
        TraceHeader {
            format_version: TRACE_FORMAT.into(),
            instance_digest: to_hex(inst.digest()),
            master_seed,
            config: inst.config.clone(),
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, TraceError> {
        Self::read(text.as_bytes())
    }

    pub fn read(reader: impl BufRead) -> Result<Self, TraceError> {
        let mut lines = reader.lines().enumerate().filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty()));
        let (_, first) = lines.next().ok_or(TraceError::Empty)?;
        let header: TraceHeader =
            serde_json::from_str(&first?).map_err(|e| TraceError::Parse { line: 1, message: e.to_string() })?;
        if header.format_version != TRACE_FORMAT {
            return Err(TraceError::Format(header.format_version));
        }
        let mut records = Vec::new();
        for (i, line) in lines {
            let rec =
                serde_json::from_str(&line?).map_err(|e| TraceError::Parse { line: i + 1, message: e.to_string() })?;
            records.push(rec);
        }
        Ok(Self { header, records })
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<(), TraceError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(self.to_jsonl().as_bytes())?;
        f.flush()?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self, TraceError> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// Every draw recorded anywhere in the trace.
    pub fn draws(&self) -> impl Iterator<Item = Draw> + '_ {
        self.records.iter().flat_map(|r| r.random_draws.iter().copied())
    }

    pub fn sessions(&self) -> impl Iterator<Item = &SessionRecord> + '_ {
        self.records.iter().filter_map(|r| r.session.as_ref())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub record_index: usize,
    pub expected: Option<TraceRecord>,
    pub actual: Option<TraceRecord>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub records_checked: usize,
    pub decisions_replayed: usize,
    pub divergence: Option<Divergence>,
}

impl ReplayReport {
    pub fn is_clean(&self) -> bool {
        self.divergence.is_none()
    }
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("trace was recorded on instance {trace} but the given instance digests to {instance}")]
    HeaderMismatch { trace: String, instance: String },
}

fn first_difference(a: &TraceRecord, b: &TraceRecord) -> Option<&'static str> {
    let bits = |x: f64| x.to_bits();
    if bits(a.t) != bits(b.t) {
        return Some("t");
    }
    if a.event_kind != b.event_kind {
        return Some("event_kind");
    }
    if a.truck != b.truck {
        return Some("truck");
    }
    if a.obs_digest != b.obs_digest {
        return Some("obs_digest");
    }
    if a.action != b.action {
        return Some("action");
    }
    if a.random_draws.len() != b.random_draws.len()
        || a.random_draws.iter().zip(&b.random_draws).any(|(x, y)| {
            x.stream != y.stream || x.lane != y.lane || x.index != y.index || bits(x.value) != bits(y.value)
        })
    {
        return Some("random_draws");
    }
    if a.reward.map(bits) != b.reward.map(bits) {
        return Some("reward");
    }
    if a.session
        .map(|s| [s.station as f64, s.truck as f64, s.arrive, s.start, s.end, s.energy_added, s.waited].map(bits))
        != b.session
            .map(|s| [s.station as f64, s.truck as f64, s.arrive, s.start, s.end, s.energy_added, s.waited].map(bits))
    {
        return Some("session");
    }
    if a.reason != b.reason {
        return Some("reason");
    }
    None
}

/// Re-executes the recorded decisions on `inst` with every random draw
/// injected from the trace and compares the regenerated records with the
/// recorded ones, bit for bit.
pub fn replay(trace: &Trace, inst: Arc<NetworkInstance>) -> Result<ReplayReport, ReplayError> {
    let digest = to_hex(inst.digest());
    if trace.header.instance_digest != digest || trace.header.config != inst.config {
        return Err(ReplayError::HeaderMismatch { trace: trace.header.instance_digest.clone(), instance: digest });
    }
    let streams = RandomStreams::injected(trace.header.master_seed, trace.draws());
    let mut world = WorldState::with_streams(inst, streams, true);
    let mut decisions = 0;
    let mut failure = None;
    for (i, rec) in trace.records.iter().enumerate() {
        if rec.event_kind != RecordKind::Decision {
            continue;
        }
        let action = rec.action.unwrap_or(usize::MAX);
        if world.is_done() {
            failure = Some((i, "trace has decisions after the episode ended".to_string()));
            break;
        }
        if let Err(e) = world.step(action) {
            failure = Some((i, format!("recorded action rejected: {e}")));
            break;
        }
        decisions += 1;
    }
    let produced = world.take_records();
    let n = produced.len().max(trace.records.len());
    for k in 0..n {
        let (exp, act) = (trace.records.get(k), produced.get(k));
        let detail = match (exp, act) {
            (Some(e), Some(a)) => first_difference(e, a).map(|f| format!("field `{f}` differs")),
            (Some(_), None) => Some("replay produced fewer records".into()),
            (None, Some(_)) => Some("replay produced extra records".into()),
            (None, None) => None,
        };
        if let Some(mut detail) = detail {
            if let Some((at, why)) = &failure {
                if *at <= k {
                    detail = why.clone();
                }
            }
            return Ok(ReplayReport {
                records_checked: k,
                decisions_replayed: decisions,
                divergence: Some(Divergence { record_index: k, expected: exp.cloned(), actual: act.cloned(), detail }),
            });
        }
    }
    if let Some((at, why)) = failure {
        return Ok(ReplayReport {
            records_checked: at,
            decisions_replayed: decisions,
            divergence: Some(Divergence {
                record_index: at,
                expected: trace.records.get(at).cloned(),
                actual: None,
                detail: why,
            }),
        });
    }
    Ok(ReplayReport { records_checked: n, decisions_replayed: decisions, divergence: None })
}
