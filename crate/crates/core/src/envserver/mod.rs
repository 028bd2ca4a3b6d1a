//! Line-delimited JSON environment protocol.
//!
//! Each request is one JSON object per line with a `type` field and an
//! optional `id` that is echoed in the single response line.
//!
//! | request   | fields                                                        | response            |
//! |-----------|---------------------------------------------------------------|---------------------|
//! | `hello`   | optional instance source                                      | `hello`             |
//! | `reset`   | `seed`, optional instance source                              | `obs`               |
//! | `step`    | `action`                                                      | `obs` or `episode_end` |
//! | `replay`  | `trace_inline` or `trace_path`, optional instance source      | `replay`            |
//!
//! An instance source is one of `instance_inline` (an instance document as
//! an object or a string), `instance_path`, or `instance_name` (a built-in
//! fixture: `T1`, `T1-deterministic`). Without one the server's default
//! instance is used. Failures answer with an `error` message and leave the
//! session usable.

mod transport;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::engine::{EpisodeMetrics, StepEvent, WorldState};
use crate::netmodel::{fixtures, load_instance, load_instance_file, NetworkInstance};
use crate::obsgraph::{encode, ActionGraph, StateGraph};
use crate::trace::{replay, Trace};

pub use transport::{bind_tcp, serve_listener, serve_stdio, serve_stream, ExternPolicy};

pub const PROTOCOL: &str = "etfrp/1";

/// Settings shared by every session of a server.
#[derive(Debug, Clone, Default)]
pub struct ServerConfig {
    pub default_instance: Option<Arc<NetworkInstance>>,
    /// Finished (or interrupted) episodes are written here as
    /// `session{S}-episode{E}-seed{seed}.trace.jsonl`.
    pub trace_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
struct InstanceSource {
    #[serde(default)]
    instance_inline: Option<Value>,
    #[serde(default)]
    instance_path: Option<PathBuf>,
    #[serde(default)]
    instance_name: Option<String>,
}

#[derive(Debug, Deserialize)]
struct ResetRequest {
    seed: u64,
    #[serde(flatten)]
    source: InstanceSource,
}

#[derive(Debug, Deserialize)]
struct StepRequest {
    action: usize,
}

#[derive(Debug, Deserialize)]
struct ReplayRequest {
    #[serde(default)]
    trace_inline: Option<String>,
    #[serde(default)]
    trace_path: Option<PathBuf>,
    #[serde(flatten)]
    source: InstanceSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsInfo {
    /// Hours since the active truck's previous decision.
    pub elapsed: f64,
    /// Size of the active truck's own action set; later slots are padding.
    pub action_count: usize,
    pub events: Vec<StepEvent>,
}

/// Observation message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsMessage {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<Value>,
    pub episode_step: u64,
    pub active_truck: Option<usize>,
    pub state: StateGraph,
    pub actions: ActionGraph,
    pub reward: f64,
    pub done: bool,
    pub info: ObsInfo,
}

/// Final message of an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeEndMessage {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<Value>,
    pub episode_step: u64,
    pub reward: f64,
    pub done: bool,
    pub metrics: EpisodeMetrics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_path: Option<String>,
}

pub fn error_message(id: Option<&Value>, message: impl Into<String>) -> Value {
    let mut v = json!({ "type": "error", "message": message.into() });
    if let Some(id) = id {
        v["id"] = id.clone();
    }
    v
}

fn obs_message(world: &WorldState, id: Option<Value>, reward: f64, events: Vec<StepEvent>) -> ObsMessage {
    let obs = encode(world);
    ObsMessage {
        kind: "obs".into(),
        id,
        episode_step: world.episode_step(),
        active_truck: obs.active_truck,
        state: obs.state,
        actions: obs.actions,
        reward,
        done: world.is_done(),
        info: ObsInfo {
            elapsed: world.elapsed(),
            action_count: world.action_set().map_or(0, |s| s.actions.len()),
            events,
        },
    }
}

/// One client's environment: at most one live episode at a time.
pub struct Session {
    config: Arc<ServerConfig>,
    session_id: u64,
    instance: Option<Arc<NetworkInstance>>,
    world: Option<WorldState>,
    episodes: u64,
}

impl Session {
    pub fn new(config: Arc<ServerConfig>, session_id: u64) -> Self {
        let instance = config.default_instance.clone();
        Self { config, session_id, instance, world: None, episodes: 0 }
    }

    pub fn world(&self) -> Option<&WorldState> {
        self.world.as_ref()
    }

    /// Handles one request line and returns the response object.
    pub fn handle_line(&mut self, line: &str) -> Value {
        let req: Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => return error_message(None, format!("malformed JSON: {e}")),
        };
        let id = req.get("id").cloned();
        let Some(kind) = req.get("type").and_then(Value::as_str) else {
            return error_message(id.as_ref(), "missing string field `type`");
        };
        let result = match kind {
            "hello" => self.hello(&req, id.clone()),
            "reset" => self.reset(&req, id.clone()),
            "step" => self.step(&req, id.clone()),
            "replay" => self.replay(&req, id.clone()),
            other => Err(format!("unknown message type `{other}`")),
        };
        result.unwrap_or_else(|e| error_message(id.as_ref(), e))
    }

    /// Writes the trace of an unfinished episode, if any. Called when the
    /// transport closes.
    pub fn flush(&mut self) -> Option<PathBuf> {
        let mut world = self.world.take()?;
        if world.is_done() {
            return None;
        }
        self.write_trace(&mut world).ok().flatten()
    }

    fn resolve(&self, source: &InstanceSource) -> Result<Option<Arc<NetworkInstance>>, String> {
        let inst = if let Some(v) = &source.instance_inline {
            let text = match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            load_instance(&text).map_err(|e| format!("instance_inline: {e}"))?
        } else if let Some(p) = &source.instance_path {
            load_instance_file(p).map_err(|e| format!("instance_path {}: {e}", p.display()))?
        } else if let Some(name) = &source.instance_name {
            match name.as_str() {
                "T1" => fixtures::t1(),
                "T1-deterministic" => fixtures::t1_deterministic(),
                other => return Err(format!("unknown built-in instance `{other}`")),
            }
        } else {
            return Ok(None);
        };
        Ok(Some(Arc::new(inst)))
    }

    fn hello(&mut self, req: &Value, id: Option<Value>) -> Result<Value, String> {
        let source: InstanceSource = serde_json::from_value(req.clone()).map_err(|e| e.to_string())?;
        if let Some(inst) = self.resolve(&source)? {
            self.instance = Some(inst);
        }
        let mut v = json!({
            "type": "hello",
            "protocol": PROTOCOL,
            "fixed_size": self.instance.as_ref().map(|i| i.max_fixed_action_size()),
            "n_trucks": self.instance.as_ref().map(|i| i.trucks.len()),
            "truck_feats": 5,
            "delivery_feats": 2,
            "charger_feats": 6,
            "action_feats": 3,
            "edge_feats": 2,
        });
        if let Some(id) = id {
            v["id"] = id;
        }
        Ok(v)
    }

    fn reset(&mut self, req: &Value, id: Option<Value>) -> Result<Value, String> {
        let r: ResetRequest = serde_json::from_value(req.clone()).map_err(|e| format!("reset: {e}"))?;
        if let Some(inst) = self.resolve(&r.source)? {
            self.instance = Some(inst);
        }
        let inst = self.instance.clone().ok_or("reset: no instance given and no server default")?;
        self.flush();
        let world = WorldState::reset_recording(inst, r.seed);
        self.episodes += 1;
        let msg = obs_message(&world, id, world.reset_reward(), Vec::new());
        self.world = Some(world);
        if msg.done {
            return self.finish(msg.id, msg.reward);
        }
        serde_json::to_value(msg).map_err(|e| e.to_string())
    }

    fn step(&mut self, req: &Value, id: Option<Value>) -> Result<Value, String> {
        let r: StepRequest = serde_json::from_value(req.clone()).map_err(|e| format!("step: {e}"))?;
        let world = self.world.as_mut().ok_or("step before reset")?;
        let res = world.step(r.action).map_err(|e| e.to_string())?;
        if res.done {
            return self.finish(id, res.reward);
        }
        let world = self.world.as_ref().expect("live world");
        serde_json::to_value(obs_message(world, id, res.reward, res.info)).map_err(|e| e.to_string())
    }

    fn finish(&mut self, id: Option<Value>, reward: f64) -> Result<Value, String> {
        let mut world = self.world.take().expect("live world");
        let trace_path = self.write_trace(&mut world)?;
        let msg = EpisodeEndMessage {
            kind: "episode_end".into(),
            id,
            episode_step: world.episode_step(),
            reward,
            done: true,
            metrics: world.metrics(),
            trace_path: trace_path.map(|p| p.display().to_string()),
        };
        self.world = Some(world);
        serde_json::to_value(msg).map_err(|e| e.to_string())
    }

    fn write_trace(&self, world: &mut WorldState) -> Result<Option<PathBuf>, String> {
        let Some(dir) = &self.config.trace_dir else {
            return Ok(None);
        };
        let path = dir.join(format!(
            "session{}-episode{}-seed{}.trace.jsonl",
            self.session_id,
            self.episodes,
            world.master_seed()
        ));
        world.take_trace().write_file(&path).map_err(|e| e.to_string())?;
        Ok(Some(path))
    }

    fn replay(&mut self, req: &Value, id: Option<Value>) -> Result<Value, String> {
        let r: ReplayRequest = serde_json::from_value(req.clone()).map_err(|e| format!("replay: {e}"))?;
        let trace = match (&r.trace_inline, &r.trace_path) {
            (Some(text), _) => Trace::from_jsonl(text).map_err(|e| e.to_string())?,
            (None, Some(p)) => Trace::read_file(p).map_err(|e| e.to_string())?,
            (None, None) => return Err("replay: give trace_inline or trace_path".into()),
        };
        let inst = match self.resolve(&r.source)? {
            Some(i) => i,
            None => self.instance.clone().ok_or("replay: no instance given and no server default")?,
        };
        let report = replay(&trace, inst).map_err(|e| e.to_string())?;
        let mut v = json!({ "type": "replay", "clean": report.is_clean(), "report": report });
        if let Some(id) = id {
            v["id"] = id;
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn session() -> Session {
        Session::new(Arc::new(ServerConfig::default()), 0)
    }

    #[test]
    fn hello_reports_protocol_and_size() {
        let mut s = session();
        let v = s.handle_line(r#"{"type":"hello","id":7,"instance_name":"T1"}"#);
        assert_eq!(v["type"], "hello");
        assert_eq!(v["protocol"], PROTOCOL);
        assert_eq!(v["fixed_size"], 15);
        assert_eq!(v["id"], 7);
    }

    #[test]
    fn reset_then_step_to_the_end() {
        let mut s = session();
        let v = s.handle_line(r#"{"type":"reset","seed":42,"instance_name":"T1-deterministic"}"#);
        assert_eq!(v["type"], "obs");
        assert_eq!(v["active_truck"], 0);
        assert_eq!(v["done"], false);
        assert_eq!(v["actions"]["mask"].as_array().unwrap().len(), 15);
        let v = s.handle_line(r#"{"type":"step","action":1,"id":"a"}"#);
        assert_eq!(v["type"], "obs");
        assert_eq!(v["id"], "a");
        let v = s.handle_line(r#"{"type":"step","action":2}"#);
        assert_eq!(v["type"], "episode_end");
        assert_eq!(v["metrics"]["success"], true);
        assert_eq!(v["done"], true);
    }

    #[test]
    fn errors_keep_session_alive() {
        let mut s = session();
        assert_eq!(s.handle_line("not json")["type"], "error");
        assert_eq!(s.handle_line(r#"{"type":"step","action":0,"id":1}"#)["id"], 1);
        s.handle_line(r#"{"type":"reset","seed":1,"instance_name":"T1"}"#);
        let v = s.handle_line(r#"{"type":"step","action":99,"id":3}"#);
        assert_eq!(v["type"], "error");
        assert_eq!(v["id"], 3);
        assert_eq!(s.handle_line(r#"{"type":"step","action":1}"#)["type"], "obs");
        assert_eq!(s.handle_line(r#"{"type":"warp"}"#)["type"], "error");
        assert_eq!(s.handle_line(r#"{"type":"reset","seed":1,"instance_name":"nope"}"#)["type"], "error");
    }

    #[test]
    fn replay_of_a_finished_episode() {
        let dir = tempfile::tempdir().unwrap();
        let config =
            ServerConfig { default_instance: Some(Arc::new(fixtures::t1())), trace_dir: Some(dir.path().into()) };
        let mut s = Session::new(Arc::new(config), 0);
        s.handle_line(r#"{"type":"reset","seed":5}"#);
        s.handle_line(r#"{"type":"step","action":1}"#);
        let end = s.handle_line(r#"{"type":"step","action":2}"#);
        let path = end["trace_path"].as_str().unwrap().to_string();
        let v = s.handle_line(&json!({"type":"replay","trace_path":path}).to_string());
        assert_eq!(v["type"], "replay");
        assert_eq!(v["clean"], true);
    }
}
