//! Batch evaluation of policies over seeded scenarios, benchmark reports
//! and CSV export.
//!
//! Scenario `k` of a batch with base seed `S` uses episode seed `S + k`
//! (and, for generated scenarios, the instance generated from `S + k`).
//! Every policy in a benchmark sees the same scenarios, and since random
//! draws are indexed per stream, lane and draw number, the same exogenous
//! realizations.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{run_episode, EpisodeError, EpisodeMetrics, Policy};
use crate::envserver::ExternPolicy;
use crate::netmodel::{generate_instance, GeneratorParams, InstanceError, NetworkInstance};
use crate::planners::{HeuristicPolicy, PlannerPolicy, RandomPolicy};
use crate::trace::Trace;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PolicySpec {
    Heuristic,
    Planner,
    Random,
    RandomUnmasked,
    /// External agent at a TCP address.
    Extern(String),
}

impl FromStr for PolicySpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "heuristic" => Ok(Self::Heuristic),
            "planner" => Ok(Self::Planner),
            "random" => Ok(Self::Random),
            "random-unmasked" => Ok(Self::RandomUnmasked),
            _ => match s.strip_prefix("extern:") {
                Some(addr) if !addr.is_empty() => Ok(Self::Extern(addr.to_string())),
                _ => Err(format!(
                    "unknown policy `{s}` (expected heuristic, planner, random, random-unmasked or extern:ADDR)"
                )),
            },
        }
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Heuristic => f.write_str("heuristic"),
            Self::Planner => f.write_str("planner"),
            Self::Random => f.write_str("random"),
            Self::RandomUnmasked => f.write_str("random-unmasked"),
            Self::Extern(a) => write!(f, "extern:{a}"),
        }
    }
}

impl PolicySpec {
    pub fn build(&self) -> io::Result<Box<dyn Policy + Send>> {
        Ok(match self {
            Self::Heuristic => Box::new(HeuristicPolicy),
            Self::Planner => Box::new(PlannerPolicy::default()),
            Self::Random => Box::new(RandomPolicy::masked()),
            Self::RandomUnmasked => Box::new(RandomPolicy::unmasked()),
            Self::Extern(addr) => Box::new(ExternPolicy::connect(addr)?),
        })
    }

    fn parallel(&self) -> bool {
        !matches!(self, Self::Extern(_))
    }
}

/// Where scenario instances come from.
#[derive(Debug, Clone)]
pub enum ScenarioSource {
    /// One instance, re-seeded per scenario.
    Fixed(Arc<NetworkInstance>),
    /// A fresh instance per scenario, generated from the scenario seed.
    Generated(GeneratorParams),
}

impl ScenarioSource {
    pub fn instance(&self, seed: u64) -> Result<Arc<NetworkInstance>, InstanceError> {
        match self {
            Self::Fixed(inst) => Ok(inst.clone()),
            Self::Generated(p) => generate_instance(p, seed).map(Arc::new),
        }
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("scenario {scenario}: {source}")]
    Instance { scenario: usize, source: InstanceError },
    #[error("policy {policy}: {source}")]
    Connect { policy: String, source: io::Error },
    #[error("scenario {scenario}, policy {policy}: {source}")]
    Episode { scenario: usize, policy: String, source: EpisodeError },
    #[error("a benchmark needs at least two policies")]
    TooFewPolicies,
}

#[derive(Debug, Clone)]
pub struct EpisodeRow {
    pub scenario: usize,
    pub seed: u64,
    pub policy: String,
    pub metrics: EpisodeMetrics,
    pub trace: Option<Trace>,
}

/// Runs `episodes` scenarios of one policy. Scenarios run in parallel
/// unless the policy is external.
pub fn evaluate(
    source: &ScenarioSource,
    policy: &PolicySpec,
    episodes: usize,
    seed: u64,
    record: bool,
) -> Result<Vec<EpisodeRow>, EvalError> {
    let one = |k: usize, built: Option<&mut Box<dyn Policy + Send>>| -> Result<EpisodeRow, EvalError> {
        let s = seed.wrapping_add(k as u64);
        let inst = source.instance(s).map_err(|e| EvalError::Instance { scenario: k, source: e })?;
        let mut own;
        let pol: &mut Box<dyn Policy + Send> = match built {
            Some(p) => p,
            None => {
                own = policy.build().map_err(|e| EvalError::Connect { policy: policy.to_string(), source: e })?;
                &mut own
            }
        };
        let out = run_episode(&inst, pol.as_mut(), s, record).map_err(|e| EvalError::Episode {
            scenario: k,
            policy: policy.to_string(),
            source: e,
        })?;
        Ok(EpisodeRow { scenario: k, seed: s, policy: policy.to_string(), metrics: out.metrics, trace: out.trace })
    };
    if policy.parallel() {
        (0..episodes).into_par_iter().map(|k| one(k, None)).collect()
    } else {
        if episodes == 0 {
            return Ok(Vec::new());
        }
        let mut p = policy.build().map_err(|e| EvalError::Connect { policy: policy.to_string(), source: e })?;
        (0..episodes).map(|k| one(k, Some(&mut p))).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub field: String,
    pub mean: f64,
    pub std: f64,
}

/// Mean and population standard deviation of every metric field.
pub fn summarize(rows: &[&EpisodeMetrics]) -> Vec<MetricStats> {
    let names: Vec<&str> = EpisodeMetrics::default().fields().into_iter().map(|(n, _)| n).collect();
    let n = rows.len() as f64;
    names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let xs: Vec<f64> = rows.iter().map(|m| m.fields()[j].1).collect();
            let (mean, std) = if xs.is_empty() {
                (0.0, 0.0)
            } else {
                let mean = xs.iter().sum::<f64>() / n;
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                (mean, var.sqrt())
            };
            MetricStats { field: (*name).to_string(), mean, std }
        })
        .collect()
}

/// Display rows named after the usual benchmark table: `(label, field,
/// scale)`; rates and state of charge are shown in percent.
pub const TABLE_ROWS: [(&str, &str, f64); 11] = [
    ("Reward (-)", "reward_total", 1.0),
    ("Success Rate (%)", "success", 100.0),
    ("Avg. Truck SoC at Finish (%)", "avg_finish_soc", 100.0),
    ("Total Deliveries (-)", "deliveries_completed", 1.0),
    ("Total Charging Sessions (-)", "charging_sessions", 1.0),
    ("Total Charging Time (H)", "charging_time_h", 1.0),
    ("Total Waiting Time (H)", "waiting_time_h", 1.0),
    ("Total Routing Time (H)", "routing_time_h", 1.0),
    ("Unloading Time (H)", "unloading_time_h", 1.0),
    ("Total Time (H)", "total_time_h", 1.0),
    ("Exec. Time (s)", "wall_clock_s", 1.0),
];

pub fn stat<'a>(stats: &'a [MetricStats], field: &str) -> &'a MetricStats {
    stats.iter().find(|s| s.field == field).expect("known metric field")
}

/// `label  mean ± std` lines for one policy.
pub fn format_table(stats: &[MetricStats]) -> String {
    let mut out = String::new();
    for (label, field, scale) in TABLE_ROWS {
        let s = stat(stats, field);
        out.push_str(&format!("{label:<30} {:>12.3} ± {:<10.3}\n", s.mean * scale, s.std * scale));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: String,
    pub stats: Vec<MetricStats>,
    /// Mean reward divided by the reference policy's mean reward.
    pub normalized_reward: Option<f64>,
    /// Scenarios where this policy's reward is strictly the largest.
    pub wins: usize,
    pub win_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub scenarios: usize,
    pub base_seed: u64,
    /// Normalization reference.
    pub reference: String,
    pub policies: Vec<PolicySummary>,
    /// Scenarios where the best reward is shared; no policy wins them.
    pub ties: Vec<usize>,
}

impl BenchReport {
    pub fn summary(&self, policy: &str) -> Option<&PolicySummary> {
        self.policies.iter().find(|p| p.policy == policy)
    }
}

/// Builds the report from per-episode rows grouped by policy, in `order`.
pub fn bench_report(
    rows: &[EpisodeRow],
    order: &[String],
    reference: &str,
    scenarios: usize,
    base_seed: u64,
) -> BenchReport {
    let mut wins = vec![0usize; order.len()];
    let mut ties = Vec::new();
    for k in 0..scenarios {
        let rewards: Vec<Option<f64>> = order
            .iter()
            .map(|p| rows.iter().find(|r| r.scenario == k && &r.policy == p).map(|r| r.metrics.reward_total))
            .collect();
        let Some(best) = rewards.iter().flatten().copied().max_by(f64::total_cmp) else {
            continue;
        };
        let at_best: Vec<usize> = (0..order.len()).filter(|&j| rewards[j] == Some(best)).collect();
        if at_best.len() == 1 {
            wins[at_best[0]] += 1;
        } else {
            ties.push(k);
        }
    }
    let stats: Vec<Vec<MetricStats>> = order
        .iter()
        .map(|p| summarize(&rows.iter().filter(|r| &r.policy == p).map(|r| &r.metrics).collect::<Vec<_>>()))
        .collect();
    let ref_mean = order.iter().position(|p| p == reference).map(|j| stat(&stats[j], "reward_total").mean);
    let policies = order
        .iter()
        .zip(stats)
        .zip(wins)
        .map(|((p, stats), w)| {
            let mean = stat(&stats, "reward_total").mean;
            PolicySummary {
                policy: p.clone(),
                normalized_reward: ref_mean.filter(|r| *r != 0.0).map(|r| mean / r),
                stats,
                wins: w,
                win_ratio: if scenarios == 0 { 0.0 } else { w as f64 / scenarios as f64 },
            }
        })
        .collect();
    BenchReport { scenarios, base_seed, reference: reference.to_string(), policies, ties }
}

/// Runs every policy on the same scenarios. The reference defaults to
/// `planner` when it is among the policies, else the first policy.
pub fn run_bench(
    source: &ScenarioSource,
    policies: &[PolicySpec],
    episodes: usize,
    seed: u64,
) -> Result<(BenchReport, Vec<EpisodeRow>), EvalError> {
    if policies.len() < 2 {
        return Err(EvalError::TooFewPolicies);
    }
    let mut rows = Vec::new();
    for p in policies {
        rows.extend(evaluate(source, p, episodes, seed, false)?);
    }
    let order: Vec<String> = policies.iter().map(ToString::to_string).collect();
    let reference = if order.iter().any(|p| p == "planner") { "planner".to_string() } else { order[0].clone() };
    Ok((bench_report(&rows, &order, &reference, episodes, seed), rows))
}

/// RFC 4180 CSV: `scenario_id, policy`, then every metric field.
pub fn write_csv(rows: &[EpisodeRow], writer: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["scenario_id".to_string(), "policy".to_string()];
    header.extend(EpisodeMetrics::default().fields().into_iter().map(|(n, _)| n.to_string()));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.scenario.to_string(), r.policy.clone()];
        rec.extend(r.metrics.fields().into_iter().map(|(_, v)| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a CSV written by [`write_csv`] back into `(scenario, policy,
/// fields)` rows.
pub fn read_csv(reader: impl io::Read) -> csv::Result<Vec<(usize, String, Vec<(String, f64)>)>> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let scenario = rec[0].parse().unwrap_or(usize::MAX);
        let fields = headers
            .iter()
            .zip(rec.iter())
            .skip(2)
            .map(|(h, v)| (h.to_string(), v.parse().unwrap_or(f64::NAN)))
            .collect();
        out.push((scenario, rec[1].to_string(), fields));
    }
    Ok(out)
}
