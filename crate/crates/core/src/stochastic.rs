//! Seeded, substream-separated random models for travel time, energy
//! coefficient and unloading duration.
//!
//! Every random number is a pure function of `(master_seed, stream, lane,
//! draw_index)`. The generator is SplitMix64 evaluated at an explicit
//! counter, so any draw can be recomputed without replaying the draws
//! before it:
//!
//! ```text
//! key(stream, lane) = mix(mix(master_seed) ^ fnv1a(stream_name) ^ lane * 0x9E3779B97F4A7C15)
//! word(i, k)        = mix(key + (2 i + k + 1) * 0x9E3779B97F4A7C15)        k in {0, 1}
//! uniform(i)        = (word(i, 0) >> 11) * 2^-53
//! normal(i)         = sqrt(-2 ln(1 - u0)) * cos(2 pi u1)     (Box-Muller on word(i,0), word(i,1))
//! ```
//!
//! `mix` is the SplitMix64 finaliser. Each truck owns its own lane of the
//! travel, energy and unloading streams, which keeps exogenous draws aligned
//! per truck when different policies are evaluated on the same seed.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::digest::fnv1a64;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Named substreams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamKind {
    Travel,
    Energy,
    Unloading,
    Tiebreak,
    Generator,
    Policy,
}

impl StreamKind {
    pub fn name(self) -> &'static str {
        match self {
            StreamKind::Travel => "travel",
            StreamKind::Energy => "energy",
            StreamKind::Unloading => "unloading",
            StreamKind::Tiebreak => "tiebreak",
            StreamKind::Generator => "generator",
            StreamKind::Policy => "policy",
        }
    }
}

/// A substream address: stream name plus lane (the truck id for
/// per-truck streams, 0 otherwise).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StreamId {
    pub kind: StreamKind,
    pub lane: u32,
}

impl StreamId {
    pub const fn new(kind: StreamKind, lane: u32) -> Self {
        Self { kind, lane }
    }
}

/// One realized random draw as recorded in traces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub stream: StreamKind,
    pub lane: u32,
    pub index: u64,
    pub value: f64,
}

#[derive(Debug, Clone)]
enum DrawSource {
    Live,
    Injected(HashMap<(StreamId, u64), f64>),
}

/// Counter-based random streams owned by one episode.
#[derive(Debug, Clone)]
pub struct RandomStreams {
    master_seed: u64,
    counters: BTreeMap<StreamId, u64>,
    source: DrawSource,
    record: bool,
    log: Vec<Draw>,
    missing_injections: u64,
}

impl RandomStreams {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            counters: BTreeMap::new(),
            source: DrawSource::Live,
            record: false,
            log: Vec::new(),
            missing_injections: 0,
        }
    }

    /// Streams that return previously recorded values instead of generating
    /// them. Draws absent from the recording fall back to live generation and
    /// are counted in [`RandomStreams::missing_injections`].
    pub fn injected(master_seed: u64, draws: impl IntoIterator<Item = Draw>) -> Self {
        let map = draws.into_iter().map(|d| ((StreamId::new(d.stream, d.lane), d.index), d.value)).collect();
        Self { source: DrawSource::Injected(map), ..Self::new(master_seed) }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Turns draw logging on or off.
    pub fn set_recording(&mut self, on: bool) {
        self.record = on;
    }

    /// Removes and returns the draws logged since the last call.
    pub fn take_log(&mut self) -> Vec<Draw> {
        std::mem::take(&mut self.log)
    }

    pub fn missing_injections(&self) -> u64 {
        self.missing_injections
    }

    /// Number of draws consumed so far on `id`.
    pub fn position(&self, id: StreamId) -> u64 {
        self.counters.get(&id).copied().unwrap_or(0)
    }

    fn key(&self, id: StreamId) -> u64 {
        mix64(mix64(self.master_seed) ^ fnv1a64(id.kind.name().as_bytes()) ^ u64::from(id.lane).wrapping_mul(GOLDEN))
    }

    fn word(&self, id: StreamId, index: u64, k: u64) -> u64 {
        let ctr = index.wrapping_mul(2).wrapping_add(k).wrapping_add(1);
        mix64(self.key(id).wrapping_add(ctr.wrapping_mul(GOLDEN)))
    }

    fn unit(word: u64) -> f64 {
        (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform value at an explicit index, in `[0, 1)`. Pure.
    pub fn uniform_at(&self, id: StreamId, index: u64) -> f64 {
        Self::unit(self.word(id, index, 0))
    }

    /// Standard normal value at an explicit index. Pure.
    pub fn normal_at(&self, id: StreamId, index: u64) -> f64 {
        let u0 = Self::unit(self.word(id, index, 0));
        let u1 = Self::unit(self.word(id, index, 1));
        (-2.0 * (1.0 - u0).ln()).sqrt() * (std::f64::consts::TAU * u1).cos()
    }

    fn next(&mut self, id: StreamId, live: impl Fn(&Self, u64) -> f64) -> f64 {
        let counter = self.counters.entry(id).or_insert(0);
        let index = *counter;
        *counter += 1;
        let value = match &self.source {
            DrawSource::Live => live(self, index),
            DrawSource::Injected(map) => match map.get(&(id, index)) {
                Some(v) => *v,
                None => {
                    self.missing_injections += 1;
                    live(self, index)
                }
            },
        };
        if self.record {
            self.log.push(Draw { stream: id.kind, lane: id.lane, index, value });
        }
        value
    }

    /// Next uniform draw in `[0, 1)` on `id`.
    pub fn uniform(&mut self, id: StreamId) -> f64 {
        self.next(id, |s, i| s.uniform_at(id, i))
    }

    /// Next standard normal draw on `id`.
    pub fn normal(&mut self, id: StreamId) -> f64 {
        self.next(id, |s, i| s.normal_at(id, i))
    }

    /// Uniform integer in `0..n` (n > 0).
    pub fn below(&mut self, id: StreamId, n: usize) -> usize {
        assert!(n > 0, "below() needs a non-empty range");
        ((self.uniform(id) * n as f64) as usize).min(n - 1)
    }
}

/// Unloading duration model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum UnloadingModel {
    Fixed { hours: f64 },
    Gaussian { mean: f64, std: f64, clip: (f64, f64) },
}

impl UnloadingModel {
    /// Value used by nominal planning and deterministic mode.
    pub fn nominal(&self) -> f64 {
        match *self {
            UnloadingModel::Fixed { hours } => hours,
            UnloadingModel::Gaussian { mean, .. } => mean,
        }
    }
}

/// Exogenous uncertainty configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticParams {
    pub travel_std_factor: f64,
    pub rush_multiplier: f64,
    pub rush_windows: Vec<(f64, f64)>,
    pub travel_clip: (f64, f64),
    pub energy_clip: (f64, f64),
    pub energy_noise_std: f64,
    pub unloading: UnloadingModel,
    pub deterministic: bool,
}

impl Default for StochasticParams {
    fn default() -> Self {
        Self {
            travel_std_factor: 0.15,
            rush_multiplier: 2.0,
            rush_windows: vec![(7.0, 9.0), (16.0, 19.0)],
            travel_clip: (0.5, 2.0),
            energy_clip: (0.90, 1.20),
            energy_noise_std: 0.02,
            unloading: UnloadingModel::Fixed { hours: 0.2 },
            deterministic: false,
        }
    }
}

impl StochasticParams {
    /// Fully deterministic variant of the defaults.
    pub fn deterministic() -> Self {
        Self { deterministic: true, ..Self::default() }
    }

    /// Human-readable invariant violations, empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.travel_std_factor >= 0.0) {
            out.push("stochastic.travel_std_factor must be >= 0".into());
        }
        if !(self.rush_multiplier >= 0.0) {
            out.push("stochastic.rush_multiplier must be >= 0".into());
        }
        for (k, &(a, b)) in self.rush_windows.iter().enumerate() {
            if !(a.is_finite() && b.is_finite() && a <= b) {
                out.push(format!("stochastic.rush_windows[{k}] must satisfy start <= end"));
            }
        }
        let (lo, hi) = self.travel_clip;
        if !(lo > 0.0 && lo <= 1.0 && hi >= 1.0) {
            out.push("stochastic.travel_clip must satisfy 0 < low <= 1 <= high".into());
        }
        let (xl, xh) = self.energy_clip;
        if !(xl <= 1.0 && 1.0 <= xh && xl > 0.0) {
            out.push("stochastic.energy_clip must satisfy 0 < xi_low <= 1 <= xi_high".into());
        }
        if !(self.energy_noise_std >= 0.0) {
            out.push("stochastic.energy_noise_std must be >= 0".into());
        }
        match self.unloading {
            UnloadingModel::Fixed { hours } if !(hours >= 0.0) => {
                out.push("stochastic.unloading.hours must be >= 0".into())
            }
            UnloadingModel::Gaussian { mean, std, clip } => {
                if !(std >= 0.0 && clip.0 >= 0.0 && clip.0 <= mean && mean <= clip.1) {
                    out.push("stochastic.unloading must satisfy 0 <= low <= mean <= high, std >= 0".into());
                }
            }
            _ => {}
        }
        out
    }
}

/// Fraction of `[depart, depart + duration]` covered by the daily rush
/// windows, with windows repeating every 24 hours.
pub fn rush_overlap_fraction(depart_hour_of_day: f64, nominal_duration: f64, windows: &[(f64, f64)]) -> f64 {
    if !(nominal_duration > 0.0) {
        return 0.0;
    }
    let start = depart_hour_of_day;
    let end = start + nominal_duration;
    let first_day = (start / 24.0).floor() as i64 - 1;
    let last_day = (end / 24.0).ceil() as i64;
    let mut covered = 0.0;
    for day in first_day..=last_day {
        let offset = day as f64 * 24.0;
        for &(a, b) in windows {
            let lo = (a + offset).max(start);
            let hi = (b + offset).min(end);
            if hi > lo {
                covered += hi - lo;
            }
        }
    }
    (covered / nominal_duration).clamp(0.0, 1.0)
}

/// Realized travel time for a leg departing at absolute time `depart_time`.
///
/// Gaussian around the nominal value with a rush-dependent standard
/// deviation, clipped to `travel_clip` multiples of the nominal time.
pub fn sample_travel_time(
    tau_nominal: f64,
    depart_time: f64,
    params: &StochasticParams,
    streams: &mut RandomStreams,
    lane: u32,
) -> f64 {
    if params.deterministic || tau_nominal <= 0.0 || params.travel_std_factor == 0.0 {
        return tau_nominal;
    }
    let overlap = rush_overlap_fraction(depart_time.rem_euclid(24.0), tau_nominal, &params.rush_windows);
    let sigma = tau_nominal * params.travel_std_factor * (1.0 + (params.rush_multiplier - 1.0) * overlap);
    let z = streams.normal(StreamId::new(StreamKind::Travel, lane));
    let (lo, hi) = params.travel_clip;
    (tau_nominal + sigma * z).clamp(lo * tau_nominal, hi * tau_nominal)
}

/// Traffic-correlated energy coefficient, clipped to `energy_clip`.
pub fn sample_energy_coeff(
    realized_tau: f64,
    nominal_tau: f64,
    params: &StochasticParams,
    streams: &mut RandomStreams,
    lane: u32,
) -> f64 {
    if params.deterministic || nominal_tau <= 0.0 {
        return 1.0;
    }
    let eps = if params.energy_noise_std > 0.0 {
        params.energy_noise_std * streams.normal(StreamId::new(StreamKind::Energy, lane))
    } else {
        0.0
    };
    let (lo, hi) = params.energy_clip;
    (1.0 + 0.5 * (realized_tau / nominal_tau - 1.0) + eps).clamp(lo, hi)
}

/// Realized unloading duration.
pub fn sample_unloading(params: &StochasticParams, streams: &mut RandomStreams, lane: u32) -> f64 {
    match params.unloading {
        UnloadingModel::Fixed { hours } => hours,
        UnloadingModel::Gaussian { mean, .. } if params.deterministic => mean,
        UnloadingModel::Gaussian { mean, std, clip } => {
            if std == 0.0 {
                return mean;
            }
            let z = streams.normal(StreamId::new(StreamKind::Unloading, lane));
            (mean + std * z).clamp(clip.0, clip.1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    const TRAVEL: StreamId = StreamId::new(StreamKind::Travel, 0);

    #[test]
    fn overlap_examples() {
        let w = [(7.0, 9.0)];
        assert_eq!(rush_overlap_fraction(7.0, 1.0, &w), 1.0);
        assert_eq!(rush_overlap_fraction(6.5, 1.0, &w), 0.5);
        assert_eq!(rush_overlap_fraction(10.0, 2.0, &[(7.0, 9.0), (16.0, 19.0)]), 0.0);
    }

    #[test]
    fn overlap_wraps_midnight() {
        // 23:00 for 9 hours covers 07:00-08:00 of the next day.
        let f = rush_overlap_fraction(23.0, 9.0, &[(7.0, 9.0)]);
        assert!((f - 1.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_and_zero_variance_return_nominal() {
        let mut s = RandomStreams::new(1);
        let det = StochasticParams::deterministic();
        assert_eq!(sample_travel_time(2.0, 0.0, &det, &mut s, 0), 2.0);
        let flat = StochasticParams { travel_std_factor: 0.0, ..Default::default() };
        assert_eq!(sample_travel_time(3.5, 8.0, &flat, &mut s, 0), 3.5);
        assert_eq!(s.position(TRAVEL), 0);
    }

    #[test]
    fn energy_coeff_examples() {
        let mut s = RandomStreams::new(3);
        let p = StochasticParams { energy_noise_std: 0.0, ..Default::default() };
        assert_eq!(sample_energy_coeff(1.0, 1.0, &p, &mut s, 0), 1.0);
        assert_eq!(sample_energy_coeff(1.4, 1.0, &p, &mut s, 0), 1.20);
        assert_eq!(sample_energy_coeff(0.5, 1.0, &p, &mut s, 0), 0.90);
        let det = StochasticParams::deterministic();
        assert_eq!(sample_energy_coeff(1.9, 1.0, &det, &mut s, 0), 1.0);
    }

    #[test]
    fn unloading_examples() {
        let mut s = RandomStreams::new(5);
        let fixed = StochasticParams::default();
        assert_eq!(sample_unloading(&fixed, &mut s, 0), 0.2);
        let g = StochasticParams {
            unloading: UnloadingModel::Gaussian { mean: 0.2, std: 0.1, clip: (0.05, 0.6) },
            ..Default::default()
        };
        for _ in 0..2000 {
            let q = sample_unloading(&g, &mut s, 0);
            assert!((0.05..=0.6).contains(&q));
        }
        let gd = StochasticParams { deterministic: true, ..g };
        assert_eq!(sample_unloading(&gd, &mut s, 0), 0.2);
    }

    /// Clipped Gaussian moments checked against an independent sampler.
    #[test]
    fn travel_time_moments_match_independent_sampler() {
        let p = StochasticParams { rush_windows: vec![], ..Default::default() };
        let n = 100_000;
        let mut s = RandomStreams::new(2024);
        let ours: Vec<f64> = (0..n).map(|_| sample_travel_time(1.0, 12.0, &p, &mut s, 0)).collect();

        let mut rng = rand::rngs::StdRng::seed_from_u64(99);
        let normal = Normal::new(1.0f64, 0.15).unwrap();
        let reference: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng).clamp(0.5, 2.0)).collect();

        let stats = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
            (m, var.sqrt())
        };
        let (m, sd) = stats(&ours);
        let (rm, rsd) = stats(&reference);
        assert!((m - 1.0).abs() < 0.01, "mean {m}");
        assert!((0.13..=0.16).contains(&sd), "std {sd}");
        assert!((m - rm).abs() < 0.005 && (sd - rsd).abs() < 0.005);
        assert!(ours.iter().all(|x| (0.5..=2.0).contains(x)));
    }

    #[test]
    fn draws_are_addressable_by_index() {
        let mut a = RandomStreams::new(42);
        let seq: Vec<f64> = (0..5).map(|_| a.normal(TRAVEL)).collect();
        let b = RandomStreams::new(42);
        for (i, v) in seq.iter().enumerate() {
            assert_eq!(*v, b.normal_at(TRAVEL, i as u64));
        }
    }

    #[test]
    fn substreams_are_separated() {
        let s = RandomStreams::new(42);
        let other = StreamId::new(StreamKind::Energy, 0);
        let lane1 = StreamId::new(StreamKind::Travel, 1);
        assert_ne!(s.uniform_at(TRAVEL, 0), s.uniform_at(other, 0));
        assert_ne!(s.uniform_at(TRAVEL, 0), s.uniform_at(lane1, 0));
        assert_ne!(s.uniform_at(TRAVEL, 0), RandomStreams::new(43).uniform_at(TRAVEL, 0));
    }

    #[test]
    fn injection_replays_recorded_values() {
        let mut live = RandomStreams::new(7);
        live.set_recording(true);
        let xs: Vec<f64> = (0..4).map(|_| live.normal(TRAVEL)).collect();
        let log = live.take_log();
        let tampered: Vec<Draw> = log.iter().map(|d| Draw { value: d.value + 1.0, ..*d }).collect();
        let mut inj = RandomStreams::injected(7, tampered);
        let ys: Vec<f64> = (0..4).map(|_| inj.normal(TRAVEL)).collect();
        for (x, y) in xs.iter().zip(&ys) {
            assert_eq!(*x + 1.0, *y);
        }
        assert_eq!(inj.missing_injections(), 0);
        inj.normal(TRAVEL);
        assert_eq!(inj.missing_injections(), 1);
    }

    #[test]
    fn uniform_in_unit_interval_and_below_in_range() {
        let mut s = RandomStreams::new(0);
        let id = StreamId::new(StreamKind::Tiebreak, 0);
        for _ in 0..10_000 {
            let u = s.uniform(id);
            assert!((0.0..1.0).contains(&u));
            assert!(s.below(id, 3) < 3);
        }
    }
}
