//! CCCV charging power, discrete energy integration and finite-capacity
//! stations with first-come, first-served queues.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netmodel::ChargerSpec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChargingError {
    #[error("state of charge {0} outside [0, 1]")]
    SocOutOfRange(f64),
    #[error("truck {0} already present at the station")]
    DuplicateArrival(usize),
    #[error("truck {0} does not occupy a port")]
    NotOccupant(usize),
}

/// Charging power (kW) at a given state of charge.
///
/// Piecewise profile: linear ramp to 0.9 p_max over [0, 0.10], slow rise to
/// p_max over (0.10, 0.50], flat over (0.50, 0.80], and a taper
/// `max(p_min, p_max (1 - 0.6 p^1.5))` with `p = (soc - 0.8) / 0.2` above 0.80.
pub fn cccv_power(soc: f64, p_max: f64, p_min: f64) -> Result<f64, ChargingError> {
    if !(0.0..=1.0).contains(&soc) {
        return Err(ChargingError::SocOutOfRange(soc));
    }
    let p = if soc <= 0.10 {
        p_max * (0.6 + 3.0 * soc)
    } else if soc <= 0.50 {
        p_max * (0.9 + 0.25 * (soc - 0.10))
    } else if soc <= 0.80 {
        p_max
    } else {
        let x = (5.0 * soc - 4.0).max(0.0);
        p_min.max(p_max - 0.6 * p_max * x.powf(1.5))
    };
    Ok(p)
}

/// Result of [`integrate_charge`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChargeOutcome {
    pub battery_after: f64,
    pub energy_added: f64,
}

/// Forward-rectangle integration of `b <- min(capacity, b + eta P(b / capacity) dt)`
/// over `duration` hours. A final partial step covers any remainder of
/// `duration` that is not a whole multiple of `dt`.
pub fn integrate_charge(
    battery: f64,
    capacity: f64,
    duration: f64,
    eta: f64,
    p_max: f64,
    p_min: f64,
    dt: f64,
) -> ChargeOutcome {
    assert!(dt > 0.0, "integration step must be positive");
    let start = battery.clamp(0.0, capacity);
    let mut b = start;
    if duration > 0.0 && capacity > 0.0 {
        let ratio = duration / dt;
        let mut full_steps = ratio.floor();
        if ratio - full_steps > 1.0 - 1e-9 {
            full_steps += 1.0;
        }
        let remainder = (duration - full_steps * dt).max(0.0);
        let step = |b: f64, h: f64| -> f64 {
            let soc = (b / capacity).clamp(0.0, 1.0);
            let p = cccv_power(soc, p_max, p_min).expect("soc clamped");
            (b + eta * p * h).min(capacity)
        };
        let mut k = 0u64;
        while (k as f64) < full_steps && b < capacity {
            b = step(b, dt);
            k += 1;
        }
        if remainder > 1e-12 && b < capacity {
            b = step(b, remainder);
        }
    }
    ChargeOutcome { battery_after: b, energy_added: b - start }
}

/// A truck waiting for a port.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueuedTruck {
    pub truck: usize,
    pub arrival: f64,
    pub requested_duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Occupant {
    pub truck: usize,
    pub session_end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdmitOutcome {
    Started {
        at: f64,
    },
    /// 1-based position in the queue.
    Queued {
        position: usize,
    },
}

/// A truck admitted from the queue when a port was released.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Admission {
    pub truck: usize,
    pub start_time: f64,
    pub arrival: f64,
    pub waited: f64,
    pub duration: f64,
}

/// Runtime state of one charging station.
#[derive(Debug, Clone, PartialEq)]
pub struct StationState {
    pub spec: ChargerSpec,
    occupants: Vec<Occupant>,
    queue: VecDeque<QueuedTruck>,
}

impl StationState {
    pub fn new(spec: ChargerSpec) -> Self {
        Self { spec, occupants: Vec::new(), queue: VecDeque::new() }
    }

    pub fn occupants(&self) -> &[Occupant] {
        &self.occupants
    }

    pub fn queue(&self) -> &VecDeque<QueuedTruck> {
        &self.queue
    }

    pub fn ports(&self) -> usize {
        self.spec.ports as usize
    }

    pub fn has_free_port(&self) -> bool {
        self.occupants.len() < self.ports()
    }

    /// Earliest scheduled session end among occupants.
    pub fn earliest_release(&self) -> Option<f64> {
        self.occupants.iter().map(|o| o.session_end).min_by(f64::total_cmp)
    }

    fn contains(&self, truck: usize) -> bool {
        self.occupants.iter().any(|o| o.truck == truck) || self.queue.iter().any(|q| q.truck == truck)
    }

    /// A truck requests a session of `duration` hours at time `t`.
    pub fn arrive(&mut self, truck: usize, t: f64, duration: f64) -> Result<AdmitOutcome, ChargingError> {
        if self.contains(truck) {
            return Err(ChargingError::DuplicateArrival(truck));
        }
        if self.has_free_port() {
            self.occupants.push(Occupant { truck, session_end: t + duration });
            Ok(AdmitOutcome::Started { at: t })
        } else {
            self.queue.push_back(QueuedTruck { truck, arrival: t, requested_duration: duration });
            Ok(AdmitOutcome::Queued { position: self.queue.len() })
        }
    }

    /// Frees the port held by `truck` and admits the head of the queue.
    pub fn release(&mut self, truck: usize, t: f64) -> Result<Option<Admission>, ChargingError> {
        let pos = self.occupants.iter().position(|o| o.truck == truck).ok_or(ChargingError::NotOccupant(truck))?;
        self.occupants.remove(pos);
        Ok(self.queue.pop_front().map(|q| {
            self.occupants.push(Occupant { truck: q.truck, session_end: t + q.requested_duration });
            Admission {
                truck: q.truck,
                start_time: t,
                arrival: q.arrival,
                waited: t - q.arrival,
                duration: q.requested_duration,
            }
        }))
    }

    /// Port-capacity and queue-discipline invariants.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.occupants.len() > self.ports() {
            return Err(format!("{} occupants exceed {} ports", self.occupants.len(), self.ports()));
        }
        if !self.queue.is_empty() && self.occupants.len() < self.ports() {
            return Err("queue is non-empty while a port is free".into());
        }
        if self.queue.iter().zip(self.queue.iter().skip(1)).any(|(a, b)| a.arrival > b.arrival) {
            return Err("queue is not in arrival order".into());
        }
        Ok(())
    }
}
