use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use super::{DeliveryMode, NetworkInstance, TruckSpec};

/// Outcome of the conservative energy reachability check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeasibilityReport {
    pub feasible: bool,
    /// Recharge stops of a minimum-stop plan, as `(deliveries completed
    /// before the stop, station index)`.
    pub required_stops: Vec<(usize, usize)>,
}

#[derive(Clone, Copy)]
struct Label {
    node: usize,
    /// Bitmask of remaining delivery slots.
    remaining: u64,
    battery: f64,
    stops: usize,
    parent: Option<usize>,
    /// Station index when this label was created by a recharge stop.
    station: Option<usize>,
}

struct Queued {
    stops: usize,
    battery: f64,
    seq: usize,
    label: usize,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    // Max-heap: fewest stops first, then most battery, then FIFO.
    fn cmp(&self, other: &Self) -> Ordering {
        other.stops.cmp(&self.stops).then(self.battery.total_cmp(&other.battery)).then(other.seq.cmp(&self.seq))
    }
}

/// Decides whether `truck` can serve its deliveries from its start node with
/// its initial battery when every leg `(u, v)` must satisfy
/// `alpha * energy[u][v] < battery - floor`, consumption is charged at
/// `alpha * energy[u][v]`, and any charger restores a full battery.
pub fn validate_assignment(inst: &NetworkInstance, truck: &TruckSpec) -> FeasibilityReport {
    let alpha = inst.config.alpha;
    let k = truck.deliveries.len();
    let all: u64 = if k >= 64 { u64::MAX } else { (1u64 << k) - 1 };
    let usable = |battery: f64| battery - truck.battery_floor;

    let mut arena: Vec<Label> = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut settled: BTreeMap<(usize, u64), Vec<f64>> = BTreeMap::new();
    let push = |arena: &mut Vec<Label>, heap: &mut BinaryHeap<Queued>, l: Label| {
        arena.push(l);
        let idx = arena.len() - 1;
        heap.push(Queued { stops: l.stops, battery: l.battery, seq: idx, label: idx });
    };

    push(
        &mut arena,
        &mut heap,
        Label {
            node: truck.start_node,
            remaining: all,
            battery: truck.initial_battery,
            stops: 0,
            parent: None,
            station: None,
        },
    );

    while let Some(q) = heap.pop() {
        let cur = arena[q.label];
        let closed = settled.entry((cur.node, cur.remaining)).or_default();
        if closed.iter().any(|&b| b >= cur.battery) {
            continue;
        }
        closed.push(cur.battery);

        if cur.remaining == 0 {
            let mut stops = Vec::new();
            let mut at = Some(q.label);
            while let Some(i) = at {
                let l = arena[i];
                if let Some(st) = l.station {
                    stops.push((k - l.remaining.count_ones() as usize, st));
                }
                at = l.parent;
            }
            stops.reverse();
            return FeasibilityReport { feasible: true, required_stops: stops };
        }

        let targets: Vec<usize> = match truck.mode {
            DeliveryMode::Sequential => vec![cur.remaining.trailing_zeros() as usize],
            DeliveryMode::Flexible => (0..k).filter(|s| cur.remaining & (1 << s) != 0).collect(),
        };
        for slot in targets {
            let d = truck.deliveries[slot];
            let need = alpha * inst.energy(cur.node, d);
            if need < usable(cur.battery) {
                push(
                    &mut arena,
                    &mut heap,
                    Label {
                        node: d,
                        remaining: cur.remaining & !(1 << slot),
                        battery: cur.battery - need,
                        stops: cur.stops,
                        parent: Some(q.label),
                        station: None,
                    },
                );
            }
        }
        for (st, c) in inst.chargers.iter().enumerate() {
            let here = c.node == cur.node;
            let need = if here { 0.0 } else { alpha * inst.energy(cur.node, c.node) };
            if (here && cur.battery < truck.battery_capacity) || (!here && need < usable(cur.battery)) {
                push(
                    &mut arena,
                    &mut heap,
                    Label {
                        node: c.node,
                        remaining: cur.remaining,
                        battery: truck.battery_capacity,
                        stops: cur.stops + 1,
                        parent: Some(q.label),
                        station: Some(st),
                    },
                );
            }
        }
    }
    FeasibilityReport { feasible: false, required_stops: Vec::new() }
}
