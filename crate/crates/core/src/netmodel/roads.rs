//! Raw road-graph ingestion: all-POI shortest paths fill the nominal
//! matrices.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::InstanceError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadEdge {
    pub from: usize,
    pub to: usize,
    pub time_h: f64,
    pub energy_kwh: f64,
}

/// Directed road graph with nonnegative edge weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadGraph {
    pub n_vertices: usize,
    pub edges: Vec<RoadEdge>,
}

#[derive(Clone, Copy, PartialEq)]
struct Dist(f64);

impl Eq for Dist {}
impl PartialOrd for Dist {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Dist {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl RoadGraph {
    fn adjacency(&self) -> Vec<Vec<(usize, f64, f64)>> {
        let mut adj = vec![Vec::new(); self.n_vertices];
        for e in &self.edges {
            adj[e.from].push((e.to, e.time_h, e.energy_kwh));
        }
        adj
    }

    /// Fastest-path times from `source` and the energy along those paths.
    /// Unreachable vertices get `f64::INFINITY`.
    pub fn shortest_from(&self, source: usize) -> (Vec<f64>, Vec<f64>) {
        let adj = self.adjacency();
        let mut time = vec![f64::INFINITY; self.n_vertices];
        let mut energy = vec![f64::INFINITY; self.n_vertices];
        let mut heap = BinaryHeap::new();
        time[source] = 0.0;
        energy[source] = 0.0;
        heap.push(Reverse((Dist(0.0), Dist(0.0), source)));
        while let Some(Reverse((Dist(t), Dist(e), u))) = heap.pop() {
            if t > time[u] || (t == time[u] && e > energy[u]) {
                continue;
            }
            for &(v, dt, de) in &adj[u] {
                let (nt, ne) = (t + dt, e + de);
                if nt < time[v] || (nt == time[v] && ne < energy[v]) {
                    time[v] = nt;
                    energy[v] = ne;
                    heap.push(Reverse((Dist(nt), Dist(ne), v)));
                }
            }
        }
        (time, energy)
    }
}

/// Nominal `(tau, energy)` matrices between `pois` (road vertex ids, in
/// instance node order). Ties in travel time prefer the lower-energy path.
pub fn matrices_from_road_graph(
    graph: &RoadGraph,
    pois: &[usize],
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>), InstanceError> {
    let mut bad = Vec::new();
    for (k, e) in graph.edges.iter().enumerate() {
        if e.from >= graph.n_vertices || e.to >= graph.n_vertices {
            bad.push(format!("road edge {k} references a missing vertex"));
        }
        if !(e.time_h >= 0.0 && e.energy_kwh >= 0.0) {
            bad.push(format!("road edge {k} has a negative cost"));
        }
    }
    for &p in pois {
        if p >= graph.n_vertices {
            bad.push(format!("POI vertex {p} is not in the road graph"));
        }
    }
    if !bad.is_empty() {
        return Err(InstanceError::Validation(bad));
    }
    let mut tau = Vec::with_capacity(pois.len());
    let mut energy = Vec::with_capacity(pois.len());
    for &src in pois {
        let (t, e) = graph.shortest_from(src);
        let (mut trow, mut erow) = (Vec::new(), Vec::new());
        for &dst in pois {
            if !t[dst].is_finite() {
                return Err(InstanceError::Validation(vec![format!("POI {dst} unreachable from POI {src}")]));
            }
            trow.push(super::round_sig9(t[dst]));
            erow.push(super::round_sig9(e[dst]));
        }
        tau.push(trow);
        energy.push(erow);
    }
    Ok((tau, energy))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge(from: usize, to: usize, t: f64, e: f64) -> RoadEdge {
        RoadEdge { from, to, time_h: t, energy_kwh: e }
    }

    #[test]
    fn asymmetric_paths() {
        // 0 -> 1 direct is slow, via 2 is fast; 1 -> 0 direct only.
        let g = RoadGraph {
            n_vertices: 3,
            edges: vec![edge(0, 1, 5.0, 50.0), edge(0, 2, 1.0, 10.0), edge(2, 1, 1.0, 12.0), edge(1, 0, 3.0, 20.0)],
        };
        let (tau, energy) = matrices_from_road_graph(&g, &[0, 1]).unwrap();
        assert_eq!(tau, vec![vec![0.0, 2.0], vec![3.0, 0.0]]);
        assert_eq!(energy, vec![vec![0.0, 22.0], vec![20.0, 0.0]]);
    }

    #[test]
    fn unreachable_poi_is_an_error() {
        let g = RoadGraph { n_vertices: 2, edges: vec![edge(0, 1, 1.0, 1.0)] };
        assert!(matrices_from_road_graph(&g, &[0, 1]).is_err());
    }

    /// Floyd-Warshall oracle on a small random graph.
    #[test]
    fn agrees_with_floyd_warshall() {
        let n = 7;
        let mut edges = Vec::new();
        let mut s = 12345u64;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 33) as f64 / (1u64 << 31) as f64
        };
        for u in 0..n {
            for v in 0..n {
                if u != v && next() < 0.5 {
                    edges.push(edge(u, v, 0.1 + next(), 1.0));
                }
            }
            edges.push(edge(u, (u + 1) % n, 5.0, 1.0));
        }
        let g = RoadGraph { n_vertices: n, edges: edges.clone() };
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for u in 0..n {
            d[u][u] = 0.0;
        }
        for e in &edges {
            d[e.from][e.to] = d[e.from][e.to].min(e.time_h);
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    d[i][j] = d[i][j].min(d[i][k] + d[k][j]);
                }
            }
        }
        for src in 0..n {
            let (t, _) = g.shortest_from(src);
            for dst in 0..n {
                assert!((t[dst] - d[src][dst]).abs() < 1e-12);
            }
        }
    }
}
