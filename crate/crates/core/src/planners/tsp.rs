use crate::netmodel::NetworkInstance;

/// Cost of the open path `0 -> order[0] -> order[1] -> ...`.
pub fn path_cost(costs: &[Vec<f64>], order: &[usize]) -> f64 {
    let mut prev = 0;
    let mut total = 0.0;
    for &v in order {
        total += costs[prev][v];
        prev = v;
    }
    total
}

/// Nearest-neighbour open path from index 0 over indices `1..n`, ties by
/// index.
pub fn nearest_neighbor(costs: &[Vec<f64>]) -> Vec<usize> {
    let n = costs.len();
    let mut left: Vec<usize> = (1..n).collect();
    let mut order = Vec::with_capacity(n.saturating_sub(1));
    let mut cur = 0;
    while !left.is_empty() {
        let (k, _) = left
            .iter()
            .enumerate()
            .min_by(|a, b| costs[cur][*a.1].total_cmp(&costs[cur][*b.1]).then(a.1.cmp(b.1)))
            .expect("non-empty");
        cur = left.remove(k);
        order.push(cur);
    }
    order
}

/// One pass of first-improvement segment reversal. Returns true if a move
/// was applied. Reversed segments are re-costed with the directed matrix.
pub fn two_opt_pass(costs: &[Vec<f64>], order: &mut [usize]) -> bool {
    let base = path_cost(costs, order);
    for i in 0..order.len() {
        for j in i + 1..order.len() {
            order[i..=j].reverse();
            if path_cost(costs, order) < base - 1e-12 {
                return true;
            }
            order[i..=j].reverse();
        }
    }
    false
}

/// Nearest-neighbour construction followed by asymmetric 2-opt until no
/// strictly improving reversal exists. Returns indices into `costs`
/// (excluding the start index 0).
pub fn tsp_order_matrix(costs: &[Vec<f64>]) -> Vec<usize> {
    let mut order = nearest_neighbor(costs);
    while two_opt_pass(costs, &mut order) {}
    order
}

/// Visit order for `remaining` starting at node `start`, by nominal time.
pub fn tsp_order(inst: &NetworkInstance, start: usize, remaining: &[usize]) -> Vec<usize> {
    let nodes: Vec<usize> = std::iter::once(start).chain(remaining.iter().copied()).collect();
    let costs: Vec<Vec<f64>> = nodes.iter().map(|&u| nodes.iter().map(|&v| inst.tau(u, v)).collect()).collect();
    tsp_order_matrix(&costs).into_iter().map(|k| nodes[k]).collect()
}
