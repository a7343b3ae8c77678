//! Integer apportionment: largest-remainder rounding of a vector and controlled
//! rounding of a matrix to prescribed row and column sums.

use std::collections::VecDeque;

use super::CorrectorError;

/// Splits `total` into integers proportional to `quotas` (which should sum to `total`):
/// floors first, then one extra unit each to the largest fractional remainders.
/// `priority` ranks ties (earlier wins).
pub fn largest_remainder(quotas: &[f64], total: u64, priority: &[usize]) -> Vec<u64> {
    let mut out: Vec<u64> = quotas.iter().map(|&q| q.max(0.0).floor() as u64).collect();
    let assigned: u64 = out.iter().sum();
    let mut rank = vec![0usize; quotas.len()];
    for (r, &i) in priority.iter().enumerate() {
        rank[i] = r;
    }
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(rank[a].cmp(&rank[b]))
    });
    let left = total.saturating_sub(assigned) as usize;
    for r in 0..if order.is_empty() { 0 } else { left } {
        out[order[r % order.len()]] += 1;
    }
    out
}

/// Integer matrix with the given row and column sums, each entry the floor or ceiling
/// of the corresponding entry of `target` after fitting `target` to those sums.
pub fn round_matrix(
    target: &[Vec<f64>],
    row_sums: &[u64],
    col_sums: &[u64],
) -> Result<Vec<Vec<u64>>, CorrectorError> {
    let rows = target.len();
    let cols = col_sums.len();
    if row_sums.len() != rows || target.iter().any(|r| r.len() != cols) {
        return Err(CorrectorError::Domain("rounding shapes disagree".into()));
    }
    if row_sums.iter().sum::<u64>() != col_sums.iter().sum::<u64>() {
        return Err(CorrectorError::Quantization("row and column totals differ".into()));
    }
    let fitted = fit_margins(target, row_sums, col_sums);

    let lower: Vec<Vec<u64>> = fitted
        .iter()
        .map(|r| r.iter().map(|&x| (x + 1e-9).floor().max(0.0) as u64).collect())
        .collect();
    let slack: Vec<Vec<bool>> = fitted
        .iter()
        .zip(&lower)
        .map(|(r, l)| r.iter().zip(l).map(|(&x, &lo)| x - lo as f64 > 1e-9).collect())
        .collect();
    let row_need: Vec<i64> = (0..rows)
        .map(|g| row_sums[g] as i64 - lower[g].iter().sum::<u64>() as i64)
        .collect();
    let col_need: Vec<i64> = (0..cols)
        .map(|a| col_sums[a] as i64 - lower.iter().map(|r| r[a]).sum::<u64>() as i64)
        .collect();
    if row_need.iter().chain(&col_need).any(|&d| d < 0) {
        return Err(CorrectorError::Quantization("fitted table overshoots its margins".into()));
    }

    // Nodes: 0 source, 1..=rows, rows+1..=rows+cols, sink.
    let sink = rows + cols + 1;
    let mut flow = Network::new(sink + 1);
    for g in 0..rows {
        flow.add(0, 1 + g, row_need[g]);
        for a in 0..cols {
            if slack[g][a] {
                flow.add(1 + g, 1 + rows + a, 1);
            }
        }
    }
    for a in 0..cols {
        flow.add(1 + rows + a, sink, col_need[a]);
    }
    let pushed = flow.max_flow(0, sink);
    if pushed != row_need.iter().sum::<i64>() {
        return Err(CorrectorError::Quantization(
            "no integer table with the required margins rounds this target".into(),
        ));
    }
    let mut out = lower;
    for g in 0..rows {
        for e in &flow.adj[1 + g] {
            let edge = &flow.edges[*e];
            if edge.to > rows && edge.to <= rows + cols && edge.flow > 0 {
                out[g][edge.to - 1 - rows] += edge.flow as u64;
            }
        }
    }
    Ok(out)
}

// Iterative proportional fitting on a strictly positive copy of the target.
fn fit_margins(target: &[Vec<f64>], row_sums: &[u64], col_sums: &[u64]) -> Vec<Vec<f64>> {
    let mut x: Vec<Vec<f64>> = target
        .iter()
        .zip(row_sums)
        .map(|(r, &c)| r.iter().map(|&v| v.max(0.0) + 1e-12 * (c as f64 + 1.0)).collect())
        .collect();
    for g in 0..x.len() {
        if row_sums[g] == 0 {
            x[g].iter_mut().for_each(|v| *v = 0.0);
        }
    }
    let cols = col_sums.len();
    for _ in 0..10_000 {
        for (r, &c) in x.iter_mut().zip(row_sums) {
            let s: f64 = r.iter().sum();
            if s > 0.0 {
                r.iter_mut().for_each(|v| *v *= c as f64 / s);
            }
        }
        let mut worst: f64 = 0.0;
        for a in 0..cols {
            let s: f64 = x.iter().map(|r| r[a]).sum();
            worst = worst.max((s - col_sums[a] as f64).abs());
            if s > 0.0 {
                let f = col_sums[a] as f64 / s;
                x.iter_mut().for_each(|r| r[a] *= f);
            }
        }
        if worst < 1e-10 {
            break;
        }
    }
    x
}

struct Edge {
    to: usize,
    cap: i64,
    flow: i64,
}

struct Network {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl Network {
    fn new(n: usize) -> Self {
        Self {
            edges: Vec::new(),
            adj: vec![Vec::new(); n],
        }
    }

    fn add(&mut self, from: usize, to: usize, cap: i64) {
        self.adj[from].push(self.edges.len());
        self.edges.push(Edge { to, cap, flow: 0 });
        self.adj[to].push(self.edges.len());
        self.edges.push(Edge { to: from, cap: 0, flow: 0 });
    }

    // Edmonds–Karp.
    fn max_flow(&mut self, s: usize, t: usize) -> i64 {
        let mut total = 0;
        loop {
            let mut via = vec![usize::MAX; self.adj.len()];
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &e in &self.adj[u] {
                    let edge = &self.edges[e];
                    if edge.to != s && via[edge.to] == usize::MAX && edge.cap > edge.flow {
                        via[edge.to] = e;
                        queue.push_back(edge.to);
                    }
                }
            }
            if via[t] == usize::MAX {
                return total;
            }
            let mut push = i64::MAX;
            let mut v = t;
            while v != s {
                let e = via[v];
                push = push.min(self.edges[e].cap - self.edges[e].flow);
                v = self.edges[e ^ 1].to;
            }
            let mut v = t;
            while v != s {
                let e = via[v];
                self.edges[e].flow += push;
                self.edges[e ^ 1].flow -= push;
                v = self.edges[e ^ 1].to;
            }
            total += push;
        }
    }
}
