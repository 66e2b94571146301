//! Single-period maximum-reward transportation.

use alloc::vec;
use alloc::vec::Vec;

use crate::instance::{reward_of, MatchingDecision, RewardMatrix, SystemState};
use crate::monge::PriorityTiers;
use crate::TOL;

#[derive(Debug, Clone, PartialEq)]
pub struct TransportResult {
    pub q: MatchingDecision,
    pub value: f64,
}

struct Arc {
    to: usize,
    cap: u32,
    cost: f64,
}

/// Min-cost flow by successive shortest paths, stopping once no path has negative cost.
struct Network {
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
}

impl Network {
    fn new(nodes: usize) -> Self {
        Self { arcs: Vec::new(), adj: vec![Vec::new(); nodes] }
    }

    fn add(&mut self, from: usize, to: usize, cap: u32, cost: f64) -> usize {
        let id = self.arcs.len();
        self.arcs.push(Arc { to, cap, cost });
        self.arcs.push(Arc { to: from, cap: 0, cost: -cost });
        self.adj[from].push(id);
        self.adj[to].push(id + 1);
        id
    }

    fn run(&mut self, source: usize, sink: usize) -> f64 {
        let nodes = self.adj.len();
        let mut total = 0.0;
        loop {
            let mut dist = vec![f64::INFINITY; nodes];
            let mut via = vec![usize::MAX; nodes];
            dist[source] = 0.0;
            for _ in 0..nodes {
                let mut changed = false;
                for u in 0..nodes {
                    if dist[u] == f64::INFINITY {
                        continue;
                    }
                    for &a in &self.adj[u] {
                        let arc = &self.arcs[a];
                        if arc.cap > 0 && dist[u] + arc.cost < dist[arc.to] - 1e-15 {
                            dist[arc.to] = dist[u] + arc.cost;
                            via[arc.to] = a;
                            changed = true;
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
            if !(dist[sink] < -TOL) {
                return total;
            }
            let mut push = u32::MAX;
            let mut v = sink;
            while v != source {
                let a = via[v];
                push = push.min(self.arcs[a].cap);
                v = self.arcs[a ^ 1].to;
            }
            let mut v = sink;
            while v != source {
                let a = via[v];
                self.arcs[a].cap -= push;
                self.arcs[a ^ 1].cap += push;
                v = self.arcs[a ^ 1].to;
            }
            total += dist[sink] * push as f64;
        }
    }
}

/// Optimal value using only cells at row-major index `>= first_cell` with positive reward.
fn restricted_optimum(rewards: &RewardMatrix, x: &[u32], y: &[u32], first_cell: usize) -> (f64, Vec<u32>) {
    let (m, n) = (x.len(), y.len());
    let source = m + n;
    let sink = source + 1;
    let mut net = Network::new(m + n + 2);
    for (i, xi) in x.iter().enumerate() {
        if *xi > 0 {
            net.add(source, i, *xi, 0.0);
        }
    }
    for (j, yj) in y.iter().enumerate() {
        if *yj > 0 {
            net.add(m + j, sink, *yj, 0.0);
        }
    }
    let mut cells = Vec::new();
    for i in 0..m {
        for j in 0..n {
            let r = rewards.get(i, j);
            if i * n + j >= first_cell && r > 0.0 && x[i] > 0 && y[j] > 0 {
                cells.push((i * n + j, net.add(i, m + j, x[i].min(y[j]), -r)));
            }
        }
    }
    let cost = net.run(source, sink);
    let mut q = vec![0; m * n];
    for (cell, arc) in cells {
        q[cell] = net.arcs[arc ^ 1].cap;
    }
    (-cost, q)
}

/// Maximum-reward integer matching for one period; the row-major lexicographically
/// smallest optimal `q` is returned.
pub fn max_weight_transport(rewards_t: &RewardMatrix, state: &SystemState) -> TransportResult {
    let (m, n) = (state.x.len(), state.y.len());
    let (best, _) = restricted_optimum(rewards_t, &state.x, &state.y, 0);
    let mut rx = state.x.clone();
    let mut ry = state.y.clone();
    let mut q = MatchingDecision::zeros(m, n);
    let mut acc = 0.0;
    for i in 0..m {
        for j in 0..n {
            let r = rewards_t.get(i, j);
            let cap = rx[i].min(ry[j]);
            if r <= 0.0 || cap == 0 {
                continue;
            }
            let cell = i * n + j;
            let mut chosen = cap;
            for v in 0..cap {
                rx[i] -= v;
                ry[j] -= v;
                let (rest, _) = restricted_optimum(rewards_t, &rx, &ry, cell + 1);
                rx[i] += v;
                ry[j] += v;
                if acc + r * v as f64 + rest >= best - TOL {
                    chosen = v;
                    break;
                }
            }
            q.set(i, j, chosen);
            acc += r * chosen as f64;
            rx[i] -= chosen;
            ry[j] -= chosen;
        }
    }
    let value = reward_of(rewards_t, &q).unwrap_or(0.0);
    TransportResult { q, value }
}

/// Greedy walk over priority tiers; within a tier pairs go in lexicographic order.
/// Pairs without a positive reward are left unmatched.
pub fn tier_greedy_transport(rewards_t: &RewardMatrix, state: &SystemState, tiers: &PriorityTiers) -> TransportResult {
    let mut rx = state.x.clone();
    let mut ry = state.y.clone();
    let mut q = MatchingDecision::zeros(state.x.len(), state.y.len());
    for tier in &tiers.tiers {
        for p in tier {
            if rewards_t.get(p.i, p.j) <= 0.0 {
                continue;
            }
            let k = rx[p.i].min(ry[p.j]);
            if k > 0 {
                q.set(p.i, p.j, q.get(p.i, p.j) + k);
                rx[p.i] -= k;
                ry[p.j] -= k;
            }
        }
    }
    let value = reward_of(rewards_t, &q).unwrap_or(0.0);
    TransportResult { q, value }
}
