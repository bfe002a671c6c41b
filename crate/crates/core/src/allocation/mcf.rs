//! Min-cost max-flow by successive shortest paths with node potentials.
//!
//! Each phase runs Dijkstra on reduced costs, folds the distances into the
//! potentials, then pushes unit paths through the zero-reduced-cost residual
//! subgraph until it is saturated. Every augmenting path is therefore a
//! shortest path of the current residual network.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

const INF: i64 = i64::MAX / 4;

#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    rev: usize,
    cap: i64,
    cost: i64,
}

#[derive(Debug, Clone)]
pub struct MinCostFlow {
    graph: Vec<Vec<Edge>>,
}

/// Handle to a forward edge: `(node, position in its adjacency list)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeRef(usize, usize);

impl MinCostFlow {
    pub fn new(nodes: usize) -> Self {
        Self {
            graph: vec![Vec::new(); nodes],
        }
    }

    /// Costs must be non-negative so the initial potentials can be zero.
    pub fn add_edge(&mut self, from: usize, to: usize, cap: i64, cost: i64) -> EdgeRef {
        debug_assert!(cost >= 0);
        let fwd = self.graph[from].len();
        let bwd = self.graph[to].len() + usize::from(from == to);
        self.graph[from].push(Edge {
            to,
            rev: bwd,
            cap,
            cost,
        });
        self.graph[to].push(Edge {
            to: from,
            rev: fwd,
            cap: 0,
            cost: -cost,
        });
        EdgeRef(from, fwd)
    }

    /// Flow currently carried by a forward edge.
    pub fn flow(&self, e: EdgeRef) -> i64 {
        let edge = &self.graph[e.0][e.1];
        self.graph[edge.to][edge.rev].cap
    }

    /// Pushes a maximum flow from `s` to `t` at minimum cost; returns `(flow, cost)`.
    pub fn run(&mut self, s: usize, t: usize) -> (i64, i64) {
        let n = self.graph.len();
        let mut potential = vec![0i64; n];
        let mut dist = vec![INF; n];
        let (mut flow, mut cost) = (0i64, 0i64);
        loop {
            if !self.dijkstra(s, t, &potential, &mut dist) {
                break;
            }
            let dt = dist[t];
            for v in 0..n {
                potential[v] += dist[v].min(dt);
            }
            let mut it = vec![0usize; n];
            let mut dead = vec![false; n];
            loop {
                let mut on_path = vec![false; n];
                let pushed = self.push_admissible(s, t, INF, &potential, &mut it, &mut dead, &mut on_path);
                if pushed == 0 {
                    break;
                }
                flow += pushed;
            }
        }
        for u in 0..n {
            for e in &self.graph[u] {
                if e.cost > 0 {
                    cost += e.cost * self.graph[e.to][e.rev].cap;
                }
            }
        }
        (flow, cost)
    }

    fn dijkstra(&self, s: usize, t: usize, potential: &[i64], dist: &mut [i64]) -> bool {
        dist.fill(INF);
        dist[s] = 0;
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((0i64, s)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for e in &self.graph[u] {
                if e.cap == 0 {
                    continue;
                }
                let nd = d + e.cost + potential[u] - potential[e.to];
                if nd < dist[e.to] {
                    dist[e.to] = nd;
                    heap.push(Reverse((nd, e.to)));
                }
            }
        }
        dist[t] < INF
    }

    #[allow(clippy::too_many_arguments)]
    fn push_admissible(
        &mut self,
        u: usize,
        t: usize,
        limit: i64,
        potential: &[i64],
        it: &mut [usize],
        dead: &mut [bool],
        on_path: &mut [bool],
    ) -> i64 {
        if u == t {
            return limit;
        }
        on_path[u] = true;
        while it[u] < self.graph[u].len() {
            let i = it[u];
            let (to, cap, cost) = {
                let e = &self.graph[u][i];
                (e.to, e.cap, e.cost)
            };
            if cap > 0
                && !dead[to]
                && !on_path[to]
                && cost + potential[u] - potential[to] == 0
            {
                let pushed =
                    self.push_admissible(to, t, limit.min(cap), potential, it, dead, on_path);
                if pushed > 0 {
                    let rev = self.graph[u][i].rev;
                    self.graph[u][i].cap -= pushed;
                    self.graph[to][rev].cap += pushed;
                    on_path[u] = false;
                    return pushed;
                }
            }
            it[u] += 1;
        }
        on_path[u] = false;
        dead[u] = true;
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_cheaper_of_two_paths() {
        // s=0, t=3; two unit paths with costs 1+1 and 5+5, sink edge cap 1
        let mut g = MinCostFlow::new(4);
        g.add_edge(0, 1, 1, 1);
        g.add_edge(0, 2, 1, 5);
        g.add_edge(1, 3, 1, 1);
        g.add_edge(2, 3, 1, 5);
        assert_eq!(g.run(0, 3), (2, 12));
    }

    #[test]
    fn reroutes_through_reverse_edges() {
        // classic augmenting-path case: greedy 1->a blocks 2, reroute needed
        let (s, t1, t2, a, b, t) = (0, 1, 2, 3, 4, 5);
        let mut g = MinCostFlow::new(6);
        g.add_edge(s, t1, 1, 0);
        g.add_edge(s, t2, 1, 0);
        g.add_edge(t1, a, 1, 0);
        g.add_edge(t1, b, 1, 10);
        let e = g.add_edge(t2, a, 1, 3);
        g.add_edge(a, t, 1, 0);
        g.add_edge(b, t, 1, 0);
        assert_eq!(g.run(s, t), (2, 13));
        assert_eq!(g.flow(e), 1);
    }

    #[test]
    fn no_path_means_no_flow() {
        let mut g = MinCostFlow::new(3);
        g.add_edge(0, 1, 4, 2);
        assert_eq!(g.run(0, 2), (0, 0));
    }
}
