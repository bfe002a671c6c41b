//! Phase two: pick at most one candidate per task under candidacy and
//! capacity constraints.
//!
//! All allocators update the worker ledgers as they assign, so LAR and
//! residual capacity are current when the next task is considered.

mod graph;
mod mcf;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{LedgerError, Ledgers, TaskId, WorkerId};

pub use graph::{AssignmentGraph, AssignmentResult, Candidate, GraphTask};
pub use mcf::{EdgeRef, MinCostFlow};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AllocationError {
    #[error("candidate {worker} of task {task} never accepted it")]
    NotCandidate { task: TaskId, worker: WorkerId },
    #[error("unknown worker {0}")]
    UnknownWorker(WorkerId),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    FAware,
    Random,
    Laf,
    Nearest,
    Mcf,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::FAware,
        Algorithm::Random,
        Algorithm::Laf,
        Algorithm::Nearest,
        Algorithm::Mcf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::FAware => "f_aware",
            Algorithm::Random => "random",
            Algorithm::Laf => "laf",
            Algorithm::Nearest => "nearest",
            Algorithm::Mcf => "mcf",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s || (s == "f-aware" && *a == Algorithm::FAware))
            .ok_or_else(|| format!("unknown allocator {s:?}"))
    }
}

/// Runs `algo` on `graph`; `seed` only matters for [`Algorithm::Random`].
pub fn allocate(
    algo: Algorithm,
    graph: &AssignmentGraph,
    ledgers: &mut Ledgers,
    seed: u64,
) -> Result<AssignmentResult, AllocationError> {
    match algo {
        Algorithm::FAware => f_aware(graph, ledgers),
        Algorithm::Random => random_alloc(graph, ledgers, &mut ChaCha8Rng::seed_from_u64(seed)),
        Algorithm::Laf => laf_alloc(graph, ledgers),
        Algorithm::Nearest => nearest_alloc(graph, ledgers),
        Algorithm::Mcf => mcf_alloc(graph, ledgers),
    }
}

/// Dense ledger index of every task's candidates, flattened row by row,
/// with the position of the matching acceptance in that ledger.
struct Resolved {
    offsets: Vec<usize>,
    ledger: Vec<usize>,
    pos: Vec<usize>,
}

impl Resolved {
    fn row(&self, ti: usize) -> &[usize] {
        &self.ledger[self.offsets[ti]..self.offsets[ti + 1]]
    }

    fn allocate(&self, ledgers: &mut Ledgers, ti: usize, ci: usize) -> Result<usize, AllocationError> {
        let e = self.offsets[ti] + ci;
        ledgers.by_index_mut(self.ledger[e]).record_allocation_at(self.pos[e])?;
        Ok(self.ledger[e])
    }
}

fn resolve(graph: &AssignmentGraph, ledgers: &Ledgers) -> Result<Resolved, AllocationError> {
    let edges = graph.edge_count();
    let mut offsets = Vec::with_capacity(graph.tasks.len() + 1);
    let mut ledger = Vec::with_capacity(edges);
    let mut pos = Vec::with_capacity(edges);
    // acceptances usually arrive in task order, so walking each ledger with
    // a cursor avoids most hash lookups
    let mut cursor = vec![0usize; ledgers.len()];
    offsets.push(0);
    for t in &graph.tasks {
        for c in &t.candidates {
            let li = ledgers
                .index_of(c.worker)
                .ok_or(AllocationError::UnknownWorker(c.worker))?;
            let l = ledgers.by_index(li);
            let next = cursor[li];
            let p = match l.accepted().get(next) {
                Some(&(id, _)) if id == t.id => next,
                _ => l.position(t.id).ok_or(AllocationError::NotCandidate {
                    task: t.id,
                    worker: c.worker,
                })?,
            };
            cursor[li] = p + 1;
            ledger.push(li);
            pos.push(p);
        }
        offsets.push(ledger.len());
    }
    Ok(Resolved { offsets, ledger, pos })
}

/// Builds the result in graph order from the ledger index picked per task.
fn collect(graph: &AssignmentGraph, ledgers: &Ledgers, picked: &[Option<usize>]) -> AssignmentResult {
    let mut assignments = Vec::new();
    let mut unallocated = Vec::new();
    for (task, pick) in graph.tasks.iter().zip(picked) {
        match pick {
            Some(li) => assignments.push((task.id, ledgers.by_index(*li).worker_id())),
            None => unallocated.push(task.id),
        }
    }
    AssignmentResult {
        assignments: assignments.into_iter().collect(),
        unallocated: unallocated.into_iter().collect(),
    }
}

/// Generic per-task greedy: visit tasks in `order`, assign to the best
/// capacitated candidate under `better`.
fn greedy(
    graph: &AssignmentGraph,
    ledgers: &mut Ledgers,
    order: impl IntoIterator<Item = usize>,
    mut pick: impl FnMut(usize, &[(usize, usize)], &Ledgers) -> Option<usize>,
) -> Result<AssignmentResult, AllocationError> {
    let cand = resolve(graph, ledgers)?;
    let mut picked = vec![None; graph.tasks.len()];
    let mut open: Vec<(usize, usize)> = Vec::new();
    for ti in order {
        let row = cand.row(ti);
        open.clear();
        open.extend(
            row.iter()
                .enumerate()
                .filter(|(_, &li)| ledgers.by_index(li).residual_capacity() > 0)
                .map(|(ci, &li)| (ci, li)),
        );
        if let Some(ci) = pick(ti, &open, ledgers) {
            picked[ti] = Some(cand.allocate(ledgers, ti, ci)?);
        }
    }
    Ok(collect(graph, ledgers, &picked))
}

fn min_by(
    open: &[(usize, usize)],
    mut cmp: impl FnMut(&(usize, usize), &(usize, usize)) -> Ordering,
) -> Option<usize> {
    open.iter().min_by(|a, b| cmp(a, b)).map(|&(ci, _)| ci)
}

/// F-Aware: tasks by ascending candidate count (then task id); each goes to
/// the capacitated candidate with the lowest LAR, preferring the larger LAR
/// denominator and then the lower worker id on ties.
pub fn f_aware(
    graph: &AssignmentGraph,
    ledgers: &mut Ledgers,
) -> Result<AssignmentResult, AllocationError> {
    let mut keyed: Vec<(usize, TaskId, usize)> = graph
        .tasks
        .iter()
        .enumerate()
        .map(|(i, t)| (t.candidates.len(), t.id, i))
        .collect();
    keyed.sort_unstable();
    let order = keyed.into_iter().map(|(_, _, i)| i);
    greedy(graph, ledgers, order, |_, open, ledgers| {
        min_by(open, |&(_, a), &(_, b)| {
            let (la, lb) = (ledgers.by_index(a), ledgers.by_index(b));
            let (fa, fb) = (la.lar_fraction(), lb.lar_fraction());
            fa.cmp_value(&fb)
                .then(fb.counted_cents.cmp(&fa.counted_cents))
                .then(la.worker_id().cmp(&lb.worker_id()))
        })
    })
}

/// Uniformly random capacitated candidate, tasks in graph order.
pub fn random_alloc(
    graph: &AssignmentGraph,
    ledgers: &mut Ledgers,
    rng: &mut impl Rng,
) -> Result<AssignmentResult, AllocationError> {
    greedy(graph, ledgers, 0..graph.tasks.len(), |_, open, _| {
        if open.is_empty() {
            None
        } else {
            Some(open[rng.random_range(0..open.len())].0)
        }
    })
}

/// Least-allocated worker first, tasks in graph order.
pub fn laf_alloc(
    graph: &AssignmentGraph,
    ledgers: &mut Ledgers,
) -> Result<AssignmentResult, AllocationError> {
    greedy(graph, ledgers, 0..graph.tasks.len(), |_, open, ledgers| {
        min_by(open, |&(_, a), &(_, b)| {
            let (la, lb) = (ledgers.by_index(a), ledgers.by_index(b));
            la.allocated()
                .len()
                .cmp(&lb.allocated().len())
                .then(la.worker_id().cmp(&lb.worker_id()))
        })
    })
}

/// Minimal beta first, tasks in graph order.
pub fn nearest_alloc(
    graph: &AssignmentGraph,
    ledgers: &mut Ledgers,
) -> Result<AssignmentResult, AllocationError> {
    greedy(graph, ledgers, 0..graph.tasks.len(), |ti, open, ledgers| {
        let cands = &graph.tasks[ti].candidates;
        min_by(open, |&(ca, a), &(cb, b)| {
            cands[ca]
                .beta
                .total_cmp(&cands[cb].beta)
                .then(ledgers.by_index(a).worker_id().cmp(&ledgers.by_index(b).worker_id()))
        })
    })
}

/// Integer edge cost: beta in whole metres.
pub fn beta_cost(beta_km: f64) -> i64 {
    (beta_km * 1000.0).round().max(0.0) as i64
}

/// TAR-optimal allocation by min-cost max-flow: source→task (1, 0),
/// task→candidate (1, beta in metres), worker→sink (residual capacity, 0).
pub fn mcf_alloc(
    graph: &AssignmentGraph,
    ledgers: &mut Ledgers,
) -> Result<AssignmentResult, AllocationError> {
    let cand = resolve(graph, ledgers)?;
    let n_tasks = graph.tasks.len();
    let mut worker_node = vec![usize::MAX; ledgers.len()];
    let mut workers = Vec::new();
    for &li in &cand.ledger {
        if worker_node[li] == usize::MAX {
            worker_node[li] = 1 + n_tasks + workers.len();
            workers.push(li);
        }
    }
    let source = 0;
    let sink = 1 + n_tasks + workers.len();
    let mut net = MinCostFlow::new(sink + 1);
    let mut edges = Vec::with_capacity(n_tasks);
    for (ti, task) in graph.tasks.iter().enumerate() {
        net.add_edge(source, 1 + ti, 1, 0);
        edges.push(
            task.candidates
                .iter()
                .zip(cand.row(ti))
                .map(|(c, &li)| net.add_edge(1 + ti, worker_node[li], 1, beta_cost(c.beta)))
                .collect::<Vec<_>>(),
        );
    }
    for &li in &workers {
        net.add_edge(
            worker_node[li],
            sink,
            ledgers.by_index(li).residual_capacity() as i64,
            0,
        );
    }
    net.run(source, sink);

    let mut picked = vec![None; n_tasks];
    for ti in 0..n_tasks {
        if let Some(ci) = edges[ti].iter().position(|&e| net.flow(e) > 0) {
            picked[ti] = Some(cand.allocate(ledgers, ti, ci)?);
        }
    }
    Ok(collect(graph, ledgers, &picked))
}
