#![allow(dead_code)]

use std::collections::HashMap;

use fairdispatch_core::allocation::{AssignmentGraph, Candidate, GraphTask};
use fairdispatch_core::model::{
    Availability, GeoPoint, Ledgers, Money, Task, TaskId, TimePeriod, Worker, WorkerId,
};
use rand::Rng;

pub fn period(begin: i64, end: i64) -> TimePeriod {
    TimePeriod::new(begin, end).unwrap()
}

pub fn pt(x: f64, y: f64) -> GeoPoint {
    GeoPoint::new(x, y).unwrap()
}

pub fn cents(c: i64) -> Money {
    Money::from_cents(c).unwrap()
}

/// Task whose two steps share one period.
pub fn task(id: u64, src: GeoPoint, dst: GeoPoint, p: TimePeriod, reward: i64) -> Task {
    Task {
        id: TaskId(id),
        source_period: p,
        source_loc: src,
        dest_period: p,
        dest_loc: dst,
        reward: cents(reward),
    }
}

pub fn avail(worker: u64, p: TimePeriod, center: GeoPoint, radius: f64) -> Availability {
    Availability::new(WorkerId(worker), p, center, radius).unwrap()
}

pub fn worker(id: u64, avails: Vec<Availability>, capacity: u32) -> Worker {
    Worker::new(WorkerId(id), avails, capacity).unwrap()
}

/// `(task id, reward, [(worker, beta)])` rows and `(worker, capacity)` pairs
/// to a graph plus ledgers holding the matching acceptances.
pub fn graph(tasks: &[(u64, i64, Vec<(u64, f64)>)], caps: &[(u64, u32)]) -> (AssignmentGraph, Ledgers) {
    let mut ledgers = Ledgers::new(caps.iter().map(|&(w, c)| (WorkerId(w), c)));
    let g = AssignmentGraph::new(
        tasks
            .iter()
            .map(|(id, reward, cands)| {
                for &(w, _) in cands {
                    ledgers
                        .record_acceptance(WorkerId(w), TaskId(*id), cents(*reward))
                        .unwrap();
                }
                GraphTask {
                    id: TaskId(*id),
                    reward: cents(*reward),
                    alpha: 0.0,
                    candidates: cands
                        .iter()
                        .map(|&(w, beta)| Candidate {
                            worker: WorkerId(w),
                            beta,
                        })
                        .collect(),
                }
            })
            .collect(),
    );
    (g, ledgers)
}

pub struct Instance {
    pub graph: AssignmentGraph,
    pub ledgers: Ledgers,
    pub caps: HashMap<WorkerId, u32>,
}

/// Random capacitated bipartite instance with acceptance-ordered candidates.
pub fn random_instance(
    rng: &mut impl Rng,
    max_tasks: usize,
    max_workers: usize,
    max_cap: u32,
) -> Instance {
    let n_tasks = rng.random_range(0..=max_tasks);
    let n_workers = rng.random_range(1..=max_workers);
    let caps: Vec<(u64, u32)> = (0..n_workers as u64)
        .map(|w| (w, rng.random_range(0..=max_cap)))
        .collect();
    let density = rng.random_range(0.1..0.9);
    let rows: Vec<(u64, i64, Vec<(u64, f64)>)> = (0..n_tasks as u64)
        .map(|t| {
            let mut cands: Vec<(u64, f64)> = Vec::new();
            for w in 0..n_workers as u64 {
                if rng.random_bool(density) {
                    cands.push((w, rng.random_range(0.0..5.0)));
                }
            }
            // acceptance order is arbitrary
            for i in (1..cands.len()).rev() {
                cands.swap(i, rng.random_range(0..=i));
            }
            (t, rng.random_range(100..5000), cands)
        })
        .collect();
    let (graph, ledgers) = graph(&rows, &caps);
    Instance {
        graph,
        ledgers,
        caps: caps.into_iter().map(|(w, c)| (WorkerId(w), c)).collect(),
    }
}

/// Maximum number of tasks any feasible assignment allocates, by exhaustive
/// search with a remaining-tasks bound.
pub fn brute_force_max(graph: &AssignmentGraph, caps: &HashMap<WorkerId, u32>) -> usize {
    fn go(
        i: usize,
        graph: &AssignmentGraph,
        left: &mut HashMap<WorkerId, u32>,
        count: usize,
        best: &mut usize,
    ) {
        if count + (graph.tasks.len() - i) <= *best {
            return;
        }
        if i == graph.tasks.len() {
            *best = count;
            return;
        }
        for c in &graph.tasks[i].candidates {
            let l = left.get_mut(&c.worker).unwrap();
            if *l > 0 {
                *l -= 1;
                go(i + 1, graph, left, count + 1, best);
                *left.get_mut(&c.worker).unwrap() += 1;
            }
        }
        go(i + 1, graph, left, count, best);
    }
    let mut left = caps.clone();
    let mut best = 0;
    go(0, graph, &mut left, 0, &mut best);
    best
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}
