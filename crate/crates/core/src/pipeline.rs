//! Nominate → offer → allocate, shared by the offline run and the online engine.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::{
    allocate, AllocationError, Algorithm, AssignmentGraph, AssignmentResult, Candidate, GraphTask,
};
use crate::geo::MetricKind;
use crate::model::{LedgerError, Ledgers, MetricsReport, Task, TaskId, Worker, WorkerId};
use crate::nomination::{nominee_list, NominationError, Nominee, TemporalIndex};
use crate::offers::{run_offer_rounds, KeyedSampler, OfferMode, OfferPolicy, OfferSession, OffersError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Nomination(#[from] NominationError),
    #[error(transparent)]
    Offers(#[from] OffersError),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("base acceptance {0} outside [0, 1]")]
    BaseAcceptance(f64),
    #[error("rho {0} outside [0, 1]")]
    Rho(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub policy: OfferPolicy,
    pub base_acceptance: f64,
    pub algorithm: Algorithm,
    pub rho: f64,
    pub seed: u64,
    pub max_rounds: Option<u32>,
    pub metric: MetricKind,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            policy: OfferPolicy::default(),
            base_acceptance: 0.9,
            algorithm: Algorithm::FAware,
            rho: 1.0,
            seed: 0,
            max_rounds: None,
            metric: MetricKind::Haversine,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.policy.validate()?;
        if !(0.0..=1.0).contains(&self.base_acceptance) {
            return Err(PipelineError::BaseAcceptance(self.base_acceptance));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(PipelineError::Rho(self.rho));
        }
        Ok(())
    }
}

/// Result of a complete run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunOutcome {
    pub report: MetricsReport,
    pub assignments: AssignmentResult,
    /// Offer sessions, recorded only when tracing.
    pub sessions: Vec<OfferSession>,
    /// Wall time spent inside the allocator.
    #[serde(skip)]
    pub allocation_time: Duration,
}

/// Mutable state of one simulation run.
#[derive(Debug)]
pub struct Dispatcher {
    config: PipelineConfig,
    ledgers: Ledgers,
    sampler: KeyedSampler,
    trace: bool,
    sessions: Vec<OfferSession>,
    k_sum: u64,
    session_count: u64,
    rounds: BTreeMap<TaskId, u32>,
    travel: HashMap<WorkerId, (i64, f64)>,
    assignments: AssignmentResult,
    allocation_calls: u64,
    allocation_time: Duration,
}

impl Dispatcher {
    pub fn new(
        config: PipelineConfig,
        capacities: impl IntoIterator<Item = (WorkerId, u32)>,
        trace: bool,
    ) -> Result<Self, PipelineError> {
        config.validate()?;
        Ok(Self {
            config,
            ledgers: Ledgers::new(capacities),
            sampler: KeyedSampler::new(config.seed),
            trace,
            sessions: Vec::new(),
            k_sum: 0,
            session_count: 0,
            rounds: BTreeMap::new(),
            travel: HashMap::new(),
            assignments: AssignmentResult::default(),
            allocation_calls: 0,
            allocation_time: Duration::ZERO,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn ledgers(&self) -> &Ledgers {
        &self.ledgers
    }

    pub fn assignments(&self) -> &AssignmentResult {
        &self.assignments
    }

    /// Runs offer rounds for one task over its nominees, skipping workers in
    /// `already_offered`. Returns the session, or `None` if nobody was left to
    /// ask. Acceptances go straight into the ledgers.
    ///
    /// In unicast mode workers whose acceptances already fill their capacity
    /// are not asked, so every acceptance stays allocatable.
    pub fn offer(
        &mut self,
        task: &Task,
        nominees: &[Nominee],
        already_offered: &HashSet<WorkerId>,
    ) -> Result<Option<(OfferSession, GraphTask)>, PipelineError> {
        let unicast = self.config.policy.mode == OfferMode::Unicast;
        let eligible: Vec<Nominee> = nominees
            .iter()
            .filter(|n| !already_offered.contains(&n.worker_id))
            .filter(|n| {
                !unicast
                    || self.ledgers.get(n.worker_id).is_some_and(|l| {
                        l.accepted().len() < l.capacity() as usize
                    })
            })
            .cloned()
            .collect();
        if eligible.is_empty() {
            return Ok(None);
        }
        let session = run_offer_rounds(
            task.id,
            &eligible,
            &self.config.policy,
            &mut self.sampler,
            self.config.max_rounds,
        )?;
        self.k_sum += session.k as u64;
        self.session_count += 1;
        *self.rounds.entry(task.id).or_default() += session.rounds_waited;

        let beta: HashMap<WorkerId, f64> = eligible.iter().map(|n| (n.worker_id, n.beta)).collect();
        let alpha = eligible[0].alpha;
        for &w in &session.candidates {
            self.ledgers.record_acceptance(w, task.id, task.reward)?;
        }
        let graph_task = GraphTask {
            id: task.id,
            reward: task.reward,
            alpha,
            candidates: session
                .candidates
                .iter()
                .map(|&w| Candidate {
                    worker: w,
                    beta: beta[&w],
                })
                .collect(),
        };
        if self.trace {
            self.sessions.push(session.clone());
        }
        Ok(Some((session, graph_task)))
    }

    /// Allocates a graph of candidate tasks with the configured allocator.
    pub fn allocate(&mut self, graph: &AssignmentGraph) -> Result<AssignmentResult, PipelineError> {
        // a fresh, reproducible stream for each allocation batch
        let seed = self.config.seed ^ self.allocation_calls.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        self.allocation_calls += 1;
        let start = Instant::now();
        let result = allocate(self.config.algorithm, graph, &mut self.ledgers, seed)?;
        self.allocation_time += start.elapsed();
        for task in &graph.tasks {
            if let Some(w) = result.assignments.get(&task.id) {
                let beta = task
                    .candidates
                    .iter()
                    .find(|c| c.worker == *w)
                    .map_or(0.0, |c| c.beta);
                let entry = self.travel.entry(*w).or_default();
                entry.0 += task.reward.cents();
                entry.1 += task.alpha + beta;
            }
        }
        self.assignments.merge(result.clone());
        Ok(result)
    }

    pub fn mark_unallocated(&mut self, task: TaskId) {
        if !self.assignments.assignments.contains_key(&task) {
            self.assignments.unallocated.insert(task);
        }
    }

    pub fn finish(self, total_tasks: usize) -> RunOutcome {
        let avg_k = if self.session_count == 0 {
            0.0
        } else {
            self.k_sum as f64 / self.session_count as f64
        };
        let avg_wait = if self.rounds.is_empty() {
            0.0
        } else {
            self.rounds.values().map(|&r| r as f64).sum::<f64>() / self.rounds.len() as f64
        };
        let mut travel: Vec<_> = self.travel.into_iter().collect();
        travel.sort_by_key(|(w, _)| *w);
        let earnings_per_km = travel
            .into_iter()
            .filter(|(_, (_, km))| *km > 0.0)
            .map(|(_, (cents, km))| cents as f64 / 100.0 / km)
            .collect();
        let report = MetricsReport::from_ledgers(
            &self.ledgers,
            total_tasks,
            self.config.rho,
            avg_k,
            avg_wait,
            earnings_per_km,
        );
        RunOutcome {
            report,
            assignments: self.assignments,
            sessions: self.sessions,
            allocation_time: self.allocation_time,
        }
    }
}

const CHUNK: usize = 4096;

/// Nomination and offers for an offline run: every task and availability is
/// known up front. Nominee lists are computed in parallel and offers are
/// issued in task id order. Returns the dispatcher, whose ledgers hold the
/// acceptances, and the candidate graph still to be allocated.
pub fn offer_phase(
    tasks: &[Task],
    workers: &[Worker],
    config: &PipelineConfig,
    trace: bool,
) -> Result<(Dispatcher, AssignmentGraph), PipelineError> {
    let mut dispatcher = Dispatcher::new(*config, workers.iter().map(|w| (w.id, w.capacity)), trace)?;
    let index = TemporalIndex::build(workers);
    let mut order: Vec<&Task> = tasks.iter().collect();
    order.sort_by_key(|t| t.id);

    let empty = HashSet::new();
    let mut graph_tasks = Vec::new();
    for chunk in order.chunks(CHUNK) {
        let lists: Vec<Vec<Nominee>> = chunk
            .par_iter()
            .map(|t| nominee_list(t, workers, &index, &config.metric, config.base_acceptance))
            .collect::<Result<_, _>>()?;
        for (task, nominees) in chunk.iter().zip(lists) {
            match dispatcher.offer(task, &nominees, &empty)? {
                Some((_, gt)) if !gt.candidates.is_empty() => graph_tasks.push(gt),
                _ => dispatcher.mark_unallocated(task.id),
            }
        }
    }
    Ok((dispatcher, AssignmentGraph::new(graph_tasks)))
}

/// Offline two-phase run: [`offer_phase`] followed by one allocation pass
/// over the whole candidate graph.
pub fn run_offline(
    tasks: &[Task],
    workers: &[Worker],
    config: &PipelineConfig,
    trace: bool,
) -> Result<RunOutcome, PipelineError> {
    let (mut dispatcher, graph) = offer_phase(tasks, workers, config, trace)?;
    dispatcher.allocate(&graph)?;
    Ok(dispatcher.finish(tasks.len()))
}
