use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io;

use serde::{Deserialize, Serialize};

use super::AllocationError;
use crate::model::{Ledgers, Money, TaskId, WorkerId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub worker: WorkerId,
    /// Worker-dependent movement cost of serving this task.
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphTask {
    pub id: TaskId,
    pub reward: Money,
    /// Source-to-destination distance.
    pub alpha: f64,
    /// Candidates in acceptance order.
    pub candidates: Vec<Candidate>,
}

/// Task-to-candidate bipartite graph. Worker capacities and LAR state live in
/// the [`Ledgers`] handed to each allocator.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AssignmentGraph {
    pub tasks: Vec<GraphTask>,
}

impl AssignmentGraph {
    pub fn new(tasks: Vec<GraphTask>) -> Self {
        Self { tasks }
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.tasks.iter().map(|t| t.candidates.len()).sum()
    }

    /// Every edge must be backed by an acceptance recorded in the ledgers.
    pub fn validate(&self, ledgers: &Ledgers) -> Result<(), AllocationError> {
        for t in &self.tasks {
            for c in &t.candidates {
                let ledger = ledgers
                    .get(c.worker)
                    .ok_or(AllocationError::UnknownWorker(c.worker))?;
                if !ledger.has_accepted(t.id) {
                    return Err(AllocationError::NotCandidate {
                        task: t.id,
                        worker: c.worker,
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentResult {
    pub assignments: BTreeMap<TaskId, WorkerId>,
    pub unallocated: BTreeSet<TaskId>,
}

impl AssignmentResult {
    pub fn allocated_count(&self) -> usize {
        self.assignments.len()
    }

    pub fn merge(&mut self, other: AssignmentResult) {
        for t in other.assignments.keys() {
            self.unallocated.remove(t);
        }
        self.assignments.extend(other.assignments);
        self.unallocated.extend(other.unallocated);
    }

    /// `task_id,worker_id` rows, one per assignment.
    pub fn write_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["task_id", "worker_id"])?;
        for (t, wk) in &self.assignments {
            w.write_record([t.to_string(), wk.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Checks candidacy and capacity against the graph and the capacity table.
    pub fn check_feasible(
        &self,
        graph: &AssignmentGraph,
        capacity: &HashMap<WorkerId, u32>,
    ) -> Result<(), String> {
        let mut load: HashMap<WorkerId, u32> = HashMap::new();
        let tasks: HashMap<TaskId, &GraphTask> = graph.tasks.iter().map(|t| (t.id, t)).collect();
        for (tid, wid) in &self.assignments {
            let t = tasks
                .get(tid)
                .ok_or_else(|| format!("task {tid} not in graph"))?;
            if !t.candidates.iter().any(|c| c.worker == *wid) {
                return Err(format!("worker {wid} is not a candidate of task {tid}"));
            }
            if self.unallocated.contains(tid) {
                return Err(format!("task {tid} both allocated and unallocated"));
            }
            *load.entry(*wid).or_default() += 1;
        }
        for (wid, n) in load {
            let cap = capacity.get(&wid).copied().unwrap_or(0);
            if n > cap {
                return Err(format!("worker {wid} got {n} tasks, capacity {cap}"));
            }
        }
        for t in &graph.tasks {
            if !self.assignments.contains_key(&t.id) && !self.unallocated.contains(&t.id) {
                return Err(format!("task {} missing from result", t.id));
            }
        }
        Ok(())
    }
}
