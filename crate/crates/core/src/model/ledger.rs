use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Money, TaskId, WorkerId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LedgerError {
    #[error("worker {worker} already accepted task {task}")]
    DuplicateAcceptance { worker: WorkerId, task: TaskId },
    #[error("worker {worker} never accepted task {task}")]
    NotAccepted { worker: WorkerId, task: TaskId },
    #[error("task {task} already allocated to worker {worker}")]
    DuplicateAllocation { worker: WorkerId, task: TaskId },
    #[error("worker {0} has no residual capacity")]
    CapacityExhausted(WorkerId),
    #[error("unknown worker {0}")]
    UnknownWorker(WorkerId),
}

/// Exact LAR as a ratio of cent sums. A zero denominator stands for LAR = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LarFraction {
    pub allocated_cents: i64,
    pub counted_cents: i64,
}

impl LarFraction {
    pub fn value(&self) -> f64 {
        if self.counted_cents == 0 {
            1.0
        } else {
            self.allocated_cents as f64 / self.counted_cents as f64
        }
    }

    fn effective(&self) -> (i128, i128) {
        if self.counted_cents == 0 {
            (1, 1)
        } else {
            (self.allocated_cents as i128, self.counted_cents as i128)
        }
    }

    /// Orders by LAR value using cross-multiplication, no rounding.
    pub fn cmp_value(&self, other: &LarFraction) -> Ordering {
        let (a, b) = self.effective();
        let (c, d) = other.effective();
        (a * d).cmp(&(c * b))
    }
}

/// Running record of what a worker accepted and what she was allocated.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorkerLedger {
    worker_id: WorkerId,
    capacity: u32,
    accepted: Vec<(TaskId, Money)>,
    allocated: Vec<(TaskId, Money)>,
    #[serde(skip)]
    accepted_pos: HashMap<TaskId, usize>,
    #[serde(skip)]
    allocated_flag: Vec<bool>,
    allocated_cents: i64,
    counted_cents: i64,
}

impl WorkerLedger {
    pub fn new(worker_id: WorkerId, capacity: u32) -> Self {
        Self {
            worker_id,
            capacity,
            accepted: Vec::new(),
            allocated: Vec::new(),
            accepted_pos: HashMap::new(),
            allocated_flag: Vec::new(),
            allocated_cents: 0,
            counted_cents: 0,
        }
    }

    pub fn worker_id(&self) -> WorkerId {
        self.worker_id
    }

    pub fn capacity(&self) -> u32 {
        self.capacity
    }

    /// Accepted offers in acceptance order.
    pub fn accepted(&self) -> &[(TaskId, Money)] {
        &self.accepted
    }

    pub fn allocated(&self) -> &[(TaskId, Money)] {
        &self.allocated
    }

    pub fn residual_capacity(&self) -> u32 {
        self.capacity - self.allocated.len() as u32
    }

    pub fn has_accepted(&self, task: TaskId) -> bool {
        self.accepted_pos.contains_key(&task)
    }

    pub fn record_acceptance(&mut self, task: TaskId, reward: Money) -> Result<(), LedgerError> {
        if self.accepted_pos.contains_key(&task) {
            return Err(LedgerError::DuplicateAcceptance {
                worker: self.worker_id,
                task,
            });
        }
        self.accepted_pos.insert(task, self.accepted.len());
        self.accepted.push((task, reward));
        self.allocated_flag.push(false);
        // only the first `capacity` acceptances enter the denominator
        if self.accepted.len() <= self.capacity as usize {
            self.counted_cents += reward.cents();
        }
        Ok(())
    }

    pub fn record_allocation(&mut self, task: TaskId) -> Result<(), LedgerError> {
        let pos = self.position(task).ok_or(LedgerError::NotAccepted {
            worker: self.worker_id,
            task,
        })?;
        self.record_allocation_at(pos)
    }

    /// Index of `task` in [`accepted`](Self::accepted).
    pub fn position(&self, task: TaskId) -> Option<usize> {
        self.accepted_pos.get(&task).copied()
    }

    /// Allocates the acceptance stored at `pos`.
    pub(crate) fn record_allocation_at(&mut self, pos: usize) -> Result<(), LedgerError> {
        let (task, reward) = self.accepted[pos];
        if self.allocated_flag[pos] {
            return Err(LedgerError::DuplicateAllocation {
                worker: self.worker_id,
                task,
            });
        }
        if self.residual_capacity() == 0 {
            return Err(LedgerError::CapacityExhausted(self.worker_id));
        }
        self.allocated_flag[pos] = true;
        self.allocated.push((task, reward));
        self.allocated_cents += reward.cents();
        Ok(())
    }

    /// Incrementally maintained LAR.
    pub fn lar_fraction(&self) -> LarFraction {
        LarFraction {
            allocated_cents: self.allocated_cents,
            counted_cents: self.counted_cents,
        }
    }

    /// Number of acceptances that enter the LAR denominator.
    pub fn counted_acceptances(&self) -> usize {
        self.accepted.len().min(self.capacity as usize)
    }
}

/// All worker ledgers of one simulation run, addressable by id or dense index.
#[derive(Debug, Clone, Default)]
pub struct Ledgers {
    ledgers: Vec<WorkerLedger>,
    index: HashMap<WorkerId, usize>,
}

impl Ledgers {
    pub fn new(workers: impl IntoIterator<Item = (WorkerId, u32)>) -> Self {
        let mut out = Ledgers::default();
        for (id, cap) in workers {
            out.insert(id, cap);
        }
        out
    }

    /// Adds a worker; an existing ledger for the same id is kept as is.
    pub fn insert(&mut self, id: WorkerId, capacity: u32) -> usize {
        if let Some(&i) = self.index.get(&id) {
            return i;
        }
        let i = self.ledgers.len();
        self.ledgers.push(WorkerLedger::new(id, capacity));
        self.index.insert(id, i);
        i
    }

    pub fn index_of(&self, id: WorkerId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn get(&self, id: WorkerId) -> Option<&WorkerLedger> {
        self.index_of(id).map(|i| &self.ledgers[i])
    }

    pub fn get_mut(&mut self, id: WorkerId) -> Option<&mut WorkerLedger> {
        self.index_of(id).map(move |i| &mut self.ledgers[i])
    }

    pub fn by_index(&self, i: usize) -> &WorkerLedger {
        &self.ledgers[i]
    }

    pub fn by_index_mut(&mut self, i: usize) -> &mut WorkerLedger {
        &mut self.ledgers[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &WorkerLedger> {
        self.ledgers.iter()
    }

    pub fn len(&self) -> usize {
        self.ledgers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ledgers.is_empty()
    }

    pub fn record_acceptance(
        &mut self,
        worker: WorkerId,
        task: TaskId,
        reward: Money,
    ) -> Result<(), LedgerError> {
        self.get_mut(worker)
            .ok_or(LedgerError::UnknownWorker(worker))?
            .record_acceptance(task, reward)
    }

    pub fn record_allocation(&mut self, worker: WorkerId, task: TaskId) -> Result<(), LedgerError> {
        self.get_mut(worker)
            .ok_or(LedgerError::UnknownWorker(worker))?
            .record_allocation(task)
    }

    pub fn total_accepted(&self) -> usize {
        self.ledgers.iter().map(|l| l.accepted.len()).sum()
    }

    pub fn total_allocated(&self) -> usize {
        self.ledgers.iter().map(|l| l.allocated.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(c: i64) -> Money {
        Money::from_cents(c).unwrap()
    }

    #[test]
    fn denominator_counts_first_capacity_acceptances() {
        let mut l = WorkerLedger::new(WorkerId(1), 2);
        for (t, r) in [(1, 10), (2, 20), (3, 30)] {
            l.record_acceptance(TaskId(t), m(r)).unwrap();
        }
        assert_eq!(l.lar_fraction().counted_cents, 30);
        l.record_allocation(TaskId(3)).unwrap();
        assert_eq!(l.lar_fraction().allocated_cents, 30);
        assert_eq!(l.residual_capacity(), 1);
    }

    #[test]
    fn allocation_errors() {
        let mut l = WorkerLedger::new(WorkerId(1), 1);
        assert_eq!(
            l.record_allocation(TaskId(9)),
            Err(LedgerError::NotAccepted {
                worker: WorkerId(1),
                task: TaskId(9)
            })
        );
        l.record_acceptance(TaskId(1), m(5)).unwrap();
        l.record_acceptance(TaskId(2), m(5)).unwrap();
        assert!(l.record_acceptance(TaskId(1), m(5)).is_err());
        l.record_allocation(TaskId(1)).unwrap();
        assert!(matches!(
            l.record_allocation(TaskId(1)),
            Err(LedgerError::DuplicateAllocation { .. })
        ));
        assert_eq!(
            l.record_allocation(TaskId(2)),
            Err(LedgerError::CapacityExhausted(WorkerId(1)))
        );
    }

    #[test]
    fn fraction_ordering_is_exact() {
        let third = LarFraction {
            allocated_cents: 1,
            counted_cents: 3,
        };
        let two_sixths = LarFraction {
            allocated_cents: 2,
            counted_cents: 6,
        };
        let empty = LarFraction {
            allocated_cents: 0,
            counted_cents: 0,
        };
        assert_eq!(third.cmp_value(&two_sixths), Ordering::Equal);
        assert_eq!(third.cmp_value(&empty), Ordering::Less);
        assert_eq!(empty.value(), 1.0);
    }
}
