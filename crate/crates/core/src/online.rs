//! Online variant: tasks and availabilities arrive as timestamped events and
//! the pipeline runs at window boundaries, or on every arrival when the
//! window length is zero.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::{AssignmentGraph, AssignmentResult};
use crate::model::{Availability, ModelError, Task, TaskId, Timestamp, Worker, WorkerId};
use crate::nomination::{nominee_list, Nominee, TemporalIndex};
use crate::pipeline::{Dispatcher, PipelineConfig, PipelineError, RunOutcome};

#[derive(Debug, Error)]
pub enum OnlineError {
    #[error("event {index} at t={time} precedes the previous event at t={previous}")]
    Unsorted {
        index: usize,
        time: Timestamp,
        previous: Timestamp,
    },
    #[error("availability for worker {0} with no known capacity")]
    UnknownWorker(WorkerId),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    TaskArrival { time: Timestamp, task: Task },
    AvailabilityArrival { time: Timestamp, availability: Availability },
}

impl Event {
    pub fn time(&self) -> Timestamp {
        match self {
            Event::TaskArrival { time, .. } | Event::AvailabilityArrival { time, .. } => *time,
        }
    }
}

/// Events in nondecreasing time order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventStream {
    events: Vec<Event>,
}

impl EventStream {
    pub fn new(events: Vec<Event>) -> Result<Self, OnlineError> {
        for (i, pair) in events.windows(2).enumerate() {
            if pair[1].time() < pair[0].time() {
                return Err(OnlineError::Unsorted {
                    index: i + 1,
                    time: pair[1].time(),
                    previous: pair[0].time(),
                });
            }
        }
        Ok(Self { events })
    }

    /// Builds a stream where every record arrives `lead` seconds before its
    /// period begins. At equal times availabilities come first, then tasks;
    /// both in id order.
    pub fn from_workload(tasks: &[Task], workers: &[Worker], lead: i64) -> Self {
        let mut keyed: Vec<((Timestamp, u8, u64, usize), Event)> = Vec::new();
        for w in workers {
            for (slot, a) in w.availabilities().iter().enumerate() {
                let time = a.period.begin() - lead;
                keyed.push((
                    (time, 0, w.id.0, slot),
                    Event::AvailabilityArrival {
                        time,
                        availability: a.clone(),
                    },
                ));
            }
        }
        for t in tasks {
            let time = t.source_period.begin() - lead;
            keyed.push((
                (time, 1, t.id.0, 0),
                Event::TaskArrival {
                    time,
                    task: t.clone(),
                },
            ));
        }
        keyed.sort_by_key(|(k, _)| *k);
        Self {
            events: keyed.into_iter().map(|(_, e)| e).collect(),
        }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn span(&self) -> Option<(Timestamp, Timestamp)> {
        Some((self.events.first()?.time(), self.events.last()?.time()))
    }
}

#[derive(Debug, Clone)]
struct PendingTask {
    task: Task,
    offered: HashSet<WorkerId>,
}

/// Pending tasks and live availabilities between processing passes.
#[derive(Debug)]
pub struct MatchWindow {
    window_len: i64,
    pending: BTreeMap<TaskId, PendingTask>,
    live: BTreeMap<WorkerId, Vec<Availability>>,
}

impl MatchWindow {
    /// `window_len` in seconds; 0 selects instant mode.
    pub fn new(window_len: i64) -> Self {
        Self {
            window_len: window_len.max(0),
            pending: BTreeMap::new(),
            live: BTreeMap::new(),
        }
    }

    pub fn window_len(&self) -> i64 {
        self.window_len
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn live_len(&self) -> usize {
        self.live.values().map(Vec::len).sum()
    }

    /// Workers already offered `task`, if it is pending.
    pub fn offered_to(&self, task: TaskId) -> Option<&HashSet<WorkerId>> {
        self.pending.get(&task).map(|p| &p.offered)
    }

    /// Drops availabilities and tasks whose periods ended before `now`.
    fn expire(&mut self, now: Timestamp) -> Vec<TaskId> {
        for avails in self.live.values_mut() {
            avails.retain(|a| a.period.end() >= now);
        }
        self.live.retain(|_, v| !v.is_empty());
        let expired: Vec<TaskId> = self
            .pending
            .iter()
            .filter(|(_, p)| p.task.source_period.end() < now)
            .map(|(id, _)| *id)
            .collect();
        for id in &expired {
            self.pending.remove(id);
        }
        expired
    }
}

/// Event loop driving a [`Dispatcher`] over an [`EventStream`].
#[derive(Debug)]
pub struct OnlineEngine {
    window: MatchWindow,
    dispatcher: Dispatcher,
    capacities: HashMap<WorkerId, u32>,
    task_count: usize,
    passes: u64,
}

impl OnlineEngine {
    pub fn new(
        config: PipelineConfig,
        window_len: i64,
        capacities: impl IntoIterator<Item = (WorkerId, u32)>,
        trace: bool,
    ) -> Result<Self, OnlineError> {
        let capacities: HashMap<WorkerId, u32> = capacities.into_iter().collect();
        let mut sorted: Vec<_> = capacities.iter().map(|(w, c)| (*w, *c)).collect();
        sorted.sort();
        Ok(Self {
            window: MatchWindow::new(window_len),
            dispatcher: Dispatcher::new(config, sorted, trace)?,
            capacities,
            task_count: 0,
            passes: 0,
        })
    }

    pub fn assignments(&self) -> &AssignmentResult {
        self.dispatcher.assignments()
    }

    pub fn window(&self) -> &MatchWindow {
        &self.window
    }

    /// Number of processing passes that reached the offer stage.
    pub fn passes(&self) -> u64 {
        self.passes
    }

    /// Windowed run: boundaries fire every `window_len` seconds from the first
    /// event. The run ends when the window holding the last event closes, so a
    /// window longer than the stream gives exactly one matching round.
    pub fn advance(&mut self, stream: &EventStream) -> Result<(), OnlineError> {
        if self.window.window_len == 0 {
            return self.advance_instant(stream);
        }
        let Some((start, _)) = stream.span() else {
            return Ok(());
        };
        let mut boundary = start + self.window.window_len;
        for event in stream.events() {
            while boundary < event.time() {
                self.process(boundary, None)?;
                boundary += self.window.window_len;
            }
            self.admit(event)?;
        }
        self.process(boundary, None)
    }

    /// Instant mode: a task is processed on arrival, and every availability
    /// arrival reprocesses all parked tasks.
    pub fn advance_instant(&mut self, stream: &EventStream) -> Result<(), OnlineError> {
        for event in stream.events() {
            self.admit(event)?;
            match event {
                Event::TaskArrival { time, task } => self.process(*time, Some(task.id))?,
                Event::AvailabilityArrival { time, .. } => self.process(*time, None)?,
            }
        }
        Ok(())
    }

    fn admit(&mut self, event: &Event) -> Result<(), OnlineError> {
        match event {
            Event::TaskArrival { task, .. } => {
                self.task_count += 1;
                self.window.pending.insert(
                    task.id,
                    PendingTask {
                        task: task.clone(),
                        offered: HashSet::new(),
                    },
                );
            }
            Event::AvailabilityArrival { availability, .. } => {
                if !self.capacities.contains_key(&availability.worker_id) {
                    return Err(OnlineError::UnknownWorker(availability.worker_id));
                }
                self.window
                    .live
                    .entry(availability.worker_id)
                    .or_default()
                    .push(availability.clone());
            }
        }
        Ok(())
    }

    /// One nominate → offer → allocate pass at time `now`, over every pending
    /// task or only `only`.
    fn process(&mut self, now: Timestamp, only: Option<TaskId>) -> Result<(), OnlineError> {
        for id in self.window.expire(now) {
            self.dispatcher.mark_unallocated(id);
        }
        if self.window.pending.is_empty() || self.window.live.is_empty() {
            return Ok(());
        }
        let workers: Vec<Worker> = self
            .window
            .live
            .iter()
            .map(|(id, avails)| Worker::new(*id, avails.clone(), self.capacities[id]))
            .collect::<Result<_, _>>()?;
        let index = TemporalIndex::build(&workers);
        let config = *self.dispatcher.config();
        let tasks: Vec<&PendingTask> = match only {
            Some(id) => self.window.pending.get(&id).into_iter().collect(),
            None => self.window.pending.values().collect(),
        };
        let lists: Vec<Vec<Nominee>> = tasks
            .par_iter()
            .map(|p| nominee_list(&p.task, &workers, &index, &config.metric, config.base_acceptance))
            .collect::<Result<_, _>>()
            .map_err(PipelineError::from)?;
        let ids: Vec<TaskId> = tasks.iter().map(|p| p.task.id).collect();

        let mut graph_tasks = Vec::new();
        for (id, nominees) in ids.into_iter().zip(lists) {
            let pending = self.window.pending.get_mut(&id).expect("pending task");
            if let Some((session, gt)) = self.dispatcher.offer(&pending.task, &nominees, &pending.offered)? {
                pending.offered.extend(session.offered);
                if !gt.candidates.is_empty() {
                    graph_tasks.push(gt);
                }
            }
        }
        if graph_tasks.is_empty() {
            return Ok(());
        }
        self.passes += 1;
        let result = self.dispatcher.allocate(&AssignmentGraph::new(graph_tasks))?;
        for id in result.assignments.keys() {
            self.window.pending.remove(id);
        }
        Ok(())
    }

    /// Tasks still pending are counted unallocated.
    pub fn finish(mut self) -> RunOutcome {
        for id in std::mem::take(&mut self.window.pending).into_keys() {
            self.dispatcher.mark_unallocated(id);
        }
        self.dispatcher.finish(self.task_count)
    }
}

/// Runs the online engine over `stream` with capacities taken from `workers`.
/// `window_len` is in seconds; 0 selects instant mode.
pub fn run_online(
    stream: &EventStream,
    workers: &[Worker],
    config: &PipelineConfig,
    window_len: i64,
    trace: bool,
) -> Result<RunOutcome, OnlineError> {
    let mut engine = OnlineEngine::new(
        *config,
        window_len,
        workers.iter().map(|w| (w.id, w.capacity)),
        trace,
    )?;
    engine.advance(stream)?;
    Ok(engine.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::MetricKind;
    use crate::model::{GeoPoint, Money, TimePeriod};

    fn planar() -> PipelineConfig {
        PipelineConfig {
            metric: MetricKind::Planar,
            base_acceptance: 1.0,
            ..PipelineConfig::default()
        }
    }

    fn task(id: u64, begin: i64, end: i64) -> Task {
        let p = GeoPoint::new(0.0, 0.0).unwrap();
        Task {
            id: TaskId(id),
            source_period: TimePeriod::new(begin, end).unwrap(),
            source_loc: p,
            dest_period: TimePeriod::new(begin, end).unwrap(),
            dest_loc: p,
            reward: Money::from_cents(100).unwrap(),
        }
    }

    fn avail(worker: u64, begin: i64, end: i64) -> Availability {
        Availability::new(
            WorkerId(worker),
            TimePeriod::new(begin, end).unwrap(),
            GeoPoint::new(0.0, 0.0).unwrap(),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn unsorted_stream_is_rejected() {
        let events = vec![
            Event::TaskArrival { time: 5, task: task(1, 5, 10) },
            Event::TaskArrival { time: 4, task: task(2, 4, 10) },
        ];
        assert!(matches!(
            EventStream::new(events),
            Err(OnlineError::Unsorted { index: 1, .. })
        ));
    }

    #[test]
    fn unknown_worker_is_rejected() {
        let stream = EventStream::new(vec![Event::AvailabilityArrival {
            time: 0,
            availability: avail(7, 0, 10),
        }])
        .unwrap();
        let mut engine = OnlineEngine::new(planar(), 60, [], false).unwrap();
        assert!(matches!(engine.advance(&stream), Err(OnlineError::UnknownWorker(_))));
    }

    #[test]
    fn expiry_is_strict() {
        let mut w = MatchWindow::new(10);
        w.live.insert(WorkerId(1), vec![avail(1, 0, 10)]);
        w.pending.insert(
            TaskId(1),
            PendingTask {
                task: task(1, 0, 10),
                offered: HashSet::new(),
            },
        );
        assert!(w.expire(10).is_empty());
        assert_eq!(w.live_len(), 1);
        assert_eq!(w.expire(11), vec![TaskId(1)]);
        assert_eq!(w.live_len(), 0);
    }
}
