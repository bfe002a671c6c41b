//! Phase one: find the workers able to serve a task and estimate how likely
//! each of them is to accept it.

mod index;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::Metric;
use crate::model::{Availability, GeoPoint, Task, TimePeriod, Worker, WorkerId};

pub use index::{AvailabilityRef, IntervalTree, TemporalIndex};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NominationError {
    #[error("alpha {alpha} exceeds beta {beta}; distance function breaks the triangle inequality")]
    TriangleViolation { alpha: f64, beta: f64 },
    #[error("base acceptance {0} outside [0, 1]")]
    BaseAcceptance(f64),
}

/// Slots (within one worker's availability list) serving the receive and
/// deliver steps. Both slots may be the same availability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SatisfyingPair {
    pub receive: usize,
    pub deliver: usize,
}

impl SatisfyingPair {
    pub fn is_single(&self) -> bool {
        self.receive == self.deliver
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nominee {
    pub worker_id: WorkerId,
    pub pair: SatisfyingPair,
    pub alpha: f64,
    pub beta: f64,
    pub acceptance_prob: f64,
}

/// Whether an availability can serve one step of a task.
pub fn satisfies(
    step_period: &TimePeriod,
    step_loc: &GeoPoint,
    a: &Availability,
    metric: &impl Metric,
) -> bool {
    step_period.overlaps(&a.period) && metric.distance(step_loc, &a.center) <= a.radius_km()
}

/// The beta-minimising satisfying pair of `worker` for `task`, if any.
///
/// Ties keep the lexicographically smallest `(receive, deliver)` slot pair.
pub fn nominate(task: &Task, worker: &Worker, metric: &impl Metric) -> Option<SatisfyingPair> {
    let avail = worker.availabilities();
    let receive: Vec<usize> = (0..avail.len())
        .filter(|&i| satisfies(&task.source_period, &task.source_loc, &avail[i], metric))
        .collect();
    if receive.is_empty() {
        return None;
    }
    let deliver: Vec<usize> = (0..avail.len())
        .filter(|&i| satisfies(&task.dest_period, &task.dest_loc, &avail[i], metric))
        .collect();
    best_pair(task, avail, &receive, &deliver, metric).map(|(pair, _, _)| pair)
}

fn best_pair(
    task: &Task,
    avail: &[Availability],
    receive: &[usize],
    deliver: &[usize],
    metric: &impl Metric,
) -> Option<(SatisfyingPair, f64, f64)> {
    let mut best: Option<(SatisfyingPair, f64, f64)> = None;
    for &p in receive {
        for &q in deliver {
            let (alpha, beta) = movement_cost_between(task, &avail[p], &avail[q], p == q, metric);
            if best.as_ref().is_none_or(|(_, _, b)| beta < *b) {
                best = Some((SatisfyingPair { receive: p, deliver: q }, alpha, beta));
            }
        }
    }
    best
}

/// `(alpha, beta)` for a worker's satisfying pair.
pub fn movement_cost(
    task: &Task,
    worker: &Worker,
    pair: SatisfyingPair,
    metric: &impl Metric,
) -> (f64, f64) {
    let avail = worker.availabilities();
    movement_cost_between(
        task,
        &avail[pair.receive],
        &avail[pair.deliver],
        pair.is_single(),
        metric,
    )
}

/// Movement cost split into the worker-independent `alpha` (source to
/// destination) and the worker-dependent `beta`.
///
/// With one availability the worker leaves its centre for the source and
/// returns from the destination. With two, each leg to and from an anchor is
/// travelled twice, plus the hop between the two anchors.
pub fn movement_cost_between(
    task: &Task,
    receive: &Availability,
    deliver: &Availability,
    single: bool,
    metric: &impl Metric,
) -> (f64, f64) {
    let alpha = metric.distance(&task.source_loc, &task.dest_loc);
    let beta = if single {
        metric.distance(&receive.center, &task.source_loc)
            + metric.distance(&task.dest_loc, &receive.center)
    } else {
        2.0 * metric.distance(&receive.center, &task.source_loc)
            + 2.0 * metric.distance(&task.dest_loc, &deliver.center)
            + metric.distance(&receive.center, &deliver.center)
    };
    // collinear layouts can leave beta an ulp below alpha
    if alpha > beta && alpha - beta <= 1e-9 * alpha.max(1.0) {
        return (alpha, alpha);
    }
    (alpha, beta)
}

/// `e^(alpha - beta) * base_acceptance`.
pub fn acceptance_probability(
    alpha: f64,
    beta: f64,
    base_acceptance: f64,
) -> Result<f64, NominationError> {
    if !(0.0..=1.0).contains(&base_acceptance) {
        return Err(NominationError::BaseAcceptance(base_acceptance));
    }
    if alpha > beta {
        return Err(NominationError::TriangleViolation { alpha, beta });
    }
    Ok((alpha - beta).exp() * base_acceptance)
}

fn sort_nominees(list: &mut [Nominee]) {
    list.sort_by(|a, b| {
        b.acceptance_prob
            .total_cmp(&a.acceptance_prob)
            .then(a.worker_id.cmp(&b.worker_id))
    });
}

fn make_nominee(
    worker: &Worker,
    pair: SatisfyingPair,
    alpha: f64,
    beta: f64,
    base_acceptance: f64,
) -> Result<Nominee, NominationError> {
    Ok(Nominee {
        worker_id: worker.id,
        pair,
        alpha,
        beta,
        acceptance_prob: acceptance_probability(alpha, beta, base_acceptance)?,
    })
}

/// Nominees of `task`, sorted by acceptance probability descending and
/// worker id ascending. Uses two temporal index queries followed by a spatial
/// filter on the hits.
pub fn nominee_list(
    task: &Task,
    workers: &[Worker],
    index: &TemporalIndex,
    metric: &impl Metric,
    base_acceptance: f64,
) -> Result<Vec<Nominee>, NominationError> {
    let step_hits = |period: &TimePeriod, loc: &GeoPoint| {
        let mut hits = Vec::new();
        index.for_each_overlap(period, |r| {
            let a = &workers[r.worker as usize].availabilities()[r.slot as usize];
            if metric.distance(loc, &a.center) <= a.radius_km() {
                hits.push(r);
            }
        });
        hits.sort_unstable();
        hits
    };
    let receive = step_hits(&task.source_period, &task.source_loc);
    if receive.is_empty() {
        return Ok(Vec::new());
    }
    let deliver = step_hits(&task.dest_period, &task.dest_loc);

    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    let mut rs = Vec::new();
    let mut ds = Vec::new();
    while i < receive.len() && j < deliver.len() {
        let (wr, wd) = (receive[i].worker, deliver[j].worker);
        match wr.cmp(&wd) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                rs.clear();
                ds.clear();
                while i < receive.len() && receive[i].worker == wr {
                    rs.push(receive[i].slot as usize);
                    i += 1;
                }
                while j < deliver.len() && deliver[j].worker == wr {
                    ds.push(deliver[j].slot as usize);
                    j += 1;
                }
                let worker = &workers[wr as usize];
                if let Some((pair, alpha, beta)) =
                    best_pair(task, worker.availabilities(), &rs, &ds, metric)
                {
                    out.push(make_nominee(worker, pair, alpha, beta, base_acceptance)?);
                }
            }
        }
    }
    sort_nominees(&mut out);
    Ok(out)
}

/// Same contract as [`nominee_list`] by scanning every worker.
pub fn nominee_list_scan(
    task: &Task,
    workers: &[Worker],
    metric: &impl Metric,
    base_acceptance: f64,
) -> Result<Vec<Nominee>, NominationError> {
    let mut out = Vec::new();
    for worker in workers {
        if let Some(pair) = nominate(task, worker, metric) {
            let (alpha, beta) = movement_cost(task, worker, pair, metric);
            out.push(make_nominee(worker, pair, alpha, beta, base_acceptance)?);
        }
    }
    sort_nominees(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::Planar;
    use crate::model::{Money, TaskId};

    fn p(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    fn period(b: i64, e: i64) -> TimePeriod {
        TimePeriod::new(b, e).unwrap()
    }

    fn task(src: GeoPoint, hs: TimePeriod, dst: GeoPoint, hr: TimePeriod) -> Task {
        Task {
            id: TaskId(1),
            source_period: hs,
            source_loc: src,
            dest_period: hr,
            dest_loc: dst,
            reward: Money::from_cents(100).unwrap(),
        }
    }

    fn avail(w: u64, per: TimePeriod, c: GeoPoint, r: f64) -> Availability {
        Availability::new(WorkerId(w), per, c, r).unwrap()
    }

    #[test]
    fn rejects_bad_base_acceptance() {
        assert!(acceptance_probability(0.0, 1.0, 1.5).is_err());
        assert!(matches!(
            acceptance_probability(2.0, 1.0, 0.5),
            Err(NominationError::TriangleViolation { .. })
        ));
    }

    #[test]
    fn picks_cheapest_pair() {
        // slot 0 and 1 both cover the source; slot 1 is closer, slot 2 covers the destination
        let t = task(p(0.0, 1.0), period(0, 10), p(0.0, 5.0), period(20, 30));
        let w = Worker::new(
            WorkerId(1),
            vec![
                avail(1, period(0, 10), p(0.0, 3.0), 3.0),
                avail(1, period(0, 10), p(0.0, 1.0), 1.0),
                avail(1, period(20, 30), p(0.0, 5.0), 1.0),
            ],
            1,
        )
        .unwrap();
        assert_eq!(
            nominate(&t, &w, &Planar),
            Some(SatisfyingPair {
                receive: 1,
                deliver: 2
            })
        );
    }

    #[test]
    fn adding_availability_keeps_nomination() {
        let t = task(p(0.0, 0.0), period(0, 10), p(0.0, 1.0), period(0, 10));
        let mut w = Worker::new(
            WorkerId(1),
            vec![avail(1, period(0, 10), p(0.0, 0.5), 1.0)],
            1,
        )
        .unwrap();
        assert!(nominate(&t, &w, &Planar).is_some());
        w.push_availability(avail(1, period(50, 60), p(9.0, 9.0), 1.0))
            .unwrap();
        assert!(nominate(&t, &w, &Planar).is_some());
    }
}
