//! Batched progressive offers: choose the batch size `k` for a task and offer
//! it to successive batches of nominees until someone accepts.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{TaskId, WorkerId};
use crate::nomination::Nominee;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OffersError {
    #[error("batch size {k} outside 1..={len}")]
    BatchSize { k: usize, len: usize },
    #[error("empty nominee list")]
    NoNominees,
    #[error("epsilon {0} outside (0, 1]")]
    Epsilon(f64),
    #[error("theta {0} outside [0, 1]")]
    Theta(f64),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OfferMode {
    Unicast,
    #[default]
    Multicast,
    Broadcast,
}

impl std::str::FromStr for OfferMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unicast" => Ok(OfferMode::Unicast),
            "multicast" => Ok(OfferMode::Multicast),
            "broadcast" => Ok(OfferMode::Broadcast),
            other => Err(format!("unknown offer mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OfferPolicy {
    /// Threshold on the probability of at least one response.
    pub epsilon: f64,
    /// Threshold on the expected assignment ratio.
    pub theta: f64,
    pub mode: OfferMode,
}

impl Default for OfferPolicy {
    fn default() -> Self {
        Self {
            epsilon: 0.8,
            theta: 0.4,
            mode: OfferMode::Multicast,
        }
    }
}

impl OfferPolicy {
    pub fn validate(&self) -> Result<(), OffersError> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(OffersError::Epsilon(self.epsilon));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(OffersError::Theta(self.theta));
        }
        Ok(())
    }
}

fn check_k(k: usize, len: usize) -> Result<(), OffersError> {
    if k == 0 || k > len {
        return Err(OffersError::BatchSize { k, len });
    }
    Ok(())
}

/// Probability that at least one of the first `k` nominees accepts.
pub fn response_probability(k: usize, probs: &[f64]) -> Result<f64, OffersError> {
    check_k(k, probs.len())?;
    Ok(1.0 - probs[..k].iter().map(|r| 1.0 - r).product::<f64>())
}

/// `1 / (R_1 + ... + R_k)`, a lower bound on the expected assignment ratio.
pub fn expected_ar_lower_bound(k: usize, probs: &[f64]) -> Result<f64, OffersError> {
    check_k(k, probs.len())?;
    Ok(1.0 / probs[..k].iter().sum::<f64>())
}

/// Batch size for a nominee list sorted by acceptance probability descending.
///
/// The largest `k` in `[k_low, k_up]`, where `k_low` is the smallest batch
/// reaching response probability `epsilon` and `k_up` the largest batch whose
/// expected assignment ratio stays above `theta`. On conflict the theta bound
/// gives way and `k_low` is used; if no batch reaches `epsilon` every nominee
/// is offered at once.
pub fn select_k(probs: &[f64], policy: &OfferPolicy) -> Result<usize, OffersError> {
    let n = probs.len();
    if n == 0 {
        return Err(OffersError::NoNominees);
    }
    match policy.mode {
        OfferMode::Unicast => return Ok(1),
        OfferMode::Broadcast => return Ok(n),
        OfferMode::Multicast => {}
    }

    let mut k_low = None;
    let mut refuse_all = 1.0;
    for (i, r) in probs.iter().enumerate() {
        refuse_all *= 1.0 - r;
        if 1.0 - refuse_all >= policy.epsilon {
            k_low = Some(i + 1);
            break;
        }
    }
    let Some(k_low) = k_low else {
        return Ok(n);
    };

    let mut k_up = 0;
    let mut sum = 0.0;
    for (i, r) in probs.iter().enumerate() {
        sum += r;
        if 1.0 / sum >= policy.theta {
            k_up = i + 1;
        } else {
            break;
        }
    }

    Ok(if k_low <= k_up { k_up } else { k_low })
}

/// Source of accept/reject decisions for offers.
pub trait AcceptanceSampler {
    fn accepts(&mut self, task: TaskId, worker: WorkerId, prob: f64) -> bool;
}

/// Draws one uniform per `(seed, task, worker)` from a ChaCha stream: the task
/// id selects the stream and the worker id the position inside it. Offering
/// the same task to the same worker twice replays the same draw.
#[derive(Debug, Clone)]
pub struct KeyedSampler {
    base: ChaCha8Rng,
}

impl KeyedSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn uniform(&self, task: TaskId, worker: WorkerId) -> f64 {
        let mut rng = self.base.clone();
        rng.set_stream(task.0);
        rng.set_word_pos(worker.0 as u128 * 2);
        rng.random::<f64>()
    }
}

impl AcceptanceSampler for KeyedSampler {
    fn accepts(&mut self, task: TaskId, worker: WorkerId, prob: f64) -> bool {
        self.uniform(task, worker) < prob
    }
}

/// Sequential draws from any RNG, ignoring the keys.
#[derive(Debug, Clone)]
pub struct StreamSampler<R>(pub R);

impl<R: RngCore> AcceptanceSampler for StreamSampler<R> {
    fn accepts(&mut self, _task: TaskId, _worker: WorkerId, prob: f64) -> bool {
        self.0.random::<f64>() < prob
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfferSession {
    pub task_id: TaskId,
    /// Nominees in offer order with their acceptance probabilities.
    pub nominees: Vec<(WorkerId, f64)>,
    pub k: usize,
    pub rounds_waited: u32,
    pub offered: Vec<WorkerId>,
    /// Workers that accepted, in acceptance order.
    pub candidates: Vec<WorkerId>,
}

/// Chooses `k` with [`select_k`] and runs the offer rounds.
pub fn run_offer_rounds(
    task_id: TaskId,
    nominees: &[Nominee],
    policy: &OfferPolicy,
    sampler: &mut impl AcceptanceSampler,
    max_rounds: Option<u32>,
) -> Result<OfferSession, OffersError> {
    let probs: Vec<f64> = nominees.iter().map(|n| n.acceptance_prob).collect();
    let k = select_k(&probs, policy)?;
    let list: Vec<(WorkerId, f64)> = nominees
        .iter()
        .map(|n| (n.worker_id, n.acceptance_prob))
        .collect();
    run_rounds_with_k(task_id, list, k, sampler, max_rounds)
}

/// Offers to batches of `k` (the last batch may be shorter) until a batch
/// yields a candidate, the list is exhausted, or `max_rounds` batches ran.
pub fn run_rounds_with_k(
    task_id: TaskId,
    nominees: Vec<(WorkerId, f64)>,
    k: usize,
    sampler: &mut impl AcceptanceSampler,
    max_rounds: Option<u32>,
) -> Result<OfferSession, OffersError> {
    if nominees.is_empty() {
        return Err(OffersError::NoNominees);
    }
    check_k(k, nominees.len())?;
    let mut session = OfferSession {
        task_id,
        nominees,
        k,
        rounds_waited: 0,
        offered: Vec::new(),
        candidates: Vec::new(),
    };
    for batch in session.nominees.chunks(k) {
        if max_rounds.is_some_and(|m| session.rounds_waited >= m) {
            break;
        }
        session.rounds_waited += 1;
        for &(worker, prob) in batch {
            session.offered.push(worker);
            if sampler.accepts(task_id, worker, prob) {
                session.candidates.push(worker);
            }
        }
        if !session.candidates.is_empty() {
            break;
        }
    }
    Ok(session)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn multicast(epsilon: f64, theta: f64) -> OfferPolicy {
        OfferPolicy {
            epsilon,
            theta,
            mode: OfferMode::Multicast,
        }
    }

    #[test]
    fn k_out_of_range() {
        assert!(response_probability(0, &[0.5]).is_err());
        assert!(expected_ar_lower_bound(2, &[0.5]).is_err());
        assert_eq!(
            select_k(&[], &OfferPolicy::default()),
            Err(OffersError::NoNominees)
        );
    }

    #[test]
    fn unreachable_epsilon_offers_everyone() {
        assert_eq!(select_k(&[0.1, 0.1, 0.1], &multicast(0.99, 0.0)), Ok(3));
    }

    #[test]
    fn theta_zero_is_unbounded() {
        assert_eq!(select_k(&[0.9, 0.9, 0.9, 0.9], &multicast(0.5, 0.0)), Ok(4));
    }

    #[test]
    fn policy_validation() {
        assert!(multicast(0.0, 0.5).validate().is_err());
        assert!(multicast(0.5, 1.5).validate().is_err());
        assert!(multicast(1.0, 0.0).validate().is_ok());
    }

    #[test]
    fn keyed_sampler_replays_and_varies() {
        let s = KeyedSampler::new(3);
        let u = s.uniform(TaskId(5), WorkerId(9));
        assert_eq!(u, s.uniform(TaskId(5), WorkerId(9)));
        assert_ne!(u, s.uniform(TaskId(5), WorkerId(10)));
        assert_ne!(u, s.uniform(TaskId(6), WorkerId(9)));
        assert_ne!(u, KeyedSampler::new(4).uniform(TaskId(5), WorkerId(9)));
    }

    #[test]
    fn max_rounds_caps_batches() {
        let list = vec![(WorkerId(1), 0.0), (WorkerId(2), 0.0), (WorkerId(3), 0.0)];
        let mut s = KeyedSampler::new(0);
        let session = run_rounds_with_k(TaskId(1), list, 1, &mut s, Some(2)).unwrap();
        assert_eq!(session.rounds_waited, 2);
        assert_eq!(session.offered, vec![WorkerId(1), WorkerId(2)]);
    }
}
