//! Closed-form evaluation metrics: TAR, LAR, unfairness, AR and the combined objective.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Ledgers, WorkerLedger};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("unfairness undefined: empty LAR set")]
    EmptyLarSet,
    #[error("unfairness undefined: LAR mean is zero")]
    ZeroMean,
    #[error("task allocation ratio undefined: zero tasks")]
    NoTasks,
    #[error("allocated count {allocated} exceeds total {total}")]
    CountExceedsTotal { allocated: usize, total: usize },
}

/// LAR recomputed from the ledger lists alone.
///
/// Allocated reward over the reward of the first `min(|accepted|, capacity)`
/// acceptances in acceptance order; 1.0 when that denominator is zero.
pub fn lar(ledger: &WorkerLedger) -> f64 {
    let counted: i64 = ledger
        .accepted()
        .iter()
        .take(ledger.capacity() as usize)
        .map(|(_, m)| m.cents())
        .sum();
    if counted == 0 {
        return 1.0;
    }
    let earned: i64 = ledger.allocated().iter().map(|(_, m)| m.cents()).sum();
    earned as f64 / counted as f64
}

/// Coefficient of variation (population standard deviation over mean).
pub fn unfairness(lar_values: &[f64]) -> Result<f64, MetricsError> {
    if lar_values.is_empty() {
        return Err(MetricsError::EmptyLarSet);
    }
    let n = lar_values.len() as f64;
    let mean = lar_values.iter().sum::<f64>() / n;
    if mean <= 0.0 {
        return Err(MetricsError::ZeroMean);
    }
    let var = lar_values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt() / mean)
}

pub fn tar(allocated_count: usize, total_tasks: usize) -> Result<f64, MetricsError> {
    if total_tasks == 0 {
        return Err(MetricsError::NoTasks);
    }
    if allocated_count > total_tasks {
        return Err(MetricsError::CountExceedsTotal {
            allocated: allocated_count,
            total: total_tasks,
        });
    }
    Ok(allocated_count as f64 / total_tasks as f64)
}

/// Allocated tasks over accepted offers; vacuously 1 when nothing was accepted.
pub fn ar(allocated_count: usize, total_accepted_offers: usize) -> f64 {
    if total_accepted_offers == 0 {
        1.0
    } else {
        allocated_count as f64 / total_accepted_offers as f64
    }
}

pub fn objective(tar: f64, unfairness: f64, rho: f64) -> f64 {
    tar * (-rho * unfairness).exp()
}

/// Outcome of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tasks: usize,
    pub allocated: usize,
    pub accepted_offers: usize,
    pub tar: f64,
    pub unfairness: f64,
    pub ar: f64,
    pub objective: f64,
    pub avg_k: f64,
    pub avg_wait_rounds: f64,
    /// LAR of every worker with at least one counted acceptance, by worker id.
    pub lar_values: Vec<f64>,
    /// Dollars earned per travelled kilometre, for workers that travelled.
    pub earnings_per_km: Vec<f64>,
}

impl MetricsReport {
    /// Builds the report from final ledger state.
    ///
    /// Workers without counted acceptances stay out of the LAR set. An empty
    /// set or an all-zero set has no dispersion and reports unfairness 0.
    pub fn from_ledgers(
        ledgers: &Ledgers,
        total_tasks: usize,
        rho: f64,
        avg_k: f64,
        avg_wait_rounds: f64,
        earnings_per_km: Vec<f64>,
    ) -> Self {
        let mut participants: Vec<&WorkerLedger> = ledgers
            .iter()
            .filter(|l| l.counted_acceptances() > 0)
            .collect();
        participants.sort_by_key(|l| l.worker_id());
        let lar_values: Vec<f64> = participants.iter().map(|l| l.lar_fraction().value()).collect();
        let unfairness = unfairness(&lar_values).unwrap_or(0.0);
        let allocated = ledgers.total_allocated();
        let accepted_offers = ledgers.total_accepted();
        let tar = tar(allocated, total_tasks).unwrap_or(0.0);
        Self {
            tasks: total_tasks,
            allocated,
            accepted_offers,
            tar,
            unfairness,
            ar: ar(allocated, accepted_offers),
            objective: objective(tar, unfairness, rho),
            avg_k,
            avg_wait_rounds,
            lar_values,
            earnings_per_km,
        }
    }

    pub const CSV_COLUMNS: [&'static str; 11] = [
        "tasks",
        "allocated",
        "accepted_offers",
        "tar",
        "unfairness",
        "ar",
        "objective",
        "avg_k",
        "avg_wait_rounds",
        "participants",
        "mean_earnings_per_km",
    ];

    /// Scalar fields in [`Self::CSV_COLUMNS`] order.
    pub fn csv_values(&self) -> Vec<String> {
        let mean_epk = if self.earnings_per_km.is_empty() {
            0.0
        } else {
            self.earnings_per_km.iter().sum::<f64>() / self.earnings_per_km.len() as f64
        };
        vec![
            self.tasks.to_string(),
            self.allocated.to_string(),
            self.accepted_offers.to_string(),
            self.tar.to_string(),
            self.unfairness.to_string(),
            self.ar.to_string(),
            self.objective.to_string(),
            self.avg_k.to_string(),
            self.avg_wait_rounds.to_string(),
            self.lar_values.len().to_string(),
            mean_epk.to_string(),
        ]
    }

    /// Scalar metrics used when aggregating over seeds.
    pub fn scalar(&self, column: &str) -> Option<f64> {
        Some(match column {
            "tar" => self.tar,
            "unfairness" => self.unfairness,
            "ar" => self.ar,
            "objective" => self.objective,
            "avg_k" => self.avg_k,
            "avg_wait_rounds" => self.avg_wait_rounds,
            _ => return None,
        })
    }
}
