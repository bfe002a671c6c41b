//! Two-phase fair task allocation for crowdsourced delivery.
//!
//! Tasks are matched to worker availabilities ([`nomination`]), offered to
//! batches of nominees ([`offers`]) and allocated among the workers who
//! accepted ([`allocation`]). [`online`] replays the same pipeline over a
//! timestamped event stream, [`data`] loads and synthesizes workloads and
//! [`experiment`] drives runs and sweeps.

pub mod allocation;
pub mod data;
pub mod experiment;
pub mod geo;
pub mod model;
pub mod nomination;
pub mod offers;
pub mod online;
pub mod pipeline;

pub use allocation::{Algorithm, AssignmentGraph, AssignmentResult};
pub use model::{Availability, GeoPoint, Money, Task, TaskId, TimePeriod, Worker, WorkerId};
pub use offers::{OfferMode, OfferPolicy};
pub use pipeline::{offer_phase, run_offline, PipelineConfig, RunOutcome};
