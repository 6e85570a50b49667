//! Oracle, accuracy metrics and experiment harnesses.

pub mod bench;
pub mod metrics;
pub mod oracle;
pub mod sweep;

use thiserror::Error;

use crate::model::ModelError;
use crate::pipeline::PipelineError;
use crate::simulator::SimulationError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty sweep grid")]
    EmptyGrid,
    #[error("benchmark needs at least {minimum} events, got {requested}")]
    TooFewEvents { requested: usize, minimum: usize },
    #[error("channel {channel_id} failed: {message}")]
    ChannelFailed { channel_id: u32, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Score(#[from] metrics::LengthMismatch),
}

pub use bench::{bench_streams, bench_throughput, BenchConfig, BenchReport};
pub use metrics::{score, AccuracyReport};
pub use oracle::{oracle_decode, OracleResult};
pub use sweep::{sweep_accuracy, SweepCell, SweepConfig};
