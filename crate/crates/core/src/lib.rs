//! Viterbi decoding of nanopore event streams over a k-mer state space.

pub mod cost;
pub mod eval;
pub mod formats;
pub mod model;
pub mod pipeline;
pub mod simulator;
pub mod traceback;
pub mod transitions;
pub mod trellis;

pub use cost::{Cost, ExactCost};
pub use model::{
    decode_kmer, encode_kmer, load_model, n_states, save_model, synth_model, KmerModel, ModelError,
    TransitionKinetics, DEFAULT_LEVEL_SPREAD, DEFAULT_SIGMA_BASE, LANES, MAX_K, MIN_K,
};
pub use pipeline::{
    chunk_stream, run_channels, splice, ChannelConfig, ChannelOutput, ChunkSize, Detector, EventChunk,
    EventSource, PipelineError, RunSummary, VecSource,
};
pub use traceback::{assemble_read, trace, Read, StatePath, TracebackError};
pub use transitions::{build_table, TransitionClass, TransitionTable};
pub use trellis::{
    construct, construct_streaming, construct_with, Normalization, PointerMatrix, TrellisError,
    TrellisOptions, TrellisResult, Variant,
};
pub use simulator::{derive_seed, simulate, GroundTruth, SimulationError, SimulationSpec};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/transitions.md")]
    mod transitions {}
    #[doc = include_str!("../../../book/src/trellis.md")]
    mod trellis {}
    #[doc = include_str!("../../../book/src/traceback.md")]
    mod traceback {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
