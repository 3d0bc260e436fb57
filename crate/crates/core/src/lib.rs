//! Stochastic spiking attention.
//!
//! Spiking Q/K/V streams are multiplied with AND gates and re-encoded as
//! Bernoulli spikes, so attention needs no multipliers. The crate provides:
//!
//! * [`sc`]: LFSR-driven Bernoulli encoders and AND-gate arithmetic;
//! * [`lif`]: the LIF layer producing spiking Q/K/V;
//! * [`oracle`]: floating-point attention and exact per-step parameters;
//! * [`functional`]: the step-level model of the attention block;
//! * [`sau`]: a cycle-accurate simulator of the N x N SAU array;
//! * [`cost`]: operation counts and energy estimates;
//! * [`matfile`]: the binary matrix file format;
//! * [`verify`]: the invariant suite behind `ssa verify`.

pub mod cost;
pub mod error;
pub mod functional;
pub mod lif;
pub mod matfile;
pub mod matrix;
pub mod oracle;
pub mod sau;
pub mod sc;
pub mod verify;

pub use error::{Result, SsaError};
pub use functional::{
    decode_output, ssa_run, ssa_run_independent, ssa_step, EncoderBank, Normalization, RngSharing,
    SsaConfig, SsaRun, SsaRunner, SsaStepOutput,
};
pub use lif::{encode_qkv, LifConfig, LifLayer, QkvLayers, QkvSpikes, QkvWeights, ResetMode};
pub use matrix::{RealMatrix, SpikeMatrix};
pub use sau::{CycleTrace, SsaBlock, StreamOutput};
