//! Simulation and asymptotic analysis of large multi-user MIMO uplinks with
//! low-precision ADCs.
//!
//! The crate provides:
//! - a block model (pilot phase + data phase) with per-dimension uniform
//!   scalar quantization at the receiver ([`model`], [`quantizer`]),
//! - message-passing estimators: joint channel-and-data (bilinear AMP),
//!   known-channel detection, and a pilot-based LS baseline ([`estimators`]),
//! - a replica fixed-point solver predicting asymptotic MSE, BER and
//!   achievable rate ([`replica`]),
//! - a Monte-Carlo harness with TOML configs, figure presets and CSV output
//!   ([`harness`], behind the default `harness`/`cli` features).

pub mod estimators;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod quantizer;
pub mod replica;

#[cfg(feature = "harness")]
pub mod harness;

pub use estimators::{
    denoise_input, denoise_output, detect_known_channel, jcd_estimate, ls_channel_estimate,
    pilot_only_pipeline, GampOptions, JcdResult, Observation, ObservationMatrix, PriorSpec,
};
pub use model::{generate_block, Constellation, SystemConfig};
pub use numerics::SeedSpec;
pub use quantizer::{make_quantizer, QuantizerSpec};
pub use replica::{
    achievable_rate, predict_ber_qpsk, solve_fixed_point, DataPrior, ReplicaConfig, ReplicaMode,
    ReplicaSolution,
};
