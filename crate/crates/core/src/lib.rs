//! Simulation and optimization of a full-duplex wireless circulator assisted by a
//! beyond-diagonal reconfigurable surface.
//!
//! Users sit on a ring: user `k − 1` transmits to user `k` while receiving from user
//! `k − 2`, and the surface routes each link. The optimizer maximizes the weighted
//! sum-rate over precoders, combiners and the scattering matrix.
//!
//! Indices are 0-based and cyclic. `precoders[k]` is transmitted by user `k − 1`;
//! `h_tilde[k][i]` is the effective channel from transmitter `i` to receiver `k`.

pub mod beamformers;
pub mod channel;
pub mod config;
pub mod driver;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod metrics;
pub mod scattering;
pub mod stats;
pub mod surrogate;

pub use channel::{effective_channels, ChannelSet, EffectiveChannels};
pub use config::{
    dbm_to_watts, derive_trial_seed, watts_to_dbm, Connectivity, Reciprocity, RisArchitecture, Scenario,
    ScenarioConfig, SolverConfig, TrialSeed, UpdateOrder,
};
pub use driver::{compare_architectures, initialize, run, run_with, OptimizerReport, RunOptions, RunOutcome};
pub use error::{Error, Result};
pub use experiments::{run_sweep, Arm, Experiment, SweepResult, SweepSpec};
pub use linalg::{CMat, CVec, C64};
pub use metrics::{weighted_sum_rate, BeamformerState, RateReport};
pub use scattering::{RisState, TraceFormCoefficients};
pub use surrogate::SurrogateState;
