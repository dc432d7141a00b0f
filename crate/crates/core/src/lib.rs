//! Behavioral simulation of grounded and floating flux-controlled
//! meminductor emulators built from OTAs and current conveyors.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod am;
pub mod config;
pub mod device;
pub mod emulator;
pub mod error;
pub mod experiment;
pub mod fingerprint;
pub mod montecarlo;
pub mod network;
pub mod sim;
pub mod source;

pub use config::{parse_config, ExperimentConfig, ExperimentKind};
pub use device::{CcciiParams, MosPair, OtaParams};
pub use emulator::{
    derive_coefficients, Coefficients, Emulator, EmulatorConfig, Fidelity, Mode, Topology,
};
pub use error::{Error, Result};
pub use experiment::{run_experiment, RunOptions};
pub use sim::{integrate, steady_window, Trace};
pub use source::{SourceSpec, Tone};
