//! Simulation and optimization of active multi-RIS MIMO links.
//!
//! The crate synthesizes geometric channels for a scenario ([`channel`]),
//! builds quantized angular codebooks per RIS panel ([`codebook`]), searches
//! phase configurations with black-box optimizers ([`optimizers`]) and scores
//! them with capacity, condition, power and energy-efficiency metrics
//! ([`metrics`]). Scenarios and run records are read and written by
//! [`scenario`].

pub mod channel;
pub mod codebook;
pub mod error;
pub mod geometry;
pub mod link;
pub mod metrics;
pub mod optimizers;
pub mod scenario;

pub use channel::{
    effective_channel, noise_covariance, synth_channels, whiten, CMatrix, ChannelSet,
};
pub use codebook::{build_codebook, AngleGrid, Codebook, CodebookEntry};
pub use error::{Error, Result};
pub use geometry::{PhaseConfig, RisPanel, ScenarioGeometry, Vec3};
pub use link::LinkModel;
pub use metrics::{MetricsReport, PowerModel, SystemParams};
pub use optimizers::{Algorithm, Budget, ObjectiveContext, OptResult};
pub use scenario::{RunRecord, ScenarioConfig};
