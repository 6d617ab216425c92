//! Cooperative wideband spectrum sensing with compressed sensing.
//!
//! A scenario is a fixed band allocation ([`BandPlan`]) in which a few bands
//! are occupied; every secondary user (SU) sees the same occupied bins with
//! its own fading. SUs take sub-Nyquist measurements through one shared
//! sampling matrix, the spectrum is recovered with OMP or SOMP (optionally
//! using the band allocation as a prior), and band decisions are fused either
//! by voting or by thresholding a jointly recovered spectrum.
//!
//! Numerical types are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix them to `f64`, which is what the experiment harness uses.

pub mod error;
pub mod experiment;
pub mod fusion;
pub mod linalg;
pub mod metrics;
pub mod recovery;
pub mod scalar;
pub mod sensing;
pub mod spectrum;

pub use error::{Error, Result};
pub use fusion::{
    aggregate_estimates, decide_fused_data, decide_local, fuse_decisions, run_pipeline,
    FusionConfig, LocalDecision, PipelineConfig, Variant,
};
pub use metrics::{r_score, tally, DecisionStats, MeanStats, RScore};
pub use recovery::{
    least_squares_on_support, mod_omp, mod_somp, omp, somp, PriorKnowledge, RecoveryConfig,
    RecoveryResult, StopReason, TieBreak,
};
pub use scalar::{Cx, Scalar};
pub use sensing::{make_sensing_matrix, measure, Snr};
pub use spectrum::{
    generate_occupancy, make_paper_band_plan, synthesize_spectra, BandPlan, Category,
    FadingModel, OccupancyVector, OccupiedCounts, Synthesis,
};

pub type SpectrumVector = spectrum::SpectrumVector<f64>;
pub type SpectrumVector32 = spectrum::SpectrumVector<f32>;
pub type ScenarioTruth = spectrum::ScenarioTruth<f64>;
pub type ScenarioTruth32 = spectrum::ScenarioTruth<f32>;
pub type SensingMatrix = sensing::SensingMatrix<f64>;
pub type SensingMatrix32 = sensing::SensingMatrix<f32>;
pub type MeasurementSet = sensing::MeasurementSet<f64>;
pub type MeasurementSet32 = sensing::MeasurementSet<f32>;
pub type Recovery = recovery::RecoveryResult<f64>;
pub type Recovery32 = recovery::RecoveryResult<f32>;
