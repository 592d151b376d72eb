//! Numerical model of the Einstein's Boxes experiment.
//!
//! A Gaussian packet leaves a source, is divided by a balanced splitter and
//! reaches two equidistant boxes whose detectors project onto the emitted
//! Gaussian. Two probability rules are computed from the same dynamics:
//!
//! * collapse (CF): the detector eigenstate is projected on the split
//!   wavefunction at the measurement time, `P_c = |∫ φ*·a·ψ|²`;
//! * time-symmetric (TSF): a retarded ψ on the realized path meets an
//!   advanced φ* from the final condition, `P_t = w·|∫ φ*ψ|²` with `w` the
//!   classical weight of that final condition; the integral is the same at
//!   every time.
//!
//! With the reference parameters both give 0.431 per box.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod field_file;
pub mod grid;
pub mod optics;
pub mod packet;
pub mod params;
pub mod propagate;
pub mod transitions;
pub mod verify;

pub use config::{load_config, parse_config, ScenarioConfig};
pub use error::{Error, Result};
pub use experiment::{
    build_scenario, run_ensemble, run_ensemble_with, sample_outcome, snapshot_sequence, splitter_side_weights,
    EnsembleSummary, GridSettings, Outcome, OutcomeModel, Quantity, RunRecord, Scenario, Snapshot,
};
pub use field_file::FieldFile;
pub use grid::{density_moments, field_norm, packet_to_field, ComplexField, DensityMoments, GridSpec};
pub use optics::{route_tsf, split_cf, BoxId, Branch, LegWindow, Node, PathNetwork, SplitterSpec};
pub use packet::GaussianPacket;
pub use params::PhysicalParams;
pub use propagate::{
    centroid_trajectory, propagate_field_spectral, propagate_field_spectral_shifted, propagate_packet_analytic,
    Direction,
};
pub use transitions::{
    arrival_overlap, collapse_probability_cf, collapse_probability_cf_at, overlap, probability, transition_density,
    transition_probability_tsf, transition_probability_tsf_at, Formulation, TransitionResult,
};

pub use num_complex::Complex64;
