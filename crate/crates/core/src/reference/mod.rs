//! Comparison processes with known behaviour: the biased voter model, the contact process
//! and half-space oriented percolation, plus an empirical survival-threshold estimator.

pub mod binary;
pub mod critical;
pub mod percolation;

pub use binary::{flip_rate, BiasedVoterParams, BinarySimulator, ContactParams, FlipRule};
pub use critical::{estimate_critical_beta, CriticalBetaConfig, CriticalEstimate, CriticalPreset};
pub use percolation::{
    coupled_reach, duality_frequencies, percolation_reach, survival_curve, PercolationField,
    ReachSet, ReachTrace,
};
