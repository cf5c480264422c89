//! Spatial host-symbiont dynamics.

mod engine;
mod params;
mod rates;

pub use engine::{Event, EventLog, Observer, RateTable, RunSummary, Simulator};
pub use params::ModelParams;
pub use rates::{site_rates, threshold_site_rates, total_rate, Transition};
