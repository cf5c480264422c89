//! Empirical bisection for the survival threshold in `beta`.
//!
//! The survival statistic is "some site is occupied (carries a symbiont) at time `T`",
//! started from a fully occupied block of side 10 at the origin corner, with
//! `T = 50 / (lambda * nu_R1)`, i.e. fifty mean single-site event times. Every `beta` is
//! evaluated on the same replicate streams, which keeps the empirical curve close to
//! monotone.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ModelParams, Simulator};
use crate::error::{Error, Result};
use crate::lattice::{nu, BinaryField, Configuration, Geometry, SiteState};
use crate::reference::binary::{BinarySimulator, ContactParams};
use crate::rng::replicate_rng;
use crate::stats::ProportionEstimate;

pub const SEED_BLOCK_SIDE: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "process", rename_all = "kebab-case")]
pub enum CriticalPreset {
    /// Birth `beta` per occupied neighbor in range `R2`, death `nu_R1`.
    Contact,
    /// Single host type carrying one symbiont type with multiplier `g`.
    Generalist { g: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalBetaConfig {
    #[serde(flatten)]
    pub preset: CriticalPreset,
    pub dimension: usize,
    pub side: usize,
    pub r1: usize,
    pub r2: usize,
    pub replicates: u64,
    pub tolerance: f64,
    pub beta_lo: f64,
    pub beta_hi: f64,
}

impl CriticalBetaConfig {
    pub fn horizon(&self) -> f64 {
        50.0 / nu(self.dimension, self.r1) as f64
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(1..=3).contains(&self.dimension) {
            out.push(format!("dimension must be 1, 2 or 3, got {}", self.dimension));
        }
        if self.r1 == 0 || self.r2 == 0 {
            out.push("ranges must be positive".into());
        }
        let need = (2 * self.r1.max(self.r2) + 1).max(SEED_BLOCK_SIDE);
        if self.side < need {
            out.push(format!("side must be at least {need}, got {}", self.side));
        }
        if self.replicates == 0 {
            out.push("replicates must be positive".into());
        }
        if !(self.tolerance > 0.0) {
            out.push(format!("tolerance must be positive, got {}", self.tolerance));
        }
        if !(self.beta_lo >= 0.0 && self.beta_hi > self.beta_lo) {
            out.push(format!("need 0 <= beta_lo < beta_hi, got [{}, {}]", self.beta_lo, self.beta_hi));
        }
        if let CriticalPreset::Generalist { g } = self.preset {
            if !(g >= 0.0) {
                out.push(format!("g must be nonnegative, got {g}"));
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalEstimate {
    pub lo: f64,
    pub hi: f64,
    /// Every evaluated point, sorted by `beta`.
    pub samples: Vec<ProportionEstimate>,
    pub warnings: Vec<String>,
}

fn in_seed_block(geometry: &Geometry, x: usize) -> bool {
    geometry.coords(x).iter().all(|&c| c < SEED_BLOCK_SIDE)
}

/// Whether replicate `replicate` survives to the horizon at `beta`.
pub fn survives(cfg: &CriticalBetaConfig, beta: f64, seed: u64, replicate: u64) -> Result<bool> {
    let geometry = Geometry::torus(cfg.dimension, cfg.side)?;
    let t = cfg.horizon();
    let mut rng = replicate_rng(seed, replicate);
    match cfg.preset {
        CriticalPreset::Contact => {
            let cells = (0..geometry.site_count()).map(|x| in_seed_block(&geometry, x)).collect();
            let field = BinaryField { geometry, cells };
            let rule = ContactParams { birth: beta, death: nu(cfg.dimension, cfg.r1) as f64, range: cfg.r2 };
            let mut sim = BinarySimulator::new(field, rule)?;
            sim.run(t, None, &mut rng, |_, _| {})?;
            Ok(sim.occupied() > 0)
        }
        CriticalPreset::Generalist { g } => {
            let states = (0..geometry.site_count())
                .map(|x| {
                    if in_seed_block(&geometry, x) {
                        SiteState::new(1, 1)
                    } else {
                        SiteState::unassociated(1)
                    }
                })
                .collect();
            let config = Configuration::from_states(geometry, states)?;
            let params = ModelParams::symmetric(1, 1.0, g, beta, beta, cfg.r1, cfg.r2);
            let mut sim = Simulator::new(config, params)?;
            sim.run(t, None, &mut rng, &mut [])?;
            Ok(sim.config().sites().iter().any(SiteState::is_associated))
        }
    }
}

/// Survival frequency at `beta` over the configured replicates.
pub fn survival_at(cfg: &CriticalBetaConfig, beta: f64, seed: u64) -> Result<ProportionEstimate> {
    let outcomes: Vec<bool> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| survives(cfg, beta, seed, r))
        .collect::<Result<_>>()?;
    let successes = outcomes.iter().filter(|&&s| s).count() as u64;
    Ok(ProportionEstimate::new(beta, successes, cfg.replicates))
}

/// Bisection on the survival frequency crossing 1/2.
pub fn estimate_critical_beta(cfg: &CriticalBetaConfig, seed: u64) -> Result<CriticalEstimate> {
    let v = cfg.violations();
    if !v.is_empty() {
        return Err(Error::Validation(v));
    }
    let mut samples = Vec::new();
    let mut lo = cfg.beta_lo;
    let mut hi = cfg.beta_hi;
    let at_lo = survival_at(cfg, lo, seed)?;
    let at_hi = survival_at(cfg, hi, seed)?;
    samples.push(at_lo);
    samples.push(at_hi);
    if at_lo.fraction() >= 0.5 || at_hi.fraction() < 0.5 {
        return Err(Error::Precondition(format!(
            "survival at [{lo}, {hi}] is [{}, {}], which does not bracket 1/2",
            at_lo.fraction(),
            at_hi.fraction()
        )));
    }
    while hi - lo > cfg.tolerance {
        let mid = 0.5 * (lo + hi);
        let est = survival_at(cfg, mid, seed)?;
        samples.push(est);
        if est.fraction() >= 0.5 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    samples.sort_by(|a, b| a.parameter.total_cmp(&b.parameter));
    let mut warnings = Vec::new();
    // a later point noticeably below an earlier one means the curve is not monotone
    for (i, a) in samples.iter().enumerate() {
        for b in &samples[i + 1..] {
            let noise = 3.0 * (a.se().powi(2) + b.se().powi(2)).sqrt();
            if a.fraction() - b.fraction() > noise.max(1.0 / cfg.replicates as f64) {
                warnings.push(format!(
                    "survival drops from {} at beta={} to {} at beta={}; interval widened",
                    a.fraction(),
                    a.parameter,
                    b.fraction(),
                    b.parameter
                ));
                lo = lo.min(a.parameter);
                hi = hi.max(b.parameter);
            }
        }
    }
    Ok(CriticalEstimate { lo, hi, samples, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn contact_1d(replicates: u64) -> CriticalBetaConfig {
        CriticalBetaConfig {
            preset: CriticalPreset::Contact,
            dimension: 1,
            side: 200,
            r1: 1,
            r2: 1,
            replicates,
            tolerance: 0.25,
            beta_lo: 0.0,
            beta_hi: 8.0,
        }
    }

    #[test]
    fn no_births_never_survive() {
        let cfg = contact_1d(50);
        assert_eq!(survival_at(&cfg, 0.0, 1).unwrap().successes, 0);
        let g = CriticalBetaConfig { preset: CriticalPreset::Generalist { g: 0.5 }, ..cfg };
        assert_eq!(survival_at(&g, 0.0, 1).unwrap().successes, 0);
    }

    #[test]
    fn contact_bisection_brackets_and_extremes() {
        let cfg = contact_1d(100);
        let est = estimate_critical_beta(&cfg, 7).unwrap();
        assert!(est.hi - est.lo <= cfg.tolerance || !est.warnings.is_empty());
        // far below: total birth 0.3 * nu against death nu
        assert!(survival_at(&cfg, 0.3, 8).unwrap().fraction() < 0.05);
        assert!(est.lo > 0.3);
        assert!(survival_at(&cfg, est.hi + 3.0, 8).unwrap().fraction() > 0.95);
    }

    #[test]
    fn invalid_bracket_is_reported() {
        let cfg = CriticalBetaConfig { beta_hi: 0.5, ..contact_1d(20) };
        assert!(matches!(estimate_critical_beta(&cfg, 1), Err(Error::Precondition(_))));
        let cfg = CriticalBetaConfig { side: 5, ..contact_1d(20) };
        assert!(matches!(estimate_critical_beta(&cfg, 1), Err(Error::Validation(_))));
    }
}
