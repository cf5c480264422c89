//! Per-site transition rates.
//!
//! Rates depend on the neighborhood only through three count vectors, so both the
//! from-scratch path and the simulator's cached path go through [`emit_transitions`].
//! That keeps the two bitwise identical.

use crate::dynamics::params::ModelParams;
use crate::lattice::{Configuration, NeighborTable, SiteState};

/// One enabled transition at a site.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub target: SiteState,
    pub rate: f64,
}

/// Host rule: linear voter births, or the threshold voter variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum HostRule {
    Linear,
    Threshold(u32),
}

impl HostRule {
    pub(crate) fn of(params: &ModelParams) -> Self {
        params.theta.map_or(HostRule::Linear, HostRule::Threshold)
    }
}

/// Counts layout for one site, `3 * kappa` entries:
/// `[unassociated host k in N1 | associated host k in N1 | symbiont m in N2]`.
#[inline]
pub(crate) fn accumulate_birth(counts: &mut [u32], kappa: usize, state: SiteState, delta: i32) {
    let slot = if state.symbiont == 0 { 0 } else { kappa } + state.host as usize - 1;
    counts[slot] = counts[slot].wrapping_add_signed(delta);
}

#[inline]
pub(crate) fn accumulate_infection(counts: &mut [u32], kappa: usize, state: SiteState, delta: i32) {
    if state.symbiont != 0 {
        let slot = 2 * kappa + state.symbiont as usize - 1;
        counts[slot] = counts[slot].wrapping_add_signed(delta);
    }
}

pub(crate) fn count_neighbors(
    config: &Configuration,
    x: usize,
    kappa: usize,
    birth: &NeighborTable,
    infection: &NeighborTable,
    counts: &mut [u32],
) {
    counts.fill(0);
    let storage = config.storage();
    for &z in birth.neighbors(x) {
        accumulate_birth(counts, kappa, storage[z as usize], 1);
    }
    for &z in infection.neighbors(x) {
        accumulate_infection(counts, kappa, storage[z as usize], 1);
    }
}

/// Calls `emit` for every positive-rate transition of a site in state `state`.
/// Order: host replacements by target host type, then infections by symbiont type.
#[inline]
pub(crate) fn emit_transitions(
    params: &ModelParams,
    rule: HostRule,
    state: SiteState,
    counts: &[u32],
    mut emit: impl FnMut(SiteState, f64),
) {
    let kappa = params.kappa;
    let (unassoc, rest) = counts.split_at(kappa);
    let (assoc, symbionts) = rest.split_at(kappa);
    match rule {
        HostRule::Linear => {
            for k in 0..kappa {
                let rate = params.lambda * (unassoc[k] as f64 + params.g * assoc[k] as f64);
                if rate > 0.0 {
                    emit(SiteState::unassociated(k as u8 + 1), rate);
                }
            }
        }
        HostRule::Threshold(theta) => {
            for k in 0..kappa {
                let host = k as u8 + 1;
                let same_and_clean = host == state.host && state.symbiont == 0;
                if !same_and_clean && unassoc[k] + assoc[k] >= theta {
                    emit(SiteState::unassociated(host), 1.0);
                }
            }
        }
    }
    if state.symbiont == 0 {
        match rule {
            HostRule::Linear => {
                for m in 0..kappa {
                    let rate = params.c(state.host, m as u8 + 1) * symbionts[m] as f64;
                    if rate > 0.0 {
                        emit(SiteState::new(state.host, m as u8 + 1), rate);
                    }
                }
            }
            HostRule::Threshold(_) => {
                let i = state.host;
                let rate = params.c(i, i) * symbionts[i as usize - 1] as f64;
                if rate > 0.0 {
                    emit(SiteState::new(i, i), rate);
                }
            }
        }
    }
}

fn rates_with_rule(
    config: &Configuration,
    x: usize,
    params: &ModelParams,
    rule: HostRule,
) -> crate::Result<Vec<Transition>> {
    let geometry = config.geometry();
    let birth = NeighborTable::new(geometry, params.r1)?;
    let infection = NeighborTable::new(geometry, params.r2)?;
    let mut counts = vec![0; 3 * params.kappa];
    count_neighbors(config, x, params.kappa, &birth, &infection, &mut counts);
    let mut out = Vec::new();
    emit_transitions(params, rule, config.get(x), &counts, |target, rate| {
        out.push(Transition { target, rate })
    });
    Ok(out)
}

/// Enabled transitions at `x` under the linear host rule, computed from scratch.
///
/// Same-type replacements `(i, 0) -> (i, 0)` are listed: they change nothing but keep the
/// rates equal to the defining display.
pub fn site_rates(
    config: &Configuration,
    x: usize,
    params: &ModelParams,
) -> crate::Result<Vec<Transition>> {
    rates_with_rule(config, x, params, HostRule::Linear)
}

/// Enabled transitions at `x` when hosts follow the threshold-`theta` voter rule.
///
/// A replacement by host type `k` fires at rate 1 once at least `theta` neighbors in the
/// birth range carry host `k`; this includes `k = host(x)` when `x` is associated, which
/// clears the symbiont. Infections are by the host's own symbiont type only.
pub fn threshold_site_rates(
    config: &Configuration,
    x: usize,
    params: &ModelParams,
) -> crate::Result<Vec<Transition>> {
    let theta = params.theta.ok_or_else(|| {
        crate::Error::Precondition("threshold rates need theta to be set".into())
    })?;
    if !params.is_specialist() {
        return Err(crate::Error::Precondition(
            "threshold rates need specialist symbionts".into(),
        ));
    }
    rates_with_rule(config, x, params, HostRule::Threshold(theta))
}

/// Sum of all site transition rates, from scratch, summed in site order.
pub fn total_rate(config: &Configuration, params: &ModelParams) -> crate::Result<f64> {
    let geometry = config.geometry();
    let rule = HostRule::of(params);
    let birth = NeighborTable::new(geometry, params.r1)?;
    let infection = NeighborTable::new(geometry, params.r2)?;
    let mut counts = vec![0; 3 * params.kappa];
    let mut total = 0.0;
    for x in 0..geometry.site_count() {
        count_neighbors(config, x, params.kappa, &birth, &infection, &mut counts);
        emit_transitions(params, rule, config.get(x), &counts, |_, rate| total += rate);
    }
    Ok(total)
}
