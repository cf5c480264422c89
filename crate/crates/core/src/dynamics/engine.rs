//! Exact continuous-time simulation with cached neighbor counts.
//!
//! Every active site keeps the counts its rates depend on, and a [`SumTree`] holds the
//! per-site totals. An event draws, in this order, an exponential waiting time, a site
//! (prefix-sum search, first index wins ties), and one of that site's transitions (linear
//! scan). After a state change the counts of the changed site's neighbors are adjusted and
//! the totals of the site and of everything within `max(R1, R2)` are recomputed.

use rand::Rng;

use crate::dynamics::params::ModelParams;
use crate::dynamics::rates::{
    accumulate_birth, accumulate_infection, count_neighbors, emit_transitions, HostRule,
    Transition,
};
use crate::error::{Error, Result};
use crate::lattice::{Configuration, NeighborTable, SiteState};
use crate::sumtree::SumTree;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub time: f64,
    pub site: usize,
    pub old: SiteState,
    pub new: SiteState,
}

impl Event {
    pub fn is_null(&self) -> bool {
        self.old == self.new
    }
}

/// Callbacks driven synchronously by [`Simulator::run`].
pub trait Observer {
    /// Called at every sampling time with the state in force at that time.
    fn sample(&mut self, _t: f64, _config: &Configuration) {}
    /// Called after each event has been applied, null events included.
    fn event(&mut self, _event: &Event, _config: &Configuration) {}
    /// Returning true stops the run after the current event.
    fn should_stop(&self) -> bool {
        false
    }
}

/// Full event record; meant for short runs.
#[derive(Clone, Debug, Default)]
pub struct EventLog {
    pub events: Vec<Event>,
}

impl Observer for EventLog {
    fn event(&mut self, event: &Event, _config: &Configuration) {
        self.events.push(*event);
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunSummary {
    pub t_start: f64,
    pub t_end: f64,
    pub events: u64,
    pub null_events: u64,
    /// True when the total rate vanished before `t_end`.
    pub absorbed: bool,
    /// True when an observer requested an early stop.
    pub stopped: bool,
}

/// Materialized rate bookkeeping: per-site transition lists and totals.
#[derive(Clone, Debug, PartialEq)]
pub struct RateTable {
    pub transitions: Vec<Vec<Transition>>,
    pub totals: Vec<f64>,
    pub total: f64,
}

impl RateTable {
    /// Rebuilds every site from scratch through the neighborhood scan.
    pub fn from_scratch(config: &Configuration, params: &ModelParams) -> Result<Self> {
        let geometry = config.geometry();
        let rule = HostRule::of(params);
        let birth = NeighborTable::new(geometry, params.r1)?;
        let infection = NeighborTable::new(geometry, params.r2)?;
        let mut counts = vec![0; 3 * params.kappa];
        let mut transitions = Vec::with_capacity(geometry.site_count());
        let mut totals = Vec::with_capacity(geometry.site_count());
        for x in 0..geometry.site_count() {
            count_neighbors(config, x, params.kappa, &birth, &infection, &mut counts);
            let mut list = Vec::new();
            let mut total = 0.0;
            emit_transitions(params, rule, config.get(x), &counts, |target, rate| {
                list.push(Transition { target, rate });
                total += rate;
            });
            transitions.push(list);
            totals.push(total);
        }
        let total = SumTree::new(&totals).total();
        Ok(RateTable { transitions, totals, total })
    }

    /// Largest deviation in enabled transitions or rates; `None` if the enabled sets differ.
    pub fn max_deviation(&self, other: &RateTable) -> Option<f64> {
        if self.transitions.len() != other.transitions.len() {
            return None;
        }
        let mut worst = (self.total - other.total).abs();
        for (a, b) in self.transitions.iter().zip(&other.transitions) {
            if a.len() != b.len() {
                return None;
            }
            for (ta, tb) in a.iter().zip(b) {
                if ta.target != tb.target {
                    return None;
                }
                worst = worst.max((ta.rate - tb.rate).abs());
            }
        }
        for (a, b) in self.totals.iter().zip(&other.totals) {
            worst = worst.max((a - b).abs());
        }
        Some(worst)
    }
}

#[derive(Clone)]
pub struct Simulator {
    params: ModelParams,
    rule: HostRule,
    config: Configuration,
    birth: NeighborTable,
    infection: Option<NeighborTable>,
    counts: Vec<u32>,
    tree: SumTree,
    pending: Vec<(usize, f64)>,
    skip_null: bool,
}

impl Simulator {
    pub fn new(config: Configuration, params: ModelParams) -> Result<Self> {
        params.validate()?;
        config.validate(params.kappa)?;
        let geometry = *config.geometry();
        let birth = NeighborTable::new(&geometry, params.r1)?;
        let infection =
            if params.r2 == params.r1 { None } else { Some(NeighborTable::new(&geometry, params.r2)?) };
        let stride = 3 * params.kappa;
        let n = geometry.site_count();
        let mut sim = Simulator {
            rule: HostRule::of(&params),
            params,
            config,
            birth,
            infection,
            counts: vec![0; n * stride],
            tree: SumTree::new(&vec![0.0; n]),
            pending: Vec::new(),
            skip_null: false,
        };
        sim.rebuild();
        Ok(sim)
    }

    /// Recount every neighborhood and recompute all totals.
    pub fn rebuild(&mut self) {
        let stride = 3 * self.params.kappa;
        let n = self.config.geometry().site_count();
        let infection = self.infection.as_ref().unwrap_or(&self.birth);
        for x in 0..n {
            count_neighbors(
                &self.config,
                x,
                self.params.kappa,
                &self.birth,
                infection,
                &mut self.counts[x * stride..(x + 1) * stride],
            );
        }
        let totals: Vec<f64> = (0..n).map(|x| self.site_total(x)).collect();
        self.tree = SumTree::new(&totals);
    }

    /// Leaves same-state replacements out of the rate table. The law of the trajectory is
    /// unchanged; only the event count and the random stream usage differ.
    pub fn skip_null_events(mut self, skip: bool) -> Self {
        self.skip_null = skip;
        self.rebuild();
        self
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn into_config(self) -> Configuration {
        self.config
    }

    pub fn clock(&self) -> f64 {
        self.config.clock()
    }

    pub fn total_rate(&self) -> f64 {
        self.tree.total()
    }

    #[inline]
    fn site_counts(&self, x: usize) -> &[u32] {
        let stride = 3 * self.params.kappa;
        &self.counts[x * stride..(x + 1) * stride]
    }

    fn site_total(&self, x: usize) -> f64 {
        let mut total = 0.0;
        let state = self.config.get(x);
        let skip = self.skip_null;
        emit_transitions(&self.params, self.rule, state, self.site_counts(x), |t, r| {
            if !(skip && t == state) {
                total += r
            }
        });
        total
    }

    /// Transitions at `x` from the cached counts.
    pub fn transitions(&self, x: usize) -> Vec<Transition> {
        let mut out = Vec::new();
        let state = self.config.get(x);
        let skip = self.skip_null;
        emit_transitions(&self.params, self.rule, state, self.site_counts(x), |target, rate| {
            if !(skip && target == state) {
                out.push(Transition { target, rate })
            }
        });
        out
    }

    /// Snapshot of the incrementally maintained rate table.
    pub fn rate_table(&self) -> RateTable {
        let n = self.config.geometry().site_count();
        RateTable {
            transitions: (0..n).map(|x| self.transitions(x)).collect(),
            totals: (0..n).map(|x| self.tree.get(x)).collect(),
            total: self.tree.total(),
        }
    }

    /// Sets site `x` to `new`, updating counts and rates of every affected site.
    pub fn apply(&mut self, x: usize, new: SiteState) {
        let old = self.config.get(x);
        if old == new {
            return;
        }
        debug_assert!(!self.config.geometry().is_halo(x));
        debug_assert!(new.is_valid(self.params.kappa));
        self.config.set(x, new);
        let kappa = self.params.kappa;
        let stride = 3 * kappa;
        let n = self.config.geometry().site_count();
        let birth_changed = old.host != new.host || (old.symbiont == 0) != (new.symbiont == 0);
        let infection_changed = old.symbiont != new.symbiont;
        if birth_changed {
            for &z in self.birth.neighbors(x) {
                let z = z as usize;
                if z < n {
                    let c = &mut self.counts[z * stride..(z + 1) * stride];
                    accumulate_birth(c, kappa, old, -1);
                    accumulate_birth(c, kappa, new, 1);
                }
            }
        }
        if infection_changed {
            let table = self.infection.as_ref().unwrap_or(&self.birth);
            for &z in table.neighbors(x) {
                let z = z as usize;
                if z < n {
                    let c = &mut self.counts[z * stride..(z + 1) * stride];
                    accumulate_infection(c, kappa, old, -1);
                    accumulate_infection(c, kappa, new, 1);
                }
            }
        }
        let mut pending = std::mem::take(&mut self.pending);
        pending.clear();
        pending.push((x, self.site_total(x)));
        let wide = match &self.infection {
            Some(t) if t.range() > self.birth.range() => t,
            _ => &self.birth,
        };
        for &z in wide.neighbors(x) {
            let z = z as usize;
            if z < n {
                pending.push((z, self.site_total(z)));
            }
        }
        self.tree.set_many(&pending);
        self.pending = pending;
    }

    /// Draws an exponential waiting time at the current total rate.
    fn waiting_time<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        let total = self.tree.total();
        if !(total > 0.0) {
            return Err(Error::Absorbing(self.clock()));
        }
        let u: f64 = rng.random();
        Ok(-(1.0 - u).ln() / total)
    }

    /// Draws site and transition, applies them, and advances the clock to `time`.
    fn fire<R: Rng + ?Sized>(&mut self, time: f64, rng: &mut R) -> Event {
        let u_site: f64 = rng.random();
        let x = self.tree.search(u_site * self.tree.total());
        let site_total = self.tree.get(x);
        let u_move: f64 = rng.random();
        let target = u_move * site_total;
        let old = self.config.get(x);
        let mut acc = 0.0;
        let mut chosen = None;
        let mut last = old;
        let skip = self.skip_null;
        emit_transitions(&self.params, self.rule, old, self.site_counts(x), |state, rate| {
            if skip && state == old {
                return;
            }
            last = state;
            acc += rate;
            if chosen.is_none() && target < acc {
                chosen = Some(state);
            }
        });
        let new = chosen.unwrap_or(last);
        self.apply(x, new);
        self.config.set_clock(time);
        Event { time, site: x, old, new }
    }

    /// One event of the chain.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Event> {
        let dt = self.waiting_time(rng)?;
        let t = self.clock() + dt;
        Ok(self.fire(t, rng))
    }

    /// Runs until `t_end`. With `sample_interval = Some(dt)` observers are sampled at
    /// `t0, t0 + dt, ...` up to and including `t_end`. An event whose time would exceed
    /// `t_end` is discarded and the clock set to `t_end`, which leaves the law of the
    /// state at `t_end` exact. An absorbing state freezes the configuration until `t_end`.
    pub fn run<R: Rng + ?Sized>(
        &mut self,
        t_end: f64,
        sample_interval: Option<f64>,
        rng: &mut R,
        observers: &mut [&mut dyn Observer],
    ) -> Result<RunSummary> {
        let t0 = self.clock();
        if !(t_end >= t0) {
            return Err(Error::Precondition(format!("t_end {t_end} is before the clock {t0}")));
        }
        if let Some(dt) = sample_interval {
            if !(dt > 0.0) {
                return Err(Error::Precondition(format!("sample interval must be positive, got {dt}")));
            }
        }
        let mut summary = RunSummary {
            t_start: t0,
            t_end,
            events: 0,
            null_events: 0,
            absorbed: false,
            stopped: false,
        };
        let mut sample_index = 0u64;
        let mut emit_samples = |upto: f64, config: &Configuration, observers: &mut [&mut dyn Observer]| {
            if let Some(dt) = sample_interval {
                loop {
                    let s = t0 + sample_index as f64 * dt;
                    if s > upto {
                        break;
                    }
                    for o in observers.iter_mut() {
                        o.sample(s, config);
                    }
                    sample_index += 1;
                }
            }
        };
        loop {
            let next = match self.waiting_time(rng) {
                Ok(dt) => self.clock() + dt,
                Err(Error::Absorbing(_)) => {
                    summary.absorbed = true;
                    f64::INFINITY
                }
                Err(e) => return Err(e),
            };
            emit_samples(next.min(t_end), &self.config, observers);
            if next > t_end {
                self.config.set_clock(t_end);
                break;
            }
            let event = self.fire(next, rng);
            summary.events += 1;
            if event.is_null() {
                summary.null_events += 1;
            }
            let mut stop = false;
            for o in observers.iter_mut() {
                o.event(&event, &self.config);
                stop |= o.should_stop();
            }
            if stop {
                summary.stopped = true;
                summary.t_end = self.clock();
                break;
            }
        }
        Ok(summary)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Geometry;
    use crate::rng::replicate_rng;
    use rand::Rng;

    fn random_config<R: Rng>(g: Geometry, kappa: u8, rng: &mut R) -> Configuration {
        let states = (0..g.site_count())
            .map(|_| SiteState::new(rng.random_range(1..=kappa), rng.random_range(0..=kappa)))
            .collect();
        Configuration::from_states(g, states).unwrap()
    }

    #[test]
    fn incremental_table_matches_rebuild() {
        let mut rng = replicate_rng(11, 0);
        for (d, side, r1, r2, theta) in
            [(1, 30, 1, 2, None), (2, 9, 2, 1, None), (2, 8, 1, 1, None), (2, 7, 1, 1, Some(3))]
        {
            let g = Geometry::torus(d, side).unwrap();
            let mut p = ModelParams::symmetric(3, 1.0, 0.7, 0.4, 2.5, r1, r2);
            if let Some(t) = theta {
                p = ModelParams::symmetric(3, 1.0, 1.0, 0.0, 2.5, r1, r2).with_theta(t);
            }
            let config = random_config(g, 3, &mut rng);
            let mut sim = Simulator::new(config, p.clone()).unwrap();
            for _ in 0..10_000 {
                sim.step(&mut rng).unwrap();
            }
            let scratch = RateTable::from_scratch(sim.config(), &p).unwrap();
            let incremental = sim.rate_table();
            let dev = incremental.max_deviation(&scratch).expect("same enabled transitions");
            assert!(dev <= 1e-9, "deviation {dev}");
            assert_eq!(incremental, scratch);
        }
    }

    #[test]
    fn frozen_segment_never_touches_halos() {
        let g = Geometry::segment(40, 1).unwrap();
        let mut states = vec![SiteState::unassociated(2); 20];
        states.extend(vec![SiteState::new(1, 1); 20]);
        let mut config = Configuration::from_states(g, states).unwrap();
        config.set_halos(SiteState::unassociated(2), SiteState::new(1, 1));
        let p = ModelParams::specialist(2, 0.5, 3.0, 1);
        let mut sim = Simulator::new(config, p.clone()).unwrap();
        let mut rng = replicate_rng(4, 2);
        let mut log = EventLog::default();
        sim.run(50.0, None, &mut rng, &mut [&mut log]).unwrap();
        assert!(log.events.iter().all(|e| e.site < 40));
        assert_eq!(sim.config().get(40), SiteState::unassociated(2));
        assert_eq!(sim.config().get(41), SiteState::new(1, 1));
        let scratch = RateTable::from_scratch(sim.config(), &p).unwrap();
        assert_eq!(sim.rate_table(), scratch);
    }

    #[test]
    fn single_transition_is_always_chosen() {
        // lambda = 0 and specialists: the only enabled move is infecting site 1
        let g = Geometry::torus(1, 3).unwrap();
        let states = vec![SiteState::new(1, 1), SiteState::unassociated(1), SiteState::unassociated(2)];
        let p = ModelParams::symmetric(2, 0.0, 0.5, 0.0, 2.0, 1, 1);
        let base = Simulator::new(Configuration::from_states(g, states).unwrap(), p).unwrap();
        assert_eq!(base.total_rate(), 2.0);
        let mut rng = replicate_rng(1, 1);
        for _ in 0..100 {
            let e = base.clone().step(&mut rng).unwrap();
            assert_eq!((e.site, e.new), (1, SiteState::new(1, 1)));
        }
    }

    #[test]
    fn empirical_selection_frequencies() {
        // site 1 of a 3-ring is (1,0) between (2,0) and (1,1), lambda = 0, g = 0:
        // the only rates are infections; build two competing ones with rates 1 and 3.
        let g = Geometry::torus(1, 3).unwrap();
        let states = vec![SiteState::new(1, 1), SiteState::unassociated(1), SiteState::new(2, 2)];
        let mut p = ModelParams::symmetric(2, 0.0, 0.0, 0.0, 0.0, 1, 1);
        p.infection = vec![1.0, 3.0, 0.0, 0.0];
        let base = Simulator::new(Configuration::from_states(g, states).unwrap(), p).unwrap();
        assert_eq!(base.total_rate(), 4.0);
        let mut rng = replicate_rng(99, 0);
        let n = 100_000;
        let mut to_one = 0u32;
        for _ in 0..n {
            let mut sim = base.clone();
            let e = sim.step(&mut rng).unwrap();
            assert_eq!(e.site, 1);
            if e.new == SiteState::new(1, 1) {
                to_one += 1;
            }
        }
        let p_hat = to_one as f64 / n as f64;
        let sigma = (0.25f64 * 0.75 / n as f64).sqrt();
        assert!((p_hat - 0.25).abs() < 3.0 * sigma, "p_hat {p_hat}");
    }

    #[test]
    fn run_to_current_clock_is_a_no_op() {
        let g = Geometry::torus(2, 5).unwrap();
        let mut rng = replicate_rng(5, 0);
        let config = random_config(g, 2, &mut rng);
        let mut sim = Simulator::new(config.clone(), ModelParams::generalist(2, 0.5, 1.0, 1)).unwrap();
        let s = sim.run(0.0, Some(1.0), &mut rng, &mut []).unwrap();
        assert_eq!(s.events, 0);
        assert_eq!(sim.config(), &config);
    }

    #[test]
    fn zero_rates_freeze_the_configuration() {
        let g = Geometry::torus(2, 5).unwrap();
        let config = Configuration::uniform(g, SiteState::unassociated(1));
        let p = ModelParams::symmetric(2, 0.0, 0.5, 0.0, 2.0, 1, 1);
        let mut sim = Simulator::new(config.clone(), p).unwrap();
        let mut rng = replicate_rng(5, 1);
        assert!(matches!(sim.step(&mut rng), Err(Error::Absorbing(_))));
        let s = sim.run(100.0, None, &mut rng, &mut []).unwrap();
        assert!(s.absorbed);
        assert_eq!(sim.config().sites(), config.sites());
        assert_eq!(sim.clock(), 100.0);
    }

    #[test]
    fn runs_are_bitwise_reproducible() {
        let g = Geometry::torus(2, 10).unwrap();
        let go = || {
            let mut rng = replicate_rng(2024, 7);
            let config = random_config(g, 2, &mut rng);
            let mut sim = Simulator::new(config, ModelParams::specialist(2, 0.5, 2.0, 1)).unwrap();
            let mut log = EventLog::default();
            sim.run(3.0, None, &mut rng, &mut [&mut log]).unwrap();
            (sim.into_config(), log.events)
        };
        let (a, ea) = go();
        let (b, eb) = go();
        assert_eq!(a, b);
        assert_eq!(ea, eb);
        assert!(ea.windows(2).all(|w| w[0].time < w[1].time));
    }

    #[test]
    fn specialist_closure_is_preserved() {
        let g = Geometry::torus(2, 12).unwrap();
        let mut rng = replicate_rng(8, 0);
        let states = (0..g.site_count())
            .map(|_| {
                let h = rng.random_range(1..=3u8);
                SiteState::new(h, if rng.random_bool(0.5) { h } else { 0 })
            })
            .collect();
        let config = Configuration::from_states(g, states).unwrap();
        let mut sim = Simulator::new(config, ModelParams::specialist(3, 1.5, 2.0, 1)).unwrap();
        sim.run(5.0, None, &mut rng, &mut []).unwrap();
        assert!(sim.config().sites().iter().all(|s| s.symbiont == 0 || s.symbiont == s.host));
    }
}
