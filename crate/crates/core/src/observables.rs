//! Densities, interface positions and cluster statistics measured from configurations.

use std::collections::BTreeMap;

use crate::dynamics::{Event, Observer};
use crate::error::{Error, Result};
use crate::lattice::{Boundary, Configuration, Geometry, SiteState};

/// Site counts per state class; fractions are counts over the number of active sites.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DensityVector {
    pub kappa: usize,
    pub sites: u64,
    /// Unassociated host `i`, indexed `i - 1`.
    pub unassociated: Vec<u64>,
    /// Host `i` with symbiont `j`, row-major.
    pub associated: Vec<u64>,
}

impl DensityVector {
    fn slot(&mut self, state: SiteState) -> &mut u64 {
        let i = state.host as usize - 1;
        if state.symbiont == 0 {
            &mut self.unassociated[i]
        } else {
            &mut self.associated[i * self.kappa + state.symbiont as usize - 1]
        }
    }

    /// Moves one site's contribution from `event.old` to `event.new`.
    pub fn apply(&mut self, event: &Event) {
        *self.slot(event.old) -= 1;
        *self.slot(event.new) += 1;
    }

    pub fn u(&self) -> Vec<f64> {
        self.unassociated.iter().map(|&c| c as f64 / self.sites as f64).collect()
    }

    pub fn v(&self) -> Vec<f64> {
        self.associated.iter().map(|&c| c as f64 / self.sites as f64).collect()
    }

    /// Fraction of sites with host `i` (1-based).
    pub fn host_density(&self, i: usize) -> f64 {
        let row: u64 = self.associated[(i - 1) * self.kappa..i * self.kappa].iter().sum();
        (self.unassociated[i - 1] + row) as f64 / self.sites as f64
    }

    /// Fraction of associated sites, the density of the color-blind process.
    pub fn zeta_bar(&self) -> f64 {
        self.associated.iter().sum::<u64>() as f64 / self.sites as f64
    }

    pub fn total_count(&self) -> u64 {
        self.unassociated.iter().sum::<u64>() + self.associated.iter().sum::<u64>()
    }
}

pub fn measure_densities(config: &Configuration, kappa: usize) -> DensityVector {
    let mut d = DensityVector {
        kappa,
        sites: config.sites().len() as u64,
        unassociated: vec![0; kappa],
        associated: vec![0; kappa * kappa],
    };
    for &s in config.sites() {
        *d.slot(s) += 1;
    }
    d
}

/// Interface of the one-dimensional two-host setup, in positions relative to an origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterfaceRecord {
    pub t: f64,
    /// Rightmost site with host 2.
    pub r2: i64,
    /// Leftmost site with symbiont 1.
    pub l1: i64,
    pub gap: i64,
    pub gap_zero: bool,
}

impl InterfaceRecord {
    fn new(t: f64, r2: i64, l1: i64) -> Self {
        let gap = l1 - r2 - 1;
        InterfaceRecord { t, r2, l1, gap, gap_zero: gap == 0 }
    }
}

fn check_segment(geometry: &Geometry) -> Result<()> {
    match geometry.boundary() {
        Boundary::Frozen { .. } if geometry.dimension() == 1 => Ok(()),
        _ => Err(Error::Precondition("interface tracking needs a one-dimensional segment".into())),
    }
}

/// Brute-force scan of the active segment; site `i` sits at position `i - origin`.
pub fn track_interface(config: &Configuration, origin: i64) -> Result<InterfaceRecord> {
    check_segment(config.geometry())?;
    let sites = config.sites();
    let r2 = sites.iter().rposition(|s| s.host == 2);
    let l1 = sites.iter().position(|s| s.symbiont == 1);
    match (r2, l1) {
        (Some(r), Some(l)) => Ok(InterfaceRecord::new(config.clock(), r as i64 - origin, l as i64 - origin)),
        _ => Err(Error::InterfaceCollapsed(format!(
            "at t={}: {}",
            config.clock(),
            if r2.is_none() { "no host-2 site left" } else { "no symbiont-1 site left" }
        ))),
    }
}

/// Time-weighted fraction of `[0, t_end]` with zero gap. Records mark the times at which
/// the interface took a new value and hold until the next record.
pub fn time_fraction_gap_zero(series: &[InterfaceRecord], t_end: f64) -> f64 {
    if !(t_end > 0.0) {
        return 0.0;
    }
    let mut zero = 0.0;
    for (i, rec) in series.iter().enumerate() {
        let start = rec.t.max(0.0);
        let end = series.get(i + 1).map_or(t_end, |n| n.t).min(t_end);
        if rec.gap_zero && end > start {
            zero += end - start;
        }
    }
    zero / t_end
}

/// Event-driven interface tracker.
///
/// Keeps `r2` and `l1` current in amortized constant time, integrates the zero-gap
/// indicator exactly between events, stores the interface at every sampling time, and
/// stops the run when the interface collapses or comes within `guard` sites of either end.
#[derive(Clone, Debug)]
pub struct InterfaceTracker {
    origin: i64,
    len: usize,
    guard: usize,
    r2: usize,
    l1: usize,
    last_t: f64,
    zero_time: f64,
    pub samples: Vec<InterfaceRecord>,
    /// Every interface change, when enabled.
    pub changes: Option<Vec<InterfaceRecord>>,
    pub collapsed: bool,
    pub hit_boundary: bool,
}

impl InterfaceTracker {
    pub fn new(config: &Configuration, origin: i64, guard: usize, record_changes: bool) -> Result<Self> {
        let first = track_interface(config, origin)?;
        let mut tracker = InterfaceTracker {
            origin,
            len: config.sites().len(),
            guard,
            r2: (first.r2 + origin) as usize,
            l1: (first.l1 + origin) as usize,
            last_t: config.clock(),
            zero_time: 0.0,
            samples: Vec::new(),
            changes: record_changes.then(|| vec![first]),
            collapsed: false,
            hit_boundary: false,
        };
        tracker.check_guard();
        Ok(tracker)
    }

    pub fn current(&self, t: f64) -> InterfaceRecord {
        InterfaceRecord::new(t, self.r2 as i64 - self.origin, self.l1 as i64 - self.origin)
    }

    pub fn gap(&self) -> i64 {
        self.l1 as i64 - self.r2 as i64 - 1
    }

    /// Integral of the zero-gap indicator from the start up to `t`.
    pub fn zero_time_until(&self, t: f64) -> f64 {
        self.zero_time + if self.gap() == 0 { (t - self.last_t).max(0.0) } else { 0.0 }
    }

    fn check_guard(&mut self) {
        let near = |p: usize| p < self.guard || p + self.guard >= self.len;
        if near(self.r2) || near(self.l1) {
            self.hit_boundary = true;
        }
    }
}

impl Observer for InterfaceTracker {
    fn sample(&mut self, t: f64, _config: &Configuration) {
        self.samples.push(self.current(t));
    }

    fn event(&mut self, event: &Event, config: &Configuration) {
        if self.collapsed || event.is_null() {
            return;
        }
        if self.gap() == 0 {
            self.zero_time += event.time - self.last_t;
        }
        self.last_t = event.time;
        let before = (self.r2, self.l1);
        let sites = config.sites();
        let x = event.site;
        if event.new.host == 2 && x > self.r2 {
            self.r2 = x;
        } else if x == self.r2 && event.new.host != 2 {
            match sites[..x].iter().rposition(|s| s.host == 2) {
                Some(r) => self.r2 = r,
                None => self.collapsed = true,
            }
        }
        if event.new.symbiont == 1 && x < self.l1 {
            self.l1 = x;
        } else if x == self.l1 && event.new.symbiont != 1 {
            match sites[x + 1..].iter().position(|s| s.symbiont == 1) {
                Some(l) => self.l1 = x + 1 + l,
                None => self.collapsed = true,
            }
        }
        if !self.collapsed {
            self.check_guard();
            if (self.r2, self.l1) != before {
                let rec = self.current(event.time);
                if let Some(changes) = self.changes.as_mut() {
                    changes.push(rec);
                }
            }
        }
    }

    fn should_stop(&self) -> bool {
        self.collapsed || self.hit_boundary
    }
}

/// One row of a time series.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesRecord {
    pub t: f64,
    pub densities: DensityVector,
    pub interface: Option<InterfaceRecord>,
}

impl TimeSeriesRecord {
    pub fn zeta_bar(&self) -> f64 {
        self.densities.zeta_bar()
    }
}

/// Observer recording densities (and optionally the interface) at sampling times.
#[derive(Clone, Debug)]
pub struct TimeSeriesRecorder {
    kappa: usize,
    interface_origin: Option<i64>,
    pub records: Vec<TimeSeriesRecord>,
}

impl TimeSeriesRecorder {
    pub fn new(kappa: usize, interface_origin: Option<i64>) -> Self {
        TimeSeriesRecorder { kappa, interface_origin, records: Vec::new() }
    }
}

impl Observer for TimeSeriesRecorder {
    fn sample(&mut self, t: f64, config: &Configuration) {
        let interface = self
            .interface_origin
            .and_then(|o| track_interface(config, o).ok())
            .map(|r| InterfaceRecord { t, ..r });
        self.records.push(TimeSeriesRecord { t, densities: measure_densities(config, self.kappa), interface });
    }
}

/// Sizes of the connected components of associated sites under nearest-neighbor
/// adjacency, as `size -> number of components`.
pub fn cluster_size_histogram(config: &Configuration) -> BTreeMap<usize, usize> {
    let geometry = config.geometry();
    let n = geometry.site_count();
    let sites = config.sites();
    let mut seen = vec![false; n];
    let mut hist = BTreeMap::new();
    let mut stack = Vec::new();
    let side = geometry.side();
    let periodic = geometry.boundary() == Boundary::Periodic;
    for start in 0..n {
        if seen[start] || !sites[start].is_associated() {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut size = 0;
        while let Some(x) = stack.pop() {
            size += 1;
            let coords = geometry.coords(x);
            for axis in 0..geometry.dimension() {
                for step in [1, side - 1] {
                    let c = coords[axis];
                    if !periodic && ((step == 1 && c + 1 == side) || (step != 1 && c == 0)) {
                        continue;
                    }
                    let mut nb = coords.clone();
                    nb[axis] = (c + step) % side;
                    let y = geometry.index(&nb);
                    if !seen[y] && sites[y].is_associated() {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
        }
        *hist.entry(size).or_insert(0) += 1;
    }
    hist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{ModelParams, Simulator};
    use crate::rng::replicate_rng;
    use rand::Rng;

    fn segment(states: &[(u8, u8)]) -> Configuration {
        let g = Geometry::segment(states.len(), 1).unwrap();
        Configuration::from_states(g, states.iter().map(|&(h, s)| SiteState::new(h, s)).collect()).unwrap()
    }

    #[test]
    fn density_examples() {
        let g = Geometry::torus(2, 4).unwrap();
        let d = measure_densities(&Configuration::uniform(g, SiteState::new(1, 1)), 2);
        assert_eq!(d.u(), vec![0.0, 0.0]);
        assert_eq!(d.v(), vec![1.0, 0.0, 0.0, 0.0]);
        let states = (0..16)
            .map(|x| SiteState::unassociated(if (x / 4 + x % 4) % 2 == 0 { 1 } else { 2 }))
            .collect();
        let d = measure_densities(&Configuration::from_states(g, states).unwrap(), 2);
        assert_eq!(d.u(), vec![0.5, 0.5]);
        assert_eq!(d.total_count(), 16);
        assert_eq!(d.zeta_bar(), 0.0);
    }

    #[test]
    fn incremental_densities_follow_events() {
        let g = Geometry::torus(2, 10).unwrap();
        let mut rng = replicate_rng(21, 0);
        let states = (0..100).map(|_| SiteState::new(rng.random_range(1..=2), rng.random_range(0..=2))).collect();
        let config = Configuration::from_states(g, states).unwrap();
        let mut sim = Simulator::new(config, ModelParams::symmetric(2, 1.0, 0.5, 0.5, 2.0, 1, 1)).unwrap();
        let mut d = measure_densities(sim.config(), 2);
        for _ in 0..2000 {
            let e = sim.step(&mut rng).unwrap();
            d.apply(&e);
            assert_eq!(d, measure_densities(sim.config(), 2));
        }
    }

    #[test]
    fn interface_examples() {
        let mut states = vec![(2, 0); 1000];
        states.extend(vec![(1, 1); 1000]);
        let rec = track_interface(&segment(&states), 999).unwrap();
        assert_eq!((rec.r2, rec.l1, rec.gap), (0, 1, 0));

        let mut states = vec![(2, 0); 6];
        states.extend([(1, 0), (1, 0), (1, 0), (1, 1), (1, 1)]);
        let c = segment(&states);
        let rec = track_interface(&c, 0).unwrap();
        assert_eq!((rec.r2, rec.l1, rec.gap, rec.gap_zero), (5, 9, 3, false));
        let mut c = c;
        c.set(6, SiteState::new(1, 1));
        let rec = track_interface(&c, 0).unwrap();
        assert_eq!((rec.gap, rec.gap_zero), (0, true));
        let c = segment(&[(1, 1), (1, 0)]);
        assert!(matches!(track_interface(&c, 0), Err(Error::InterfaceCollapsed(_))));
        let torus = Configuration::uniform(Geometry::torus(1, 5).unwrap(), SiteState::new(1, 1));
        assert!(track_interface(&torus, 0).is_err());
    }

    #[test]
    fn gap_fraction_examples() {
        let zero = |t| InterfaceRecord::new(t, 0, 1);
        let wide = |t| InterfaceRecord::new(t, 0, 4);
        assert_eq!(time_fraction_gap_zero(&[zero(0.0)], 10.0), 1.0);
        assert_eq!(time_fraction_gap_zero(&[zero(0.0), wide(5.0)], 10.0), 0.5);
        assert_eq!(time_fraction_gap_zero(&[wide(0.0), zero(2.0), wide(3.0), zero(9.0)], 10.0), 0.2);
    }

    fn interface_run(seed: u64) -> (Simulator, InterfaceTracker, crate::dynamics::RunSummary) {
        let mut states = vec![SiteState::unassociated(2); 100];
        states.extend(vec![SiteState::new(1, 1); 100]);
        let mut config = Configuration::from_states(Geometry::segment(200, 1).unwrap(), states).unwrap();
        config.set_halos(SiteState::unassociated(2), SiteState::new(1, 1));
        let mut sim = Simulator::new(config, ModelParams::specialist(2, 0.5, 5.0, 1)).unwrap();
        let mut tracker = InterfaceTracker::new(sim.config(), 99, 5, true).unwrap();
        let mut rng = replicate_rng(seed, 0);
        let summary = sim.run(30.0, Some(0.5), &mut rng, &mut [&mut tracker]).unwrap();
        (sim, tracker, summary)
    }

    #[test]
    fn tracker_agrees_with_brute_force_scan() {
        struct Checked(InterfaceTracker, i64);
        impl Observer for Checked {
            fn event(&mut self, e: &Event, c: &Configuration) {
                self.0.event(e, c);
                let brute = track_interface(c, self.1).unwrap();
                let fast = self.0.current(c.clock());
                assert_eq!((brute.r2, brute.l1), (fast.r2, fast.l1));
                assert!(brute.gap >= 0);
            }
        }
        let mut states = vec![SiteState::unassociated(2); 60];
        states.extend(vec![SiteState::new(1, 1); 60]);
        let mut config = Configuration::from_states(Geometry::segment(120, 1).unwrap(), states).unwrap();
        config.set_halos(SiteState::unassociated(2), SiteState::new(1, 1));
        let mut sim = Simulator::new(config, ModelParams::specialist(2, 0.5, 5.0, 1)).unwrap();
        let mut checked = Checked(InterfaceTracker::new(sim.config(), 59, 0, false).unwrap(), 59);
        sim.run(20.0, None, &mut replicate_rng(5, 1), &mut [&mut checked]).unwrap();
    }

    #[test]
    fn exact_zero_gap_integral_is_grid_free() {
        let (sim, tracker, summary) = interface_run(8);
        let t_end = summary.t_end;
        let changes = tracker.changes.as_ref().unwrap();
        let from_changes = time_fraction_gap_zero(changes, t_end);
        let tracked = tracker.zero_time_until(sim.clock()) / t_end;
        assert!((from_changes - tracked).abs() < 1e-12, "{from_changes} vs {tracked}");
        assert!(tracked > 0.0 && tracked < 1.0);
        // refining the record with redundant points does not change the integral
        let mut refined = Vec::new();
        for (i, rec) in changes.iter().enumerate() {
            refined.push(*rec);
            if let Some(next) = changes.get(i + 1) {
                refined.push(InterfaceRecord { t: 0.5 * (rec.t + next.t), ..*rec });
            }
        }
        assert!((time_fraction_gap_zero(&refined, t_end) - from_changes).abs() < 1e-12);
    }

    #[test]
    fn clusters() {
        let g = Geometry::torus(2, 5).unwrap();
        let mut c = Configuration::uniform(g, SiteState::unassociated(1));
        for coords in [[0, 0], [0, 4], [2, 2], [2, 3], [3, 2]] {
            c.set(g.index(&coords), SiteState::new(1, 1));
        }
        let hist = cluster_size_histogram(&c);
        assert_eq!(hist, BTreeMap::from([(2, 1), (3, 1)]));
        let hist = cluster_size_histogram(&Configuration::uniform(g, SiteState::new(2, 1)));
        assert_eq!(hist, BTreeMap::from([(25, 1)]));
    }
}
