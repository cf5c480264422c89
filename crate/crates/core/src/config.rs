//! Experiment configuration files, initial conditions and the built-in presets.
//!
//! Configurations are TOML. Top-level keys carry the seed, replicate count and output
//! directory; the `[experiment]` table is tagged by `kind`.

use std::path::PathBuf;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::ModelParams;
use crate::error::{Error, Result};
use crate::lattice::{Configuration, Geometry, SiteState};
use crate::meanfield::{MeanFieldParams, MeanFieldState};
use crate::reference::CriticalBetaConfig;

/// Largest seed a configuration file can hold.
pub const MAX_SEED: u64 = i64::MAX as u64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub seed: u64,
    #[serde(default = "one")]
    pub replicates: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub experiment: Experiment,
}

fn one() -> u64 {
    1
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    Spatial(SpatialExperiment),
    Meanfield(MeanfieldExperiment),
    Interface(InterfaceExperiment),
    Percolation(PercolationExperiment),
    CriticalBeta(CriticalBetaConfig),
    MeanfieldLimit(MeanfieldLimitExperiment),
    Coupling(CouplingExperiment),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Spatial(_) => "spatial",
            Experiment::Meanfield(_) => "meanfield",
            Experiment::Interface(_) => "interface",
            Experiment::Percolation(_) => "percolation",
            Experiment::CriticalBeta(_) => "critical-beta",
            Experiment::MeanfieldLimit(_) => "meanfield-limit",
            Experiment::Coupling(_) => "coupling",
        }
    }
}

/// Model constants in file form. `infection`, when given, replaces the `alpha`/`beta`
/// pattern with a full matrix (rows are hosts).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kappa: usize,
    #[serde(default = "unit")]
    pub lambda: f64,
    pub g: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub infection: Option<Vec<Vec<f64>>>,
    pub r1: usize,
    pub r2: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<u32>,
}

impl ModelSpec {
    pub fn params(&self) -> ModelParams {
        let mut p = ModelParams::symmetric(self.kappa, self.lambda, self.g, self.alpha, self.beta, self.r1, self.r2);
        if let Some(rows) = &self.infection {
            p.infection = rows.iter().flatten().copied().collect();
        }
        p.theta = self.theta;
        p
    }

    fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(rows) = &self.infection {
            if rows.len() != self.kappa || rows.iter().any(|r| r.len() != self.kappa) {
                out.push(format!("infection matrix must be {k} x {k}", k = self.kappa));
                return out;
            }
        }
        out.extend(self.params().violations());
        out
    }
}

/// Torus when `halo` is absent, otherwise a one-dimensional segment with frozen ends.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub dimension: usize,
    pub side: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halo: Option<usize>,
}

impl GeometrySpec {
    pub fn build(&self) -> Result<Geometry> {
        match self.halo {
            None => Geometry::torus(self.dimension, self.side),
            Some(_) if self.dimension != 1 => {
                Err(Error::Configuration("frozen boundaries are only supported in d = 1".into()))
            }
            Some(h) => Geometry::segment(self.side, h),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedState {
    pub host: u8,
    pub symbiont: u8,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialConditionSpec {
    /// Every site drawn independently from the listed states.
    UniformProduct { states: Vec<WeightedState> },
    /// Sites with every coordinate in `lo..=hi` take `inside`, the rest `background`.
    Block { lo: Vec<usize>, hi: Vec<usize>, inside: SiteState, background: SiteState },
    /// One-dimensional: sites `0..split` take `left`; sites `split..` carry host `right.host`,
    /// associated as `right` with probability `right_density` and unassociated otherwise.
    /// Frozen halos copy `left` and `right`.
    HalfLine {
        split: usize,
        left: SiteState,
        right: SiteState,
        #[serde(default = "unit")]
        right_density: f64,
    },
}

impl InitialConditionSpec {
    pub fn violations(&self, geometry: &Geometry, kappa: usize) -> Vec<String> {
        let mut out = Vec::new();
        let mut state_ok = |what: &str, s: &SiteState| {
            if !s.is_valid(kappa) {
                out.push(format!("{what} state ({}, {}) is not valid for kappa = {kappa}", s.host, s.symbiont));
            }
        };
        match self {
            InitialConditionSpec::UniformProduct { states } => {
                for w in states {
                    state_ok("initial", &SiteState::new(w.host, w.symbiont));
                }
                let total: f64 = states.iter().map(|w| w.probability).sum();
                if states.iter().any(|w| !(w.probability >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                    out.push(format!("initial probabilities must be nonnegative and sum to 1, got {total}"));
                }
            }
            InitialConditionSpec::Block { lo, hi, inside, background } => {
                state_ok("block", inside);
                state_ok("background", background);
                let d = geometry.dimension();
                if lo.len() != d || hi.len() != d {
                    out.push(format!("block corners need {d} coordinates"));
                } else if lo.iter().zip(hi).any(|(l, h)| l > h || *h >= geometry.side()) {
                    out.push(format!("block {lo:?}..={hi:?} does not fit a side of {}", geometry.side()));
                }
            }
            InitialConditionSpec::HalfLine { split, left, right, right_density } => {
                state_ok("left", left);
                state_ok("right", right);
                if geometry.dimension() != 1 {
                    out.push("half-line initial conditions need d = 1".into());
                }
                if *split > geometry.side() {
                    out.push(format!("split {split} exceeds the segment length {}", geometry.side()));
                }
                if !(0.0..=1.0).contains(right_density) {
                    out.push(format!("right_density must lie in [0, 1], got {right_density}"));
                }
            }
        }
        out
    }

    /// Builds the initial configuration; random choices are drawn from `rng`.
    pub fn build<R: Rng + ?Sized>(&self, geometry: Geometry, rng: &mut R) -> Result<Configuration> {
        let n = geometry.site_count();
        match self {
            InitialConditionSpec::UniformProduct { states } => {
                let sites = (0..n)
                    .map(|_| {
                        let u: f64 = rng.random();
                        let mut acc = 0.0;
                        for w in states {
                            acc += w.probability;
                            if u < acc {
                                return SiteState::new(w.host, w.symbiont);
                            }
                        }
                        let last = states.last().expect("validated as nonempty");
                        SiteState::new(last.host, last.symbiont)
                    })
                    .collect();
                Configuration::from_states(geometry, sites)
            }
            InitialConditionSpec::Block { lo, hi, inside, background } => {
                let sites = (0..n)
                    .map(|x| {
                        let c = geometry.coords(x);
                        let within = c.iter().zip(lo).zip(hi).all(|((c, l), h)| l <= c && c <= h);
                        if within {
                            *inside
                        } else {
                            *background
                        }
                    })
                    .collect();
                Configuration::from_states(geometry, sites)
            }
            InitialConditionSpec::HalfLine { split, left, right, right_density } => {
                let sites = (0..n)
                    .map(|x| {
                        if x < *split {
                            *left
                        } else if *right_density >= 1.0 || rng.random::<f64>() < *right_density {
                            *right
                        } else {
                            SiteState::unassociated(right.host)
                        }
                    })
                    .collect();
                let mut config = Configuration::from_states(geometry, sites)?;
                config.set_halos(*left, *right);
                Ok(config)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialExperiment {
    pub model: ModelSpec,
    pub geometry: GeometrySpec,
    pub initial: InitialConditionSpec,
    pub t_end: f64,
    pub sample_interval: f64,
    /// Snapshot cadence for two-dimensional runs; the initial and final states are included.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_interval: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanfieldExperiment {
    pub params: MeanFieldParams,
    /// `u_1..u_kappa`.
    pub u: Vec<f64>,
    /// Row-major `v_ij`.
    pub v: Vec<f64>,
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Output every this many steps.
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

fn default_dt() -> f64 {
    1e-3
}

fn default_record_every() -> usize {
    100
}

impl MeanfieldExperiment {
    pub fn initial_state(&self) -> Result<MeanFieldState> {
        MeanFieldState::new(self.u.clone(), self.v.clone())
    }
}

/// Interface drift in the one-dimensional nearest-neighbor specialist setup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterfaceExperiment {
    pub g: f64,
    pub betas: Vec<f64>,
    pub length: usize,
    pub t_end: f64,
    #[serde(default = "default_interface_sample")]
    pub sample_interval: f64,
    #[serde(default = "default_guard")]
    pub guard: usize,
    /// Floor for the zero-gap time fraction reported per replicate.
    #[serde(default = "default_gap_floor")]
    pub gap_floor: f64,
}

fn default_interface_sample() -> f64 {
    5.0
}

fn default_guard() -> usize {
    20
}

fn default_gap_floor() -> f64 {
    0.01
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PercolationExperiment {
    pub grid: Vec<f64>,
    pub height: usize,
    /// Duality check at this openness and generation, when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duality_p: Option<f64>,
    #[serde(default = "default_duality_n")]
    pub duality_n: usize,
}

fn default_duality_n() -> usize {
    20
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanfieldLimitExperiment {
    pub params: MeanFieldParams,
    pub ranges: Vec<usize>,
    pub dimension: usize,
    pub side: usize,
    pub t_check: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// Paired runs with `alpha = 0` and `alpha = beta` from the same initial state and stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingExperiment {
    pub kappa: usize,
    pub g: f64,
    pub beta: f64,
    pub range: usize,
    pub dimension: usize,
    pub side: usize,
    pub t_end: f64,
    pub initial: InitialConditionSpec,
}

fn finite_positive(name: &str, x: f64, out: &mut Vec<String>) {
    if !(x > 0.0 && x.is_finite()) {
        out.push(format!("{name} must be positive and finite, got {x}"));
    }
}

impl ExperimentConfig {
    /// Every violated precondition, in a stable order.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.replicates == 0 {
            out.push("replicates must be positive".into());
        }
        if self.seed > MAX_SEED || self.replicates > MAX_SEED {
            out.push(format!("seed and replicates must not exceed {MAX_SEED} (TOML integers are signed)"));
        }
        match &self.experiment {
            Experiment::Spatial(s) => {
                out.extend(s.model.violations());
                match s.geometry.build() {
                    Ok(g) => {
                        if 2 * s.model.r1.max(s.model.r2) + 1 > g.side() {
                            out.push(format!("side {} is too small for the ranges", g.side()));
                        }
                        out.extend(s.initial.violations(&g, s.model.kappa));
                    }
                    Err(e) => out.push(e.to_string()),
                }
                finite_positive("t_end", s.t_end, &mut out);
                finite_positive("sample_interval", s.sample_interval, &mut out);
                if let Some(dt) = s.snapshot_interval {
                    finite_positive("snapshot_interval", dt, &mut out);
                    if s.geometry.dimension != 2 {
                        out.push("snapshots need d = 2".into());
                    }
                }
            }
            Experiment::Meanfield(m) => {
                out.extend(m.params.violations());
                let k = m.params.kappa;
                if m.u.len() != k || m.v.len() != k * k {
                    out.push(format!("initial state needs {k} u-entries and {} v-entries", k * k));
                } else {
                    let total: f64 = m.u.iter().chain(&m.v).sum();
                    if m.u.iter().chain(&m.v).any(|x| !(*x >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                        out.push(format!("initial densities must be nonnegative and sum to 1, got {total}"));
                    }
                }
                finite_positive("t_end", m.t_end, &mut out);
                finite_positive("dt", m.dt, &mut out);
                if m.record_every == 0 {
                    out.push("record_every must be positive".into());
                }
            }
            Experiment::Interface(i) => {
                if !(i.g >= 0.0) {
                    out.push(format!("g must be nonnegative, got {}", i.g));
                }
                if i.betas.is_empty() || i.betas.iter().any(|b| !(*b >= 0.0)) {
                    out.push("betas must be a nonempty list of nonnegative rates".into());
                }
                if i.length < 2 * i.guard + 4 {
                    out.push(format!("segment length {} leaves no room inside the guard {}", i.length, i.guard));
                }
                finite_positive("t_end", i.t_end, &mut out);
                finite_positive("sample_interval", i.sample_interval, &mut out);
            }
            Experiment::Percolation(p) => {
                if p.grid.is_empty() || p.grid.iter().any(|x| !(0.0..=1.0).contains(x)) {
                    out.push("grid must be a nonempty list of probabilities".into());
                }
                if p.height == 0 || p.height % 2 != 0 {
                    out.push(format!("height must be positive and even, got {}", p.height));
                }
                if let Some(q) = p.duality_p {
                    if !(0.0..=1.0).contains(&q) {
                        out.push(format!("duality_p must be a probability, got {q}"));
                    }
                    if p.duality_n % 2 != 0 {
                        out.push(format!("duality_n must be even, got {}", p.duality_n));
                    }
                }
            }
            Experiment::CriticalBeta(c) => out.extend(c.violations()),
            Experiment::MeanfieldLimit(m) => {
                out.extend(m.params.violations());
                if m.ranges.is_empty() || m.ranges.windows(2).any(|w| w[0] >= w[1]) || m.ranges[0] == 0 {
                    out.push("ranges must be a nonempty increasing list of positive integers".into());
                } else if m.side < 4 * m.ranges[m.ranges.len() - 1] + 2 {
                    out.push(format!("side must be at least 4R + 2 = {}", 4 * m.ranges[m.ranges.len() - 1] + 2));
                }
                let k = m.params.kappa;
                if m.u.len() != k || m.v.len() != k * k {
                    out.push(format!("initial densities need {k} u-entries and {} v-entries", k * k));
                } else if ((m.u.iter().chain(&m.v).sum::<f64>()) - 1.0).abs() > 1e-9 {
                    out.push("initial densities must sum to 1".into());
                }
                finite_positive("t_check", m.t_check, &mut out);
            }
            Experiment::Coupling(c) => {
                out.extend(ModelParams::symmetric(c.kappa, 1.0, c.g, c.beta, c.beta, c.range, c.range).violations());
                match Geometry::torus(c.dimension, c.side) {
                    Ok(g) => {
                        if 2 * c.range + 1 > c.side {
                            out.push(format!("side {} is too small for range {}", c.side, c.range));
                        }
                        out.extend(c.initial.violations(&g, c.kappa));
                    }
                    Err(e) => out.push(e.to_string()),
                }
                finite_positive("t_end", c.t_end, &mut out);
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Product measure over `states` with the given probabilities, for the mean-field layout.
pub fn product_states(u: &[f64], v: &[f64]) -> Vec<WeightedState> {
    let k = u.len();
    let mut out: Vec<WeightedState> = u
        .iter()
        .enumerate()
        .map(|(i, &p)| WeightedState { host: i as u8 + 1, symbiont: 0, probability: p })
        .collect();
    for (idx, &p) in v.iter().enumerate() {
        out.push(WeightedState { host: (idx / k) as u8 + 1, symbiont: (idx % k) as u8 + 1, probability: p });
    }
    out.retain(|w| w.probability > 0.0);
    out
}

pub const PRESETS: &[(&str, &str)] = &[
    ("fig1-left", include_str!("../presets/fig1-left.toml")),
    ("fig1-right", include_str!("../presets/fig1-right.toml")),
    ("fig3-left", include_str!("../presets/fig3-left.toml")),
    ("fig3-right", include_str!("../presets/fig3-right.toml")),
    ("thm1-critical", include_str!("../presets/thm1-critical.toml")),
    ("thm2", include_str!("../presets/thm2.toml")),
    ("thm3", include_str!("../presets/thm3.toml")),
    ("thm4", include_str!("../presets/thm4.toml")),
    ("percolation", include_str!("../presets/percolation.toml")),
    ("meanfield-limit", include_str!("../presets/meanfield-limit.toml")),
    ("coupling", include_str!("../presets/coupling.toml")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn preset_text(name: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| Error::Input(format!("unknown preset {name:?}; known: {}", preset_names().collect::<Vec<_>>().join(", "))))
}

/// Parses a preset and applies `dotted.key=value` overrides; values are TOML literals and
/// fall back to strings.
pub fn load_preset(name: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut table: toml::Table = toml::from_str(preset_text(name)?).map_err(|e| Error::Parse(e.to_string()))?;
    for item in overrides {
        apply_override(&mut table, item)?;
    }
    toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))
}

pub fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (path, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::Input(format!("override {item:?} is not of the form key=value")))?;
    let value = match toml::from_str::<toml::Table>(&format!("v = {}", raw.trim())) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let keys: Vec<&str> = path.trim().split('.').collect();
    let (last, parents) = keys.split_last().expect("split yields one element");
    let mut cur = table;
    for k in parents {
        cur = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Input(format!("override path {path:?}: {k:?} is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replicate_rng;

    #[test]
    fn every_preset_parses_validates_and_round_trips() {
        for name in preset_names() {
            let cfg = load_preset(name, &[]).unwrap_or_else(|e| panic!("{name}: {e}"));
            cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(cfg.name, name);
            let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
            assert_eq!(back, cfg, "{name}");
        }
    }

    #[test]
    fn overrides_apply() {
        let cfg = load_preset("fig3-left", &["experiment.model.beta=3.5".into(), "seed=9".into()]).unwrap();
        assert_eq!(cfg.seed, 9);
        let Experiment::Spatial(s) = cfg.experiment else { panic!() };
        assert_eq!(s.model.beta, 3.5);
        assert!(load_preset("fig3-left", &["seed".into()]).is_err());
        assert!(load_preset("nope", &[]).is_err());
    }

    #[test]
    fn validation_lists_every_violation() {
        let mut cfg = load_preset("fig3-left", &[]).unwrap();
        cfg.replicates = 0;
        if let Experiment::Spatial(s) = &mut cfg.experiment {
            s.model.g = -1.0;
            s.t_end = 0.0;
        }
        match cfg.validate() {
            Err(Error::Validation(v)) => assert_eq!(v.len(), 3, "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn block_condition_matches_the_caption() {
        let cfg = load_preset("fig3-left", &[]).unwrap();
        let Experiment::Spatial(s) = cfg.experiment else { panic!() };
        let g = s.geometry.build().unwrap();
        let c = s.initial.build(g, &mut replicate_rng(0, 0)).unwrap();
        let inside = |x: usize| x > 90 && x < 110;
        for (i, state) in c.sites().iter().enumerate() {
            let xy = g.coords(i);
            let expect = if inside(xy[0]) && inside(xy[1]) { SiteState::unassociated(1) } else { SiteState::new(2, 2) };
            assert_eq!(*state, expect);
        }
    }

    #[test]
    fn product_and_half_line_builders() {
        let g = Geometry::torus(2, 40).unwrap();
        let spec = InitialConditionSpec::UniformProduct { states: product_states(&[0.3, 0.3], &[0.2, 0.0, 0.0, 0.2]) };
        assert!(spec.violations(&g, 2).is_empty());
        let c = spec.build(g, &mut replicate_rng(1, 0)).unwrap();
        let d = crate::observables::measure_densities(&c, 2);
        assert!((d.u()[0] - 0.3).abs() < 0.05 && d.v()[1] == 0.0);

        let seg = Geometry::segment(10, 1).unwrap();
        let spec = InitialConditionSpec::HalfLine {
            split: 5,
            left: SiteState::unassociated(2),
            right: SiteState::new(1, 1),
            right_density: 1.0,
        };
        let c = spec.build(seg, &mut replicate_rng(1, 0)).unwrap();
        assert_eq!(c.get(4), SiteState::unassociated(2));
        assert_eq!(c.get(5), SiteState::new(1, 1));
        assert_eq!(c.get(seg.left_halo(0).unwrap()), SiteState::unassociated(2));
        assert_eq!(c.get(seg.right_halo(0).unwrap()), SiteState::new(1, 1));
        let bad = InitialConditionSpec::UniformProduct {
            states: vec![WeightedState { host: 3, symbiont: 0, probability: 0.5 }],
        };
        assert_eq!(bad.violations(&g, 2).len(), 2);
    }
}
