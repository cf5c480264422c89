//! Experiment drivers: replicate farming, aggregation, output files and manifests.
//!
//! Replicate `r` always draws from stream `r` of the master seed, whatever thread runs it,
//! and results are aggregated in replicate order, so outputs depend only on the manifest.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{
    product_states, CouplingExperiment, Experiment, ExperimentConfig, InitialConditionSpec,
    InterfaceExperiment, MeanfieldExperiment, MeanfieldLimitExperiment, PercolationExperiment,
    SpatialExperiment,
};
use crate::dynamics::{ModelParams, Observer, Simulator};
use crate::error::{Error, Result};
use crate::io::{self, fmt_sig};
use crate::lattice::{nu, Configuration, Geometry, SiteState};
use crate::meanfield::{self, MeanFieldState};
use crate::observables::{measure_densities, InterfaceRecord, InterfaceTracker, TimeSeriesRecorder};
use crate::reference::{critical, percolation};
use crate::rng::{replicate_rng, stream_label};
use crate::stats::{least_squares_slope, sign_test_p_value, MeanEstimate};

pub const VERSION: &str = concat!("hostsym ", env!("CARGO_PKG_VERSION"));
pub const MANIFEST_FILE: &str = "manifest.toml";

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub seed: u64,
    pub replicates: u64,
    pub streams: Vec<String>,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn new(config: &ExperimentConfig) -> Self {
        let mut config = config.clone();
        config.output = None;
        Manifest {
            version: VERSION.to_string(),
            seed: config.seed,
            replicates: config.replicates,
            streams: (0..config.replicates).map(|r| stream_label(config.seed, r)).collect(),
            config,
        }
    }
}

/// Reads either a configuration or a manifest.
pub fn parse_run_file(text: &str) -> Result<ExperimentConfig> {
    let table: toml::Table = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if table.contains_key("config") && table.contains_key("version") {
        let m: Manifest = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        Ok(m.config)
    } else {
        ExperimentConfig::from_toml(text)
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    /// Human-readable result lines.
    pub summary: Vec<String>,
}

struct Output<'a> {
    dir: &'a Path,
    report: RunReport,
}

impl Output<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.report.files.push(p.clone());
        p
    }
}

/// Validates `config`, runs it and writes outputs plus the manifest into `out_dir`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<RunReport> {
    config.validate()?;
    fs::create_dir_all(out_dir)?;
    let mut out = Output { dir: out_dir, report: RunReport::default() };
    let (seed, reps) = (config.seed, config.replicates);
    match &config.experiment {
        Experiment::Spatial(s) => run_spatial(s, seed, reps, &mut out)?,
        Experiment::Meanfield(m) => run_meanfield(m, &mut out)?,
        Experiment::Interface(i) => run_interface(i, seed, reps, &mut out)?,
        Experiment::Percolation(p) => run_percolation(p, seed, reps, &mut out)?,
        Experiment::CriticalBeta(c) => {
            let c = critical::CriticalBetaConfig { replicates: reps, ..c.clone() };
            let est = critical::estimate_critical_beta(&c, seed)?;
            io::write_proportions(&est.samples, &out.path("critical.csv"))?;
            io::write_rows(
                &out.path("critical-interval.csv"),
                &["lo", "hi", "horizon", "warnings"],
                &[vec![fmt_sig(est.lo), fmt_sig(est.hi), fmt_sig(c.horizon()), est.warnings.len().to_string()]],
            )?;
            out.report.summary.push(format!("beta_c in [{}, {}]", fmt_sig(est.lo), fmt_sig(est.hi)));
            out.report.summary.extend(est.warnings.iter().map(|w| format!("warning: {w}")));
        }
        Experiment::MeanfieldLimit(m) => run_limit(m, seed, reps, &mut out)?,
        Experiment::Coupling(c) => run_coupling(c, seed, reps, &mut out)?,
    }
    let manifest = toml::to_string(&Manifest::new(config)).map_err(|e| Error::Parse(e.to_string()))?;
    let path = out.path(MANIFEST_FILE);
    fs::write(path, manifest)?;
    Ok(out.report)
}

fn replicates<T: Send>(reps: u64, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..reps).into_par_iter().map(f).collect()
}

/// Snapshots at every `every`-th sampling time; the final state is added by the caller.
struct SnapshotRecorder {
    kappa: usize,
    every: u64,
    seen: u64,
    frames: Vec<(f64, String)>,
    error: Option<Error>,
}

impl Observer for SnapshotRecorder {
    fn sample(&mut self, t: f64, config: &Configuration) {
        if self.seen % self.every == 0 {
            match io::snapshot_pgm(config, self.kappa) {
                Ok(text) => self.frames.push((t, text)),
                Err(e) => self.error = Some(e),
            }
        }
        self.seen += 1;
    }
}

fn snapshot_name(t: f64) -> String {
    format!("snapshot-t{:09.3}.pgm", t)
}

fn run_spatial(s: &SpatialExperiment, seed: u64, reps: u64, out: &mut Output) -> Result<()> {
    let params = s.model.params();
    let geometry = s.geometry.build()?;
    let kappa = params.kappa;
    let every = s.snapshot_interval.map(|dt| ((dt / s.sample_interval).round() as u64).max(1));
    let results = replicates(reps, |r| {
        let mut rng = replicate_rng(seed, r);
        let config = s.initial.build(geometry, &mut rng)?;
        let mut sim = Simulator::new(config, params.clone())?;
        let mut series = TimeSeriesRecorder::new(kappa, None);
        let mut snaps = SnapshotRecorder { kappa, every: every.unwrap_or(u64::MAX), seen: 0, frames: Vec::new(), error: None };
        let summary = if every.is_some() {
            sim.run(s.t_end, Some(s.sample_interval), &mut rng, &mut [&mut series, &mut snaps])?
        } else {
            sim.run(s.t_end, Some(s.sample_interval), &mut rng, &mut [&mut series])?
        };
        if let Some(e) = snaps.error {
            return Err(e);
        }
        if every.is_some() && snaps.frames.last().is_none_or(|(t, _)| *t < s.t_end) {
            snaps.frames.push((s.t_end, io::snapshot_pgm(sim.config(), kappa)?));
        }
        Ok((series.records, snaps.frames, summary, measure_densities(sim.config(), kappa)))
    })?;
    let mut zeta = Vec::new();
    for (r, (records, frames, summary, last)) in results.iter().enumerate() {
        let dir = format!("rep-{r:04}");
        io::write_timeseries(records, kappa, &out.path(&format!("{dir}/timeseries.csv")))?;
        for (t, text) in frames {
            let path = out.path(&format!("{dir}/{}", snapshot_name(*t)));
            fs::write(path, text)?;
        }
        if summary.absorbed {
            out.report.summary.push(format!("replicate {r} reached an absorbing state"));
        }
        zeta.push(last.zeta_bar());
    }
    let e = MeanEstimate::of(&zeta);
    out.report.summary.push(format!("symbiont density at t={}: {} over {reps} replicates", s.t_end, fmt_sig(e.mean)));
    Ok(())
}

fn run_meanfield(m: &MeanfieldExperiment, out: &mut Output) -> Result<()> {
    let s0 = m.initial_state()?;
    let traj = meanfield::integrate_recorded(&s0, &m.params, m.t_end, m.dt, m.record_every)?;
    io::write_trajectory(&traj, m.params.kappa, &out.path("trajectory.csv"))?;
    let end = traj.states.last().expect("trajectory has its initial state");
    let k = m.params.kappa;
    let hosts: Vec<String> = (1..=k).map(|i| fmt_sig(end.host_density(i))).collect();
    let syms: Vec<String> = (1..=k).map(|j| fmt_sig(end.v_col(j))).collect();
    out.report.summary.push(format!("t={}: host densities [{}], symbiont densities [{}]", m.t_end, hosts.join(", "), syms.join(", ")));
    if let Ok(eq) = meanfield::equilibrium_prop21(&m.params) {
        let report = meanfield::stability(&eq, &m.params)?;
        let max_re = report.eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        let mut header: Vec<String> = io::timeseries_header(k, false)[1..=k + k * k].to_vec();
        header.extend(["stability".into(), "max_real_eigenvalue".into()]);
        let mut row: Vec<String> = eq.as_slice().iter().map(|&x| fmt_sig(x)).collect();
        row.push(format!("{:?}", report.class).to_lowercase());
        row.push(fmt_sig(max_re));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        io::write_rows(&out.path("equilibrium.csv"), &header, &[row])?;
        out.report.summary.push(format!("symmetric equilibrium u_i = {} is {:?}", fmt_sig(eq.u()[0]), report.class).to_lowercase());
    }
    Ok(())
}

/// One replicate of the interface setup.
#[derive(Clone, Debug)]
pub struct InterfaceRun {
    pub samples: Vec<InterfaceRecord>,
    pub slope: Option<f64>,
    pub gap_zero_fraction: f64,
    pub hit_boundary: bool,
    pub collapsed: bool,
    pub t_stop: f64,
}

/// Aggregate drift statistics for one `(g, beta)`.
#[derive(Clone, Debug)]
pub struct DriftEstimate {
    pub g: f64,
    pub beta: f64,
    pub runs: Vec<InterfaceRun>,
    pub slope: MeanEstimate,
    pub positive: u64,
    pub negative: u64,
    pub sign_p: f64,
    pub boundary_hits: u64,
    /// More than 10% of replicates reached the boundary guard.
    pub inconclusive: bool,
}

impl DriftEstimate {
    pub fn gap_fractions(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.gap_zero_fraction).collect()
    }

    /// Mean `r2` per sampling time over the replicates still running.
    pub fn mean_r2(&self) -> Vec<(f64, f64, usize)> {
        let longest = self.runs.iter().map(|r| r.samples.len()).max().unwrap_or(0);
        (0..longest)
            .map(|k| {
                let at: Vec<&InterfaceRecord> = self.runs.iter().filter_map(|r| r.samples.get(k)).collect();
                let mean = at.iter().map(|s| s.r2 as f64).sum::<f64>() / at.len() as f64;
                (at[0].t, mean, at.len())
            })
            .collect()
    }
}

/// Starting configuration: host 2 unassociated on `0..length/2`, host 1 carrying symbiont 1
/// beyond; positions are relative to the last host-2 site.
pub fn interface_initial(length: usize) -> Result<(Configuration, i64)> {
    let geometry = Geometry::segment(length, 1)?;
    let spec = InitialConditionSpec::HalfLine {
        split: length / 2,
        left: SiteState::unassociated(2),
        right: SiteState::new(1, 1),
        right_density: 1.0,
    };
    let config = spec.build(geometry, &mut replicate_rng(0, 0))?;
    Ok((config, length as i64 / 2 - 1))
}

pub fn interface_replicate(exp: &InterfaceExperiment, beta: f64, seed: u64, replicate: u64) -> Result<InterfaceRun> {
    let (config, origin) = interface_initial(exp.length)?;
    // the host-2 bulk only produces same-state births; dropping them saves about half the events
    let mut sim = Simulator::new(config, ModelParams::specialist(2, exp.g, beta, 1))?.skip_null_events(true);
    let mut tracker = InterfaceTracker::new(sim.config(), origin, exp.guard, false)?;
    let mut rng = replicate_rng(seed, replicate);
    let summary = sim.run(exp.t_end, Some(exp.sample_interval), &mut rng, &mut [&mut tracker])?;
    let t_stop = summary.t_end;
    let ts: Vec<f64> = tracker.samples.iter().map(|s| s.t).collect();
    let rs: Vec<f64> = tracker.samples.iter().map(|s| s.r2 as f64).collect();
    Ok(InterfaceRun {
        slope: least_squares_slope(&ts, &rs),
        gap_zero_fraction: if t_stop > 0.0 { tracker.zero_time_until(t_stop) / t_stop } else { 0.0 },
        hit_boundary: tracker.hit_boundary,
        collapsed: tracker.collapsed,
        samples: tracker.samples,
        t_stop,
    })
}

/// Per-replicate least-squares slopes of `r2(t)`, their mean, and a sign test.
pub fn interface_drift_experiment(exp: &InterfaceExperiment, beta: f64, replicates_n: u64, seed: u64) -> Result<DriftEstimate> {
    let runs = replicates(replicates_n, |r| interface_replicate(exp, beta, seed, r))?;
    let slopes: Vec<f64> = runs.iter().filter_map(|r| r.slope).collect();
    let positive = slopes.iter().filter(|&&s| s > 0.0).count() as u64;
    let negative = slopes.iter().filter(|&&s| s < 0.0).count() as u64;
    let boundary_hits = runs.iter().filter(|r| r.hit_boundary || r.collapsed).count() as u64;
    Ok(DriftEstimate {
        g: exp.g,
        beta,
        slope: MeanEstimate::of(&slopes),
        positive,
        negative,
        sign_p: sign_test_p_value(positive, negative),
        boundary_hits,
        inconclusive: boundary_hits * 10 > replicates_n,
        runs,
    })
}

fn run_interface(exp: &InterfaceExperiment, seed: u64, reps: u64, out: &mut Output) -> Result<()> {
    let mut summary_rows = Vec::new();
    for &beta in &exp.betas {
        let est = interface_drift_experiment(exp, beta, reps, seed)?;
        let tag = fmt_sig(beta);
        let rows: Vec<Vec<String>> = est
            .runs
            .iter()
            .enumerate()
            .map(|(r, run)| {
                vec![
                    r.to_string(),
                    run.slope.map_or_else(String::new, fmt_sig),
                    fmt_sig(run.gap_zero_fraction),
                    (run.hit_boundary as u8).to_string(),
                    (run.collapsed as u8).to_string(),
                    fmt_sig(run.t_stop),
                ]
            })
            .collect();
        io::write_rows(
            &out.path(&format!("drift-beta-{tag}.csv")),
            &["replicate", "slope", "gap_zero_fraction", "hit_boundary", "collapsed", "t_stop"],
            &rows,
        )?;
        let mean_rows: Vec<Vec<String>> =
            est.mean_r2().into_iter().map(|(t, m, n)| vec![fmt_sig(t), fmt_sig(m), n.to_string()]).collect();
        io::write_rows(&out.path(&format!("mean-r2-beta-{tag}.csv")), &["t", "mean_r2", "replicates"], &mean_rows)?;
        let above = est.runs.iter().filter(|r| r.gap_zero_fraction > exp.gap_floor).count();
        summary_rows.push(vec![
            fmt_sig(exp.g),
            tag.clone(),
            reps.to_string(),
            fmt_sig(est.slope.mean),
            fmt_sig(est.slope.se),
            est.positive.to_string(),
            est.negative.to_string(),
            fmt_sig(est.sign_p),
            est.boundary_hits.to_string(),
            (est.inconclusive as u8).to_string(),
            fmt_sig(above as f64 / reps as f64),
        ]);
        out.report.summary.push(format!(
            "g={} beta={tag}: slope {} +- {} (+{} / -{}, sign-test p = {}){}",
            exp.g,
            fmt_sig(est.slope.mean),
            fmt_sig(est.slope.se),
            est.positive,
            est.negative,
            fmt_sig(est.sign_p),
            if est.inconclusive { ", inconclusive: boundary guard hit" } else { "" }
        ));
    }
    io::write_rows(
        &out.path("drift-summary.csv"),
        &[
            "g", "beta", "replicates", "mean_slope", "se", "positive", "negative", "sign_p", "boundary_hits",
            "inconclusive", "gap_floor_fraction",
        ],
        &summary_rows,
    )
}

fn run_percolation(p: &PercolationExperiment, seed: u64, reps: u64, out: &mut Output) -> Result<()> {
    let (curve, monotone) = percolation::survival_curve(&p.grid, p.height, reps, |r| replicate_rng(seed, r))?;
    io::write_proportions(&curve, &out.path("survival.csv"))?;
    out.report.summary.push(format!("survival curve over {reps} shared fields, monotone per field: {monotone}"));
    if let Some(q) = p.duality_p {
        let n = p.duality_n;
        let a: Vec<i64> = (0..=2 * n as i64).step_by(2).collect();
        let (ab, ba) =
            percolation::duality_frequencies(q, &a, &[0], n, 2 * n + 1, reps, |r| replicate_rng(seed, reps + r))?;
        let row = |label: &str, e: &crate::stats::ProportionEstimate| {
            vec![label.to_string(), fmt_sig(e.parameter), e.replicates.to_string(), e.successes.to_string(), fmt_sig(e.lo), fmt_sig(e.hi)]
        };
        io::write_rows(
            &out.path("duality.csv"),
            &["direction", "parameter", "replicates", "successes", "lo", "hi"],
            &[row("forward", &ab), row("dual", &ba)],
        )?;
        out.report.summary.push(format!(
            "duality at p={q}, n={n}: {} vs {}",
            fmt_sig(ab.fraction()),
            fmt_sig(ba.fraction())
        ));
    }
    Ok(())
}

/// One range of the mean-field limit comparison.
#[derive(Clone, Debug)]
pub struct LimitRow {
    pub range: usize,
    pub nu: usize,
    /// Sup-norm distance between spatial densities and the ODE state at `t_check`.
    pub error: MeanEstimate,
    pub host_density: Vec<MeanEstimate>,
    pub ode_host_density: Vec<f64>,
}

pub fn meanfield_limit_check(exp: &MeanfieldLimitExperiment, reps: u64, seed: u64) -> Result<Vec<LimitRow>> {
    let p = exp.params;
    let k = p.kappa;
    let s0 = MeanFieldState::new(exp.u.clone(), exp.v.clone())?;
    let traj = meanfield::integrate_recorded(&s0, &p, exp.t_check, 1e-3, usize::MAX)?;
    let ode = traj.states.last().expect("final state").clone();
    let geometry = Geometry::torus(exp.dimension, exp.side)?;
    let initial = InitialConditionSpec::UniformProduct { states: product_states(&exp.u, &exp.v) };
    let mut rows = Vec::new();
    for &range in &exp.ranges {
        let n = nu(exp.dimension, range) as f64;
        let params = ModelParams::symmetric(k, 1.0 / n, p.g, p.a / n, p.b / n, range, range);
        let per_rep = replicates(reps, |r| {
            let mut rng = replicate_rng(seed, r);
            let config = initial.build(geometry, &mut rng)?;
            let mut sim = Simulator::new(config, params.clone())?;
            sim.run(exp.t_check, None, &mut rng, &mut [])?;
            let d = measure_densities(sim.config(), k);
            let spatial: Vec<f64> = d.u().into_iter().chain(d.v()).collect();
            let err = spatial.iter().zip(ode.as_slice()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            Ok((err, (1..=k).map(|i| d.host_density(i)).collect::<Vec<_>>()))
        })?;
        let errors: Vec<f64> = per_rep.iter().map(|(e, _)| *e).collect();
        rows.push(LimitRow {
            range,
            nu: n as usize,
            error: MeanEstimate::of(&errors),
            host_density: (0..k)
                .map(|i| MeanEstimate::of(&per_rep.iter().map(|(_, h)| h[i]).collect::<Vec<_>>()))
                .collect(),
            ode_host_density: (1..=k).map(|i| ode.host_density(i)).collect(),
        });
    }
    Ok(rows)
}

fn run_limit(exp: &MeanfieldLimitExperiment, seed: u64, reps: u64, out: &mut Output) -> Result<()> {
    let rows = meanfield_limit_check(exp, reps, seed)?;
    let k = exp.params.kappa;
    let mut header: Vec<String> = ["range", "nu", "replicates", "error_mean", "error_se"].map(String::from).to_vec();
    for i in 1..=k {
        header.extend([format!("h_{i}_mean"), format!("h_{i}_se"), format!("ode_h_{i}")]);
    }
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut row = vec![r.range.to_string(), r.nu.to_string(), reps.to_string(), fmt_sig(r.error.mean), fmt_sig(r.error.se)];
            for i in 0..k {
                row.extend([fmt_sig(r.host_density[i].mean), fmt_sig(r.host_density[i].se), fmt_sig(r.ode_host_density[i])]);
            }
            row
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    io::write_rows(&out.path("limit.csv"), &header, &body)?;
    for r in &rows {
        out.report.summary.push(format!("R={}: error {} +- {}", r.range, fmt_sig(r.error.mean), fmt_sig(r.error.se)));
    }
    Ok(())
}

/// Symbiont densities at `t_end` under `alpha = 0` and `alpha = beta`.
#[derive(Clone, Debug)]
pub struct CouplingResult {
    pub pairs: Vec<(f64, f64)>,
    pub specialist: MeanEstimate,
    pub generalist: MeanEstimate,
    /// Paired difference, generalist minus specialist.
    pub difference: MeanEstimate,
}

pub fn monotone_coupling(exp: &CouplingExperiment, reps: u64, seed: u64) -> Result<CouplingResult> {
    let geometry = Geometry::torus(exp.dimension, exp.side)?;
    let pairs = replicates(reps, |r| {
        let mut rng = replicate_rng(seed, r);
        let config = exp.initial.build(geometry, &mut rng)?;
        let density = |alpha: f64, mut rng| -> Result<f64> {
            let params = ModelParams::symmetric(exp.kappa, 1.0, exp.g, alpha, exp.beta, exp.range, exp.range);
            let mut sim = Simulator::new(config.clone(), params)?;
            sim.run(exp.t_end, None, &mut rng, &mut [])?;
            Ok(measure_densities(sim.config(), exp.kappa).zeta_bar())
        };
        Ok((density(0.0, rng.clone())?, density(exp.beta, rng)?))
    })?;
    let spec: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let gen: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let diff: Vec<f64> = pairs.iter().map(|p| p.1 - p.0).collect();
    Ok(CouplingResult {
        specialist: MeanEstimate::of(&spec),
        generalist: MeanEstimate::of(&gen),
        difference: MeanEstimate::of(&diff),
        pairs,
    })
}

fn run_coupling(exp: &CouplingExperiment, seed: u64, reps: u64, out: &mut Output) -> Result<()> {
    let res = monotone_coupling(exp, reps, seed)?;
    let rows: Vec<Vec<String>> =
        res.pairs.iter().enumerate().map(|(r, (s, g))| vec![r.to_string(), fmt_sig(*s), fmt_sig(*g)]).collect();
    io::write_rows(&out.path("coupling.csv"), &["replicate", "specialist", "generalist"], &rows)?;
    let est = |e: &MeanEstimate| vec![fmt_sig(e.mean), fmt_sig(e.se)];
    let mut row = est(&res.specialist);
    row.extend(est(&res.generalist));
    row.extend(est(&res.difference));
    io::write_rows(
        &out.path("coupling-summary.csv"),
        &["specialist_mean", "specialist_se", "generalist_mean", "generalist_se", "difference_mean", "difference_se"],
        &[row],
    )?;
    out.report.summary.push(format!(
        "symbiont density: specialist {} vs generalist {} (paired difference {} +- {})",
        fmt_sig(res.specialist.mean),
        fmt_sig(res.generalist.mean),
        fmt_sig(res.difference.mean),
        fmt_sig(res.difference.se)
    ));
    Ok(())
}
