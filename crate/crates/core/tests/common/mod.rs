//! Oracles shared by the integration and acceptance suites. Nothing here calls the
//! simulator's rate code, so agreement with it is evidence rather than tautology.
#![allow(dead_code)]

use hostsym::dynamics::site_rates;
use hostsym::lattice::project_colorblind;
use hostsym::reference::{flip_rate, BiasedVoterParams, ContactParams};
use hostsym::rng::replicate_rng;
use hostsym::stats::wilson_interval;
use hostsym::{Configuration, Geometry, ModelParams, Simulator, SiteState};
use rand::Rng;

/// All site states for `kappa` types, in a fixed order.
pub fn site_states(kappa: u8) -> Vec<SiteState> {
    (1..=kappa).flat_map(|h| (0..=kappa).map(move |s| SiteState::new(h, s))).collect()
}

/// Chain on a ring of `n` sites where every other site is a neighbor (range 1, `n <= 3`).
pub struct RingChain {
    pub n: usize,
    pub kappa: u8,
    pub singles: Vec<SiteState>,
    /// Row-major generator, `states x states`.
    pub q: Vec<f64>,
}

impl RingChain {
    pub fn states(&self) -> usize {
        self.singles.len().pow(self.n as u32)
    }

    pub fn encode(&self, config: &[SiteState]) -> usize {
        config.iter().rev().fold(0, |acc, s| acc * self.singles.len() + self.singles.iter().position(|t| t == s).unwrap())
    }

    pub fn decode(&self, mut code: usize) -> Vec<SiteState> {
        (0..self.n)
            .map(|_| {
                let s = self.singles[code % self.singles.len()];
                code /= self.singles.len();
                s
            })
            .collect()
    }

    /// Generator built site by site and neighbor by neighbor from the verbal rules: a
    /// neighbor `y` pushes an unassociated offspring of its host type onto `x` at rate
    /// `lambda` (times `g` if `y` is associated), and an unassociated `x = (i, 0)` catches
    /// symbiont `m` at rate `c[i][m]` from each neighbor carrying `m`.
    pub fn new(n: usize, kappa: u8, lambda: f64, g: f64, c: &[Vec<f64>]) -> Self {
        let singles = site_states(kappa);
        let mut chain = RingChain { n, kappa, singles, q: Vec::new() };
        let size = chain.states();
        let mut q = vec![0.0; size * size];
        for code in 0..size {
            let conf = chain.decode(code);
            for x in 0..n {
                for y in (0..n).filter(|&y| y != x) {
                    let birth = if conf[y].symbiont == 0 { lambda } else { lambda * g };
                    let mut next = conf.clone();
                    next[x] = SiteState::unassociated(conf[y].host);
                    q[code * size + chain.encode(&next)] += birth;
                    if conf[x].symbiont == 0 && conf[y].symbiont != 0 {
                        let rate = c[conf[x].host as usize - 1][conf[y].symbiont as usize - 1];
                        let mut next = conf.clone();
                        next[x] = SiteState::new(conf[x].host, conf[y].symbiont);
                        q[code * size + chain.encode(&next)] += rate;
                    }
                }
            }
            // diagonal holds minus the exit rate; self-loops cancel out
            q[code * size + code] = 0.0;
            let exit: f64 = q[code * size..(code + 1) * size].iter().sum();
            q[code * size + code] = -exit;
        }
        chain.q = q;
        chain
    }

    /// `pi0 * exp(Q t)` by uniformization.
    pub fn transient(&self, start: usize, t: f64) -> Vec<f64> {
        let size = self.states();
        let rate = (0..size).map(|i| -self.q[i * size + i]).fold(0.0, f64::max);
        let mut term = vec![0.0; size];
        term[start] = 1.0;
        let mut out = vec![0.0; size];
        let lt = rate * t;
        let mut weight = (-lt).exp();
        let mut mass = 0.0;
        for k in 0.. {
            for i in 0..size {
                out[i] += weight * term[i];
            }
            mass += weight;
            if 1.0 - mass < 1e-15 && k as f64 > lt {
                break;
            }
            let mut next = vec![0.0; size];
            for i in 0..size {
                if term[i] == 0.0 {
                    continue;
                }
                for j in 0..size {
                    let p = self.q[i * size + j] / rate + if i == j { 1.0 } else { 0.0 };
                    next[j] += term[i] * p;
                }
            }
            term = next;
            weight *= lt / (k + 1) as f64;
        }
        out
    }
}

pub struct OracleComparison {
    pub states: usize,
    pub worst_z: f64,
    pub failures: Vec<(usize, f64, f64)>,
    pub chi2: f64,
    pub chi2_dof: usize,
}

/// Runs the simulator `runs` times from `start` to `t` on the 3-site ring and compares the
/// empirical distribution with the oracle state by state.
pub fn compare_with_oracle(params: &ModelParams, start: &[SiteState], t: f64, runs: u64, seed: u64) -> OracleComparison {
    compare_with_oracle_opts(params, start, t, runs, seed, false)
}

pub fn compare_with_oracle_opts(
    params: &ModelParams,
    start: &[SiteState],
    t: f64,
    runs: u64,
    seed: u64,
    skip_null: bool,
) -> OracleComparison {
    let c: Vec<Vec<f64>> = (1..=params.kappa as u8).map(|i| (1..=params.kappa as u8).map(|j| params.c(i, j)).collect()).collect();
    let chain = RingChain::new(start.len(), params.kappa as u8, params.lambda, params.g, &c);
    let p = chain.transient(chain.encode(start), t);
    let geometry = Geometry::torus(1, start.len()).unwrap();
    let initial = Configuration::from_states(geometry, start.to_vec()).unwrap();
    let mut counts = vec![0u64; chain.states()];
    for r in 0..runs {
        let mut rng = replicate_rng(seed, r);
        let mut sim = Simulator::new(initial.clone(), params.clone()).unwrap().skip_null_events(skip_null);
        sim.run(t, None, &mut rng, &mut []).unwrap();
        counts[chain.encode(sim.config().sites())] += 1;
    }
    let n = runs as f64;
    let mut out = OracleComparison { states: 0, worst_z: 0.0, failures: Vec::new(), chi2: 0.0, chi2_dof: 0 };
    for (i, (&pi, &ci)) in p.iter().zip(&counts).enumerate() {
        if pi == 0.0 {
            assert_eq!(ci, 0, "state {i} is unreachable but was visited");
            continue;
        }
        out.states += 1;
        let sd = (pi * (1.0 - pi) / n).sqrt();
        let z = (ci as f64 / n - pi).abs() / sd;
        out.worst_z = out.worst_z.max(z);
        // 3-sigma score band; the plain normal band misbehaves for rare states
        let (lo, hi) = wilson_interval(ci, runs, 3.0);
        if pi < lo || pi > hi {
            out.failures.push((i, ci as f64 / n, pi));
        }
        if pi * n >= 5.0 {
            out.chi2 += (ci as f64 - n * pi).powi(2) / (n * pi);
            out.chi2_dof += 1;
        }
    }
    out.chi2_dof = out.chi2_dof.saturating_sub(1);
    out
}

impl OracleComparison {
    /// Wilson-Hilferty normal score of the chi-square statistic.
    pub fn chi2_z(&self) -> f64 {
        let k = self.chi2_dof as f64;
        ((self.chi2 / k).cbrt() - (1.0 - 2.0 / (9.0 * k))) / (2.0 / (9.0 * k)).sqrt()
    }
}

pub fn random_config<R: Rng>(geometry: Geometry, kappa: u8, rng: &mut R) -> Configuration {
    let states = (0..geometry.site_count())
        .map(|_| SiteState::new(rng.random_range(1..=kappa), rng.random_range(0..=kappa)))
        .collect();
    Configuration::from_states(geometry, states).unwrap()
}

/// Total rate at which `x` switches between associated and unassociated.
pub fn presence_flip_rate(config: &Configuration, x: usize, params: &ModelParams) -> f64 {
    let was = config.get(x).is_associated();
    site_rates(config, x, params)
        .unwrap()
        .iter()
        .filter(|t| t.target.is_associated() != was)
        .map(|t| t.rate)
        .sum()
}

pub struct ReductionReport {
    pub configurations: usize,
    pub sites: usize,
    pub mismatches: usize,
}

fn dyadic<R: Rng>(rng: &mut R) -> f64 {
    rng.random_range(1..=64) as f64 / 8.0
}

/// `alpha = beta`, `g = 0`, `R1 = R2`: presence flips are a biased voter model with
/// rates `beta` and `1`.
pub fn voter_reduction(configurations: usize, seed: u64) -> ReductionReport {
    let mut rng = replicate_rng(seed, 0);
    let mut report = ReductionReport { configurations, sites: 0, mismatches: 0 };
    for _ in 0..configurations {
        let (d, range, kappa) = (rng.random_range(1..=2), rng.random_range(1..=2), rng.random_range(2..=3));
        let side = if d == 1 { rng.random_range(2 * range + 1..=20) } else { rng.random_range(2 * range + 1..=8) };
        let beta = dyadic(&mut rng);
        let params = ModelParams::symmetric(kappa as usize, 1.0, 0.0, beta, beta, range, range);
        let config = random_config(Geometry::torus(d, side).unwrap(), kappa, &mut rng);
        let field = project_colorblind(&config);
        let rule = BiasedVoterParams { beta1: beta, beta2: 1.0, range };
        for x in 0..config.sites().len() {
            report.sites += 1;
            if presence_flip_rate(&config, x, &params) != flip_rate(&field, x, &rule).unwrap() {
                report.mismatches += 1;
            }
        }
    }
    report
}

/// `g = 1`, `alpha = beta`: presence flips are a contact process with birth `beta` per
/// carrier within `R2` and death `nu(R1)`.
pub fn contact_reduction(configurations: usize, seed: u64) -> ReductionReport {
    let mut rng = replicate_rng(seed, 1);
    let mut report = ReductionReport { configurations, sites: 0, mismatches: 0 };
    for _ in 0..configurations {
        let d = rng.random_range(1..=2);
        let (r1, r2, kappa) = (rng.random_range(1..=2), rng.random_range(1..=2), rng.random_range(2..=3));
        let r = r1.max(r2);
        let side = if d == 1 { rng.random_range(2 * r + 1..=20) } else { rng.random_range(2 * r + 1..=8) };
        let beta = dyadic(&mut rng);
        let params = ModelParams::symmetric(kappa as usize, 1.0, 1.0, beta, beta, r1, r2);
        let config = random_config(Geometry::torus(d, side).unwrap(), kappa, &mut rng);
        let field = project_colorblind(&config);
        let rule = ContactParams { birth: beta, death: hostsym::lattice::nu(d, r1) as f64, range: r2 };
        for x in 0..config.sites().len() {
            report.sites += 1;
            if presence_flip_rate(&config, x, &params) != flip_rate(&field, x, &rule).unwrap() {
                report.mismatches += 1;
            }
        }
    }
    report
}
