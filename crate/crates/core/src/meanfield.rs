//! Mean-field ODE system for the densities `u_i` (unassociated host `i`) and `v_ij`
//! (host `i` carrying symbiont `j`), with cross-infection rate `a` and self-infection
//! rate `b`.
//!
//! States are flat vectors `[u_1..u_k, v_11, v_12, .., v_kk]`. The redundant coordinate is
//! kept; stability is decided on the simplex tangent space `{x : sum(x) = 0}`.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldParams {
    pub kappa: usize,
    pub a: f64,
    pub b: f64,
    pub g: f64,
}

impl MeanFieldParams {
    pub fn new(kappa: usize, a: f64, b: f64, g: f64) -> Self {
        MeanFieldParams { kappa, a, b, g }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.kappa == 0 {
            out.push("kappa must be at least 1".into());
        }
        if !(self.a >= 0.0 && self.a <= self.b && self.b.is_finite()) {
            out.push(format!("need 0 <= a <= b, got a={}, b={}", self.a, self.b));
        }
        if !(self.g >= 0.0 && self.g.is_finite()) {
            out.push(format!("g must be nonnegative, got {}", self.g));
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.kappa + self.kappa * self.kappa
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeanFieldState {
    kappa: usize,
    values: Vec<f64>,
}

impl MeanFieldState {
    pub fn new(u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        let kappa = u.len();
        if kappa == 0 || v.len() != kappa * kappa {
            return Err(Error::Input(format!(
                "need kappa u-entries and kappa^2 v-entries, got {} and {}",
                u.len(),
                v.len()
            )));
        }
        let mut values = u;
        values.extend(v);
        Ok(MeanFieldState { kappa, values })
    }

    pub fn from_vector(kappa: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != kappa + kappa * kappa {
            return Err(Error::Input(format!(
                "state vector for kappa={kappa} needs {} entries, got {}",
                kappa + kappa * kappa,
                values.len()
            )));
        }
        Ok(MeanFieldState { kappa, values })
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn u(&self) -> &[f64] {
        &self.values[..self.kappa]
    }

    /// Row-major `v_ij`.
    pub fn v(&self) -> &[f64] {
        &self.values[self.kappa..]
    }

    /// `v_ij` with 1-based host `i` and symbiont `j`.
    pub fn v_at(&self, i: usize, j: usize) -> f64 {
        self.values[self.kappa + (i - 1) * self.kappa + (j - 1)]
    }

    /// Associated density of host `i` (1-based), `v_i.`.
    pub fn v_row(&self, i: usize) -> f64 {
        (1..=self.kappa).map(|j| self.v_at(i, j)).sum()
    }

    /// Density of symbiont `j` (1-based), `v_.j`.
    pub fn v_col(&self, j: usize) -> f64 {
        (1..=self.kappa).map(|i| self.v_at(i, j)).sum()
    }

    /// Total density of host `i` (1-based), `h_i = u_i + v_i.`.
    pub fn host_density(&self, i: usize) -> f64 {
        self.values[i - 1] + self.v_row(i)
    }

    pub fn symbiont_density(&self) -> f64 {
        self.v().iter().sum()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Right-hand side of the mean-field equations, in the flat state layout.
pub fn rhs(state: &MeanFieldState, p: &MeanFieldParams) -> Vec<f64> {
    let mut out = vec![0.0; state.values.len()];
    rhs_into(state.kappa, &state.values, p, &mut out);
    out
}

fn rhs_into(kappa: usize, x: &[f64], p: &MeanFieldParams, out: &mut [f64]) {
    let (u, v) = x.split_at(kappa);
    let v_row: Vec<f64> = (0..kappa).map(|i| v[i * kappa..(i + 1) * kappa].iter().sum()).collect();
    let v_col: Vec<f64> = (0..kappa).map(|j| (0..kappa).map(|i| v[i * kappa + j]).sum()).collect();
    let u_tot: f64 = u.iter().sum();
    let v_tot: f64 = v_row.iter().sum();
    let col_tot: f64 = v_col.iter().sum();
    let fitness: Vec<f64> = (0..kappa).map(|i| u[i] + p.g * v_row[i]).collect();
    let fitness_tot: f64 = fitness.iter().sum();
    let loss = u_tot + p.g * v_tot;
    for i in 0..kappa {
        out[i] = (1.0 - u[i]) * fitness[i]
            - u[i] * (fitness_tot - fitness[i])
            - p.b * u[i] * v_col[i]
            - p.a * u[i] * (col_tot - v_col[i]);
        for j in 0..kappa {
            let rate = if i == j { p.b } else { p.a };
            out[kappa + i * kappa + j] = rate * u[i] * v_col[j] - v[i * kappa + j] * loss;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<MeanFieldState>,
}

const BOX_SLACK: f64 = 1e-6;

/// Classical fixed-step RK4 from `s0` to `t_end`, recording every `record_every`-th step
/// (the final state is always recorded). The step is `t_end / ceil(t_end / dt)`.
pub fn integrate_recorded(
    s0: &MeanFieldState,
    p: &MeanFieldParams,
    t_end: f64,
    dt: f64,
    record_every: usize,
) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::Precondition(format!("need dt > 0 and t_end >= 0, got dt={dt}, t_end={t_end}")));
    }
    if s0.kappa != p.kappa {
        return Err(Error::Input(format!("state kappa {} != params kappa {}", s0.kappa, p.kappa)));
    }
    let steps = ((t_end / dt) - 1e-9).ceil().max(0.0) as usize;
    let h = if steps == 0 { 0.0 } else { t_end / steps as f64 };
    let kappa = p.kappa;
    let n = s0.values.len();
    let mut x = s0.values.clone();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let every = record_every.max(1);
    let mut traj = Trajectory { times: vec![0.0], states: vec![s0.clone()] };
    for step in 1..=steps {
        rhs_into(kappa, &x, p, &mut k1);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        rhs_into(kappa, &tmp, p, &mut k2);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        rhs_into(kappa, &tmp, p, &mut k3);
        for i in 0..n {
            tmp[i] = x[i] + h * k3[i];
        }
        rhs_into(kappa, &tmp, p, &mut k4);
        for i in 0..n {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t = step as f64 * h;
        if let Some((index, &value)) =
            x.iter().enumerate().find(|(_, &v)| !(v >= -BOX_SLACK && v <= 1.0 + BOX_SLACK))
        {
            return Err(Error::StepSize { t, index, value });
        }
        if step % every == 0 || step == steps {
            traj.times.push(t);
            traj.states.push(MeanFieldState { kappa, values: x.clone() });
        }
    }
    Ok(traj)
}

/// RK4 trajectory recording every step.
pub fn integrate(s0: &MeanFieldState, p: &MeanFieldParams, t_end: f64, dt: f64) -> Result<Trajectory> {
    integrate_recorded(s0, p, t_end, dt, 1)
}

/// Symmetric non-trivial equilibrium: `u_i = g / ((k-1)a + b - k(1-g))`, `h_i = 1/k`,
/// `v_ij / v_ii = a / b`. Requires `(k-1)a + b > k`.
pub fn equilibrium_prop21(p: &MeanFieldParams) -> Result<MeanFieldState> {
    let k = p.kappa as f64;
    let drive = (k - 1.0) * p.a + p.b;
    if !(drive > k) {
        return Err(Error::NoEquilibrium(format!(
            "(kappa-1)a + b = {drive} does not exceed kappa = {k}"
        )));
    }
    let u = p.g / (drive - k * (1.0 - p.g));
    let row = 1.0 / k - u;
    let diag = p.b * row / drive;
    let off = p.a * row / drive;
    let kappa = p.kappa;
    let mut values = vec![u; kappa];
    for i in 0..kappa {
        for j in 0..kappa {
            values.push(if i == j { diag } else { off });
        }
    }
    Ok(MeanFieldState { kappa, values })
}

/// Reduced generalist equilibrium `(u., v..)`; `(1, 0)` when symbionts cannot persist.
pub fn generalist_equilibrium(b: f64, g: f64) -> (f64, f64) {
    if b <= 1.0 {
        return (1.0, 0.0);
    }
    let denom = b - 1.0 + g;
    (g / denom, (b - 1.0) / denom)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

#[derive(Clone, Debug)]
pub struct StabilityReport {
    pub class: Stability,
    /// Eigenvalues of the Jacobian restricted to the simplex tangent space.
    pub eigenvalues: Vec<Complex<f64>>,
}

const JACOBIAN_STEP: f64 = 1e-6;
const EQUILIBRIUM_TOL: f64 = 1e-8;
const MARGINAL_BAND: f64 = 1e-8;

/// Central-difference Jacobian of [`rhs`] at `point`.
pub fn jacobian(point: &MeanFieldState, p: &MeanFieldParams) -> DMatrix<f64> {
    let n = point.values.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut plus = vec![0.0; n];
    let mut minus = vec![0.0; n];
    let mut x = point.values.clone();
    for k in 0..n {
        let orig = x[k];
        x[k] = orig + JACOBIAN_STEP;
        rhs_into(point.kappa, &x, p, &mut plus);
        x[k] = orig - JACOBIAN_STEP;
        rhs_into(point.kappa, &x, p, &mut minus);
        x[k] = orig;
        for i in 0..n {
            jac[(i, k)] = (plus[i] - minus[i]) / (2.0 * JACOBIAN_STEP);
        }
    }
    jac
}

/// Orthonormal basis (as columns) of `{x : sum(x) = 0}` in dimension `n`.
fn simplex_tangent_basis(n: usize) -> DMatrix<f64> {
    // Helmert contrasts
    DMatrix::from_fn(n, n - 1, |i, k| {
        let m = (k + 1) as f64;
        let scale = 1.0 / (m * (m + 1.0)).sqrt();
        if i <= k {
            scale
        } else if i == k + 1 {
            -m * scale
        } else {
            0.0
        }
    })
}

/// Local stability of an equilibrium on the simplex.
pub fn stability(point: &MeanFieldState, p: &MeanFieldParams) -> Result<StabilityReport> {
    let residual = rhs(point, p).iter().fold(0.0f64, |m, r| m.max(r.abs()));
    if !(residual < EQUILIBRIUM_TOL) {
        return Err(Error::Precondition(format!(
            "point is not an equilibrium: |rhs|_inf = {residual:e}"
        )));
    }
    let jac = jacobian(point, p);
    let q = simplex_tangent_basis(jac.nrows());
    let reduced = q.transpose() * &jac * &q;
    let eigenvalues: Vec<Complex<f64>> = reduced.complex_eigenvalues().iter().copied().collect();
    let max_re = eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let class = if max_re > MARGINAL_BAND {
        Stability::Unstable
    } else if max_re < -MARGINAL_BAND {
        Stability::Stable
    } else {
        Stability::Marginal
    };
    Ok(StabilityReport { class, eigenvalues })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replicate_rng;
    use rand::Rng;

    fn random_simplex<R: Rng>(kappa: usize, rng: &mut R) -> MeanFieldState {
        let n = kappa + kappa * kappa;
        // normalized exponentials give a uniform point on the simplex
        let raw: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let s: f64 = raw.iter().sum();
        MeanFieldState::from_vector(kappa, raw.into_iter().map(|r| r / s).collect()).unwrap()
    }

    fn sup(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    #[test]
    fn closed_form_values() {
        let e = equilibrium_prop21(&MeanFieldParams::new(2, 0.0, 3.0, 0.5)).unwrap();
        assert_eq!(e.u(), &[0.25, 0.25]);
        assert_eq!(e.v(), &[0.25, 0.0, 0.0, 0.25]);
        let e = equilibrium_prop21(&MeanFieldParams::new(2, 0.0, 3.0, 2.0)).unwrap();
        assert!((e.u()[0] - 0.4).abs() < 1e-15 && (e.v_at(1, 1) - 0.1).abs() < 1e-15);
        assert_eq!(e.v_at(1, 2), 0.0);
        let e = equilibrium_prop21(&MeanFieldParams::new(3, 1.0, 4.0, 0.0)).unwrap();
        assert!(e.u().iter().all(|&u| u == 0.0));
        assert!(matches!(
            equilibrium_prop21(&MeanFieldParams::new(2, 0.5, 1.4, 0.5)),
            Err(Error::NoEquilibrium(_))
        ));
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let mut rng = replicate_rng(3, 0);
        for _ in 0..1000 {
            let kappa = rng.random_range(1..=5usize);
            let b = rng.random_range(0.0..10.0);
            let a = rng.random_range(0.0..=b);
            let g = rng.random_range(0.0..4.0);
            let p = MeanFieldParams::new(kappa, a, b, g);
            let Ok(e) = equilibrium_prop21(&p) else { continue };
            assert!(sup(&rhs(&e, &p)) < 1e-10, "{p:?}");
            assert!((e.total() - 1.0).abs() < 1e-12);
            // host-ratio lock
            for i in 2..=kappa {
                let hr = e.host_density(i) / e.host_density(1);
                assert!((hr - e.u()[i - 1] / e.u()[0]).abs() < 1e-12 || e.u()[0] == 0.0);
                assert!((hr - e.v_row(i) / e.v_row(1)).abs() < 1e-12);
            }
            if a > 0.0 && kappa > 1 {
                assert!((e.v_at(1, 2) / e.v_at(1, 1) - a / b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn simplex_and_host_conservation() {
        let mut rng = replicate_rng(4, 0);
        for _ in 0..10_000 {
            let kappa = rng.random_range(1..=4usize);
            let b = rng.random_range(0.0..6.0);
            let g = if rng.random_bool(0.5) { 1.0 } else { rng.random_range(0.0..3.0) };
            let p = MeanFieldParams::new(kappa, rng.random_range(0.0..=b), b, g);
            let s = random_simplex(kappa, &mut rng);
            let d = rhs(&s, &p);
            assert!(d.iter().sum::<f64>().abs() < 1e-12);
            if g == 1.0 {
                for i in 0..kappa {
                    let row: f64 = d[kappa + i * kappa..kappa + (i + 1) * kappa].iter().sum();
                    assert!((d[i] + row).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn single_type_reduction() {
        let mut rng = replicate_rng(5, 0);
        for _ in 0..100 {
            let v: f64 = rng.random();
            let (b, g) = (rng.random_range(0.0..5.0), rng.random_range(0.0..3.0));
            let s = MeanFieldState::new(vec![1.0 - v], vec![v]).unwrap();
            let d = rhs(&s, &MeanFieldParams::new(1, rng.random_range(0.0..=b), b, g));
            let expect = v * ((b - 1.0) * (1.0 - v) - g * v);
            assert!((d[1] - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn equilibrium_trajectory_is_constant() {
        let p = MeanFieldParams::new(3, 0.5, 3.0, 0.7);
        let e = equilibrium_prop21(&p).unwrap();
        let traj = integrate_recorded(&e, &p, 20.0, 1e-2, 100).unwrap();
        for s in &traj.states {
            assert!(s.as_slice().iter().zip(e.as_slice()).all(|(a, b)| (a - b).abs() < 1e-9));
        }
    }

    #[test]
    fn pathogen_goes_extinct_and_hosts_coexist() {
        let p = MeanFieldParams::new(2, 0.0, 3.0, 0.5);
        let s0 = MeanFieldState::new(vec![0.45, 0.5], vec![0.05, 0.0, 0.0, 0.0]).unwrap();
        let traj = integrate_recorded(&s0, &p, 400.0, 1e-2, 1000).unwrap();
        let end = traj.states.last().unwrap();
        assert!(end.v_col(1) < 1e-3, "symbiont 1 density {}", end.v_col(1));
        assert!(end.host_density(1) > 0.05 && end.host_density(2) > 0.05);
        assert!((end.total() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mutualist_excludes_second_host() {
        let p = MeanFieldParams::new(2, 0.0, 3.0, 2.0);
        let s0 = MeanFieldState::new(vec![0.1, 0.5], vec![0.4, 0.0, 0.0, 0.0]).unwrap();
        let traj = integrate_recorded(&s0, &p, 200.0, 1e-2, 1000).unwrap();
        let end = traj.states.last().unwrap();
        assert!(end.host_density(2) < 1e-3, "host 2 density {}", end.host_density(2));
        assert!((end.total() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn blow_up_is_reported() {
        let p = MeanFieldParams::new(1, 0.0, 3.0, 0.5);
        let s0 = MeanFieldState::new(vec![0.5], vec![0.5]).unwrap();
        assert!(matches!(integrate(&s0, &p, 10.0, 5.0), Err(Error::StepSize { .. })));
        assert!(integrate(&s0, &p, 1.0, 0.0).is_err());
    }

    #[test]
    fn stability_classification() {
        let p = MeanFieldParams::new(2, 0.0, 3.0, 0.5);
        let r = stability(&equilibrium_prop21(&p).unwrap(), &p).unwrap();
        assert_eq!(r.class, Stability::Stable);
        assert_eq!(r.eigenvalues.len(), 5);
        let p = MeanFieldParams::new(2, 0.0, 3.0, 2.0);
        assert_eq!(stability(&equilibrium_prop21(&p).unwrap(), &p).unwrap().class, Stability::Unstable);
        let p = MeanFieldParams::new(1, 0.0, 3.0, 0.5);
        let boundary = MeanFieldState::new(vec![1.0], vec![0.0]).unwrap();
        let r = stability(&boundary, &p).unwrap();
        assert_eq!(r.class, Stability::Unstable);
        assert!((r.eigenvalues[0].re - 2.0).abs() < 1e-6);
        // interior generalist point is stable
        let (u, v) = generalist_equilibrium(3.0, 0.5);
        let interior = MeanFieldState::new(vec![u], vec![v]).unwrap();
        assert_eq!(stability(&interior, &p).unwrap().class, Stability::Stable);
        let off = MeanFieldState::new(vec![0.5], vec![0.5]).unwrap();
        assert!(matches!(stability(&off, &p), Err(Error::Precondition(_))));
    }

    #[test]
    fn neutral_symbionts_leave_marginal_directions() {
        let p = MeanFieldParams::new(2, 0.0, 3.0, 1.0);
        let e = equilibrium_prop21(&p).unwrap();
        assert_eq!(stability(&e, &p).unwrap().class, Stability::Marginal);
    }

    #[test]
    fn generalist_closed_form() {
        assert_eq!(generalist_equilibrium(3.0, 0.5), (0.2, 0.8));
        let (u, v) = generalist_equilibrium(1.7, 0.7);
        assert!((u - 0.5).abs() < 1e-15 && (v - 0.5).abs() < 1e-15);
        assert_eq!(generalist_equilibrium(1.0, 0.3), (1.0, 0.0));
        assert_eq!(generalist_equilibrium(0.2, 0.3), (1.0, 0.0));
    }
}
