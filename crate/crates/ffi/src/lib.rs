//! C ABI over `hostsym`.
//!
//! Every entry point returns an [`HsStatus`]. On failure the message is kept per thread and
//! can be copied out with [`hs_last_error_message`]. Panics never cross the boundary; they
//! surface as [`HsStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use hostsym::experiments::{parse_run_file, run_experiment};
use hostsym::meanfield::{self, MeanFieldParams, MeanFieldState, Stability};
use hostsym::observables::measure_densities;
use hostsym::rng::{replicate_rng, ReplicateRng};
use hostsym::{Configuration, Error, Geometry, ModelParams, Simulator, SiteState};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HsStatus {
    Ok = 0,
    NullPointer = 1,
    /// Rejected parameters, configuration or input text.
    InvalidArgument = 2,
    NoEquilibrium = 3,
    /// Integration or solver failure.
    Numerical = 4,
    Io = 5,
    /// Output buffer too small.
    BufferTooSmall = 6,
    Panic = 7,
    Failure = 8,
}

impl From<&Error> for HsStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Validation(_) | Error::Configuration(_) | Error::Input(_) | Error::Parse(_) => {
                HsStatus::InvalidArgument
            }
            Error::NoEquilibrium(_) => HsStatus::NoEquilibrium,
            Error::StepSize { .. } | Error::Precondition(_) => HsStatus::Numerical,
            Error::Io(_) => HsStatus::Io,
            _ => HsStatus::Failure,
        }
    }
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HsSiteState {
    pub host: u8,
    /// 0 when the host is unassociated.
    pub symbiont: u8,
}

/// Model constants. `infection` points at a row-major `kappa * kappa` matrix whose entry
/// `(i, j)` is the rate at which symbiont `j + 1` infects host `i + 1`.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct HsModel {
    pub kappa: usize,
    pub lambda: f64,
    pub g: f64,
    pub infection: *const f64,
    pub r1: usize,
    pub r2: usize,
    /// Threshold for the threshold host rule; 0 selects the linear rule.
    pub theta: u32,
}

/// `halo == 0` gives the torus `(Z mod side)^dimension`; otherwise a one-dimensional segment
/// with `halo` frozen sites at each end.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct HsGeometry {
    pub dimension: usize,
    pub side: usize,
    pub halo: usize,
}

/// Opaque simulator handle.
pub struct HsSimulator {
    sim: Simulator,
    rng: ReplicateRng,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Fail(HsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(HsStatus::from(&e), e.to_string())
    }
}

type FfiResult = Result<(), Fail>;

fn guard(f: impl FnOnce() -> FfiResult) -> HsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            HsStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            HsStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail(HsStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be null or valid for `len` reads.
unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or valid for `len` writes.
unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    non_null(p, name)?;
    Ok(std::slice::from_raw_parts_mut(p, len))
}

/// # Safety
/// `p` must be a valid NUL-terminated string.
unsafe fn c_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    non_null(p, name)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(HsStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

/// # Safety
/// `model.infection` must hold `kappa * kappa` values.
unsafe fn model_params(model: &HsModel) -> Result<ModelParams, Fail> {
    let infection = slice(model.infection, model.kappa * model.kappa, "model.infection")?.to_vec();
    let params = ModelParams {
        kappa: model.kappa,
        lambda: model.lambda,
        g: model.g,
        infection,
        r1: model.r1,
        r2: model.r2,
        theta: (model.theta > 0).then_some(model.theta),
    };
    params.validate()?;
    Ok(params)
}

fn sim_ref<'a>(sim: *const HsSimulator) -> Result<&'a HsSimulator, Fail> {
    non_null(sim, "simulator")?;
    // SAFETY: non-null handles come from `hs_simulator_new`
    Ok(unsafe { &*sim })
}

/// Length of the last error message on this thread, excluding the terminator.
#[no_mangle]
pub extern "C" fn hs_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().len())
}

/// Copies the last error message, NUL-terminated and truncated to `capacity - 1` bytes.
/// Returns the full message length.
///
/// # Safety
/// `buf` must be null or valid for `capacity` writes.
#[no_mangle]
pub unsafe extern "C" fn hs_last_error_message(buf: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && capacity > 0 {
            let n = msg.len().min(capacity - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Static NUL-terminated version string.
#[no_mangle]
pub extern "C" fn hs_version() -> *const c_char {
    concat!("hostsym ", env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a simulator from `site_count` row-major site states, drawing randomness from
/// replicate stream `replicate` of `seed`.
///
/// # Safety
/// Pointers must be valid; `states` must hold `site_count` entries.
#[no_mangle]
pub unsafe extern "C" fn hs_simulator_new(
    model: *const HsModel,
    geometry: HsGeometry,
    states: *const HsSiteState,
    site_count: usize,
    seed: u64,
    replicate: u64,
    out: *mut *mut HsSimulator,
) -> HsStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let params = model_params(&*model)?;
        let geom = if geometry.halo == 0 {
            Geometry::torus(geometry.dimension, geometry.side)?
        } else {
            if geometry.dimension != 1 {
                return Err(Fail(HsStatus::InvalidArgument, "segments are one-dimensional".into()));
            }
            Geometry::segment(geometry.side, geometry.halo)?
        };
        let states: Vec<SiteState> =
            slice(states, site_count, "states")?.iter().map(|s| SiteState::new(s.host, s.symbiont)).collect();
        let config = Configuration::from_states(geom, states)?;
        let sim = Simulator::new(config, params)?;
        *out = Box::into_raw(Box::new(HsSimulator { sim, rng: replicate_rng(seed, replicate) }));
        Ok(())
    })
}

/// # Safety
/// `sim` must be null or a handle from [`hs_simulator_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hs_simulator_free(sim: *mut HsSimulator) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advances to `t_end`. `events` (optional) receives the number of events executed,
/// null births included; `absorbed` (optional) is set to 1 if the chain got stuck.
///
/// # Safety
/// `sim` must be a live handle; optional pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn hs_simulator_run(
    sim: *mut HsSimulator,
    t_end: f64,
    events: *mut u64,
    absorbed: *mut u8,
) -> HsStatus {
    guard(|| {
        non_null(sim, "simulator")?;
        let h = &mut *sim;
        let summary = h.sim.run(t_end, None, &mut h.rng, &mut [])?;
        if !events.is_null() {
            *events = summary.events;
        }
        if !absorbed.is_null() {
            *absorbed = summary.absorbed as u8;
        }
        Ok(())
    })
}

/// # Safety
/// `sim` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hs_simulator_time(sim: *const HsSimulator, out: *mut f64) -> HsStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = sim_ref(sim)?.sim.clock();
        Ok(())
    })
}

/// Number of active sites (halo sites excluded).
///
/// # Safety
/// `sim` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hs_simulator_site_count(sim: *const HsSimulator, out: *mut usize) -> HsStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = sim_ref(sim)?.sim.config().sites().len();
        Ok(())
    })
}

/// # Safety
/// `sim` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hs_simulator_get_state(
    sim: *const HsSimulator,
    index: usize,
    out: *mut HsSiteState,
) -> HsStatus {
    guard(|| {
        non_null(out, "out")?;
        let sites = sim_ref(sim)?.sim.config().sites();
        let s = sites.get(index).ok_or_else(|| {
            Fail(HsStatus::InvalidArgument, format!("site {index} out of range ({} sites)", sites.len()))
        })?;
        *out = HsSiteState { host: s.host, symbiont: s.symbiont };
        Ok(())
    })
}

/// Writes unassociated densities `u_i` (`kappa` values) and associated densities `v_ij`
/// (`kappa * kappa`, row-major) over the active sites.
///
/// # Safety
/// `u` must hold `u_len` values, `v` must hold `v_len` values.
#[no_mangle]
pub unsafe extern "C" fn hs_simulator_densities(
    sim: *const HsSimulator,
    u: *mut f64,
    u_len: usize,
    v: *mut f64,
    v_len: usize,
) -> HsStatus {
    guard(|| {
        let h = sim_ref(sim)?;
        let k = h.sim.params().kappa;
        if u_len < k || v_len < k * k {
            return Err(Fail(HsStatus::BufferTooSmall, format!("need {k} and {} values", k * k)));
        }
        let d = measure_densities(h.sim.config(), k);
        slice_mut(u, k, "u")?.copy_from_slice(&d.u());
        slice_mut(v, k * k, "v")?.copy_from_slice(&d.v());
        Ok(())
    })
}

fn mf_params(kappa: usize, a: f64, b: f64, g: f64) -> Result<MeanFieldParams, Fail> {
    let p = MeanFieldParams::new(kappa, a, b, g);
    let v = p.violations();
    if v.is_empty() {
        Ok(p)
    } else {
        Err(Error::Validation(v).into())
    }
}

/// Symmetric interior fixed point of the mean-field system, `kappa + kappa^2` values
/// (`u` then row-major `v`).
///
/// # Safety
/// `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn hs_meanfield_equilibrium(
    kappa: usize,
    a: f64,
    b: f64,
    g: f64,
    out: *mut f64,
    len: usize,
) -> HsStatus {
    guard(|| {
        let p = mf_params(kappa, a, b, g)?;
        if len < p.dim() {
            return Err(Fail(HsStatus::BufferTooSmall, format!("need {} values", p.dim())));
        }
        let eq = meanfield::equilibrium_prop21(&p)?;
        slice_mut(out, p.dim(), "out")?.copy_from_slice(eq.as_slice());
        Ok(())
    })
}

/// Integrates from `state` (length `kappa + kappa^2`) to `t_end` with RK4 step at most `dt`,
/// writing the end state into `out`.
///
/// # Safety
/// `state` and `out` must each hold `kappa + kappa^2` values.
#[no_mangle]
pub unsafe extern "C" fn hs_meanfield_integrate(
    kappa: usize,
    a: f64,
    b: f64,
    g: f64,
    state: *const f64,
    t_end: f64,
    dt: f64,
    out: *mut f64,
) -> HsStatus {
    guard(|| {
        let p = mf_params(kappa, a, b, g)?;
        let s0 = MeanFieldState::from_vector(kappa, slice(state, p.dim(), "state")?.to_vec())?;
        let traj = meanfield::integrate_recorded(&s0, &p, t_end, dt, usize::MAX)?;
        let end = traj.states.last().expect("initial state is recorded");
        slice_mut(out, p.dim(), "out")?.copy_from_slice(end.as_slice());
        Ok(())
    })
}

/// Linear stability of a fixed point on the simplex. `class` receives 0 (stable),
/// 1 (unstable) or 2 (marginal); `max_real` the largest real part of the eigenvalues.
///
/// # Safety
/// `state` must hold `kappa + kappa^2` values; `class` and `max_real` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hs_meanfield_stability(
    kappa: usize,
    a: f64,
    b: f64,
    g: f64,
    state: *const f64,
    class: *mut i32,
    max_real: *mut f64,
) -> HsStatus {
    guard(|| {
        non_null(class, "class")?;
        non_null(max_real, "max_real")?;
        let p = mf_params(kappa, a, b, g)?;
        let point = MeanFieldState::from_vector(kappa, slice(state, p.dim(), "state")?.to_vec())?;
        let report = meanfield::stability(&point, &p)?;
        *class = match report.class {
            Stability::Stable => 0,
            Stability::Unstable => 1,
            Stability::Marginal => 2,
        };
        *max_real = report.eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        Ok(())
    })
}

/// Runs a configuration or manifest file and writes its outputs into `out_dir`.
///
/// # Safety
/// Both arguments must be valid NUL-terminated UTF-8 strings.
#[no_mangle]
pub unsafe extern "C" fn hs_run_experiment_file(path: *const c_char, out_dir: *const c_char) -> HsStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        let out_dir = c_str(out_dir, "out_dir")?;
        let text = std::fs::read_to_string(path).map_err(Error::from)?;
        let config = parse_run_file(&text)?;
        run_experiment(&config, Path::new(out_dir))?;
        Ok(())
    })
}
