//! C ABI over `ringlattice`.
//!
//! Every function returns an [`RlStatus`]; on failure the message is kept
//! per thread and can be copied out with [`rl_last_error_message`]. Handles
//! are created by `*_new`/`*_run` functions and released with the matching
//! `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use ringlattice::analysis::{detect_bloch_signature_with, trace_derivative, ObservableTrace, TraceKind};
use ringlattice::bands::{solve_bands, DEFAULT_K_MAX};
use ringlattice::calibration::{calibrate_iv, infer_angular_acceleration};
use ringlattice::protocols::{loading_fidelity, lz_analytics, run_experiment, Drive, ExperimentConfig, LoadingMode};
use ringlattice::{Error, RingLatticeParams, UnitSystem};

/// Opaque model parameters.
pub struct RlParams(RingLatticeParams);

/// Opaque sampled observable.
pub struct RlTrace(ObservableTrace);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Validation = 3,
    DegenerateInput = 4,
    Numerical = 5,
    Detection = 6,
    Io = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RlDriveKind {
    /// `rate` is the ramp rate `s`.
    Ramp = 0,
    /// `rate` is the chirp constant `B`.
    Chirp = 1,
}

/// Experiment settings; start from [`rl_experiment_spec_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RlExperimentSpec {
    pub drive: RlDriveKind,
    pub rate: f64,
    pub rotation_time: f64,
    /// 0 loads the exact ground state; otherwise a linear depth ramp.
    pub load_time: f64,
    /// Only used with a chirp drive.
    pub omega_dot: f64,
    pub grid_n: usize,
    pub dt: f64,
    pub sample_interval: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RlLzReport {
    pub gamma: f64,
    pub t_lz: f64,
    pub phi_lz: f64,
    pub s_c: f64,
    pub adiabatic_margin: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RlSignature {
    pub t_b: f64,
    pub peak_amplitude: f64,
    pub fwhm: f64,
    pub n_peaks: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RlStatus {
    match e {
        Error::InvalidParameter(_) | Error::InvalidInput(_) => RlStatus::InvalidParameter,
        Error::Validation(_) | Error::Parse { .. } => RlStatus::Validation,
        Error::DegenerateInput(_) => RlStatus::DegenerateInput,
        Error::Numerical(_) | Error::Accuracy(_) | Error::Integrator(_) => RlStatus::Numerical,
        Error::Detection(_) => RlStatus::Detection,
        Error::Io(_) => RlStatus::Io,
    }
}

fn guard<F: FnOnce() -> Result<(), RlStatus>>(f: F) -> RlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RlStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            RlStatus::Panic
        }
    }
}

fn check<T>(r: ringlattice::Result<T>) -> Result<T, RlStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), RlStatus> {
    if p.is_null() {
        set_error(format!("{what} is null"));
        return Err(RlStatus::NullPointer);
    }
    Ok(())
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated) and returns the length it needs, including the NUL. Returns 0
/// when there is no error.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn rl_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes_with_nul();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len);
                std::ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n - 1) = 0;
            }
            bytes.len()
        }
    })
}

#[no_mangle]
pub extern "C" fn rl_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Dimensionless parameters (`ħ = 1`).
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn rl_params_new(inertia: f64, depth: f64, l: u32, out: *mut *mut RlParams) -> RlStatus {
    guard(|| {
        non_null(out, "out")?;
        let p = check(RingLatticeParams::new(inertia, depth, l, UnitSystem::dimensionless()))?;
        *out = Box::into_raw(Box::new(RlParams(p)));
        Ok(())
    })
}

/// # Safety
/// `params` must be null or a handle from [`rl_params_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rl_params_free(params: *mut RlParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// # Safety
/// `params` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn rl_params_recoil_energy(params: *const RlParams, out: *mut f64) -> RlStatus {
    guard(|| {
        non_null(params, "params")?;
        non_null(out, "out")?;
        *out = (*params).0.recoil_energy;
        Ok(())
    })
}

/// Writes the lowest `n_bands` energies at quasi angular momentum `q`.
///
/// # Safety
/// `params` must be a live handle and `out` must hold `n_bands` doubles.
#[no_mangle]
pub unsafe extern "C" fn rl_band_energies(params: *const RlParams, q: f64, n_bands: usize, out: *mut f64) -> RlStatus {
    guard(|| {
        non_null(params, "params")?;
        non_null(out, "out")?;
        if n_bands == 0 {
            set_error("n_bands must be at least 1".into());
            return Err(RlStatus::InvalidParameter);
        }
        let sol = check(solve_bands(&(*params).0, q, n_bands - 1, DEFAULT_K_MAX.max(n_bands + 4)))?;
        std::slice::from_raw_parts_mut(out, n_bands).copy_from_slice(&sol.energies[..n_bands]);
        Ok(())
    })
}

/// # Safety
/// `params` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn rl_lz_analytics(params: *const RlParams, ramp_rate: f64, out: *mut RlLzReport) -> RlStatus {
    guard(|| {
        non_null(params, "params")?;
        non_null(out, "out")?;
        let r = check(lz_analytics(&(*params).0, ramp_rate))?;
        *out = RlLzReport {
            gamma: r.gamma,
            t_lz: r.t_lz,
            phi_lz: r.phi_lz,
            s_c: r.s_c,
            adiabatic_margin: r.adiabatic_margin,
        };
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn rl_experiment_spec_default(drive: RlDriveKind, rate: f64, rotation_time: f64) -> RlExperimentSpec {
    RlExperimentSpec {
        drive,
        rate,
        rotation_time,
        load_time: 0.0,
        omega_dot: 0.0,
        grid_n: 256,
        dt: 0.005,
        sample_interval: 1.0,
    }
}

/// Loads, rotates and returns the `⟨L_z⟩` trace.
///
/// # Safety
/// `params` must be a live handle, `spec` and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn rl_experiment_run(
    params: *const RlParams,
    spec: *const RlExperimentSpec,
    out: *mut *mut RlTrace,
) -> RlStatus {
    guard(|| {
        non_null(params, "params")?;
        non_null(spec, "spec")?;
        non_null(out, "out")?;
        let s = &*spec;
        let drive = match s.drive {
            RlDriveKind::Ramp => Drive::Ramp { s: s.rate },
            RlDriveKind::Chirp => Drive::Chirp { b: s.rate },
        };
        let mut cfg = ExperimentConfig::new((*params).0, drive, s.rotation_time);
        cfg.grid_n = s.grid_n;
        cfg.dt = s.dt;
        cfg.sample_interval = s.sample_interval;
        cfg.load_time = s.load_time;
        cfg.loading = if s.load_time > 0.0 { LoadingMode::Ramp } else { LoadingMode::GroundState };
        cfg.external_acceleration = (s.omega_dot != 0.0).then_some(s.omega_dot);
        let trace = check(run_experiment(&cfg))?;
        *out = Box::into_raw(Box::new(RlTrace(trace)));
        Ok(())
    })
}

/// Wraps uniformly spaced `⟨L_z⟩` samples.
///
/// # Safety
/// `times` and `values` must hold `len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rl_trace_from_samples(
    times: *const f64,
    values: *const f64,
    len: usize,
    out: *mut *mut RlTrace,
) -> RlStatus {
    guard(|| {
        non_null(times, "times")?;
        non_null(values, "values")?;
        non_null(out, "out")?;
        let t = std::slice::from_raw_parts(times, len).to_vec();
        let v = std::slice::from_raw_parts(values, len).to_vec();
        let trace = check(ObservableTrace::new(t, v, TraceKind::AngularMomentum))?;
        *out = Box::into_raw(Box::new(RlTrace(trace)));
        Ok(())
    })
}

/// # Safety
/// `trace` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rl_trace_free(trace: *mut RlTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `trace` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rl_trace_len(trace: *const RlTrace) -> usize {
    if trace.is_null() {
        0
    } else {
        (*trace).0.len()
    }
}

unsafe fn copy_out(src: &[f64], out: *mut f64, len: usize) -> Result<(), RlStatus> {
    non_null(out, "out")?;
    if len < src.len() {
        set_error(format!("buffer holds {len} values, {} needed", src.len()));
        return Err(RlStatus::BufferTooSmall);
    }
    std::slice::from_raw_parts_mut(out, src.len()).copy_from_slice(src);
    Ok(())
}

/// # Safety
/// `trace` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rl_trace_times(trace: *const RlTrace, out: *mut f64, len: usize) -> RlStatus {
    guard(|| {
        non_null(trace, "trace")?;
        copy_out(&(*trace).0.times, out, len)
    })
}

/// # Safety
/// `trace` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rl_trace_values(trace: *const RlTrace, out: *mut f64, len: usize) -> RlStatus {
    guard(|| {
        non_null(trace, "trace")?;
        copy_out(&(*trace).0.values, out, len)
    })
}

/// Time derivative of an `⟨L_z⟩` trace as a new handle.
///
/// # Safety
/// `trace` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn rl_trace_derivative(trace: *const RlTrace, out: *mut *mut RlTrace) -> RlStatus {
    guard(|| {
        non_null(trace, "trace")?;
        non_null(out, "out")?;
        let d = check(trace_derivative(&(*trace).0))?;
        *out = Box::into_raw(Box::new(RlTrace(d)));
        Ok(())
    })
}

/// Bloch period, peak height and width from a derivative trace. A
/// non-positive `threshold_factor` selects the default.
///
/// # Safety
/// `deriv` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn rl_detect_signature(
    deriv: *const RlTrace,
    threshold_factor: f64,
    out: *mut RlSignature,
) -> RlStatus {
    guard(|| {
        non_null(deriv, "deriv")?;
        non_null(out, "out")?;
        let factor = if threshold_factor > 0.0 { threshold_factor } else { ringlattice::analysis::DEFAULT_PEAK_THRESHOLD };
        let sig = check(detect_bloch_signature_with(&(*deriv).0, factor))?;
        *out = RlSignature {
            t_b: sig.t_b,
            peak_amplitude: sig.peak_amplitude,
            fwhm: sig.fwhm,
            n_peaks: sig.peak_times.len(),
        };
        Ok(())
    })
}

/// Moment of inertia and lattice depth from a chirp run.
///
/// # Safety
/// `inertia` and `depth` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rl_calibrate(
    t_b: f64,
    peak_amplitude: f64,
    chirp_rate: f64,
    l: u32,
    hbar: f64,
    inertia: *mut f64,
    depth: *mut f64,
) -> RlStatus {
    guard(|| {
        non_null(inertia, "inertia")?;
        non_null(depth, "depth")?;
        let r = check(calibrate_iv(t_b, peak_amplitude, chirp_rate, l, hbar))?;
        *inertia = r.inertia;
        *depth = r.depth;
        Ok(())
    })
}

/// External angular acceleration from two chirp runs.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rl_sense(chirp_1: f64, t_b_1: f64, chirp_2: f64, t_b_2: f64, l: u32, out: *mut f64) -> RlStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = check(infer_angular_acceleration(chirp_1, t_b_1, chirp_2, t_b_2, l))?.omega_dot;
        Ok(())
    })
}

/// Ground-state fidelity after a linear depth ramp of duration `load_time`.
///
/// # Safety
/// `params` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn rl_loading_fidelity(
    params: *const RlParams,
    load_time: f64,
    grid_n: usize,
    dt: f64,
    out: *mut f64,
) -> RlStatus {
    guard(|| {
        non_null(params, "params")?;
        non_null(out, "out")?;
        *out = check(loading_fidelity(&(*params).0, load_time, grid_n, dt))?;
        Ok(())
    })
}
