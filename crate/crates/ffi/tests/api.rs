use std::ffi::CStr;
use std::ptr;

use ringlattice_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let n = unsafe { rl_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn params(v: f64) -> *mut RlParams {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { rl_params_new(2.0, v, 2, &mut p) }, RlStatus::Ok);
    p
}

#[test]
fn params_and_bands() {
    let p = params(0.1);
    let mut er = 0.0;
    assert_eq!(unsafe { rl_params_recoil_energy(p, &mut er) }, RlStatus::Ok);
    assert!((er - 1.0).abs() < 1e-15);
    let mut e = [0.0; 3];
    assert_eq!(unsafe { rl_band_energies(p, 2.0, 3, e.as_mut_ptr()) }, RlStatus::Ok);
    assert!(((e[1] - e[0]) / 0.05 - 1.0).abs() < 0.01);
    unsafe { rl_params_free(p) };
}

#[test]
fn errors_are_reported() {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { rl_params_new(2.0, 1.0, 0, &mut p) }, RlStatus::InvalidParameter);
    assert!(p.is_null());
    assert!(last_error().contains("azimuthal_l"));
    assert_eq!(unsafe { rl_params_new(2.0, 1.0, 2, ptr::null_mut()) }, RlStatus::NullPointer);
    let mut w = 0.0;
    assert_eq!(unsafe { rl_sense(0.006, 100.0, 0.010, 100.0, 2, &mut w) }, RlStatus::DegenerateInput);
    rl_clear_error();
    assert_eq!(unsafe { rl_last_error_message(ptr::null_mut(), 0) }, 0);
    unsafe {
        rl_params_free(ptr::null_mut());
        rl_trace_free(ptr::null_mut());
    }
    assert_eq!(unsafe { rl_trace_len(ptr::null()) }, 0);
}

#[test]
fn lz_at_critical_rate() {
    let p = params(0.5);
    let mut r = RlLzReport::default();
    let s_c = std::f64::consts::PI / 64.0;
    assert_eq!(unsafe { rl_lz_analytics(p, s_c, &mut r) }, RlStatus::Ok);
    assert!((r.t_lz - (-1f64).exp()).abs() < 1e-12);
    assert!((r.s_c - s_c).abs() < 1e-15);
    unsafe { rl_params_free(p) };
}

#[test]
fn experiment_pipeline() {
    let p = params(0.5);
    let mut spec = rl_experiment_spec_default(RlDriveKind::Ramp, 0.004, 3000.0);
    spec.grid_n = 64;
    spec.dt = 0.01;
    let mut tr = ptr::null_mut();
    assert_eq!(unsafe { rl_experiment_run(p, &spec, &mut tr) }, RlStatus::Ok);
    let n = unsafe { rl_trace_len(tr) };
    assert_eq!(n, 3001);
    let mut short = vec![0.0; n - 1];
    assert_eq!(unsafe { rl_trace_values(tr, short.as_mut_ptr(), short.len()) }, RlStatus::BufferTooSmall);
    let mut v = vec![0.0; n];
    let mut t = vec![0.0; n];
    assert_eq!(unsafe { rl_trace_values(tr, v.as_mut_ptr(), n) }, RlStatus::Ok);
    assert_eq!(unsafe { rl_trace_times(tr, t.as_mut_ptr(), n) }, RlStatus::Ok);
    assert!((v[1000] + 4.0).abs() < 0.05);

    let mut copy = ptr::null_mut();
    assert_eq!(unsafe { rl_trace_from_samples(t.as_ptr(), v.as_ptr(), n, &mut copy) }, RlStatus::Ok);
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { rl_trace_derivative(copy, &mut d) }, RlStatus::Ok);
    let mut sig = RlSignature::default();
    assert_eq!(unsafe { rl_detect_signature(d, 0.0, &mut sig) }, RlStatus::Ok);
    assert!((sig.t_b / 1000.0 - 1.0).abs() < 0.01, "{sig:?}");
    assert!(sig.n_peaks >= 2);

    let b = 0.004 * 4.0 / 2.0;
    let (mut i, mut vd) = (0.0, 0.0);
    assert_eq!(unsafe { rl_calibrate(sig.t_b, sig.peak_amplitude, b, 2, 1.0, &mut i, &mut vd) }, RlStatus::Ok);
    assert!((i / 2.0 - 1.0).abs() < 0.01);
    unsafe {
        rl_trace_free(d);
        rl_trace_free(copy);
        rl_trace_free(tr);
        rl_params_free(p);
    }
}

#[test]
fn short_trace_fails_detection() {
    let t: Vec<f64> = (0..20).map(f64::from).collect();
    let v = [0.0; 20];
    let mut tr = ptr::null_mut();
    assert_eq!(unsafe { rl_trace_from_samples(t.as_ptr(), v.as_ptr(), 20, &mut tr) }, RlStatus::Ok);
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { rl_trace_derivative(tr, &mut d) }, RlStatus::Ok);
    let mut sig = RlSignature::default();
    assert_eq!(unsafe { rl_detect_signature(d, 0.0, &mut sig) }, RlStatus::Detection);
    unsafe {
        rl_trace_free(d);
        rl_trace_free(tr);
    }
}

#[test]
fn loading_and_version() {
    let p = params(5.0);
    let mut f = 0.0;
    assert_eq!(unsafe { rl_loading_fidelity(p, 1.2, 64, 0.001, &mut f) }, RlStatus::Ok);
    assert!(f >= 0.99);
    assert_eq!(unsafe { rl_loading_fidelity(p, -1.0, 64, 0.001, &mut f) }, RlStatus::InvalidParameter);
    unsafe { rl_params_free(p) };
    let v = unsafe { CStr::from_ptr(rl_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
