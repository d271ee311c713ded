use std::f64::consts::PI;

use approx::assert_relative_eq;
use proptest::prelude::*;
use ringlattice::analysis::{
    cumulative_integral, detect_bloch_signature, trace_derivative, ObservableTrace, TraceKind,
};
use ringlattice::Error;

fn trace(dt: f64, n: usize, f: impl Fn(f64) -> f64) -> ObservableTrace {
    let t: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
    let v = t.iter().map(|&x| f(x)).collect();
    ObservableTrace::new(t, v, TraceKind::AngularMomentum).unwrap()
}

/// Lorentzian pulses of height `a` and FWHM `w` every `period`, first at `period/2`.
fn pulses(period: f64, a: f64, w: f64) -> impl Fn(f64) -> f64 {
    move |t| {
        (0..20)
            .map(|k| {
                let c = period * (k as f64 + 0.5);
                a / (1.0 + (2.0 * (t - c) / w).powi(2))
            })
            .sum()
    }
}

#[test]
fn derivative_exact_on_cubics() {
    let tr = trace(0.5, 40, |t| 1.0 - 2.0 * t + 0.3 * t * t - 0.01 * t * t * t);
    let d = trace_derivative(&tr).unwrap();
    for (t, v) in d.times.iter().zip(&d.values) {
        assert_relative_eq!(*v, -2.0 + 0.6 * t - 0.03 * t * t, epsilon = 1e-10);
    }
    assert_eq!(d.kind, TraceKind::Derivative);
    assert!(trace_derivative(&trace(1.0, 4, |t| t)).is_err());
}

#[test]
fn detects_synthetic_pulse_train() {
    let d = trace(1.0, 2001, pulses(400.0, -0.2, 20.0));
    let d = ObservableTrace::new(d.times, d.values, TraceKind::Derivative).unwrap();
    let sig = detect_bloch_signature(&d).unwrap();
    assert_relative_eq!(sig.t_b, 400.0, max_relative = 1e-3);
    assert_relative_eq!(sig.peak_amplitude, 0.2, max_relative = 1e-2);
    assert_relative_eq!(sig.fwhm, 20.0, max_relative = 2e-2);
    assert_eq!(sig.peak_times.len(), 5);
}

#[test]
fn flat_trace_has_no_signature() {
    let d = trace(1.0, 500, |t| 1e-3 * (2.0 * PI * t / 37.0).sin());
    let d = ObservableTrace::new(d.times, d.values, TraceKind::Derivative).unwrap();
    assert!(matches!(detect_bloch_signature(&d), Err(Error::Detection(_))));
}

#[test]
fn csv_round_trip() {
    let tr = trace(0.25, 50, |t| (t * 0.3).sin() / 7.0);
    let mut buf = Vec::new();
    tr.write_csv(&mut buf).unwrap();
    let back = ObservableTrace::read_csv(std::io::Cursor::new(buf)).unwrap();
    assert_eq!(back.times, tr.times);
    assert_eq!(back.values, tr.values);
    assert!(matches!(
        ObservableTrace::read_csv(std::io::Cursor::new("t,Lz_hbar\n0,1\n1,x\n")),
        Err(Error::Parse { line: 3, .. })
    ));
    assert!(ObservableTrace::new(vec![0.0, 1.0, 3.0], vec![0.0; 3], TraceKind::AngularMomentum).is_err());
}

proptest! {
    #[test]
    fn integral_undoes_derivative(a in -1.0f64..1.0, b in -0.1f64..0.1, w in 0.05f64..0.5) {
        let f = move |t: f64| a + b * t + (w * t).sin();
        let tr = trace(0.05, 400, f);
        let back = cumulative_integral(&trace_derivative(&tr).unwrap(), f(0.0)).unwrap();
        for (x, y) in back.values.iter().zip(&tr.values) {
            prop_assert!((x - y).abs() < 1e-5);
        }
    }

    #[test]
    fn detection_invariant_under_offset_and_period(period in 200.0f64..800.0, c in -1e-3f64..1e-3) {
        let f = pulses(period, -0.1, period / 25.0);
        let d = trace(1.0, (period * 5.0) as usize, move |t| f(t) + c);
        let d = ObservableTrace::new(d.times, d.values, TraceKind::Derivative).unwrap();
        let sig = detect_bloch_signature(&d).unwrap();
        prop_assert!((sig.t_b / period - 1.0).abs() < 2e-3);
    }
}
