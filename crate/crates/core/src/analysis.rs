//! Observables extracted from states and traces: mean angular momentum,
//! adiabatic predictions, trace derivatives, the Bloch signature of a
//! derivative trace, and dynamical/geometric phases.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::bands::{fix_sign, group_velocity, solve_unchecked, DEFAULT_K_MAX};
use crate::error::{Error, Result};
use crate::model::{eta_of_t, DriveSchedule, RingLatticeParams};
use crate::quadrature::integrate_with_breaks;
use crate::wavefunction::WaveFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    /// `⟨L_z⟩` in units of ħ.
    AngularMomentum,
    /// `d⟨L_z⟩/dt` in units of ħω_r.
    Derivative,
}

impl TraceKind {
    pub fn column(&self) -> &'static str {
        match self {
            TraceKind::AngularMomentum => "Lz_hbar",
            TraceKind::Derivative => "dLz_dt",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceMetadata {
    pub fingerprint: String,
    pub ramp_rate: Option<f64>,
    pub chirp_rate: Option<f64>,
    pub params: Option<RingLatticeParams>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableTrace {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: TraceKind,
    /// Always the lab frame; `⟨L_z⟩` is the same in both frames.
    pub frame: String,
    pub dt: f64,
    pub metadata: TraceMetadata,
}

impl ObservableTrace {
    pub fn new(times: Vec<f64>, values: Vec<f64>, kind: TraceKind) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "trace has {} times but {} values",
                times.len(),
                values.len()
            )));
        }
        let dt = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
        if times.len() > 1 {
            if !(dt > 0.0) {
                return Err(Error::InvalidInput("trace times must be strictly increasing".into()));
            }
            let tol = 1e-9 * dt.max(times.last().unwrap().abs() * 1e-6);
            for (i, t) in times.iter().enumerate() {
                if (t - (times[0] + i as f64 * dt)).abs() > tol.max(1e-9 * dt) * (1.0 + i as f64) {
                    return Err(Error::InvalidInput(format!("trace samples not uniform at index {i}")));
                }
            }
        }
        Ok(Self {
            times,
            values,
            kind,
            frame: "lab".into(),
            dt,
            metadata: TraceMetadata::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn with_metadata(mut self, metadata: TraceMetadata) -> Self {
        self.metadata = metadata;
        self
    }

    /// Value nearest to time `t`.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        if self.is_empty() {
            return None;
        }
        let i = ((t - self.times[0]) / self.dt.max(f64::MIN_POSITIVE)).round();
        if i < 0.0 || i as usize >= self.len() {
            return None;
        }
        Some(self.values[i as usize])
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "t,{}", self.kind.column())?;
        for (t, v) in self.times.iter().zip(&self.values) {
            writeln!(out, "{t:.16e},{v:.16e}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse { line: 1, column: 1, message: "empty trace file".into() })??;
        let kind = match header.trim() {
            "t,Lz_hbar" => TraceKind::AngularMomentum,
            "t,dLz_dt" => TraceKind::Derivative,
            other => {
                return Err(Error::Parse {
                    line: 1,
                    column: 1,
                    message: format!("unexpected trace header '{other}'"),
                })
            }
        };
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let mut field = |col: usize| -> Result<f64> {
                let s = parts.next().ok_or_else(|| Error::Parse {
                    line: i + 2,
                    column: col,
                    message: "missing field".into(),
                })?;
                s.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: i + 2,
                    column: col,
                    message: format!("bad number '{s}': {e}"),
                })
            };
            times.push(field(1)?);
            values.push(field(2)?);
        }
        Self::new(times, values, kind)
    }
}

/// `Σ_m mħ|c_m|²` of a grid state.
pub fn mean_angular_momentum(state: &WaveFunction, hbar: f64) -> f64 {
    crate::propagator::lz_of_momentum(&state.momentum(), hbar)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionMode {
    NumericBand,
    ShallowClosedForm,
}

/// Adiabatic `⟨L_z⟩` of the ground band at offset `η`, in units of ħ.
pub fn adiabatic_prediction(params: &RingLatticeParams, eta: f64, mode: PredictionMode) -> Result<f64> {
    let h = params.hbar();
    match mode {
        PredictionMode::NumericBand => {
            let slope = group_velocity(params, 0, eta)?;
            Ok((-h * eta + params.inertia / h * slope) / h)
        }
        PredictionMode::ShallowClosedForm => Ok(shallow_lz(params, eta)),
    }
}

fn shallow_width(params: &RingLatticeParams) -> f64 {
    params.depth * params.lf() / (8.0 * params.recoil_energy)
}

/// `-l[1 + (η - l)/√((η - l)² + w²)]` with `w = Vl/(8E_r)`, in units of ħ.
pub fn shallow_lz(params: &RingLatticeParams, eta: f64) -> f64 {
    let l = params.lf();
    let w = shallow_width(params);
    let x = eta - l;
    let r = x.hypot(w);
    if r == 0.0 {
        return -l;
    }
    -l * (1.0 + x / r)
}

/// `d⟨L_z⟩/dt = -l·s·w²/((η - l)² + w²)^{3/2}` for `η = s·t`, in ħω_r.
pub fn shallow_lz_rate(params: &RingLatticeParams, eta: f64, s: f64) -> f64 {
    let l = params.lf();
    let w = shallow_width(params);
    let x = eta - l;
    -l * s * w * w / (x * x + w * w).powf(1.5)
}

/// Closed-form `⟨L_z⟩(t)` for `η = s·t`, folded into the first zone.
pub fn shallow_lz_trace(params: &RingLatticeParams, s: f64, t: f64) -> f64 {
    let two_l = 2.0 * params.lf();
    let eta = s * t;
    let zones = (eta / two_l).floor();
    shallow_lz(params, eta - zones * two_l) - two_l * zones
}

/// Closed-form derivative trace for `η = s·t`, periodic in the Bloch time.
pub fn shallow_lz_rate_trace(params: &RingLatticeParams, s: f64, t: f64) -> f64 {
    let two_l = 2.0 * params.lf();
    let eta = s * t;
    shallow_lz_rate(params, eta - (eta / two_l).floor() * two_l, s)
}

/// Five-point differences: central inside, one-sided at the two ends on
/// each side. Exact for quartic traces.
pub fn trace_derivative(trace: &ObservableTrace) -> Result<ObservableTrace> {
    let n = trace.len();
    if n < 5 {
        return Err(Error::InvalidInput(format!("derivative needs at least 5 samples, got {n}")));
    }
    let f = &trace.values;
    let h12 = 12.0 * trace.dt;
    let mut d = vec![0.0; n];
    d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / h12;
    d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / h12;
    for i in 2..n - 2 {
        d[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / h12;
    }
    d[n - 2] = (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]) / h12;
    d[n - 1] = (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4] + 3.0 * f[n - 5]) / h12;
    let mut out = ObservableTrace::new(trace.times.clone(), d, TraceKind::Derivative)?;
    out.metadata = trace.metadata.clone();
    Ok(out)
}

/// Running integral `∫_{t_0}^{t_i}` of a trace, starting from `initial`.
/// Interior intervals use the four-point cubic rule, the two end intervals
/// a one-sided cubic.
pub fn cumulative_integral(trace: &ObservableTrace, initial: f64) -> Result<ObservableTrace> {
    let n = trace.len();
    if n < 4 {
        return Err(Error::InvalidInput(format!("integration needs at least 4 samples, got {n}")));
    }
    let f = &trace.values;
    let h = trace.dt;
    let mut out = vec![initial; n];
    for i in 0..n - 1 {
        let piece = if i == 0 {
            h / 24.0 * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3])
        } else if i == n - 2 {
            h / 24.0 * (9.0 * f[n - 1] + 19.0 * f[n - 2] - 5.0 * f[n - 3] + f[n - 4])
        } else {
            h / 24.0 * (-f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2])
        };
        out[i + 1] = out[i] + piece;
    }
    let kind = match trace.kind {
        TraceKind::Derivative => TraceKind::AngularMomentum,
        k => k,
    };
    let mut t = ObservableTrace::new(trace.times.clone(), out, kind)?;
    t.metadata = trace.metadata.clone();
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlochSignature {
    pub t_b: f64,
    /// Mean `|d⟨L_z⟩/dt|` at the peaks, ħω_r.
    pub peak_amplitude: f64,
    pub fwhm: f64,
    pub peak_times: Vec<f64>,
    pub peak_values: Vec<f64>,
    pub widths: Vec<f64>,
    pub threshold: f64,
}

/// Default peak threshold in units of the median `|d⟨L_z⟩/dt|`.
pub const DEFAULT_PEAK_THRESHOLD: f64 = 5.0;

/// Peaks of a derivative trace: extrema beyond 5× the median absolute level,
/// refined by a three-point parabola, with widths at half maximum.
pub fn detect_bloch_signature(deriv: &ObservableTrace) -> Result<BlochSignature> {
    detect_bloch_signature_with(deriv, DEFAULT_PEAK_THRESHOLD)
}

/// As [`detect_bloch_signature`] with the threshold factor given explicitly.
/// A candidate only counts if it is the largest sample inside its own
/// half-maximum window and at least half as tall as the tallest candidate.
pub fn detect_bloch_signature_with(deriv: &ObservableTrace, threshold_factor: f64) -> Result<BlochSignature> {
    if !(threshold_factor > 0.0) {
        return Err(Error::InvalidParameter("peak threshold factor must be positive".into()));
    }
    let n = deriv.len();
    if n < 5 {
        return Err(Error::InvalidInput("derivative trace too short for peak detection".into()));
    }
    let d = &deriv.values;
    let mut abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 { abs[n / 2] } else { 0.5 * (abs[n / 2 - 1] + abs[n / 2]) };
    let threshold = threshold_factor * median;
    // Spikes point the way of the largest excursion (negative for s > 0).
    let extreme = d.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
    let sign = if extreme < 0.0 { -1.0 } else { 1.0 };
    let y: Vec<f64> = d.iter().map(|x| sign * x).collect();

    let mut peaks: Vec<(f64, f64, f64)> = Vec::new();
    let mut i = 0;
    while i < n {
        if y[i] > threshold && y[i] > 0.0 {
            let start = i;
            while i < n && y[i] > threshold {
                i += 1;
            }
            let end = i; // exclusive
            if start == 0 || end == n {
                continue;
            }
            let top = (start..end).max_by(|&a, &b| y[a].total_cmp(&y[b])).unwrap();
            if top == 0 || top == n - 1 {
                continue;
            }
            let (ym, y0, yp) = (y[top - 1], y[top], y[top + 1]);
            let curv = ym - 2.0 * y0 + yp;
            let delta = if curv != 0.0 { (0.5 * (ym - yp) / curv).clamp(-0.5, 0.5) } else { 0.0 };
            let peak_t = deriv.times[top] + delta * deriv.dt;
            let peak_v = y0 - 0.25 * (ym - yp) * delta;
            let half = 0.5 * peak_v;
            let left = (0..top).rev().find(|&j| y[j] <= half);
            let right = (top + 1..n).find(|&j| y[j] <= half);
            if let (Some(a), Some(b)) = (left, right) {
                if y[a..=b].iter().any(|&v| v > y0) {
                    continue;
                }
                let ta = deriv.times[a] + (half - y[a]) / (y[a + 1] - y[a]) * deriv.dt;
                let tb = deriv.times[b - 1] + (y[b - 1] - half) / (y[b - 1] - y[b]) * deriv.dt;
                peaks.push((peak_t, peak_v, tb - ta));
            }
        } else {
            i += 1;
        }
    }
    // Bloch peaks share one height; ringing on a flank is far lower.
    let tallest = peaks.iter().map(|p| p.1).fold(0.0, f64::max);
    peaks.retain(|p| p.1 >= 0.5 * tallest);
    if peaks.len() < 2 {
        return Err(Error::Detection(format!(
            "found {} complete peak(s) above {threshold_factor}× median |d⟨L_z⟩/dt| = {threshold:e}; \
             at least 2 are needed (try a longer rotation time)",
            peaks.len()
        )));
    }
    let k = peaks.len();
    let t_b = (peaks[k - 1].0 - peaks[0].0) / (k - 1) as f64;
    let mean = |f: &dyn Fn(&(f64, f64, f64)) -> f64| peaks.iter().map(f).sum::<f64>() / k as f64;
    Ok(BlochSignature {
        t_b,
        peak_amplitude: mean(&|p| p.1),
        fwhm: mean(&|p| p.2),
        peak_times: peaks.iter().map(|p| p.0).collect(),
        peak_values: peaks.iter().map(|p| sign * p.1).collect(),
        widths: peaks.iter().map(|p| p.2).collect(),
        threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phases {
    pub dynamical: f64,
    pub geometric: f64,
}

/// Dynamical phase `-(1/ħ)∫E^Θ_{0,0}dt` and the discrete geometric phase of
/// the ground band along `η(t)` over `t_span`.
///
/// Eigenvectors are taken in the reference gauge (largest plane-wave
/// coefficient positive), so the geometric phase is
/// `Σ_k arg⟨u_k|u_{k+1}⟩` relative to that gauge at both ends.
/// `steps` sets the `η` discretisation of the overlap product.
pub fn phases(params: &RingLatticeParams, schedule: &DriveSchedule, t_span: (f64, f64), steps: usize) -> Result<Phases> {
    let (t0, t1) = t_span;
    if !(t1 >= t0) {
        return Err(Error::InvalidParameter("phase span must be non-decreasing".into()));
    }
    let hbar = params.hbar();
    let k_max = DEFAULT_K_MAX;
    let energy = |t: f64| -> f64 {
        let eta = eta_of_t(schedule, params, t);
        let p = match params.with_depth(schedule.depth.eval(t)) {
            Ok(p) => p,
            Err(_) => return f64::NAN,
        };
        match solve_unchecked(&p, eta, 1, k_max) {
            Ok(s) => s.energies[0] - hbar * hbar * eta * eta / (2.0 * params.inertia),
            Err(_) => f64::NAN,
        }
    };
    let dynamical = if t1 > t0 {
        let mut pts = vec![t0];
        for prog in [&schedule.depth, &schedule.rotation, &schedule.chirp] {
            pts.extend(prog.breakpoints(t0, t1));
        }
        // Split so the band's zone-edge features are resolved.
        let pieces = 64;
        pts.extend((1..pieces).map(|i| t0 + (t1 - t0) * i as f64 / pieces as f64));
        pts.push(t1);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        -integrate_with_breaks(energy, &pts, 1e-9, 1e-11)?.value / hbar
    } else {
        0.0
    };

    let steps = steps.max(1);
    let vec_at = |t: f64| -> Result<Vec<f64>> {
        let eta = eta_of_t(schedule, params, t);
        let p = params.with_depth(schedule.depth.eval(t))?;
        let mut v = solve_unchecked(&p, eta, 1, k_max)?.coefficients.swap_remove(0);
        fix_sign(&mut v);
        Ok(v)
    };
    let mut geometric = 0.0;
    if t1 > t0 {
        let mut prev = vec_at(t0)?;
        for i in 1..=steps {
            let t = t0 + (t1 - t0) * i as f64 / steps as f64;
            let cur = vec_at(t)?;
            let overlap: f64 = prev.iter().zip(&cur).map(|(a, b)| a * b).sum();
            if overlap.abs() < 0.5 {
                return Err(Error::Numerical(format!(
                    "ground-band overlap {overlap:.3} between successive points near t = {t}; increase steps"
                )));
            }
            if overlap < 0.0 {
                geometric += std::f64::consts::PI;
            }
            prev = cur;
        }
    }
    Ok(Phases {
        dynamical,
        geometric: wrap_angle(geometric),
    })
}

/// Maps an angle to `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut x = a.rem_euclid(2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    fn p(v: f64) -> RingLatticeParams {
        RingLatticeParams::dimensionless(v, 2).unwrap()
    }

    fn trace_of<F: Fn(f64) -> f64>(f: F, n: usize, dt: f64) -> ObservableTrace {
        let t: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let v = t.iter().map(|&x| f(x)).collect();
        ObservableTrace::new(t, v, TraceKind::AngularMomentum).unwrap()
    }

    #[test]
    fn angular_momentum_of_simple_states() {
        let n = 32;
        assert!((mean_angular_momentum(&WaveFunction::plane_wave(n, 3).unwrap(), 1.0) - 3.0).abs() < 1e-13);
        assert!(mean_angular_momentum(&WaveFunction::uniform(n).unwrap(), 1.0).abs() < 1e-13);
        let s = (0.5f64).sqrt();
        let w = WaveFunction::from_momentum(n, &[(0, Complex64::new(s, 0.0)), (1, Complex64::new(s, 0.0))]).unwrap();
        assert!((mean_angular_momentum(&w, 1.0) - 0.5).abs() < 1e-13);
    }

    #[test]
    fn closed_form_predictions() {
        assert_relative_eq!(adiabatic_prediction(&p(0.5), 2.0, PredictionMode::ShallowClosedForm).unwrap(), -2.0);
        let z = adiabatic_prediction(&p(0.5), 0.0, PredictionMode::ShallowClosedForm).unwrap();
        assert!((z + 0.0039).abs() < 1e-4, "{z}");
        // Free particle: ⟨L_z⟩ = -η + 2·(η/2) = 0 inside the first zone.
        assert!(adiabatic_prediction(&p(0.0), 0.7, PredictionMode::NumericBand).unwrap().abs() < 1e-9);
    }

    #[test]
    fn derivative_stencils() {
        let lin = trace_of(|t| -0.01 * t, 50, 0.5);
        let d = trace_derivative(&lin).unwrap();
        assert!(d.values.iter().all(|x| (x + 0.01).abs() < 1e-14));
        let quad = trace_of(|t| 3.0 * t * t - t + 2.0, 40, 0.25);
        let d = trace_derivative(&quad).unwrap();
        for (t, x) in d.times.iter().zip(&d.values) {
            assert!((x - (6.0 * t - 1.0)).abs() < 1e-11);
        }
        assert!(trace_derivative(&trace_of(|t| t, 4, 1.0)).is_err());
    }

    #[test]
    fn derivative_peak_height_from_closed_form() {
        let params = p(0.5);
        let s = 0.002;
        let tr = trace_of(|t| shallow_lz_trace(&params, s, t), 4001, 1.0);
        let d = trace_derivative(&tr).unwrap();
        let at_half = d.value_at(1000.0).unwrap();
        let b = 0.004;
        assert_relative_eq!(at_half, -2.0 * 2.0 * b / 0.5, max_relative = 1e-3);
    }

    #[test]
    fn signature_of_injected_peaks() {
        let spacing = 137.0;
        let tr = trace_of(
            |t| {
                let a = (-(t - 100.0).powi(2) / 20.0).exp();
                let b = (-(t - 100.0 - spacing).powi(2) / 20.0).exp();
                -(a + b) - 1e-3
            },
            500,
            1.0,
        );
        let d = ObservableTrace::new(tr.times.clone(), tr.values.clone(), TraceKind::Derivative).unwrap();
        let sig = detect_bloch_signature(&d).unwrap();
        assert!((sig.t_b - spacing).abs() < 1e-9);
        assert!(matches!(
            detect_bloch_signature(&trace_of(|t| -(-(t - 50.0).powi(2)).exp() - 1e-3, 100, 1.0)),
            Err(Error::Detection(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let tr = trace_of(|t| (t * 0.3).sin() / 3.0, 20, 0.1);
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let back = ObservableTrace::read_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back.values, tr.values);
        assert_eq!(back.times, tr.times);
        let bad = ObservableTrace::read_csv(std::io::Cursor::new(b"t,Lz_hbar\n0.0,abc\n".to_vec()));
        assert!(matches!(bad, Err(Error::Parse { line: 2, column: 2, .. })));
    }

    #[test]
    fn stationary_phases() {
        let params = p(1.0);
        let sched = DriveSchedule::stationary(1.0);
        let ph = phases(&params, &sched, (0.0, 10.0), 50).unwrap();
        let e = solve_unchecked(&params, 0.0, 1, 32).unwrap().energies[0];
        assert!((ph.dynamical + e * 10.0).abs() < 1e-9);
        assert_eq!(ph.geometric, 0.0);
    }

    #[test]
    fn wrap() {
        use std::f64::consts::PI;
        assert_relative_eq!(wrap_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_relative_eq!(wrap_angle(-0.5), -0.5);
    }

    proptest::proptest! {
        #[test]
        fn derivative_then_integral_recovers_trace(a in -1.0f64..1.0, w in 0.01f64..0.2, c in -3.0f64..3.0) {
            let tr = trace_of(|t| a * (w * t).sin() + c, 400, 0.1);
            let d = trace_derivative(&tr).unwrap();
            let back = cumulative_integral(&d, tr.values[0]).unwrap();
            for (x, y) in back.values.iter().zip(&tr.values) {
                proptest::prop_assert!((x - y).abs() < 1e-6);
            }
        }

        #[test]
        fn signature_invariant_under_offset(offset in -10.0f64..10.0) {
            let params = p(0.5);
            let tr = trace_of(|t| shallow_lz_trace(&params, 0.002, t), 4001, 1.0);
            let shifted = trace_of(|t| shallow_lz_trace(&params, 0.002, t) + offset, 4001, 1.0);
            let a = detect_bloch_signature(&trace_derivative(&tr).unwrap()).unwrap();
            let b = detect_bloch_signature(&trace_derivative(&shifted).unwrap()).unwrap();
            proptest::prop_assert!((a.t_b - b.t_b).abs() < 1e-6);
            proptest::prop_assert!((a.peak_amplitude - b.peak_amplitude).abs() < 1e-9);
        }
    }
}
