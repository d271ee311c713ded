//! Strang-split Fourier propagation on the angular grid.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{lz_of_momentum, Frame};
use crate::error::{Error, Result};
use crate::model::{chirp_phase, DriveSchedule, RingLatticeParams};
use crate::wavefunction::{check_commensurate, grid, grid_point, mode_number, WaveFunction};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub dt: f64,
    /// Record observables every this many steps.
    pub sample_every: usize,
    pub frame: Frame,
    pub store_states: bool,
    /// Split a step when `V` or `η` changes by more than 1% across it.
    pub auto_substep: bool,
    /// Largest accepted `|dt|`, in units of `1/ω_r`.
    pub max_dt: f64,
    pub norm_tolerance: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            dt: 0.005,
            sample_every: 1,
            frame: Frame::Corotating,
            store_states: false,
            auto_substep: true,
            max_dt: 0.01,
            norm_tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub lz: Vec<f64>,
    pub norm: Vec<f64>,
    pub states: Option<Vec<WaveFunction>>,
    pub frame: Frame,
    pub final_time: f64,
    pub final_state: WaveFunction,
    pub max_norm_drift: f64,
    /// Accumulated per-step round-off removed by renormalisation.
    pub roundoff_drift: f64,
    pub steps: usize,
    pub substeps: usize,
}

/// One grid's worth of transforms, phase tables and scratch space.
///
/// The state is held as `x_m = c_m e^{imφ_0}` so that a plain inverse FFT
/// gives `√(2π)ψ_j`.
pub struct SplitStepper {
    n: usize,
    l: u32,
    hbar: f64,
    inertia: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    fft_scratch: Vec<Complex64>,
    modes: Vec<f64>,
    phi: Vec<f64>,
    cos2: Vec<f64>,
    kin_h: f64,
    kin_free: Vec<Complex64>,
    powers: Vec<Complex64>,
    pot_key: Option<(f64, f64, f64)>,
    pot: Vec<Complex64>,
}

impl SplitStepper {
    pub fn new(params: &RingLatticeParams, n: usize) -> Result<Self> {
        check_commensurate(n, params.l)?;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        let phi = grid(n);
        let l = f64::from(params.l);
        Ok(Self {
            n,
            l: params.l,
            hbar: params.hbar(),
            inertia: params.inertia,
            forward,
            inverse,
            fft_scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            modes: (0..n).map(|j| mode_number(j, n) as f64).collect(),
            cos2: phi.iter().map(|p| (l * p).cos().powi(2)).collect(),
            phi,
            kin_h: f64::NAN,
            kin_free: vec![Complex64::new(0.0, 0.0); n],
            powers: vec![Complex64::new(0.0, 0.0); n / 2 + 1],
            pot_key: None,
            pot: vec![Complex64::new(0.0, 0.0); n],
        })
    }

    pub fn to_internal(&self, state: &WaveFunction) -> Vec<Complex64> {
        let phi0 = grid_point(0, self.n);
        let mut c = state.momentum();
        for (j, cj) in c.iter_mut().enumerate() {
            *cj *= Complex64::from_polar(1.0, self.modes[j] * phi0);
        }
        c
    }

    pub fn from_internal(&self, x: &[Complex64]) -> WaveFunction {
        WaveFunction::from_momentum_slots(&self.momentum(x)).expect("finite state")
    }

    /// Momentum coefficients `c_m` (FFT slot order) of an internal state.
    pub fn momentum(&self, x: &[Complex64]) -> Vec<Complex64> {
        let phi0 = grid_point(0, self.n);
        x.iter()
            .enumerate()
            .map(|(j, xj)| xj * Complex64::from_polar(1.0, -self.modes[j] * phi0))
            .collect()
    }

    fn prepare_kinetic(&mut self, half: f64) {
        if half != self.kin_h {
            let c = self.hbar / (2.0 * self.inertia);
            for (k, m) in self.kin_free.iter_mut().zip(&self.modes) {
                *k = Complex64::from_polar(1.0, -half * c * m * m);
            }
            self.kin_h = half;
        }
    }

    /// Kinetic half step: `exp[-i h (ħm²/2I - mΩ)]` per mode, times `scale`.
    #[allow(clippy::needless_range_loop)]
    fn kinetic(&mut self, x: &mut [Complex64], half: f64, omega: f64, scale: f64) {
        self.prepare_kinetic(half);
        let theta = half * omega;
        let z = Complex64::from_polar(1.0, theta);
        let mut p = Complex64::new(scale, 0.0);
        for (k, w) in self.powers.iter_mut().enumerate() {
            // Re-anchor the running product so its modulus cannot drift.
            if k % 8 == 0 {
                p = Complex64::from_polar(scale, k as f64 * theta);
            }
            *w = p;
            p *= z;
        }
        for j in 0..self.n {
            let m = self.modes[j];
            let w = if m >= 0.0 {
                self.powers[m as usize]
            } else {
                self.powers[(-m) as usize].conj()
            };
            x[j] *= self.kin_free[j] * w;
        }
    }

    fn potential(&mut self, y: &mut [Complex64], dt: f64, depth: f64, shift: f64) {
        let key = (dt, depth, shift);
        if self.pot_key != Some(key) {
            let l = f64::from(self.l);
            for j in 0..self.n {
                let c2 = if shift == 0.0 {
                    self.cos2[j]
                } else {
                    (l * self.phi[j] - shift).cos().powi(2)
                };
                self.pot[j] = Complex64::from_polar(1.0, -dt * depth * c2 / self.hbar);
            }
            self.pot_key = Some(key);
        }
        for (yj, pj) in y.iter_mut().zip(&self.pot) {
            *yj *= pj;
        }
    }

    /// One Strang step of length `dt` with frozen `V`, `Ω` and lattice shift `a`.
    pub fn step(&mut self, x: &mut [Complex64], dt: f64, depth: f64, omega: f64, shift: f64) {
        let half = 0.5 * dt;
        self.kinetic(x, half, omega, 1.0);
        self.inverse.process_with_scratch(x, &mut self.fft_scratch);
        self.potential(x, dt, depth, shift);
        self.forward.process_with_scratch(x, &mut self.fft_scratch);
        self.kinetic(x, half, omega, 1.0 / self.n as f64);
    }
}

const STEP_NORM_TOL: f64 = 1e-12;

fn norm_sqr(x: &[Complex64]) -> f64 {
    x.iter().map(|c| c.norm_sqr()).sum()
}

/// Co-rotating-frame propagation with default options.
pub fn evolve(
    initial: &WaveFunction,
    params: &RingLatticeParams,
    schedule: &DriveSchedule,
    t_span: (f64, f64),
    dt: f64,
    sample_every: usize,
) -> Result<Trajectory> {
    let opts = EvolveOptions {
        dt,
        sample_every,
        ..EvolveOptions::default()
    };
    evolve_with(initial, params, schedule, t_span, &opts)
}

/// Propagates `initial` over `t_span` (backwards when `t_span.1 < t_span.0`).
///
/// In the co-rotating frame the kinetic term uses `Ω_eff(t)` and the lattice
/// is static; in the lab frame it uses `Ω(t)` and the potential
/// `V cos²(lφ - a(t))`. All time dependence is sampled at step midpoints.
pub fn evolve_with(
    initial: &WaveFunction,
    params: &RingLatticeParams,
    schedule: &DriveSchedule,
    t_span: (f64, f64),
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    let (t0, t1) = t_span;
    if !(t0.is_finite() && t1.is_finite()) {
        return Err(Error::InvalidParameter("time span must be finite".into()));
    }
    if !(opts.dt > 0.0) || opts.dt > opts.max_dt {
        return Err(Error::InvalidParameter(format!(
            "dt = {} must be positive and at most {}",
            opts.dt, opts.max_dt
        )));
    }
    if opts.sample_every == 0 {
        return Err(Error::InvalidParameter("sample_every must be ≥ 1".into()));
    }
    initial.check_commensurate(params.l)?;
    let n0 = initial.norm_sqr();
    if (n0 - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidInput(format!("initial state not normalized: ‖ψ‖² = {n0}")));
    }
    let (lo, hi) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
    schedule.validate(lo, hi)?;

    let span = t1 - t0;
    let steps = ((span.abs() / opts.dt) - 1e-9).ceil().max(0.0) as usize;
    let h = if steps == 0 { 0.0 } else { span / steps as f64 };

    let mut stepper = SplitStepper::new(params, initial.len())?;
    let mut x = stepper.to_internal(initial);
    let hbar = params.hbar();
    let eta_scale = params.inertia / hbar;
    let lab = opts.frame == Frame::Lab;

    let omega_at = |t: f64| -> f64 {
        if lab {
            schedule.rotation.eval(t)
        } else {
            schedule.omega_eff(params, t)
        }
    };
    let shift_at = |t: f64| -> Result<f64> {
        if lab {
            chirp_phase(schedule, t)
        } else {
            Ok(0.0)
        }
    };

    let mut traj = Trajectory {
        times: Vec::new(),
        lz: Vec::new(),
        norm: Vec::new(),
        states: if opts.store_states { Some(Vec::new()) } else { None },
        frame: opts.frame,
        final_time: t1,
        final_state: initial.clone(),
        max_norm_drift: 0.0,
        roundoff_drift: 0.0,
        steps,
        substeps: 0,
    };
    let mut record = |k: usize, t: f64, x: &[Complex64], st: &SplitStepper| -> Result<()> {
        let nrm = norm_sqr(x);
        if !nrm.is_finite() {
            return Err(Error::Numerical(format!("state became non-finite at t = {t}")));
        }
        let drift = (nrm - n0).abs();
        traj.max_norm_drift = traj.max_norm_drift.max(drift);
        if drift > opts.norm_tolerance {
            return Err(Error::Integrator(format!("norm drift {drift:e} at t = {t} exceeds {:e}", opts.norm_tolerance)));
        }
        if k % opts.sample_every == 0 {
            traj.times.push(t);
            traj.norm.push(nrm);
            traj.lz.push(lz_of_momentum(&st.momentum(x), hbar));
            if let Some(s) = traj.states.as_mut() {
                s.push(st.from_internal(x));
            }
        }
        Ok(())
    };

    record(0, t0, &x, &stepper)?;
    for k in 0..steps {
        let ta = t0 + k as f64 * h;
        let tb = if k + 1 == steps { t1 } else { t0 + (k + 1) as f64 * h };
        let sub = if opts.auto_substep {
            substeps_needed(schedule, params, ta, tb, eta_scale)
        } else {
            1
        };
        let hs = (tb - ta) / sub as f64;
        for i in 0..sub {
            let tm = ta + (i as f64 + 0.5) * hs;
            let depth = schedule.depth.eval(tm);
            stepper.step(&mut x, hs, depth, omega_at(tm), shift_at(tm)?);
        }
        if sub > 1 {
            traj.substeps += sub;
        }
        // The splitting is exactly unitary; only FFT round-off moves the norm.
        let nrm = norm_sqr(&x);
        let dev = nrm / n0 - 1.0;
        if !dev.is_finite() {
            return Err(Error::Numerical(format!("state became non-finite at t = {tb}")));
        }
        if dev.abs() > STEP_NORM_TOL {
            return Err(Error::Integrator(format!("norm changed by {dev:e} in one step at t = {tb}")));
        }
        traj.roundoff_drift += dev.abs();
        let fix = (n0 / nrm).sqrt();
        x.iter_mut().for_each(|c| *c *= fix);
        record(k + 1, tb, &x, &stepper)?;
    }
    traj.final_state = stepper.from_internal(&x);
    Ok(traj)
}

fn substeps_needed(schedule: &DriveSchedule, params: &RingLatticeParams, ta: f64, tb: f64, eta_scale: f64) -> usize {
    let (va, vb) = (schedule.depth.eval(ta), schedule.depth.eval(tb));
    let (ea, eb) = (
        eta_scale * schedule.omega_eff(params, ta),
        eta_scale * schedule.omega_eff(params, tb),
    );
    let dv = (vb - va).abs() / (0.5 * (va + vb)).abs().max(params.recoil_energy);
    let de = (eb - ea).abs() / (0.5 * (ea + eb)).abs().max(1.0);
    let worst = dv.max(de);
    let mut sub = 1usize;
    while worst / sub as f64 > 0.01 && sub < 1024 {
        sub *= 2;
    }
    sub
}

/// Line-oriented snapshot dump: one `t φ Re Im` line per grid point.
pub fn write_snapshots<W: Write>(out: &mut W, times: &[f64], states: &[WaveFunction]) -> Result<()> {
    for (t, s) in times.iter().zip(states) {
        let n = s.len();
        for (j, a) in s.amplitudes.iter().enumerate() {
            writeln!(out, "{:.16e} {:.16e} {:.16e} {:.16e}", t, grid_point(j, n), a.re, a.im)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bands::{bloch_state_on_ring, BlochLabel};
    use crate::model::{Program, Segment};
    use crate::propagator::{gauge_map, GaugeDirection};

    fn params(v: f64) -> RingLatticeParams {
        RingLatticeParams::dimensionless(v, 2).unwrap()
    }

    #[test]
    fn free_plane_wave_is_stationary() {
        let p = params(0.0);
        let n = 64;
        let m = 3;
        let w = WaveFunction::plane_wave(n, m).unwrap();
        let t = 7.3;
        let tr = evolve(&w, &p, &DriveSchedule::stationary(0.0), (0.0, t), 0.005, 100).unwrap();
        assert!(tr.lz.iter().all(|lz| (lz - m as f64).abs() < 1e-12));
        let phase = Complex64::from_polar(1.0, -(m * m) as f64 * t / (2.0 * p.inertia));
        let expected = WaveFunction::new(w.amplitudes.iter().map(|a| a * phase).collect()).unwrap();
        assert!(tr.final_state.distance(&expected).unwrap() < 1e-10);
    }

    #[test]
    fn ground_state_is_stationary_and_norm_conserved() {
        let p = params(3.0);
        let g = bloch_state_on_ring(&p, &BlochLabel::new(0, 0, 0.0), 128).unwrap();
        let tr = evolve(&g, &p, &DriveSchedule::stationary(3.0), (0.0, 20.0), 0.005, 50).unwrap();
        let overlap = g.inner(&tr.final_state).unwrap().norm();
        assert!((overlap - 1.0).abs() < 1e-8, "{overlap}");
        assert!(tr.max_norm_drift < 1e-12);
        assert!(tr.lz.iter().all(|x| x.abs() < 1e-10));
    }

    #[test]
    fn time_reversal() {
        let p = params(2.0);
        let sched = DriveSchedule::linear_ramp(&p, 2.0, 0.05);
        let g = bloch_state_on_ring(&p, &BlochLabel::new(0, 0, 0.0), 128).unwrap();
        let fwd = evolve(&g, &p, &sched, (0.0, 30.0), 0.005, 1000).unwrap();
        let back = evolve(&fwd.final_state, &p, &sched, (30.0, 0.0), 0.005, 1000).unwrap();
        assert!(back.final_state.distance(&g).unwrap() < 1e-8);
    }

    #[test]
    fn lab_and_corotating_frames_agree() {
        let p = params(1.5);
        let depth = Program::piecewise(vec![
            (-1.0, Segment::Linear { value: 0.5, slope: 1.0 }),
            (0.0, Segment::Constant { value: 1.5 }),
        ])
        .unwrap();
        let sched = DriveSchedule::new(depth, Program::linear(2e-3), Program::linear(-0.03), 0.0);
        let g = bloch_state_on_ring(&p, &BlochLabel::new(0, 0, 0.0), 128).unwrap();
        let span = (0.0, 12.0);
        let opts = EvolveOptions { dt: 0.002, sample_every: 1000, ..EvolveOptions::default() };
        let co = evolve_with(&g, &p, &sched, span, &opts).unwrap();
        let lab = evolve_with(&g, &p, &sched, span, &EvolveOptions { frame: Frame::Lab, ..opts }).unwrap();
        let a = chirp_phase(&sched, span.1).unwrap();
        let mapped = gauge_map(&co.final_state, a, 2, GaugeDirection::ToLab);
        let d = mapped.distance(&lab.final_state).unwrap();
        assert!(d < 1e-8, "frame mismatch {d}");
        assert!((co.lz.last().unwrap() - lab.lz.last().unwrap()).abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = params(1.0);
        let s = DriveSchedule::stationary(1.0);
        let w = WaveFunction::uniform(64).unwrap();
        assert!(evolve(&w, &p, &s, (0.0, 1.0), 0.02, 1).is_err());
        let odd = WaveFunction::uniform(66).unwrap();
        assert!(evolve(&odd, &p, &s, (0.0, 1.0), 0.005, 1).is_err());
        let big = WaveFunction::new(vec![Complex64::new(1.0, 0.0); 64]).unwrap();
        assert!(evolve(&big, &p, &s, (0.0, 1.0), 0.005, 1).is_err());
    }

    #[test]
    fn snapshot_dump_format() {
        let w = WaveFunction::uniform(4).unwrap();
        let mut buf = Vec::new();
        write_snapshots(&mut buf, &[0.5], &[w]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| !l.is_empty()).count(), 4);
        assert!(text.starts_with("5.0000000000000000e-1 "));
    }
}
