//! Adaptive Dormand–Prince 5(4) integrator for complex ODE systems.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: 1e-3,
            h_max: f64::INFINITY,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `y' = f(t, y)` from `t0` through each of `outputs` (which must
/// be increasing and ≥ `t0`), calling `on_output(i, t, y)` at each one.
///
/// `on_accept(t, y)` runs after every accepted step; callers use it to update
/// state the right-hand side depends on (such as a reference gauge).
pub fn integrate<F, A, O>(
    mut f: F,
    t0: f64,
    y0: &[Complex64],
    outputs: &[f64],
    opts: &OdeOptions,
    mut on_accept: A,
    mut on_output: O,
) -> Result<OdeStats>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]) -> Result<()>,
    A: FnMut(f64, &[Complex64]) -> Result<()>,
    O: FnMut(usize, f64, &[Complex64]) -> Result<()>,
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut stats = OdeStats::default();
    let zero = Complex64::new(0.0, 0.0);
    let mut k: Vec<Vec<Complex64>> = vec![vec![zero; n]; 7];
    let mut tmp = vec![zero; n];
    let mut y_new = vec![zero; n];
    let mut h = opts.h_init.min(opts.h_max);

    f(t, &y, &mut k[0])?;
    stats.evaluations += 1;

    for (idx, &target) in outputs.iter().enumerate() {
        if target < t - 1e-12 * t.abs().max(1.0) {
            return Err(Error::InvalidInput("ODE output times must be increasing".into()));
        }
        while t < target {
            if stats.accepted + stats.rejected >= opts.max_steps {
                return Err(Error::Integrator(format!("ODE step budget exhausted at t = {t}")));
            }
            let last = t + h >= target;
            let hh = if last { target - t } else { h };
            if hh <= 1e-14 * t.abs().max(1.0) {
                return Err(Error::Integrator(format!("ODE step size underflow at t = {t}")));
            }

            stage(&y, hh, &k, &[A21], &mut tmp);
            f(t + C2 * hh, &tmp, &mut k[1])?;
            stage(&y, hh, &k, &[A31, A32], &mut tmp);
            f(t + C3 * hh, &tmp, &mut k[2])?;
            stage(&y, hh, &k, &[A41, A42, A43], &mut tmp);
            f(t + C4 * hh, &tmp, &mut k[3])?;
            stage(&y, hh, &k, &[A51, A52, A53, A54], &mut tmp);
            f(t + C5 * hh, &tmp, &mut k[4])?;
            stage(&y, hh, &k, &[A61, A62, A63, A64, A65], &mut tmp);
            f(t + hh, &tmp, &mut k[5])?;
            stage(&y, hh, &k, &[B1, 0.0, B3, B4, B5, B6], &mut y_new);
            f(t + hh, &y_new, &mut k[6])?;
            stats.evaluations += 6;

            let mut err = 0.0;
            for i in 0..n {
                let e = hh * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
                let sc = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
                err += (e.norm() / sc).powi(2);
            }
            let err = (err / n.max(1) as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::Integrator(format!("non-finite ODE error estimate at t = {t}")));
            }
            if err <= 1.0 {
                t = if last { target } else { t + hh };
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6);
                stats.accepted += 1;
                on_accept(t, &y)?;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last || fac < 1.0 {
                    h = (hh * fac).min(opts.h_max);
                }
            } else {
                stats.rejected += 1;
                h = hh * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            }
        }
        on_output(idx, t, &y)?;
    }
    Ok(stats)
}

fn stage(y: &[Complex64], h: f64, k: &[Vec<Complex64>], a: &[f64], out: &mut [Complex64]) {
    for i in 0..y.len() {
        let mut s = Complex64::new(0.0, 0.0);
        for (j, &aj) in a.iter().enumerate() {
            if aj != 0.0 {
                s += aj * k[j][i];
            }
        }
        out[i] = y[i] + h * s;
    }
}
