//! Two-level model of a single zone-edge passage (symmetric form):
//! `iħ d₀' = -2E_r(1 - η/l) d₀ + (V/4) d₁`,
//! `iħ d₁' = +2E_r(1 - η/l) d₁ + (V/4) d₀`, with `η = s·t`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RingLatticeParams;
use crate::ode::{integrate, OdeOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelResult {
    pub times: Vec<f64>,
    pub eta: Vec<f64>,
    pub d0: Vec<Complex64>,
    pub d1: Vec<Complex64>,
    /// Population of the upper adiabatic state at the end of the sweep.
    pub excited_fraction: f64,
    /// Common phase `(1/ħ)∫(2E_r(1 - η/l) + V/2)dt` removed by the symmetric form.
    pub common_phase: f64,
}

fn detuning(params: &RingLatticeParams, eta: f64) -> f64 {
    2.0 * params.recoil_energy * (1.0 - eta / params.lf())
}

/// Lower and upper eigenvectors of `[[-Δ, g], [g, Δ]]`.
fn adiabatic_states(delta: f64, g: f64) -> ([f64; 2], [f64; 2]) {
    let r = delta.hypot(g);
    if r == 0.0 {
        return ([1.0, 0.0], [0.0, 1.0]);
    }
    // Mixing angle with tan 2θ = g/Δ.
    let theta = 0.5 * g.atan2(delta);
    let (s, c) = theta.sin_cos();
    ([c, -s], [s, c])
}

/// Starts in the lower adiabatic state at `eta_span.0` and sweeps to
/// `eta_span.1` at rate `s`, recording `samples + 1` equally spaced points.
pub fn two_level_evolve(
    params: &RingLatticeParams,
    s: f64,
    eta_span: (f64, f64),
    samples: usize,
) -> Result<TwoLevelResult> {
    let (e0, e1) = eta_span;
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidParameter(format!("ramp rate must be positive, got {s}")));
    }
    if !(e1 > e0) {
        return Err(Error::InvalidParameter("eta span must be increasing".into()));
    }
    let samples = samples.max(1);
    let hbar = params.hbar();
    let g = params.depth / 4.0;
    let (t0, t1) = (e0 / s, e1 / s);
    let (lower, _) = adiabatic_states(detuning(params, e0), g);
    let y0 = [Complex64::new(lower[0], 0.0), Complex64::new(lower[1], 0.0)];
    let outputs: Vec<f64> = (1..=samples).map(|i| t0 + (t1 - t0) * i as f64 / samples as f64).collect();

    let mut res = TwoLevelResult {
        times: vec![t0],
        eta: vec![e0],
        d0: vec![y0[0]],
        d1: vec![y0[1]],
        excited_fraction: 0.0,
        common_phase: 0.0,
    };
    let ode = OdeOptions {
        rtol: 1e-12,
        atol: 1e-14,
        h_init: 1e-3 / s.max(1e-3),
        ..OdeOptions::default()
    };
    let minus_i = Complex64::new(0.0, -1.0 / hbar);
    integrate(
        |t, y, dy| {
            let d = detuning(params, s * t);
            dy[0] = minus_i * (-d * y[0] + g * y[1]);
            dy[1] = minus_i * (d * y[1] + g * y[0]);
            Ok(())
        },
        t0,
        &y0,
        &outputs,
        &ode,
        |_, _| Ok(()),
        |_, t, y| {
            res.times.push(t);
            res.eta.push(s * t);
            res.d0.push(y[0]);
            res.d1.push(y[1]);
            Ok(())
        },
    )?;
    let (_, upper) = adiabatic_states(detuning(params, e1), g);
    let (a, b) = (*res.d0.last().unwrap(), *res.d1.last().unwrap());
    res.excited_fraction = (upper[0] * a + upper[1] * b).norm_sqr();
    // ∫(2E_r(1 - st/l) + V/2)dt in closed form.
    let er = params.recoil_energy;
    let lf = params.lf();
    let prim = |t: f64| 2.0 * er * (t - s * t * t / (2.0 * lf)) + params.depth / 2.0 * t;
    res.common_phase = (prim(t1) - prim(t0)) / hbar;
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uncoupled_levels_keep_populations() {
        let p = RingLatticeParams::dimensionless(0.0, 2).unwrap();
        let r = two_level_evolve(&p, 0.01, (1.0, 3.0), 20).unwrap();
        for (a, b) in r.d0.iter().zip(&r.d1) {
            assert!((a.norm_sqr() - 1.0).abs() < 1e-10 && b.norm_sqr() < 1e-20);
        }
        assert!((r.excited_fraction - 1.0).abs() < 1e-10);
    }

    #[test]
    fn adiabatic_basis_orthonormal() {
        for (d, g) in [(1.0, 0.1), (-2.0, 0.3), (0.0, 0.5)] {
            let (lo, up) = adiabatic_states(d, g);
            assert!((lo[0] * up[0] + lo[1] * up[1]).abs() < 1e-15);
            // Lower eigenvalue -√(Δ²+g²).
            let h_lo = [-d * lo[0] + g * lo[1], g * lo[0] + d * lo[1]];
            let e = -(d * d + g * g).sqrt();
            assert!((h_lo[0] - e * lo[0]).abs() < 1e-14 && (h_lo[1] - e * lo[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_sweeps() {
        let p = RingLatticeParams::dimensionless(0.5, 2).unwrap();
        assert!(two_level_evolve(&p, 0.0, (1.0, 3.0), 10).is_err());
        assert!(two_level_evolve(&p, 0.01, (3.0, 1.0), 10).is_err());
    }
}
