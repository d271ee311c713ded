//! Time evolution under the co-rotating (or lab-frame) ring-lattice
//! Hamiltonian, the lab/co-rotating gauge map, and two independent oracles:
//! instantaneous band-basis ODEs and the two-level Landau–Zener model.

mod band_basis;
mod split_step;
mod two_level;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::wavefunction::{mode_number, WaveFunction};

pub use band_basis::{evolve_band_basis, BandBasisOptions, BandTrajectory, BasisMode};
pub use split_step::{evolve, evolve_with, write_snapshots, EvolveOptions, SplitStepper, Trajectory};
pub use two_level::{two_level_evolve, TwoLevelResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Lab,
    Corotating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaugeDirection {
    ToCorotating,
    ToLab,
}

/// Angular shift by `±a/l`: `Θ = e^{(a/l)∂_φ}Φ` (to the co-rotating frame)
/// and its inverse, applied as phases `e^{±ima/l}` per angular momentum.
pub fn gauge_map(state: &WaveFunction, a: f64, l: u32, direction: GaugeDirection) -> WaveFunction {
    let n = state.len();
    let sign = match direction {
        GaugeDirection::ToCorotating => 1.0,
        GaugeDirection::ToLab => -1.0,
    };
    let shift = sign * a / f64::from(l);
    let mut c = state.momentum();
    for (j, cj) in c.iter_mut().enumerate() {
        *cj *= Complex64::from_polar(1.0, mode_number(j, n) as f64 * shift);
    }
    WaveFunction::from_momentum_slots(&c).expect("gauge map preserves finiteness")
}

/// `Σ_m mħ|c_m|²` from FFT-ordered momentum coefficients.
pub(crate) fn lz_of_momentum(c: &[Complex64], hbar: f64) -> f64 {
    let n = c.len();
    hbar * c.iter().enumerate().map(|(j, cj)| mode_number(j, n) as f64 * cj.norm_sqr()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gauge_map_identities() {
        let n = 64;
        let w = WaveFunction::from_fn(n, |p| Complex64::new((2.0 * p).cos() + 0.3, (p).sin())).unwrap();
        for a in [0.0, 2.0 * PI * 2.0] {
            let g = gauge_map(&w, a, 2, GaugeDirection::ToCorotating);
            assert!(g.distance(&w).unwrap() < 1e-12);
        }
        let pw = WaveFunction::plane_wave(n, 3).unwrap();
        let a = 0.77;
        let g = gauge_map(&pw, a, 2, GaugeDirection::ToCorotating);
        let expected = WaveFunction::new(pw.amplitudes.iter().map(|x| x * Complex64::from_polar(1.0, 3.0 * a / 2.0)).collect()).unwrap();
        assert!(g.distance(&expected).unwrap() < 1e-12);
        let back = gauge_map(&g, a, 2, GaugeDirection::ToLab);
        assert!(back.distance(&pw).unwrap() < 1e-12);
        assert!((g.norm_sqr() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn shift_is_a_rotation_of_the_grid_function() {
        // Band-limited function shifted by exactly one grid spacing.
        let n = 32;
        let f = |p: f64| Complex64::new((p).cos() + 0.5 * (3.0 * p).sin(), 0.2 * (2.0 * p).cos());
        let w = WaveFunction::from_fn(n, f).unwrap();
        let h = 2.0 * PI / n as f64;
        let g = gauge_map(&w, h * 2.0, 2, GaugeDirection::ToCorotating);
        for (j, x) in g.amplitudes.iter().enumerate() {
            let phi = crate::wavefunction::grid_point(j, n);
            assert!((x - f(phi + h)).norm() < 1e-12);
        }
    }
}
