//! Wave functions on a uniform periodic angular grid.
//!
//! Grid points are `φ_j = -π + 2π(j+1)/N` and the norm is
//! `Σ|ψ_j|²·2π/N`. The angular-momentum expansion is
//! `ψ(φ) = Σ_m c_m e^{imφ}/√(2π)`, so `Σ|c_m|²` equals the grid norm.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    pub amplitudes: Vec<Complex64>,
}

/// Angular momentum carried by FFT slot `j` of an `n`-point grid.
/// The Nyquist slot is assigned `-n/2`.
pub fn mode_number(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// FFT slot of angular momentum `m`, if representable on an `n`-point grid.
pub fn mode_index(m: i64, n: usize) -> Option<usize> {
    let half = (n / 2) as i64;
    if m >= -half && m < half {
        Some(if m >= 0 { m as usize } else { (m + n as i64) as usize })
    } else {
        None
    }
}

pub fn grid_point(j: usize, n: usize) -> f64 {
    -PI + 2.0 * PI * (j + 1) as f64 / n as f64
}

pub fn grid(n: usize) -> Vec<f64> {
    (0..n).map(|j| grid_point(j, n)).collect()
}

/// Forward/inverse transform pair for one grid size.
#[derive(Clone)]
pub struct Transform {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `e^{-imφ_0}` per slot.
    shift: Vec<Complex64>,
}

impl Transform {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let phi0 = grid_point(0, n);
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            shift: (0..n)
                .map(|j| Complex64::from_polar(1.0, -(mode_number(j, n) as f64) * phi0))
                .collect(),
        }
    }

    /// Grid amplitudes to `c_m` in FFT slot order.
    pub fn to_momentum(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let mut c = psi.to_vec();
        self.forward.process(&mut c);
        let scale = (2.0 * PI).sqrt() / self.n as f64;
        for (cj, s) in c.iter_mut().zip(&self.shift) {
            *cj *= s * scale;
        }
        c
    }

    /// `c_m` in FFT slot order to grid amplitudes.
    pub fn to_grid(&self, c: &[Complex64]) -> Vec<Complex64> {
        let mut psi: Vec<Complex64> = c.iter().zip(&self.shift).map(|(cj, s)| cj * s.conj()).collect();
        self.inverse.process(&mut psi);
        let scale = 1.0 / (2.0 * PI).sqrt();
        psi.iter_mut().for_each(|p| *p *= scale);
        psi
    }
}

impl WaveFunction {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let n = amplitudes.len();
        if n < 2 || n % 2 != 0 {
            return Err(Error::InvalidParameter(format!("grid size must be even and ≥ 2, got {n}")));
        }
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::Numerical("wave function has non-finite amplitudes".into()));
        }
        Ok(Self { amplitudes })
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn from_fn<F: Fn(f64) -> Complex64>(n: usize, f: F) -> Result<Self> {
        Self::new(grid(n).into_iter().map(f).collect())
    }

    /// `1/√(2π)`, the ground state of a free particle on the ring.
    pub fn uniform(n: usize) -> Result<Self> {
        let a = Complex64::new(1.0 / (2.0 * PI).sqrt(), 0.0);
        Self::new(vec![a; n])
    }

    pub fn plane_wave(n: usize, m: i64) -> Result<Self> {
        Self::from_momentum(n, &[(m, Complex64::new(1.0, 0.0))])
    }

    /// Builds `Σ c_m e^{imφ}/√(2π)` from sparse `(m, c_m)` pairs.
    pub fn from_momentum(n: usize, coefficients: &[(i64, Complex64)]) -> Result<Self> {
        let mut c = vec![Complex64::new(0.0, 0.0); n];
        for &(m, cm) in coefficients {
            let j = mode_index(m, n).ok_or_else(|| {
                Error::InvalidParameter(format!("angular momentum {m} not representable on {n} points"))
            })?;
            c[j] += cm;
        }
        Self::from_momentum_slots(&c)
    }

    pub fn from_momentum_slots(c: &[Complex64]) -> Result<Self> {
        Self::new(Transform::new(c.len()).to_grid(c))
    }

    /// `c_m` in FFT slot order (see [`mode_number`]).
    pub fn momentum(&self) -> Vec<Complex64> {
        Transform::new(self.len()).to_momentum(&self.amplitudes)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * 2.0 * PI / self.len() as f64
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sqr().sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Numerical("cannot normalize a zero or non-finite state".into()));
        }
        self.amplitudes.iter_mut().for_each(|a| *a /= n);
        Ok(())
    }

    /// `⟨self|other⟩` under the grid inner product.
    pub fn inner(&self, other: &WaveFunction) -> Result<Complex64> {
        if self.len() != other.len() {
            return Err(Error::InvalidInput("inner product of states on different grids".into()));
        }
        let s: Complex64 = self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum();
        Ok(s * (2.0 * PI / self.len() as f64))
    }

    /// Errors unless the grid size is a multiple of `2l`.
    pub fn check_commensurate(&self, l: u32) -> Result<()> {
        check_commensurate(self.len(), l)
    }

    /// `‖self − other‖` under the grid norm.
    pub fn distance(&self, other: &WaveFunction) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::InvalidInput("distance between states on different grids".into()));
        }
        let s: f64 = self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| (a - b).norm_sqr()).sum();
        Ok((s * 2.0 * PI / self.len() as f64).sqrt())
    }
}

pub fn check_commensurate(n: usize, l: u32) -> Result<()> {
    let period = 2 * l as usize;
    if n == 0 || n % period != 0 {
        return Err(Error::InvalidParameter(format!(
            "grid size {n} is not a multiple of 2l = {period}"
        )));
    }
    Ok(())
}
