//! Recovering `I` and `V` from a chirp-driven run, and the external angular
//! acceleration from a pair of runs with different chirps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RingLatticeParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationInputs {
    pub t_b: f64,
    pub peak_amplitude: f64,
    pub chirp_rate: f64,
    pub l: u32,
    pub hbar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub inertia: f64,
    pub depth: f64,
    pub inputs: CalibrationInputs,
    /// Set when `V` exceeds half the implied recoil energy, where the
    /// peak-height relation stops being reliable.
    pub validity_note: Option<String>,
}

/// `I = 4l²ħ/(B t_B)` and `V = 2lħ²B/𝒜`.
pub fn calibrate_iv(t_b: f64, peak_amplitude: f64, chirp_rate: f64, l: u32, hbar: f64) -> Result<CalibrationResult> {
    for (name, v) in [("t_B", t_b), ("peak amplitude", peak_amplitude), ("chirp rate B", chirp_rate), ("hbar", hbar)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
    }
    if l == 0 {
        return Err(Error::InvalidParameter("azimuthal_l must be ≥ 1".into()));
    }
    let lf = f64::from(l);
    let inertia = 4.0 * lf * lf * hbar / (chirp_rate * t_b);
    let depth = 2.0 * lf * hbar * hbar * chirp_rate / peak_amplitude;
    let recoil = hbar * hbar * lf * lf / (2.0 * inertia);
    let validity_note = (depth > 0.5 * recoil).then(|| {
        format!(
            "V = {depth:.4} exceeds E_r/2 = {:.4}; the peak-height relation assumes a shallow lattice",
            0.5 * recoil
        )
    });
    Ok(CalibrationResult {
        inertia,
        depth,
        inputs: CalibrationInputs { t_b, peak_amplitude, chirp_rate, l, hbar },
        validity_note,
    })
}

/// `1/t_B = I(B - 2lΩ̇)/(4ħl²)`, which equals `ħ(B - 2lΩ̇)/(8E_r)`.
/// Non-positive values mean the oscillation is reversed or absent.
pub fn predicted_inverse_bloch(params: &RingLatticeParams, chirp_rate: f64, omega_dot: f64) -> f64 {
    let lf = params.lf();
    params.inertia * (chirp_rate - 2.0 * lf * omega_dot) / (4.0 * params.hbar() * lf * lf)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensingInputs {
    pub chirp_1: f64,
    pub t_b_1: f64,
    pub chirp_2: f64,
    pub t_b_2: f64,
    pub l: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensingResult {
    pub omega_dot: f64,
    pub inputs: SensingInputs,
}

/// `Ω̇ = (B₂t₂ - B₁t₁)/(2l(t₂ - t₁))`.
pub fn infer_angular_acceleration(chirp_1: f64, t_b_1: f64, chirp_2: f64, t_b_2: f64, l: u32) -> Result<SensingResult> {
    for v in [chirp_1, t_b_1, chirp_2, t_b_2] {
        if !v.is_finite() {
            return Err(Error::InvalidParameter("sensing inputs must be finite".into()));
        }
    }
    if l == 0 {
        return Err(Error::InvalidParameter("azimuthal_l must be ≥ 1".into()));
    }
    if t_b_1 == t_b_2 {
        return Err(Error::DegenerateInput(format!("both runs have the same Bloch period {t_b_1}")));
    }
    if chirp_1 == chirp_2 {
        return Err(Error::DegenerateInput(format!("both runs use the same chirp {chirp_1}")));
    }
    let omega_dot = (chirp_2 * t_b_2 - chirp_1 * t_b_1) / (2.0 * f64::from(l) * (t_b_2 - t_b_1));
    Ok(SensingResult {
        omega_dot,
        inputs: SensingInputs { chirp_1, t_b_1, chirp_2, t_b_2, l },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root of the fitted line, `B = 2lΩ̇`.
    pub root: f64,
    pub omega_dot: f64,
    pub residual_rms: f64,
}

/// Least-squares line through `(B_i, 1/t_B_i)`; with `fixed_slope` only the
/// intercept is fitted.
pub fn fit_affine(chirps: &[f64], inverse_bloch: &[f64], l: u32, fixed_slope: Option<f64>) -> Result<AffineFit> {
    let n = chirps.len();
    if n != inverse_bloch.len() {
        return Err(Error::InvalidInput("chirp and Bloch-rate lists differ in length".into()));
    }
    let needed = if fixed_slope.is_some() { 1 } else { 2 };
    if n < needed {
        return Err(Error::InvalidInput(format!("affine fit needs at least {needed} points")));
    }
    let mx = chirps.iter().sum::<f64>() / n as f64;
    let my = inverse_bloch.iter().sum::<f64>() / n as f64;
    let slope = match fixed_slope {
        Some(k) => k,
        None => {
            let sxx: f64 = chirps.iter().map(|x| (x - mx).powi(2)).sum();
            if sxx == 0.0 {
                return Err(Error::DegenerateInput("all chirps are equal".into()));
            }
            chirps.iter().zip(inverse_bloch).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx
        }
    };
    if slope == 0.0 {
        return Err(Error::DegenerateInput("fitted slope is zero".into()));
    }
    let intercept = my - slope * mx;
    let root = -intercept / slope;
    let residual_rms = (chirps
        .iter()
        .zip(inverse_bloch)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt();
    Ok(AffineFit {
        slope,
        intercept,
        root,
        omega_dot: root / (2.0 * f64::from(l)),
        residual_rms,
    })
}
