//! Reduction of the 3D toroidal trap plus ring lattice to the effective 1D
//! parameters `I`, `V` and the energy offset `ε₀`.
//!
//! The transverse ground states are the harmonic-oscillator Gaussians of the
//! toroidal trap: `R₀(r)` centred on the ring radius with width
//! `√(ħ/(mω_⊥))` (truncated to `r > r₀/100` and renormalised) and `Z₀(z)` with
//! width `√(ħ/(mω_z))`. The beam waist keeps its `z` dependence inside the
//! depth integral.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::integrate_with_breaks;

/// Transverse extent of the Gaussians, in widths, kept in the integrals.
const GAUSS_CUTOFF: f64 = 14.0;
const REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trap3DParams {
    pub mass: f64,
    pub ring_radius: f64,
    pub omega_perp: f64,
    pub omega_z: f64,
    pub beam_waist: f64,
    pub rayleigh_length: f64,
    pub lattice_scale_u: f64,
    pub l: u32,
}

impl Trap3DParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass_m", self.mass),
            ("ring_radius_r0", self.ring_radius),
            ("omega_perp", self.omega_perp),
            ("omega_z", self.omega_z),
            ("beam_waist_w0", self.beam_waist),
            ("rayleigh_length_zR", self.rayleigh_length),
            ("lattice_scale_U", self.lattice_scale_u),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.l < 1 {
            return Err(Error::InvalidParameter("azimuthal_l must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Whether the ring sits on the intensity maximum, `r₀ = √(l/2)·w₀`, within `rel_tol`.
    pub fn is_matched(&self, rel_tol: f64) -> bool {
        let target = (f64::from(self.l) / 2.0).sqrt() * self.beam_waist;
        ((self.ring_radius - target) / target).abs() <= rel_tol
    }

    pub fn radial_width(&self, hbar: f64) -> f64 {
        (hbar / (self.mass * self.omega_perp)).sqrt()
    }

    pub fn axial_width(&self, hbar: f64) -> f64 {
        (hbar / (self.mass * self.omega_z)).sqrt()
    }

    fn waist_at(&self, z: f64) -> f64 {
        let x = z / self.rayleigh_length;
        self.beam_waist * (1.0 + x * x).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedParams {
    pub inertia: f64,
    pub depth: f64,
    pub eps0: f64,
    /// Confinement-hierarchy warnings (ratios above 0.1).
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatedParams {
    pub inertia: f64,
    pub depth: f64,
}

fn ln_factorial(l: u32) -> f64 {
    (2..=l).map(|k| f64::from(k).ln()).sum()
}

/// Radial intensity profile `f_l(ξ) = e^{-ξ²} ξ^{2l}/l!` of the LG beams.
pub fn lg_profile(l: u32, xi: f64) -> f64 {
    if xi <= 0.0 {
        return if l == 0 { 1.0 } else { 0.0 };
    }
    (-xi * xi + 2.0 * f64::from(l) * xi.ln() - ln_factorial(l)).exp()
}

/// Peak value of [`lg_profile`], reached at `ξ = √l`: `l^l e^{-l}/l!`.
pub fn lg_profile_max(l: u32) -> f64 {
    let lf = f64::from(l);
    (lf * lf.ln() - lf - ln_factorial(l)).exp()
}

/// Closed-form estimates `I ≈ m r₀²`, `V ≈ U l^l e^{-l}/l!`.
pub fn estimate_params(trap: &Trap3DParams) -> EstimatedParams {
    EstimatedParams {
        inertia: trap.mass * trap.ring_radius * trap.ring_radius,
        depth: trap.lattice_scale_u * lg_profile_max(trap.l),
    }
}

struct GaussianDensity {
    center: f64,
    width: f64,
    norm: f64,
    lo: f64,
    hi: f64,
}

impl GaussianDensity {
    fn new(center: f64, width: f64, positive_only: bool) -> Result<Self> {
        let mut lo = center - GAUSS_CUTOFF * width;
        let hi = center + GAUSS_CUTOFF * width;
        if positive_only {
            // The 1/r² integrands diverge for a Gaussian truncated at r = 0.
            lo = lo.max(1e-2 * center);
        }
        let raw = |x: f64| {
            let u = (x - center) / width;
            (-u * u).exp()
        };
        let mass = integrate_with_breaks(raw, &Self::breaks(lo, center, hi), 0.0, 1e-13)?.value;
        Ok(Self {
            center,
            width,
            norm: 1.0 / mass,
            lo,
            hi,
        })
    }

    fn breaks(lo: f64, center: f64, hi: f64) -> Vec<f64> {
        if center > lo && center < hi {
            vec![lo, center, hi]
        } else {
            vec![lo, hi]
        }
    }

    fn at(&self, x: f64) -> f64 {
        let u = (x - self.center) / self.width;
        self.norm * (-u * u).exp()
    }

    fn points(&self) -> Vec<f64> {
        Self::breaks(self.lo, self.center, self.hi)
    }
}

/// Effective 1D parameters from the transverse ground states by quadrature.
pub fn reduce_3d(trap: &Trap3DParams, hbar: f64) -> Result<ReducedParams> {
    trap.validate()?;
    if !(hbar > 0.0) {
        return Err(Error::InvalidParameter("hbar must be positive".into()));
    }
    let sigma_r = trap.radial_width(hbar);
    let sigma_z = trap.axial_width(hbar);
    let mut warnings = Vec::new();
    let ratio_r = sigma_r / trap.ring_radius;
    if ratio_r > 0.1 {
        warnings.push(format!("radial width / ring radius = {ratio_r:.3} exceeds 0.1"));
    }
    let ratio_z = sigma_z / trap.rayleigh_length;
    if ratio_z > 0.1 {
        warnings.push(format!("axial width / Rayleigh length = {ratio_z:.3} exceeds 0.1"));
    }

    let radial = GaussianDensity::new(trap.ring_radius, sigma_r, true)?;
    let axial = GaussianDensity::new(0.0, sigma_z, false)?;
    let rpts = radial.points();

    let inv_inertia = integrate_with_breaks(|r| radial.at(r) / (trap.mass * r * r), &rpts, 0.0, REL_TOL)?.value;
    let inertia = 1.0 / inv_inertia;

    let l = trap.l;
    let zpts = axial.points();
    let inner = |r: f64| -> f64 {
        let f = |z: f64| axial.at(z) * lg_profile(l, std::f64::consts::SQRT_2 * r / trap.waist_at(z));
        // Inner tolerance tighter than the outer so its noise does not stall the outer refinement.
        integrate_with_breaks(f, &zpts, 0.0, 1e-12).map(|q| q.value).unwrap_or(f64::NAN)
    };
    let depth_integral = integrate_with_breaks(|r| radial.at(r) * inner(r), &rpts, 0.0, REL_TOL)?.value;
    let depth = trap.lattice_scale_u * depth_integral;

    // First term carried exactly as printed in the reduction (no ħ²/m prefactor).
    let centrifugal = integrate_with_breaks(|r| radial.at(r) / (4.0 * r * r), &rpts, 0.0, REL_TOL)?.value;
    let eps0 = centrifugal + 0.5 * hbar * (trap.omega_z + trap.omega_perp) - depth;

    if !(inertia.is_finite() && depth.is_finite() && eps0.is_finite()) {
        return Err(Error::Numerical("dimensional reduction produced non-finite values".into()));
    }
    Ok(ReducedParams {
        inertia,
        depth,
        eps0,
        warnings,
    })
}

/// Plain fixed-order fallback used only by tests as an independent check.
#[cfg(test)]
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn trap(width_ratio: f64, l: u32) -> Trap3DParams {
        // Units with ħ = m = 1 and r0 = 1, so ω = 1/width².
        let r0 = 1.0;
        let w0 = r0 / (f64::from(l) / 2.0).sqrt();
        let omega = 1.0 / (width_ratio * r0).powi(2);
        Trap3DParams {
            mass: 1.0,
            ring_radius: r0,
            omega_perp: omega,
            omega_z: omega,
            beam_waist: w0,
            rayleigh_length: 1.0,
            lattice_scale_u: 1.0,
            l,
        }
    }

    #[test]
    fn profile_values() {
        assert_eq!(lg_profile(2, 0.0), 0.0);
        assert_relative_eq!(lg_profile(2, 2f64.sqrt()), 2.0 * (-2.0f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(lg_profile(2, 2f64.sqrt()), 0.27067, max_relative = 2e-5);
        assert_relative_eq!(lg_profile(1, 1.0), (-1.0f64).exp(), max_relative = 1e-14);
        for l in 1..6 {
            let peak = lg_profile(l, f64::from(l).sqrt());
            assert_relative_eq!(peak, lg_profile_max(l), max_relative = 1e-13);
            assert!(lg_profile(l, f64::from(l).sqrt() * 1.01) < peak);
            assert!(lg_profile(l, f64::from(l).sqrt() * 0.99) < peak);
        }
    }

    #[test]
    fn estimates() {
        let mut t = trap(0.01, 2);
        t.lattice_scale_u = 1.0;
        assert_relative_eq!(estimate_params(&t).depth, 2.0 * (-2.0f64).exp(), max_relative = 1e-14);
        t.mass = 1.0;
        t.ring_radius = 3.0;
        assert_eq!(estimate_params(&t).inertia, 9.0);
        let t1 = trap(0.01, 1);
        assert_relative_eq!(estimate_params(&t1).depth, (-1.0f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn narrow_ring_limit() {
        for l in [1, 2, 3] {
            let t = trap(1e-4, l);
            let red = reduce_3d(&t, 1.0).unwrap();
            let est = estimate_params(&t);
            assert!(((red.inertia - est.inertia) / est.inertia).abs() < 1e-7, "I = {}", red.inertia);
            assert!(((red.depth - est.depth) / est.depth).abs() < 1e-6, "V = {}", red.depth);
            assert!(red.warnings.is_empty());
            assert!(t.is_matched(1e-12));
        }
    }

    #[test]
    fn finite_width_inertia_against_simpson_oracle() {
        let ratio = 0.05;
        let t = trap(ratio, 2);
        let red = reduce_3d(&t, 1.0).unwrap();
        let sigma = ratio;
        let oracle_norm = simpson(|r| (-((r - 1.0) / sigma).powi(2)).exp(), 1.0 - 14.0 * sigma, 1.0 + 14.0 * sigma, 400_000);
        let oracle_inv = simpson(
            |r| (-((r - 1.0) / sigma).powi(2)).exp() / (r * r),
            1.0 - 14.0 * sigma,
            1.0 + 14.0 * sigma,
            400_000,
        ) / oracle_norm;
        let oracle = 1.0 / oracle_inv;
        assert_relative_eq!(red.inertia, oracle, max_relative = 1e-10);
        // Coefficient of the (σ/r0)² correction; the Gaussian moment series gives -1.5 - 1.5(σ/r0)².
        let c = (red.inertia - 1.0) / (ratio * ratio);
        assert_relative_eq!(c, -1.5 - 1.5 * ratio * ratio, max_relative = 2e-3);
    }

    #[test]
    fn converges_monotonically_to_estimates() {
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for ratio in [0.08, 0.04, 0.02, 0.01, 0.005] {
            let t = trap(ratio, 2);
            let red = reduce_3d(&t, 1.0).unwrap();
            let est = estimate_params(&t);
            let di = ((red.inertia - est.inertia) / est.inertia).abs();
            let dv = ((red.depth - est.depth) / est.depth).abs();
            assert!(di < prev.0 && dv < prev.1, "ratio {ratio}: {di} {dv}");
            assert!(red.depth <= t.lattice_scale_u * lg_profile_max(2));
            assert!(red.inertia > 0.0 && red.eps0.is_finite());
            prev = (di, dv);
        }
    }

    #[test]
    fn hierarchy_warnings_and_errors() {
        let t = trap(0.2, 2);
        let red = reduce_3d(&t, 1.0).unwrap();
        assert_eq!(red.warnings.len(), 2);
        let mut bad = trap(0.01, 2);
        bad.mass = -1.0;
        assert!(matches!(reduce_3d(&bad, 1.0), Err(Error::InvalidParameter(_))));
        bad = trap(0.01, 2);
        bad.l = 0;
        assert!(matches!(reduce_3d(&bad, 1.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn si_rubidium_trap() {
        let hbar = crate::model::HBAR_SI;
        let m = crate::model::RB87_MASS_KG;
        let r0 = 20e-6;
        let t = Trap3DParams {
            mass: m,
            ring_radius: r0,
            omega_perp: 2.0 * std::f64::consts::PI * 2e3,
            omega_z: 2.0 * std::f64::consts::PI * 2e3,
            beam_waist: r0,
            rayleigh_length: 1e-3,
            lattice_scale_u: 1e-31,
            l: 2,
        };
        let red = reduce_3d(&t, hbar).unwrap();
        assert_relative_eq!(red.inertia, m * r0 * r0, max_relative = 1e-3);
        assert!(red.depth > 0.0 && red.depth <= 1e-31 * lg_profile_max(2));
    }
}
