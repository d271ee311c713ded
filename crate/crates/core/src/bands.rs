//! Bloch bands of the ring lattice from the truncated plane-wave
//! (central) equation, plus the shallow-lattice two-band closed forms.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RingLatticeParams;
use crate::tridiag::SymTridiagonal;
use crate::wavefunction::{check_commensurate, mode_index, WaveFunction};

pub const DEFAULT_K_MAX: usize = 32;

/// Largest eigenvalue change tolerated between truncations `k_max` and `2·k_max`.
const TRUNCATION_TOL: f64 = 1e-6;

/// Two energies closer than this (relative to the matrix scale) are a tie.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSolution {
    pub q: f64,
    /// Ascending.
    pub energies: Vec<f64>,
    /// `coefficients[n][k + k_max]` is `c_k` of `u_{n,q}(φ) = Σ_k c_k e^{-i2lkφ}`.
    pub coefficients: Vec<Vec<f64>>,
    pub k_max: usize,
}

impl BandSolution {
    pub fn bands(&self) -> usize {
        self.energies.len()
    }

    pub fn coefficient(&self, n: usize, k: i64) -> f64 {
        let idx = k + self.k_max as i64;
        if idx < 0 || idx as usize >= self.coefficients[n].len() {
            0.0
        } else {
            self.coefficients[n][idx as usize]
        }
    }

    /// `⟨u_n|-i∂_φ|u_n⟩ = Σ_k |c_k|²(-2lk)`.
    pub fn lattice_momentum(&self, n: usize, l: u32) -> f64 {
        let two_l = 2.0 * f64::from(l);
        self.coefficients[n]
            .iter()
            .enumerate()
            .map(|(i, c)| c * c * (-two_l * (i as f64 - self.k_max as f64)))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochLabel {
    pub band_n: usize,
    pub m: i64,
    pub eta0: f64,
}

impl BlochLabel {
    pub fn new(band_n: usize, m: i64, eta0: f64) -> Self {
        Self { band_n, m, eta0 }
    }

    pub fn validate(&self, l: u32) -> Result<()> {
        let l = i64::from(l);
        if self.m <= -l || self.m > l {
            return Err(Error::InvalidParameter(format!(
                "m = {} outside the first Brillouin zone (-{l}, {l}]",
                self.m
            )));
        }
        if !self.eta0.is_finite() {
            return Err(Error::InvalidParameter("eta0 must be finite".into()));
        }
        Ok(())
    }

    pub fn quasi_momentum(&self) -> f64 {
        self.m as f64 + self.eta0
    }
}

/// Central-equation matrix at quasi momentum `q` over `k ∈ [-k_max, k_max]`.
pub fn central_matrix(params: &RingLatticeParams, q: f64, k_max: usize) -> Result<SymTridiagonal> {
    let km = k_max as i64;
    let diag = (-km..=km).map(|k| params.free_energy(q, k) + params.depth / 2.0).collect();
    let off = vec![params.depth / 4.0; 2 * k_max];
    SymTridiagonal::new(diag, off)
}

fn check_request(params: &RingLatticeParams, q: f64, n_max: usize, k_max: usize) -> Result<()> {
    if k_max < n_max + 4 {
        return Err(Error::InvalidParameter(format!(
            "k_max = {k_max} too small for n_max = {n_max} (need k_max ≥ n_max + 4)"
        )));
    }
    if !q.is_finite() {
        return Err(Error::InvalidParameter("quasi momentum must be finite".into()));
    }
    if !(params.depth >= 0.0) {
        return Err(Error::InvalidParameter("depth must be non-negative".into()));
    }
    Ok(())
}

/// Bands `0..=n_max` at `q`, certified against a run at `2·k_max`.
pub fn solve_bands(params: &RingLatticeParams, q: f64, n_max: usize, k_max: usize) -> Result<BandSolution> {
    check_request(params, q, n_max, k_max)?;
    let sol = solve_unchecked(params, q, n_max + 1, k_max)?;
    let doubled = central_matrix(params, q, 2 * k_max)?.eigenvalues()?;
    let scale = params.recoil_energy;
    for (n, (a, b)) in sol.energies.iter().zip(&doubled).enumerate() {
        if (a - b).abs() > TRUNCATION_TOL * scale {
            return Err(Error::Accuracy(format!(
                "band {n} at q = {q} moves by {:e} between k_max = {k_max} and {}; increase k_max",
                (a - b).abs(),
                2 * k_max
            )));
        }
    }
    Ok(sol)
}

/// Lowest `n_bands` bands at `q` without the truncation check.
pub fn solve_unchecked(params: &RingLatticeParams, q: f64, n_bands: usize, k_max: usize) -> Result<BandSolution> {
    let t = central_matrix(params, q, k_max)?;
    // Extra pairs so that ties straddling the cut are ordered consistently.
    let want = (n_bands + 2).min(t.dim());
    let pairs = t.lowest(want)?;
    let l = params.l;
    let mut sol = BandSolution {
        q,
        energies: pairs.values,
        coefficients: pairs.vectors,
        k_max,
    };
    for v in sol.coefficients.iter_mut() {
        fix_sign(v);
    }
    order_ties(&mut sol, l, params.recoil_energy.max(params.depth));
    sol.energies.truncate(n_bands);
    sol.coefficients.truncate(n_bands);
    Ok(sol)
}

/// Makes the largest-magnitude coefficient positive (the first one when
/// several are equal up to round-off).
pub fn fix_sign(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if let Some(lead) = v.iter().copied().find(|x| x.abs() >= max * (1.0 - 1e-9)) {
        if lead < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Within groups of (numerically) equal energies, orders by `|⟨-i∂⟩|`
/// ascending, then by signed momentum ascending.
fn order_ties(sol: &mut BandSolution, l: u32, scale: f64) {
    let n = sol.energies.len();
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && (sol.energies[j] - sol.energies[i]).abs() <= TIE_TOL * scale.max(1.0) {
            j += 1;
        }
        if j - i > 1 {
            let mut group: Vec<(f64, f64, Vec<f64>)> = (i..j)
                .map(|b| (sol.energies[b], sol.lattice_momentum(b, l) + sol.q, sol.coefficients[b].clone()))
                .collect();
            group.sort_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(a.1.total_cmp(&b.1)));
            for (off, (e, _, c)) in group.into_iter().enumerate() {
                sol.energies[i + off] = e;
                sol.coefficients[i + off] = c;
            }
        }
        i = j;
    }
}

/// `E^Θ_{n,m} = E_n(m + η₀) - ħ²η₀²/(2I)`.
pub fn band_energy_theta(params: &RingLatticeParams, label: &BlochLabel, k_max: usize) -> Result<f64> {
    label.validate(params.l)?;
    let sol = solve_bands(params, label.quasi_momentum(), label.band_n, k_max.max(label.band_n + 4))?;
    let h = params.hbar();
    Ok(sol.energies[label.band_n] - h * h * label.eta0 * label.eta0 / (2.0 * params.inertia))
}

/// `dE_n/dq` by Hellmann–Feynman, cross-checked by a 5-point finite difference.
pub fn group_velocity(params: &RingLatticeParams, n: usize, q: f64) -> Result<f64> {
    let k_max = DEFAULT_K_MAX.max(n + 4);
    let sol = solve_bands(params, q, n, k_max)?;
    let h2 = params.hbar() * params.hbar();
    let hf = h2 / params.inertia * (q + sol.lattice_momentum(n, params.l));
    let step = 1e-4;
    let e = |x: f64| -> Result<f64> { Ok(solve_unchecked(params, x, n + 1, k_max)?.energies[n]) };
    let fd = (e(q - 2.0 * step)? - 8.0 * e(q - step)? + 8.0 * e(q + step)? - e(q + 2.0 * step)?) / (12.0 * step);
    if (hf - fd).abs() > 1e-6 * params.recoil_energy {
        return Err(Error::Numerical(format!(
            "group velocity of band {n} at q = {q}: Hellmann–Feynman {hf:e} vs finite difference {fd:e}"
        )));
    }
    Ok(hf)
}

/// Hellmann–Feynman slope only, for inner loops.
pub fn group_velocity_hf(params: &RingLatticeParams, n: usize, q: f64, k_max: usize) -> Result<f64> {
    let sol = solve_unchecked(params, q, n + 1, k_max)?;
    let h2 = params.hbar() * params.hbar();
    Ok(h2 / params.inertia * (q + sol.lattice_momentum(n, params.l)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShallowBands {
    pub e0: f64,
    pub e1: f64,
}

/// Two-band approximation near the zone edge `q = l`.
pub fn shallow_bands(params: &RingLatticeParams, q: f64) -> ShallowBands {
    let er = params.recoil_energy;
    let v = params.depth;
    let x = 1.0 - q / params.lf();
    let centre = v / 2.0 + er * (1.0 + x * x);
    let radical = (v * v / 16.0 + 4.0 * er * er * x * x).sqrt();
    ShallowBands {
        e0: centre - radical,
        e1: centre + radical,
    }
}

/// `Θ_{n,m}(φ) = e^{imφ}u_{n,m+η₀}(φ)` on an `N`-point grid.
pub fn bloch_state_on_ring(params: &RingLatticeParams, label: &BlochLabel, grid_n: usize) -> Result<WaveFunction> {
    label.validate(params.l)?;
    check_commensurate(grid_n, params.l)?;
    let sol = solve_bands(params, label.quasi_momentum(), label.band_n, DEFAULT_K_MAX.max(label.band_n + 4))?;
    bloch_state_from_solution(&sol, label.band_n, label.m, params.l, grid_n)
}

pub fn bloch_state_from_solution(
    sol: &BandSolution,
    n: usize,
    m: i64,
    l: u32,
    grid_n: usize,
) -> Result<WaveFunction> {
    let two_l = 2 * i64::from(l);
    let km = sol.k_max as i64;
    let coeffs: Vec<(i64, Complex64)> = (-km..=km)
        .filter_map(|k| {
            let p = m - two_l * k;
            mode_index(p, grid_n).map(|_| (p, Complex64::new(sol.coefficient(n, k), 0.0)))
        })
        .collect();
    let mut w = WaveFunction::from_momentum(grid_n, &coeffs)?;
    w.normalize()?;
    Ok(w)
}

/// Rows `(q, n, E_n)` for a band-table export.
pub fn band_table(params: &RingLatticeParams, qs: &[f64], n_max: usize, k_max: usize) -> Result<Vec<(f64, usize, f64)>> {
    use rayon::prelude::*;
    let sols: Vec<BandSolution> = qs.par_iter().map(|&q| solve_bands(params, q, n_max, k_max)).collect::<Result<_>>()?;
    Ok(sols
        .iter()
        .flat_map(|s| s.energies.iter().enumerate().map(move |(n, e)| (s.q, n, *e)))
        .collect())
}
