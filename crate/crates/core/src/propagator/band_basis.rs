//! Propagation of Bloch-basis amplitudes `c_{n,m}(t)`.
//!
//! In the instantaneous mode each sector `m` is expanded in the eigenvectors
//! of `H(q = m + η(t), V(t))`, with couplings `⟨n|∂_tH|n'⟩/(E_{n'} - E_n)`.
//! The dynamical phases are split off (`c_n = b_n e^{-iθ_n}`,
//! `θ_n' = E^Θ_n/ħ`) so the integrator only follows the slow amplitudes.
//! The fixed mode expands in the eigenbasis at a reference time, which stays
//! usable where the instantaneous bands touch (such as `V = 0`).

use std::cell::RefCell;
use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bands::{central_matrix, solve_unchecked, BandSolution};
use crate::error::{Error, Result};
use crate::model::{eta_of_t, ramp_rate, DriveSchedule, RingLatticeParams};
use crate::ode::{integrate, OdeOptions, OdeStats};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisMode {
    Instantaneous,
    Fixed { reference_time: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandBasisOptions {
    pub n_bands: usize,
    pub k_max: usize,
    pub rtol: f64,
    pub atol: f64,
    pub mode: BasisMode,
    /// Output instants; the span end is always included.
    pub sample_dt: f64,
    /// Smallest band gap tolerated in the instantaneous mode.
    pub min_gap: f64,
}

impl Default for BandBasisOptions {
    fn default() -> Self {
        Self {
            n_bands: 9,
            k_max: 16,
            rtol: 1e-9,
            atol: 1e-11,
            mode: BasisMode::Instantaneous,
            sample_dt: 1.0,
            min_gap: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandTrajectory {
    pub times: Vec<f64>,
    pub m_values: Vec<i64>,
    /// `coefficients[i][s][n]`: amplitude of band `n` in sector `m_values[s]`
    /// at `times[i]`, in the instantaneous basis (dynamical phase included).
    pub coefficients: Vec<Vec<Vec<Complex64>>>,
    pub lz: Vec<f64>,
    pub population: Vec<f64>,
    pub evaluations: usize,
}

impl BandTrajectory {
    pub fn band_population(&self, sample: usize, m: i64, n: usize) -> f64 {
        self.m_values
            .iter()
            .position(|&x| x == m)
            .map_or(0.0, |s| self.coefficients[sample][s][n].norm_sqr())
    }
}

fn sample_times(t0: f64, t1: f64, dt: f64) -> Vec<f64> {
    let count = ((t1 - t0) / dt - 1e-9).ceil().max(1.0) as usize;
    (1..=count).map(|i| if i == count { t1 } else { t0 + i as f64 * dt }).collect()
}

/// Plane-wave `L_z` of `ψ_k` in sector `m`: `ħ Σ_k |ψ_k|²(m - 2lk)`.
fn sector_lz(psi: &[Complex64], m: i64, l: u32, k_max: usize, hbar: f64) -> f64 {
    let two_l = 2.0 * f64::from(l);
    psi.iter()
        .enumerate()
        .map(|(i, c)| c.norm_sqr() * (m as f64 - two_l * (i as f64 - k_max as f64)))
        .sum::<f64>()
        * hbar
}

fn combine(sol: &BandSolution, c: &[Complex64]) -> Vec<Complex64> {
    let dim = sol.coefficients[0].len();
    let mut psi = vec![Complex64::new(0.0, 0.0); dim];
    for (n, cn) in c.iter().enumerate() {
        for (p, u) in psi.iter_mut().zip(&sol.coefficients[n]) {
            *p += cn * u;
        }
    }
    psi
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Integrates `c_{n,m}` over `t_span` from the given initial amplitudes.
pub fn evolve_band_basis(
    initial: &BTreeMap<(usize, i64), Complex64>,
    params: &RingLatticeParams,
    schedule: &DriveSchedule,
    t_span: (f64, f64),
    opts: &BandBasisOptions,
) -> Result<BandTrajectory> {
    let (t0, t1) = t_span;
    if !(t1 > t0) {
        return Err(Error::InvalidParameter("band-basis propagation needs t_span.1 > t_span.0".into()));
    }
    if opts.n_bands == 0 || opts.k_max < opts.n_bands + 4 {
        return Err(Error::InvalidParameter(format!(
            "need n_bands ≥ 1 and k_max ≥ n_bands + 4, got {} and {}",
            opts.n_bands, opts.k_max
        )));
    }
    if !(opts.sample_dt > 0.0) {
        return Err(Error::InvalidParameter("sample_dt must be positive".into()));
    }
    schedule.validate(t0, t1)?;
    let l = i64::from(params.l);
    let mut sectors: BTreeMap<i64, Vec<Complex64>> = BTreeMap::new();
    for (&(n, m), &c) in initial {
        if n >= opts.n_bands {
            return Err(Error::InvalidParameter(format!("band {n} outside the truncation n < {}", opts.n_bands)));
        }
        if m <= -l || m > l {
            return Err(Error::InvalidParameter(format!("m = {m} outside (-{l}, {l}]")));
        }
        sectors.entry(m).or_insert_with(|| vec![Complex64::new(0.0, 0.0); opts.n_bands])[n] += c;
    }
    if sectors.is_empty() {
        return Err(Error::InvalidInput("no initial amplitudes".into()));
    }

    let outputs = sample_times(t0, t1, opts.sample_dt);
    let mut traj = BandTrajectory {
        times: std::iter::once(t0).chain(outputs.iter().copied()).collect(),
        m_values: sectors.keys().copied().collect(),
        coefficients: vec![Vec::new(); outputs.len() + 1],
        lz: vec![0.0; outputs.len() + 1],
        population: vec![0.0; outputs.len() + 1],
        evaluations: 0,
    };
    for (m, c0) in &sectors {
        let run = match opts.mode {
            BasisMode::Instantaneous => sector_instantaneous(*m, c0, params, schedule, t0, &outputs, opts)?,
            BasisMode::Fixed { reference_time } => {
                sector_fixed(*m, c0, params, schedule, t0, reference_time, &outputs, opts)?
            }
        };
        for (i, (coeffs, lz)) in run.samples.into_iter().enumerate() {
            traj.population[i] += coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>();
            traj.lz[i] += lz;
            traj.coefficients[i].push(coeffs);
        }
        traj.evaluations += run.stats.evaluations;
    }
    Ok(traj)
}

struct SectorRun {
    samples: Vec<(Vec<Complex64>, f64)>,
    stats: OdeStats,
}

fn aligned_basis(
    params: &RingLatticeParams,
    q: f64,
    nb: usize,
    k_max: usize,
    reference: Option<&BandSolution>,
) -> Result<BandSolution> {
    let mut sol = solve_unchecked(params, q, nb, k_max)?;
    if let Some(r) = reference {
        for (v, rv) in sol.coefficients.iter_mut().zip(&r.coefficients) {
            if dot(v, rv) < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
    }
    Ok(sol)
}

fn sector_instantaneous(
    m: i64,
    c0: &[Complex64],
    params: &RingLatticeParams,
    schedule: &DriveSchedule,
    t0: f64,
    outputs: &[f64],
    opts: &BandBasisOptions,
) -> Result<SectorRun> {
    let nb = opts.n_bands;
    let km = opts.k_max;
    let hbar = params.hbar();
    let lf = params.lf();
    let h2i = hbar * hbar / params.inertia;
    let at = |t: f64| -> Result<RingLatticeParams> { params.with_depth(schedule.depth.eval(t)) };
    let eta = |t: f64| eta_of_t(schedule, params, t);
    let q_of = |t: f64| m as f64 + eta(t);

    let start = aligned_basis(&at(t0)?, q_of(t0), nb, km, None)?;
    let reference = RefCell::new(start.clone());

    // State: b_0..b_{nb-1}, then θ_0..θ_{nb-1} stored as real parts.
    let mut y0 = c0.to_vec();
    y0.extend(std::iter::repeat(Complex64::new(0.0, 0.0)).take(nb));

    let basis_at = |t: f64| -> Result<BandSolution> {
        let p = at(t)?;
        let sol = aligned_basis(&p, q_of(t), nb, km, Some(&reference.borrow()))?;
        for n in 0..nb.saturating_sub(1) {
            let gap = sol.energies[n + 1] - sol.energies[n];
            if gap < opts.min_gap {
                return Err(Error::Integrator(format!(
                    "bands {n} and {} nearly degenerate (gap {gap:e}) at t = {t}; \
                     reduce n_bands or use the two-level model for this crossing",
                    n + 1
                )));
            }
        }
        Ok(sol)
    };

    let rhs = |t: f64, y: &[Complex64], dy: &mut [Complex64]| -> Result<()> {
        let sol = basis_at(t)?;
        let et = eta(t);
        let qdot = ramp_rate(schedule, params, t);
        let vdot = schedule.depth.derivative(t);
        let shift = hbar * hbar * et * et / (2.0 * params.inertia);
        let q = sol.q;
        // ∂_tH in the plane-wave basis: diagonal and constant off-diagonal.
        let dim = 2 * km + 1;
        let dh_diag: Vec<f64> = (0..dim)
            .map(|i| h2i * (q - 2.0 * lf * (i as f64 - km as f64)) * qdot + vdot / 2.0)
            .collect();
        let apply = |v: &[f64]| -> Vec<f64> {
            (0..dim)
                .map(|i| {
                    let mut s = dh_diag[i] * v[i];
                    if i > 0 {
                        s += vdot / 4.0 * v[i - 1];
                    }
                    if i + 1 < dim {
                        s += vdot / 4.0 * v[i + 1];
                    }
                    s
                })
                .collect()
        };
        let dh_u: Vec<Vec<f64>> = sol.coefficients.iter().map(|v| apply(v)).collect();
        for n in 0..nb {
            let mut acc = Complex64::new(0.0, 0.0);
            let theta_n = y[nb + n].re;
            for np in 0..nb {
                if np == n {
                    continue;
                }
                let a = dot(&sol.coefficients[n], &dh_u[np]) / (sol.energies[np] - sol.energies[n]);
                let phase = Complex64::from_polar(1.0, theta_n - y[nb + np].re);
                acc -= a * phase * y[np];
            }
            dy[n] = acc;
            dy[nb + n] = Complex64::new((sol.energies[n] - shift) / hbar, 0.0);
        }
        Ok(())
    };

    let on_accept = |t: f64, _: &[Complex64]| -> Result<()> {
        let sol = basis_at(t)?;
        *reference.borrow_mut() = sol;
        Ok(())
    };

    let mut samples = Vec::with_capacity(outputs.len() + 1);
    let lz0 = sector_lz(&combine(&start, c0), m, params.l, km, hbar);
    samples.push((c0.to_vec(), lz0));
    let ode = OdeOptions {
        rtol: opts.rtol,
        atol: opts.atol,
        h_init: 1e-3,
        ..OdeOptions::default()
    };
    let stats = integrate(rhs, t0, &y0, outputs, &ode, on_accept, |_, t, y| {
        let sol = basis_at(t)?;
        let c: Vec<Complex64> = (0..nb).map(|n| y[n] * Complex64::from_polar(1.0, -y[nb + n].re)).collect();
        let lz = sector_lz(&combine(&sol, &c), m, params.l, km, hbar);
        samples.push((c, lz));
        Ok(())
    })?;
    Ok(SectorRun { samples, stats })
}

#[allow(clippy::too_many_arguments)]
fn sector_fixed(
    m: i64,
    c0: &[Complex64],
    params: &RingLatticeParams,
    schedule: &DriveSchedule,
    t0: f64,
    t_ref: f64,
    outputs: &[f64],
    opts: &BandBasisOptions,
) -> Result<SectorRun> {
    let nb = opts.n_bands;
    let km = opts.k_max;
    let dim = 2 * km + 1;
    let hbar = params.hbar();
    let lf = params.lf();
    let at = |t: f64| -> Result<RingLatticeParams> { params.with_depth(schedule.depth.eval(t)) };
    let q_of = |t: f64| m as f64 + eta_of_t(schedule, params, t);

    let basis = solve_unchecked(&at(t_ref)?, q_of(t_ref), nb, km)?;
    let u = &basis.coefficients;
    // Projected operators: U^T K U, U^T K² U and U^T cos² U with K = diag(k).
    let mut uku = vec![vec![0.0; nb]; nb];
    let mut uk2u = vec![vec![0.0; nb]; nb];
    let mut ucu = vec![vec![0.0; nb]; nb];
    let cos2 = central_matrix(&RingLatticeParams::new(params.inertia, 1.0, params.l, params.units)?, 0.0, km)?;
    for a in 0..nb {
        for b in 0..nb {
            let mut s1 = 0.0;
            let mut s2 = 0.0;
            let mut s3 = 0.0;
            for i in 0..dim {
                let k = i as f64 - km as f64;
                s1 += u[a][i] * k * u[b][i];
                s2 += u[a][i] * k * k * u[b][i];
                let mut cu = 0.5 * u[b][i];
                if i > 0 {
                    cu += cos2.off[i - 1] * u[b][i - 1];
                }
                if i + 1 < dim {
                    cu += cos2.off[i] * u[b][i + 1];
                }
                s3 += u[a][i] * cu;
            }
            uku[a][b] = s1;
            uk2u[a][b] = s2;
            ucu[a][b] = s3;
        }
    }
    let c = hbar * hbar / (2.0 * params.inertia);
    let hamiltonian = |t: f64| -> Vec<Vec<f64>> {
        let eta = eta_of_t(schedule, params, t);
        let q = m as f64 + eta;
        let v = schedule.depth.eval(t);
        let mut h = vec![vec![0.0; nb]; nb];
        for a in 0..nb {
            for b in 0..nb {
                let delta = if a == b { 1.0 } else { 0.0 };
                h[a][b] = c * (q * q * delta - 4.0 * lf * q * uku[a][b] + 4.0 * lf * lf * uk2u[a][b])
                    + v * ucu[a][b]
                    - delta * c * eta * eta;
            }
        }
        h
    };

    // Express the initial instantaneous-basis amplitudes in the fixed basis.
    let inst0 = solve_unchecked(&at(t0)?, q_of(t0), nb, km)?;
    let psi0 = combine(&inst0, c0);
    let y0: Vec<Complex64> = (0..nb)
        .map(|a| psi0.iter().zip(&u[a]).map(|(p, x)| p * x).sum())
        .collect();

    let project = |t: f64, y: &[Complex64]| -> Result<(Vec<Complex64>, f64)> {
        let psi = combine(&basis, y);
        let inst = solve_unchecked(&at(t)?, q_of(t), nb, km)?;
        let coeffs = (0..nb)
            .map(|n| psi.iter().zip(&inst.coefficients[n]).map(|(p, x)| p * x).sum())
            .collect();
        Ok((coeffs, sector_lz(&psi, m, params.l, km, hbar)))
    };

    let rhs = |t: f64, y: &[Complex64], dy: &mut [Complex64]| -> Result<()> {
        let h = hamiltonian(t);
        for a in 0..nb {
            let mut s = Complex64::new(0.0, 0.0);
            for b in 0..nb {
                s += h[a][b] * y[b];
            }
            dy[a] = Complex64::new(0.0, -1.0 / hbar) * s;
        }
        Ok(())
    };

    let mut samples = vec![project(t0, &y0)?];
    let ode = OdeOptions {
        rtol: opts.rtol,
        atol: opts.atol,
        h_init: 1e-4,
        ..OdeOptions::default()
    };
    let stats = integrate(rhs, t0, &y0, outputs, &ode, |_, _| Ok(()), |_, t, y| {
        samples.push(project(t, y)?);
        Ok(())
    })?;
    Ok(SectorRun { samples, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bands::band_energy_theta;
    use crate::bands::BlochLabel;
    use crate::model::{Program, Segment};

    #[test]
    fn frozen_hamiltonian_phases() {
        let p = RingLatticeParams::dimensionless(1.0, 2).unwrap();
        let sched = DriveSchedule::stationary(1.0);
        let mut init = BTreeMap::new();
        init.insert((0, 0), Complex64::new(0.6, 0.0));
        init.insert((1, 0), Complex64::new(0.0, 0.8));
        let opts = BandBasisOptions { n_bands: 4, sample_dt: 2.5, ..Default::default() };
        let tr = evolve_band_basis(&init, &p, &sched, (0.0, 10.0), &opts).unwrap();
        let e0 = band_energy_theta(&p, &BlochLabel::new(0, 0, 0.0), 32).unwrap();
        let e1 = band_energy_theta(&p, &BlochLabel::new(1, 0, 0.0), 32).unwrap();
        let last = tr.coefficients.last().unwrap();
        let t = 10.0;
        assert!((last[0][0] - 0.6 * Complex64::from_polar(1.0, -e0 * t)).norm() < 1e-8);
        assert!((last[0][1] - Complex64::new(0.0, 0.8) * Complex64::from_polar(1.0, -e1 * t)).norm() < 1e-8);
        assert!(tr.population.iter().all(|x| (x - 1.0).abs() < 1e-8));
    }

    #[test]
    fn fixed_and_instantaneous_modes_agree() {
        let p = RingLatticeParams::dimensionless(2.0, 2).unwrap();
        let depth = Program::piecewise(vec![(0.0, Segment::Linear { value: 1.0, slope: 0.25 })]).unwrap();
        let sched = DriveSchedule::new(depth, Program::zero(), Program::zero(), 0.0);
        let mut init = BTreeMap::new();
        init.insert((0, 0), Complex64::new(1.0, 0.0));
        let base = BandBasisOptions { n_bands: 6, k_max: 12, sample_dt: 2.0, ..Default::default() };
        let inst = evolve_band_basis(&init, &p, &sched, (0.0, 4.0), &base).unwrap();
        let fixed = evolve_band_basis(
            &init,
            &p,
            &sched,
            (0.0, 4.0),
            &BandBasisOptions { mode: BasisMode::Fixed { reference_time: 2.0 }, ..base },
        )
        .unwrap();
        let a = inst.band_population(2, 0, 0);
        let b = fixed.band_population(2, 0, 0);
        assert!((a - b).abs() < 1e-4, "{a} vs {b}");
    }

    #[test]
    fn degenerate_start_is_rejected() {
        let p = RingLatticeParams::dimensionless(0.0, 2).unwrap();
        let mut init = BTreeMap::new();
        init.insert((0, 0), Complex64::new(1.0, 0.0));
        let r = evolve_band_basis(&init, &p, &DriveSchedule::stationary(0.0), (0.0, 1.0), &BandBasisOptions::default());
        assert!(matches!(r, Err(Error::Integrator(_))));
    }
}
