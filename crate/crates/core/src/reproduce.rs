//! The figure suite behind `ringlattice reproduce`: plot data for every figure
//! and a pass/fail report against fixed tolerances.

use std::collections::BTreeMap;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::{
    adiabatic_prediction, detect_bloch_signature, phases, shallow_lz_rate_trace, trace_derivative, wrap_angle,
    ObservableTrace, PredictionMode,
};
use crate::bands::{band_table, bloch_state_on_ring, shallow_bands, solve_bands, BlochLabel, DEFAULT_K_MAX};
use crate::calibration::{calibrate_iv, infer_angular_acceleration, predicted_inverse_bloch};
use crate::cli::{Artifact, CommandOutput};
use crate::error::{Error, Result};
use crate::io::Table;
use crate::model::{eta_of_t, DriveSchedule, RingLatticeParams};
use crate::propagator::{evolve, evolve_band_basis, evolve_with, BandBasisOptions, EvolveOptions};
use crate::protocols::{
    critical_ramp_rate, load_state, loading_fidelity, run_experiment, staircase_prediction, Drive, ExperimentConfig,
};
use crate::wavefunction::grid;

#[derive(Debug, Clone, Serialize)]
pub struct Criterion {
    pub id: u32,
    pub name: &'static str,
    pub pass: bool,
    pub measured: Value,
}

impl Criterion {
    pub fn line(&self) -> String {
        format!("{} {:>2} {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.id, self.name, self.measured)
    }
}

fn params(v: f64) -> Result<RingLatticeParams> {
    RingLatticeParams::dimensionless(v, 2)
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn trace_table(trace: &ObservableTrace, extra: &[(&str, Vec<f64>)]) -> Table {
    let mut cols = vec!["t".to_string(), trace.kind.column().to_string()];
    cols.extend(extra.iter().map(|(n, _)| n.to_string()));
    let mut t = Table::new(cols);
    for i in 0..trace.len() {
        let mut r = vec![trace.times[i], trace.values[i]];
        r.extend(extra.iter().map(|(_, v)| v[i]));
        t.push(r);
    }
    t
}

/// Runs every figure and criterion. Failing criteria are reported as a
/// deferred accuracy error after the files are written.
pub fn run_suite() -> Result<CommandOutput> {
    let mut out = CommandOutput::default();
    let mut report = Vec::new();

    fig2_bands(&mut out, &mut report)?;
    gaps(&mut report)?;
    fig_d1(&mut out, &mut report)?;
    fig3(&mut out)?;
    fig5(&mut out, &mut report)?;
    fig7_8(&mut out, &mut report)?;
    fig_c1(&mut out, &mut report)?;
    fig_b(&mut out, &mut report)?;
    oracle(&mut report)?;
    sensing(&mut report)?;
    phase(&mut report)?;
    order(&mut report)?;

    report.sort_by_key(|c| c.id);
    let text: String = report.iter().map(|c| c.line() + "\n").collect();
    let failed: Vec<u32> = report.iter().filter(|c| !c.pass).map(|c| c.id).collect();
    out.artifacts.push(Artifact::Json("report".into(), serde_json::to_value(&report).unwrap_or(Value::Null)));
    out.artifacts.push(Artifact::Text("report.txt".into(), text));
    if !failed.is_empty() {
        out.deferred = Some(Error::Accuracy(format!("acceptance criteria failed: {failed:?}")));
    }
    Ok(out)
}

fn fig2_bands(out: &mut CommandOutput, report: &mut Vec<Criterion>) -> Result<()> {
    let p = params(1.0)?;
    let qs = linspace(-2.0, 2.0, 161);
    let t = Instant::now();
    let rows = band_table(&p, &qs, 4, DEFAULT_K_MAX)?;
    let seconds = t.elapsed().as_secs_f64();
    let reference = band_table(&p, &qs, 4, 2 * DEFAULT_K_MAX)?;
    let dev = rows.iter().zip(&reference).map(|(a, b)| (a.2 - b.2).abs()).fold(0.0, f64::max);
    let mut tab = Table::new(["q", "n", "E"]);
    for (q, n, e) in &rows {
        tab.push(vec![*q, *n as f64, *e]);
    }
    out.artifacts.push(Artifact::Table("fig2_bands".into(), tab));
    report.push(Criterion {
        id: 1,
        name: "band structure",
        pass: dev <= 1e-10 && seconds < 1.0,
        measured: json!({"max_abs_dE": dev, "seconds": seconds}),
    });
    Ok(())
}

fn gaps(report: &mut Vec<Criterion>) -> Result<()> {
    let v = 0.1;
    let p = params(v)?;
    let edge = solve_bands(&p, 2.0, 2, DEFAULT_K_MAX)?;
    let centre = solve_bands(&p, 4.0, 2, DEFAULT_K_MAX)?;
    let g1 = edge.energies[1] - edge.energies[0];
    let g2 = centre.energies[2] - centre.energies[1];
    let r1 = g1 / (v / 2.0) - 1.0;
    let r2 = g2 / (v * v / 32.0) - 1.0;
    report.push(Criterion {
        id: 2,
        name: "band gaps",
        pass: r1.abs() <= 0.01 && r2.abs() <= 0.20,
        measured: json!({"gap_01": g1, "rel_01": r1, "gap_12": g2, "rel_12": r2}),
    });
    Ok(())
}

fn fig_d1(out: &mut CommandOutput, report: &mut Vec<Criterion>) -> Result<()> {
    let p = params(1.0)?;
    let mut tab = Table::new(["q", "E0", "E1", "E0_shallow", "E1_shallow"]);
    let mut dev: f64 = 0.0;
    for i in 1..200 {
        let q = 4.0 * f64::from(i) / 200.0;
        let b = solve_bands(&p, q, 1, DEFAULT_K_MAX)?;
        let s = shallow_bands(&p, q);
        dev = dev.max((b.energies[0] - s.e0).abs()).max((b.energies[1] - s.e1).abs());
        tab.push(vec![q, b.energies[0], b.energies[1], s.e0, s.e1]);
    }
    out.artifacts.push(Artifact::Table("figD1_shallow_bands".into(), tab));
    report.push(Criterion {
        id: 3,
        name: "shallow closed forms",
        pass: dev <= 0.05,
        measured: json!({"max_abs_dE": dev}),
    });
    Ok(())
}

fn fig3(out: &mut CommandOutput) -> Result<()> {
    let n = 256;
    let phi = grid(n);
    let mut tab = Table::new(["V", "phi", "density"]);
    for v in [0.5, 1.0, 3.0, 5.0] {
        let s = bloch_state_on_ring(&params(v)?, &BlochLabel::new(0, 0, 0.0), n)?;
        for (p, c) in phi.iter().zip(&s.amplitudes) {
            tab.push(vec![v, *p, c.norm_sqr()]);
        }
    }
    out.artifacts.push(Artifact::Table("fig3_ground_states".into(), tab));
    Ok(())
}

fn fig5(out: &mut CommandOutput, report: &mut Vec<Criterion>) -> Result<()> {
    let p = params(3.0)?;
    let s = 0.01;
    let t_b = 400.0;
    let mut cfg = ExperimentConfig::new(p, Drive::Ramp { s }, 3.0 * t_b);
    cfg.grid_n = 128;
    let t = Instant::now();
    let trace = run_experiment(&cfg)?;
    let seconds = t.elapsed().as_secs_f64();

    let mut steps = Vec::new();
    for n in 1..=3 {
        let v = trace.value_at(f64::from(n) * t_b).unwrap_or(f64::NAN);
        steps.push((v + 4.0 * f64::from(n)).abs() / (4.0 * f64::from(n)));
    }
    let f: Vec<f64> = trace.times.iter().zip(&trace.values).map(|(t, v)| v + s * t).collect();
    let lag = (t_b / trace.dt).round() as usize;
    let amp = f.iter().cloned().fold(f64::MIN, f64::max) - f.iter().cloned().fold(f64::MAX, f64::min);
    let periodic = (0..f.len().saturating_sub(lag)).map(|i| (f[i + lag] - f[i]).abs()).fold(0.0, f64::max) / amp;
    let step_err = steps.iter().cloned().fold(0.0, f64::max);

    let sched = cfg.schedule()?;
    let pred: Vec<f64> = trace
        .times
        .par_iter()
        .map(|&t| adiabatic_prediction(&p, eta_of_t(&sched, &p, t), PredictionMode::NumericBand))
        .collect::<Result<_>>()?;
    out.artifacts.push(Artifact::Table("fig5_trace".into(), trace_table(&trace, &[("Lz_adiabatic", pred)])));
    report.push(Criterion {
        id: 4,
        name: "angular Bloch staircase",
        pass: step_err <= 0.005 && periodic <= 0.005 && seconds < 120.0,
        measured: json!({"step_rel_err": step_err, "periodic_rel_dev": periodic, "seconds": seconds}),
    });
    Ok(())
}

fn fig7_8(out: &mut CommandOutput, report: &mut Vec<Criterion>) -> Result<()> {
    let v = 0.5;
    let p = params(v)?;
    let s = 0.002;
    let t_b = 2000.0;
    let mut cfg = ExperimentConfig::new(p, Drive::Ramp { s }, 3.0 * t_b);
    cfg.grid_n = 64;
    cfg.dt = 0.01;
    let trace = run_experiment(&cfg)?;
    let plateaus: Vec<f64> = (0..=3).map(|n| trace.value_at(f64::from(n) * t_b).unwrap_or(f64::NAN)).collect();
    let dev = plateaus.iter().enumerate().map(|(n, v)| (v + 4.0 * n as f64).abs()).fold(0.0, f64::max);
    let closed: Vec<f64> = trace.times.iter().map(|&t| crate::analysis::shallow_lz_trace(&p, s, t)).collect();
    out.artifacts.push(Artifact::Table("fig7_trace".into(), trace_table(&trace, &[("Lz_shallow", closed)])));
    report.push(Criterion {
        id: 5,
        name: "shallow staircase",
        pass: dev <= 0.05,
        measured: json!({"plateaus": plateaus, "max_abs_dev": dev}),
    });

    let d = trace_derivative(&trace)?;
    let closed: Vec<f64> = d.times.iter().map(|&t| shallow_lz_rate_trace(&p, s, t)).collect();
    out.artifacts.push(Artifact::Table("fig8_deriv".into(), trace_table(&d, &[("dLz_dt_shallow", closed)])));
    let b = cfg.chirp_rate();
    let sig = detect_bloch_signature(&d)?;
    let amp_expected = 4.0 * b / v;
    let ratio_expected = v / 8.0 * (4f64.powf(1.0 / 3.0) - 1.0).sqrt();
    let e_tb = sig.t_b / t_b - 1.0;
    let e_amp = sig.peak_amplitude / amp_expected - 1.0;
    let e_fwhm = sig.fwhm / sig.t_b / ratio_expected - 1.0;
    out.artifacts.push(Artifact::Json("fig8_signature".into(), serde_json::to_value(&sig).unwrap_or(Value::Null)));
    report.push(Criterion {
        id: 6,
        name: "derivative peaks",
        pass: e_tb.abs() <= 0.01 && e_amp.abs() <= 0.05 && e_fwhm.abs() <= 0.10,
        measured: json!({"t_B": sig.t_b, "rel_t_B": e_tb, "A": sig.peak_amplitude, "rel_A": e_amp, "fwhm_over_t_B": sig.fwhm / sig.t_b, "rel_fwhm": e_fwhm}),
    });

    let cal = calibrate_iv(sig.t_b, sig.peak_amplitude, b, 2, 1.0)?;
    let e_i = cal.inertia / p.inertia - 1.0;
    let e_v = cal.depth / v - 1.0;
    report.push(Criterion {
        id: 10,
        name: "calibration round trip",
        pass: e_i.abs() <= 0.01 && e_v.abs() <= 0.05,
        measured: json!({"I_est": cal.inertia, "rel_I": e_i, "V_est": cal.depth, "rel_V": e_v}),
    });
    Ok(())
}

fn fig_c1(out: &mut CommandOutput, report: &mut Vec<Criterion>) -> Result<()> {
    let p = params(0.5)?;
    let s = critical_ramp_rate(&p);
    let t_b = 4.0 / s;
    let interval = t_b / 100.0;
    let mut cfg = ExperimentConfig::new(p, Drive::Ramp { s }, 4.0 * t_b);
    cfg.grid_n = 64;
    cfg.sample_interval = interval;
    cfg.dt = interval / (interval / 0.005).ceil();
    let trace = run_experiment(&cfg)?;
    let t_lz = (-1f64).exp();
    let mut tab = Table::new(["N_B", "Lz_hbar", "staircase"]);
    let mut worst: f64 = 0.0;
    for n in 0..=4u32 {
        let v = trace.value_at(f64::from(n) * t_b).unwrap_or(f64::NAN);
        let pred = staircase_prediction(t_lz, n, 2)?;
        if n > 0 {
            worst = worst.max((v / pred - 1.0).abs());
        }
        tab.push(vec![f64::from(n), v, pred]);
    }
    out.artifacts.push(Artifact::Table("figC1_trace".into(), trace_table(&trace, &[])));
    out.artifacts.push(Artifact::Table("figC1_staircase".into(), tab));
    report.push(Criterion {
        id: 7,
        name: "critical ramp",
        pass: worst <= 0.02,
        measured: json!({"s_c": s, "max_rel_err": worst}),
    });
    Ok(())
}

fn fig_b(out: &mut CommandOutput, report: &mut Vec<Criterion>) -> Result<()> {
    let p = params(5.0)?;
    let (n, dt) = (64, 0.001);
    let times = linspace(0.15, 1.5, 10);
    let t = Instant::now();
    let f: Vec<f64> = times.par_iter().map(|&t| loading_fidelity(&p, t, n, dt)).collect::<Result<_>>()?;
    let f12 = loading_fidelity(&p, 1.2, n, dt)?;
    let seconds = t.elapsed().as_secs_f64();
    let monotone = f.windows(2).all(|w| w[1] >= w[0]);
    let mut tab = Table::new(["t_L", "F"]);
    for (t, v) in times.iter().zip(&f) {
        tab.push(vec![*t, *v]);
    }
    out.artifacts.push(Artifact::Table("figB2_fidelity".into(), tab));

    let phi = grid(n);
    let target = bloch_state_on_ring(&p, &BlochLabel::new(0, 0, 0.0), n)?;
    let short = load_state(&p, 0.3, n, dt)?;
    let long = load_state(&p, 1.2, n, dt)?;
    let mut tab = Table::new(["phi", "density_tL_0.3", "density_tL_1.2", "density_target"]);
    for (j, x) in phi.iter().enumerate() {
        tab.push(vec![*x, short.amplitudes[j].norm_sqr(), long.amplitudes[j].norm_sqr(), target.amplitudes[j].norm_sqr()]);
    }
    out.artifacts.push(Artifact::Table("figB1_densities".into(), tab));
    report.push(Criterion {
        id: 8,
        name: "loading fidelity",
        pass: f12 >= 0.99 && monotone && seconds < 60.0,
        measured: json!({"F_1.2": f12, "monotone": monotone, "seconds": seconds}),
    });
    Ok(())
}

fn oracle(report: &mut Vec<Criterion>) -> Result<()> {
    let p = params(3.0)?;
    let sched = DriveSchedule::linear_ramp(&p, 3.0, 0.01);
    let span = (0.0, 1200.0);
    let init = bloch_state_on_ring(&p, &BlochLabel::new(0, 0, 0.0), 256)?;
    let ss = evolve(&init, &p, &sched, span, 0.005, 1000)?;
    let mut coeffs = BTreeMap::new();
    coeffs.insert((0, 0), Complex64::new(1.0, 0.0));
    let opts = BandBasisOptions { n_bands: 4, sample_dt: 100.0, ..BandBasisOptions::default() };
    let bb = evolve_band_basis(&coeffs, &p, &sched, span, &opts)?;
    let diff = (ss.lz.last().copied().unwrap_or(f64::NAN) - bb.lz.last().copied().unwrap_or(f64::NAN)).abs();
    let bb_norm = bb.population.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
    report.push(Criterion {
        id: 9,
        name: "propagator oracle",
        pass: diff <= 1e-3 && ss.max_norm_drift <= 1e-10 && bb_norm <= 1e-10,
        measured: json!({"abs_dLz": diff, "split_step_norm_drift": ss.max_norm_drift, "band_basis_norm_drift": bb_norm}),
    });
    Ok(())
}

fn sensing(report: &mut Vec<Criterion>) -> Result<()> {
    let p = params(0.5)?;
    let w = 5e-4;
    let runs = [(0.006, 5000.0), (0.010, 2500.0)];
    let t_bs: Vec<f64> = runs
        .par_iter()
        .map(|&(b, t_f)| {
            let mut c = ExperimentConfig::new(p, Drive::Chirp { b }, t_f);
            c.external_acceleration = Some(w);
            c.grid_n = 64;
            c.dt = 0.01;
            let tr = run_experiment(&c)?;
            Ok(detect_bloch_signature(&trace_derivative(&tr)?)?.t_b)
        })
        .collect::<Result<_>>()?;
    let est = infer_angular_acceleration(runs[0].0, t_bs[0], runs[1].0, t_bs[1], 2)?.omega_dot;
    let exact_tb: Vec<f64> = runs.iter().map(|&(b, _)| 1.0 / predicted_inverse_bloch(&p, b, w)).collect();
    let exact = infer_angular_acceleration(runs[0].0, exact_tb[0], runs[1].0, exact_tb[1], 2)?.omega_dot;
    let rel = est / w - 1.0;
    let rel_exact = exact / w - 1.0;
    report.push(Criterion {
        id: 11,
        name: "sensing round trip",
        pass: rel.abs() <= 0.02 && rel_exact.abs() <= 1e-12,
        measured: json!({"t_B": t_bs, "omega_dot_est": est, "rel": rel, "rel_exact_inputs": rel_exact}),
    });
    Ok(())
}

fn phase(report: &mut Vec<Criterion>) -> Result<()> {
    let p = params(3.0)?;
    let sched = DriveSchedule::linear_ramp(&p, 3.0, 0.01);
    let span = (0.0, 400.0);
    let init = bloch_state_on_ring(&p, &BlochLabel::new(0, 0, 0.0), 128)?;
    let tr = evolve(&init, &p, &sched, span, 0.005, usize::MAX)?;
    let reference = bloch_state_on_ring(&p, &BlochLabel::new(0, 0, 4.0), 128)?;
    let ov = reference.inner(&tr.final_state)?;
    let ph = phases(&p, &sched, span, 400)?;
    let diff = wrap_angle(ov.arg() - ph.dynamical - ph.geometric);
    report.push(Criterion {
        id: 12,
        name: "phase consistency",
        pass: diff.abs() <= 1e-2,
        measured: json!({"overlap_modulus": ov.norm(), "dynamical": ph.dynamical, "geometric": ph.geometric, "diff": diff}),
    });
    Ok(())
}

fn order(report: &mut Vec<Criterion>) -> Result<()> {
    let p = params(3.0)?;
    let sched = DriveSchedule::linear_ramp(&p, 3.0, 0.01);
    let init = bloch_state_on_ring(&p, &BlochLabel::new(0, 0, 0.0), 128)?;
    let run = |dt: f64| {
        let o = EvolveOptions { dt, sample_every: usize::MAX, auto_substep: false, ..EvolveOptions::default() };
        evolve_with(&init, &p, &sched, (0.0, 20.0), &o).map(|t| t.final_state)
    };
    let reference = run(0.01 / 16.0)?;
    let errs: Vec<f64> = [0.01, 0.005, 0.0025]
        .par_iter()
        .map(|&dt| run(dt)?.distance(&reference))
        .collect::<Result<_>>()?;
    let orders = [(errs[0] / errs[1]).log2(), (errs[1] / errs[2]).log2()];
    report.push(Criterion {
        id: 13,
        name: "convergence order",
        pass: orders.iter().all(|o| *o >= 1.9),
        measured: json!({"errors": errs, "orders": orders}),
    });
    Ok(())
}
