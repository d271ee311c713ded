//! The load-rotate-measure experiment, loading fidelity, adiabaticity
//! guards and Landau–Zener analytics.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::{ObservableTrace, TraceKind, TraceMetadata};
use crate::bands::{bloch_state_on_ring, BlochLabel};
use crate::error::{Error, Result};
use crate::model::{chirp_rate_for_ramp, ramp_for_chirp, DriveSchedule, Program, RingLatticeParams, Segment};
use crate::propagator::{evolve_with, EvolveOptions, Frame};
use crate::special::ln_gamma;
use crate::wavefunction::WaveFunction;

/// Margin a guard must reach to count as adiabatic.
pub const DEFAULT_ADIABATIC_THRESHOLD: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Drive {
    /// `η(t) = s·t` realised through the chirp alone.
    Ramp { s: f64 },
    /// `Δω(t) = -B·t`.
    Chirp { b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadingMode {
    /// Linear depth ramp over `t_L` from the uniform ring state.
    Ramp,
    /// Start the rotation stage in the ground Bloch state.
    GroundState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub params: RingLatticeParams,
    pub load_time: f64,
    pub drive: Drive,
    pub rotation_time: f64,
    /// External angular acceleration `Ω̇`; needs a chirp drive.
    pub external_acceleration: Option<f64>,
    pub grid_n: usize,
    pub dt: f64,
    pub sample_interval: f64,
    pub loading: LoadingMode,
    pub measure_only_final: bool,
    pub adiabatic_threshold: f64,
}

impl ExperimentConfig {
    pub fn new(params: RingLatticeParams, drive: Drive, rotation_time: f64) -> Self {
        Self {
            params,
            load_time: 0.0,
            drive,
            rotation_time,
            external_acceleration: None,
            grid_n: 256,
            dt: 0.005,
            sample_interval: 1.0,
            loading: LoadingMode::GroundState,
            measure_only_final: false,
            adiabatic_threshold: DEFAULT_ADIABATIC_THRESHOLD,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.load_time >= 0.0 && self.load_time.is_finite()) {
            return Err(Error::Validation(format!("load_time must be ≥ 0, got {}", self.load_time)));
        }
        if !(self.rotation_time >= 0.0 && self.rotation_time.is_finite()) {
            return Err(Error::Validation(format!("rotation_time must be ≥ 0, got {}", self.rotation_time)));
        }
        match self.drive {
            Drive::Ramp { s } if !s.is_finite() => return Err(Error::Validation("ramp rate s must be finite".into())),
            Drive::Chirp { b } if !b.is_finite() => return Err(Error::Validation("chirp constant B must be finite".into())),
            _ => {}
        }
        if let Some(w) = self.external_acceleration {
            if !w.is_finite() {
                return Err(Error::Validation("external_acceleration must be finite".into()));
            }
            if matches!(self.drive, Drive::Ramp { .. }) {
                return Err(Error::Validation(
                    "external_acceleration needs a chirp constant B, not a ramp rate s".into(),
                ));
            }
        }
        if self.loading == LoadingMode::Ramp && self.load_time == 0.0 && self.params.depth > 0.0 {
            return Err(Error::Validation("ramp loading needs load_time > 0".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Validation(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.sample_interval >= self.dt) {
            return Err(Error::Validation("sample_interval must be at least dt".into()));
        }
        if !(self.adiabatic_threshold > 0.0) {
            return Err(Error::Validation("adiabatic threshold must be positive".into()));
        }
        crate::wavefunction::check_commensurate(self.grid_n, self.params.l)
    }

    /// Ramp rate `s = dη/dt` during rotation.
    pub fn ramp_rate(&self) -> f64 {
        match self.drive {
            Drive::Ramp { s } => s,
            Drive::Chirp { b } => ramp_for_chirp(&self.params, b, self.external_acceleration.unwrap_or(0.0)),
        }
    }

    pub fn chirp_rate(&self) -> f64 {
        match self.drive {
            Drive::Ramp { s } => chirp_rate_for_ramp(&self.params, s),
            Drive::Chirp { b } => b,
        }
    }

    /// Depth ramp on `[-t_L, 0]`, then rotation and chirp from `t = 0`.
    pub fn schedule(&self) -> Result<DriveSchedule> {
        let v = self.params.depth;
        let t_l = self.load_time;
        let depth = if self.loading == LoadingMode::Ramp && t_l > 0.0 {
            Program::piecewise(vec![
                (-t_l, Segment::Linear { value: 0.0, slope: v / t_l }),
                (0.0, Segment::Constant { value: v }),
            ])?
        } else {
            Program::constant(v)
        };
        let ramp_on = |slope: f64| -> Result<Program> {
            Program::piecewise(vec![
                (f64::MIN, Segment::Constant { value: 0.0 }),
                (0.0, Segment::Linear { value: 0.0, slope }),
            ])
        };
        let rotation = ramp_on(self.external_acceleration.unwrap_or(0.0))?;
        let chirp = ramp_on(-self.chirp_rate())?;
        Ok(DriveSchedule::new(depth, rotation, chirp, 0.0))
    }

    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(self).unwrap_or_default();
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

fn propagation_options(cfg: &ExperimentConfig, sample_every: usize, frame: Frame) -> EvolveOptions {
    EvolveOptions {
        dt: cfg.dt,
        sample_every,
        frame,
        max_dt: cfg.dt.max(EvolveOptions::default().max_dt),
        ..EvolveOptions::default()
    }
}

fn loaded_state(cfg: &ExperimentConfig, schedule: &DriveSchedule) -> Result<WaveFunction> {
    match cfg.loading {
        LoadingMode::GroundState => bloch_state_on_ring(&cfg.params, &BlochLabel::new(0, 0, 0.0), cfg.grid_n),
        LoadingMode::Ramp => {
            let uniform = WaveFunction::uniform(cfg.grid_n)?;
            if cfg.load_time == 0.0 {
                return Ok(uniform);
            }
            let opts = propagation_options(cfg, usize::MAX, Frame::Lab);
            Ok(evolve_with(&uniform, &cfg.params, schedule, (-cfg.load_time, 0.0), &opts)?.final_state)
        }
    }
}

/// Loads, rotates for `t_f` and returns `⟨L_z⟩(t)` over the rotation stage.
/// Guard breaches are attached to the trace as warnings.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ObservableTrace> {
    cfg.validate()?;
    let schedule = cfg.schedule()?;
    let mut warnings = Vec::new();
    if cfg.loading == LoadingMode::Ramp {
        let g = check_adiabaticity(&cfg.params, Stage::Loading { load_time: cfg.load_time }, cfg.adiabatic_threshold);
        if !g.ok {
            warnings.push(format!(
                "loading ramp not adiabatic: margin {:.3} below {}",
                g.margin, cfg.adiabatic_threshold
            ));
        }
    }
    let s = cfg.ramp_rate();
    let g = check_adiabaticity(&cfg.params, Stage::Rotation { ramp_rate: s }, cfg.adiabatic_threshold);
    if !g.ok {
        warnings.push(format!(
            "rotation ramp not adiabatic: s_c/s = {:.3} below {}",
            g.margin, cfg.adiabatic_threshold
        ));
    }

    let start = loaded_state(cfg, &schedule)?;
    let sample_every = ((cfg.sample_interval / cfg.dt).round() as usize).max(1);
    let every = if cfg.measure_only_final { usize::MAX } else { sample_every };
    let opts = propagation_options(cfg, every, Frame::Corotating);
    let traj = evolve_with(&start, &cfg.params, &schedule, (0.0, cfg.rotation_time), &opts)?;
    let (mut times, mut values) = (traj.times, traj.lz);
    if cfg.measure_only_final && cfg.rotation_time > 0.0 {
        times.push(traj.final_time);
        values.push(crate::analysis::mean_angular_momentum(&traj.final_state, cfg.params.hbar()));
    }
    let mut trace = ObservableTrace::new(times, values, TraceKind::AngularMomentum)?;
    trace.metadata = TraceMetadata {
        fingerprint: cfg.fingerprint(),
        ramp_rate: Some(s),
        chirp_rate: Some(cfg.chirp_rate()),
        params: Some(cfg.params),
        warnings,
    };
    Ok(trace)
}

/// State at the end of a linear depth ramp of duration `t_L` from the
/// uniform state.
pub fn load_state(params: &RingLatticeParams, load_time: f64, grid_n: usize, dt: f64) -> Result<WaveFunction> {
    if !(load_time > 0.0) {
        return Err(Error::InvalidParameter(format!("load time must be positive, got {load_time}")));
    }
    let mut cfg = ExperimentConfig::new(*params, Drive::Ramp { s: 0.0 }, 0.0);
    cfg.load_time = load_time;
    cfg.loading = LoadingMode::Ramp;
    cfg.grid_n = grid_n;
    cfg.dt = dt;
    cfg.sample_interval = dt;
    cfg.validate()?;
    loaded_state(&cfg, &cfg.schedule()?)
}

/// `|⟨Θ_{0,0}|Θ(0)⟩|²` after [`load_state`].
pub fn loading_fidelity(params: &RingLatticeParams, load_time: f64, grid_n: usize, dt: f64) -> Result<f64> {
    let loaded = load_state(params, load_time, grid_n, dt)?;
    let target = bloch_state_on_ring(params, &BlochLabel::new(0, 0, 0.0), grid_n)?;
    Ok(target.inner(&loaded)?.norm_sqr())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum Stage {
    Loading { load_time: f64 },
    Rotation { ramp_rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticCheck {
    pub ok: bool,
    pub margin: f64,
}

/// `margin = threshold quantity / actual`; ok iff `margin ≥ threshold`.
///
/// Loading compares `(V/E_r)(ħ/(E_r t_L))` with `32√2`; rotation compares
/// `s` with `s_c`.
pub fn check_adiabaticity(params: &RingLatticeParams, stage: Stage, threshold: f64) -> AdiabaticCheck {
    let er = params.recoil_energy;
    let margin = match stage {
        Stage::Loading { load_time } => {
            let lhs = params.depth / er * params.hbar() / (er * load_time);
            if params.depth == 0.0 {
                f64::INFINITY
            } else if load_time <= 0.0 {
                0.0
            } else {
                32.0 * SQRT_2 / lhs
            }
        }
        Stage::Rotation { ramp_rate } => {
            if ramp_rate == 0.0 {
                f64::INFINITY
            } else {
                critical_ramp_rate(params) / ramp_rate.abs()
            }
        }
    };
    AdiabaticCheck { ok: margin >= threshold, margin }
}

/// `s_c = πlV²/(32ħE_r)`.
pub fn critical_ramp_rate(params: &RingLatticeParams) -> f64 {
    PI * params.lf() * params.depth * params.depth / (32.0 * params.hbar() * params.recoil_energy)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LZReport {
    pub gamma: f64,
    pub t_lz: f64,
    pub phi_lz: f64,
    pub s_c: f64,
    /// `s_c/s`.
    pub adiabatic_margin: f64,
}

/// Landau–Zener parameter, transition probability and phase of one
/// zone-edge passage at ramp rate `s`.
pub fn lz_analytics(params: &RingLatticeParams, s: f64) -> Result<LZReport> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidParameter(format!("ramp rate must be positive, got {s}")));
    }
    if !(params.depth > 0.0) {
        return Err(Error::InvalidParameter("Landau–Zener analytics need V > 0".into()));
    }
    let g = params.depth / 4.0;
    let gamma = g * g / (params.hbar() * 4.0 * params.recoil_energy * s / params.lf());
    let s_c = critical_ramp_rate(params);
    Ok(LZReport {
        gamma,
        t_lz: (-2.0 * PI * gamma).exp(),
        phi_lz: lz_phase(gamma),
        s_c,
        adiabatic_margin: s_c / s,
    })
}

/// `π/4 + arg Γ(1 - iγ) + γ(ln γ - 1)` with the continuous branch of `arg Γ`.
pub fn lz_phase(gamma: f64) -> f64 {
    if gamma == 0.0 {
        return PI / 4.0;
    }
    PI / 4.0 + ln_gamma(Complex64::new(1.0, -gamma)).im + gamma * (gamma.ln() - 1.0)
}

/// `⟨L_z⟩/ħ` after `N_B` Bloch periods with loss `T` per zone-edge passage.
pub fn staircase_prediction(t_lz: f64, n_b: u32, l: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&t_lz) {
        return Err(Error::InvalidParameter(format!("transition probability {t_lz} outside [0, 1]")));
    }
    let keep = 1.0 - t_lz;
    let tail: f64 = (0..n_b).map(|j| j as f64 * keep.powi(j as i32)).sum();
    Ok(-2.0 * f64::from(l) * (f64::from(n_b) * keep.powi(n_b as i32) + t_lz * tail))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(v: f64) -> RingLatticeParams {
        RingLatticeParams::dimensionless(v, 2).unwrap()
    }

    #[test]
    fn lz_report_values() {
        let r = lz_analytics(&p(0.5), 0.002).unwrap();
        assert_relative_eq!(r.gamma, 3.90625, max_relative = 1e-14);
        assert_relative_eq!(r.t_lz, (-2.0 * PI * 3.90625f64).exp(), max_relative = 1e-12);
        assert_relative_eq!(r.s_c, PI / 64.0, max_relative = 1e-14);
        assert!((r.adiabatic_margin - 24.54).abs() < 0.01);
        let c = lz_analytics(&p(0.5), r.s_c).unwrap();
        assert_relative_eq!(c.gamma, 0.5 / PI, max_relative = 1e-12);
        assert_relative_eq!(c.t_lz, (-1.0f64).exp(), max_relative = 1e-12);
        assert!(lz_analytics(&p(0.0), 0.1).is_err());
        assert!(lz_analytics(&p(0.5), 0.0).is_err());
    }

    #[test]
    fn lz_phase_reference_values() {
        for (g, want) in [
            (0.5 / PI, 0.42400819812875515),
            (3.90625, 0.021380857002319888),
            (5.0, 0.016689150953025705),
            (20.0, 0.0041670141373714451),
        ] {
            assert!((lz_phase(g) - want).abs() < 1e-10, "γ = {g}: {} vs {want}", lz_phase(g));
        }
    }

    #[test]
    fn staircase_values() {
        let t = (-1.0f64).exp();
        assert_eq!(staircase_prediction(0.0, 3, 2).unwrap(), -12.0);
        assert_relative_eq!(staircase_prediction(t, 1, 2).unwrap(), -4.0 * (1.0 - t), max_relative = 1e-14);
        assert_relative_eq!(staircase_prediction(t, 2, 2).unwrap(), -4.0 * (1.0 - t) * (2.0 - t), max_relative = 1e-14);
        assert!(staircase_prediction(1.5, 1, 2).is_err());
    }

    #[test]
    fn adiabaticity_guards() {
        let g = check_adiabaticity(&p(5.0), Stage::Loading { load_time: 1.2 }, 10.0);
        assert!(g.ok && (g.margin - 10.86).abs() < 0.01);
        let r = check_adiabaticity(&p(0.5), Stage::Rotation { ramp_rate: 0.002 }, 10.0);
        assert!(r.ok && (r.margin - 24.54).abs() < 0.01);
        let c = check_adiabaticity(&p(0.5), Stage::Rotation { ramp_rate: PI / 64.0 }, 10.0);
        assert!(!c.ok && (c.margin - 1.0).abs() < 1e-12);
        assert!(check_adiabaticity(&p(0.0), Stage::Loading { load_time: 0.0 }, 10.0).ok);
    }

    #[test]
    fn config_validation() {
        let mut c = ExperimentConfig::new(p(1.0), Drive::Ramp { s: 0.01 }, 10.0);
        assert!(c.validate().is_ok());
        c.external_acceleration = Some(1e-3);
        assert!(matches!(c.validate(), Err(Error::Validation(_))));
        c.drive = Drive::Chirp { b: 0.01 };
        assert!(c.validate().is_ok());
        assert_relative_eq!(c.ramp_rate(), 2.0 * (0.01 / 4.0 - 1e-3));
        c.rotation_time = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn schedule_is_quiet_during_loading() {
        let mut c = ExperimentConfig::new(p(2.0), Drive::Chirp { b: 0.02 }, 5.0);
        c.external_acceleration = Some(0.003);
        c.loading = LoadingMode::Ramp;
        c.load_time = 2.0;
        let s = c.schedule().unwrap();
        assert_eq!(s.rotation.eval(-1.0), 0.0);
        assert_eq!(s.chirp.eval(-1.0), 0.0);
        assert_relative_eq!(s.depth.eval(-1.0), 1.0);
        assert_relative_eq!(s.depth.eval(3.0), 2.0);
        assert_relative_eq!(s.chirp.eval(3.0), -0.06);
        assert_relative_eq!(s.rotation.eval(3.0), 0.009);
    }

    #[test]
    fn stationary_experiment_stays_at_zero() {
        let mut c = ExperimentConfig::new(p(1.0), Drive::Ramp { s: 0.0 }, 20.0);
        c.grid_n = 64;
        let tr = run_experiment(&c).unwrap();
        assert!(tr.values.iter().all(|x| x.abs() < 1e-10));
        assert_eq!(tr.len(), 21);
        assert!(tr.metadata.warnings.is_empty());
    }

    #[test]
    fn empty_lattice_loads_perfectly() {
        assert!((loading_fidelity(&p(0.0), 0.7, 32, 0.005).unwrap() - 1.0).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn transition_probability_increases_with_ramp_rate(s in 1e-3f64..1.0, f in 1.01f64..3.0) {
            let a = lz_analytics(&p(0.5), s).unwrap().t_lz;
            let b = lz_analytics(&p(0.5), s * f).unwrap().t_lz;
            proptest::prop_assert!(b >= a);
        }

        #[test]
        fn staircase_between_limits(t in 0.0f64..1.0, n in 0u32..8) {
            let v = staircase_prediction(t, n, 2).unwrap();
            proptest::prop_assert!(v <= 1e-12 && v >= -4.0 * n as f64 - 1e-12);
        }
    }
}
