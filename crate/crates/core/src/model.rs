//! Effective one-dimensional ring-lattice model: unit system, model
//! parameters and the time programs that drive the lattice.
//!
//! Everything downstream is written in terms of `hbar`, `inertia` and `depth`
//! of a [`RingLatticeParams`], so the same code runs in dimensionless units
//! (`hbar = 1`, energies in `E_r`, times in `1/omega_r`) or in physical units.
//! The simulation front ends convert to dimensionless units at the boundary.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

/// Reduced Planck constant in SI units (J s).
pub const HBAR_SI: f64 = 1.054_571_817e-34;
/// Mass of a ⁸⁷Rb atom in kg.
pub const RB87_MASS_KG: f64 = 1.443_160_648e-25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitMode {
    Dimensionless,
    Physical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitSystem {
    pub mode: UnitMode,
    pub hbar: f64,
    /// Energy unit expressed in the caller's units (`E_r` once parameters are known).
    pub energy_scale: f64,
    /// Time unit expressed in the caller's units (`1/omega_r` once parameters are known).
    pub time_scale: f64,
}

impl UnitSystem {
    pub fn dimensionless() -> Self {
        Self {
            mode: UnitMode::Dimensionless,
            hbar: 1.0,
            energy_scale: 1.0,
            time_scale: 1.0,
        }
    }

    /// Physical units with the given value of ħ (use [`HBAR_SI`] for SI).
    pub fn physical(hbar: f64) -> Self {
        Self {
            mode: UnitMode::Physical,
            hbar,
            energy_scale: 1.0,
            time_scale: 1.0,
        }
    }

    pub fn si() -> Self {
        Self::physical(HBAR_SI)
    }
}

/// Parameters of the effective model
/// `iħ∂Φ/∂t = [-(ħ²/2I)∂²_φ + V cos²(lφ - a(t)) + Ω(t) iħ∂_φ] Φ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingLatticeParams {
    pub inertia: f64,
    pub depth: f64,
    pub l: u32,
    pub recoil_energy: f64,
    pub recoil_frequency: f64,
    pub units: UnitSystem,
}

impl RingLatticeParams {
    /// Builds the parameter set and its derived recoil scales.
    ///
    /// In dimensionless mode energies are measured in `E_r` and times in
    /// `1/omega_r`, which pins the inertia to `l²/2`.
    pub fn new(inertia: f64, depth: f64, l: u32, units: UnitSystem) -> Result<Self> {
        if l < 1 {
            return Err(Error::InvalidParameter("azimuthal_l must be ≥ 1".into()));
        }
        if !(inertia > 0.0) || !inertia.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "inertia_I must be positive and finite, got {inertia}"
            )));
        }
        if !(depth >= 0.0) || !depth.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "depth_V must be non-negative and finite, got {depth}"
            )));
        }
        if !(units.hbar > 0.0) {
            return Err(Error::InvalidParameter("hbar must be positive".into()));
        }
        let lf = f64::from(l);
        let mut units = units;
        if units.mode == UnitMode::Dimensionless {
            let expected = lf * lf / 2.0;
            if units.hbar != 1.0 || ((inertia - expected) / expected).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "dimensionless mode requires hbar = 1 and inertia_I = l²/2 = {expected}, got {inertia}"
                )));
            }
        }
        let recoil_energy = units.hbar * units.hbar * lf * lf / (2.0 * inertia);
        let recoil_frequency = recoil_energy / units.hbar;
        if units.mode == UnitMode::Dimensionless {
            units.energy_scale = 1.0;
            units.time_scale = 1.0;
        } else {
            units.energy_scale = recoil_energy;
            units.time_scale = 1.0 / recoil_frequency;
        }
        Ok(Self {
            inertia,
            depth,
            l,
            recoil_energy,
            recoil_frequency,
            units,
        })
    }

    /// Dimensionless parameters: `ħ = 1`, `I = l²/2`, depth in units of `E_r`.
    pub fn dimensionless(depth: f64, l: u32) -> Result<Self> {
        let lf = f64::from(l.max(1));
        Self::new(lf * lf / 2.0, depth, l, UnitSystem::dimensionless())
    }

    pub fn hbar(&self) -> f64 {
        self.units.hbar
    }

    pub fn lf(&self) -> f64 {
        f64::from(self.l)
    }

    /// Same physics expressed in units of `E_r` and `1/omega_r`.
    pub fn to_dimensionless(&self) -> Self {
        Self::dimensionless(self.depth / self.recoil_energy, self.l)
            .expect("validated parameters convert to dimensionless form")
    }

    pub fn with_depth(&self, depth: f64) -> Result<Self> {
        Self::new(self.inertia, depth, self.l, self.units)
    }

    /// Kinetic energy `ħ²(q - 2lk)²/(2I)` of plane wave `k` at quasi momentum `q`.
    pub fn free_energy(&self, q: f64, k: i64) -> f64 {
        let p = q - 2.0 * self.lf() * k as f64;
        self.hbar() * self.hbar() * p * p / (2.0 * self.inertia)
    }
}

/// Convenience wrapper matching the operation naming of the model.
pub fn make_params(inertia: f64, depth: f64, l: u32, units: UnitSystem) -> Result<RingLatticeParams> {
    RingLatticeParams::new(inertia, depth, l, units)
}

/// One analytic piece of a time program.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Segment {
    Constant { value: f64 },
    /// `value + slope·(t - start)` on the segment.
    Linear { value: f64, slope: f64 },
}

impl Segment {
    fn eval(&self, start: f64, t: f64) -> f64 {
        match *self {
            Segment::Constant { value } => value,
            Segment::Linear { value, slope } => value + slope * (t - start),
        }
    }

    fn slope(&self) -> f64 {
        match *self {
            Segment::Constant { .. } => 0.0,
            Segment::Linear { slope, .. } => slope,
        }
    }

    /// Exact integral over `[a, b]` of the segment anchored at `start`.
    fn integral(&self, start: f64, a: f64, b: f64) -> f64 {
        match *self {
            Segment::Constant { value } => value * (b - a),
            Segment::Linear { value, slope } => {
                let (xa, xb) = (a - start, b - start);
                value * (b - a) + 0.5 * slope * (xb * xb - xa * xa)
            }
        }
    }
}

pub type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A scalar function of time.
///
/// Piecewise programs hold `(start, segment)` pairs sorted by start time;
/// segment `i` covers `[start_i, start_{i+1})` and the first segment also
/// covers all earlier times.
#[derive(Clone)]
pub enum Program {
    Piecewise(Vec<(f64, Segment)>),
    Custom(TimeFn),
}

impl fmt::Debug for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Program::Piecewise(p) => f.debug_tuple("Piecewise").field(p).finish(),
            Program::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Program {
    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn constant(value: f64) -> Self {
        Program::Piecewise(vec![(0.0, Segment::Constant { value })])
    }

    /// `slope·t` for all `t`.
    pub fn linear(slope: f64) -> Self {
        Program::Piecewise(vec![(0.0, Segment::Linear { value: 0.0, slope })])
    }

    pub fn piecewise(mut segments: Vec<(f64, Segment)>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidParameter("piecewise program needs at least one segment".into()));
        }
        if segments.iter().any(|(s, _)| !s.is_finite()) {
            return Err(Error::InvalidParameter("segment start times must be finite".into()));
        }
        segments.sort_by(|a, b| a.0.total_cmp(&b.0));
        if segments.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParameter("duplicate segment start time".into()));
        }
        Ok(Program::Piecewise(segments))
    }

    pub fn custom<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Program::Custom(Arc::new(f))
    }

    fn segment_index(segs: &[(f64, Segment)], t: f64) -> usize {
        match segs.partition_point(|(s, _)| *s <= t) {
            0 => 0,
            i => i - 1,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Program::Piecewise(segs) => {
                let (start, seg) = segs[Self::segment_index(segs, t)];
                seg.eval(start, t)
            }
            Program::Custom(f) => f(t),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            Program::Piecewise(segs) => segs[Self::segment_index(segs, t)].1.slope(),
            Program::Custom(f) => {
                let h = 1e-4 * t.abs().max(1.0);
                (f(t - 2.0 * h) - 8.0 * f(t - h) + 8.0 * f(t + h) - f(t + 2.0 * h)) / (12.0 * h)
            }
        }
    }

    pub fn is_polynomial(&self) -> bool {
        matches!(self, Program::Piecewise(_))
    }

    /// `∫_a^b f(t) dt`; exact for piecewise programs.
    pub fn integral(&self, a: f64, b: f64) -> Result<f64> {
        if b < a {
            return Ok(-self.integral(b, a)?);
        }
        match self {
            Program::Piecewise(segs) => {
                let mut total = 0.0;
                let mut lo = a;
                let mut i = Self::segment_index(segs, a);
                while lo < b {
                    let hi = segs.get(i + 1).map_or(b, |(s, _)| s.min(b));
                    let (start, seg) = segs[i];
                    total += seg.integral(start, lo, hi);
                    lo = hi;
                    i += 1;
                }
                Ok(total)
            }
            Program::Custom(f) => {
                let f = f.clone();
                quadrature::integrate(move |t| f(t), a, b, 1e-12, 1e-12).map(|r| r.value)
            }
        }
    }

    /// Times inside `(a, b)` where the piecewise form changes segment.
    pub fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        match self {
            Program::Piecewise(segs) => segs.iter().map(|(s, _)| *s).filter(|s| *s > a && *s < b).collect(),
            Program::Custom(_) => Vec::new(),
        }
    }
}

/// Time programs for lattice depth `V(t)`, external rotation `Ω(t)` and
/// beam chirp `Δω(t)`, plus the origin `t0` of the chirp phase.
#[derive(Debug, Clone)]
pub struct DriveSchedule {
    pub depth: Program,
    pub rotation: Program,
    pub chirp: Program,
    pub chirp_origin: f64,
}

impl DriveSchedule {
    pub fn new(depth: Program, rotation: Program, chirp: Program, chirp_origin: f64) -> Self {
        Self {
            depth,
            rotation,
            chirp,
            chirp_origin,
        }
    }

    /// Constant depth with no rotation and no chirp.
    pub fn stationary(depth: f64) -> Self {
        Self::new(Program::constant(depth), Program::zero(), Program::zero(), 0.0)
    }

    /// Constant depth with the linear chirp `Δω(t) = -B·t`.
    pub fn linear_chirp(depth: f64, chirp_rate: f64) -> Self {
        Self::new(Program::constant(depth), Program::zero(), Program::linear(-chirp_rate), 0.0)
    }

    /// Constant depth with `η(t) = s·t`, realised as the chirp `B = 2lħs/I`.
    pub fn linear_ramp(params: &RingLatticeParams, depth: f64, ramp_rate: f64) -> Self {
        Self::linear_chirp(depth, chirp_rate_for_ramp(params, ramp_rate))
    }

    /// Checks that every program is finite and the depth non-negative on `[t0, t1]`.
    pub fn validate(&self, t0: f64, t1: f64) -> Result<()> {
        let mut probes: Vec<f64> = vec![t0, t1];
        for p in [&self.depth, &self.rotation, &self.chirp] {
            probes.extend(p.breakpoints(t0, t1));
            if !p.is_polynomial() {
                probes.extend((0..=256).map(|i| t0 + (t1 - t0) * i as f64 / 256.0));
            }
        }
        for &t in &probes {
            // Segment values are continuous from the right; probe both sides of breakpoints.
            for tt in [t, t - 1e-12 * t.abs().max(1.0)] {
                if tt < t0 {
                    continue;
                }
                let (v, w, c) = (self.depth.eval(tt), self.rotation.eval(tt), self.chirp.eval(tt));
                if !(v.is_finite() && w.is_finite() && c.is_finite()) {
                    return Err(Error::InvalidParameter(format!("drive program not finite at t = {tt}")));
                }
                if v < 0.0 {
                    return Err(Error::InvalidParameter(format!("depth program negative at t = {tt}: {v}")));
                }
            }
        }
        Ok(())
    }

    /// Effective angular velocity `Ω_eff = Ω + Δω/(2l)`.
    pub fn omega_eff(&self, params: &RingLatticeParams, t: f64) -> f64 {
        self.rotation.eval(t) + self.chirp.eval(t) / (2.0 * params.lf())
    }

    pub fn omega_eff_rate(&self, params: &RingLatticeParams, t: f64) -> f64 {
        self.rotation.derivative(t) + self.chirp.derivative(t) / (2.0 * params.lf())
    }
}

/// Lattice displacement phase `a(t) = ½∫_{t0}^{t} Δω(t') dt'`.
pub fn chirp_phase(schedule: &DriveSchedule, t: f64) -> Result<f64> {
    Ok(0.5 * schedule.chirp.integral(schedule.chirp_origin, t)?)
}

/// `η(t) = -(I/ħ) Ω_eff(t)`.
pub fn eta_of_t(schedule: &DriveSchedule, params: &RingLatticeParams, t: f64) -> f64 {
    -params.inertia / params.hbar() * schedule.omega_eff(params, t)
}

/// `s(t) = dη/dt`.
pub fn ramp_rate(schedule: &DriveSchedule, params: &RingLatticeParams, t: f64) -> f64 {
    -params.inertia / params.hbar() * schedule.omega_eff_rate(params, t)
}

/// Chirp constant `B` producing the ramp rate `s` without external rotation: `B = 2lħs/I`.
pub fn chirp_rate_for_ramp(params: &RingLatticeParams, ramp_rate: f64) -> f64 {
    2.0 * params.lf() * params.hbar() * ramp_rate / params.inertia
}

/// Ramp rate produced by chirp `B` and external angular acceleration `Ω̇`:
/// `s = (I/ħ)(B/(2l) - Ω̇)`.
pub fn ramp_for_chirp(params: &RingLatticeParams, chirp_rate: f64, omega_dot: f64) -> f64 {
    params.inertia / params.hbar() * (chirp_rate / (2.0 * params.lf()) - omega_dot)
}

/// Bloch period `t_B = 2l/s`.
pub fn bloch_time(params: &RingLatticeParams, ramp_rate: f64) -> f64 {
    2.0 * params.lf() / ramp_rate
}
