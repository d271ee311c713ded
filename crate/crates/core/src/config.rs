//! Run configuration: a JSON document with `model`, `schedule`, `numerics`,
//! `analysis` and `sweep` sections. The common physical keys (`l`, `V`, `I`,
//! `s`, `B`, `omega_dot`, `t_f`, `t_L`) may also sit at the top level.
//! Times may be written relative to the Bloch period, e.g. `"3 t_B"`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::analysis::{PredictionMode, DEFAULT_PEAK_THRESHOLD};
use crate::error::{Error, Result};
use crate::model::{bloch_time, ramp_for_chirp, RingLatticeParams, UnitMode, UnitSystem, HBAR_SI};
use crate::protocols::{Drive, ExperimentConfig, LoadingMode, DEFAULT_ADIABATIC_THRESHOLD};

const SECTIONS: [&str; 5] = ["model", "schedule", "numerics", "analysis", "sweep"];

/// Keys that may be swept, by canonical name.
pub const SWEEPABLE: [&str; 8] = ["V", "I", "s", "B", "omega_dot", "t_f", "t_L", "grid_N"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SplitStep,
    BandBasis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Numerics {
    pub grid_n: usize,
    pub dt: f64,
    pub sample_interval: f64,
    pub k_max: usize,
    pub n_max: usize,
    pub q_points: usize,
    pub q_min: f64,
    pub q_max: f64,
    pub band: usize,
    pub m: i64,
    pub eta0: f64,
    pub snapshots: usize,
    pub method: Method,
    pub n_bands: usize,
    pub rtol: f64,
    pub atol: f64,
    pub n_periods: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSettings {
    pub peak_threshold: f64,
    pub adiabatic_threshold: f64,
    pub detect: bool,
    pub prediction: PredictionMode,
    /// Loading times for `load-check`.
    pub load_times: Vec<f64>,
    /// Measured Bloch periods supplied directly to `calibrate`/`sense`.
    pub t_b: Vec<f64>,
    pub peak_amplitude: Option<f64>,
    pub fixed_slope: bool,
}

/// A fully resolved configuration in dimensionless units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub params: RingLatticeParams,
    pub drive: Option<Drive>,
    /// All chirp constants given (more than one for `sense`).
    pub chirps: Vec<f64>,
    pub omega_dot: Option<f64>,
    pub rotation_time: f64,
    pub load_time: f64,
    pub loading: LoadingMode,
    pub measure_only_final: bool,
    pub numerics: Numerics,
    pub analysis: AnalysisSettings,
    /// Physical-unit scales used for the conversion (1 in dimensionless mode).
    pub energy_unit: f64,
    pub time_unit: f64,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

impl RunConfig {
    pub fn ramp_rate(&self) -> Option<f64> {
        self.drive.map(|d| match d {
            Drive::Ramp { s } => s,
            Drive::Chirp { b } => ramp_for_chirp(&self.params, b, self.omega_dot.unwrap_or(0.0)),
        })
    }

    pub fn bloch_time(&self) -> Option<f64> {
        self.ramp_rate().filter(|s| *s > 0.0).map(|s| bloch_time(&self.params, s))
    }

    pub fn experiment(&self) -> Result<ExperimentConfig> {
        let drive = self
            .drive
            .ok_or_else(|| Error::Validation("this command needs a ramp rate s or a chirp constant B".into()))?;
        let cfg = ExperimentConfig {
            params: self.params,
            load_time: self.load_time,
            drive,
            rotation_time: self.rotation_time,
            external_acceleration: self.omega_dot,
            grid_n: self.numerics.grid_n,
            dt: self.numerics.dt,
            sample_interval: self.numerics.sample_interval,
            loading: self.loading,
            measure_only_final: self.measure_only_final,
            adiabatic_threshold: self.analysis.adiabatic_threshold,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Same configuration with a different chirp constant.
    pub fn with_chirp(&self, b: f64) -> Self {
        let mut c = self.clone();
        c.drive = Some(Drive::Chirp { b });
        c.chirps = vec![b];
        c
    }
}

/// One point of a sweep: canonical key and raw (config-unit) value.
pub type SweepPoint = Vec<(String, f64)>;

#[derive(Debug, Clone)]
pub struct ConfigDocument {
    pub raw: Value,
    pub strict: bool,
    pub base: RunConfig,
    pub sweep: Vec<SweepPoint>,
}

impl ConfigDocument {
    pub fn resolve_point(&self, point: &SweepPoint) -> Result<RunConfig> {
        resolve(&self.raw, self.strict, point)
    }
}

pub fn parse_config_file(path: &Path, strict: bool) -> Result<ConfigDocument> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read config {}: {e}", path.display())))?;
    parse_config_str(&text, strict)
}

pub fn parse_config_str(text: &str, strict: bool) -> Result<ConfigDocument> {
    let raw: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if !raw.is_object() {
        return Err(Error::Parse { line: 1, column: 1, message: "config must be a JSON object".into() });
    }
    let base = resolve(&raw, strict, &Vec::new())?;
    let sweep = sweep_points(&raw)?;
    Ok(ConfigDocument { raw, strict, base, sweep })
}

/// Default configuration with no drive: `V = 0`, `l = 2`.
pub fn default_config() -> RunConfig {
    resolve(&Value::Object(Map::new()), false, &Vec::new()).expect("empty config resolves")
}

struct Section<'a> {
    name: &'static str,
    map: Option<&'a Map<String, Value>>,
    used: BTreeSet<String>,
}

impl<'a> Section<'a> {
    fn new(name: &'static str, map: Option<&'a Map<String, Value>>) -> Self {
        Self { name, map, used: BTreeSet::new() }
    }

    fn get(&mut self, keys: &[&str]) -> Result<Option<(&'a str, &'a Value)>> {
        let Some(map) = self.map else { return Ok(None) };
        let mut found = None;
        for k in keys {
            if let Some((key, v)) = map.get_key_value(*k) {
                self.used.insert(key.clone());
                if let Some((prev, _)) = found {
                    return Err(Error::Validation(format!(
                        "{}: '{prev}' and '{key}' name the same setting",
                        self.name
                    )));
                }
                found = Some((key.as_str(), v));
            }
        }
        Ok(found)
    }

    fn unknown(&self) -> Vec<String> {
        self.map
            .map(|m| {
                m.keys()
                    .filter(|k| !self.used.contains(*k))
                    .map(|k| if self.name.is_empty() { k.clone() } else { format!("{}.{k}", self.name) })
                    .collect()
            })
            .unwrap_or_default()
    }
}

fn as_f64(name: &str, v: &Value) -> Result<f64> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::Validation(format!("{name} must be a finite number, got {v}")))
}

fn as_usize(name: &str, v: &Value) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| Error::Validation(format!("{name} must be a non-negative integer, got {v}")))
}

fn as_f64_list(name: &str, v: &Value) -> Result<Vec<f64>> {
    match v {
        Value::Array(a) => a.iter().map(|x| as_f64(name, x)).collect(),
        other => Ok(vec![as_f64(name, other)?]),
    }
}

/// Raw time expression: a number or `"<k> t_B"`.
#[derive(Debug, Clone, Copy)]
enum TimeExpr {
    Absolute(f64),
    Bloch(f64),
}

fn parse_time(name: &str, v: &Value) -> Result<TimeExpr> {
    match v {
        Value::Number(_) => Ok(TimeExpr::Absolute(as_f64(name, v)?)),
        Value::String(s) => {
            let t = s.trim();
            if let Some(head) = t.strip_suffix("t_B") {
                let head = head.trim().trim_end_matches('*').trim();
                let k = if head.is_empty() {
                    1.0
                } else {
                    head.parse::<f64>()
                        .map_err(|_| Error::Validation(format!("{name}: cannot read '{s}' as a multiple of t_B")))?
                };
                Ok(TimeExpr::Bloch(k))
            } else {
                t.parse::<f64>()
                    .map(TimeExpr::Absolute)
                    .map_err(|_| Error::Validation(format!("{name}: cannot read '{s}' as a time")))
            }
        }
        other => Err(Error::Validation(format!("{name} must be a number or a \"k t_B\" string, got {other}"))),
    }
}

/// Reads a setting from the top level or its section, rejecting duplicates.
fn pick<'a>(
    top: &mut Section<'a>,
    sec: &mut Section<'a>,
    keys: &[&str],
) -> Result<Option<(String, &'a Value)>> {
    let a = top.get(keys)?;
    let b = sec.get(keys)?;
    match (a, b) {
        (Some((k, _)), Some(_)) => Err(Error::Validation(format!(
            "'{k}' given both at the top level and in '{}'",
            sec.name
        ))),
        (Some((k, v)), None) => Ok(Some((k.to_string(), v))),
        (None, Some((k, v))) => Ok(Some((format!("{}.{k}", sec.name), v))),
        (None, None) => Ok(None),
    }
}

fn override_of(point: &SweepPoint, key: &str) -> Option<Value> {
    point.iter().find(|(k, _)| k == key).map(|(_, v)| Value::from(*v))
}

fn resolve(raw: &Value, strict: bool, point: &SweepPoint) -> Result<RunConfig> {
    let root = raw.as_object().expect("checked object");
    let section = |name: &str| -> Result<Option<&Map<String, Value>>> {
        match root.get(name) {
            None => Ok(None),
            Some(Value::Object(m)) => Ok(Some(m)),
            Some(other) => Err(Error::Validation(format!("section '{name}' must be an object, got {other}"))),
        }
    };
    let mut top = Section::new("", Some(root));
    for s in SECTIONS {
        top.used.insert(s.to_string());
    }
    let mut model = Section::new("model", section("model")?);
    let mut sched = Section::new("schedule", section("schedule")?);
    let mut num = Section::new("numerics", section("numerics")?);
    let mut ana = Section::new("analysis", section("analysis")?);
    let mut warnings = Vec::new();

    let val = |over: Option<Value>, found: Option<(String, &Value)>| -> Option<(String, Value)> {
        match over {
            Some(v) => Some(("sweep".into(), v)),
            None => found.map(|(k, v)| (k, v.clone())),
        }
    };

    // Model and units.
    let l = match val(None, pick(&mut top, &mut model, &["l", "azimuthal_l"])?) {
        None => 2,
        Some((k, v)) => {
            let x = as_f64(&k, &v)?;
            if x < 1.0 {
                return Err(Error::Validation("azimuthal_l must be ≥ 1".into()));
            }
            if x.fract() != 0.0 || x > u32::MAX as f64 {
                return Err(Error::Validation(format!("azimuthal_l must be an integer, got {x}")));
            }
            x as u32
        }
    };
    let unit_mode = match model.get(&["units"])? {
        None => "dimensionless".to_string(),
        Some((_, Value::String(s))) => s.to_lowercase(),
        Some((_, v)) => return Err(Error::Validation(format!("model.units must be a string, got {v}"))),
    };
    let hbar = match model.get(&["hbar"])? {
        Some((k, v)) => Some(as_f64(k, v)?),
        None => None,
    };
    let depth_raw = match val(override_of(point, "V"), pick(&mut top, &mut model, &["V", "depth", "depth_V"])?) {
        None => 0.0,
        Some((k, v)) => as_f64(&k, &v)?,
    };
    let inertia_raw = match val(override_of(point, "I"), pick(&mut top, &mut model, &["I", "inertia", "inertia_I"])?) {
        None => None,
        Some((k, v)) => Some(as_f64(&k, &v)?),
    };
    let lf = f64::from(l);
    let physical = match unit_mode.as_str() {
        "dimensionless" => false,
        "physical" | "si" => true,
        other => return Err(Error::Validation(format!("model.units must be 'dimensionless', 'physical' or 'si', got '{other}'"))),
    };
    let invalid = |e: Error| match e {
        Error::InvalidParameter(m) => Error::Validation(m),
        other => other,
    };
    let h = if physical { hbar.unwrap_or(if unit_mode == "si" { HBAR_SI } else { 1.0 }) } else { 1.0 };
    let (params, energy_unit, time_unit) = if physical {
        let inertia = inertia_raw.ok_or_else(|| Error::Validation("physical units need the inertia I".into()))?;
        let p = RingLatticeParams::new(inertia, depth_raw, l, UnitSystem::physical(h)).map_err(invalid)?;
        (p.to_dimensionless(), p.recoil_energy, 1.0 / p.recoil_frequency)
    } else {
        if let Some(h) = hbar {
            if h != 1.0 {
                return Err(Error::Validation("dimensionless units fix hbar = 1".into()));
            }
        }
        let inertia = inertia_raw.unwrap_or(lf * lf / 2.0);
        let p = RingLatticeParams::new(inertia, depth_raw, l, UnitSystem::dimensionless()).map_err(invalid)?;
        (p, 1.0, 1.0)
    };
    let rate = |x: f64| x * time_unit;
    let accel = |x: f64| x * time_unit * time_unit;

    // Drive.
    let s = val(override_of(point, "s"), pick(&mut top, &mut sched, &["s", "ramp_rate", "ramp_rate_s"])?);
    let b = val(override_of(point, "B"), pick(&mut top, &mut sched, &["B", "chirp_rate", "chirp"])?);
    let w = val(
        override_of(point, "omega_dot"),
        pick(&mut top, &mut sched, &["omega_dot", "external_acceleration"])?,
    );
    let omega_dot = match w {
        None => None,
        Some((k, v)) => Some(accel(as_f64(&k, &v)?)),
    };
    let chirps = match &b {
        None => Vec::new(),
        Some((k, v)) => as_f64_list(k, v)?.into_iter().map(accel).collect(),
    };
    let drive = match (&s, chirps.first()) {
        (Some(_), Some(_)) => return Err(Error::Validation("s and B are mutually exclusive".into())),
        (Some((k, v)), None) => {
            if omega_dot.is_some() {
                return Err(Error::Validation("omega_dot needs a chirp constant B rather than a ramp rate s".into()));
            }
            Some(Drive::Ramp { s: rate(as_f64(k, v)?) })
        }
        (None, Some(&b)) => Some(Drive::Chirp { b }),
        (None, None) => {
            if omega_dot.is_some() {
                return Err(Error::Validation("omega_dot needs a chirp constant B".into()));
            }
            None
        }
    };
    let ramp = drive.map(|d| match d {
        Drive::Ramp { s } => s,
        Drive::Chirp { b } => ramp_for_chirp(&params, b, omega_dot.unwrap_or(0.0)),
    });
    let resolve_time = |k: &str, v: &Value| -> Result<f64> {
        let t = match parse_time(k, v)? {
            TimeExpr::Absolute(t) => t / time_unit,
            TimeExpr::Bloch(n) => {
                let s = ramp.filter(|s| *s > 0.0).ok_or_else(|| {
                    Error::Validation(format!("{k}: a t_B-relative time needs a positive ramp rate"))
                })?;
                n * bloch_time(&params, s)
            }
        };
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Validation(format!("{k} must be ≥ 0, got {t}")));
        }
        Ok(t)
    };
    let rotation_time = match val(override_of(point, "t_f"), pick(&mut top, &mut sched, &["t_f", "rotation_time"])?) {
        None => 0.0,
        Some((k, v)) => resolve_time(&k, &v)?,
    };
    let load_time = match val(override_of(point, "t_L"), pick(&mut top, &mut sched, &["t_L", "load_time"])?) {
        None => 0.0,
        Some((k, v)) => resolve_time(&k, &v)?,
    };
    let loading = match sched.get(&["loading"])? {
        None => {
            if load_time > 0.0 {
                LoadingMode::Ramp
            } else {
                LoadingMode::GroundState
            }
        }
        Some((_, Value::String(m))) => match m.as_str() {
            "ramp" => LoadingMode::Ramp,
            "ground_state" => LoadingMode::GroundState,
            other => return Err(Error::Validation(format!("schedule.loading must be 'ramp' or 'ground_state', got '{other}'"))),
        },
        Some((_, v)) => return Err(Error::Validation(format!("schedule.loading must be a string, got {v}"))),
    };
    let measure_only_final = match sched.get(&["measure_only_final"])? {
        None => false,
        Some((k, v)) => v.as_bool().ok_or_else(|| Error::Validation(format!("schedule.{k} must be a boolean")))?,
    };

    // Numerics.
    let mut f = |keys: &[&str], default: f64| -> Result<f64> {
        Ok(match num.get(keys)? {
            None => default,
            Some((k, v)) => as_f64(k, v)?,
        })
    };
    let dt = f(&["dt"], 0.005)?;
    let sample_interval = f(&["sample_interval"], 1.0)?;
    let q_min = f(&["q_min"], -lf)?;
    let q_max = f(&["q_max"], lf)?;
    let eta0 = f(&["eta0"], 0.0)?;
    let rtol = f(&["rtol"], 1e-9)?;
    let atol = f(&["atol"], 1e-11)?;
    let mut u = |keys: &[&str], default: usize| -> Result<usize> {
        Ok(match num.get(keys)? {
            None => default,
            Some((k, v)) => as_usize(k, v)?,
        })
    };
    let grid_n = match override_of(point, "grid_N") {
        Some(v) => as_usize("grid_N", &v)?,
        None => u(&["grid_N", "grid_n"], 256)?,
    };
    let k_max = u(&["k_max"], crate::bands::DEFAULT_K_MAX)?;
    let n_max = u(&["n_max"], 4)?;
    let q_points = u(&["q_points"], 161)?;
    let band = u(&["band"], 0)?;
    let snapshots = u(&["snapshots"], 0)?;
    let n_bands = u(&["n_bands"], 4)?;
    let n_periods = u(&["n_periods"], 4)? as u32;
    let m = match num.get(&["m"])? {
        None => 0,
        Some((k, v)) => v.as_i64().ok_or_else(|| Error::Validation(format!("numerics.{k} must be an integer")))?,
    };
    let method = match num.get(&["method"])? {
        None => Method::SplitStep,
        Some((_, Value::String(s))) if s == "split_step" => Method::SplitStep,
        Some((_, Value::String(s))) if s == "band_basis" => Method::BandBasis,
        Some((_, v)) => return Err(Error::Validation(format!("numerics.method must be 'split_step' or 'band_basis', got {v}"))),
    };
    if !(dt > 0.0) {
        return Err(Error::Validation(format!("numerics.dt must be positive, got {dt}")));
    }
    if q_points < 1 || q_max < q_min {
        return Err(Error::Validation("numerics: need q_points ≥ 1 and q_max ≥ q_min".into()));
    }

    // Analysis.
    let mut g = |keys: &[&str], default: f64| -> Result<f64> {
        Ok(match ana.get(keys)? {
            None => default,
            Some((k, v)) => as_f64(k, v)?,
        })
    };
    let peak_threshold = g(&["peak_threshold"], DEFAULT_PEAK_THRESHOLD)?;
    let adiabatic_threshold = g(&["adiabatic_threshold"], DEFAULT_ADIABATIC_THRESHOLD)?;
    let detect = match ana.get(&["detect"])? {
        None => true,
        Some((k, v)) => v.as_bool().ok_or_else(|| Error::Validation(format!("analysis.{k} must be a boolean")))?,
    };
    let fixed_slope = match ana.get(&["fixed_slope"])? {
        None => false,
        Some((k, v)) => v.as_bool().ok_or_else(|| Error::Validation(format!("analysis.{k} must be a boolean")))?,
    };
    let prediction = match ana.get(&["prediction"])? {
        None => PredictionMode::NumericBand,
        Some((_, Value::String(s))) if s == "numeric_band" => PredictionMode::NumericBand,
        Some((_, Value::String(s))) if s == "shallow_closed_form" => PredictionMode::ShallowClosedForm,
        Some((_, v)) => return Err(Error::Validation(format!(
            "analysis.prediction must be 'numeric_band' or 'shallow_closed_form', got {v}"
        ))),
    };
    let load_times = match ana.get(&["load_times"])? {
        None => {
            let mut g: Vec<f64> = (0..10).map(|i| 0.15 + 1.35 * i as f64 / 9.0).collect();
            if load_time > 0.0 && !g.iter().any(|t| (t - load_time).abs() < 1e-12) {
                g.push(load_time);
                g.sort_by(f64::total_cmp);
            }
            g
        }
        Some((k, v)) => as_f64_list(k, v)?.into_iter().map(|t| t / time_unit).collect(),
    };
    let t_b = match ana.get(&["t_B", "bloch_times"])? {
        None => Vec::new(),
        Some((k, v)) => as_f64_list(k, v)?.into_iter().map(|t| t / time_unit).collect(),
    };
    let peak_amplitude = match ana.get(&["A", "peak_amplitude"])? {
        None => None,
        Some((k, v)) => Some(as_f64(k, v)? * time_unit / h),
    };

    sweep_keys(root)?;
    let mut unknown = Vec::new();
    for sec in [&top, &model, &sched, &num, &ana] {
        unknown.extend(sec.unknown());
    }
    if !unknown.is_empty() {
        let msg = format!("unknown config keys: {}", unknown.join(", "));
        if strict {
            return Err(Error::Validation(msg));
        }
        warnings.push(msg);
    }

    let mut cfg = RunConfig {
        params,
        drive,
        chirps,
        omega_dot,
        rotation_time,
        load_time,
        loading,
        measure_only_final,
        numerics: Numerics {
            grid_n,
            dt,
            sample_interval,
            k_max,
            n_max,
            q_points,
            q_min,
            q_max,
            band,
            m,
            eta0,
            snapshots,
            method,
            n_bands,
            rtol,
            atol,
            n_periods,
        },
        analysis: AnalysisSettings {
            peak_threshold,
            adiabatic_threshold,
            detect,
            prediction,
            load_times,
            t_b,
            peak_amplitude,
            fixed_slope,
        },
        energy_unit,
        time_unit,
        warnings,
    };
    if cfg.params.units.mode != UnitMode::Dimensionless {
        cfg.params = cfg.params.to_dimensionless();
    }
    if cfg.drive.is_some() {
        let exp = cfg.experiment()?;
        let guard = crate::protocols::check_adiabaticity(
            &cfg.params,
            crate::protocols::Stage::Rotation { ramp_rate: exp.ramp_rate() },
            cfg.analysis.adiabatic_threshold,
        );
        if !guard.ok {
            cfg.warnings
                .push(format!("rotation ramp not adiabatic: s_c/s = {:.3}", guard.margin));
        }
    }
    Ok(cfg)
}

fn canonical_sweep_key(k: &str) -> Option<&'static str> {
    Some(match k {
        "V" | "depth" | "depth_V" => "V",
        "I" | "inertia" | "inertia_I" => "I",
        "s" | "ramp_rate" | "ramp_rate_s" => "s",
        "B" | "chirp_rate" | "chirp" => "B",
        "omega_dot" | "external_acceleration" => "omega_dot",
        "t_f" | "rotation_time" => "t_f",
        "t_L" | "load_time" => "t_L",
        "grid_N" | "grid_n" => "grid_N",
        _ => return None,
    })
}

fn sweep_keys(root: &Map<String, Value>) -> Result<Vec<(&'static str, Vec<f64>)>> {
    let Some(sweep) = root.get("sweep") else { return Ok(Vec::new()) };
    let map = sweep
        .as_object()
        .ok_or_else(|| Error::Validation("section 'sweep' must be an object".into()))?;
    let mut out: BTreeMap<&'static str, Vec<f64>> = BTreeMap::new();
    for (k, v) in map {
        let key = canonical_sweep_key(k)
            .ok_or_else(|| Error::Validation(format!("sweep.{k}: not a sweepable key (use one of {})", SWEEPABLE.join(", "))))?;
        let vals = match v {
            Value::Array(a) if !a.is_empty() => a.iter().map(|x| as_f64(&format!("sweep.{k}"), x)).collect::<Result<Vec<_>>>()?,
            _ => return Err(Error::Validation(format!("sweep.{k} must be a non-empty list of numbers"))),
        };
        if out.insert(key, vals).is_some() {
            return Err(Error::Validation(format!("sweep names '{key}' twice")));
        }
    }
    Ok(out.into_iter().collect())
}

/// Cartesian product of the sweep lists, first key varying slowest.
fn sweep_points(raw: &Value) -> Result<Vec<SweepPoint>> {
    let keys = sweep_keys(raw.as_object().expect("checked object"))?;
    if keys.is_empty() {
        return Ok(Vec::new());
    }
    let mut points: Vec<SweepPoint> = vec![Vec::new()];
    for (k, vals) in keys {
        points = points
            .into_iter()
            .flat_map(|p| {
                vals.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((k.to_string(), *v));
                    q
                })
            })
            .collect();
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_with_bloch_relative_time() {
        let d = parse_config_str(r#"{"l": 2, "V": 0.5, "s": 0.002, "t_f": "3 t_B"}"#, true).unwrap();
        assert_eq!(d.base.rotation_time, 6000.0);
        assert_eq!(d.base.numerics.grid_n, 256);
        assert_eq!(d.base.drive, Some(Drive::Ramp { s: 0.002 }));
    }

    #[test]
    fn sectioned_config() {
        let d = parse_config_str(
            r#"{"model": {"l": 2, "V": 3}, "schedule": {"s": 0.01, "t_f": "3*t_B", "t_L": 1.5},
                "numerics": {"grid_N": 128}, "analysis": {"peak_threshold": 3}}"#,
            true,
        )
        .unwrap();
        assert_eq!(d.base.rotation_time, 1200.0);
        assert_eq!(d.base.loading, LoadingMode::Ramp);
        assert_eq!(d.base.numerics.grid_n, 128);
        assert_eq!(d.base.analysis.peak_threshold, 3.0);
    }

    #[test]
    fn validation_errors() {
        let e = parse_config_str(r#"{"l": 0}"#, false).unwrap_err();
        assert!(matches!(&e, Error::Validation(m) if m.contains("azimuthal_l must be ≥ 1")));
        let e = parse_config_str(r#"{"V": 1, "s": 0.01, "B": 0.02}"#, false).unwrap_err();
        assert!(matches!(&e, Error::Validation(m) if m.contains("mutually exclusive")));
        assert!(matches!(parse_config_str(r#"{"V": -1}"#, false), Err(Error::Validation(_))));
        assert!(matches!(parse_config_str(r#"{"V": 1, "model": {"V": 2}}"#, false), Err(Error::Validation(_))));
        assert!(matches!(parse_config_str(r#"{"t_f": "2 t_B"}"#, false), Err(Error::Validation(_))));
    }

    #[test]
    fn parse_error_position() {
        let e = parse_config_str("{\n  \"V\": 1,\n  \"s\": ,\n}", false).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e:?}");
    }

    #[test]
    fn unknown_keys_strict_and_lenient() {
        let text = r#"{"V": 1, "numerics": {"gridN": 64}}"#;
        let d = parse_config_str(text, false).unwrap();
        assert!(d.base.warnings.iter().any(|w| w.contains("numerics.gridN")));
        assert!(matches!(parse_config_str(text, true), Err(Error::Validation(_))));
    }

    #[test]
    fn physical_units_convert() {
        // I = 8 and ħ = 2 give E_r = ħ²l²/(2I) = 1 and ω_r = 1/2.
        let d = parse_config_str(
            r#"{"model": {"units": "physical", "hbar": 2, "I": 8, "l": 2, "V": 0.5}, "s": 0.001, "t_f": 100}"#,
            true,
        )
        .unwrap();
        assert!((d.base.params.depth - 0.5).abs() < 1e-14);
        assert_eq!(d.base.drive, Some(Drive::Ramp { s: 0.002 }));
        assert!((d.base.rotation_time - 50.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_grid() {
        let d = parse_config_str(r#"{"V": 1, "s": 0.01, "t_f": "1 t_B", "sweep": {"V": [0.5, 1], "s": [0.01, 0.02]}}"#, true)
            .unwrap();
        assert_eq!(d.sweep.len(), 4);
        let c = d.resolve_point(&d.sweep[3]).unwrap();
        assert_eq!(c.params.depth, 1.0);
        assert_eq!(c.rotation_time, 200.0);
        assert!(parse_config_str(r#"{"sweep": {"dt": [1]}}"#, true).is_err());
    }

    #[test]
    fn chirp_with_acceleration() {
        let d = parse_config_str(r#"{"V": 0.5, "B": [0.006, 0.01], "omega_dot": 5e-4, "t_f": "2.5 t_B"}"#, true).unwrap();
        assert_eq!(d.base.chirps, vec![0.006, 0.01]);
        assert!((d.base.rotation_time - 5000.0).abs() < 1e-9);
        assert!(parse_config_str(r#"{"V": 0.5, "s": 0.01, "omega_dot": 1e-3}"#, true).is_err());
    }
}
