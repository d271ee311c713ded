//! Command-line front end.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::analysis::{
    adiabatic_prediction, detect_bloch_signature_with, trace_derivative, BlochSignature, ObservableTrace,
};
use crate::bands::{band_energy_theta, band_table, bloch_state_on_ring, shallow_bands, BlochLabel};
use crate::calibration::{calibrate_iv, fit_affine, infer_angular_acceleration, predicted_inverse_bloch};
use crate::config::{default_config, parse_config_file, ConfigDocument, Method, RunConfig, SweepPoint};
use crate::error::{Error, Result};
use crate::io::{run_id, write_atomic, write_json, PointFailure, RunManifest, Table, Timing};
use crate::model::eta_of_t;
use crate::propagator::{evolve_band_basis, evolve_with, write_snapshots, BandBasisOptions, EvolveOptions, Frame};
use crate::protocols::{
    check_adiabaticity, loading_fidelity, lz_analytics, run_experiment, staircase_prediction, LoadingMode, Stage,
};
use crate::wavefunction::{grid, WaveFunction};

#[derive(Debug, Parser)]
#[command(name = "ringlattice", version, about = "Angular Bloch oscillations in a rotating ring lattice")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration (repeat for `sense` to give one file per chirp).
    #[arg(long, global = true)]
    pub config: Vec<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for sweeps and band tables.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Treat unknown config keys as errors.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Reserved; every simulation is deterministic.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Band energies on a quasi-momentum grid.
    Bands,
    /// A Bloch state on the angular grid.
    Gs,
    /// Raw propagation from a Bloch state.
    Evolve,
    /// Load, rotate and measure; writes the trace and its Bloch signature.
    Experiment,
    /// Derivative trace and Bloch signature.
    Deriv {
        /// Existing `t,Lz_hbar` trace; otherwise the experiment is run first.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Loading fidelity over a grid of ramp times.
    LoadCheck,
    /// Landau–Zener analytics and the staircase prediction.
    Lz,
    /// Moment of inertia and lattice depth from a chirp run.
    Calibrate,
    /// External angular acceleration from two or more chirp runs.
    Sense,
    /// Regenerates every figure's data and an acceptance report.
    Reproduce,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Bands => "bands",
            Command::Gs => "gs",
            Command::Evolve => "evolve",
            Command::Experiment => "experiment",
            Command::Deriv { .. } => "deriv",
            Command::LoadCheck => "load-check",
            Command::Lz => "lz",
            Command::Calibrate => "calibrate",
            Command::Sense => "sense",
            Command::Reproduce => "reproduce",
        }
    }
}

/// A named output of a command.
#[derive(Debug, Clone)]
pub enum Artifact {
    Table(String, Table),
    Trace(String, ObservableTrace),
    Json(String, Value),
    Text(String, String),
}

impl Artifact {
    fn name(&self) -> &str {
        match self {
            Artifact::Table(n, _) | Artifact::Trace(n, _) | Artifact::Json(n, _) | Artifact::Text(n, _) => n,
        }
    }
}

#[derive(Debug, Default)]
pub struct CommandOutput {
    pub artifacts: Vec<Artifact>,
    pub warnings: Vec<String>,
    pub timings: Vec<Timing>,
    /// Reported after the artifacts are written (detection failures).
    pub deferred: Option<Error>,
}

impl CommandOutput {
    fn push(&mut self, a: Artifact) {
        self.artifacts.push(a);
    }

    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let r = f();
        self.timings.push(Timing { stage: stage.into(), seconds: t.elapsed().as_secs_f64() });
        r
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(manifest) => {
            for w in &manifest.warnings {
                eprintln!("warning: {w}");
            }
            if !manifest.failures.is_empty() {
                for f in &manifest.failures {
                    eprintln!("error: sweep point {} failed: {}", f.point, f.error);
                }
                return 2;
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command, writing outputs and the manifest under `cli.out`.
pub fn execute(cli: &Cli) -> Result<RunManifest> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
    pool.install(|| execute_in_pool(cli))
}

fn execute_in_pool(cli: &Cli) -> Result<RunManifest> {
    let started = Instant::now();
    let command = &cli.command;
    if let Command::Reproduce = command {
        let out = crate::reproduce::run_suite()?;
        return finish(cli, json!({"command": "reproduce"}), out, Vec::new(), started);
    }
    let docs: Vec<ConfigDocument> = cli
        .config
        .iter()
        .map(|p| parse_config_file(p, cli.strict))
        .collect::<Result<_>>()?;
    if docs.len() > 1 && !matches!(command, Command::Sense) {
        return Err(Error::Validation("only `sense` accepts more than one --config".into()));
    }
    let mut warnings: Vec<String> = docs.iter().flat_map(|d| d.base.warnings.clone()).collect();
    let echo = match docs.len() {
        0 => serde_json::to_value(default_config()).unwrap_or(Value::Null),
        1 => serde_json::to_value(&docs[0].base).unwrap_or(Value::Null),
        _ => Value::Array(docs.iter().map(|d| serde_json::to_value(&d.base).unwrap_or(Value::Null)).collect()),
    };

    if let Command::Sense = command {
        let cfgs: Vec<RunConfig> = if docs.is_empty() { vec![default_config()] } else { docs.iter().map(|d| d.base.clone()).collect() };
        let mut out = sense(&cfgs)?;
        warnings.append(&mut out.warnings);
        out.warnings = warnings;
        return finish(cli, echo, out, Vec::new(), started);
    }

    let doc = docs.into_iter().next();
    let sweep = doc.as_ref().map(|d| d.sweep.clone()).unwrap_or_default();
    if sweep.is_empty() {
        let cfg = doc.map(|d| d.base).unwrap_or_else(default_config);
        let mut out = dispatch(command, &cfg)?;
        warnings.append(&mut out.warnings);
        out.warnings = warnings;
        return finish(cli, echo, out, Vec::new(), started);
    }

    let doc = doc.expect("sweep implies a config");
    let results: Vec<Result<CommandOutput>> = sweep
        .par_iter()
        .map(|p| doc.resolve_point(p).and_then(|cfg| dispatch(command, &cfg)))
        .collect();
    let mut merged = CommandOutput::default();
    let mut failures = Vec::new();
    let mut tables: BTreeMap<String, Table> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    let mut docs_out: BTreeMap<String, Vec<Value>> = BTreeMap::new();
    for (i, (point, res)) in sweep.iter().zip(results).enumerate() {
        match res {
            Err(e) => failures.push(PointFailure {
                point: i,
                settings: point.clone(),
                error: e.to_string(),
                exit_code: e.exit_code(),
            }),
            Ok(out) => {
                if let Some(e) = out.deferred {
                    failures.push(PointFailure { point: i, settings: point.clone(), error: e.to_string(), exit_code: e.exit_code() });
                }
                merged.warnings.extend(out.warnings.into_iter().map(|w| format!("point {i}: {w}")));
                for t in out.timings {
                    merged.timings.push(Timing { stage: format!("point {i}: {}", t.stage), seconds: t.seconds });
                }
                for a in out.artifacts {
                    let name = a.name().to_string();
                    match a {
                        Artifact::Table(_, t) => merge_table(&mut tables, &mut order, &name, i, point, &t),
                        Artifact::Trace(_, tr) => merge_table(&mut tables, &mut order, &name, i, point, &trace_table(&tr)),
                        Artifact::Json(_, v) => docs_out.entry(name).or_default().push(json!({
                            "point": i,
                            "settings": point.iter().map(|(k, v)| (k.clone(), *v)).collect::<BTreeMap<_, _>>(),
                            "result": v,
                        })),
                        Artifact::Text(_, s) => merged.push(Artifact::Text(format!("p{i}_{name}"), s)),
                    }
                }
            }
        }
    }
    for name in order {
        merged.push(Artifact::Table(name.clone(), tables.remove(&name).expect("recorded")));
    }
    for (name, v) in docs_out {
        merged.push(Artifact::Json(name, Value::Array(v)));
    }
    warnings.append(&mut merged.warnings);
    merged.warnings = warnings;
    finish(cli, echo, merged, failures, started)
}

fn trace_table(tr: &ObservableTrace) -> Table {
    let mut t = Table::new(["t", tr.kind.column()]);
    for (a, b) in tr.times.iter().zip(&tr.values) {
        t.push(vec![*a, *b]);
    }
    t
}

fn merge_table(
    tables: &mut BTreeMap<String, Table>,
    order: &mut Vec<String>,
    name: &str,
    index: usize,
    point: &SweepPoint,
    t: &Table,
) {
    let entry = tables.entry(name.to_string()).or_insert_with(|| {
        order.push(name.to_string());
        let mut cols = vec!["point".to_string()];
        cols.extend(point.iter().map(|(k, _)| k.clone()));
        cols.extend(t.columns.iter().cloned());
        Table::new(cols)
    });
    for row in &t.rows {
        let mut r = vec![index as f64];
        r.extend(point.iter().map(|(_, v)| *v));
        r.extend(row.iter().copied());
        entry.push(r);
    }
}

fn artifact_path(out: &Path, a: &Artifact) -> PathBuf {
    match a {
        Artifact::Table(n, _) | Artifact::Trace(n, _) => out.join(format!("{n}.csv")),
        Artifact::Json(n, _) => out.join(format!("{n}.json")),
        Artifact::Text(n, _) => out.join(n),
    }
}

fn finish(
    cli: &Cli,
    echo: Value,
    out: CommandOutput,
    failures: Vec<PointFailure>,
    started: Instant,
) -> Result<RunManifest> {
    let id = run_id(cli.command.name(), &echo);
    let mut paths = Vec::new();
    for a in &out.artifacts {
        let path = artifact_path(&cli.out, a);
        match a {
            Artifact::Table(_, t) => t.write(&path)?,
            Artifact::Trace(_, tr) => {
                let mut buf = Vec::new();
                tr.write_csv(&mut buf)?;
                write_atomic(&path, &buf)?;
            }
            Artifact::Json(_, v) => write_json(&path, v)?,
            Artifact::Text(_, s) => write_atomic(&path, s.as_bytes())?,
        }
        paths.push(path);
    }
    let mut warnings = out.warnings;
    warnings.dedup();
    let mut timings = out.timings;
    timings.push(Timing { stage: "total".into(), seconds: started.elapsed().as_secs_f64() });
    let manifest = RunManifest {
        run_id: id,
        command: cli.command.name().into(),
        config_echo: echo,
        outputs: paths,
        timings,
        version: env!("CARGO_PKG_VERSION").into(),
        seed: cli.seed,
        warnings,
        failures,
    };
    write_json(&cli.out.join("manifest.json"), &manifest)?;
    if let Some(e) = out.deferred {
        for w in &manifest.warnings {
            eprintln!("warning: {w}");
        }
        return Err(e);
    }
    Ok(manifest)
}

/// Runs one command on one resolved configuration.
pub fn dispatch(command: &Command, cfg: &RunConfig) -> Result<CommandOutput> {
    match command {
        Command::Bands => bands(cfg),
        Command::Gs => ground_state(cfg),
        Command::Evolve => evolve(cfg),
        Command::Experiment => experiment(cfg),
        Command::Deriv { trace } => deriv(cfg, trace.as_deref()),
        Command::LoadCheck => load_check(cfg),
        Command::Lz => lz(cfg),
        Command::Calibrate => calibrate(cfg),
        Command::Sense => sense(std::slice::from_ref(cfg)),
        Command::Reproduce => Err(Error::Validation("reproduce runs without a sweep".into())),
    }
}

fn bands(cfg: &RunConfig) -> Result<CommandOutput> {
    let mut out = CommandOutput::default();
    let n = &cfg.numerics;
    let qs: Vec<f64> = if n.q_points == 1 {
        vec![n.q_min]
    } else {
        (0..n.q_points).map(|i| n.q_min + (n.q_max - n.q_min) * i as f64 / (n.q_points - 1) as f64).collect()
    };
    let rows = out.time("bands", || band_table(&cfg.params, &qs, n.n_max, n.k_max.max(n.n_max + 4)))?;
    let mut t = Table::new(["q", "n", "E"]);
    for (q, band, e) in rows {
        t.push(vec![q, band as f64, e]);
    }
    out.push(Artifact::Table("bands".into(), t));
    let mut s = Table::new(["q", "E0_shallow", "E1_shallow"]);
    for &q in &qs {
        let b = shallow_bands(&cfg.params, q);
        s.push(vec![q, b.e0, b.e1]);
    }
    out.push(Artifact::Table("bands_shallow".into(), s));
    Ok(out)
}

fn label(cfg: &RunConfig) -> BlochLabel {
    BlochLabel::new(cfg.numerics.band, cfg.numerics.m, cfg.numerics.eta0)
}

fn ground_state(cfg: &RunConfig) -> Result<CommandOutput> {
    let mut out = CommandOutput::default();
    let lab = label(cfg);
    let state = bloch_state_on_ring(&cfg.params, &lab, cfg.numerics.grid_n)?;
    let phi = grid(cfg.numerics.grid_n);
    let mut t = Table::new(["phi", "re", "im", "density"]);
    for (p, c) in phi.iter().zip(&state.amplitudes) {
        t.push(vec![*p, c.re, c.im, c.norm_sqr()]);
    }
    out.push(Artifact::Table("gs".into(), t));
    let energy = band_energy_theta(&cfg.params, &lab, cfg.numerics.k_max)?;
    out.push(Artifact::Json(
        "gs".into(),
        json!({
            "band": lab.band_n,
            "m": lab.m,
            "eta0": lab.eta0,
            "energy_theta": energy,
            "Lz_hbar": crate::analysis::mean_angular_momentum(&state, cfg.params.hbar()),
        }),
    ));
    Ok(out)
}

fn evolve(cfg: &RunConfig) -> Result<CommandOutput> {
    let mut out = CommandOutput::default();
    let mut exp = cfg.experiment()?;
    exp.loading = LoadingMode::GroundState;
    let schedule = exp.schedule()?;
    let lab = label(cfg);
    let span = (0.0, cfg.rotation_time);
    match cfg.numerics.method {
        Method::SplitStep => {
            let init = bloch_state_on_ring(&cfg.params, &lab, cfg.numerics.grid_n)?;
            let every = ((cfg.numerics.sample_interval / cfg.numerics.dt).round() as usize).max(1);
            let opts = EvolveOptions {
                dt: cfg.numerics.dt,
                sample_every: every,
                frame: Frame::Corotating,
                store_states: cfg.numerics.snapshots > 0,
                max_dt: cfg.numerics.dt.max(EvolveOptions::default().max_dt),
                ..EvolveOptions::default()
            };
            let traj = out.time("propagate", || evolve_with(&init, &cfg.params, &schedule, span, &opts))?;
            let trace = ObservableTrace::new(traj.times.clone(), traj.lz.clone(), crate::analysis::TraceKind::AngularMomentum)?;
            out.push(Artifact::Trace("trace".into(), trace));
            if let Some(states) = &traj.states {
                let k = cfg.numerics.snapshots.min(states.len());
                let picks: Vec<usize> = (0..k).map(|i| if k == 1 { 0 } else { i * (states.len() - 1) / (k - 1) }).collect();
                let times: Vec<f64> = picks.iter().map(|&i| traj.times[i]).collect();
                let chosen: Vec<WaveFunction> = picks.iter().map(|&i| states[i].clone()).collect();
                let mut buf = Vec::new();
                write_snapshots(&mut buf, &times, &chosen)?;
                out.push(Artifact::Text("snapshots.dat".into(), String::from_utf8_lossy(&buf).into_owned()));
            }
            out.push(Artifact::Json(
                "evolve".into(),
                json!({
                    "method": "split_step",
                    "final_time": traj.final_time,
                    "final_Lz_hbar": traj.lz.last(),
                    "steps": traj.steps,
                    "substeps": traj.substeps,
                    "max_norm_drift": traj.max_norm_drift,
                    "roundoff_drift": traj.roundoff_drift,
                }),
            ));
        }
        Method::BandBasis => {
            let mut init = BTreeMap::new();
            init.insert((lab.band_n, lab.m), Complex64::new(1.0, 0.0));
            let opts = BandBasisOptions {
                n_bands: cfg.numerics.n_bands,
                k_max: cfg.numerics.k_max.max(cfg.numerics.n_bands + 4),
                rtol: cfg.numerics.rtol,
                atol: cfg.numerics.atol,
                sample_dt: cfg.numerics.sample_interval,
                ..BandBasisOptions::default()
            };
            let tr = out.time("propagate", || evolve_band_basis(&init, &cfg.params, &schedule, span, &opts))?;
            let trace = ObservableTrace::new(tr.times.clone(), tr.lz.clone(), crate::analysis::TraceKind::AngularMomentum)?;
            out.push(Artifact::Trace("trace".into(), trace));
            let mut pops = Table::new(["t", "m", "n", "population"]);
            for (i, t) in tr.times.iter().enumerate() {
                for (s, m) in tr.m_values.iter().enumerate() {
                    for (n, c) in tr.coefficients[i][s].iter().enumerate() {
                        pops.push(vec![*t, *m as f64, n as f64, c.norm_sqr()]);
                    }
                }
            }
            out.push(Artifact::Table("populations".into(), pops));
            let drift = tr.population.iter().map(|p| (p - 1.0).abs()).fold(0.0, f64::max);
            out.push(Artifact::Json(
                "evolve".into(),
                json!({
                    "method": "band_basis",
                    "final_time": tr.times.last(),
                    "final_Lz_hbar": tr.lz.last(),
                    "evaluations": tr.evaluations,
                    "max_norm_drift": drift,
                }),
            ));
        }
    }
    Ok(out)
}

fn signature_json(sig: &BlochSignature, cfg: &RunConfig) -> Value {
    let expected = cfg.bloch_time();
    json!({
        "t_B": sig.t_b,
        "t_B_expected": expected,
        "peak_amplitude": sig.peak_amplitude,
        "fwhm": sig.fwhm,
        "fwhm_over_t_B": sig.fwhm / sig.t_b,
        "peak_times": sig.peak_times,
        "peak_values": sig.peak_values,
        "widths": sig.widths,
        "threshold": sig.threshold,
    })
}

fn detect_into(out: &mut CommandOutput, cfg: &RunConfig, trace: &ObservableTrace) -> Result<Option<BlochSignature>> {
    let d = trace_derivative(trace)?;
    out.push(Artifact::Trace("deriv".into(), d.clone()));
    if !cfg.analysis.detect {
        return Ok(None);
    }
    match detect_bloch_signature_with(&d, cfg.analysis.peak_threshold) {
        Ok(sig) => {
            out.push(Artifact::Json("signature".into(), signature_json(&sig, cfg)));
            Ok(Some(sig))
        }
        Err(e @ Error::Detection(_)) => {
            out.deferred = Some(e);
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn experiment(cfg: &RunConfig) -> Result<CommandOutput> {
    let mut out = CommandOutput::default();
    let exp = cfg.experiment()?;
    let trace = out.time("experiment", || run_experiment(&exp))?;
    out.warnings.extend(trace.metadata.warnings.iter().cloned());
    let s = exp.ramp_rate();

    if cfg.params.depth > 0.0 && !exp.measure_only_final {
        let schedule = exp.schedule()?;
        let params = cfg.params;
        let mode = cfg.analysis.prediction;
        let pred: Result<Vec<f64>> = out.time("prediction", || {
            trace
                .times
                .par_iter()
                .map(|&t| adiabatic_prediction(&params, eta_of_t(&schedule, &params, t), mode))
                .collect()
        });
        match pred {
            Ok(p) => {
                let mut tab = Table::new(["t", "Lz_hbar", "Lz_adiabatic"]);
                for ((t, v), a) in trace.times.iter().zip(&trace.values).zip(&p) {
                    tab.push(vec![*t, *v, *a]);
                }
                out.push(Artifact::Table("prediction".into(), tab));
            }
            Err(e) => out.warnings.push(format!("adiabatic prediction skipped: {e}")),
        }
    }

    let mut plateaus = Vec::new();
    if let Some(tb) = cfg.bloch_time() {
        let t_lz = if cfg.params.depth > 0.0 { lz_analytics(&cfg.params, s)?.t_lz } else { 1.0 };
        let mut k = 0u32;
        while f64::from(k) * tb <= exp.rotation_time + 1e-9 {
            if let Some(v) = trace.value_at(f64::from(k) * tb) {
                plateaus.push(json!({
                    "N_B": k,
                    "t": f64::from(k) * tb,
                    "Lz_hbar": v,
                    "staircase": staircase_prediction(t_lz, k, cfg.params.l)?,
                }));
            }
            k += 1;
        }
    }
    let summary = json!({
        "ramp_rate": s,
        "chirp_rate": exp.chirp_rate(),
        "t_B": cfg.bloch_time(),
        "final_time": trace.times.last(),
        "final_Lz_hbar": trace.values.last(),
        "plateaus": plateaus,
        "warnings": trace.metadata.warnings,
        "fingerprint": trace.metadata.fingerprint,
    });
    out.push(Artifact::Json("experiment".into(), summary));
    if !exp.measure_only_final && trace.len() >= 5 {
        detect_into(&mut out, cfg, &trace)?;
    }
    out.push(Artifact::Trace("trace".into(), trace));
    Ok(out)
}

fn deriv(cfg: &RunConfig, input: Option<&Path>) -> Result<CommandOutput> {
    let mut out = CommandOutput::default();
    let trace = match input {
        Some(p) => {
            let f = std::fs::File::open(p)
                .map_err(|e| Error::InvalidInput(format!("cannot read trace {}: {e}", p.display())))?;
            ObservableTrace::read_csv(std::io::BufReader::new(f))?
        }
        None => out.time("experiment", || run_experiment(&cfg.experiment()?))?,
    };
    detect_into(&mut out, cfg, &trace)?;
    Ok(out)
}

fn load_check(cfg: &RunConfig) -> Result<CommandOutput> {
    let mut out = CommandOutput::default();
    let times = cfg.analysis.load_times.clone();
    if times.is_empty() || times.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Validation("analysis.load_times must be positive".into()));
    }
    let n = cfg.numerics.grid_n;
    let dt = cfg.numerics.dt.min(0.001);
    let fids: Vec<f64> = out.time("fidelity", || {
        times.par_iter().map(|&t| loading_fidelity(&cfg.params, t, n, dt)).collect::<Result<Vec<_>>>()
    })?;
    let mut tab = Table::new(["t_L", "F", "margin", "ok"]);
    for (t, f) in times.iter().zip(&fids) {
        let g = check_adiabaticity(&cfg.params, Stage::Loading { load_time: *t }, cfg.analysis.adiabatic_threshold);
        tab.push(vec![*t, *f, g.margin, if g.ok { 1.0 } else { 0.0 }]);
    }
    out.push(Artifact::Table("load".into(), tab));
    let monotone = fids.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let at = if cfg.load_time > 0.0 {
        let f = times.iter().zip(&fids).find(|(t, _)| (**t - cfg.load_time).abs() < 1e-12).map(|(_, f)| *f);
        let g = check_adiabaticity(&cfg.params, Stage::Loading { load_time: cfg.load_time }, cfg.analysis.adiabatic_threshold);
        json!({"t_L": cfg.load_time, "F": f, "margin": g.margin, "ok": g.ok})
    } else {
        Value::Null
    };
    out.push(Artifact::Json("load".into(), json!({"monotone": monotone, "at_config": at, "grid_N": n, "dt": dt})));
    Ok(out)
}

fn lz(cfg: &RunConfig) -> Result<CommandOutput> {
    let mut out = CommandOutput::default();
    let s = cfg
        .ramp_rate()
        .ok_or_else(|| Error::Validation("lz needs a ramp rate s or a chirp constant B".into()))?;
    let r = lz_analytics(&cfg.params, s)?;
    let mut tab = Table::new(["N_B", "Lz_hbar"]);
    for k in 0..=cfg.numerics.n_periods {
        tab.push(vec![f64::from(k), staircase_prediction(r.t_lz, k, cfg.params.l)?]);
    }
    out.push(Artifact::Json(
        "lz".into(),
        json!({
            "s": s,
            "gamma": r.gamma,
            "T_LZ": r.t_lz,
            "phi_LZ": r.phi_lz,
            "s_c": r.s_c,
            "adiabatic_margin": r.adiabatic_margin,
            "adiabatic": r.adiabatic_margin >= cfg.analysis.adiabatic_threshold,
        }),
    ));
    out.push(Artifact::Table("staircase".into(), tab));
    Ok(out)
}

fn calibrate(cfg: &RunConfig) -> Result<CommandOutput> {
    let mut out = CommandOutput::default();
    let exp = cfg.experiment()?;
    let b = exp.chirp_rate();
    if cfg.omega_dot.is_some_and(|w| w != 0.0) {
        out.warnings.push("calibration assumes no external angular acceleration; omega_dot is ignored".into());
    }
    let (t_b, amp, source) = match (cfg.analysis.t_b.first(), cfg.analysis.peak_amplitude) {
        (Some(&t), Some(a)) => (t, a, "supplied"),
        _ => {
            let trace = out.time("experiment", || run_experiment(&exp))?;
            out.warnings.extend(trace.metadata.warnings.iter().cloned());
            let d = trace_derivative(&trace)?;
            let sig = detect_bloch_signature_with(&d, cfg.analysis.peak_threshold)?;
            out.push(Artifact::Trace("trace".into(), trace));
            out.push(Artifact::Trace("deriv".into(), d));
            out.push(Artifact::Json("signature".into(), signature_json(&sig, cfg)));
            (sig.t_b, sig.peak_amplitude, "simulated")
        }
    };
    let r = calibrate_iv(t_b, amp, b, cfg.params.l, cfg.params.hbar())?;
    if let Some(n) = &r.validity_note {
        out.warnings.push(n.clone());
    }
    out.push(Artifact::Json(
        "calibration".into(),
        json!({
            "source": source,
            "I_est": r.inertia,
            "V_est": r.depth,
            "inputs": r.inputs,
            "validity_note": r.validity_note,
            "truth": {"I": cfg.params.inertia, "V": cfg.params.depth},
            "relative_error": {
                "I": r.inertia / cfg.params.inertia - 1.0,
                "V": if cfg.params.depth > 0.0 { Some(r.depth / cfg.params.depth - 1.0) } else { None },
            },
        }),
    ));
    Ok(out)
}

fn sense(cfgs: &[RunConfig]) -> Result<CommandOutput> {
    let mut out = CommandOutput::default();
    let runs: Vec<RunConfig> = if cfgs.len() == 1 {
        let c = &cfgs[0];
        if c.chirps.len() < 2 {
            return Err(Error::Validation("sense needs at least two chirp constants B".into()));
        }
        c.chirps.iter().map(|&b| c.with_chirp(b)).collect()
    } else {
        for c in cfgs {
            if c.chirps.len() != 1 {
                return Err(Error::Validation("with several configs each must give exactly one B".into()));
            }
        }
        cfgs.to_vec()
    };
    let l = runs[0].params.l;
    if runs.iter().any(|r| r.params.l != l || r.params.inertia != runs[0].params.inertia) {
        return Err(Error::Validation("all sensing runs must share l and I".into()));
    }
    let chirps: Vec<f64> = runs.iter().map(|r| r.chirps[0]).collect();
    let supplied = &cfgs[0].analysis.t_b;
    let t_bs: Vec<f64> = if cfgs.len() == 1 && supplied.len() == runs.len() {
        supplied.clone()
    } else {
        let detected: Vec<Result<(f64, ObservableTrace)>> = out.time("experiments", || {
            runs.par_iter()
                .map(|r| {
                    let trace = run_experiment(&r.experiment()?)?;
                    let sig = detect_bloch_signature_with(&trace_derivative(&trace)?, r.analysis.peak_threshold)?;
                    Ok((sig.t_b, trace))
                })
                .collect()
        });
        let mut v = Vec::new();
        for (i, d) in detected.into_iter().enumerate() {
            let (tb, trace) = d?;
            out.warnings.extend(trace.metadata.warnings.iter().cloned());
            out.push(Artifact::Trace(format!("trace_{i}"), trace));
            v.push(tb);
        }
        v
    };
    let first = infer_angular_acceleration(chirps[0], t_bs[0], chirps[1], t_bs[1], l)?;
    let fit = if chirps.len() >= 3 {
        let slope = cfgs[0].analysis.fixed_slope.then(|| runs[0].params.inertia / (4.0 * runs[0].params.hbar() * f64::from(l * l)));
        let inv: Vec<f64> = t_bs.iter().map(|t| 1.0 / t).collect();
        Some(fit_affine(&chirps, &inv, l, slope)?)
    } else {
        None
    };
    let mut tab = Table::new(["B", "t_B", "inv_t_B", "inv_t_B_model"]);
    for (b, t) in chirps.iter().zip(&t_bs) {
        let model = predicted_inverse_bloch(&runs[0].params, *b, first.omega_dot);
        tab.push(vec![*b, *t, 1.0 / t, model]);
    }
    out.push(Artifact::Table("sense".into(), tab));
    out.push(Artifact::Json(
        "sensing".into(),
        json!({
            "omega_dot_est": first.omega_dot,
            "inputs": first.inputs,
            "affine_fit": fit,
            "truth": runs[0].omega_dot,
            "relative_error": runs[0].omega_dot.filter(|w| *w != 0.0).map(|w| first.omega_dot / w - 1.0),
        }),
    ));
    Ok(out)
}
