//! Run configurations, content-addressed run directories, post-run checks and
//! parameter sweeps.
//!
//! A run directory `<out_root>/runs/<hash>/` holds `config.json`,
//! `manifest.json`, `series.csv`, `report.json` and `snapshots/`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::diagnostics::{
    concentration, energy_growth_check, fit_blowup, verify_decay_identities, ConcentrationReport,
    FitOptions, IdentityReport, RateFit,
};
use crate::dynamics::{
    make_initial_data, run_with, ConditionsReport, InitialData, SimConfig, Status, TimeSeries,
};
use crate::error::{Error, Result};
use crate::field::{Field, Grid};
use crate::ground_state::cached_ground_state;
use crate::modulation::{ModulationOptions, ModulationTrack, Modulator};
use crate::persistence::{
    read_json, read_manifest, read_series_csv, read_snapshot, resolve, write_json, write_manifest,
    write_series_csv, write_snapshot, Manifest,
};
use crate::profiles::{solve_qb, solve_radiation};

pub const DEFAULT_RUN_CAP: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Identities,
    Fit,
    Concentration,
    EnergyGrowth,
    Modulation,
}

fn default_analysis() -> Vec<Analysis> {
    vec![
        Analysis::Identities,
        Analysis::Fit,
        Analysis::Concentration,
        Analysis::EnergyGrowth,
    ]
}

/// One simulation: integrator settings, initial data and the checks to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub sim: SimConfig,
    pub initial_data: InitialData,
    #[serde(default = "default_analysis")]
    pub analysis: Vec<Analysis>,
    #[serde(default)]
    pub thresholds: Thresholds,
}

/// Limits beyond which a check counts as a diagnostic failure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub mass: f64,
    pub momentum: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            mass: 1e-10,
            momentum: 1e-9,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()
    }
}

pub fn parse_run_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_run_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_run_config(&text)
}

/// First 16 hex digits of the SHA-256 of the canonical JSON encoding.
pub fn config_hash<T: Serialize>(cfg: &T) -> Result<String> {
    let bytes = serde_json::to_vec(cfg)?;
    let digest = Sha256::digest(&bytes);
    Ok(hex::encode(digest)[..16].to_string())
}

pub fn run_dir(out_root: &Path, hash: &str) -> PathBuf {
    out_root.join("runs").join(hash)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationSummary {
    pub rows: usize,
    pub converged: usize,
    /// Range of `b` over the last decade of `λ`.
    pub b_final_decade: (f64, f64),
    pub max_discrepancy: f64,
}

/// Everything `check` reports on a finished run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub identities: Option<IdentityReport>,
    pub rate_fit: Option<RateFit>,
    pub concentration: Option<ConcentrationReport>,
    pub energy_growth: Option<f64>,
    pub modulation: Option<ModulationSummary>,
    pub initial_conditions: Option<ConditionsReport>,
    /// Checks that could not be carried out, with the reason.
    pub notes: Vec<String>,
    /// Checks that ran and exceeded their thresholds.
    pub failures: Vec<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn summarize_track(track: &ModulationTrack) -> ModulationSummary {
    let rows = &track.rows;
    let last = rows.last().map_or(f64::NAN, |r| r.state.lambda);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in rows.iter().filter(|r| r.state.lambda <= 10.0 * last) {
        lo = lo.min(r.state.b);
        hi = hi.max(r.state.b);
    }
    ModulationSummary {
        rows: rows.len(),
        converged: rows.iter().filter(|r| r.state.converged).count(),
        b_final_decade: (lo, hi),
        max_discrepancy: rows
            .iter()
            .map(|r| r.discrepancy)
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max),
    }
}

/// Run the requested analyses on a series, its final field and, for
/// modulation tracking, the stored snapshots.
pub fn check_run(
    cfg: &RunConfig,
    series: &TimeSeries,
    final_field: Option<&Field>,
    snapshots: &dyn Fn() -> Result<Vec<Field>>,
) -> Result<CheckReport> {
    let mut rep = CheckReport::default();
    let gs = cached_ground_state(cfg.sim.d)?;
    for an in &cfg.analysis {
        match an {
            Analysis::Identities => match verify_decay_identities(series, cfg.sim.a) {
                Ok(id) => {
                    if !(id.max_rel_err_mass <= cfg.thresholds.mass) {
                        rep.failures.push(format!(
                            "mass decay error {:.3e} exceeds {:.1e}",
                            id.max_rel_err_mass, cfg.thresholds.mass
                        ));
                    }
                    if !(id.max_rel_err_momentum <= cfg.thresholds.momentum) {
                        rep.failures.push(format!(
                            "momentum decay error {:.3e} exceeds {:.1e}",
                            id.max_rel_err_momentum, cfg.thresholds.momentum
                        ));
                    }
                    rep.identities = Some(id);
                }
                Err(e) => rep.notes.push(format!("identities: {e}")),
            },
            Analysis::Fit => match fit_blowup(series, &FitOptions::default()) {
                Ok(f) => rep.rate_fit = Some(f),
                Err(e) => rep.notes.push(format!("rate fit: {e}")),
            },
            Analysis::EnergyGrowth => rep.energy_growth = Some(energy_growth_check(series)),
            Analysis::Concentration => {
                let (Some(u), Some(last)) = (final_field, series.rows.last()) else {
                    rep.notes.push("concentration: no final field".into());
                    continue;
                };
                let lam = last.lambda_est;
                let w = lam * lam.ln().abs();
                match concentration(u, None, w, gs) {
                    Ok(c) => rep.concentration = Some(c),
                    Err(e) => rep.notes.push(format!("concentration: {e}")),
                }
            }
            Analysis::Modulation => {
                let snaps = snapshots()?;
                let Some(first) = snaps.first() else {
                    rep.notes.push("modulation: no snapshots".into());
                    continue;
                };
                let m = Modulator::new(gs, first.grid, ModulationOptions::default());
                match m.track(&snaps) {
                    Ok(t) => rep.modulation = Some(summarize_track(&t)),
                    Err(e) => rep.notes.push(format!("modulation: {e}")),
                }
            }
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_hash: String,
    pub dir: PathBuf,
    pub status: String,
    pub stop_reason: String,
    pub steps: u64,
    pub t_final: f64,
    pub final_lambda: f64,
    pub report: CheckReport,
}

fn label<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

/// Integrate one configuration into `<out_root>/runs/<hash>/`, then check it.
pub fn execute_run(cfg: &RunConfig, out_root: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    let hash = config_hash(cfg)?;
    let dir = run_dir(out_root, &hash);
    let snap_dir = dir.join("snapshots");
    if snap_dir.exists() {
        fs::remove_dir_all(&snap_dir).map_err(|e| Error::io(&snap_dir, e))?;
    }
    create_dir(&snap_dir)?;
    write_json(cfg, dir.join("config.json"))?;

    let gs = cached_ground_state(cfg.sim.d)?;
    let init = make_initial_data(&cfg.initial_data, &cfg.sim.grid, gs, cfg.sim.seed)?;
    let mut names = Vec::new();
    let mut last_field: Option<Field> = None;
    let (series, state, stop) = run_with(&cfg.sim, init.field, gs, |u| {
        let name = format!("snapshots/snap_{:05}.nlsf", names.len());
        write_snapshot(u, cfg.sim.a, dir.join(&name))?;
        names.push(name);
        last_field = Some(u.clone());
        Ok(())
    })?;
    write_series_csv(&series, dir.join("series.csv"))?;

    let load = || -> Result<Vec<Field>> {
        names
            .iter()
            .map(|n| Ok(read_snapshot(dir.join(n))?.0))
            .collect()
    };
    let mut report = check_run(cfg, &series, last_field.as_ref(), &load)?;
    report.initial_conditions = init.conditions;
    write_json(&report, dir.join("report.json"))?;

    let status = label(&state.status);
    let stop_reason = label(&stop);
    let manifest = Manifest {
        format_version: 1,
        package_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: hash.clone(),
        config: serde_json::to_value(cfg)?,
        status: status.clone(),
        stop_reason: stop_reason.clone(),
        steps: state.step_count as u64,
        t_final: state.t,
        series: "series.csv".into(),
        snapshots: names.clone(),
        report: Some("report.json".into()),
    };
    write_manifest(&manifest, dir.join("manifest.json"))?;
    Ok(RunSummary {
        config_hash: hash,
        dir,
        status,
        stop_reason,
        steps: manifest.steps,
        t_final: state.t,
        final_lambda: series.rows.last().map_or(f64::NAN, |r| r.lambda_est),
        report,
    })
}

/// Re-run the checks of a stored run from its manifest.
pub fn check_manifest(manifest_path: &Path) -> Result<CheckReport> {
    let m = read_manifest(manifest_path)?;
    let cfg: RunConfig = serde_json::from_value(m.config.clone())?;
    let series = read_series_csv(resolve(manifest_path, &m.series))?;
    let final_field = match m.snapshots.last() {
        Some(n) => Some(read_snapshot(resolve(manifest_path, n))?.0),
        None => None,
    };
    let load = || -> Result<Vec<Field>> {
        m.snapshots
            .iter()
            .map(|n| Ok(read_snapshot(resolve(manifest_path, n))?.0))
            .collect()
    };
    let mut report = check_run(&cfg, &series, final_field.as_ref(), &load)?;
    if let Some(r) = &m.report {
        if let Ok(old) = read_json::<CheckReport>(resolve(manifest_path, r)) {
            report.initial_conditions = old.initial_conditions;
        }
    }
    Ok(report)
}

/// One sweep axis: a dotted path into the run configuration and its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub path: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub base_config: RunConfig,
    #[serde(default)]
    pub sweep_axes: Vec<SweepAxis>,
    /// Overrides the analyses of the base configuration.
    #[serde(default)]
    pub analysis: Option<Vec<Analysis>>,
    #[serde(default = "default_cap")]
    pub run_cap: usize,
}

fn default_cap() -> usize {
    DEFAULT_RUN_CAP
}

fn set_path(root: &mut Value, path: &str, v: Value) -> Result<()> {
    let mut cur = root;
    for key in path.split('.') {
        cur = match cur {
            Value::Object(map) => map.get_mut(key),
            Value::Array(arr) => key.parse::<usize>().ok().and_then(|i| arr.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| {
            Error::Config(format!(
                "sweep path `{path}` does not exist in the base config"
            ))
        })?;
    }
    *cur = v;
    Ok(())
}

/// A concrete run of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub params: BTreeMap<String, Value>,
    pub config: RunConfig,
}

/// Cartesian product of the axes applied to the base configuration.
pub fn expand(scenario: &Scenario) -> Result<Vec<SweepPoint>> {
    let total: usize = scenario
        .sweep_axes
        .iter()
        .map(|a| a.values.len())
        .try_fold(1usize, |acc, n| acc.checked_mul(n))
        .ok_or_else(|| Error::Config("sweep size overflows".into()))?;
    if total > scenario.run_cap {
        return Err(Error::Config(format!(
            "sweep has {total} runs, more than the cap of {}",
            scenario.run_cap
        )));
    }
    let mut base = scenario.base_config.clone();
    if let Some(a) = &scenario.analysis {
        base.analysis = a.clone();
    }
    let base = serde_json::to_value(&base)?;
    let mut out = Vec::with_capacity(total);
    for k in 0..total {
        let mut v = base.clone();
        let mut params = BTreeMap::new();
        let mut rem = k;
        for axis in scenario.sweep_axes.iter().rev() {
            let i = rem % axis.values.len();
            rem /= axis.values.len();
            set_path(&mut v, &axis.path, axis.values[i].clone())?;
            params.insert(axis.path.clone(), axis.values[i].clone());
        }
        let config: RunConfig = serde_json::from_value(v)?;
        config.validate()?;
        out.push(SweepPoint { params, config });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub params: BTreeMap<String, Value>,
    pub config_hash: String,
    pub status: String,
    pub stop_reason: String,
    pub t_final: f64,
    pub t_hat: Option<f64>,
    pub final_lambda: f64,
    pub max_rel_err_mass: Option<f64>,
    pub max_rel_err_momentum: Option<f64>,
    pub max_rel_err_energy_flux: Option<f64>,
    pub resumed: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub name: String,
    pub scenario_hash: String,
    pub rows: Vec<SweepRow>,
}

fn row_from(params: BTreeMap<String, Value>, s: &RunSummary, resumed: bool) -> SweepRow {
    let id = s.report.identities.as_ref();
    SweepRow {
        params,
        config_hash: s.config_hash.clone(),
        status: s.status.clone(),
        stop_reason: s.stop_reason.clone(),
        t_final: s.t_final,
        t_hat: s.report.rate_fit.as_ref().map(|f| f.t_hat),
        final_lambda: s.final_lambda,
        max_rel_err_mass: id.map(|r| r.max_rel_err_mass),
        max_rel_err_momentum: id.map(|r| r.max_rel_err_momentum),
        max_rel_err_energy_flux: id.map(|r| r.max_rel_err_energy_flux),
        resumed,
        error: None,
    }
}

/// Load a completed run with the same hash instead of recomputing it.
fn resume(cfg: &RunConfig, out_root: &Path) -> Option<RunSummary> {
    let hash = config_hash(cfg).ok()?;
    let dir = run_dir(out_root, &hash);
    let m = read_manifest(dir.join("manifest.json")).ok()?;
    if m.config_hash != hash {
        return None;
    }
    let report: CheckReport = read_json(dir.join(m.report.as_deref()?)).ok()?;
    let series = read_series_csv(dir.join(&m.series)).ok()?;
    Some(RunSummary {
        config_hash: hash,
        dir,
        status: m.status,
        stop_reason: m.stop_reason,
        steps: m.steps,
        t_final: m.t_final,
        final_lambda: series.rows.last().map_or(f64::NAN, |r| r.lambda_est),
        report,
    })
}

/// Run every point of the scenario on a pool of `threads` workers (0 means
/// the rayon default) and write `summary.json`/`summary.csv`.
pub fn run_sweep(
    scenario: &Scenario,
    out_root: &Path,
    threads: usize,
) -> Result<(SweepSummary, PathBuf)> {
    let points = expand(scenario)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        points
            .par_iter()
            .map(|p| {
                if let Some(s) = resume(&p.config, out_root) {
                    return row_from(p.params.clone(), &s, true);
                }
                match execute_run(&p.config, out_root) {
                    Ok(s) => row_from(p.params.clone(), &s, false),
                    Err(e) => SweepRow {
                        params: p.params.clone(),
                        config_hash: config_hash(&p.config).unwrap_or_default(),
                        status: "error".into(),
                        stop_reason: String::new(),
                        t_final: f64::NAN,
                        t_hat: None,
                        final_lambda: f64::NAN,
                        max_rel_err_mass: None,
                        max_rel_err_momentum: None,
                        max_rel_err_energy_flux: None,
                        resumed: false,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect()
    });
    let scenario_hash = config_hash(scenario)?;
    let summary = SweepSummary {
        name: scenario.name.clone(),
        scenario_hash: scenario_hash.clone(),
        rows,
    };
    let dir = out_root
        .join("sweeps")
        .join(format!("{}-{}", scenario.name, scenario_hash));
    create_dir(&dir)?;
    write_json(&summary, dir.join("summary.json"))?;
    let csv = summary_table(&summary, ',');
    fs::write(dir.join("summary.csv"), csv).map_err(|e| Error::io(dir.join("summary.csv"), e))?;
    Ok((summary, dir))
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.6e}"))
}

/// Summary as delimited text, one line per run.
pub fn summary_table(s: &SweepSummary, sep: char) -> String {
    let keys: Vec<String> = s
        .rows
        .first()
        .map(|r| r.params.keys().cloned().collect())
        .unwrap_or_default();
    let mut head: Vec<String> = keys.clone();
    head.extend(
        [
            "status",
            "stop_reason",
            "t_final",
            "t_hat",
            "final_lambda",
            "mass_err",
            "momentum_err",
            "energy_flux_err",
            "config_hash",
        ]
        .iter()
        .map(|x| x.to_string()),
    );
    let sep_s = sep.to_string();
    let mut out = head.join(&sep_s);
    out.push('\n');
    for r in &s.rows {
        let mut cells: Vec<String> = keys
            .iter()
            .map(|k| r.params.get(k).map_or(String::new(), |v| v.to_string()))
            .collect();
        cells.push(r.status.clone());
        cells.push(r.stop_reason.clone());
        cells.push(format!("{:.6e}", r.t_final));
        cells.push(opt(r.t_hat));
        cells.push(format!("{:.6e}", r.final_lambda));
        cells.push(opt(r.max_rel_err_mass));
        cells.push(opt(r.max_rel_err_momentum));
        cells.push(opt(r.max_rel_err_energy_flux));
        cells.push(r.config_hash.clone());
        out.push_str(&cells.join(&sep_s));
        out.push('\n');
    }
    out
}

/// Base configuration of the shipped scenarios: `1D`, `n = 4096` on
/// `[−12, 12)`, run to `t = 10`.
pub fn canned_base() -> RunConfig {
    let grid = Grid::new(1, 4096, 12.0).expect("static grid");
    let mut sim = SimConfig::new(grid, 0.01);
    sim.dt0 = 1e-2;
    sim.cfl = 0.01;
    sim.t_end = 10.0;
    RunConfig {
        sim,
        initial_data: InitialData::ScaledGroundState {
            c: 1.05,
            lambda: 1.0,
            gamma: 0.0,
            x0: vec![],
            kick: vec![],
        },
        analysis: default_analysis(),
        thresholds: Thresholds::default(),
    }
}

fn axis(path: &str, values: &[f64]) -> SweepAxis {
    SweepAxis {
        path: path.into(),
        values: values.iter().map(|&v| Value::from(v)).collect(),
    }
}

/// Names accepted by [`canned_scenario`].
pub const CANNED: [&str; 3] = ["threshold", "damping", "perturb"];

pub fn canned_scenario(name: &str) -> Option<Scenario> {
    let base = canned_base();
    let (base, axes) = match name {
        "threshold" => (
            base,
            vec![
                axis("initial_data.c", &[0.90, 0.95, 0.99, 1.01, 1.05]),
                axis("a", &[0.0, 0.01, 0.1]),
            ],
        ),
        "damping" => (base, vec![axis("a", &[0.0, 1e-3, 1e-2, 1e-1, 1.0])]),
        "perturb" => {
            let mut b = base;
            b.initial_data = InitialData::Perturbed {
                base: Box::new(b.initial_data.clone()),
                beta: 1e-3,
            };
            (b, vec![axis("initial_data.beta", &[1e-3, 1e-2, 1e-1])])
        }
        _ => return None,
    };
    Some(Scenario {
        name: name.into(),
        base_config: base,
        sweep_axes: axes,
        analysis: None,
        run_cap: DEFAULT_RUN_CAP,
    })
}

/// A canned scenario by name, or a scenario file.
pub fn load_scenario(spec: &str) -> Result<Scenario> {
    if let Some(s) = canned_scenario(spec) {
        return Ok(s);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(Error::Config(format!(
            "`{spec}` is neither a scenario file nor one of {}",
            CANNED.join(", ")
        )));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let s: Scenario = serde_json::from_str(&text)?;
    s.base_config.validate()?;
    Ok(s)
}

/// Fit a stored series (CSV) or the series of a run manifest.
pub fn fit_file(path: &Path, opts: &FitOptions) -> Result<RateFit> {
    let series = if path.extension().is_some_and(|e| e == "json") {
        let m = read_manifest(path)?;
        read_series_csv(resolve(path, &m.series))?
    } else {
        read_series_csv(path)?
    };
    fit_blowup(&series, opts)
}

/// `true` when a run ended by focusing rather than reaching `t_end`.
pub fn is_blowup(status: &str) -> bool {
    status == label(&Status::BlowupStopped)
}

/// Solve for `Q` in dimension `d`, write `groundstate.csv` (`r,q,dq`) and
/// return the summary.
pub fn groundstate_report(d: usize, out_root: &Path) -> Result<Value> {
    let gs = cached_ground_state(d)?;
    let dir = out_root.join(format!("groundstate-d{d}"));
    create_dir(&dir)?;
    let mut csv = String::from("r,q,dq\n");
    for i in 0..gs.r.len() {
        csv.push_str(&format!(
            "{:.16e},{:.16e},{:.16e}\n",
            gs.r[i], gs.q[i], gs.dq[i]
        ));
    }
    let path = dir.join("groundstate.csv");
    fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
    let summary = serde_json::json!({
        "d": d,
        "q0": gs.q0,
        "mass": gs.mass,
        "grad_sq": gs.grad_sq,
        "energy": gs.energy(),
        "residual_max": gs.residual_max(),
        "shooting_width": gs.shooting_width,
        "table": path,
    });
    write_json(&summary, dir.join("summary.json"))?;
    Ok(summary)
}

/// Build `Q_b`, write `profile.csv` (`r,p,re_qb,im_qb,re_psi,im_psi`) and
/// return the summary; with `radiation` also solve for the outgoing wave.
pub fn profile_report(
    b: f64,
    eta: f64,
    d: usize,
    radiation: bool,
    out_root: &Path,
) -> Result<Value> {
    let p = solve_qb(b, eta, d, 1e-10)?;
    let gs = cached_ground_state(d)?;
    let dir = out_root.join(format!("profile-d{d}-b{b}-eta{eta}"));
    create_dir(&dir)?;
    let mut csv = String::from("r,p,re_qb,im_qb,re_psi,im_psi\n");
    for i in 0..p.r.len() {
        csv.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            p.r[i], p.p[i], p.qb[i].re, p.qb[i].im, p.psi[i].re, p.psi[i].im
        ));
    }
    let path = dir.join("profile.csv");
    fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
    let mut summary = serde_json::json!({
        "b": b,
        "eta": eta,
        "d": d,
        "r_b": p.r_b,
        "r_b_minus": p.r_b_minus,
        "p0": p.p0,
        "mass": p.mass_qb,
        "mass_excess": p.mass_qb - gs.mass,
        "energy": p.energy_qb,
        "psi_sup": p.psi_sup(),
        "truncated": p.truncated,
        "table": path,
    });
    if radiation {
        let rad = solve_radiation(b, eta, d, None)?;
        summary["radiation"] = serde_json::json!({
            "gamma_b": rad.gamma_b,
            "log_ratio": rad.gamma_b.ln() / (-std::f64::consts::PI / b),
            "plateau_oscillation": rad.plateau_oscillation,
            "fit_window": rad.fit_window,
        });
    }
    write_json(&summary, dir.join("summary.json"))?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        let mut c = canned_base();
        c.sim.grid = Grid::new(1, 256, 12.0).unwrap();
        c.sim.t_end = 0.05;
        c.sim.snapshot_stride = 2;
        c
    }

    #[test]
    fn missing_field_is_named() {
        let mut v = serde_json::to_value(small()).unwrap();
        v.as_object_mut().unwrap().remove("a");
        let err = parse_run_config(&v.to_string()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("`a`"), "{err}");
    }

    #[test]
    fn unsupported_dimension_is_a_config_error() {
        let mut v = serde_json::to_value(small()).unwrap();
        v["d"] = 5.into();
        v["grid"]["d"] = 5.into();
        let err = parse_run_config(&v.to_string()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn config_round_trips_through_json() {
        let c = small();
        let back = parse_run_config(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(config_hash(&back).unwrap(), config_hash(&c).unwrap());
    }

    #[test]
    fn sweep_expansion_and_cap() {
        let s = canned_scenario("threshold").unwrap();
        let pts = expand(&s).unwrap();
        assert_eq!(pts.len(), 15);
        assert!(matches!(
            pts[1].config.initial_data,
            InitialData::ScaledGroundState { c, .. } if c == 0.90
        ));
        assert_eq!(pts[1].config.sim.a, 0.01);
        let mut capped = s.clone();
        capped.run_cap = 10;
        assert!(expand(&capped).is_err());
        let mut bad = s;
        bad.sweep_axes[0].path = "initial_data.nope".into();
        assert!(expand(&bad).is_err());
        let p = expand(&canned_scenario("perturb").unwrap()).unwrap();
        assert!(
            matches!(p[2].config.initial_data, InitialData::Perturbed { beta, .. } if beta == 0.1)
        );
    }

    #[test]
    fn run_writes_a_checkable_directory() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small();
        let s = execute_run(&cfg, dir.path()).unwrap();
        assert_eq!(s.status, "completed");
        for f in ["manifest.json", "series.csv", "report.json", "config.json"] {
            assert!(s.dir.join(f).exists(), "{f}");
        }
        let rep = check_manifest(&s.dir.join("manifest.json")).unwrap();
        assert_eq!(rep.identities, s.report.identities);
        assert!(rep.passed(), "{:?}", rep.failures);

        let first = fs::read(s.dir.join("series.csv")).unwrap();
        execute_run(&cfg, dir.path()).unwrap();
        assert_eq!(fs::read(s.dir.join("series.csv")).unwrap(), first);
    }
}
