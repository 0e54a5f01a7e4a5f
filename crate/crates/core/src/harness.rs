//! Experiment configuration, single runs, ε-sweeps, rate fitting and the
//! files a sweep leaves behind.
//!
//! A run at one ε builds the profile with `δ = ε^a`, solves the
//! hyperbolic-wave corrector on the snapshot times, starts Navier-Stokes
//! from the ansatz plus perturbation and measures, at every snapshot, the
//! scaled energy of the perturbation and (inside `[h_time, T]`) the error
//! against the exact fan.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{initial_data, Ansatz, PerturbationSpec};
use crate::diagnostics::{fan_linf_error, in_window, EnergyRecord, EnergyTracker};
use crate::error::{Error, Result};
use crate::gas_model::{Family, GasLaw, GasState1D, RiemannEndStates};
use crate::hyperbolic_wave::{self, Grid1D, HypWaveParams};
use crate::ns_solver2d::{run_with_observer, Field2D, MassBudget, SolverConfig};
use crate::rarefaction_profile::RarefactionProfile;

/// Which snapshots a run writes to disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnapshotOutput {
    None,
    Final,
    All,
}

impl std::str::FromStr for SnapshotOutput {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "final" => Ok(Self::Final),
            "all" => Ok(Self::All),
            other => Err(Error::Config(format!(
                "snapshots must be none, final or all, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub gamma: f64,
    pub mu: f64,
    pub lam: f64,
    pub rho_left: f64,
    pub u1_left: f64,
    pub rho_right: f64,
    pub eps_list: Vec<f64>,
    pub delta_exponent: f64,
    pub t_end: f64,
    pub h_time: f64,
    pub half_length: f64,
    pub nx: usize,
    pub ny: usize,
    pub cfl: f64,
    pub snapshot_dt: f64,
    /// Corrector grid has `hypwave_refine · nx` cells.
    pub hypwave_refine: usize,
    /// Time shift of the Burgers layer inside the profile.
    pub time_offset: f64,
    pub pert_amplitude: f64,
    pub pert_seed: u64,
    pub pert_modes: usize,
    pub snapshots: SnapshotOutput,
    pub output_dir: Option<PathBuf>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            mu: 1.0,
            lam: 0.0,
            rho_left: 1.0,
            u1_left: 0.0,
            rho_right: 4.0,
            eps_list: vec![0.04, 0.02, 0.01, 0.005],
            delta_exponent: 1.0 / 6.0,
            t_end: 1.0,
            h_time: 0.1,
            half_length: 20.0,
            nx: 4000,
            ny: 16,
            cfl: 0.5,
            snapshot_dt: 0.05,
            hypwave_refine: 1,
            time_offset: 0.0,
            pert_amplitude: 0.0,
            pert_seed: 0,
            pert_modes: 2,
            snapshots: SnapshotOutput::Final,
            output_dir: None,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse {key} = {value:?}")))
}

impl SweepConfig {
    /// Set one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "gamma" => self.gamma = parse_num(key, v)?,
            "mu" => self.mu = parse_num(key, v)?,
            "lam" => self.lam = parse_num(key, v)?,
            "rho_left" => self.rho_left = parse_num(key, v)?,
            "u1_left" => self.u1_left = parse_num(key, v)?,
            "rho_right" => self.rho_right = parse_num(key, v)?,
            "eps_list" => {
                self.eps_list = v
                    .trim_matches(|c| c == '[' || c == ']')
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| parse_num(key, s))
                    .collect::<Result<_>>()?
            }
            "delta_exponent" => self.delta_exponent = parse_num(key, v)?,
            "t_end" | "T" => self.t_end = parse_num(key, v)?,
            "h_time" => self.h_time = parse_num(key, v)?,
            "half_length" | "L" => self.half_length = parse_num(key, v)?,
            "nx" => self.nx = parse_num(key, v)?,
            "ny" => self.ny = parse_num(key, v)?,
            "cfl" => self.cfl = parse_num(key, v)?,
            "snapshot_dt" => self.snapshot_dt = parse_num(key, v)?,
            "hypwave_refine" => self.hypwave_refine = parse_num(key, v)?,
            "time_offset" => self.time_offset = parse_num(key, v)?,
            "pert_amplitude" => self.pert_amplitude = parse_num(key, v)?,
            "pert_seed" => self.pert_seed = parse_num(key, v)?,
            "pert_modes" => self.pert_modes = parse_num(key, v)?,
            "snapshots" => self.snapshots = v.parse()?,
            "output_dir" => {
                self.output_dir = if v.is_empty() || v == "null" {
                    None
                } else {
                    Some(PathBuf::from(v))
                }
            }
            other => return Err(Error::Config(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    /// Apply a `key=value` override.
    pub fn apply_override(&mut self, text: &str) -> Result<()> {
        let (k, v) = text
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {text:?} is not key=value")))?;
        self.set(k, v)
    }

    /// Parse either a JSON object or flat `key = value` lines (`#` starts a
    /// comment) on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let trimmed = text.trim_start();
        if trimmed.starts_with('{') {
            let value: serde_json::Value = serde_json::from_str(text)
                .map_err(|e| Error::Config(format!("invalid JSON configuration: {e}")))?;
            let obj = value
                .as_object()
                .ok_or_else(|| Error::Config("JSON configuration must be an object".into()))?;
            for (k, v) in obj {
                let s = match v {
                    serde_json::Value::String(s) => s.clone(),
                    serde_json::Value::Null => String::new(),
                    serde_json::Value::Array(items) => items
                        .iter()
                        .map(|x| x.to_string())
                        .collect::<Vec<_>>()
                        .join(","),
                    other => other.to_string(),
                };
                cfg.set(k, &s)?;
            }
        } else {
            for (n, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    Error::Config(format!("line {}: expected key = value, got {line:?}", n + 1))
                })?;
                cfg.set(k, v)?;
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Every parameter as `key = value` lines; [`SweepConfig::parse`]
    /// reads it back to an equal config.
    pub fn echo(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let mut out = String::new();
        for (k, v) in value.as_object().expect("config is an object") {
            let text = match v {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Null => String::new(),
                serde_json::Value::Array(items) => items
                    .iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
                other => other.to_string(),
            };
            let _ = writeln!(out, "{k} = {text}");
        }
        out
    }

    pub fn law(&self) -> Result<GasLaw> {
        GasLaw::new(self.gamma)
    }

    /// End states with `u1+` from the 2-rarefaction connection.
    pub fn end_states(&self) -> Result<RiemannEndStates> {
        let law = self.law()?;
        let left = GasState1D::new(self.rho_left, self.u1_left)
            .map_err(|e| Error::Config(format!("left state: {e}")))?;
        if !(self.rho_right >= self.rho_left) {
            return Err(Error::Config(format!(
                "a 2-rarefaction needs rho_right >= rho_left, got {} < {}",
                self.rho_right, self.rho_left
            )));
        }
        let right = law
            .connect_2rarefaction(left, self.rho_right)
            .map_err(|e| Error::Config(format!("right state: {e}")))?;
        RiemannEndStates::rarefaction(&law, left, right)
    }

    pub fn delta(&self, eps: f64) -> f64 {
        eps.powf(self.delta_exponent)
    }

    pub fn validate(&self) -> Result<()> {
        self.end_states()?;
        if !(self.mu > 0.0) || !(self.mu + self.lam >= 0.0) {
            return Err(Error::Config(format!(
                "viscosities need mu > 0 and mu + lam >= 0 (got mu = {}, lam = {})",
                self.mu, self.lam
            )));
        }
        if self.eps_list.is_empty() {
            return Err(Error::Config("eps_list is empty".into()));
        }
        if self.eps_list.iter().any(|e| !(*e > 0.0)) || self.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config(format!(
                "eps_list must be positive and strictly decreasing, got {:?}",
                self.eps_list
            )));
        }
        if !(self.delta_exponent > 0.0) {
            return Err(Error::Config("delta_exponent must be positive".into()));
        }
        if !(self.h_time > 0.0 && self.h_time < self.t_end) {
            return Err(Error::Config(format!(
                "need 0 < h_time < T, got h_time = {}, T = {}",
                self.h_time, self.t_end
            )));
        }
        if !(self.snapshot_dt > 0.0) {
            return Err(Error::Config("snapshot_dt must be positive".into()));
        }
        if self.hypwave_refine == 0 {
            return Err(Error::Config("hypwave_refine must be at least 1".into()));
        }
        if !(self.time_offset >= 0.0) {
            return Err(Error::Config("time_offset must be non-negative".into()));
        }
        if !(self.pert_amplitude >= 0.0) {
            return Err(Error::Config("pert_amplitude must be non-negative".into()));
        }
        if !(1..=crate::ansatz::MAX_MODES).contains(&self.pert_modes) {
            return Err(Error::Config(format!(
                "pert_modes must be 1 to {}, got {}",
                crate::ansatz::MAX_MODES,
                self.pert_modes
            )));
        }
        self.solver_config(self.eps_list[0])?.validate()?;
        Ok(())
    }

    /// `0, dt, 2dt, ...` up to `T`, plus `h_time`, sorted and deduplicated.
    pub fn snapshot_times(&self) -> Vec<f64> {
        let n = (self.t_end / self.snapshot_dt - 1e-9).ceil() as usize;
        let mut times: Vec<f64> = (0..n).map(|k| k as f64 * self.snapshot_dt).collect();
        times.push(self.t_end);
        times.push(self.h_time);
        times.sort_by(f64::total_cmp);
        times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * self.t_end.max(1.0));
        times
    }

    pub fn solver_config(&self, eps: f64) -> Result<SolverConfig> {
        Ok(SolverConfig {
            half_length: self.half_length,
            nx: self.nx,
            ny: self.ny,
            cfl: self.cfl,
            eps,
            mu: self.mu,
            lam: self.lam,
            law: self.law()?,
            snapshot_times: self.snapshot_times(),
            density_floor: 0.5 * self.rho_left.min(self.rho_right),
        })
    }

    fn perturbation(&self) -> PerturbationSpec {
        PerturbationSpec {
            amplitude: self.pert_amplitude,
            seed: self.pert_seed,
            mode_count: self.pert_modes,
        }
    }
}

/// One row of the sweep table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub eps: f64,
    pub delta: f64,
    pub sup_err: f64,
    pub e_tau_sup: f64,
    pub hypwave_l2: f64,
    pub runtime_seconds: f64,
}

impl SweepRecord {
    /// Equality ignoring the wall-clock time.
    pub fn same_result(&self, other: &Self) -> bool {
        self.eps == other.eps
            && self.delta == other.delta
            && self.sup_err == other.sup_err
            && self.e_tau_sup == other.e_tau_sup
            && self.hypwave_l2 == other.hypwave_l2
    }

    /// `sup_err / (ε^{1/6} |ln ε|)`.
    pub fn normalized_err(&self) -> f64 {
        self.sup_err / (self.eps.powf(1.0 / 6.0) * self.eps.ln().abs())
    }

    /// `sup_τ E² / (ε/δ⁴)`.
    pub fn normalized_energy(&self) -> f64 {
        self.e_tau_sup * self.e_tau_sup / (self.eps / self.delta.powi(4))
    }
}

/// Corrector summary stored with a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypWaveSummary {
    pub steps: usize,
    pub dt: f64,
    pub l2_final: f64,
    pub l2_dx_final: f64,
    pub linf_sup: f64,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub record: SweepRecord,
    pub energy: Vec<EnergyRecord>,
    pub hypwave: HypWaveSummary,
    pub steps: usize,
    pub dt_min: f64,
    pub dt_max: f64,
    pub mass: MassBudget,
    /// Largest row-to-row difference over all snapshots.
    pub x2_variation: f64,
    pub final_field: Field2D,
}

#[derive(Serialize)]
struct RunMetadata<'a> {
    config: &'a SweepConfig,
    eps: f64,
    delta: f64,
    u1_right: f64,
    steps: usize,
    dt_min: f64,
    dt_max: f64,
    mass_budget: &'a MassBudget,
    x2_variation: f64,
    hypwave: &'a HypWaveSummary,
    record: &'a SweepRecord,
    diagnostics: &'a [EnergyRecord],
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// `x1,x2,rho,m1,m2` rows.
pub fn field_csv(field: &Field2D) -> String {
    let grid = field.grid();
    let mut out = String::from("x1,x2,rho,m1,m2\n");
    for j in 0..field.ny {
        for i in 0..field.nx {
            let k = field.idx(i, j);
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                grid.x1(i),
                grid.x2(j),
                field.rho[k],
                field.m1[k],
                field.m2[k]
            );
        }
    }
    out
}

pub fn run_dir_name(eps: f64) -> String {
    format!("eps_{eps}")
}

/// Full pipeline at one ε. Writes metadata and snapshots under `out`
/// when given.
pub fn run_single(cfg: &SweepConfig, eps: f64, out: Option<&Path>) -> Result<RunResult> {
    let start = Instant::now();
    let law = cfg.law()?;
    let ends = cfg.end_states()?;
    let delta = cfg.delta(eps);
    let profile = RarefactionProfile::new(law, ends, delta)?.with_time_offset(cfg.time_offset)?;
    let solver = cfg.solver_config(eps)?;
    solver.validate()?;
    let speed = [ends.left, ends.right]
        .iter()
        .map(|s| law.char_speed(Family::Second, *s).abs())
        .fold(0.0, f64::max);
    solver.validate_domain(speed, cfg.t_end, delta)?;
    let grid = solver.grid()?;
    let times = solver.snapshot_times.clone();

    let wave_grid = Grid1D::new(cfg.half_length, cfg.nx * cfg.hypwave_refine)?;
    let wave = hyperbolic_wave::solve(
        &profile,
        &HypWaveParams::new(eps, cfg.mu, cfg.lam),
        &times,
        wave_grid,
    )?;
    let last = times.len() - 1;
    let hypwave = HypWaveSummary {
        steps: wave.steps,
        dt: wave.dt,
        l2_final: wave.l2_norm(last),
        l2_dx_final: wave.derivative_l2_norm(last, 1),
        linf_sup: wave.sup_linf(),
    };
    let ansatz = Ansatz::new(profile, wave, grid.line());
    let slice0 = ansatz.build(0.0)?;
    let initial = initial_data(&slice0, &cfg.perturbation(), &grid, eps, ends.rho_min())?;

    let run_dir = out.map(|o| o.join(run_dir_name(eps)));
    if let Some(d) = &run_dir {
        ensure_dir(d)?;
    }
    let mut tracker = EnergyTracker::new(eps)?;
    let mut sup_err = 0.0_f64;
    let mut window_hit = false;
    let mut x2_variation = 0.0_f64;
    let summary = run_with_observer(&initial, &solver, &profile, |t, field| {
        let slice = ansatz.build(t)?;
        let fan = if in_window(t, cfg.h_time, cfg.t_end) {
            let e = fan_linf_error(field, t, &law, &ends)?;
            sup_err = sup_err.max(e);
            window_hit = true;
            Some(e)
        } else {
            None
        };
        tracker.observe(t, field, &slice, &law, fan)?;
        x2_variation = x2_variation.max(field.x2_variation());
        if let (Some(d), SnapshotOutput::All) = (&run_dir, cfg.snapshots) {
            write_file(&d.join(format!("snapshot_t{t:.6}.csv")), &field_csv(field))?;
        }
        Ok(())
    })?;
    if !window_hit {
        return Err(Error::Usage(format!(
            "no snapshot inside [{}, {}]",
            cfg.h_time, cfg.t_end
        )));
    }

    let record = SweepRecord {
        eps,
        delta,
        sup_err,
        e_tau_sup: tracker.sup_e_tau(),
        hypwave_l2: hypwave.l2_final,
        runtime_seconds: start.elapsed().as_secs_f64(),
    };
    let result = RunResult {
        record,
        energy: tracker.records,
        hypwave,
        steps: summary.steps,
        dt_min: summary.dt_min,
        dt_max: summary.dt_max,
        mass: summary.mass,
        x2_variation,
        final_field: summary.final_field,
    };
    if let Some(d) = &run_dir {
        let meta = RunMetadata {
            config: cfg,
            eps,
            delta,
            u1_right: ends.right.u1,
            steps: result.steps,
            dt_min: result.dt_min,
            dt_max: result.dt_max,
            mass_budget: &result.mass,
            x2_variation: result.x2_variation,
            hypwave: &result.hypwave,
            record: &result.record,
            diagnostics: &result.energy,
        };
        let json = serde_json::to_string_pretty(&meta)
            .map_err(|e| Error::Numerical(format!("metadata serialization: {e}")))?;
        write_file(&d.join("metadata.json"), &json)?;
        if cfg.snapshots == SnapshotOutput::Final {
            write_file(&d.join("snapshot_final.csv"), &field_csv(&result.final_field))?;
        }
    }
    log::info!(
        "eps = {eps}: sup_err = {:.6}, E_sup = {:.4e}, {} steps, {:.1} s",
        result.record.sup_err,
        result.record.e_tau_sup,
        result.steps,
        result.record.runtime_seconds
    );
    Ok(result)
}

/// Outcome of a sweep: successful runs in `eps_list` order and the
/// failures with their reasons.
#[derive(Debug)]
pub struct SweepOutcome {
    pub runs: Vec<RunResult>,
    pub failures: Vec<(f64, Error)>,
}

impl SweepOutcome {
    pub fn records(&self) -> Vec<SweepRecord> {
        self.runs.iter().map(|r| r.record).collect()
    }
}

/// Run every ε, concurrently on the current rayon pool. A failing run is
/// recorded and does not stop the others.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    let out = cfg.output_dir.as_deref();
    let results: Vec<(f64, Result<RunResult>)> = cfg
        .eps_list
        .par_iter()
        .map(|&eps| (eps, run_single(cfg, eps, out)))
        .collect();
    let mut outcome = SweepOutcome {
        runs: Vec::new(),
        failures: Vec::new(),
    };
    for (eps, r) in results {
        match r {
            Ok(run) => outcome.runs.push(run),
            Err(e) => {
                log::warn!("run at eps = {eps} failed: {e}");
                outcome.failures.push((eps, e));
            }
        }
    }
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_file(&dir.join("config_echo.txt"), &cfg.echo())?;
        if !outcome.runs.is_empty() {
            emit(&outcome.records(), dir)?;
        }
        if !outcome.failures.is_empty() {
            let text: String = outcome
                .failures
                .iter()
                .map(|(eps, e)| format!("{eps}: {e}\n"))
                .collect();
            write_file(&dir.join("failures.txt"), &text)?;
        }
    }
    Ok(outcome)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateModel {
    /// `e = C ε^α`.
    PurePower,
    /// `e = C ε^α |ln ε|`.
    PowerLog,
}

impl std::str::FromStr for RateModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pure_power" => Ok(Self::PurePower),
            "power_log" => Ok(Self::PowerLog),
            other => Err(Error::Usage(format!(
                "rate model must be pure_power or power_log, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub exponent: f64,
    pub constant: f64,
    /// Largest absolute residual in log space.
    pub max_residual: f64,
}

/// Least-squares line through `(ln x, ln y)`.
pub fn log_log_fit(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 2 {
        return Err(Error::Usage("a log-log fit needs at least two points".into()));
    }
    if points.iter().any(|(x, y)| !(*x > 0.0) || !(*y > 0.0)) {
        return Err(Error::Usage("log-log fit needs positive data".into()));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Usage("log-log fit needs distinct abscissae".into()));
    }
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let max_residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - slope * x - icpt).abs())
        .fold(0.0, f64::max);
    Ok(RateFit {
        exponent: slope,
        constant: icpt.exp(),
        max_residual,
    })
}

/// Fit `sup_err` against ε.
pub fn fit_rate(records: &[SweepRecord], model: RateModel) -> Result<RateFit> {
    if records.len() < 3 {
        return Err(Error::Usage(format!(
            "rate fitting needs at least 3 records, got {}",
            records.len()
        )));
    }
    let points: Vec<(f64, f64)> = records
        .iter()
        .map(|r| match model {
            RateModel::PurePower => (r.eps, r.sup_err),
            RateModel::PowerLog => (r.eps, r.sup_err / r.eps.ln().abs()),
        })
        .collect();
    log_log_fit(&points)
}

/// Write `sweep.csv`, `sweep.json` and `plot_data.csv` into `dir`.
pub fn emit(records: &[SweepRecord], dir: &Path) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        return Err(Error::Usage("no records to emit".into()));
    }
    ensure_dir(dir)?;
    let mut csv = String::from("eps,delta,sup_err,e_tau_sup,hypwave_l2,runtime_seconds\n");
    for r in records {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.eps, r.delta, r.sup_err, r.e_tau_sup, r.hypwave_l2, r.runtime_seconds
        );
    }
    let mut plot = String::from("eps,log_eps,sup_err,log_sup_err,normalized_err,normalized_energy\n");
    for r in records {
        let _ = writeln!(
            plot,
            "{},{},{},{},{},{}",
            r.eps,
            r.eps.ln(),
            r.sup_err,
            r.sup_err.ln(),
            r.normalized_err(),
            r.normalized_energy()
        );
    }
    let json = serde_json::to_string_pretty(records)
        .map_err(|e| Error::Numerical(format!("record serialization: {e}")))?;
    let paths = [
        (dir.join("sweep.csv"), csv),
        (dir.join("sweep.json"), json),
        (dir.join("plot_data.csv"), plot),
    ];
    for (p, text) in &paths {
        write_file(p, text)?;
    }
    Ok(paths.into_iter().map(|(p, _)| p).collect())
}

/// Read records back from `sweep.csv` or `sweep.json`.
pub fn read_records(path: &Path) -> Result<Vec<SweepRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if path.extension().and_then(|e| e.to_str()) == Some("json") {
        return serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())));
    }
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Config(format!("{} is empty", path.display())))?
        .split(',')
        .collect();
    let mut out = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let row: BTreeMap<&str, f64> = header
            .iter()
            .zip(line.split(','))
            .map(|(k, v)| Ok((*k, parse_num(k, v)?)))
            .collect::<Result<_>>()?;
        let get = |k: &str| {
            row.get(k)
                .copied()
                .ok_or_else(|| Error::Config(format!("{}: missing column {k}", path.display())))
        };
        out.push(SweepRecord {
            eps: get("eps")?,
            delta: get("delta")?,
            sup_err: get("sup_err")?,
            e_tau_sup: get("e_tau_sup")?,
            hypwave_l2: get("hypwave_l2")?,
            runtime_seconds: get("runtime_seconds")?,
        });
    }
    Ok(out)
}
