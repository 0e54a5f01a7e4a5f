//! `rarelab`: command-line front end for the rarefaction-wave experiments.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rarefaction_lab::harness::{self, RateModel, SweepConfig};
use rarefaction_lab::hyperbolic_wave::{self, Grid1D, HypWaveParams};
use rarefaction_lab::rarefaction_profile::RarefactionProfile;
use rarefaction_lab::{Error, Result};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "rarelab", version, about = "Vanishing-viscosity experiments for planar 2-rarefaction waves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Configuration file (JSON object or key = value lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, env = "RARELAB_THREADS")]
    threads: Option<usize>,
    /// `key=value`, applied after the config file; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the approximate rarefaction profile and the exact fan.
    Profile {
        #[command(flatten)]
        common: Common,
        /// ε selecting δ = ε^a (default: first of eps_list).
        #[arg(long)]
        eps: Option<f64>,
        /// Sample time (default: T).
        #[arg(long)]
        t: Option<f64>,
    },
    /// Solve the hyperbolic-wave corrector for every ε of the sweep.
    Hypwave {
        #[command(flatten)]
        common: Common,
    },
    /// One full Navier-Stokes run.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// ε of the run (default: first of eps_list).
        #[arg(long)]
        eps: Option<f64>,
    },
    /// The ε-sweep: one run per entry of eps_list.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Fit error rates to a sweep table.
    Rates {
        #[command(flatten)]
        common: Common,
        /// sweep.csv or sweep.json.
        #[arg(long)]
        input: PathBuf,
        /// pure_power or power_log.
        #[arg(long, default_value = "power_log")]
        model: String,
    },
}

fn load_config(common: &Common) -> Result<SweepConfig> {
    let mut cfg = match &common.config {
        Some(path) => SweepConfig::load(path)?,
        None => SweepConfig::default(),
    };
    for o in &common.overrides {
        cfg.apply_override(o)?;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = Some(out.clone());
    }
    Ok(cfg)
}

fn out_dir(cfg: &SweepConfig) -> PathBuf {
    cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("rarelab-output"))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    }
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn profile_cmd(cfg: &SweepConfig, eps: Option<f64>, t: Option<f64>) -> Result<()> {
    cfg.validate()?;
    let eps = eps.unwrap_or(cfg.eps_list[0]);
    let t = t.unwrap_or(cfg.t_end);
    let law = cfg.law()?;
    let ends = cfg.end_states()?;
    let profile = RarefactionProfile::new(law, ends, cfg.delta(eps))?.with_time_offset(cfg.time_offset)?;
    let grid = Grid1D::new(cfg.half_length, cfg.nx)?;
    let mut csv = String::from("x1,w,rho,u1,m1,rho_fan,u1_fan\n");
    for i in 0..grid.n {
        let x = grid.x(i);
        let p = profile.eval(t, x)?;
        let f = profile.fan_state(t, x)?;
        let _ = writeln!(csv, "{x},{},{},{},{},{},{}", p.burgers.w, p.rho, p.u1, p.m1, f.rho, f.u1);
    }
    let path = out_dir(cfg).join(format!("profile_eps_{eps}_t_{t}.csv"));
    write(&path, &csv)?;
    println!("{}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct HypWaveRecord {
    eps: f64,
    delta: f64,
    l2_d: f64,
    linf_d: f64,
    slope: Option<f64>,
}

fn hypwave_cmd(cfg: &SweepConfig) -> Result<()> {
    cfg.validate()?;
    let law = cfg.law()?;
    let ends = cfg.end_states()?;
    let dir = out_dir(cfg);
    let times = cfg.snapshot_times();
    let mut records = Vec::new();
    for &eps in &cfg.eps_list {
        let delta = cfg.delta(eps);
        let profile = RarefactionProfile::new(law, ends, delta)?.with_time_offset(cfg.time_offset)?;
        let grid = Grid1D::new(cfg.half_length, cfg.nx * cfg.hypwave_refine)?;
        let w = hyperbolic_wave::solve(&profile, &HypWaveParams::new(eps, cfg.mu, cfg.lam), &times, grid)?;
        let mut csv = String::from("t,x1,d1,d2,D1,D2\n");
        for (k, t) in w.times.iter().enumerate() {
            for i in 0..grid.n {
                let _ = writeln!(
                    csv,
                    "{t},{},{},{},{},{}",
                    grid.x(i),
                    w.d1[k][i],
                    w.d2[k][i],
                    w.big_d1[k][i],
                    w.big_d2[k][i]
                );
            }
        }
        write(&dir.join(format!("hypwave_eps_{eps}.csv")), &csv)?;
        let last = w.times.len() - 1;
        records.push(HypWaveRecord {
            eps,
            delta,
            l2_d: w.l2_norm(last),
            linf_d: w.sup_linf(),
            slope: None,
        });
    }
    if records.len() >= 2 {
        let points: Vec<(f64, f64)> = records.iter().map(|r| (r.eps / r.delta, r.l2_d)).collect();
        let fit = harness::log_log_fit(&points)?;
        for r in &mut records {
            r.slope = Some(fit.exponent);
        }
    }
    let json = serde_json::to_string_pretty(&records).map_err(|e| Error::Numerical(e.to_string()))?;
    write(&dir.join("hypwave_sweep.json"), &json)?;
    println!("{json}");
    Ok(())
}

fn simulate_cmd(cfg: &SweepConfig, eps: Option<f64>) -> Result<()> {
    cfg.validate()?;
    let eps = eps.unwrap_or(cfg.eps_list[0]);
    let dir = out_dir(cfg);
    write(&dir.join("config_echo.txt"), &cfg.echo())?;
    let r = harness::run_single(cfg, eps, Some(&dir))?;
    println!(
        "eps = {eps}  delta = {:.6}  sup_err = {:.6e}  E_sup = {:.6e}  steps = {}  mass defect/T = {:.3e}",
        r.record.delta, r.record.sup_err, r.record.e_tau_sup, r.steps, r.mass.defect_per_unit_time
    );
    Ok(())
}

fn sweep_cmd(cfg: &SweepConfig) -> Result<bool> {
    let mut cfg = cfg.clone();
    cfg.output_dir = Some(out_dir(&cfg));
    let outcome = harness::run_sweep(&cfg)?;
    println!("eps,delta,sup_err,e_tau_sup,hypwave_l2,runtime_seconds");
    for r in outcome.records() {
        println!(
            "{},{},{},{},{},{}",
            r.eps, r.delta, r.sup_err, r.e_tau_sup, r.hypwave_l2, r.runtime_seconds
        );
    }
    for (eps, e) in &outcome.failures {
        eprintln!("run at eps = {eps} failed: {e}");
    }
    Ok(outcome.failures.is_empty())
}

fn rates_cmd(input: &Path, model: &str) -> Result<()> {
    let model: RateModel = model.parse()?;
    let records = harness::read_records(input)?;
    let fit = harness::fit_rate(&records, model)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&fit).map_err(|e| Error::Numerical(e.to_string()))?
    );
    Ok(())
}

fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<bool> {
    let common = match &cli.command {
        Command::Profile { common, .. }
        | Command::Hypwave { common }
        | Command::Simulate { common, .. }
        | Command::Sweep { common }
        | Command::Rates { common, .. } => common.clone(),
    };
    init_threads(common.threads)?;
    let cfg = load_config(&common)?;
    match cli.command {
        Command::Profile { eps, t, .. } => profile_cmd(&cfg, eps, t).map(|_| true),
        Command::Hypwave { .. } => hypwave_cmd(&cfg).map(|_| true),
        Command::Simulate { eps, .. } => simulate_cmd(&cfg, eps).map(|_| true),
        Command::Sweep { .. } => sweep_cmd(&cfg),
        Command::Rates { input, model, .. } => rates_cmd(&input, &model).map(|_| true),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
