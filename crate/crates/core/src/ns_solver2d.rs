//! Explicit solver for the 2D compressible isentropic Navier-Stokes system
//!
//! ```text
//! ρ_t + div(ρu) = 0,
//! (ρu)_t + div(ρu⊗u) + ∇p(ρ) = με Δu + (μ+λ)ε ∇div u,
//! ```
//!
//! in conservative variables `(ρ, m1, m2)` on `[-L, L] × T¹`.
//!
//! Convective fluxes use a Rusanov (local Lax-Friedrichs) flux on van Leer
//! limited linear reconstructions; pressure and viscous terms are central.
//! Time stepping is two-stage SSP Runge-Kutta. The `x1` ends carry two
//! ghost layers filled from a time-dependent Dirichlet state; `x2` wraps.
//! Grid arrays are row-major with index `j * nx + i` (rows along `x1`).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gas_model::GasLaw;
use crate::hyperbolic_wave::Grid1D;
use crate::rarefaction_profile::RarefactionProfile;

/// Cell-centred grid on `[-L, L] × [0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub half_length: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid2D {
    pub fn new(half_length: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(half_length > 0.0) || nx < 4 || ny < 1 {
            return Err(Error::Config(format!(
                "2D grid needs L > 0, nx >= 4, ny >= 1 (got L = {half_length}, nx = {nx}, ny = {ny})"
            )));
        }
        Ok(Self { half_length, nx, ny })
    }

    #[inline]
    pub fn h1(&self) -> f64 {
        2.0 * self.half_length / self.nx as f64
    }

    #[inline]
    pub fn h2(&self) -> f64 {
        1.0 / self.ny as f64
    }

    #[inline]
    pub fn x1(&self, i: usize) -> f64 {
        -self.half_length + (i as f64 + 0.5) * self.h1()
    }

    #[inline]
    pub fn x2(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.h2()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The `x1` line of the grid.
    pub fn line(&self) -> Grid1D {
        Grid1D {
            half_length: self.half_length,
            n: self.nx,
        }
    }
}

/// Conservative fields `(ρ, m1, m2)` at cell centres.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    pub half_length: f64,
    pub nx: usize,
    pub ny: usize,
    pub h1: f64,
    pub h2: f64,
    pub rho: Vec<f64>,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
}

impl Field2D {
    pub fn zeros(grid: &Grid2D) -> Self {
        Self {
            half_length: grid.half_length,
            nx: grid.nx,
            ny: grid.ny,
            h1: grid.h1(),
            h2: grid.h2(),
            rho: vec![0.0; grid.len()],
            m1: vec![0.0; grid.len()],
            m2: vec![0.0; grid.len()],
        }
    }

    /// Field from a pointwise map `(x1, x2) -> (ρ, m1, m2)`.
    pub fn from_fn(grid: &Grid2D, f: impl Fn(f64, f64) -> [f64; 3]) -> Self {
        let mut out = Self::zeros(grid);
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let [r, a, b] = f(grid.x1(i), grid.x2(j));
                let k = j * grid.nx + i;
                out.rho[k] = r;
                out.m1[k] = a;
                out.m2[k] = b;
            }
        }
        out
    }

    /// `x2`-independent field from `x1` profiles of `ρ` and `m1` (`m2 = 0`).
    pub fn from_columns(grid: &Grid2D, rho: &[f64], m1: &[f64]) -> Result<Self> {
        if rho.len() != grid.nx || m1.len() != grid.nx {
            return Err(Error::Usage(format!(
                "column length {} / {} does not match nx = {}",
                rho.len(),
                m1.len(),
                grid.nx
            )));
        }
        let mut out = Self::zeros(grid);
        for j in 0..grid.ny {
            out.rho[j * grid.nx..(j + 1) * grid.nx].copy_from_slice(rho);
            out.m1[j * grid.nx..(j + 1) * grid.nx].copy_from_slice(m1);
        }
        Ok(out)
    }

    pub fn grid(&self) -> Grid2D {
        Grid2D {
            half_length: self.half_length,
            nx: self.nx,
            ny: self.ny,
        }
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.h1 == other.h1 && self.h2 == other.h2
    }

    /// `∫ρ dx` by the midpoint rule, summed row by row in a fixed order.
    pub fn total_mass(&self) -> f64 {
        let rows: Vec<f64> = self.rho.chunks(self.nx).map(|r| r.iter().sum()).collect();
        rows.iter().sum::<f64>() * self.h1 * self.h2
    }

    pub fn min_density(&self) -> f64 {
        self.rho.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Periodic shift by `k` cells in `x2`: row `j` moves to row `j + k`.
    pub fn shift_x2(&self, k: usize) -> Self {
        let mut out = self.clone();
        let (nx, ny) = (self.nx, self.ny);
        for j in 0..ny {
            let dst = ((j + k) % ny) * nx;
            let src = j * nx;
            out.rho[dst..dst + nx].copy_from_slice(&self.rho[src..src + nx]);
            out.m1[dst..dst + nx].copy_from_slice(&self.m1[src..src + nx]);
            out.m2[dst..dst + nx].copy_from_slice(&self.m2[src..src + nx]);
        }
        out
    }

    /// Largest deviation of any row from row 0, over all three fields.
    pub fn x2_variation(&self) -> f64 {
        let nx = self.nx;
        let mut worst = 0.0_f64;
        for v in [&self.rho, &self.m1, &self.m2] {
            for j in 1..self.ny {
                for i in 0..nx {
                    worst = worst.max((v[j * nx + i] - v[i]).abs());
                }
            }
        }
        worst
    }

    /// Row 0 as `x1` profiles `(ρ, u1, u2)`.
    pub fn primitive_row(&self, j: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let r = j * self.nx..(j + 1) * self.nx;
        let rho = self.rho[r.clone()].to_vec();
        let u1 = self.m1[r.clone()].iter().zip(&rho).map(|(m, d)| m / d).collect();
        let u2 = self.m2[r].iter().zip(&rho).map(|(m, d)| m / d).collect();
        (rho, u1, u2)
    }
}

/// Time-dependent Dirichlet data for the `x1` ghost cells.
pub trait BoundaryData: Sync {
    /// Conservative state `(ρ, m1, m2)` at `(t, x1)`.
    fn state(&self, t: f64, x1: f64) -> Result<[f64; 3]>;
}

impl BoundaryData for RarefactionProfile {
    fn state(&self, t: f64, x1: f64) -> Result<[f64; 3]> {
        let p = self.eval(t, x1)?;
        Ok([p.rho, p.m1, 0.0])
    }
}

/// The same conservative state at both ends for all times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantBoundary(pub [f64; 3]);

impl BoundaryData for ConstantBoundary {
    fn state(&self, _t: f64, _x1: f64) -> Result<[f64; 3]> {
        Ok(self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub half_length: f64,
    pub nx: usize,
    pub ny: usize,
    pub cfl: f64,
    pub eps: f64,
    pub mu: f64,
    pub lam: f64,
    pub law: GasLaw,
    pub snapshot_times: Vec<f64>,
    /// Densities at or below this value abort the run (`0` checks positivity only).
    pub density_floor: f64,
}

impl SolverConfig {
    pub fn grid(&self) -> Result<Grid2D> {
        Grid2D::new(self.half_length, self.nx, self.ny)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(Error::Config(format!("cfl must lie in (0, 1), got {}", self.cfl)));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.mu > 0.0) || !(self.mu + self.lam >= 0.0) {
            return Err(Error::Config(format!(
                "viscosities need mu > 0 and mu + lam >= 0 (got mu = {}, lam = {})",
                self.mu, self.lam
            )));
        }
        if !(self.density_floor >= 0.0) {
            return Err(Error::Config("density floor must be non-negative".into()));
        }
        if self.snapshot_times.iter().any(|t| !(*t >= 0.0 && t.is_finite()))
            || self.snapshot_times.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::Config(
                "snapshot times must be finite, non-negative and increasing".into(),
            ));
        }
        Ok(())
    }

    /// Reject domains too short for the wave: `L >= speed (1 + T) + 15 δ`.
    pub fn validate_domain(&self, max_speed: f64, t_end: f64, delta: f64) -> Result<()> {
        let need = max_speed * (1.0 + t_end) + 15.0 * delta;
        if self.half_length < need {
            return Err(Error::Config(format!(
                "half-length {} too small for the wave: need at least {need}",
                self.half_length
            )));
        }
        Ok(())
    }

    /// `(2μ + λ) ε`, the coefficient of the longitudinal viscous term.
    fn longitudinal_viscosity(&self) -> f64 {
        (2.0 * self.mu + self.lam) * self.eps
    }
}

/// Tendencies of `(ρ, m1, m2)` plus the net mass inflow through `x1 = ±L`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tendencies {
    pub rho: Vec<f64>,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    pub boundary_mass_inflow: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Cell {
    rho: f64,
    m1: f64,
    m2: f64,
    u1: f64,
    u2: f64,
    p: f64,
    c: f64,
}

/// Which parts of the operator to assemble; everything in production.
#[derive(Debug, Clone, Copy)]
struct Terms {
    convection: bool,
    pressure: bool,
    viscous: bool,
}

const ALL_TERMS: Terms = Terms {
    convection: true,
    pressure: true,
    viscous: true,
};

const GHOSTS: usize = 2;

struct Workspace {
    /// Cells with ghost columns, `(nx + 4)` per row.
    ext: Vec<Cell>,
    /// Fluxes through the face above each cell (`x2` direction).
    gface: Vec<[f64; 3]>,
    k: Vec<[f64; 3]>,
    inflow: Vec<f64>,
}

impl Workspace {
    fn new(grid: &Grid2D) -> Self {
        Self {
            ext: vec![Cell::default(); (grid.nx + 2 * GHOSTS) * grid.ny],
            gface: vec![[0.0; 3]; grid.len()],
            k: vec![[0.0; 3]; grid.len()],
            inflow: vec![0.0; grid.ny],
        }
    }
}

#[inline]
fn van_leer(a: f64, b: f64) -> f64 {
    if a * b > 0.0 {
        2.0 * a * b / (a + b)
    } else {
        0.0
    }
}

#[inline]
fn limited_slopes(l: &Cell, c: &Cell, r: &Cell) -> [f64; 3] {
    [
        van_leer(c.rho - l.rho, r.rho - c.rho),
        van_leer(c.m1 - l.m1, r.m1 - c.m1),
        van_leer(c.m2 - l.m2, r.m2 - c.m2),
    ]
}

/// Rusanov flux of the convective part through a face with normal `dir`
/// (0 for `x1`, 1 for `x2`), from reconstructed states on both sides.
/// The pressure enters as the central face average.
#[inline]
fn face_flux(
    dir: usize,
    ll: &Cell,
    l: &Cell,
    r: &Cell,
    rr: &Cell,
    terms: Terms,
) -> [f64; 3] {
    let mut f = [0.0; 3];
    if terms.convection {
        let sl = limited_slopes(ll, l, r);
        let sr = limited_slopes(l, r, rr);
        let ul = [l.rho + 0.5 * sl[0], l.m1 + 0.5 * sl[1], l.m2 + 0.5 * sl[2]];
        let ur = [r.rho - 0.5 * sr[0], r.m1 - 0.5 * sr[1], r.m2 - 0.5 * sr[2]];
        let flux = |u: &[f64; 3]| {
            let vn = u[1 + dir] / u[0];
            [u[1 + dir], u[1] * vn, u[2] * vn]
        };
        let (fl, fr) = (flux(&ul), flux(&ur));
        let (vl, vr) = if dir == 0 { (l.u1, r.u1) } else { (l.u2, r.u2) };
        let alpha = (vl.abs() + l.c).max(vr.abs() + r.c);
        for q in 0..3 {
            f[q] = 0.5 * (fl[q] + fr[q]) - 0.5 * alpha * (ur[q] - ul[q]);
        }
    }
    if terms.pressure {
        f[1 + dir] += 0.5 * (l.p + r.p);
    }
    f
}

fn fill_ghosts(
    field: &Field2D,
    boundary: &dyn BoundaryData,
    t: f64,
    law: &GasLaw,
    ws: &mut Workspace,
) -> Result<()> {
    let grid = field.grid();
    let (nx, h1) = (grid.nx, grid.h1());
    let w = nx + 2 * GHOSTS;
    let ghost_cols = [0, 1, nx + GHOSTS, nx + GHOSTS + 1];
    let mut ghost = [[0.0; 3]; 4];
    for (g, &col) in ghost.iter_mut().zip(&ghost_cols) {
        let x = -grid.half_length + (col as f64 - GHOSTS as f64 + 0.5) * h1;
        *g = boundary.state(t, x)?;
        if !(g[0] > 0.0) {
            return Err(Error::RunFailure {
                step: 0,
                time: t,
                reason: format!("boundary density {} at x1 = {x}", g[0]),
            });
        }
    }
    let gamma = law.gamma();
    let make = |s: [f64; 3]| {
        let c = law.sound_speed_unchecked(s[0]);
        Cell {
            rho: s[0],
            m1: s[1],
            m2: s[2],
            u1: s[1] / s[0],
            u2: s[2] / s[0],
            p: s[0] * c * c / gamma,
            c,
        }
    };
    ws.ext
        .par_chunks_mut(w)
        .enumerate()
        .try_for_each(|(j, row)| -> Result<()> {
            for (g, &col) in ghost.iter().zip(&ghost_cols) {
                row[col] = make(*g);
            }
            for i in 0..nx {
                let k = j * nx + i;
                let s = [field.rho[k], field.m1[k], field.m2[k]];
                if !(s[0] > 0.0) || !s[0].is_finite() || !s[1].is_finite() || !s[2].is_finite() {
                    return Err(Error::RunFailure {
                        step: 0,
                        time: t,
                        reason: format!(
                            "non-physical state (rho = {}, m1 = {}, m2 = {}) at (x1, x2) = ({}, {})",
                            s[0],
                            s[1],
                            s[2],
                            grid.x1(i),
                            grid.x2(j)
                        ),
                    });
                }
                row[i + GHOSTS] = make(s);
            }
            Ok(())
        })
}

fn assemble(cfg: &SolverConfig, grid: &Grid2D, terms: Terms, ws: &mut Workspace) {
    let (nx, ny) = (grid.nx, grid.ny);
    let (h1, h2) = (grid.h1(), grid.h2());
    let w = nx + 2 * GHOSTS;
    let ext = &ws.ext;
    let row = |j: usize| &ext[j * w..(j + 1) * w];
    let wrap = |j: isize| ((j + ny as isize) % ny as isize) as usize;

    // x2 fluxes through the face above each cell.
    ws.gface
        .par_chunks_mut(nx)
        .enumerate()
        .for_each(|(j, out)| {
            let ji = j as isize;
            let (rm, r0, rp, rpp) = (row(wrap(ji - 1)), row(j), row(wrap(ji + 1)), row(wrap(ji + 2)));
            for i in 0..nx {
                let e = i + GHOSTS;
                out[i] = face_flux(1, &rm[e], &r0[e], &rp[e], &rpp[e], terms);
            }
        });

    let mu1 = cfg.mu * cfg.eps;
    let lam1 = cfg.lam * cfg.eps;
    let long = cfg.longitudinal_viscosity();
    let cross = mu1 + lam1;
    let gface = &ws.gface;
    ws.k
        .par_chunks_mut(nx)
        .zip(ws.inflow.par_iter_mut())
        .enumerate()
        .for_each(|(j, (out, inflow))| {
            let ji = j as isize;
            let (rm, r0, rp) = (row(wrap(ji - 1)), row(j), row(wrap(ji + 1)));
            let g_up = &gface[j * nx..(j + 1) * nx];
            let jm = wrap(ji - 1);
            let g_down = &gface[jm * nx..(jm + 1) * nx];
            let mut left = face_flux(0, &r0[0], &r0[1], &r0[2], &r0[3], terms);
            let first = left[0];
            for i in 0..nx {
                let e = i + GHOSTS;
                let right = face_flux(0, &r0[e - 1], &r0[e], &r0[e + 1], &r0[e + 2], terms);
                let mut k = [0.0; 3];
                for q in 0..3 {
                    k[q] = -(right[q] - left[q]) / h1 - (g_up[i][q] - g_down[i][q]) / h2;
                }
                if terms.viscous {
                    let (c, l, r, d, u) = (&r0[e], &r0[e - 1], &r0[e + 1], &rm[e], &rp[e]);
                    let u1xx = (r.u1 - 2.0 * c.u1 + l.u1) / (h1 * h1);
                    let u2xx = (r.u2 - 2.0 * c.u2 + l.u2) / (h1 * h1);
                    let u1yy = (u.u1 - 2.0 * c.u1 + d.u1) / (h2 * h2);
                    let u2yy = (u.u2 - 2.0 * c.u2 + d.u2) / (h2 * h2);
                    let xy = |f: fn(&Cell) -> f64| {
                        (f(&rp[e + 1]) - f(&rm[e + 1]) - f(&rp[e - 1]) + f(&rm[e - 1]))
                            / (4.0 * h1 * h2)
                    };
                    let u1xy = xy(|c| c.u1);
                    let u2xy = xy(|c| c.u2);
                    k[1] += long * u1xx + mu1 * u1yy + cross * u2xy;
                    k[2] += mu1 * u2xx + (2.0 * mu1 + lam1) * u2yy + cross * u1xy;
                }
                out[i] = k;
                left = right;
            }
            *inflow = h2 * (first - left[0]);
        });
}

fn tendencies_into(
    field: &Field2D,
    cfg: &SolverConfig,
    boundary: &dyn BoundaryData,
    t: f64,
    terms: Terms,
    ws: &mut Workspace,
) -> Result<f64> {
    fill_ghosts(field, boundary, t, &cfg.law, ws)?;
    assemble(cfg, &field.grid(), terms, ws);
    Ok(ws.inflow.iter().sum())
}

fn rhs_terms(
    field: &Field2D,
    cfg: &SolverConfig,
    boundary: &dyn BoundaryData,
    t: f64,
    terms: Terms,
) -> Result<Tendencies> {
    let grid = field.grid();
    let mut ws = Workspace::new(&grid);
    let inflow = tendencies_into(field, cfg, boundary, t, terms, &mut ws)?;
    Ok(Tendencies {
        rho: ws.k.iter().map(|k| k[0]).collect(),
        m1: ws.k.iter().map(|k| k[1]).collect(),
        m2: ws.k.iter().map(|k| k[2]).collect(),
        boundary_mass_inflow: inflow,
    })
}

/// Semi-discrete right-hand side at time `t`.
pub fn rhs(
    field: &Field2D,
    cfg: &SolverConfig,
    boundary: &dyn BoundaryData,
    t: f64,
) -> Result<Tendencies> {
    check_grid(field, cfg)?;
    rhs_terms(field, cfg, boundary, t, ALL_TERMS)
}

/// Explicit step limit
/// `cfl · min(h / max(|u_i| + c), h² ρ_min / (4 (2μ+λ) ε))`, `h = min(h1, h2)`.
pub fn stable_dt(field: &Field2D, cfg: &SolverConfig) -> f64 {
    let nx = field.nx;
    let law = cfg.law;
    let partial: Vec<(f64, f64)> = field
        .rho
        .par_chunks(nx)
        .zip(field.m1.par_chunks(nx))
        .zip(field.m2.par_chunks(nx))
        .map(|((r, a), b)| {
            let mut speed = 0.0_f64;
            let mut rho_min = f64::INFINITY;
            for i in 0..nx {
                let c = law.sound_speed_unchecked(r[i]);
                let s = (a[i] / r[i]).abs().max((b[i] / r[i]).abs()) + c;
                speed = speed.max(s);
                rho_min = rho_min.min(r[i]);
            }
            (speed, rho_min)
        })
        .collect();
    let (speed, rho_min) = partial
        .iter()
        .fold((0.0_f64, f64::INFINITY), |(s, m), &(a, b)| (s.max(a), m.min(b)));
    let h = field.h1.min(field.h2);
    let mut dt = f64::INFINITY;
    if speed > 0.0 {
        dt = h / speed;
    }
    let visc = cfg.longitudinal_viscosity();
    if visc > 0.0 {
        dt = dt.min(h * h * rho_min / (4.0 * visc));
    }
    cfg.cfl * dt
}

fn check_grid(field: &Field2D, cfg: &SolverConfig) -> Result<()> {
    let grid = cfg.grid()?;
    if field.nx != grid.nx || field.ny != grid.ny || field.half_length != grid.half_length {
        return Err(Error::Usage(format!(
            "field grid {}x{} (L = {}) does not match the configured {}x{} (L = {})",
            field.nx, field.ny, field.half_length, grid.nx, grid.ny, grid.half_length
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassBudget {
    pub initial_mass: f64,
    pub final_mass: f64,
    /// Time integral of the net inflow through `x1 = ±L`.
    pub boundary_inflow: f64,
    /// `|final - initial - inflow|`.
    pub defect: f64,
    pub defect_per_unit_time: f64,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub field: Field2D,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub steps: usize,
    pub t_final: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub mass: MassBudget,
    pub final_field: Field2D,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub snapshots: Vec<Snapshot>,
    pub summary: RunSummary,
}

/// Advance to the last snapshot time, storing every snapshot.
pub fn run(
    initial: &Field2D,
    cfg: &SolverConfig,
    boundary: &dyn BoundaryData,
) -> Result<RunOutput> {
    let mut snapshots = Vec::with_capacity(cfg.snapshot_times.len());
    let summary = run_with_observer(initial, cfg, boundary, |t, f| {
        snapshots.push(Snapshot {
            t,
            field: f.clone(),
        });
        Ok(())
    })?;
    Ok(RunOutput { snapshots, summary })
}

fn failure(step: usize, time: f64, e: Error) -> Error {
    match e {
        Error::RunFailure { reason, .. } => Error::RunFailure { step, time, reason },
        other => other,
    }
}

/// Advance to the last snapshot time, handing each snapshot to `observe`.
/// Steps are shortened so that every snapshot time is hit exactly.
pub fn run_with_observer(
    initial: &Field2D,
    cfg: &SolverConfig,
    boundary: &dyn BoundaryData,
    mut observe: impl FnMut(f64, &Field2D) -> Result<()>,
) -> Result<RunSummary> {
    cfg.validate()?;
    check_grid(initial, cfg)?;
    let grid = initial.grid();
    if let Some(bad) = initial.rho.iter().position(|r| !(*r > cfg.density_floor)) {
        return Err(Error::Config(format!(
            "initial density {} at cell {bad} is not above the floor {}",
            initial.rho[bad], cfg.density_floor
        )));
    }
    let mut ws = Workspace::new(&grid);
    let mut u = initial.clone();
    let mut stage = initial.clone();
    let initial_mass = u.total_mass();
    let mut inflow_total = 0.0;
    let mut t = 0.0;
    let mut steps = 0;
    let (mut dt_min, mut dt_max) = (f64::INFINITY, 0.0_f64);

    for &target in &cfg.snapshot_times {
        while t < target {
            let remaining = target - t;
            let limit = stable_dt(&u, cfg);
            if !(limit > 0.0) || !limit.is_finite() {
                return Err(Error::RunFailure {
                    step: steps,
                    time: t,
                    reason: format!("time step collapsed to {limit}"),
                });
            }
            let n = (remaining / limit).ceil().max(1.0);
            let dt = remaining / n;
            dt_min = dt_min.min(dt);
            dt_max = dt_max.max(dt);

            let b0 = tendencies_into(&u, cfg, boundary, t, ALL_TERMS, &mut ws)
                .map_err(|e| failure(steps, t, e))?;
            for (idx, k) in ws.k.iter().enumerate() {
                stage.rho[idx] = u.rho[idx] + dt * k[0];
                stage.m1[idx] = u.m1[idx] + dt * k[1];
                stage.m2[idx] = u.m2[idx] + dt * k[2];
            }
            let b1 = tendencies_into(&stage, cfg, boundary, t + dt, ALL_TERMS, &mut ws)
                .map_err(|e| failure(steps, t, e))?;
            for (idx, k) in ws.k.iter().enumerate() {
                u.rho[idx] = 0.5 * u.rho[idx] + 0.5 * (stage.rho[idx] + dt * k[0]);
                u.m1[idx] = 0.5 * u.m1[idx] + 0.5 * (stage.m1[idx] + dt * k[1]);
                u.m2[idx] = 0.5 * u.m2[idx] + 0.5 * (stage.m2[idx] + dt * k[2]);
            }
            inflow_total += dt * 0.5 * (b0 + b1);
            steps += 1;
            t = if n == 1.0 { target } else { t + dt };
            check_state(&u, cfg, steps, t)?;
        }
        observe(target, &u)?;
    }

    let final_mass = u.total_mass();
    let defect = (final_mass - initial_mass - inflow_total).abs();
    let mass = MassBudget {
        initial_mass,
        final_mass,
        boundary_inflow: inflow_total,
        defect,
        defect_per_unit_time: if t > 0.0 { defect / t } else { defect },
    };
    log::debug!("run finished: {steps} steps, t = {t}, mass defect {defect:e}");
    Ok(RunSummary {
        steps,
        t_final: t,
        dt_min,
        dt_max,
        mass,
        final_field: u,
    })
}

fn check_state(u: &Field2D, cfg: &SolverConfig, step: usize, t: f64) -> Result<()> {
    let bad = u.rho.iter().zip(u.m1.iter().zip(&u.m2)).position(|(r, (a, b))| {
        !(*r > cfg.density_floor) || !r.is_finite() || !a.is_finite() || !b.is_finite()
    });
    if let Some(k) = bad {
        let (i, j) = (k % u.nx, k / u.nx);
        let grid = u.grid();
        return Err(Error::RunFailure {
            step,
            time: t,
            reason: format!(
                "state (rho = {}, m1 = {}, m2 = {}) at (x1, x2) = ({}, {}) violates the density floor {} or is not finite",
                u.rho[k],
                u.m1[k],
                u.m2[k],
                grid.x1(i),
                grid.x2(j),
                cfg.density_floor
            ),
        });
    }
    Ok(())
}
