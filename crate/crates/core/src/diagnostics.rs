//! Perturbation extraction, discrete norms, the error against the exact fan
//! and the energy functionals tracked along a run.
//!
//! Quadrature is the composite midpoint rule. Derivatives are second-order
//! central differences, one-sided second order at the `x1` ends and
//! periodic in `x2`. The scaled frame `y = x/ε` multiplies every `k`-th
//! derivative by `ε^k` and the measure by `ε^-2`, so for example
//! `‖f‖_{L²(y)} = ε^-1 ‖f‖_{L²(x)}`.

use serde::{Deserialize, Serialize};

use crate::ansatz::AnsatzSlice;
use crate::error::{Error, Result};
use crate::gas_model::{GasLaw, RiemannEndStates};
use crate::ns_solver2d::{Field2D, Snapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    L1,
    L2,
    Linf,
    H1,
    H2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Frame {
    Original,
    /// `τ = t/ε`, `y = x/ε`.
    Scaled(f64),
}

impl Frame {
    fn eps(self) -> f64 {
        match self {
            Frame::Original => 1.0,
            Frame::Scaled(eps) => eps,
        }
    }
}

/// A scalar grid function, row-major with index `j * nx + i`.
#[derive(Debug, Clone, Copy)]
pub struct ScalarGrid<'a> {
    pub nx: usize,
    pub ny: usize,
    pub h1: f64,
    pub h2: f64,
    pub values: &'a [f64],
}

impl<'a> ScalarGrid<'a> {
    pub fn of(field: &Field2D, values: &'a [f64]) -> Self {
        Self {
            nx: field.nx,
            ny: field.ny,
            h1: field.h1,
            h2: field.h2,
            values,
        }
    }
}

/// `∂/∂x1`, one-sided at the ends, written in differences so that
/// constants map to exact zeros.
fn dx(g: &ScalarGrid, f: &[f64]) -> Vec<f64> {
    let (nx, h) = (g.nx, g.h1);
    let mut out = vec![0.0; f.len()];
    for (row, o) in f.chunks(nx).zip(out.chunks_mut(nx)) {
        o[0] = (4.0 * (row[1] - row[0]) - (row[2] - row[0])) / (2.0 * h);
        for i in 1..nx - 1 {
            o[i] = (row[i + 1] - row[i - 1]) / (2.0 * h);
        }
        let n = nx - 1;
        o[n] = -(4.0 * (row[n - 1] - row[n]) - (row[n - 2] - row[n])) / (2.0 * h);
    }
    out
}

fn dxx(g: &ScalarGrid, f: &[f64]) -> Vec<f64> {
    let (nx, h2) = (g.nx, g.h1 * g.h1);
    let mut out = vec![0.0; f.len()];
    for (row, o) in f.chunks(nx).zip(out.chunks_mut(nx)) {
        let edge = |a: f64, b: f64, c: f64, d: f64| (-5.0 * (b - a) + 4.0 * (c - a) - (d - a)) / h2;
        o[0] = edge(row[0], row[1], row[2], row[3]);
        for i in 1..nx - 1 {
            o[i] = ((row[i + 1] - row[i]) - (row[i] - row[i - 1])) / h2;
        }
        let n = nx - 1;
        o[n] = edge(row[n], row[n - 1], row[n - 2], row[n - 3]);
    }
    out
}

fn dy(g: &ScalarGrid, f: &[f64]) -> Vec<f64> {
    let (nx, ny) = (g.nx, g.ny);
    let mut out = vec![0.0; f.len()];
    for j in 0..ny {
        let (up, down) = ((j + 1) % ny, (j + ny - 1) % ny);
        for i in 0..nx {
            out[j * nx + i] = (f[up * nx + i] - f[down * nx + i]) / (2.0 * g.h2);
        }
    }
    out
}

fn dyy(g: &ScalarGrid, f: &[f64]) -> Vec<f64> {
    let (nx, ny) = (g.nx, g.ny);
    let h2 = g.h2 * g.h2;
    let mut out = vec![0.0; f.len()];
    for j in 0..ny {
        let (up, down) = ((j + 1) % ny, (j + ny - 1) % ny);
        for i in 0..nx {
            let c = f[j * nx + i];
            out[j * nx + i] = ((f[up * nx + i] - c) - (c - f[down * nx + i])) / h2;
        }
    }
    out
}

fn sum_sq(v: &[f64], nx: usize) -> f64 {
    // Row partials combined in row order keep the result independent of
    // how the field was produced.
    let rows: Vec<f64> = v.chunks(nx).map(|r| r.iter().map(|x| x * x).sum()).collect();
    rows.iter().sum()
}

/// Squared `L²`-type norm including derivatives up to `order`, each
/// multi-index counted once, with the frame scaling applied.
fn sobolev_sq(g: &ScalarGrid, order: usize, frame: Frame) -> f64 {
    let eps = frame.eps();
    let measure = g.h1 * g.h2 / (eps * eps);
    let f = g.values;
    let mut total = sum_sq(f, g.nx);
    if order >= 1 {
        let fx = dx(g, f);
        let fy = dy(g, f);
        total += eps * eps * (sum_sq(&fx, g.nx) + sum_sq(&fy, g.nx));
        if order >= 2 {
            let e4 = eps.powi(4);
            total += e4 * (sum_sq(&dxx(g, f), g.nx) + sum_sq(&dy(g, &fx), g.nx) + sum_sq(&dyy(g, f), g.nx));
        }
    }
    total * measure
}

pub fn scalar_norm(g: &ScalarGrid, kind: NormKind, frame: Frame) -> f64 {
    let eps = frame.eps();
    match kind {
        NormKind::L1 => {
            let rows: Vec<f64> = g.values.chunks(g.nx).map(|r| r.iter().map(|x| x.abs()).sum()).collect();
            rows.iter().sum::<f64>() * g.h1 * g.h2 / (eps * eps)
        }
        NormKind::Linf => g.values.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
        NormKind::L2 => sobolev_sq(g, 0, frame).sqrt(),
        NormKind::H1 => sobolev_sq(g, 1, frame).sqrt(),
        NormKind::H2 => sobolev_sq(g, 2, frame).sqrt(),
    }
}

/// `φ = ρ - ρ̃`, `ψ1 = u1 - ũ1`, `ψ2 = u2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationField {
    pub nx: usize,
    pub ny: usize,
    pub h1: f64,
    pub h2: f64,
    pub phi: Vec<f64>,
    pub psi1: Vec<f64>,
    pub psi2: Vec<f64>,
}

impl PerturbationField {
    fn grid<'a>(&self, values: &'a [f64]) -> ScalarGrid<'a> {
        ScalarGrid {
            nx: self.nx,
            ny: self.ny,
            h1: self.h1,
            h2: self.h2,
            values,
        }
    }

    pub fn components(&self) -> [&[f64]; 3] {
        [&self.phi, &self.psi1, &self.psi2]
    }

    /// Norm of the triple: component norms combined as a sum (`L1`), a max
    /// (`Linf`) or a root sum of squares (the Hilbert norms).
    pub fn norm(&self, kind: NormKind, frame: Frame) -> f64 {
        let parts = self.components().map(|v| scalar_norm(&self.grid(v), kind, frame));
        match kind {
            NormKind::L1 => parts.iter().sum(),
            NormKind::Linf => parts.iter().fold(0.0, |m: f64, x| m.max(*x)),
            _ => parts.iter().map(|x| x * x).sum::<f64>().sqrt(),
        }
    }

    /// `‖∇(φ, Ψ)‖²_{L²}` in the given frame.
    pub fn gradient_sq(&self, frame: Frame) -> f64 {
        self.components()
            .iter()
            .map(|v| {
                let g = self.grid(v);
                sobolev_sq(&g, 1, frame) - sobolev_sq(&g, 0, frame)
            })
            .sum()
    }
}

pub fn extract_perturbation(field: &Field2D, ansatz: &AnsatzSlice) -> Result<PerturbationField> {
    if ansatz.rho_tilde.len() != field.nx || ansatz.u1_tilde.len() != field.nx {
        return Err(Error::Usage(format!(
            "ansatz slice has {} points but the field has nx = {}",
            ansatz.rho_tilde.len(),
            field.nx
        )));
    }
    let n = field.rho.len();
    let (mut phi, mut psi1, mut psi2) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for k in 0..n {
        let i = k % field.nx;
        let rho = field.rho[k];
        phi[k] = rho - ansatz.rho_tilde[i];
        psi1[k] = field.m1[k] / rho - ansatz.u1_tilde[i];
        psi2[k] = field.m2[k] / rho;
    }
    Ok(PerturbationField {
        nx: field.nx,
        ny: field.ny,
        h1: field.h1,
        h2: field.h2,
        phi,
        psi1,
        psi2,
    })
}

/// `max |(ρ, u1, u2) - (ρ^r, u1^r, 0)(x1/t)|` over the grid, the max taken
/// over components too.
pub fn fan_linf_error(field: &Field2D, t: f64, law: &GasLaw, ends: &RiemannEndStates) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Usage(format!("fan comparison needs t > 0, got {t}")));
    }
    let grid = field.grid();
    let fan: Vec<_> = (0..field.nx)
        .map(|i| law.exact_fan_eval(ends, grid.x1(i) / t))
        .collect::<Result<_>>()?;
    let mut worst = 0.0_f64;
    for k in 0..field.rho.len() {
        let s = &fan[k % field.nx];
        let rho = field.rho[k];
        let e = (rho - s.rho)
            .abs()
            .max((field.m1[k] / rho - s.u1).abs())
            .max((field.m2[k] / rho).abs());
        worst = worst.max(e);
    }
    Ok(worst)
}

/// Largest [`fan_linf_error`] over snapshots with `t ∈ [h, T]`.
pub fn sup_error_vs_fan(
    snapshots: &[Snapshot],
    law: &GasLaw,
    ends: &RiemannEndStates,
    h: f64,
    t_end: f64,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Usage(format!("time window start must be positive, got {h}")));
    }
    let window: Vec<&Snapshot> = snapshots
        .iter()
        .filter(|s| in_window(s.t, h, t_end))
        .collect();
    if window.is_empty() {
        return Err(Error::Usage(format!("no snapshot in the time window [{h}, {t_end}]")));
    }
    window
        .iter()
        .map(|s| fan_linf_error(&s.field, s.t, law, ends))
        .try_fold(0.0_f64, |m, e| Ok(m.max(e?)))
}

/// Window membership with a relative slack for times produced by sums.
pub fn in_window(t: f64, h: f64, t_end: f64) -> bool {
    let slack = 1e-12 * t_end.abs().max(1.0);
    t >= h - slack && t <= t_end + slack
}

/// `Φ = (p(ρ) - p(ρ̃) - p'(ρ̃)(ρ - ρ̃)) / ((γ - 1) ρ)`, non-negative by
/// convexity of `p`.
pub fn potential_energy(rho: f64, rho_tilde: f64, law: &GasLaw) -> Result<f64> {
    if !(rho > 0.0) || !(rho_tilde > 0.0) {
        return Err(Error::Domain(format!(
            "potential energy needs positive densities, got {rho} and {rho_tilde}"
        )));
    }
    let num = law.pressure(rho) - law.pressure(rho_tilde) - law.pressure_derivative(rho_tilde) * (rho - rho_tilde);
    Ok(num / ((law.gamma() - 1.0) * rho))
}

/// `∫ ρ Φ` over the domain in the given frame.
pub fn potential_integral(field: &Field2D, ansatz: &AnsatzSlice, law: &GasLaw, frame: Frame) -> Result<f64> {
    let eps = frame.eps();
    let mut rows = Vec::with_capacity(field.ny);
    for j in 0..field.ny {
        let mut acc = 0.0;
        for i in 0..field.nx {
            let rho = field.rho[j * field.nx + i];
            acc += rho * potential_energy(rho, ansatz.rho_tilde[i], law)?;
        }
        rows.push(acc);
    }
    Ok(rows.iter().sum::<f64>() * field.h1 * field.h2 / (eps * eps))
}

/// Per-snapshot diagnostics of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub t: f64,
    pub tau: f64,
    /// `‖(φ, Ψ)‖_{H²}` in the scaled frame.
    pub e_tau: f64,
    /// Error against the fan, for snapshots inside the comparison window.
    pub sup_err: Option<f64>,
    /// `∫ ρΦ dy`.
    pub phi_potential_integral: f64,
    /// Trapezoid-rule `∫ ‖∇(φ, Ψ)‖² dτ` over the snapshots so far; coarse.
    pub dissipation_trapezoid: f64,
}

/// Accumulates [`EnergyRecord`]s snapshot by snapshot.
#[derive(Debug, Clone)]
pub struct EnergyTracker {
    eps: f64,
    last: Option<(f64, f64)>,
    dissipation: f64,
    pub records: Vec<EnergyRecord>,
}

impl EnergyTracker {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::Config(format!("scaled frame needs eps > 0, got {eps}")));
        }
        Ok(Self {
            eps,
            last: None,
            dissipation: 0.0,
            records: Vec::new(),
        })
    }

    pub fn observe(
        &mut self,
        t: f64,
        field: &Field2D,
        ansatz: &AnsatzSlice,
        law: &GasLaw,
        fan_error: Option<f64>,
    ) -> Result<EnergyRecord> {
        let frame = Frame::Scaled(self.eps);
        let pert = extract_perturbation(field, ansatz)?;
        let tau = t / self.eps;
        let grad = pert.gradient_sq(frame);
        if let Some((tau0, g0)) = self.last {
            self.dissipation += 0.5 * (tau - tau0) * (g0 + grad);
        }
        self.last = Some((tau, grad));
        let record = EnergyRecord {
            t,
            tau,
            e_tau: pert.norm(NormKind::H2, frame),
            sup_err: fan_error,
            phi_potential_integral: potential_integral(field, ansatz, law, frame)?,
            dissipation_trapezoid: self.dissipation,
        };
        self.records.push(record);
        Ok(record)
    }

    pub fn sup_e_tau(&self) -> f64 {
        self.records.iter().map(|r| r.e_tau).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gas_model::GasState1D;
    use crate::ns_solver2d::Grid2D;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid(values: &[f64], nx: usize, ny: usize, l: f64) -> ScalarGrid<'_> {
        ScalarGrid {
            nx,
            ny,
            h1: 2.0 * l / nx as f64,
            h2: 1.0 / ny as f64,
            values,
        }
    }

    fn slice(rho: Vec<f64>, u1: Vec<f64>) -> AnsatzSlice {
        let n = rho.len();
        let m1: Vec<f64> = rho.iter().zip(&u1).map(|(r, u)| r * u).collect();
        AnsatzSlice {
            t: 0.0,
            rho_bar: rho.clone(),
            m1_bar: m1.clone(),
            d1: vec![0.0; n],
            d2: vec![0.0; n],
            u1_tilde: m1.iter().zip(&rho).map(|(m, r)| m / r).collect(),
            m1_tilde: m1,
            rho_tilde: rho,
        }
    }

    #[test]
    fn norm_examples() {
        let c = 1.7;
        let v = vec![c; 200 * 8];
        let g = grid(&v, 200, 8, 10.0);
        assert!((scalar_norm(&g, NormKind::L2, Frame::Original) - c * 20f64.sqrt()).abs() < 1e-12);
        assert!((scalar_norm(&g, NormKind::L2, Frame::Scaled(0.1)) - 10.0 * c * 20f64.sqrt()).abs() < 1e-11);
        assert!((scalar_norm(&g, NormKind::L1, Frame::Original) - c * 20.0).abs() < 1e-12);
        assert_eq!(scalar_norm(&g, NormKind::Linf, Frame::Scaled(0.1)), c);
        for kind in [NormKind::H1, NormKind::H2] {
            for frame in [Frame::Original, Frame::Scaled(0.3)] {
                assert_eq!(scalar_norm(&g, kind, frame), scalar_norm(&g, NormKind::L2, frame));
            }
        }

        let (nx, ny) = (50, 64);
        let mut s = vec![0.0; nx * ny];
        for j in 0..ny {
            let y = (j as f64 + 0.5) / ny as f64;
            for i in 0..nx {
                s[j * nx + i] = (2.0 * PI * y).sin();
            }
        }
        let g = grid(&s, nx, ny, 10.0);
        assert!((scalar_norm(&g, NormKind::L2, Frame::Original) - 10f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn scaled_frame_equals_quadrature_on_the_stretched_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (nx, ny) = (30, 12);
        let v: Vec<f64> = (0..nx * ny).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for eps in [0.5, 0.1, 0.013] {
            let g = grid(&v, nx, ny, 3.0);
            let stretched = ScalarGrid {
                h1: g.h1 / eps,
                h2: g.h2 / eps,
                ..g
            };
            for kind in [NormKind::L1, NormKind::L2, NormKind::Linf, NormKind::H1, NormKind::H2] {
                let a = scalar_norm(&g, kind, Frame::Scaled(eps));
                let b = scalar_norm(&stretched, kind, Frame::Original);
                assert!((a - b).abs() <= 1e-12 * b, "{kind:?} {a} {b}");
            }
        }
    }

    #[test]
    fn derivatives_are_second_order() {
        let err = |nx: usize| {
            let l = 1.0;
            let h = 2.0 * l / nx as f64;
            let f: Vec<f64> = (0..nx).map(|i| (1.3 * (-l + (i as f64 + 0.5) * h)).sin()).collect();
            let g = grid(&f, nx, 1, l);
            let d1 = dx(&g, &f);
            let d2 = dxx(&g, &f);
            (0..nx)
                .map(|i| {
                    let x = -l + (i as f64 + 0.5) * h;
                    (d1[i] - 1.3 * (1.3 * x).cos())
                        .abs()
                        .max((d2[i] + 1.69 * (1.3 * x).sin()).abs())
                })
                .fold(0.0, f64::max)
        };
        let order = (err(40) / err(80)).log2();
        assert!(order > 1.8, "{order}");
    }

    #[test]
    fn extraction_examples() {
        let grid2 = Grid2D::new(2.0, 10, 4).unwrap();
        let rho: Vec<f64> = (0..10).map(|i| 1.0 + 0.1 * i as f64).collect();
        let u1: Vec<f64> = (0..10).map(|i| 0.2 * i as f64).collect();
        let a = slice(rho.clone(), u1.clone());
        let m1: Vec<f64> = rho.iter().zip(&u1).map(|(r, u)| r * u).collect();
        let f = Field2D::from_columns(&grid2, &rho, &m1).unwrap();
        let p = extract_perturbation(&f, &a).unwrap();
        assert!(p.components().iter().all(|v| v.iter().all(|x| *x == 0.0)));

        let shifted: Vec<f64> = rho.iter().map(|r| r + 0.25).collect();
        let m1s: Vec<f64> = shifted.iter().zip(&u1).map(|(r, u)| r * u).collect();
        let f = Field2D::from_columns(&grid2, &shifted, &m1s).unwrap();
        let p = extract_perturbation(&f, &a).unwrap();
        assert!(p.phi.iter().all(|x| (x - 0.25).abs() < 1e-15));
        assert!(p.psi1.iter().all(|x| x.abs() < 1e-15) && p.psi2.iter().all(|x| *x == 0.0));

        let short = slice(rho[..5].to_vec(), u1[..5].to_vec());
        assert!(matches!(extract_perturbation(&f, &short), Err(Error::Usage(_))));
    }

    #[test]
    fn round_trip_reconstructs_the_field() {
        let grid2 = Grid2D::new(1.0, 16, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut f = Field2D::zeros(&grid2);
        for k in 0..f.rho.len() {
            f.rho[k] = rng.gen_range(0.5..2.0);
            f.m1[k] = rng.gen_range(-1.0..1.0);
            f.m2[k] = rng.gen_range(-1.0..1.0);
        }
        let a = slice(vec![1.2; 16], (0..16).map(|i| 0.1 * i as f64).collect());
        let p = extract_perturbation(&f, &a).unwrap();
        for k in 0..f.rho.len() {
            let i = k % 16;
            let rho = a.rho_tilde[i] + p.phi[k];
            assert!((rho - f.rho[k]).abs() <= 1e-13);
            assert!((rho * (a.u1_tilde[i] + p.psi1[k]) - f.m1[k]).abs() <= 1e-13);
            assert!((rho * p.psi2[k] - f.m2[k]).abs() <= 1e-13);
        }
    }

    #[test]
    fn fan_error_examples() {
        let law = GasLaw::new(2.0).unwrap();
        let left = GasState1D::new(1.0, 0.0).unwrap();
        let right = law.connect_2rarefaction(left, 4.0).unwrap();
        let ends = RiemannEndStates::new(left, right);
        let grid2 = Grid2D::new(10.0, 100, 2).unwrap();
        let make = |t: f64, offset: f64| {
            let states: Vec<_> = (0..100)
                .map(|i| law.exact_fan_eval(&ends, grid2.x1(i) / t).unwrap())
                .collect();
            let rho: Vec<f64> = states.iter().map(|s| s.rho + offset).collect();
            let m1: Vec<f64> = states.iter().zip(&rho).map(|(s, r)| s.u1 * r).collect();
            Snapshot {
                t,
                field: Field2D::from_columns(&grid2, &rho, &m1).unwrap(),
            }
        };
        let snaps = vec![make(0.05, 0.0), make(0.1, 0.0), make(0.5, 0.0), make(1.0, 0.0)];
        assert!(sup_error_vs_fan(&snaps, &law, &ends, 0.1, 1.0).unwrap() <= 1e-15);
        let snaps = vec![make(0.5, 0.125), make(1.0, 0.125)];
        assert!((sup_error_vs_fan(&snaps, &law, &ends, 0.1, 1.0).unwrap() - 0.125).abs() < 1e-14);
        assert!(matches!(
            sup_error_vs_fan(&snaps, &law, &ends, 0.1, 0.2),
            Err(Error::Usage(_))
        ));
        assert!(sup_error_vs_fan(&snaps, &law, &ends, 0.0, 1.0).is_err());
    }

    #[test]
    fn potential_energy_examples() {
        let law = GasLaw::new(2.0).unwrap();
        assert_eq!(potential_energy(1.3, 1.3, &law).unwrap(), 0.0);
        assert!((potential_energy(2.0, 1.0, &law).unwrap() - 0.25).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for &gamma in &[1.4, 2.0, 3.0] {
            let law = GasLaw::new(gamma).unwrap();
            for _ in 0..1000 {
                let a = rng.gen_range(0.05..5.0);
                let b = rng.gen_range(0.05..5.0);
                assert!(potential_energy(a, b, &law).unwrap() >= -1e-14);
            }
        }
        assert!(potential_energy(0.0, 1.0, &law).is_err());
    }

    #[test]
    fn tracker_accumulates_records() {
        let law = GasLaw::new(2.0).unwrap();
        let grid2 = Grid2D::new(1.0, 10, 2).unwrap();
        let a = slice(vec![1.0; 10], vec![0.0; 10]);
        let f = Field2D::from_columns(&grid2, &[1.0; 10], &[0.0; 10]).unwrap();
        let mut tr = EnergyTracker::new(0.1).unwrap();
        tr.observe(0.0, &f, &a, &law, None).unwrap();
        let r = tr.observe(0.5, &f, &a, &law, Some(0.0)).unwrap();
        assert_eq!(r.e_tau, 0.0);
        assert_eq!(r.tau, 5.0);
        assert_eq!(tr.records.len(), 2);
        assert!(EnergyTracker::new(0.0).is_err());
    }
}
