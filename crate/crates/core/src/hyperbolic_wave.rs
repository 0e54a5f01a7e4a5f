//! The hyperbolic-wave corrector `(d1, d2)(t, x1)`.
//!
//! `(d1, d2)` solves the linear system
//!
//! ```text
//! d_t + (Ā d)_x = (0, (2μ+λ) ε ū1_xx),   d(0, ·) = 0,
//! Ā = [[0, 1], [p'(ρ̄) - m̄1²/ρ̄², 2 m̄1/ρ̄]],
//! ```
//!
//! linearised around the approximate rarefaction wave. With the left and
//! right eigenvector matrices `L̄`, `R̄` of `Ā` the characteristic variables
//! `D = L̄ d` satisfy
//!
//! ```text
//! D_t + (Λ̄ D)_x = L̄ (0, (2μ+λ) ε ū1_xx)ᵀ + S D,   S = L̄_x (Ā - λ̄2 I) R̄,
//! ```
//!
//! where `L̄_t = -λ̄2 L̄_x` has been used (the profile is a simple wave of the
//! second family). The second column of `S` vanishes, so `D1` is decoupled
//! from `D2` and drives it one-way.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gas_model::GasLaw;
use crate::rarefaction_profile::{ProfilePointValue, RarefactionProfile};

pub type Mat2 = [[f64; 2]; 2];

const HALF_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

#[inline]
pub fn mat_vec(a: &Mat2, v: [f64; 2]) -> [f64; 2] {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

/// Eigen-decomposition of the flux Jacobian `Ā(ρ̄, m̄1)` with the
/// normalisation
/// `l̄i = √2/2 (-m̄1/ρ̄ + (-1)^i c, 1)`,
/// `r̄i = (-1)^i √2/(2c) (1, m̄1/ρ̄ + (-1)^i c)ᵀ`, so that `L̄ R̄ = I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenSystem {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Rows are `l̄1`, `l̄2`.
    pub l: Mat2,
    /// Columns are `r̄1`, `r̄2`.
    pub r: Mat2,
    pub a: Mat2,
}

impl EigenSystem {
    pub fn new(law: &GasLaw, rho: f64, m1: f64) -> Result<Self> {
        let c = law.sound_speed(rho)?;
        Ok(Self::from_velocity(law, rho, m1 / rho, c))
    }

    fn from_velocity(law: &GasLaw, rho: f64, u: f64, c: f64) -> Self {
        let a = [[0.0, 1.0], [law.pressure_derivative(rho) - u * u, 2.0 * u]];
        let l = [
            [HALF_SQRT2 * (-u - c), HALF_SQRT2],
            [HALF_SQRT2 * (-u + c), HALF_SQRT2],
        ];
        let s = HALF_SQRT2 / c;
        let r = [[-s, s], [-s * (u - c), s * (u + c)]];
        Self {
            lambda1: u - c,
            lambda2: u + c,
            l,
            r,
            a,
        }
    }
}

/// `S = L̄_x (Ā - λ̄2 I) R̄` at one profile point, with `L̄_x` from the chain
/// rule through `(ρ̄_x, m̄1_x)`.
pub fn coupling_from_point(law: &GasLaw, p: &ProfilePointValue) -> Mat2 {
    let c = law.sound_speed_unchecked(p.rho);
    let eig = EigenSystem::from_velocity(law, p.rho, p.u1, c);
    let common = p.m1 / (p.rho * p.rho) * p.rho_x - p.m1_x / p.rho;
    let dc = law.sound_speed_derivative(p.rho) * p.rho_x;
    let l_x = [
        [HALF_SQRT2 * (common - dc), 0.0],
        [HALF_SQRT2 * (common + dc), 0.0],
    ];
    let mut shifted = eig.a;
    shifted[0][0] -= eig.lambda2;
    shifted[1][1] -= eig.lambda2;
    mat_mul(&l_x, &mat_mul(&shifted, &eig.r))
}

pub fn coupling_matrix(profile: &RarefactionProfile, t: f64, x1: f64) -> Result<Mat2> {
    let p = profile.eval(t, x1)?;
    Ok(coupling_from_point(profile.law(), &p))
}

/// Uniform cell-centred grid on `[-L, L]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub half_length: f64,
    pub n: usize,
}

impl Grid1D {
    pub fn new(half_length: f64, n: usize) -> Result<Self> {
        if !(half_length > 0.0) || n < 4 {
            return Err(Error::Config(format!(
                "1D grid needs L > 0 and at least 4 cells, got L = {half_length}, n = {n}"
            )));
        }
        Ok(Self { half_length, n })
    }

    #[inline]
    pub fn h(&self) -> f64 {
        2.0 * self.half_length / self.n as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        -self.half_length + (i as f64 + 0.5) * self.h()
    }

    /// Position of the face left of cell `i` (`i = n` is the right end).
    #[inline]
    pub fn face(&self, i: usize) -> f64 {
        -self.half_length + i as f64 * self.h()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypWaveParams {
    pub eps: f64,
    pub mu: f64,
    pub lam: f64,
    /// Courant number used when `dt` is not given; must be in `(0, 0.9]`.
    pub cfl: f64,
    /// Fixed step; rejected when it exceeds the `cfl = 0.9` limit.
    pub dt: Option<f64>,
}

impl HypWaveParams {
    pub fn new(eps: f64, mu: f64, lam: f64) -> Self {
        Self {
            eps,
            mu,
            lam,
            cfl: 0.9,
            dt: None,
        }
    }

    /// Coefficient `(2μ + λ) ε` of the viscous forcing.
    pub fn forcing(&self) -> f64 {
        (2.0 * self.mu + self.lam) * self.eps
    }
}

/// Time history of the corrector on a 1D grid.
#[derive(Debug, Clone)]
pub struct HyperbolicWaveField {
    pub grid: Grid1D,
    pub times: Vec<f64>,
    pub d1: Vec<Vec<f64>>,
    pub d2: Vec<Vec<f64>>,
    pub big_d1: Vec<Vec<f64>>,
    pub big_d2: Vec<Vec<f64>>,
    pub eps: f64,
    pub mu: f64,
    pub lam: f64,
    pub dt: f64,
    pub steps: usize,
}

/// Coefficients of one step, evaluated from the profile at a fixed time.
struct StepCoefficients {
    source: Vec<f64>,
    coupling: Vec<Mat2>,
    face_speeds: Vec<[f64; 2]>,
}

fn step_coefficients(
    profile: &RarefactionProfile,
    grid: &Grid1D,
    forcing: f64,
    t: f64,
) -> Result<StepCoefficients> {
    let law = *profile.law();
    let cells: Vec<(f64, Mat2)> = (0..grid.n)
        .into_par_iter()
        .map(|i| {
            let p = profile.eval(t, grid.x(i))?;
            Ok((HALF_SQRT2 * forcing * p.u1_xx, coupling_from_point(&law, &p)))
        })
        .collect::<Result<_>>()?;
    let face_speeds = (0..=grid.n)
        .into_par_iter()
        .map(|i| {
            let p = profile.eval(t, grid.face(i))?;
            let c = law.sound_speed_unchecked(p.rho);
            Ok([p.u1 - c, p.u1 + c])
        })
        .collect::<Result<_>>()?;
    let (source, coupling) = cells.into_iter().unzip();
    Ok(StepCoefficients {
        source,
        coupling,
        face_speeds,
    })
}

/// Integrate the characteristic system with first-order conservative
/// upwinding and forward Euler in time, recording `(D, d)` at
/// `output_times`.
pub fn solve(
    profile: &RarefactionProfile,
    params: &HypWaveParams,
    output_times: &[f64],
    grid: Grid1D,
) -> Result<HyperbolicWaveField> {
    if !(params.eps >= 0.0) {
        return Err(Error::Config(format!("eps must be >= 0, got {}", params.eps)));
    }
    if grid.h() > profile.delta() / 10.0 {
        return Err(Error::Config(format!(
            "grid spacing {} does not resolve the layer width {} (need h <= delta/10)",
            grid.h(),
            profile.delta()
        )));
    }
    if !(params.cfl > 0.0 && params.cfl <= 0.9) {
        return Err(Error::Config(format!("cfl must lie in (0, 0.9], got {}", params.cfl)));
    }
    if output_times.iter().any(|t| !(*t >= 0.0))
        || output_times.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::Usage("output times must be non-negative and increasing".into()));
    }
    let h = grid.h();
    let speed = profile.max_char_speed().max(f64::MIN_POSITIVE);
    let dt_limit = 0.9 * h / speed;
    let dt = match params.dt {
        Some(dt) if dt > dt_limit * (1.0 + 1e-12) => {
            return Err(Error::Config(format!(
                "dt = {dt} violates the CFL limit {dt_limit} (cfl 0.9)"
            )))
        }
        Some(dt) if dt > 0.0 => dt,
        Some(dt) => return Err(Error::Config(format!("dt must be positive, got {dt}"))),
        None => params.cfl * h / speed,
    };

    let n = grid.n;
    let mut field = HyperbolicWaveField {
        grid,
        times: Vec::with_capacity(output_times.len()),
        d1: Vec::new(),
        d2: Vec::new(),
        big_d1: Vec::new(),
        big_d2: Vec::new(),
        eps: params.eps,
        mu: params.mu,
        lam: params.lam,
        dt,
        steps: 0,
    };
    let forcing = params.forcing();
    let trivial = forcing == 0.0 || profile.is_degenerate();

    let mut big1 = vec![0.0; n];
    let mut big2 = vec![0.0; n];
    let mut flux1 = vec![0.0; n + 1];
    let mut flux2 = vec![0.0; n + 1];
    let mut t = 0.0;
    for &t_out in output_times {
        while !trivial && t < t_out {
            let step = dt.min(t_out - t);
            let coef = step_coefficients(profile, &grid, forcing, t)?;
            // Zero far field outside the grid.
            for f in 0..=n {
                let [s1, s2] = coef.face_speeds[f];
                let (l1, l2) = if f > 0 { (big1[f - 1], big2[f - 1]) } else { (0.0, 0.0) };
                let (r1, r2) = if f < n { (big1[f], big2[f]) } else { (0.0, 0.0) };
                flux1[f] = s1.max(0.0) * l1 + s1.min(0.0) * r1;
                flux2[f] = s2.max(0.0) * l2 + s2.min(0.0) * r2;
            }
            let ratio = step / h;
            for i in 0..n {
                let s = &coef.coupling[i];
                let (old1, old2) = (big1[i], big2[i]);
                let src1 = coef.source[i] + s[0][0] * old1 + s[0][1] * old2;
                let src2 = coef.source[i] + s[1][0] * old1 + s[1][1] * old2;
                big1[i] = old1 - ratio * (flux1[i + 1] - flux1[i]) + step * src1;
                big2[i] = old2 - ratio * (flux2[i + 1] - flux2[i]) + step * src2;
            }
            t = if t_out - t <= dt { t_out } else { t + dt };
            field.steps += 1;
        }
        t = t.max(t_out);
        let (d1, d2) = reconstruct(profile, &grid, t_out, &big1, &big2)?;
        field.times.push(t_out);
        field.d1.push(d1);
        field.d2.push(d2);
        field.big_d1.push(big1.clone());
        field.big_d2.push(big2.clone());
    }
    Ok(field)
}

fn reconstruct(
    profile: &RarefactionProfile,
    grid: &Grid1D,
    t: f64,
    big1: &[f64],
    big2: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let law = *profile.law();
    let pairs: Vec<[f64; 2]> = (0..grid.n)
        .into_par_iter()
        .map(|i| {
            let p = profile.eval(t, grid.x(i))?;
            let c = law.sound_speed_unchecked(p.rho);
            let eig = EigenSystem::from_velocity(&law, p.rho, p.u1, c);
            Ok(mat_vec(&eig.r, [big1[i], big2[i]]))
        })
        .collect::<Result<_>>()?;
    Ok(pairs.into_iter().map(|[a, b]| (a, b)).unzip())
}

impl HyperbolicWaveField {
    /// Index of the recorded time equal to `t` (to 1e-12).
    pub fn time_index(&self, t: f64) -> Option<usize> {
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
    }

    /// `‖(d1, d2)(t_k)‖_{L²}`.
    pub fn l2_norm(&self, k: usize) -> f64 {
        let h = self.grid.h();
        let sum: f64 = self.d1[k]
            .iter()
            .zip(&self.d2[k])
            .map(|(a, b)| a * a + b * b)
            .sum();
        (sum * h).sqrt()
    }

    /// `‖∂_x^order (d1, d2)(t_k)‖_{L²}` with central differences
    /// (`order` 0, 1 or 2).
    pub fn derivative_l2_norm(&self, k: usize, order: usize) -> f64 {
        let h = self.grid.h();
        let deriv = |v: &[f64]| -> f64 {
            let n = v.len();
            let at = |i: isize| if i < 0 || i >= n as isize { 0.0 } else { v[i as usize] };
            (0..n as isize)
                .map(|i| {
                    let d = match order {
                        0 => at(i),
                        1 => (at(i + 1) - at(i - 1)) / (2.0 * h),
                        _ => (at(i + 1) - 2.0 * at(i) + at(i - 1)) / (h * h),
                    };
                    d * d
                })
                .sum()
        };
        ((deriv(&self.d1[k]) + deriv(&self.d2[k])) * h).sqrt()
    }

    pub fn linf_norm(&self, k: usize) -> f64 {
        self.d1[k]
            .iter()
            .chain(&self.d2[k])
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// `sup_t ‖(d1, d2)(t, ·)‖_{L∞}` over the recorded times.
    pub fn sup_linf(&self) -> f64 {
        (0..self.times.len()).map(|k| self.linf_norm(k)).fold(0.0, f64::max)
    }

    /// Corrector at time index `k` sampled at `points` by linear
    /// interpolation, zero outside the grid.
    pub fn sample(&self, k: usize, points: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let h = self.grid.h();
        let n = self.grid.n;
        let interp = |v: &[f64], x: f64| -> f64 {
            let s = (x + self.grid.half_length) / h - 0.5;
            if s <= -1.0 || s >= n as f64 {
                return 0.0;
            }
            let i = s.floor();
            let frac = s - i;
            let i = i as isize;
            let at = |j: isize| if j < 0 || j >= n as isize { 0.0 } else { v[j as usize] };
            if frac == 0.0 {
                at(i)
            } else {
                (1.0 - frac) * at(i) + frac * at(i + 1)
            }
        };
        points
            .iter()
            .map(|&x| (interp(&self.d1[k], x), interp(&self.d2[k], x)))
            .unzip()
    }
}
