//! The composite background `ρ̃ = ρ̄ + d1`, `m̃1 = m̄1 + d2`, `ũ1 = m̃1/ρ̃`,
//! its residual in the Euler-with-forcing system it satisfies, and
//! Navier-Stokes initial data built around it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{NormKind, Frame, PerturbationField};
use crate::error::{Error, Result};
use crate::hyperbolic_wave::{Grid1D, HyperbolicWaveField};
use crate::ns_solver2d::{Field2D, Grid2D};
use crate::rarefaction_profile::RarefactionProfile;

/// The ansatz on the solver's `x1` grid at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzSlice {
    pub t: f64,
    pub rho_bar: Vec<f64>,
    pub m1_bar: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub rho_tilde: Vec<f64>,
    pub m1_tilde: Vec<f64>,
    pub u1_tilde: Vec<f64>,
}

/// Rarefaction profile plus (optionally) the hyperbolic-wave corrector.
#[derive(Debug, Clone)]
pub struct Ansatz {
    profile: RarefactionProfile,
    wave: Option<HyperbolicWaveField>,
    grid: Grid1D,
}

impl Ansatz {
    pub fn new(profile: RarefactionProfile, wave: HyperbolicWaveField, grid: Grid1D) -> Self {
        Self {
            profile,
            wave: Some(wave),
            grid,
        }
    }

    /// The bare profile, `d ≡ 0`.
    pub fn without_wave(profile: RarefactionProfile, grid: Grid1D) -> Self {
        Self {
            profile,
            wave: None,
            grid,
        }
    }

    pub fn profile(&self) -> &RarefactionProfile {
        &self.profile
    }

    pub fn wave(&self) -> Option<&HyperbolicWaveField> {
        self.wave.as_ref()
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    fn wave_index(&self, t: f64) -> Result<Option<usize>> {
        match &self.wave {
            None => Ok(None),
            Some(w) => w.time_index(t).map(Some).ok_or_else(|| {
                Error::Usage(format!("t = {t} is not among the corrector's output times"))
            }),
        }
    }

    /// `(d1, d2)` at output index `k` on the ansatz grid.
    fn corrector(&self, k: Option<usize>) -> (Vec<f64>, Vec<f64>) {
        match (&self.wave, k) {
            (Some(w), Some(k)) if w.grid == self.grid => (w.d1[k].clone(), w.d2[k].clone()),
            (Some(w), Some(k)) => w.sample(k, &self.grid.centers()),
            _ => (vec![0.0; self.grid.n], vec![0.0; self.grid.n]),
        }
    }

    /// Assemble the slice at `t` and check
    /// `(3/4) ρ- <= ρ̃ <= ρ+ + (1/4) ρ-`.
    pub fn build(&self, t: f64) -> Result<AnsatzSlice> {
        let k = self.wave_index(t)?;
        let (d1, d2) = self.corrector(k);
        let n = self.grid.n;
        let mut slice = AnsatzSlice {
            t,
            rho_bar: Vec::with_capacity(n),
            m1_bar: Vec::with_capacity(n),
            d1,
            d2,
            rho_tilde: Vec::with_capacity(n),
            m1_tilde: Vec::with_capacity(n),
            u1_tilde: Vec::with_capacity(n),
        };
        let lo = 0.75 * self.profile.ends().rho_min();
        let hi = self.profile.ends().rho_max() + 0.25 * self.profile.ends().rho_min();
        for i in 0..n {
            let p = self.profile.eval(t, self.grid.x(i))?;
            let rho = p.rho + slice.d1[i];
            let m1 = p.m1 + slice.d2[i];
            if !(rho >= lo && rho <= hi) {
                return Err(Error::Config(format!(
                    "epsilon too large for this wave strength: ansatz density {rho} at (t, x1) = ({t}, {}) leaves [{lo}, {hi}]",
                    self.grid.x(i)
                )));
            }
            slice.rho_bar.push(p.rho);
            slice.m1_bar.push(p.m1);
            slice.rho_tilde.push(rho);
            slice.m1_tilde.push(m1);
            slice.u1_tilde.push(m1 / rho);
        }
        Ok(slice)
    }

    /// Residuals of the ansatz system at output time `t` and grid index `i`:
    ///
    /// ```text
    /// ρ̃_t + m̃1_x,
    /// m̃1_t + (m̃1²/ρ̃ + p(ρ̃))_x - (2μ+λ) ε ū1_xx - (Q1 + Q2)_x,
    /// Q1 = ρ̃ũ1² - ρ̄ū1² + ū1² d1 - 2ū1 d2,  Q2 = p(ρ̃) - p(ρ̄) - p'(ρ̄) d1.
    /// ```
    ///
    /// The momentum flux minus `Q1 + Q2` is the profile's Euler flux plus
    /// `Ā d`, so the profile part is evaluated analytically and only the
    /// corrector is differenced: central in `x1` and across the
    /// neighbouring output times (one-sided at the first and last).
    pub fn momentum_residual(&self, t: f64, i: usize) -> Result<(f64, f64)> {
        if i == 0 || i + 1 >= self.grid.n {
            return Err(Error::Usage(format!("grid index {i} is not interior")));
        }
        let x = self.grid.x(i);
        let euler = self.profile.euler_residual(t, x)?;
        let (w, k) = match (&self.wave, self.wave_index(t)?) {
            (Some(w), Some(k)) if w.grid == self.grid => (w, k),
            (Some(_), Some(_)) => {
                return Err(Error::Usage(
                    "residual needs the corrector on the ansatz grid".into(),
                ))
            }
            _ => return Ok((euler.mass, euler.momentum)),
        };
        if w.times.len() < 2 {
            return Err(Error::Usage("residual needs at least two output times".into()));
        }
        let (ka, kb) = (k.saturating_sub(1), (k + 1).min(w.times.len() - 1));
        let span = w.times[kb] - w.times[ka];
        let d1_t = (w.d1[kb][i] - w.d1[ka][i]) / span;
        let d2_t = (w.d2[kb][i] - w.d2[ka][i]) / span;
        let h = self.grid.h();
        let law = self.profile.law();
        let flux = |j: usize| -> Result<f64> {
            let p = self.profile.eval(t, self.grid.x(j))?;
            let a21 = law.pressure_derivative(p.rho) - p.u1 * p.u1;
            Ok(a21 * w.d1[k][j] + 2.0 * p.u1 * w.d2[k][j])
        };
        let flux_x = (flux(i + 1)? - flux(i - 1)?) / (2.0 * h);
        let d2_x = (w.d2[k][i + 1] - w.d2[k][i - 1]) / (2.0 * h);
        let forcing = (2.0 * w.mu + w.lam) * w.eps * self.profile.eval(t, x)?.u1_xx;
        Ok((euler.mass + d1_t + d2_x, euler.momentum + d2_t + flux_x - forcing))
    }
}

/// Parameters of the initial perturbation `(φ0, ψ10, ψ20)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    /// Target `H²` norm in the scaled frame.
    pub amplitude: f64,
    pub seed: u64,
    /// Number of `x2` Fourier modes, 1 to 4.
    pub mode_count: usize,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        Self {
            amplitude: 0.0,
            seed: 0,
            mode_count: 2,
        }
    }
}

pub const MAX_MODES: usize = 4;

/// `exp(1 - 1/(1 - s²))` on `|s| < 1`, zero outside.
fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// Unscaled perturbation components on the grid.
fn perturbation_shape(spec: &PerturbationSpec, grid: &Grid2D) -> [Vec<f64>; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let radius = 0.25 * grid.half_length;
    let tau = 2.0 * std::f64::consts::PI;
    let mut out: [Vec<f64>; 3] = Default::default();
    for comp in out.iter_mut() {
        let center: f64 = rng.gen_range(-0.5..0.5) * radius;
        let coeffs: Vec<(f64, f64)> = (0..spec.mode_count)
            .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let base: f64 = rng.gen_range(-1.0..1.0);
        let mut v = vec![0.0; grid.len()];
        for j in 0..grid.ny {
            let y = grid.x2(j);
            let modes: f64 = base
                + coeffs
                    .iter()
                    .enumerate()
                    .map(|(m, (a, b))| {
                        let k = (m + 1) as f64;
                        a * (tau * k * y).cos() + b * (tau * k * y).sin()
                    })
                    .sum::<f64>();
            for i in 0..grid.nx {
                v[j * grid.nx + i] = modes * bump((grid.x1(i) - center) / radius);
            }
        }
        *comp = v;
    }
    out
}

/// Navier-Stokes data `(ρ̄0, ū10, 0) + (φ0, ψ10, ψ20)` with the
/// perturbation rescaled to `‖(φ0, Ψ0)‖_{H²(y)} = amplitude` at scale `eps`.
pub fn initial_data(
    slice: &AnsatzSlice,
    spec: &PerturbationSpec,
    grid: &Grid2D,
    eps: f64,
    rho_minus: f64,
) -> Result<Field2D> {
    if slice.rho_tilde.len() != grid.nx {
        return Err(Error::Usage(format!(
            "ansatz slice has {} points but nx = {}",
            slice.rho_tilde.len(),
            grid.nx
        )));
    }
    if !(spec.amplitude >= 0.0) || !spec.amplitude.is_finite() {
        return Err(Error::Config(format!(
            "perturbation amplitude must be finite and >= 0, got {}",
            spec.amplitude
        )));
    }
    if !(1..=MAX_MODES).contains(&spec.mode_count) {
        return Err(Error::Config(format!(
            "perturbation mode count must be 1 to {MAX_MODES}, got {}",
            spec.mode_count
        )));
    }
    if !(eps > 0.0) {
        return Err(Error::Config(format!("eps must be positive, got {eps}")));
    }
    let base_u1: Vec<f64> = slice.u1_tilde.clone();
    if spec.amplitude == 0.0 {
        return Field2D::from_columns(grid, &slice.rho_tilde, &slice.m1_tilde);
    }
    let [phi, psi1, psi2] = perturbation_shape(spec, grid);
    let shape = PerturbationField {
        nx: grid.nx,
        ny: grid.ny,
        h1: grid.h1(),
        h2: grid.h2(),
        phi,
        psi1,
        psi2,
    };
    let norm = shape.norm(NormKind::H2, Frame::Scaled(eps));
    if !(norm > 0.0) {
        return Err(Error::Config("perturbation support misses the grid".into()));
    }
    let scale = spec.amplitude / norm;
    let mut field = Field2D::zeros(grid);
    for k in 0..grid.len() {
        let i = k % grid.nx;
        let rho = slice.rho_tilde[i] + scale * shape.phi[k];
        if !(rho > 0.5 * rho_minus) {
            return Err(Error::Config(format!(
                "perturbed density {rho} at (x1, x2) = ({}, {}) is not above rho-/2 = {}",
                grid.x1(i),
                grid.x2(k / grid.nx),
                0.5 * rho_minus
            )));
        }
        field.rho[k] = rho;
        field.m1[k] = rho * (base_u1[i] + scale * shape.psi1[k]);
        field.m2[k] = rho * scale * shape.psi2[k];
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::extract_perturbation;
    use crate::gas_model::{GasLaw, GasState1D, RiemannEndStates};
    use crate::hyperbolic_wave::{solve, HypWaveParams};

    fn profile(delta: f64) -> RarefactionProfile {
        let law = GasLaw::new(2.0).unwrap();
        let left = GasState1D::new(1.0, 0.0).unwrap();
        let right = law.connect_2rarefaction(left, 4.0).unwrap();
        RarefactionProfile::new(law, RiemannEndStates::new(left, right), delta).unwrap()
    }

    fn times(dt: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|k| k as f64 * dt).collect()
    }

    #[test]
    fn zero_wave_gives_the_profile() {
        let p = profile(0.5);
        let grid = Grid1D::new(10.0, 400).unwrap();
        let w = solve(&p, &HypWaveParams::new(0.01, 0.0, 0.0), &[0.0, 0.5], grid).unwrap();
        let a = Ansatz::new(p, w, grid);
        let s = a.build(0.5).unwrap();
        for i in 0..grid.n {
            let v = p.eval(0.5, grid.x(i)).unwrap();
            assert_eq!(s.rho_tilde[i], v.rho);
            assert_eq!(s.m1_tilde[i], v.m1);
        }
        // Far field equals the end states.
        assert!((s.rho_tilde[0] - 1.0).abs() < 1e-13);
        assert!((s.rho_tilde[grid.n - 1] - 4.0).abs() < 1e-13);
        assert!((s.u1_tilde[grid.n - 1] - 2.0).abs() < 1e-13);
    }

    #[test]
    fn initial_slice_is_the_profile() {
        let p = profile(0.5);
        let grid = Grid1D::new(10.0, 400).unwrap();
        let w = solve(&p, &HypWaveParams::new(0.02, 1.0, 0.0), &[0.0, 1.0], grid).unwrap();
        let a = Ansatz::new(p, w, grid);
        let s = a.build(0.0).unwrap();
        for i in 0..grid.n {
            let v = p.eval(0.0, grid.x(i)).unwrap();
            assert_eq!((s.rho_tilde[i], s.m1_tilde[i]), (v.rho, v.m1));
        }
        assert!(a.build(0.3).is_err());
    }

    #[test]
    fn density_bound_violation_is_a_configuration_error() {
        let p = profile(0.5);
        let grid = Grid1D::new(10.0, 400).unwrap();
        let mut w = solve(&p, &HypWaveParams::new(0.02, 1.0, 0.0), &[0.0, 1.0], grid).unwrap();
        w.d1[1][200] = -0.5;
        let err = Ansatz::new(p, w, grid).build(1.0).unwrap_err();
        assert!(matches!(err, Error::Config(ref m) if m.contains("epsilon too large")));
    }

    #[test]
    fn residual_of_constant_state_vanishes() {
        let law = GasLaw::new(2.0).unwrap();
        let s = GasState1D::new(2.0, 0.5).unwrap();
        let p = RarefactionProfile::new(law, RiemannEndStates::new(s, s), 0.5).unwrap();
        let grid = Grid1D::new(5.0, 200).unwrap();
        let w = solve(&p, &HypWaveParams::new(0.02, 1.0, 0.0), &times(0.1, 3), grid).unwrap();
        let a = Ansatz::new(p, w, grid);
        assert_eq!(a.momentum_residual(0.1, 50).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn residual_without_wave_is_the_euler_residual() {
        let p = profile(0.5);
        let grid = Grid1D::new(10.0, 400).unwrap();
        let a = Ansatz::without_wave(p, grid);
        for i in [50, 199, 200, 260, 390] {
            let (m, q) = a.momentum_residual(0.7, i).unwrap();
            let e = p.euler_residual(0.7, grid.x(i)).unwrap();
            assert!(m.abs() <= 1e-8 * e.mass_scale.max(1e-300) || m.abs() < 1e-13);
            assert!(q.abs() <= 1e-8 * e.momentum_scale.max(1e-300) || q.abs() < 1e-13);
        }
        let w = solve(&p, &HypWaveParams::new(0.0, 1.0, 0.0), &times(0.1, 3), grid).unwrap();
        let a = Ansatz::new(p, w, grid);
        let (m, q) = a.momentum_residual(0.2, 210).unwrap();
        let e = p.euler_residual(0.2, grid.x(210)).unwrap();
        assert_eq!((m, q), (e.mass, e.momentum));
        assert!(a.momentum_residual(0.2, 0).is_err());
    }

    #[test]
    fn mass_residual_shrinks_under_refinement() {
        let p = profile(0.5);
        let params = HypWaveParams::new(0.05, 1.0, 0.0);
        let residual = |n: usize| {
            let grid = Grid1D::new(8.0, n).unwrap();
            // Output times a few steps apart so that time differencing
            // refines with the grid.
            let dt = 0.9 * grid.h() / p.max_char_speed();
            let out: Vec<f64> = (0..3).map(|k| 0.5 + k as f64 * 4.0 * dt).collect();
            let mut all = vec![0.0];
            all.extend(out.iter().copied());
            let w = solve(&p, &params, &all, grid).unwrap();
            let a = Ansatz::new(p, w, grid);
            (1..n - 1)
                .map(|i| a.momentum_residual(out[1], i).unwrap().0.abs())
                .fold(0.0, f64::max)
        };
        let (r1, r2) = (residual(400), residual(800));
        let order = (r1 / r2).log2();
        assert!(order >= 0.8, "{r1:e} {r2:e} {order}");
    }

    #[test]
    fn initial_data_examples() {
        let p = profile(0.5);
        let line = Grid1D::new(10.0, 200).unwrap();
        let a = Ansatz::without_wave(p, line);
        let s = a.build(0.0).unwrap();
        let grid = Grid2D::new(10.0, 200, 8).unwrap();
        let flat = initial_data(&s, &PerturbationSpec::default(), &grid, 0.02, 1.0).unwrap();
        assert!(flat.m2.iter().all(|v| *v == 0.0));
        assert_eq!(flat.x2_variation(), 0.0);
        let p0 = extract_perturbation(&flat, &s).unwrap();
        assert!(p0.phi.iter().all(|v| *v == 0.0));

        let spec = PerturbationSpec {
            amplitude: 0.3,
            seed: 11,
            mode_count: 3,
        };
        let f1 = initial_data(&s, &spec, &grid, 0.02, 1.0).unwrap();
        let f2 = initial_data(&s, &spec, &grid, 0.02, 1.0).unwrap();
        assert_eq!(f1, f2);
        let pert = extract_perturbation(&f1, &s).unwrap();
        let measured = pert.norm(NormKind::H2, Frame::Scaled(0.02));
        assert!((measured - 0.3).abs() <= 1e-10 * 0.3, "{measured}");
        assert!(f1.m2.iter().any(|v| *v != 0.0));
        // Compact support: nothing reaches the ends.
        for j in 0..grid.ny {
            for i in [0, 1, 2, grid.nx - 3, grid.nx - 2, grid.nx - 1] {
                assert_eq!(pert.phi[j * grid.nx + i], 0.0);
            }
        }
        let other = PerturbationSpec { seed: 12, ..spec };
        assert_ne!(initial_data(&s, &other, &grid, 0.02, 1.0).unwrap(), f1);
    }

    #[test]
    fn initial_data_rejects_bad_input() {
        let p = profile(0.5);
        let s = Ansatz::without_wave(p, Grid1D::new(10.0, 200).unwrap()).build(0.0).unwrap();
        let grid = Grid2D::new(10.0, 200, 8).unwrap();
        let big = PerturbationSpec {
            amplitude: 1e3,
            seed: 1,
            mode_count: 2,
        };
        assert!(matches!(initial_data(&s, &big, &grid, 0.5, 1.0), Err(Error::Config(_))));
        let modes = PerturbationSpec {
            amplitude: 0.1,
            seed: 1,
            mode_count: 5,
        };
        assert!(initial_data(&s, &modes, &grid, 0.5, 1.0).is_err());
        let wrong = Grid2D::new(10.0, 100, 8).unwrap();
        assert!(matches!(
            initial_data(&s, &PerturbationSpec::default(), &wrong, 0.5, 1.0),
            Err(Error::Usage(_))
        ));
    }
}
