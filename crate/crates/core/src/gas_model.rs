//! γ-law gas thermodynamics, characteristic speeds, Riemann invariants and
//! the exact centered 2-rarefaction fan of the 1D isentropic Euler system.
//!
//! Riemann invariants use the antiderivative
//! `F(ρ) = 2/(γ-1) · ρ^((γ-1)/2)` of `sqrt(p'(s))/s` with the integration
//! constant fixed to zero, so `z1 = u1 + F(ρ)` and `z2 = u1 - F(ρ)`. Every
//! module in the crate uses this convention.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance on the 2-Riemann invariant when deciding whether two
/// states lie on one 2-rarefaction curve.
pub const RAREFACTION_Z2_TOL: f64 = 1e-10;

/// Pressure law `p(ρ) = ρ^γ / γ` with `γ > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasLaw {
    gamma: f64,
}

impl GasLaw {
    pub fn new(gamma: f64) -> Result<Self> {
        if !gamma.is_finite() || gamma <= 1.0 {
            return Err(Error::Config(format!(
                "adiabatic exponent must satisfy gamma > 1, got {gamma}"
            )));
        }
        Ok(Self { gamma })
    }

    #[inline]
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    #[inline]
    pub fn pressure(&self, rho: f64) -> f64 {
        rho.powf(self.gamma) / self.gamma
    }

    /// `p'(ρ) = ρ^(γ-1)`.
    #[inline]
    pub fn pressure_derivative(&self, rho: f64) -> f64 {
        rho.powf(self.gamma - 1.0)
    }

    /// Sound speed `c(ρ) = sqrt(p'(ρ)) = ρ^((γ-1)/2)`.
    pub fn sound_speed(&self, rho: f64) -> Result<f64> {
        check_density(rho)?;
        Ok(self.sound_speed_unchecked(rho))
    }

    /// Sound speed without the positivity check, for inner loops that
    /// have already validated the density.
    #[inline]
    pub fn sound_speed_unchecked(&self, rho: f64) -> f64 {
        // The solver calls this once per cell and stage; skip powf where we can.
        let e = 0.5 * (self.gamma - 1.0);
        if e == 0.5 {
            rho.sqrt()
        } else if e == 1.0 {
            rho
        } else {
            rho.powf(e)
        }
    }

    /// `dc/dρ = (γ-1)/2 · ρ^((γ-3)/2)`.
    #[inline]
    pub fn sound_speed_derivative(&self, rho: f64) -> f64 {
        0.5 * (self.gamma - 1.0) * rho.powf(0.5 * (self.gamma - 3.0))
    }

    /// `F(ρ) = 2/(γ-1) · c(ρ)`, the zero-constant antiderivative of `c(s)/s`.
    #[inline]
    pub fn riemann_integral(&self, rho: f64) -> f64 {
        2.0 / (self.gamma - 1.0) * self.sound_speed_unchecked(rho)
    }

    pub fn riemann_invariant(&self, family: Family, state: GasState1D) -> f64 {
        let f = self.riemann_integral(state.rho);
        match family {
            Family::First => state.u1 + f,
            Family::Second => state.u1 - f,
        }
    }

    pub fn char_speed(&self, family: Family, state: GasState1D) -> f64 {
        let c = self.sound_speed_unchecked(state.rho);
        match family {
            Family::First => state.u1 - c,
            Family::Second => state.u1 + c,
        }
    }

    /// True when `ends` are joined by a 2-rarefaction: equal `z2` (relative
    /// tolerance [`RAREFACTION_Z2_TOL`]) and `λ2` increasing from left to
    /// right. Identical states count as a zero-strength rarefaction.
    pub fn check_2rarefaction(&self, ends: &RiemannEndStates) -> bool {
        if ends.left == ends.right {
            return true;
        }
        let z_left = self.riemann_invariant(Family::Second, ends.left);
        let z_right = self.riemann_invariant(Family::Second, ends.right);
        let same_curve = (z_left - z_right).abs() <= RAREFACTION_Z2_TOL * z_left.abs().max(1.0);
        let expanding =
            self.char_speed(Family::Second, ends.right) > self.char_speed(Family::Second, ends.left);
        same_curve && expanding
    }

    /// Right state reached from `left` along the 2-rarefaction curve at
    /// density `rho_right`: `u1+ = u1- + F(ρ+) - F(ρ-)`.
    pub fn connect_2rarefaction(&self, left: GasState1D, rho_right: f64) -> Result<GasState1D> {
        check_density(rho_right)?;
        let u1 = left.u1 + self.riemann_integral(rho_right) - self.riemann_integral(left.rho);
        GasState1D::new(rho_right, u1)
    }

    /// State on the 2-rarefaction curve through `z2` whose second
    /// characteristic speed equals `lambda2`.
    ///
    /// Solves `u + c = λ2`, `u - 2c/(γ-1) = z2`, giving
    /// `c = (γ-1)/(γ+1) · (λ2 - z2)`.
    pub fn state_on_2curve(&self, z2: f64, lambda2: f64) -> Result<GasState1D> {
        let c = (self.gamma - 1.0) / (self.gamma + 1.0) * (lambda2 - z2);
        if !(c > 0.0) {
            return Err(Error::Domain(format!(
                "speed {lambda2} with z2 = {z2} gives non-positive sound speed {c}"
            )));
        }
        GasState1D::new(c.powf(2.0 / (self.gamma - 1.0)), lambda2 - c)
    }

    /// Exact self-similar 2-rarefaction solution at `xi = x1 / t`.
    pub fn exact_fan_eval(&self, ends: &RiemannEndStates, xi: f64) -> Result<GasState1D> {
        if !self.check_2rarefaction(ends) {
            return Err(Error::Config(
                "end states are not connected by a 2-rarefaction wave".into(),
            ));
        }
        let lam_left = self.char_speed(Family::Second, ends.left);
        let lam_right = self.char_speed(Family::Second, ends.right);
        if xi <= lam_left {
            return Ok(ends.left);
        }
        if xi >= lam_right {
            return Ok(ends.right);
        }
        let z2 = self.riemann_invariant(Family::Second, ends.left);
        self.state_on_2curve(z2, xi)
    }
}

fn check_density(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("density must be positive, got {rho}")))
    }
}

/// Characteristic family of the 1D Euler system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    First,
    Second,
}

/// Density and normal velocity of a 1D gas state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasState1D {
    pub rho: f64,
    pub u1: f64,
}

impl GasState1D {
    pub fn new(rho: f64, u1: f64) -> Result<Self> {
        check_density(rho)?;
        if !u1.is_finite() {
            return Err(Error::Domain(format!("velocity must be finite, got {u1}")));
        }
        Ok(Self { rho, u1 })
    }

    #[inline]
    pub fn momentum(&self) -> f64 {
        self.rho * self.u1
    }
}

/// Left and right states of a Riemann problem in `x1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiemannEndStates {
    pub left: GasState1D,
    pub right: GasState1D,
}

impl RiemannEndStates {
    pub fn new(left: GasState1D, right: GasState1D) -> Self {
        Self { left, right }
    }

    /// End states checked to form a (possibly zero-strength) 2-rarefaction.
    pub fn rarefaction(law: &GasLaw, left: GasState1D, right: GasState1D) -> Result<Self> {
        let ends = Self { left, right };
        if law.check_2rarefaction(&ends) {
            Ok(ends)
        } else {
            Err(Error::Config(format!(
                "states {left:?} and {right:?} are not connected by a 2-rarefaction wave"
            )))
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.left == self.right
    }

    pub fn rho_min(&self) -> f64 {
        self.left.rho.min(self.right.rho)
    }

    pub fn rho_max(&self) -> f64 {
        self.left.rho.max(self.right.rho)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gas(gamma: f64) -> GasLaw {
        GasLaw::new(gamma).unwrap()
    }

    fn st(rho: f64, u1: f64) -> GasState1D {
        GasState1D::new(rho, u1).unwrap()
    }

    fn test_ends() -> RiemannEndStates {
        RiemannEndStates::new(st(1.0, 0.0), st(4.0, 2.0))
    }

    /// Composite Simpson rule, used as an independent check on `F`.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + k as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn rejects_isothermal_and_bad_gamma() {
        assert!(matches!(GasLaw::new(1.0), Err(Error::Config(_))));
        assert!(GasLaw::new(0.5).is_err());
        assert!(GasLaw::new(f64::NAN).is_err());
    }

    #[test]
    fn sound_speed_examples() {
        assert_eq!(gas(2.0).sound_speed(1.0).unwrap(), 1.0);
        assert!((gas(2.0).sound_speed(4.0).unwrap() - 2.0).abs() < 1e-15);
        let c = gas(1.4).sound_speed(2.0).unwrap();
        assert!((c - 1.148_698_354_997_035).abs() < 1e-12);
        assert!(matches!(gas(2.0).sound_speed(0.0), Err(Error::Domain(_))));
        assert!(gas(2.0).sound_speed(-1.0).is_err());
    }

    #[test]
    fn sound_speed_squared_is_pressure_slope() {
        for &gamma in &[1.4, 5.0 / 3.0, 2.0, 3.0] {
            let law = gas(gamma);
            for k in 0..60 {
                let rho = 10f64.powf(-2.0 + 4.0 * k as f64 / 59.0);
                let c = law.sound_speed(rho).unwrap();
                let exact = law.pressure_derivative(rho);
                assert!((c * c - exact).abs() <= 1e-12 * exact);
                // Central difference of p with a relative step.
                let h = 1e-5 * rho;
                let fd = (law.pressure(rho + h) - law.pressure(rho - h)) / (2.0 * h);
                assert!((c * c - fd).abs() <= 1e-7 * exact, "gamma {gamma} rho {rho}");
            }
        }
    }

    #[test]
    fn riemann_invariant_examples() {
        let law = gas(2.0);
        assert!((law.riemann_invariant(Family::Second, st(1.0, 0.0)) + 2.0).abs() < 1e-15);
        assert!((law.riemann_invariant(Family::Second, st(4.0, 2.0)) + 2.0).abs() < 1e-15);
        assert!((law.riemann_invariant(Family::First, st(1.0, 0.0)) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn riemann_integral_matches_quadrature() {
        for &gamma in &[1.4, 2.0, 3.0] {
            let law = gas(gamma);
            let integrand = |s: f64| law.sound_speed_unchecked(s) / s;
            for &(a, b) in &[(1.0, 4.0), (0.3, 2.5), (2.0, 9.0)] {
                let quad = simpson(integrand, a, b, 2000);
                let closed = law.riemann_integral(b) - law.riemann_integral(a);
                assert!((quad - closed).abs() < 1e-10, "gamma {gamma}: {quad} vs {closed}");
            }
        }
    }

    #[test]
    fn char_speed_examples() {
        let law = gas(2.0);
        assert_eq!(law.char_speed(Family::Second, st(1.0, 0.0)), 1.0);
        assert!((law.char_speed(Family::Second, st(4.0, 2.0)) - 4.0).abs() < 1e-15);
        assert_eq!(law.char_speed(Family::First, st(1.0, 0.0)), -1.0);
    }

    #[test]
    fn rarefaction_check_examples() {
        let law = gas(2.0);
        // u1+ = u1- + ∫_1^4 s^{-1/2} ds = 2
        assert!(law.check_2rarefaction(&test_ends()));
        assert!(law.check_2rarefaction(&RiemannEndStates::new(st(1.0, 0.0), st(1.0, 0.0))));
        assert!(!law.check_2rarefaction(&RiemannEndStates::new(st(4.0, 2.0), st(1.0, 0.0))));
        // Off the curve.
        assert!(!law.check_2rarefaction(&RiemannEndStates::new(st(1.0, 0.0), st(4.0, 2.1))));
    }

    #[test]
    fn connected_right_state_passes_check() {
        for &gamma in &[1.4, 2.0, 3.0] {
            let law = gas(gamma);
            let left = st(0.7, -0.3);
            let right = law.connect_2rarefaction(left, 2.9).unwrap();
            assert!(law.check_2rarefaction(&RiemannEndStates::new(left, right)));
        }
    }

    #[test]
    fn fan_examples() {
        let law = gas(2.0);
        let ends = test_ends();
        assert_eq!(law.exact_fan_eval(&ends, 0.5).unwrap(), ends.left);
        assert_eq!(law.exact_fan_eval(&ends, 5.0).unwrap(), ends.right);
        let mid = law.exact_fan_eval(&ends, 2.5).unwrap();
        assert!((mid.rho - 2.25).abs() < 1e-14 && (mid.u1 - 1.0).abs() < 1e-14);
        // Oracle: recompute λ2 and z2 of the returned state.
        assert!((law.char_speed(Family::Second, mid) - 2.5).abs() < 1e-14);
        assert!((law.riemann_invariant(Family::Second, mid) + 2.0).abs() < 1e-14);

        let bad = RiemannEndStates::new(st(4.0, 2.0), st(1.0, 0.0));
        assert!(matches!(law.exact_fan_eval(&bad, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn fan_invariants() {
        for &gamma in &[1.4, 2.0, 3.0] {
            let law = gas(gamma);
            let left = st(1.0, 0.0);
            let ends = RiemannEndStates::new(left, law.connect_2rarefaction(left, 4.0).unwrap());
            let lo = law.char_speed(Family::Second, ends.left);
            let hi = law.char_speed(Family::Second, ends.right);
            let z = law.riemann_invariant(Family::Second, ends.left);
            for k in 0..1000 {
                let xi = lo - 1.0 + (hi - lo + 2.0) * k as f64 / 999.0;
                let s = law.exact_fan_eval(&ends, xi).unwrap();
                assert!((law.riemann_invariant(Family::Second, s) - z).abs() <= 1e-10);
                let lam = law.char_speed(Family::Second, s);
                assert!((lam - xi.clamp(lo, hi)).abs() <= 1e-10);
            }
            for (edge, state) in [(lo, ends.left), (hi, ends.right)] {
                for off in [-1e-9, 1e-9] {
                    let s = law.exact_fan_eval(&ends, edge + off).unwrap();
                    assert!((s.rho - state.rho).abs() <= 1e-6);
                    assert!((s.u1 - state.u1).abs() <= 1e-6);
                }
            }
        }
    }
}
