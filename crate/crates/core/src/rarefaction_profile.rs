//! Smooth approximate 2-rarefaction wave `(ρ̄, ū1)(t, x1)`.
//!
//! The profile is defined implicitly by `λ2(ρ̄, ū1) = w(t + s, x1)` and
//! `z2(ρ̄, ū1) = z2(ρ±, u1±)`, where `w` is the smooth Burgers solution with
//! end speeds `w± = λ2(ρ±, u1±)` and `s` is a fixed time offset (zero by
//! default, see [`RarefactionProfile::with_time_offset`]). Because the
//! inversion is explicit,
//!
//! ```text
//! c̄ = (γ-1)/(γ+1) · (w - z2),   ρ̄ = c̄^(2/(γ-1)),   ū1 = w - c̄,
//! ```
//!
//! `ū1` is affine in `w` and all `x1`-derivatives follow from the Burgers
//! derivatives by the chain rule.

use crate::burgers_profile::{BurgersPointValue, BurgersWave};
use crate::error::{Error, Result};
use crate::gas_model::{Family, GasLaw, GasState1D, RiemannEndStates};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RarefactionProfile {
    law: GasLaw,
    ends: RiemannEndStates,
    wave: BurgersWave,
    z2: f64,
    time_offset: f64,
}

/// Profile values and `x1`-derivatives at one point, plus the time
/// derivatives of `ρ̄` and `ū1`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProfilePointValue {
    /// Underlying Burgers data at time `t + offset`.
    pub burgers: BurgersPointValue,
    pub rho: f64,
    pub u1: f64,
    pub m1: f64,
    pub rho_x: f64,
    pub u1_x: f64,
    pub m1_x: f64,
    pub rho_xx: f64,
    pub u1_xx: f64,
    pub rho_xxx: f64,
    pub u1_xxx: f64,
    pub rho_t: f64,
    pub u1_t: f64,
}

impl ProfilePointValue {
    pub fn state(&self) -> GasState1D {
        GasState1D {
            rho: self.rho,
            u1: self.u1,
        }
    }
}

/// Residuals of the 1D Euler equations for the profile, with the magnitude
/// of the terms that cancel in each.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerResidual {
    pub mass: f64,
    pub momentum: f64,
    pub mass_scale: f64,
    pub momentum_scale: f64,
}

impl RarefactionProfile {
    pub fn new(law: GasLaw, ends: RiemannEndStates, delta: f64) -> Result<Self> {
        if !law.check_2rarefaction(&ends) {
            return Err(Error::Config(
                "end states are not connected by a 2-rarefaction wave".into(),
            ));
        }
        let w_minus = law.char_speed(Family::Second, ends.left);
        let w_plus = law.char_speed(Family::Second, ends.right);
        let wave = BurgersWave::new(w_minus, w_plus.max(w_minus), delta)?;
        Ok(Self {
            law,
            ends,
            wave,
            z2: law.riemann_invariant(Family::Second, ends.left),
            time_offset: 0.0,
        })
    }

    /// Evaluate the Burgers layer at `t + offset` instead of `t`.
    ///
    /// With `offset = 1` the profile at `t = 0` is already a fan of unit
    /// age, which suits large-time stability studies but keeps an O(1)
    /// distance to the centered fan for all finite times.
    pub fn with_time_offset(mut self, offset: f64) -> Result<Self> {
        if !(offset >= 0.0) || !offset.is_finite() {
            return Err(Error::Config(format!("time offset must be >= 0, got {offset}")));
        }
        self.time_offset = offset;
        Ok(self)
    }

    pub fn law(&self) -> &GasLaw {
        &self.law
    }

    pub fn ends(&self) -> &RiemannEndStates {
        &self.ends
    }

    pub fn wave(&self) -> &BurgersWave {
        &self.wave
    }

    pub fn z2(&self) -> f64 {
        self.z2
    }

    pub fn delta(&self) -> f64 {
        self.wave.delta()
    }

    pub fn time_offset(&self) -> f64 {
        self.time_offset
    }

    pub fn is_degenerate(&self) -> bool {
        self.wave.is_degenerate()
    }

    /// Largest `|λ1|`, `|λ2|` over the profile. Both speeds are affine in
    /// `w` along the 2-rarefaction curve, so the extremes sit at the ends.
    pub fn max_char_speed(&self) -> f64 {
        [self.ends.left, self.ends.right]
            .iter()
            .flat_map(|&s| {
                [
                    self.law.char_speed(Family::First, s).abs(),
                    self.law.char_speed(Family::Second, s).abs(),
                ]
            })
            .fold(0.0, f64::max)
    }

    pub fn state_from_w(&self, w: f64) -> Result<GasState1D> {
        let slack = 1e-12 * self.wave.w_plus().abs().max(1.0);
        if w < self.wave.w_minus() - slack || w > self.wave.w_plus() + slack {
            return Err(Error::Domain(format!(
                "w = {w} outside [{}, {}]",
                self.wave.w_minus(),
                self.wave.w_plus()
            )));
        }
        if self.is_degenerate() {
            return Ok(self.ends.left);
        }
        self.law.state_on_2curve(self.z2, w)
    }

    pub fn eval(&self, t: f64, x1: f64) -> Result<ProfilePointValue> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("time must be non-negative, got {t}")));
        }
        if self.is_degenerate() {
            let s = self.ends.left;
            return Ok(ProfilePointValue {
                burgers: BurgersPointValue {
                    w: self.wave.w_minus(),
                    ..Default::default()
                },
                rho: s.rho,
                u1: s.u1,
                m1: s.momentum(),
                ..Default::default()
            });
        }
        let b = self.wave.eval(t + self.time_offset, x1)?;
        let gamma = self.law.gamma();
        let k = (gamma - 1.0) / (gamma + 1.0);
        let n = 2.0 / (gamma - 1.0);
        let c = k * (b.w - self.z2);
        let rho = c.powf(n);
        // dρ/dw and higher, written as multiples of ρ/c^j.
        let r1 = n * k * rho / c;
        let r2 = (n - 1.0) * k * r1 / c;
        let r3 = (n - 2.0) * k * r2 / c;
        let du = 1.0 - k;

        let u1 = b.w - c;
        let rho_x = r1 * b.wx;
        let u1_x = du * b.wx;
        let wt = b.wt();
        Ok(ProfilePointValue {
            burgers: b,
            rho,
            u1,
            m1: rho * u1,
            rho_x,
            u1_x,
            m1_x: rho_x * u1 + rho * u1_x,
            rho_xx: r2 * b.wx * b.wx + r1 * b.wxx,
            u1_xx: du * b.wxx,
            rho_xxx: r3 * b.wx * b.wx * b.wx + 3.0 * r2 * b.wx * b.wxx + r1 * b.wxxx,
            u1_xxx: du * b.wxxx,
            rho_t: r1 * wt,
            u1_t: du * wt,
        })
    }

    /// `(ρ̄_t + (ρ̄ū1)_x, (ρ̄ū1)_t + (ρ̄ū1² + p(ρ̄))_x)` with time derivatives
    /// taken along the Burgers flow `w_t = -w w_x`.
    pub fn euler_residual(&self, t: f64, x1: f64) -> Result<EulerResidual> {
        let p = self.eval(t, x1)?;
        let m_t = p.rho_t * p.u1 + p.rho * p.u1_t;
        let flux_x = p.rho_x * p.u1 * p.u1
            + 2.0 * p.rho * p.u1 * p.u1_x
            + self.law.pressure_derivative(p.rho) * p.rho_x;
        Ok(EulerResidual {
            mass: p.rho_t + p.m1_x,
            momentum: m_t + flux_x,
            mass_scale: p.rho_t.abs() + p.m1_x.abs(),
            momentum_scale: m_t.abs() + flux_x.abs(),
        })
    }

    /// Exact centered fan `(ρ^r, u1^r)(x1/t)` for the same end states.
    pub fn fan_state(&self, t: f64, x1: f64) -> Result<GasState1D> {
        if t <= 0.0 {
            return Ok(if x1 < 0.0 {
                self.ends.left
            } else {
                self.ends.right
            });
        }
        self.law.exact_fan_eval(&self.ends, x1 / t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn profile(gamma: f64, delta: f64) -> RarefactionProfile {
        let law = GasLaw::new(gamma).unwrap();
        let left = GasState1D::new(1.0, 0.0).unwrap();
        let right = law.connect_2rarefaction(left, 4.0).unwrap();
        RarefactionProfile::new(law, RiemannEndStates::new(left, right), delta).unwrap()
    }

    #[test]
    fn wave_speeds_match_end_states() {
        let p = profile(2.0, 0.5);
        assert!((p.wave().w_minus() - 1.0).abs() < 1e-12);
        assert!((p.wave().w_plus() - 4.0).abs() < 1e-12);
        assert!((p.z2() + 2.0).abs() < 1e-12);
        assert!((p.max_char_speed() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn state_from_w_examples() {
        let p = profile(2.0, 0.5);
        let s = p.state_from_w(1.0).unwrap();
        assert!((s.rho - 1.0).abs() < 1e-14 && s.u1.abs() < 1e-14);
        let s = p.state_from_w(4.0).unwrap();
        assert!((s.rho - 4.0).abs() < 1e-14 && (s.u1 - 2.0).abs() < 1e-14);
        let s = p.state_from_w(2.5).unwrap();
        assert!((s.rho - 2.25).abs() < 1e-14 && (s.u1 - 1.0).abs() < 1e-14);
        let law = p.law();
        assert!((law.char_speed(Family::Second, s) - 2.5).abs() < 1e-10);
        assert!((law.riemann_invariant(Family::Second, s) + 2.0).abs() < 1e-10);
        assert!(matches!(p.state_from_w(0.5), Err(Error::Domain(_))));
        assert!(p.state_from_w(4.5).is_err());
    }

    #[test]
    fn far_field_is_left_state() {
        let p = profile(2.0, 0.5);
        let v = p.eval(0.0, -60.0).unwrap();
        assert!((v.rho - 1.0).abs() < 1e-12 && v.u1.abs() < 1e-12);
        for d in [v.rho_x, v.u1_x, v.rho_xx, v.u1_xx, v.rho_xxx, v.u1_xxx] {
            assert!(d.abs() <= 1e-10);
        }
    }

    #[test]
    fn velocity_slope_is_scaled_burgers_slope() {
        let p = profile(2.0, 0.5);
        for k in 0..50 {
            let x = -2.0 + 0.2 * k as f64;
            let v = p.eval(1.0, x).unwrap();
            assert!((v.u1_x - 2.0 / 3.0 * v.burgers.wx).abs() <= 1e-12 * v.u1_x.abs().max(1e-300));
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for &gamma in &[1.4, 2.0, 3.0] {
            let p = profile(gamma, 0.5);
            let (t, x) = (0.7, 1.2);
            let h = 1e-5;
            let v = p.eval(t, x).unwrap();
            let l = p.eval(t, x - h).unwrap();
            let r = p.eval(t, x + h).unwrap();
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(1e-3);
            assert!(close(v.rho_x, (r.rho - l.rho) / (2.0 * h)));
            assert!(close(v.u1_x, (r.u1 - l.u1) / (2.0 * h)));
            assert!(close(v.m1_x, (r.m1 - l.m1) / (2.0 * h)));
            assert!(close(v.rho_xx, (r.rho_x - l.rho_x) / (2.0 * h)));
            assert!(close(v.u1_xx, (r.u1_x - l.u1_x) / (2.0 * h)));
            assert!(close(v.rho_xxx, (r.rho_xx - l.rho_xx) / (2.0 * h)));
            assert!(close(v.u1_xxx, (r.u1_xx - l.u1_xx) / (2.0 * h)));
            let e = p.eval(t + h, x).unwrap();
            let b = p.eval(t - h, x).unwrap();
            assert!(close(v.rho_t, (e.rho - b.rho) / (2.0 * h)));
            assert!(close(v.u1_t, (e.u1 - b.u1) / (2.0 * h)));
        }
    }

    #[test]
    fn identities_hold_at_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &gamma in &[1.4, 2.0, 3.0] {
            let p = profile(gamma, 0.3);
            let law = *p.law();
            for _ in 0..2000 {
                let t = rng.gen_range(0.0..2.0);
                let x = rng.gen_range(-2.0..10.0);
                let v = p.eval(t, x).unwrap();
                let rel = |a: f64, b: f64| (a - b).abs() <= 1e-10 * a.abs().max(b.abs());
                assert!(rel(v.u1_x, 2.0 / (gamma + 1.0) * v.burgers.wx));
                assert!(rel(v.rho_x, v.rho.powf(0.5 * (3.0 - gamma)) * v.u1_x));
                let lemma_xx = v.rho.powf(0.5 * (3.0 - gamma)) * v.u1_xx
                    + 0.5 * (3.0 - gamma) * v.rho.powf(2.0 - gamma) * v.u1_x * v.u1_x;
                assert!((v.rho_xx - lemma_xx).abs() <= 1e-10 * v.rho_xx.abs().max(lemma_xx.abs()).max(1e-12));
                assert!((law.riemann_invariant(Family::Second, v.state()) - p.z2()).abs() <= 1e-10);
                assert!(v.rho >= 1.0 - 1e-12 && v.rho <= 4.0 + 1e-12);
                assert!(v.u1_x >= 0.0);
            }
        }
    }

    #[test]
    fn euler_residual_vanishes() {
        let p = profile(2.0, 0.4);
        for k in 0..60 {
            let x = -1.0 + 0.05 * k as f64;
            let r = p.euler_residual(0.5, x).unwrap();
            assert!(r.mass.abs() <= 1e-8 * r.mass_scale.max(1e-300));
            assert!(r.momentum.abs() <= 1e-8 * r.momentum_scale.max(1e-300));
        }
        let far = p.euler_residual(0.5, 80.0).unwrap();
        assert!(far.mass.abs() <= 1e-12 && far.momentum.abs() <= 1e-12);
    }

    #[test]
    fn degenerate_profile_is_constant() {
        let law = GasLaw::new(2.0).unwrap();
        let s = GasState1D::new(1.5, 0.2).unwrap();
        let p = RarefactionProfile::new(law, RiemannEndStates::new(s, s), 0.3).unwrap();
        let v = p.eval(0.4, 0.0).unwrap();
        assert_eq!(v.rho, 1.5);
        assert_eq!(v.rho_x, 0.0);
        let r = p.euler_residual(0.4, 0.1).unwrap();
        assert_eq!((r.mass, r.momentum), (0.0, 0.0));
    }

    #[test]
    fn time_offset_shifts_the_burgers_clock() {
        let p = profile(2.0, 0.5);
        let shifted = p.with_time_offset(1.0).unwrap();
        let a = shifted.eval(0.5, 1.3).unwrap();
        let b = p.eval(1.5, 1.3).unwrap();
        assert_eq!(a.rho, b.rho);
        assert!(p.with_time_offset(-1.0).is_err());
    }
}
