//! Smooth solution of the inviscid Burgers equation `w_t + w w_x = 0` with
//! the tanh initial layer
//!
//! ```text
//! w0(x) = (w+ + w-)/2 + (w+ - w-)/2 · tanh(x/δ),
//! ```
//!
//! evaluated exactly by the method of characteristics. For `w+ >= w-` the
//! map `x0 -> x0 + w0(x0) t` is strictly increasing, so every point has a
//! unique characteristic foot and the derivatives follow from
//! differentiating along characteristics with `J = 1 + t w0'(x0)`:
//!
//! ```text
//! w_x   = w0' / J
//! w_xx  = w0'' / J^3
//! w_xxx = (w0''' J - 3 t w0''^2) / J^5
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FOOT_MAX_ITER: usize = 200;
/// Half-width, in units of δ, beyond which the layer is replaced by its end
/// state. `tanh` tails there are below 1e-40.
const FAR_FIELD_WIDTHS: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurgersWave {
    w_minus: f64,
    w_plus: f64,
    delta: f64,
}

/// Value of `w` and its first three `x1`-derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BurgersPointValue {
    pub w: f64,
    pub wx: f64,
    pub wxx: f64,
    pub wxxx: f64,
}

impl BurgersPointValue {
    fn constant(w: f64) -> Self {
        Self {
            w,
            ..Default::default()
        }
    }

    /// `w_t = -w w_x` from the equation itself.
    #[inline]
    pub fn wt(&self) -> f64 {
        -self.w * self.wx
    }
}

/// `sech(s)^2` without cancellation in the tails.
#[inline]
fn sech2(s: f64) -> f64 {
    let e = (-2.0 * s.abs()).exp();
    4.0 * e / ((1.0 + e) * (1.0 + e))
}

impl BurgersWave {
    pub fn new(w_minus: f64, w_plus: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::Config(format!("layer width must be positive, got {delta}")));
        }
        if !w_minus.is_finite() || !w_plus.is_finite() {
            return Err(Error::Config("end speeds must be finite".into()));
        }
        if w_plus < w_minus {
            return Err(Error::Config(format!(
                "Burgers data must be expansive: w+ = {w_plus} < w- = {w_minus}"
            )));
        }
        Ok(Self {
            w_minus,
            w_plus,
            delta,
        })
    }

    pub fn w_minus(&self) -> f64 {
        self.w_minus
    }

    pub fn w_plus(&self) -> f64 {
        self.w_plus
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Wave strength `w+ - w-`.
    pub fn strength(&self) -> f64 {
        self.w_plus - self.w_minus
    }

    pub fn is_degenerate(&self) -> bool {
        self.w_plus == self.w_minus
    }

    fn mean(&self) -> f64 {
        0.5 * (self.w_plus + self.w_minus)
    }

    /// `w0` and its derivatives in closed form.
    pub fn initial_profile(&self, x1: f64) -> BurgersPointValue {
        let amp = 0.5 * self.strength();
        let d = self.delta;
        let s = x1 / d;
        let th = s.tanh();
        let sh = sech2(s);
        BurgersPointValue {
            w: self.mean() + amp * th,
            wx: amp / d * sh,
            wxx: -2.0 * amp / (d * d) * th * sh,
            wxxx: amp / (d * d * d) * sh * (6.0 * th * th - 2.0),
        }
    }

    /// Unique `x0` with `x0 + w0(x0) t = x1`.
    pub fn characteristic_foot(&self, t: f64, x1: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("time must be non-negative, got {t}")));
        }
        if t == 0.0 {
            return Ok(x1);
        }
        if self.is_degenerate() {
            return Ok(x1 - self.w_minus * t);
        }
        let tol = 1e-12 * x1.abs().max(1.0);
        let mut lo = x1 - self.w_plus * t;
        let mut hi = x1 - self.w_minus * t;
        let mut x = (x1 - self.mean() * t).clamp(lo, hi);
        let mut last_step = hi - lo;
        for _ in 0..FOOT_MAX_ITER {
            let p = self.initial_profile(x);
            let g = x + p.w * t - x1;
            if g.abs() <= tol {
                return Ok(x);
            }
            if g < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            // Newton unless it leaves the bracket or stalls; then bisect.
            let newton = x - g / (1.0 + t * p.wx);
            let next = if newton > lo && newton < hi && (newton - x).abs() < 0.5 * last_step {
                newton
            } else {
                0.5 * (lo + hi)
            };
            last_step = (next - x).abs();
            x = next;
            if hi - lo <= f64::EPSILON * x.abs().max(1.0) {
                return Ok(x);
            }
        }
        Err(Error::Numerical(format!(
            "characteristic foot did not converge at t = {t}, x1 = {x1}"
        )))
    }

    /// `w(t, x1)` and its first three `x1`-derivatives.
    pub fn eval(&self, t: f64, x1: f64) -> Result<BurgersPointValue> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("time must be non-negative, got {t}")));
        }
        if self.is_degenerate() {
            return Ok(BurgersPointValue::constant(self.w_minus));
        }
        let reach = FAR_FIELD_WIDTHS * self.delta + t * self.w_minus.abs().max(self.w_plus.abs());
        let offset = x1 - self.mean() * t;
        if offset > reach {
            return Ok(BurgersPointValue::constant(self.w_plus));
        }
        if offset < -reach {
            return Ok(BurgersPointValue::constant(self.w_minus));
        }
        let x0 = self.characteristic_foot(t, x1)?;
        let p = self.initial_profile(x0);
        let jac = 1.0 + t * p.wx;
        let j2 = jac * jac;
        let j3 = j2 * jac;
        Ok(BurgersPointValue {
            w: p.w,
            wx: p.wx / jac,
            wxx: p.wxx / j3,
            wxxx: (p.wxxx * jac - 3.0 * t * p.wxx * p.wxx) / (j3 * j2),
        })
    }

    /// Centered rarefaction fan `w^r(x1/t)` of the Riemann problem.
    pub fn fan(&self, t: f64, x1: f64) -> f64 {
        if t <= 0.0 {
            return if x1 < 0.0 { self.w_minus } else { self.w_plus };
        }
        (x1 / t).clamp(self.w_minus, self.w_plus)
    }

    /// `sup_x |w_x(t, ·)| = w̃ / (2δ + t w̃)`, attained on the characteristic
    /// from `x0 = 0`.
    pub fn max_slope(&self, t: f64) -> f64 {
        let s = self.strength();
        s / (2.0 * self.delta + t * s)
    }
}
