//! The one-well/one-obstacle potential `F(s) = s²(1/2 - 2s)` (`+∞` above 1/4)
//! and the bump profile `-q'` that joins the well at 0 to the obstacle at 1/4.

use crate::error::{Error, Result};
use crate::util::adaptive_simpson;

/// Position of the hard obstacle.
pub const OBSTACLE: f64 = 0.25;
/// Zero of `F'` inside `(0, 1/4)`; the level set displayed for 3-d runs.
pub const FLAT_POINT: f64 = 1.0 / 6.0;
/// Zero of `F''`; `F` is convex on `(-∞, 1/12]`.
pub const CONVEXITY_LIMIT: f64 = 1.0 / 12.0;
/// Surface-tension constant `2∫₀^{1/4} √(2F(s)) ds` in closed form.
pub const C_F: f64 = 1.0 / 30.0;
/// Stand-in for `F = +∞` when an energy must stay finite.
pub const OBSTACLE_SENTINEL: f64 = f64::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialConstants {
    pub c_f: f64,
    pub obstacle: f64,
    pub well: f64,
    pub flat_point: f64,
    pub convexity_limit: f64,
}

impl Default for PotentialConstants {
    fn default() -> Self {
        PotentialConstants {
            c_f: C_F,
            obstacle: OBSTACLE,
            well: 0.0,
            flat_point: FLAT_POINT,
            convexity_limit: CONVEXITY_LIMIT,
        }
    }
}

/// `F(s)`; returns [`OBSTACLE_SENTINEL`] above the obstacle.
pub fn f(s: f64) -> f64 {
    if s <= OBSTACLE {
        f_poly(s)
    } else {
        OBSTACLE_SENTINEL
    }
}

/// `F'(s) = s - 6s²`, the left derivative at the obstacle.
pub fn f_prime(s: f64) -> Result<f64> {
    if s <= OBSTACLE {
        Ok(f_prime_poly(s))
    } else {
        Err(Error::PotentialDomain { value: s })
    }
}

/// `F''(s) = 1 - 12s`.
pub fn f_second(s: f64) -> Result<f64> {
    if s <= OBSTACLE {
        Ok(f_second_poly(s))
    } else {
        Err(Error::PotentialDomain { value: s })
    }
}

#[inline]
pub(crate) fn f_poly(s: f64) -> f64 {
    s * s * (0.5 - 2.0 * s)
}

#[inline]
pub(crate) fn f_prime_poly(s: f64) -> f64 {
    s - 6.0 * s * s
}

#[inline]
pub(crate) fn f_second_poly(s: f64) -> f64 {
    1.0 - 12.0 * s
}

/// Classical double well `W(s) = s²(1-s)²/2`, whose optimal profile is `q`.
pub fn double_well(s: f64) -> f64 {
    0.5 * s * s * (1.0 - s) * (1.0 - s)
}

/// Optimal profile `q(s) = 1/(1+eˢ)`, the solution of `q' = -√(2W(q))`, `q(0) = 1/2`.
pub fn profile_q(s: f64) -> f64 {
    if s >= 0.0 {
        let e = (-s).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + s.exp())
    }
}

/// The bump `-q'(s) = q(1-q) = eˢ/(1+eˢ)²`, peak 1/4 at the origin.
pub fn profile_bump(s: f64) -> f64 {
    let e = (-s.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

/// First derivative of [`profile_bump`], i.e. `-q''(s)`.
pub fn profile_bump_d1(s: f64) -> f64 {
    -profile_bump(s) * (0.5 * s).tanh()
}

/// Second derivative of [`profile_bump`], `-q'''(s) = y tanh²(s/2) - 2y²`.
pub fn profile_bump_d2(s: f64) -> f64 {
    let y = profile_bump(s);
    let t = (0.5 * s).tanh();
    y * t * t - 2.0 * y * y
}

/// `c_F = 2∫₀^{1/4} √(2F(s)) ds` by adaptive quadrature.
pub fn compute_cf() -> f64 {
    2.0 * adaptive_simpson(&|s| (2.0 * f_poly(s)).max(0.0).sqrt(), 0.0, OBSTACLE, 1e-15)
}
