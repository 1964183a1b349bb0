//! The phase-field energy
//!
//! ```text
//! E(u) = ∫ ε/2 |∇u|² + F(u)/ε  +  σ/(2ε) ∫ (−εΔu + F'(u)/ε)²
//! ```
//!
//! its pointwise pieces, and one step of the convex-concave splitting scheme
//! `u⁺ = min(L[g(u)], 1/4)`.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{check_same_grid, Grid, RealField};
use crate::potential::{f_poly, f_prime_poly, f_second_poly, OBSTACLE};
use crate::spectral::{apply_solve, build_symbol, gradient_norm_sq, laplacian, LinearSolveSymbol};

/// Slack above the obstacle tolerated before an obstacle violation is raised.
pub const OBSTACLE_SLACK: f64 = 1e-12;

/// Parameters of the energy and of the time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Interface width ε.
    pub eps: f64,
    /// Willmore weight σ_ε.
    pub sigma: f64,
    /// Time step δt.
    pub dt: f64,
    /// Stabilizer on `u` in the convex part.
    pub alpha: f64,
    /// Stabilizer on `|∇u|²` in the convex part.
    pub beta: f64,
    /// Cap the state at 1/4 after each step.
    pub projection: bool,
    /// Apply 2/3-rule truncation inside the linear solve.
    #[serde(default)]
    pub dealias: bool,
}

impl ModelParams {
    /// Accurate regime: `σ = sigma_factor·ε²`, `δt = dt_factor·ε²`, `α = β = 0`.
    pub fn unstabilized(eps: f64, sigma_factor: f64, dt_factor: f64) -> Self {
        ModelParams {
            eps,
            sigma: sigma_factor * eps * eps,
            dt: dt_factor * eps * eps,
            alpha: 0.0,
            beta: 0.0,
            projection: true,
            dealias: false,
        }
    }

    /// Large-step regime `α = 1/ε²`, `β = 1`, `δt = ε²`.
    pub fn stabilized(eps: f64, sigma_factor: f64) -> Self {
        ModelParams {
            eps,
            sigma: sigma_factor * eps * eps,
            dt: eps * eps,
            alpha: 1.0 / (eps * eps),
            beta: 1.0,
            projection: true,
            dealias: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::Precondition(format!("{what} = {v}")));
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad("eps must be positive, got eps", self.eps);
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive, got dt", self.dt);
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be nonnegative, got sigma", self.sigma);
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be nonnegative, got alpha", self.alpha);
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta must be nonnegative, got beta", self.beta);
        }
        Ok(())
    }

    /// Whether `(σ/ε², δt/ε²)` sits in the range the model was tuned for.
    pub fn in_recommended_regime(&self) -> bool {
        let e2 = self.eps * self.eps;
        let s = self.sigma / e2;
        (1.0..=8.0).contains(&s) && self.dt <= e2 * (1.0 + 1e-12)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub mass: f64,
    pub willmore: f64,
    pub total: f64,
}

/// Checks the obstacle and returns the samples clamped to at most 1/4.
fn checked_values(u: &RealField) -> Result<Vec<f64>> {
    if let Some((index, &value)) = u
        .values()
        .iter()
        .enumerate()
        .find(|(_, &v)| !(v <= OBSTACLE + OBSTACLE_SLACK))
    {
        return Err(Error::ObstacleViolation { index, value });
    }
    Ok(u.values().iter().map(|&v| v.min(OBSTACLE)).collect())
}

/// `m_ε(u) = ε/2 |∇u|² + F(u)/ε`.
pub fn mass_density(u: &RealField, params: &ModelParams) -> Result<RealField> {
    let vals = checked_values(u)?;
    let grad2 = gradient_norm_sq(u);
    let eps = params.eps;
    let out = vals
        .par_iter()
        .zip(grad2.values().par_iter())
        .map(|(&v, &g2)| 0.5 * eps * g2 + f_poly(v) / eps)
        .collect();
    Ok(RealField::from_raw(u.grid(), out))
}

/// `eul_ε(u) = −εΔu + F'(u)/ε`.
pub fn eul(u: &RealField, params: &ModelParams) -> Result<RealField> {
    let vals = checked_values(u)?;
    let lap = laplacian(u);
    let eps = params.eps;
    let out = vals
        .par_iter()
        .zip(lap.values().par_iter())
        .map(|(&v, &l)| -eps * l + f_prime_poly(v) / eps)
        .collect();
    Ok(RealField::from_raw(u.grid(), out))
}

/// Pointwise discrepancy `ε²|∇u|² − 2F(u)`; vanishes on the exact profile.
pub fn discrepancy(u: &RealField, params: &ModelParams) -> Result<RealField> {
    let vals = checked_values(u)?;
    let grad2 = gradient_norm_sq(u);
    let e2 = params.eps * params.eps;
    let out = vals
        .par_iter()
        .zip(grad2.values().par_iter())
        .map(|(&v, &g2)| e2 * g2 - 2.0 * f_poly(v))
        .collect();
    Ok(RealField::from_raw(u.grid(), out))
}

pub fn energy(u: &RealField, params: &ModelParams) -> Result<EnergyBreakdown> {
    let mass = mass_density(u, params)?.integral();
    let e = eul(u, params)?;
    let willmore = params.sigma / (2.0 * params.eps) * e.map(|v| v * v).integral();
    Ok(EnergyBreakdown {
        mass,
        willmore,
        total: mass + willmore,
    })
}

/// Explicit part of the scheme,
/// `g(u) = u + δt(−F'/ε² + σ(Δ[F'/ε²] + F''/ε²·(Δu − F'/ε²)) + αu − βΔu)`.
///
/// The sign of `Δ[F'/ε²]` is the one produced by the flow
/// `u_t = μ + σ(−Δμ + F''μ/ε²)`, `μ = Δu − F'/ε²`, once `σΔ²u` is moved into
/// the implicit operator; with it the exact 1-d profile is a fixed point.
pub fn g_operator(u: &RealField, params: &ModelParams) -> Result<RealField> {
    let vals = checked_values(u)?;
    Ok(g_eval(u, &vals, params))
}

fn g_eval(u: &RealField, vals: &[f64], params: &ModelParams) -> RealField {
    let e2 = params.eps * params.eps;
    let lap_u = laplacian(u);
    let fp = RealField::from_raw(u.grid(), vals.iter().map(|&v| f_prime_poly(v) / e2).collect());
    let lap_fp = laplacian(&fp);
    let out = (0..vals.len())
        .into_par_iter()
        .map(|i| {
            let v = vals[i];
            let fpi = fp.values()[i];
            let lu = lap_u.values()[i];
            let willmore = lap_fp.values()[i] + f_second_poly(v) / e2 * (lu - fpi);
            v + params.dt * (-fpi + params.sigma * willmore + params.alpha * v - params.beta * lu)
        })
        .collect();
    RealField::from_raw(u.grid(), out)
}

/// Per-step bookkeeping returned by [`Stepper`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepInfo {
    /// Lattice points lowered to 1/4 by the projection.
    pub clipped: usize,
    /// Largest value before projection.
    pub max_before_projection: f64,
}

/// One scheme step, `min(L[g(u)], 1/4)` (or `L[g(u)]` without projection).
pub fn step(u: &RealField, params: &ModelParams, sym: &LinearSolveSymbol) -> Result<RealField> {
    check_same_grid(u.grid(), sym.grid())?;
    let mut v = if params.projection {
        apply_solve(&g_operator(u, params)?, sym)?
    } else {
        // without projection g is evaluated on the raw polynomial extension
        apply_solve(&g_eval(u, u.values(), params), sym)?
    };
    if !v.is_finite() {
        return Err(Error::Divergence { step: 0 });
    }
    if params.projection {
        v.values_mut().iter_mut().for_each(|x| *x = x.min(OBSTACLE));
    }
    Ok(v)
}

/// Allocation-free scheme driver. Evaluates `L[g(u)]` entirely in Fourier
/// space with four FFTs per step: `F'(u)` and the `F''` term are packed into
/// a single complex transform.
pub struct Stepper {
    grid: Arc<Grid>,
    params: ModelParams,
    symbol: LinearSolveSymbol,
    spec_u: Vec<Complex64>,
    work: Vec<Complex64>,
    scratch: Vec<Complex64>,
    next: Vec<f64>,
}

impl Stepper {
    pub fn new(grid: &Arc<Grid>, params: ModelParams) -> Result<Self> {
        params.validate()?;
        let symbol = build_symbol(grid, &params)?;
        let n = grid.total();
        Ok(Stepper {
            grid: grid.clone(),
            params,
            symbol,
            spec_u: vec![Complex64::default(); n],
            work: vec![Complex64::default(); n],
            scratch: vec![Complex64::default(); n],
            next: vec![0.0; n],
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn symbol(&self) -> &LinearSolveSymbol {
        &self.symbol
    }

    /// Advances `u` by one step. On divergence `u` is left untouched and the
    /// error carries `step_index`.
    pub fn advance(&mut self, u: &mut RealField, step_index: u64) -> Result<StepInfo> {
        check_same_grid(u.grid(), &self.grid)?;
        let p = self.params;
        let e2 = p.eps * p.eps;
        let inv_e2 = 1.0 / e2;
        let norm = 1.0 / self.grid.total() as f64;
        let k2 = self.grid.k2();
        let neg = self.grid.neg_index();
        let vals = u.values();

        // û
        self.spec_u
            .par_iter_mut()
            .zip(vals.par_iter())
            .for_each(|(c, &v)| *c = Complex64::new(v, 0.0));
        self.grid.transform(&mut self.spec_u, &mut self.scratch, true);
        self.spec_u.par_iter_mut().for_each(|c| *c *= norm);

        // Δu
        self.work
            .par_iter_mut()
            .zip(self.spec_u.par_iter().zip(k2.par_iter()))
            .for_each(|(w, (c, &k))| *w = -k * c);
        self.grid.transform(&mut self.work, &mut self.scratch, false);

        // F'(u) + i·F''(u)/ε²·(Δu − F'(u)/ε²), packed
        self.work
            .par_iter_mut()
            .zip(vals.par_iter())
            .for_each(|(w, &v)| {
                let lap = w.re;
                let fp = f_prime_poly(v);
                let curv = f_second_poly(v) * inv_e2 * (lap - fp * inv_e2);
                *w = Complex64::new(fp, curv);
            });
        self.grid.transform(&mut self.work, &mut self.scratch, true);

        let work = &self.work;
        let sym = self.symbol.values();
        self.spec_u.par_iter_mut().enumerate().for_each(|(i, c)| {
            let z = work[i] * norm;
            let zn = work[neg[i]].conj() * norm;
            let fp_hat = 0.5 * (z + zn);
            let curv_hat = (z - zn) * Complex64::new(0.0, -0.5);
            let k = k2[i];
            let g = *c * (1.0 + p.dt * p.alpha + p.dt * p.beta * k)
                + p.dt * (-fp_hat * inv_e2 + p.sigma * (-k * inv_e2 * fp_hat + curv_hat));
            *c = g * sym[i];
        });
        self.grid.transform(&mut self.spec_u, &mut self.scratch, false);

        let projection = p.projection;
        self.next
            .par_iter_mut()
            .zip(self.spec_u.par_iter())
            .for_each(|(x, c)| *x = c.re);
        let finite = self.next.par_iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::Divergence { step: step_index });
        }
        let max_before_projection = self.next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut clipped = 0;
        if projection {
            clipped = self
                .next
                .par_iter_mut()
                .map(|x| {
                    if *x > OBSTACLE {
                        *x = OBSTACLE;
                        1
                    } else {
                        0
                    }
                })
                .sum();
        }
        u.values_mut().copy_from_slice(&self.next);
        Ok(StepInfo {
            clipped,
            max_before_projection,
        })
    }
}
