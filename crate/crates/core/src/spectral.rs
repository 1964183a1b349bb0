//! Spectral differential operators and the implicit linear solve
//! `(I + δt(-Δ + σΔ² + α - βΔ))⁻¹`, applied as a Fourier multiplier.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{check_same_grid, forward, inverse_real, Grid, RealField, SpectralField};
use crate::model::ModelParams;

/// `Δf`, by multiplying every coefficient by `-4π²|ξ_k|²`.
pub fn laplacian(f: &RealField) -> RealField {
    let mut spec = forward(f);
    let k2 = f.grid().k2();
    spec.coeffs_mut()
        .par_iter_mut()
        .zip(k2.par_iter())
        .for_each(|(c, &k)| *c *= -k);
    inverse_real(&spec)
}

/// Spectral gradient, one component per axis. The unmatched `-N/2` mode is
/// dropped for these odd-order derivatives so the result stays real.
pub fn gradient(f: &RealField) -> Vec<RealField> {
    let grid = f.grid();
    let spec = forward(f);
    (0..grid.dim())
        .map(|axis| {
            let mut component = spec.clone();
            let xi = grid.axis_xi(axis);
            let n = grid.n();
            let inner: usize = n[axis + 1..].iter().product();
            let m = n[axis];
            component
                .coeffs_mut()
                .par_iter_mut()
                .enumerate()
                .for_each(|(flat, c)| {
                    let j = (flat / inner) % m;
                    if m % 2 == 0 && j == m / 2 {
                        *c = Complex64::default();
                    } else {
                        *c *= Complex64::new(0.0, 2.0 * PI * xi[j]);
                    }
                });
            inverse_real(&component)
        })
        .collect()
}

/// `|∇f|²` pointwise.
pub fn gradient_norm_sq(f: &RealField) -> RealField {
    let grad = gradient(f);
    let mut out = vec![0.0; f.grid().total()];
    for component in &grad {
        out.par_iter_mut()
            .zip(component.values().par_iter())
            .for_each(|(o, &g)| *o += g * g);
    }
    RealField::from_raw(f.grid(), out)
}

/// Tabulated Fourier multiplier
/// `L̂(ξ) = 1 / (1 + δt(4π²|ξ|² + σ·16π⁴|ξ|⁴ + α + β·4π²|ξ|²))`.
#[derive(Debug, Clone)]
pub struct LinearSolveSymbol {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl LinearSolveSymbol {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Evaluates the multiplier for one squared angular wavenumber `k2 = 4π²|ξ|²`.
pub fn symbol_value(k2: f64, params: &ModelParams) -> f64 {
    1.0 / (1.0 + params.dt * (k2 + params.sigma * k2 * k2 + params.alpha + params.beta * k2))
}

/// Mask for 2/3-rule truncation: keeps `|k_α| ≤ N_α/3` on every axis.
fn dealias_mask(grid: &Grid) -> Vec<bool> {
    (0..grid.total())
        .map(|flat| {
            grid.mode_of(flat)
                .iter()
                .zip(grid.n())
                .all(|(&k, &m)| 3 * k.unsigned_abs() as usize <= m)
        })
        .collect()
}

pub fn build_symbol(grid: &Arc<Grid>, params: &ModelParams) -> Result<LinearSolveSymbol> {
    if !(params.dt > 0.0) {
        return Err(Error::Precondition(format!("dt = {} must be positive", params.dt)));
    }
    if !(params.sigma >= 0.0) {
        return Err(Error::Precondition(format!("sigma = {} must be nonnegative", params.sigma)));
    }
    let mut values: Vec<f64> = grid.k2().par_iter().map(|&k2| symbol_value(k2, params)).collect();
    if params.dealias {
        for (v, keep) in values.iter_mut().zip(dealias_mask(grid)) {
            if !keep {
                *v = 0.0;
            }
        }
    }
    Ok(LinearSolveSymbol {
        grid: grid.clone(),
        values,
    })
}

/// Multiplies the coefficients of `f` by the symbol.
pub fn apply_solve(f: &RealField, sym: &LinearSolveSymbol) -> Result<RealField> {
    check_same_grid(f.grid(), &sym.grid)?;
    let mut spec: SpectralField = forward(f);
    spec.coeffs_mut()
        .par_iter_mut()
        .zip(sym.values.par_iter())
        .for_each(|(c, &l)| *c *= l);
    Ok(inverse_real(&spec))
}

/// Applies `I + δt(-Δ + σΔ² + α - βΔ)`, the operator inverted by [`apply_solve`].
pub fn apply_operator(f: &RealField, params: &ModelParams) -> RealField {
    let mut spec = forward(f);
    spec.coeffs_mut()
        .par_iter_mut()
        .zip(f.grid().k2().par_iter())
        .for_each(|(c, &k2)| {
            *c *= 1.0 + params.dt * (k2 + params.sigma * k2 * k2 + params.alpha + params.beta * k2)
        });
    inverse_real(&spec)
}
