//! Periodic lattice, real/spectral fields and the n-dimensional FFT.
//!
//! Coefficients are stored in FFT-natural order along every axis
//! (`0, 1, .., N/2-1, -N/2, .., -1`). The forward transform divides by the
//! total sample count so that the zero mode is the field mean; the inverse
//! applies no scaling.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::util::pairwise_sum;

/// Imaginary residue tolerated by [`inverse`] before the input is rejected
/// as non-Hermitian. Scaled by `max(1, max |Re|)` of the output.
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;

/// Rows handed to one rayon task during line FFTs.
const LINES_PER_TASK: usize = 16;

struct AxisPlan {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// A periodic rectangular lattice in 1, 2 or 3 dimensions.
///
/// Immutable after construction; shared between fields through `Arc`.
pub struct Grid {
    n: Vec<usize>,
    len: Vec<f64>,
    total: usize,
    plans: Vec<AxisPlan>,
    /// Per-axis wavenumbers `k/ℓ` in natural order.
    axis_xi: Vec<Vec<f64>>,
    /// `4π²|ξ|²` per flattened mode.
    k2: Vec<f64>,
    /// Flattened index of the mode `-k` for every mode `k`.
    neg: Vec<usize>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.n)
            .field("len", &self.len)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.len == other.len
    }
}

/// Natural-order position of signed wavenumber `k` on an axis of size `n`.
fn natural_position(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

/// Signed wavenumber stored at natural-order position `j`.
fn signed_wavenumber(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

impl Grid {
    pub fn new(n: &[usize], len: &[f64]) -> Result<Arc<Grid>> {
        let dim = n.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if len.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "{} lengths given for {dim} axes",
                len.len()
            )));
        }
        if let Some(&bad) = n.iter().find(|&&m| m < 4) {
            return Err(Error::InvalidGrid(format!("axis resolution {bad} < 4")));
        }
        if let Some(&bad) = len.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidGrid(format!("axis length {bad} not positive")));
        }

        let mut planner = FftPlanner::new();
        let plans = n
            .iter()
            .map(|&m| AxisPlan {
                forward: planner.plan_fft_forward(m),
                inverse: planner.plan_fft_inverse(m),
            })
            .collect();
        let axis_xi: Vec<Vec<f64>> = n
            .iter()
            .zip(len)
            .map(|(&m, &l)| (0..m).map(|j| signed_wavenumber(j, m) as f64 / l).collect())
            .collect();

        let total: usize = n.iter().product();
        let mut k2 = vec![0.0; total];
        let mut neg = vec![0; total];
        let mut idx = vec![0usize; dim];
        for flat in 0..total {
            let mut s = 0.0;
            let mut nflat = 0;
            for a in 0..dim {
                let xi = axis_xi[a][idx[a]];
                s += xi * xi;
                nflat = nflat * n[a] + (n[a] - idx[a]) % n[a];
            }
            k2[flat] = 4.0 * PI * PI * s;
            neg[flat] = nflat;
            increment(&mut idx, n);
        }

        Ok(Arc::new(Grid {
            n: n.to_vec(),
            len: len.to_vec(),
            total,
            plans,
            axis_xi,
            k2,
            neg,
        }))
    }

    /// Cubic box `[0, length)^dim` with `n` samples per axis.
    pub fn cube(dim: usize, n: usize, length: f64) -> Result<Arc<Grid>> {
        Grid::new(&vec![n; dim], &vec![length; dim])
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn n(&self) -> &[usize] {
        &self.n
    }

    pub fn len(&self) -> &[f64] {
        &self.len
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn spacing(&self) -> Vec<f64> {
        self.n.iter().zip(&self.len).map(|(&m, &l)| l / m as f64).collect()
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing().into_iter().fold(0.0, f64::max)
    }

    pub fn min_n(&self) -> usize {
        *self.n.iter().min().expect("grid has at least one axis")
    }

    /// Volume of one lattice cell, `∏ h_α`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    pub fn box_volume(&self) -> f64 {
        self.len.iter().product()
    }

    /// Physical wavenumber `ξ_k = (k_1/ℓ_1, .., k_d/ℓ_d)` of a signed multi-index.
    pub fn wavenumber(&self, k: &[i64]) -> Result<Vec<f64>> {
        if k.len() != self.dim() {
            return Err(Error::Precondition(format!(
                "multi-index of length {} on a {}-d grid",
                k.len(),
                self.dim()
            )));
        }
        k.iter()
            .enumerate()
            .map(|(axis, &ka)| {
                let half = (self.n[axis] / 2) as i64;
                let upper = self.n[axis] as i64 - half - 1;
                if ka < -half || ka > upper {
                    Err(Error::IndexOutOfRange {
                        axis,
                        index: ka,
                        n: self.n[axis],
                    })
                } else {
                    Ok(ka as f64 / self.len[axis])
                }
            })
            .collect()
    }

    /// Flattened storage position of the signed multi-index `k`.
    pub fn mode_index(&self, k: &[i64]) -> Result<usize> {
        self.wavenumber(k)?;
        Ok(k.iter()
            .zip(&self.n)
            .fold(0, |acc, (&ka, &m)| acc * m + natural_position(ka, m)))
    }

    /// Signed multi-index of the mode stored at flattened position `flat`.
    pub fn mode_of(&self, flat: usize) -> Vec<i64> {
        let idx = self.unflatten(flat);
        idx.iter()
            .zip(&self.n)
            .map(|(&j, &m)| signed_wavenumber(j, m))
            .collect()
    }

    pub(crate) fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = flat % self.n[a];
            flat /= self.n[a];
        }
        idx
    }

    /// Physical coordinates `x_k = (k_1 h_1, ..)` of the lattice point at `flat`.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        let h = self.spacing();
        self.unflatten(flat)
            .iter()
            .zip(h)
            .map(|(&j, h)| j as f64 * h)
            .collect()
    }

    /// Table of `4π²|ξ_k|²` in storage order.
    pub fn k2(&self) -> &[f64] {
        &self.k2
    }

    pub(crate) fn neg_index(&self) -> &[usize] {
        &self.neg
    }

    pub(crate) fn axis_xi(&self, axis: usize) -> &[f64] {
        &self.axis_xi[axis]
    }

    /// In-place unnormalized n-d FFT. `scratch` must have the same length.
    pub(crate) fn transform(&self, data: &mut Vec<Complex64>, scratch: &mut Vec<Complex64>, forward: bool) {
        debug_assert_eq!(data.len(), self.total);
        scratch.resize(self.total, Complex64::default());
        let dim = self.dim();
        for step in 0..dim {
            let axis = dim - 1 - step;
            let m = self.n[axis];
            let plan = if forward {
                &self.plans[axis].forward
            } else {
                &self.plans[axis].inverse
            };
            let scratch_len = plan.get_inplace_scratch_len();
            data.par_chunks_mut(m * LINES_PER_TASK).for_each_init(
                || vec![Complex64::default(); scratch_len],
                |buf, rows| plan.process_with_scratch(rows, buf),
            );
            if dim > 1 {
                transpose(data, scratch, self.total / m, m);
                std::mem::swap(data, scratch);
            }
        }
    }
}

fn increment(idx: &mut [usize], n: &[usize]) {
    for a in (0..idx.len()).rev() {
        idx[a] += 1;
        if idx[a] < n[a] {
            return;
        }
        idx[a] = 0;
    }
}

/// `dst (cols × rows) = srcᵀ` for a row-major `rows × cols` matrix.
fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const BLOCK: usize = 32;
    dst.par_chunks_mut(rows * BLOCK.min(cols))
        .enumerate()
        .for_each(|(chunk, out)| {
            let c0 = chunk * BLOCK.min(cols);
            let ncols = out.len() / rows;
            for r0 in (0..rows).step_by(BLOCK) {
                let r1 = (r0 + BLOCK).min(rows);
                for dc in 0..ncols {
                    let c = c0 + dc;
                    let orow = &mut out[dc * rows..(dc + 1) * rows];
                    for r in r0..r1 {
                        orow[r] = src[r * cols + c];
                    }
                }
            }
        });
}

/// Real scalar samples on a grid, row-major with the last axis contiguous.
#[derive(Debug, Clone)]
pub struct RealField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl PartialEq for RealField {
    fn eq(&self, other: &Self) -> bool {
        *self.grid == *other.grid && self.values == other.values
    }
}

impl RealField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Arc<Grid>, value: f64) -> Self {
        RealField {
            grid: grid.clone(),
            values: vec![value; grid.total()],
        }
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.total() {
            return Err(Error::InvalidState(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.total()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidState("non-finite sample".into()));
        }
        Ok(RealField {
            grid: grid.clone(),
            values,
        })
    }

    /// Samples `f(x_k)` at every lattice point.
    pub fn from_fn<F>(grid: &Arc<Grid>, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let values = (0..grid.total())
            .into_par_iter()
            .map(|flat| f(&grid.point(flat)))
            .collect();
        RealField {
            grid: grid.clone(),
            values,
        }
    }

    pub(crate) fn from_raw(grid: &Arc<Grid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.total());
        RealField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `Σ f(x_k) ∏h_α`, summed in a fixed pairwise order.
    pub fn integral(&self) -> f64 {
        pairwise_sum(&self.values) * self.grid.cell_volume()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> RealField {
        RealField {
            grid: self.grid.clone(),
            values: self.values.par_iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> RealField {
        self.map(|v| v * factor)
    }

    pub fn sup_distance(&self, other: &RealField) -> Result<f64> {
        check_same_grid(&self.grid, &other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Circular shift by `shift` lattice steps along `axis`:
    /// `out[.., j + shift, ..] = self[.., j, ..]`.
    pub fn shifted(&self, axis: usize, shift: i64) -> RealField {
        let n = self.grid.n();
        let inner: usize = n[axis + 1..].iter().product();
        let m = n[axis];
        let mut out = vec![0.0; self.values.len()];
        for (flat, &v) in self.values.iter().enumerate() {
            let j = (flat / inner) % m;
            let dest_j = natural_position(j as i64 + shift, m);
            let dest = (flat as isize + (dest_j as isize - j as isize) * inner as isize) as usize;
            out[dest] = v;
        }
        RealField::from_raw(&self.grid, out)
    }
}

/// Fourier coefficients `c_k` in FFT-natural storage order.
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: Arc<Grid>,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        SpectralField {
            grid: grid.clone(),
            coeffs: vec![Complex64::default(); grid.total()],
        }
    }

    pub fn from_coeffs(grid: &Arc<Grid>, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.total() {
            return Err(Error::InvalidState(format!(
                "{} coefficients for a grid of {} modes",
                coeffs.len(),
                grid.total()
            )));
        }
        Ok(SpectralField {
            grid: grid.clone(),
            coeffs,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient of the signed multi-index `k`.
    pub fn coeff(&self, k: &[i64]) -> Result<Complex64> {
        Ok(self.coeffs[self.grid.mode_index(k)?])
    }

    pub fn set_coeff(&mut self, k: &[i64], value: Complex64) -> Result<()> {
        let i = self.grid.mode_index(k)?;
        self.coeffs[i] = value;
        Ok(())
    }

    /// Largest `|c_{-k} - conj(c_k)|`, relative to the largest coefficient.
    pub fn hermitian_defect(&self) -> f64 {
        let neg = self.grid.neg_index();
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| (self.coeffs[neg[i]] - c.conj()).norm())
            .fold(0.0, f64::max)
            / scale
    }
}

pub(crate) fn check_same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> Result<()> {
    if Arc::ptr_eq(a, b) || **a == **b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Discrete Fourier coefficients of `f`; `c_0` is the mean of `f`.
pub fn forward(f: &RealField) -> SpectralField {
    let grid = f.grid();
    let mut data: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut scratch = Vec::new();
    grid.transform(&mut data, &mut scratch, true);
    let scale = 1.0 / grid.total() as f64;
    data.par_iter_mut().for_each(|c| *c *= scale);
    SpectralField {
        grid: grid.clone(),
        coeffs: data,
    }
}

/// Real samples of the trigonometric polynomial with coefficients `spec`.
pub fn inverse(spec: &SpectralField) -> Result<RealField> {
    let grid = spec.grid();
    let mut data = spec.coeffs.clone();
    let mut scratch = Vec::new();
    grid.transform(&mut data, &mut scratch, false);
    let scale = data.iter().map(|c| c.re.abs()).fold(1.0, f64::max);
    let residue = data.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    if residue > HERMITIAN_TOLERANCE * scale || !residue.is_finite() {
        return Err(Error::InvalidSpectralData { residue });
    }
    Ok(RealField::from_raw(grid, data.into_iter().map(|c| c.re).collect()))
}

/// Inverse transform keeping the real part without the Hermitian check.
/// For operators that preserve Hermitian symmetry by construction.
pub(crate) fn inverse_real(spec: &SpectralField) -> RealField {
    let grid = spec.grid();
    let mut data = spec.coeffs.clone();
    let mut scratch = Vec::new();
    grid.transform(&mut data, &mut scratch, false);
    RealField::from_raw(grid, data.into_iter().map(|c| c.re).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn wavenumber_examples() {
        let g = Grid::cube(1, 8, 1.0).unwrap();
        assert_eq!(g.wavenumber(&[0]).unwrap(), vec![0.0]);
        assert_eq!(g.wavenumber(&[3]).unwrap(), vec![3.0]);
        let g2 = Grid::cube(1, 8, 2.0).unwrap();
        assert_eq!(g2.wavenumber(&[-4]).unwrap(), vec![-2.0]);
        assert!(matches!(g.wavenumber(&[4]), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(g.wavenumber(&[-5]), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(&[2], &[1.0]).is_err());
        assert!(Grid::new(&[8, 8], &[1.0]).is_err());
        assert!(Grid::new(&[8], &[0.0]).is_err());
        assert!(Grid::new(&[8, 8, 8, 8], &[1.0; 4]).is_err());
        // non power of two is allowed
        assert!(Grid::new(&[6, 10], &[1.0, 2.0]).is_ok());
    }

    #[test]
    fn constant_field_has_only_mean_mode() {
        let g = Grid::new(&[8, 4], &[1.0, 3.0]).unwrap();
        let c = forward(&RealField::constant(&g, 1.0));
        assert_relative_eq!(c.coeff(&[0, 0]).unwrap().re, 1.0, epsilon = 1e-15);
        let rest = c.coeffs()[1..].iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(rest < 1e-15);
    }

    #[test]
    fn inverse_of_constant_mode() {
        let g = Grid::cube(2, 8, 1.0).unwrap();
        let mut s = SpectralField::zeros(&g);
        s.set_coeff(&[0, 0], Complex64::new(5.0, 0.0)).unwrap();
        let f = inverse(&s).unwrap();
        assert!(f.values().iter().all(|&v| (v - 5.0).abs() < 1e-14));
    }

    #[test]
    fn inverse_rejects_non_hermitian_input() {
        let g = Grid::cube(1, 8, 1.0).unwrap();
        let mut s = SpectralField::zeros(&g);
        s.set_coeff(&[1], Complex64::new(1.0, 0.0)).unwrap();
        assert!(matches!(inverse(&s), Err(Error::InvalidSpectralData { .. })));
    }

    #[test]
    fn mode_index_round_trip() {
        let g = Grid::new(&[8, 6, 4], &[1.0, 1.0, 1.0]).unwrap();
        for flat in 0..g.total() {
            let k = g.mode_of(flat);
            assert_eq!(g.mode_index(&k).unwrap(), flat);
            let nk: Vec<i64> = k.iter().zip(g.n()).map(|(&a, &m)| {
                let b = -a;
                if b >= (m / 2) as i64 { b - m as i64 } else { b }
            }).collect();
            assert_eq!(g.neg_index()[flat], g.mode_index(&nk).unwrap());
        }
    }

    #[test]
    fn shift_moves_samples() {
        let g = Grid::new(&[4, 4], &[1.0, 1.0]).unwrap();
        let f = RealField::from_fn(&g, |x| x[0] * 10.0 + x[1]);
        let s = f.shifted(0, 1);
        // value formerly at row 0 is now at row 1
        assert_eq!(s.values()[4], f.values()[0]);
        assert_eq!(s.values()[0], f.values()[12]);
        let back = s.shifted(0, -1);
        assert_eq!(back, f);
    }
}
