//! Observables recorded along a run: energy, radius estimates, profile
//! collapse detection, closed-form radius laws and the radial energy
//! convergence study.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::build_recovery_cubic;
use crate::grid::{Grid, RealField};
use crate::model::{discrepancy, energy, EnergyBreakdown, ModelParams, OBSTACLE_SLACK};
use crate::potential::{f_poly, f_prime_poly, C_F, OBSTACLE, OBSTACLE_SENTINEL};
use crate::util::composite_gauss;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub step: u64,
    pub time: f64,
    pub energy: EnergyBreakdown,
    pub radius_estimate: Option<f64>,
    pub discrepancy_sup: f64,
    pub u_max: f64,
    pub interface_peak_min: f64,
    /// Lattice points lowered by the projection in the step that produced this state.
    pub clipped: usize,
}

/// Which radius formula applies to a run, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusEstimator {
    #[default]
    None,
    Circle2d,
    Sphere3d,
    /// Circle of codimension 2 in 3-d.
    Ring3d,
}

impl RadiusEstimator {
    pub fn estimate(self, u: &RealField, eps: f64) -> Result<Option<f64>> {
        match self {
            RadiusEstimator::None => Ok(None),
            RadiusEstimator::Circle2d => radius_2d(u, eps).map(Some),
            RadiusEstimator::Sphere3d => radius_3d_sphere(u, eps).map(Some),
            RadiusEstimator::Ring3d => radius_3d_ring(u).map(Some),
        }
    }
}

fn require_dim(u: &RealField, dim: usize) -> Result<()> {
    if u.grid().dim() != dim {
        return Err(Error::Precondition(format!(
            "estimator needs a {dim}-d grid, got {}-d",
            u.grid().dim()
        )));
    }
    Ok(())
}

/// `R = ∫u / (2πε)`.
pub fn radius_2d(u: &RealField, eps: f64) -> Result<f64> {
    require_dim(u, 2)?;
    Ok(u.integral() / (2.0 * PI * eps))
}

/// `R = √(∫u / (4πε))`.
pub fn radius_3d_sphere(u: &RealField, eps: f64) -> Result<f64> {
    require_dim(u, 3)?;
    let m = u.integral();
    if m < 0.0 {
        return Err(Error::InvalidState(format!("negative phase-field mass {m}")));
    }
    Ok((m / (4.0 * PI * eps)).sqrt())
}

/// Ring radius `∫u / ∫(u/ρ)` over the tube of half the radius around the
/// ring, with `ρ` the distance from the ring axis. For a cross-section
/// profile that is the same all around the ring this is exact, whatever the
/// profile; the tube is found by a few fixed-point passes. The centre is the periodic (circular)
/// weighted mean and the axis the weighted principal axis of least spread.
pub fn radius_3d_ring(u: &RealField) -> Result<f64> {
    require_dim(u, 3)?;
    let g = u.grid();
    let len = g.len().to_vec();
    let mass: f64 = u.values().iter().sum();
    if mass <= 0.0 {
        return Ok(0.0);
    }
    let mut center = [0.0; 3];
    for a in 0..3 {
        let (mut s, mut c) = (0.0, 0.0);
        for (i, &v) in u.values().iter().enumerate() {
            let th = 2.0 * PI * g.point(i)[a] / len[a];
            s += v * th.sin();
            c += v * th.cos();
        }
        center[a] = (s.atan2(c) / (2.0 * PI)).rem_euclid(1.0) * len[a];
    }
    let offsets: Vec<[f64; 3]> = (0..g.total())
        .map(|i| {
            let x = g.point(i);
            let mut d = [0.0; 3];
            for a in 0..3 {
                let r = x[a] - center[a];
                d[a] = r - len[a] * (r / len[a]).round();
            }
            d
        })
        .collect();
    let mut cov = [[0.0; 3]; 3];
    for (d, &v) in offsets.iter().zip(u.values()) {
        for a in 0..3 {
            for b in 0..3 {
                cov[a][b] += v * d[a] * d[b];
            }
        }
    }
    let normal = least_axis(cov);
    let polar: Vec<(f64, f64, f64)> = offsets
        .iter()
        .zip(u.values())
        .map(|(d, &v)| {
            let h = d[0] * normal[0] + d[1] * normal[1] + d[2] * normal[2];
            let rho = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2] - h * h).max(0.0).sqrt();
            (rho, h, v)
        })
        .collect();
    let mut radius = polar.iter().map(|&(rho, _, v)| v * rho).sum::<f64>() / mass;
    for _ in 0..4 {
        let reach = 0.5 * radius;
        let (num, den) = polar
            .iter()
            .filter(|&&(rho, h, _)| (rho - radius).hypot(h) < reach)
            .fold((0.0, 0.0), |(n, d), &(rho, _, v)| (n + v, d + v / rho));
        if den <= 0.0 {
            break;
        }
        radius = num / den;
    }
    Ok(radius)
}

/// Unit eigenvector of the smallest eigenvalue of a symmetric 3×3 matrix,
/// by cyclic Jacobi rotations.
fn least_axis(mut m: [[f64; 3]; 3]) -> [f64; 3] {
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..50 {
        let off = m[0][1].abs() + m[0][2].abs() + m[1][2].abs();
        if off <= 1e-15 * (m[0][0].abs() + m[1][1].abs() + m[2][2].abs()) {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if m[p][q] == 0.0 {
                continue;
            }
            let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..3 {
                let (mkp, mkq) = (m[k][p], m[k][q]);
                m[k][p] = c * mkp - s * mkq;
                m[k][q] = s * mkp + c * mkq;
            }
            for k in 0..3 {
                let (mpk, mqk) = (m[p][k], m[q][k]);
                m[p][k] = c * mpk - s * mqk;
                m[q][k] = s * mpk + c * mqk;
            }
            for row in v.iter_mut() {
                let (vp, vq) = (row[p], row[q]);
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    let k = (0..3).min_by(|&a, &b| m[a][a].total_cmp(&m[b][b])).unwrap_or(0);
    [v[0][k], v[1][k], v[2][k]]
}

/// Mean-curvature radius laws `R(t)² = R0² − c·t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusLaw {
    /// `c = 2`.
    Circle2d,
    /// `c = 4`.
    Sphere3d,
    /// `c = 2κ`, κ from a fit.
    Ring3d { kappa: f64 },
}

impl RadiusLaw {
    pub fn rate(self) -> f64 {
        match self {
            RadiusLaw::Circle2d => 2.0,
            RadiusLaw::Sphere3d => 4.0,
            RadiusLaw::Ring3d { kappa } => 2.0 * kappa,
        }
    }

    pub fn extinction_time(self, r0: f64) -> f64 {
        r0 * r0 / self.rate()
    }

    pub fn radius(self, r0: f64, t: f64) -> Result<f64> {
        let r2 = r0 * r0 - self.rate() * t;
        if t < 0.0 || r2 < 0.0 {
            return Err(Error::Precondition(format!(
                "t = {t} outside [0, {}]",
                self.extinction_time(r0)
            )));
        }
        Ok(r2.sqrt())
    }
}

/// Exact radius of a shrinking circle (`dim = 2`) or sphere (`dim = 3`),
/// both of codimension 1. Codimension-2 circles have no fixed law; use
/// [`fit_radius_law`].
pub fn exact_radius_law(dim: usize, codim: usize, r0: f64, t: f64) -> Result<f64> {
    let law = match (dim, codim) {
        (2, 1) => RadiusLaw::Circle2d,
        (3, 1) => RadiusLaw::Sphere3d,
        _ => {
            return Err(Error::Precondition(format!(
                "no closed-form law for dim {dim}, codim {codim}"
            )))
        }
    };
    law.radius(r0, t)
}

/// Least-squares fit of `R² = a − 2κt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusFit {
    pub r0_squared: f64,
    pub kappa: f64,
    /// Coefficient of determination of the linear fit in `R²`.
    pub r_squared: f64,
}

pub fn fit_radius_law(times: &[f64], radii: &[f64]) -> Result<RadiusFit> {
    if times.len() != radii.len() || times.len() < 3 {
        return Err(Error::Precondition("fit needs at least three (t, R) pairs".into()));
    }
    let n = times.len() as f64;
    let y: Vec<f64> = radii.iter().map(|r| r * r).collect();
    let tm = times.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let stt: f64 = times.iter().map(|t| (t - tm) * (t - tm)).sum();
    let sty: f64 = times.iter().zip(&y).map(|(t, y)| (t - tm) * (y - ym)).sum();
    if stt == 0.0 {
        return Err(Error::Precondition("fit needs distinct times".into()));
    }
    let slope = sty / stt;
    let intercept = ym - slope * tm;
    let ss_tot: f64 = y.iter().map(|v| (v - ym) * (v - ym)).sum();
    let ss_res: f64 = times
        .iter()
        .zip(&y)
        .map(|(t, v)| {
            let r = v - (intercept + slope * t);
            r * r
        })
        .sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(RadiusFit {
        r0_squared: intercept,
        kappa: -slope / 2.0,
        r_squared,
    })
}

/// Level that delimits the interface band read off the field.
pub const BAND_LEVEL: f64 = 0.125;

/// Distance from the band edge `{-q' ≥ 1/8}` to the crest, in units of ε:
/// `ln(3 + 2√2)`.
const BAND_HALF_WIDTH: f64 = 1.762_747_174_039_086;

/// `{u ≥ 1/8}` grown by one lattice cell along every axis.
pub fn band_from_field(u: &RealField) -> Vec<bool> {
    let core: Vec<bool> = u.values().iter().map(|&v| v >= BAND_LEVEL).collect();
    dilate(u, &core, 1)
}

/// Lattice cells within `width` of Γ, given the distance field.
pub fn band_from_distance(dist: &RealField, width: f64) -> Vec<bool> {
    dist.values().iter().map(|&d| d <= width).collect()
}

fn dilate(u: &RealField, mask: &[bool], radius: usize) -> Vec<bool> {
    let as_field: Vec<f64> = mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    box_max(u, as_field, radius).into_iter().map(|v| v > 0.5).collect()
}

/// Periodic running maximum over `[-w, w]` along each axis in turn.
fn box_max(u: &RealField, mut values: Vec<f64>, w: usize) -> Vec<f64> {
    let grid = u.grid();
    let n = grid.n().to_vec();
    for axis in 0..grid.dim() {
        let m = n[axis];
        let inner: usize = n[axis + 1..].iter().product();
        let outer: usize = n[..axis].iter().product();
        let src = values.clone();
        values
            .par_chunks_mut(m * inner)
            .enumerate()
            .for_each(|(o, chunk)| {
                debug_assert!(o < outer);
                let base = o * m * inner;
                for i in 0..inner {
                    for j in 0..m {
                        let mut best = f64::NEG_INFINITY;
                        for off in 0..=2 * w {
                            let jj = (j + m * (w / m + 1) + off - w) % m;
                            best = best.max(src[base + jj * inner + i]);
                        }
                        chunk[j * inner + i] = best;
                    }
                }
            });
    }
    values
}

/// Smallest local peak of `u` across the interface band: for every band cell
/// the maximum of `u` over a cube reaching past the profile crest, minimized
/// over the band. Returns 0 for an empty band.
pub fn interface_peak_min(u: &RealField, band: &[bool], eps: f64) -> Result<f64> {
    if band.len() != u.grid().total() {
        return Err(Error::GridMismatch);
    }
    if !band.iter().any(|&b| b) {
        return Ok(0.0);
    }
    let h = u.grid().spacing().iter().copied().fold(f64::INFINITY, f64::min);
    let w = ((BAND_HALF_WIDTH * eps + h) / h).ceil() as usize + 1;
    let local = box_max(u, u.values().to_vec(), w);
    Ok(band
        .iter()
        .zip(&local)
        .filter(|(b, _)| **b)
        .map(|(_, &v)| v)
        .fold(f64::INFINITY, f64::min))
}

/// Full diagnostics of one state. Above the obstacle the energy is reported
/// as [`OBSTACLE_SENTINEL`] and the discrepancy uses the capped field.
pub fn compute_record(
    u: &RealField,
    params: &ModelParams,
    step: u64,
    estimator: RadiusEstimator,
    clipped: usize,
) -> Result<DiagnosticsRecord> {
    let within = u.max() <= OBSTACLE + OBSTACLE_SLACK;
    let energy = if within {
        energy(u, params)?
    } else {
        EnergyBreakdown {
            mass: OBSTACLE_SENTINEL,
            willmore: OBSTACLE_SENTINEL,
            total: OBSTACLE_SENTINEL,
        }
    };
    let capped;
    let bounded = if within {
        u
    } else {
        capped = u.map(|v| v.min(OBSTACLE));
        &capped
    };
    let discrepancy_sup = discrepancy(bounded, params)?
        .values()
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()));
    let band = band_from_field(u);
    Ok(DiagnosticsRecord {
        step,
        time: step as f64 * params.dt,
        energy,
        radius_estimate: estimator.estimate(u, params.eps)?,
        discrepancy_sup,
        u_max: u.max(),
        interface_peak_min: interface_peak_min(u, &band, params.eps)?,
        clipped,
    })
}

/// Number of face-connected components of `mask` on the periodic lattice.
pub fn count_components(grid: &Grid, mask: &[bool]) -> Result<usize> {
    if mask.len() != grid.total() {
        return Err(Error::GridMismatch);
    }
    let n = grid.n();
    let dim = grid.dim();
    let strides: Vec<usize> = (0..dim).map(|a| n[a + 1..].iter().product()).collect();
    let mut seen = vec![false; mask.len()];
    let mut stack = Vec::new();
    let mut count = 0;
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(flat) = stack.pop() {
            for a in 0..dim {
                let i = (flat / strides[a]) % n[a];
                for j in [(i + 1) % n[a], (i + n[a] - 1) % n[a]] {
                    let nb = flat - i * strides[a] + j * strides[a];
                    if mask[nb] && !seen[nb] {
                        seen[nb] = true;
                        stack.push(nb);
                    }
                }
            }
        }
    }
    Ok(count)
}

/// One row of the energy convergence table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaRow {
    pub eps: f64,
    pub mass: f64,
    pub willmore: f64,
    pub total: f64,
    pub target: f64,
    pub gap: f64,
    pub relative_gap: f64,
    /// Smallest value taken by the recovery field; negative when the cubic
    /// tail undershoots.
    pub u_min: f64,
}

/// `|S^{d-1}|` for d = 1, 2, 3.
fn sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    }
}

/// `c_F Σ (P(B_r) + σ₀ W(B_r))` with `W(B_r) = ½(d−1)²|S^{d−1}| r^{d−3}`.
pub fn gamma_target(radii: &[f64], sigma0: f64, dim: usize) -> f64 {
    let omega = sphere_area(dim);
    let d1 = (dim - 1) as f64;
    radii
        .iter()
        .map(|&r| {
            let perimeter = omega * r.powi(dim as i32 - 1);
            let willmore = 0.5 * d1 * d1 * omega * r.powi(dim as i32 - 3);
            C_F * (perimeter + sigma0 * willmore)
        })
        .sum()
}

/// Energy of radial recovery fields `u(r) = Σ γ_ε((r − r_i)/ε)` with
/// `σ_ε = σ₀`, by composite Gauss quadrature in `r` with the radial forms
/// of the gradient and Laplacian.
pub fn gamma_limsup_study(radii: &[f64], sigma0: f64, eps_list: &[f64], dim: usize) -> Result<Vec<GammaRow>> {
    if !(2..=3).contains(&dim) {
        return Err(Error::InvalidStudy(format!("dimension {dim} not in 2..=3")));
    }
    if radii.is_empty() || !(sigma0 >= 0.0) {
        return Err(Error::InvalidStudy("need at least one radius and sigma0 >= 0".into()));
    }
    let mut sorted = radii.to_vec();
    sorted.sort_by(f64::total_cmp);
    let target = gamma_target(radii, sigma0, dim);
    let omega = sphere_area(dim);
    let d1 = (dim - 1) as f64;
    eps_list
        .iter()
        .map(|&eps| {
            let prof = build_recovery_cubic(eps).map_err(|e| Error::InvalidStudy(e.to_string()))?;
            let x = prof.x_eps;
            let reach = 2.0 * eps * x;
            if sorted[0] - reach <= 0.0 {
                return Err(Error::InvalidStudy(format!(
                    "radius {} too close to the origin for eps = {eps}",
                    sorted[0]
                )));
            }
            if let Some(w) = sorted.windows(2).find(|w| w[1] - w[0] <= 2.0 * eps * x) {
                return Err(Error::InvalidStudy(format!(
                    "radii {} and {} closer than 2 eps|ln eps| allows",
                    w[0], w[1]
                )));
            }
            let field = |r: f64| -> (f64, f64, f64) {
                sorted.iter().fold((0.0, 0.0, 0.0), |acc, &ri| {
                    let (v, d1, d2) = prof.eval((r - ri) / eps);
                    (acc.0 + v, acc.1 + d1 / eps, acc.2 + d2 / (eps * eps))
                })
            };
            let mass_density = |r: f64| {
                let (v, d, _) = field(r);
                (0.5 * eps * d * d + f_poly(v) / eps) * omega * r.powi(dim as i32 - 1)
            };
            let willmore_density = |r: f64| {
                let (v, d, dd) = field(r);
                let lap = dd + d1 / r * d;
                let e = -eps * lap + f_prime_poly(v) / eps;
                sigma0 / (2.0 * eps) * e * e * omega * r.powi(dim as i32 - 1)
            };
            let mut mass = 0.0;
            let mut willmore = 0.0;
            let mut u_min = 0.0f64;
            for &ri in &sorted {
                // the profile pieces join at s = ±x and ±2x
                let breaks = [-2.0 * x, -x, 0.0, x, 2.0 * x].map(|s| ri + eps * s);
                for w in breaks.windows(2) {
                    mass += composite_gauss(&mass_density, w[0], w[1], 2000, 8);
                    willmore += composite_gauss(&willmore_density, w[0], w[1], 2000, 8);
                    for i in 0..=200 {
                        let r = w[0] + (w[1] - w[0]) * i as f64 / 200.0;
                        u_min = u_min.min(field(r).0);
                    }
                }
            }
            let total = mass + willmore;
            let gap = (total - target).abs();
            Ok(GammaRow {
                eps,
                mass,
                willmore,
                total,
                target,
                gap,
                relative_gap: gap / target,
                u_min,
            })
        })
        .collect()
}

/// Whether the gaps shrink as ε decreases, tolerating a 10% rise between
/// consecutive entries. Rows must be ordered by decreasing ε.
pub fn gaps_decrease(rows: &[GammaRow]) -> bool {
    rows.windows(2).all(|w| w[1].gap <= 1.1 * w[0].gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{distance_field, initial_condition, Shape};
    use crate::potential::profile_bump;
    use crate::util::adaptive_simpson;

    #[test]
    fn radius_laws() {
        assert_eq!(exact_radius_law(2, 1, 0.3, 0.0).unwrap(), 0.3);
        assert!((exact_radius_law(2, 1, 0.3, 0.02).unwrap() - 0.05f64.sqrt()).abs() < 1e-15);
        assert!((exact_radius_law(3, 1, 0.3, 0.02).unwrap() - 0.1).abs() < 1e-15);
        assert!(exact_radius_law(2, 1, 0.3, 0.046).is_err());
        assert!(exact_radius_law(3, 2, 0.3, 0.0).is_err());
        assert!((RadiusLaw::Circle2d.extinction_time(0.3) - 0.045).abs() < 1e-15);
        assert!((RadiusLaw::Sphere3d.extinction_time(0.3) - 0.0225).abs() < 1e-15);
        assert_eq!(RadiusLaw::Ring3d { kappa: 1.0 }.radius(0.3, 0.0).unwrap(), 0.3);
    }

    #[test]
    fn fit_recovers_linear_law() {
        let t: Vec<f64> = (0..20).map(|i| i as f64 * 1e-3).collect();
        let r: Vec<f64> = t.iter().map(|t| (0.09 - 2.0 * 0.7 * t).sqrt()).collect();
        let fit = fit_radius_law(&t, &r).unwrap();
        assert!((fit.kappa - 0.7).abs() < 1e-12);
        assert!((fit.r0_squared - 0.09).abs() < 1e-12);
        assert!(fit.r_squared > 1.0 - 1e-12);
        assert!(fit_radius_law(&t[..2], &r[..2]).is_err());
    }

    #[test]
    fn radius_2d_estimates() {
        let g = Grid::cube(2, 256, 1.0).unwrap();
        assert_eq!(radius_2d(&RealField::zeros(&g), 0.01).unwrap(), 0.0);
        let eps = 2.0 / 256.0;
        let shape = Shape::Sphere {
            center: vec![0.5, 0.5],
            radius: 0.3,
        };
        let u = initial_condition(&shape, &g, eps, false).unwrap();
        let r = radius_2d(&u, eps).unwrap();
        // radial quadrature of the same field
        let oracle = adaptive_simpson(&|rho| profile_bump((rho - 0.3) / eps) * 2.0 * PI * rho, 0.0, 0.5, 1e-12)
            / (2.0 * PI * eps);
        assert!((r - 0.3).abs() < 0.02 * 0.3, "{r}");
        assert!((r - oracle).abs() < 1e-6, "{r} vs {oracle}");
        assert!((radius_2d(&u.scaled(2.0), eps).unwrap() - 2.0 * r).abs() < 1e-12);
        assert!((radius_2d(&u.shifted(1, 17), eps).unwrap() - r).abs() < 1e-12);
        let g3 = Grid::cube(3, 8, 1.0).unwrap();
        assert!(radius_2d(&RealField::zeros(&g3), eps).is_err());
    }

    #[test]
    fn radius_3d_estimates() {
        let g = Grid::cube(3, 128, 1.0).unwrap();
        let eps = 2.0 / 128.0;
        let shape = Shape::Sphere {
            center: vec![0.5, 0.5, 0.5],
            radius: 0.3,
        };
        let u = initial_condition(&shape, &g, eps, false).unwrap();
        let r = radius_3d_sphere(&u, eps).unwrap();
        let oracle = (adaptive_simpson(
            &|rho| profile_bump((rho - 0.3) / eps) * 4.0 * PI * rho * rho,
            0.0,
            0.5,
            1e-12,
        ) / (4.0 * PI * eps))
            .sqrt();
        assert!((r - 0.3).abs() < 0.03 * 0.3, "{r}");
        assert!((r - oracle).abs() < 1e-5, "{r} vs {oracle}");
        assert!((radius_3d_sphere(&u.scaled(4.0), eps).unwrap() - 2.0 * r).abs() < 1e-12);
        assert_eq!(radius_3d_sphere(&RealField::zeros(&g), eps).unwrap(), 0.0);
        assert!(radius_3d_sphere(&u.scaled(-1.0), eps).is_err());
    }

    #[test]
    fn ring_radius_estimate() {
        let g = Grid::cube(3, 64, 1.0).unwrap();
        let eps = 2.0 / 64.0;
        for (center, normal) in [
            ([0.5, 0.5, 0.5], [0.0, 0.0, 1.0]),
            ([0.1, 0.95, 0.3], [1.0, 2.0, -0.5]),
        ] {
            let ring = Shape::Ring {
                center: center.to_vec(),
                normal: normal.to_vec(),
                radius: 0.25,
            };
            let u = initial_condition(&ring, &g, eps, false).unwrap();
            let r = radius_3d_ring(&u).unwrap();
            assert!((r - 0.25).abs() < 1e-3 * 0.25, "{r}");
            assert!((radius_3d_ring(&u.scaled(3.0)).unwrap() - r).abs() < 1e-12);
        }
        assert_eq!(radius_3d_ring(&RealField::zeros(&g)).unwrap(), 0.0);
    }

    #[test]
    fn least_axis_of_diagonal_and_rotated() {
        let n = least_axis([[3.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]]);
        assert!((n[1].abs() - 1.0).abs() < 1e-12);
        // R diag(1, 4, 9) Rᵀ with R a rotation about z by 30°
        let (s, c) = (PI / 6.0).sin_cos();
        let m = [[c * c + 4.0 * s * s, c * s * (1.0 - 4.0), 0.0], [c * s * (1.0 - 4.0), s * s + 4.0 * c * c, 0.0], [0.0, 0.0, 9.0]];
        let n = least_axis(m);
        assert!((n[0].abs() - c).abs() < 1e-12 && (n[1].abs() - s).abs() < 1e-12, "{n:?}");
    }

    #[test]
    fn peak_min_examples() {
        let g = Grid::cube(2, 256, 1.0).unwrap();
        let eps = 3.0 / 256.0;
        let shape = Shape::Sphere {
            center: vec![0.5, 0.5],
            radius: 0.3,
        };
        let u = initial_condition(&shape, &g, eps, false).unwrap();
        let band = band_from_field(&u);
        let p = interface_peak_min(&u, &band, eps).unwrap();
        assert!((p - 0.25).abs() < 1e-3, "{p}");
        assert!(p <= u.max());

        let dist_band = band_from_distance(&distance_field(&shape, &g).unwrap(), eps);
        let half = u.scaled(0.5);
        let p = interface_peak_min(&half, &dist_band, eps).unwrap();
        assert!((p - 0.125).abs() < 1e-3, "{p}");

        let z = RealField::zeros(&g);
        assert_eq!(interface_peak_min(&z, &band_from_field(&z), eps).unwrap(), 0.0);
    }

    #[test]
    fn record_of_exact_circle() {
        let g = Grid::cube(2, 128, 1.0).unwrap();
        let p = ModelParams::unstabilized(3.0 / 128.0, 4.0, 0.01);
        let shape = Shape::Sphere {
            center: vec![0.5, 0.5],
            radius: 0.3,
        };
        let u = initial_condition(&shape, &g, p.eps, false).unwrap();
        let rec = compute_record(&u, &p, 10, RadiusEstimator::Circle2d, 0).unwrap();
        assert_eq!(rec.time, 10.0 * p.dt);
        assert!(rec.u_max <= 0.25 + 1e-12);
        assert!(rec.interface_peak_min <= rec.u_max);
        assert!((rec.energy.mass - C_F * 2.0 * PI * 0.3).abs() < 0.05 * C_F * 2.0 * PI * 0.3);
        assert!(rec.radius_estimate.is_some());
    }

    #[test]
    fn components_on_periodic_lattice() {
        let g = Grid::cube(2, 8, 1.0).unwrap();
        let mut mask = vec![false; 64];
        assert_eq!(count_components(&g, &mask).unwrap(), 0);
        mask[0] = true;
        mask[7] = true; // wraps onto mask[0]
        assert_eq!(count_components(&g, &mask).unwrap(), 1);
        mask[4 * 8 + 4] = true;
        assert_eq!(count_components(&g, &mask).unwrap(), 2);
        mask[3 * 8 + 5] = true; // diagonal only
        assert_eq!(count_components(&g, &mask).unwrap(), 3);
        assert!(count_components(&g, &mask[..10]).is_err());
    }

    #[test]
    fn gamma_targets() {
        assert!((gamma_target(&[0.3], 0.0, 2) - C_F * 2.0 * PI * 0.3).abs() < 1e-15);
        assert!((gamma_target(&[0.3], 0.1, 3) - C_F * (4.0 * PI * 0.09 + 0.1 * 8.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn gamma_study_perimeter_case() {
        for dim in [2, 3] {
            let rows = gamma_limsup_study(&[0.3], 0.0, &[1e-2, 5e-3, 2.5e-3], dim).unwrap();
            assert!(gaps_decrease(&rows));
            assert!(rows.last().unwrap().relative_gap < 0.05);
            assert!(rows.iter().all(|r| r.willmore == 0.0));
        }
    }

    #[test]
    fn gamma_study_rejects_bad_radii() {
        assert!(gamma_limsup_study(&[0.3, 0.305], 0.0, &[1e-2], 2).is_err());
        assert!(gamma_limsup_study(&[0.05], 0.0, &[1e-2], 2).is_err());
        assert!(gamma_limsup_study(&[0.3], 0.0, &[1e-2], 4).is_err());
        assert!(gamma_limsup_study(&[0.2, 0.4], 0.0, &[1e-2], 2).is_ok());
    }
}
