//! Interfaces given by unsigned distance functions, initial phase fields
//! `-q'(dist/ε)` and the truncated recovery profile used for energy
//! convergence checks.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, RealField};
use crate::potential::{profile_bump, profile_bump_d1, profile_bump_d2};

/// A ball `(center, radius)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Geometric interface Γ. Every variant is evaluated through its unsigned
/// distance; periodic images are handled by [`Shape::distance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    /// Circle or sphere boundary; a point when `radius == 0`.
    Sphere { center: Vec<f64>, radius: f64 },
    /// Concentric spheres sharing `center`.
    Concentric { center: Vec<f64>, radii: Vec<f64> },
    /// Straight filament segment (capsule of radius 0).
    Segment { a: Vec<f64>, b: Vec<f64> },
    /// Filament through `points`, closed back to the first point when `closed`.
    Polyline { points: Vec<Vec<f64>>, closed: bool },
    /// Circle of codimension 2 in 3-d.
    Ring {
        center: Vec<f64>,
        normal: Vec<f64>,
        radius: f64,
    },
    /// Boundary of the union of the balls.
    BallUnion { balls: Vec<Ball> },
    /// Each sphere minus the parts inside earlier balls: `∂B₀ ∪ (∂B₁ \ B₀) ∪ ..`.
    /// Two overlapping circles give two arcs meeting a chord-like arc at
    /// triple points.
    GluedSpheres { balls: Vec<Ball> },
    /// Boundary of two balls of radius `ball_radius` joined by a coaxial
    /// cylinder of radius `neck_radius` between their centers.
    Dumbbell {
        a: Vec<f64>,
        b: Vec<f64>,
        ball_radius: f64,
        neck_radius: f64,
    },
    Union { members: Vec<Shape> },
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab = sub(b, a);
    let ap = sub(p, a);
    let l2 = dot(&ab, &ab);
    let t = if l2 > 0.0 { (dot(&ap, &ab) / l2).clamp(0.0, 1.0) } else { 0.0 };
    let d: Vec<f64> = ap.iter().zip(&ab).map(|(x, y)| x - t * y).collect();
    norm(&d)
}

/// Signed distance of the finite cylinder with axis `a → b` and radius `r`.
fn capped_cylinder_sd(p: &[f64], a: &[f64], b: &[f64], r: f64) -> f64 {
    let ba = sub(b, a);
    let pa = sub(p, a);
    let baba = dot(&ba, &ba);
    let paba = dot(&pa, &ba);
    let radial: Vec<f64> = pa.iter().zip(&ba).map(|(x, y)| x * baba - y * paba).collect();
    let x = norm(&radial) - r * baba;
    let y = (paba - 0.5 * baba).abs() - 0.5 * baba;
    let x2 = x * x;
    let y2 = y * y * baba;
    let d = if x.max(y) < 0.0 {
        -x2.min(y2)
    } else {
        (if x > 0.0 { x2 } else { 0.0 }) + (if y > 0.0 { y2 } else { 0.0 })
    };
    d.signum() * d.abs().sqrt() / baba
}

/// Distance from `p` to the circle `∂B_i ∩ ∂B_j`, plus its nearest point.
fn rim_distance(p: &[f64], bi: &Ball, bj: &Ball) -> Option<(f64, Vec<f64>)> {
    let cc = sub(&bj.center, &bi.center);
    let d = norm(&cc);
    if d == 0.0 || d >= bi.radius + bj.radius || d <= (bi.radius - bj.radius).abs() {
        return None;
    }
    let n: Vec<f64> = cc.iter().map(|x| x / d).collect();
    let along_c = (d * d + bi.radius * bi.radius - bj.radius * bj.radius) / (2.0 * d);
    let rho = (bi.radius * bi.radius - along_c * along_c).max(0.0).sqrt();
    let m: Vec<f64> = bi.center.iter().zip(&n).map(|(c, n)| c + along_c * n).collect();
    let v = sub(p, &m);
    let along = dot(&v, &n);
    let w: Vec<f64> = v.iter().zip(&n).map(|(v, n)| v - along * n).collect();
    let wn = norm(&w);
    let nearest: Vec<f64> = if wn > 0.0 {
        m.iter().zip(&w).map(|(m, w)| m + rho * w / wn).collect()
    } else {
        // p on the axis: every rim point is equidistant, pick one
        let mut e = vec![0.0; p.len()];
        let k = if n[0].abs() < 0.9 { 0 } else { 1 };
        e[k] = 1.0;
        let proj = dot(&e, &n);
        let mut t: Vec<f64> = e.iter().zip(&n).map(|(e, n)| e - proj * n).collect();
        let tn = norm(&t);
        t.iter_mut().for_each(|x| *x /= tn);
        m.iter().zip(&t).map(|(m, t)| m + rho * t).collect()
    };
    Some(((along * along + (wn - rho) * (wn - rho)).sqrt(), nearest))
}

fn inside(p: &[f64], b: &Ball) -> bool {
    norm(&sub(p, &b.center)) < b.radius
}

impl Shape {
    /// Spatial dimension implied by the shape's coordinates.
    fn coordinate_dim(&self) -> Option<usize> {
        match self {
            Shape::Sphere { center, .. } | Shape::Concentric { center, .. } | Shape::Ring { center, .. } => {
                Some(center.len())
            }
            Shape::Segment { a, .. } | Shape::Dumbbell { a, .. } => Some(a.len()),
            Shape::Polyline { points, .. } => points.first().map(Vec::len),
            Shape::BallUnion { balls } | Shape::GluedSpheres { balls } => balls.first().map(|b| b.center.len()),
            Shape::Union { members } => members.first().and_then(Shape::coordinate_dim),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidGeometry(msg));
        let check_point = |p: &Vec<f64>| -> Result<()> {
            if p.len() != dim || p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidGeometry(format!(
                    "point {p:?} is not a finite {dim}-d coordinate"
                )));
            }
            Ok(())
        };
        match self {
            Shape::Sphere { center, radius } => {
                check_point(center)?;
                if !(*radius >= 0.0) {
                    return bad(format!("sphere radius {radius} negative"));
                }
            }
            Shape::Concentric { center, radii } => {
                check_point(center)?;
                if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
                    return bad("concentric spheres need positive radii".into());
                }
            }
            Shape::Segment { a, b } => {
                check_point(a)?;
                check_point(b)?;
            }
            Shape::Polyline { points, .. } => {
                if points.len() < 2 {
                    return bad("polyline needs at least two points".into());
                }
                points.iter().try_for_each(check_point)?;
            }
            Shape::Ring { center, normal, radius } => {
                if dim != 3 {
                    return bad("a ring needs a 3-d grid".into());
                }
                check_point(center)?;
                check_point(normal)?;
                if norm(normal) == 0.0 || !(*radius > 0.0) {
                    return bad("ring needs a nonzero normal and positive radius".into());
                }
            }
            Shape::BallUnion { balls } | Shape::GluedSpheres { balls } => {
                if balls.is_empty() {
                    return bad("empty ball list".into());
                }
                for b in balls {
                    check_point(&b.center)?;
                    if !(b.radius > 0.0) {
                        return bad(format!("ball radius {} not positive", b.radius));
                    }
                }
            }
            Shape::Dumbbell {
                a,
                b,
                ball_radius,
                neck_radius,
            } => {
                check_point(a)?;
                check_point(b)?;
                if !(*ball_radius > 0.0 && *neck_radius > 0.0 && neck_radius < ball_radius) {
                    return bad("dumbbell needs 0 < neck_radius < ball_radius".into());
                }
                if norm(&sub(a, b)) == 0.0 {
                    return bad("dumbbell centers coincide".into());
                }
            }
            Shape::Union { members } => {
                if members.is_empty() {
                    return bad("empty union".into());
                }
                members.iter().try_for_each(|m| m.validate(dim))?;
            }
        }
        Ok(())
    }

    /// Distance to Γ ignoring periodicity.
    pub fn raw_distance(&self, p: &[f64]) -> f64 {
        match self {
            Shape::Sphere { center, radius } => (norm(&sub(p, center)) - radius).abs(),
            Shape::Concentric { center, radii } => {
                let r = norm(&sub(p, center));
                radii.iter().map(|ri| (r - ri).abs()).fold(f64::INFINITY, f64::min)
            }
            Shape::Segment { a, b } => segment_distance(p, a, b),
            Shape::Polyline { points, closed } => {
                let mut d = points
                    .windows(2)
                    .map(|w| segment_distance(p, &w[0], &w[1]))
                    .fold(f64::INFINITY, f64::min);
                if *closed {
                    d = d.min(segment_distance(p, &points[points.len() - 1], &points[0]));
                }
                d
            }
            Shape::Ring { center, normal, radius } => {
                let nn = norm(normal);
                let n: Vec<f64> = normal.iter().map(|x| x / nn).collect();
                let v = sub(p, center);
                let along = dot(&v, &n);
                let w: Vec<f64> = v.iter().zip(&n).map(|(v, n)| v - along * n).collect();
                let radial = norm(&w) - radius;
                (along * along + radial * radial).sqrt()
            }
            Shape::BallUnion { balls } => balls
                .iter()
                .map(|b| norm(&sub(p, &b.center)) - b.radius)
                .fold(f64::INFINITY, f64::min)
                .abs(),
            Shape::GluedSpheres { balls } => (0..balls.len())
                .map(|i| clipped_sphere_distance(p, i, balls))
                .fold(f64::INFINITY, f64::min),
            Shape::Dumbbell {
                a,
                b,
                ball_radius,
                neck_radius,
            } => {
                let sa = norm(&sub(p, a)) - ball_radius;
                let sb = norm(&sub(p, b)) - ball_radius;
                let sc = capped_cylinder_sd(p, a, b, *neck_radius);
                sa.min(sb).min(sc).abs()
            }
            Shape::Union { members } => members
                .iter()
                .map(|m| m.raw_distance(p))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Unsigned distance to Γ in a periodic box, minimized over the `3^d`
    /// nearest images of Γ.
    pub fn distance(&self, p: &[f64], box_len: &[f64]) -> f64 {
        let dim = p.len();
        let mut best = f64::INFINITY;
        let mut shifted = p.to_vec();
        for code in 0..3usize.pow(dim as u32) {
            let mut c = code;
            for a in 0..dim {
                let s = (c % 3) as f64 - 1.0;
                c /= 3;
                shifted[a] = p[a] + s * box_len[a];
            }
            best = best.min(self.raw_distance(&shifted));
        }
        best
    }
}

/// Distance to `∂B_i` minus the interiors of the balls before it.
fn clipped_sphere_distance(p: &[f64], i: usize, balls: &[Ball]) -> f64 {
    let b = &balls[i];
    let v = sub(p, &b.center);
    let r = norm(&v);
    let full = (r - b.radius).abs();
    if i == 0 {
        return full;
    }
    let earlier = &balls[..i];
    let proj: Vec<f64> = if r > 0.0 {
        b.center.iter().zip(&v).map(|(c, v)| c + b.radius * v / r).collect()
    } else {
        let mut q = b.center.clone();
        q[0] += b.radius;
        q
    };
    if !earlier.iter().any(|e| inside(&proj, e)) {
        return full;
    }
    // nearest surviving point lies on a rim with one of the clipping balls
    earlier
        .iter()
        .enumerate()
        .filter_map(|(j, e)| {
            let (d, q) = rim_distance(p, b, e)?;
            let covered = earlier
                .iter()
                .enumerate()
                .any(|(k, o)| k != j && inside(&q, o));
            (!covered).then_some(d)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Truncated, compactly supported version of the bump profile:
/// `-q'(s)` for `|s| ≤ x_ε`, a cubic on `x_ε < |s| ≤ 2x_ε`, zero beyond,
/// with `x_ε = |ln ε|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryProfile {
    pub eps: f64,
    pub x_eps: f64,
    /// Monomial coefficients of the cubic in the local variable `t = s - x_ε`.
    pub cubic: [f64; 4],
}

/// Gaussian elimination with partial pivoting for a 4×4 system.
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col] == 0.0 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let s: f64 = (row + 1..4).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Builds the cubic with `p(x_ε) = -q'(x_ε)`, `p'(x_ε) = -q''(x_ε)`,
/// `p(2x_ε) = 0`, `p'(2x_ε) = 0`.
pub fn build_recovery_cubic(eps: f64) -> Result<RecoveryProfile> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Precondition(format!("recovery profile needs 0 < eps < 1, got {eps}")));
    }
    let x = eps.ln().abs();
    let l = x;
    let a = [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [1.0, l, l * l, l * l * l],
        [0.0, 1.0, 2.0 * l, 3.0 * l * l],
    ];
    let b = [profile_bump(x), profile_bump_d1(x), 0.0, 0.0];
    let cubic = solve4(a, b).ok_or_else(|| Error::Precondition("singular Hermite system".into()))?;
    Ok(RecoveryProfile { eps, x_eps: x, cubic })
}

impl RecoveryProfile {
    /// `γ_ε(s)` together with its first two derivatives.
    pub fn eval(&self, s: f64) -> (f64, f64, f64) {
        let sign = if s < 0.0 { -1.0 } else { 1.0 };
        let a = s.abs();
        if a <= self.x_eps {
            (profile_bump(s), profile_bump_d1(s), profile_bump_d2(s))
        } else if a <= 2.0 * self.x_eps {
            let t = a - self.x_eps;
            let [c0, c1, c2, c3] = self.cubic;
            let v = c0 + t * (c1 + t * (c2 + t * c3));
            let d1 = c1 + t * (2.0 * c2 + 3.0 * t * c3);
            let d2 = 2.0 * c2 + 6.0 * t * c3;
            (v, sign * d1, d2)
        } else {
            (0.0, 0.0, 0.0)
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        self.eval(s).0
    }
}

/// Samples `-q'(dist(x, Γ)/ε)` (or the truncated profile) on the lattice.
pub fn initial_condition(shape: &Shape, grid: &Arc<Grid>, eps: f64, truncated: bool) -> Result<RealField> {
    shape.validate(grid.dim())?;
    if shape.coordinate_dim() != Some(grid.dim()) {
        return Err(Error::InvalidGeometry("shape dimension does not match the grid".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::Precondition(format!("eps = {eps} must be positive")));
    }
    let recovery = if truncated { Some(build_recovery_cubic(eps)?) } else { None };
    let box_len = grid.len().to_vec();
    Ok(RealField::from_fn(grid, |x| {
        let s = shape.distance(x, &box_len) / eps;
        match &recovery {
            Some(r) => r.value(s),
            None => profile_bump(s),
        }
    }))
}

/// Distance field to Γ sampled on the lattice.
pub fn distance_field(shape: &Shape, grid: &Arc<Grid>) -> Result<RealField> {
    shape.validate(grid.dim())?;
    let box_len = grid.len().to_vec();
    Ok(RealField::from_fn(grid, |x| shape.distance(x, &box_len)))
}

/// Whether `ε` spans at least two lattice cells.
pub fn is_resolved(grid: &Grid, eps: f64) -> bool {
    eps >= 2.0 * grid.max_spacing()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle() -> Shape {
        Shape::Sphere {
            center: vec![0.5, 0.5],
            radius: 0.3,
        }
    }

    #[test]
    fn distance_examples() {
        let l = [1.0, 1.0];
        assert!((circle().distance(&[0.5, 0.5], &l) - 0.3).abs() < 1e-15);
        assert!(circle().distance(&[0.8, 0.5], &l).abs() < 1e-15);
        let seg = Shape::Segment {
            a: vec![0.2, 0.5, 0.5],
            b: vec![0.8, 0.5, 0.5],
        };
        assert!((seg.distance(&[0.5, 0.5, 0.7], &[1.0; 3]) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn periodic_images_are_used() {
        let pt = Shape::Sphere {
            center: vec![0.05],
            radius: 0.0,
        };
        assert!((pt.distance(&[0.95], &[1.0]) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn ring_distance() {
        let ring = Shape::Ring {
            center: vec![0.5, 0.5, 0.5],
            normal: vec![0.0, 0.0, 2.0],
            radius: 0.25,
        };
        assert!((ring.raw_distance(&[0.5, 0.5, 0.5]) - 0.25).abs() < 1e-15);
        assert!(ring.raw_distance(&[0.75, 0.5, 0.5]).abs() < 1e-15);
        assert!((ring.raw_distance(&[0.75, 0.5, 0.6]) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn dumbbell_distance() {
        let d = Shape::Dumbbell {
            a: vec![0.3, 0.5, 0.5],
            b: vec![0.7, 0.5, 0.5],
            ball_radius: 0.15,
            neck_radius: 0.05,
        };
        // on the ball away from the neck
        assert!(d.raw_distance(&[0.15, 0.5, 0.5]).abs() < 1e-12);
        // on the neck surface midway
        assert!(d.raw_distance(&[0.5, 0.55, 0.5]).abs() < 1e-12);
        // on the axis midway: inside the neck by its radius
        assert!((d.raw_distance(&[0.5, 0.5, 0.5]) - 0.05).abs() < 1e-12);
        // inside a ball center
        assert!((d.raw_distance(&[0.3, 0.5, 0.5]) - 0.15).abs() < 1e-12);
    }

    #[test]
    fn glued_circles_keep_the_inner_arc() {
        let balls = vec![
            Ball { center: vec![0.4, 0.5], radius: 0.2 },
            Ball { center: vec![0.6, 0.5], radius: 0.2 },
        ];
        let glued = Shape::GluedSpheres { balls: balls.clone() };
        let union = Shape::BallUnion { balls };
        // point on the first circle inside the second ball: part of Γ only
        // for the glued variant
        let p = [0.6, 0.5];
        assert!(glued.raw_distance(&p).abs() < 1e-12);
        assert!(union.raw_distance(&p) > 0.1);
        // the second circle's arc inside the first ball is removed: closest
        // surviving points are the triple points at x = 0.5
        let q = [0.4, 0.5];
        let tp = (0.2f64 * 0.2 - 0.1 * 0.1).sqrt();
        let expected = (0.1f64 * 0.1 + tp * tp).sqrt();
        assert!((glued.raw_distance(&q) - expected.min(0.2)).abs() < 1e-12);
        // outer boundary points agree
        let o = [0.8, 0.5];
        assert!(glued.raw_distance(&o).abs() < 1e-12 && union.raw_distance(&o).abs() < 1e-12);
    }

    #[test]
    fn union_is_min_of_members() {
        let a = circle();
        let b = Shape::Sphere {
            center: vec![0.2, 0.2],
            radius: 0.1,
        };
        let u = Shape::Union {
            members: vec![a.clone(), b.clone()],
        };
        for p in [[0.1, 0.1], [0.5, 0.5], [0.9, 0.3]] {
            let l = [1.0, 1.0];
            assert_eq!(u.distance(&p, &l), a.distance(&p, &l).min(b.distance(&p, &l)));
        }
    }

    #[test]
    fn invalid_shapes_rejected() {
        assert!(Shape::Union { members: vec![] }.validate(2).is_err());
        assert!(Shape::Sphere { center: vec![0.5], radius: 0.1 }.validate(2).is_err());
        assert!(Shape::Sphere { center: vec![0.5, 0.5], radius: -1.0 }.validate(2).is_err());
        let g = Grid::cube(2, 8, 1.0).unwrap();
        assert!(initial_condition(&Shape::Union { members: vec![] }, &g, 0.1, false).is_err());
    }

    #[test]
    fn initial_condition_values() {
        let g = Grid::cube(2, 64, 1.0).unwrap();
        let eps = 2.0 / 64.0;
        // the circle x = 0.8 passes through lattice points
        let u = initial_condition(&circle(), &g, eps, false).unwrap();
        assert!((u.max() - 0.25).abs() < 1e-3);
        assert!(u.min() >= 0.0);
        let at = g.mode_index(&[0, 0]).unwrap();
        let d = circle().distance(&g.point(at), &[1.0, 1.0]);
        assert!((u.values()[at] - profile_bump(d / eps)).abs() < 1e-15);
        assert!((profile_bump(10.0) - 4.5395807735951673e-5).abs() < 1e-15);
    }

    #[test]
    fn truncated_profile_vanishes_far_away() {
        let eps: f64 = 0.05;
        let r = build_recovery_cubic(eps).unwrap();
        let far = 2.0 * eps.ln().abs();
        assert_eq!(r.value(far + 1e-9), 0.0);
        assert_eq!(r.value(-far - 1.0), 0.0);
        let g = Grid::cube(2, 64, 1.0).unwrap();
        let u = initial_condition(&circle(), &g, eps, true).unwrap();
        let dist = distance_field(&circle(), &g).unwrap();
        for (v, d) in u.values().iter().zip(dist.values()) {
            if *d >= far * eps {
                assert_eq!(*v, 0.0);
            }
        }
    }

    /// Independent Hermite-basis construction of the same cubic.
    fn hermite_oracle(eps: f64, t: f64) -> f64 {
        let x = eps.ln().abs();
        let u = t / x;
        let h00 = 2.0 * u * u * u - 3.0 * u * u + 1.0;
        let h10 = u * u * u - 2.0 * u * u + u;
        h00 * profile_bump(x) + h10 * x * profile_bump_d1(x)
    }

    #[test]
    fn recovery_cubic_interpolates() {
        for eps in [0.1, 0.05, 0.01, 1e-3] {
            let r = build_recovery_cubic(eps).unwrap();
            let x = r.x_eps;
            let (v0, d0, _) = r.eval(x);
            let (v1, d1, _) = r.eval(x + 1e-300);
            assert!((v0 - profile_bump(x)).abs() <= 1e-12);
            assert!((v1 - profile_bump(x)).abs() <= 1e-12);
            assert!((d1 - profile_bump_d1(x)).abs() <= 1e-12);
            let _ = d0;
            let (v2, d2, _) = r.eval(2.0 * x);
            assert!(v2.abs() <= 1e-12 && d2.abs() <= 1e-12);
            for i in 0..=20 {
                let t = x * i as f64 / 20.0;
                assert!((r.value(x + t) - hermite_oracle(eps, t)).abs() <= 1e-12);
            }
        }
        assert!(build_recovery_cubic(1.0).is_err());
        assert!(build_recovery_cubic(0.0).is_err());
    }

    fn monotone_on_tail(eps: f64) -> bool {
        let r = build_recovery_cubic(eps).unwrap();
        let x = r.x_eps;
        let samples: Vec<f64> = (0..=1000).map(|i| r.value(x + x * i as f64 / 1000.0)).collect();
        samples.windows(2).all(|w| w[1] <= w[0] + 1e-15)
    }

    #[test]
    fn recovery_tail_monotonicity() {
        // the cubic tail is monotone only while |ln ε| tanh(|ln ε|/2) ≤ 3
        for eps in [0.1, 0.08, 0.06, 0.05] {
            assert!(monotone_on_tail(eps), "eps = {eps}");
        }
        for eps in [0.02, 0.01, 1e-3] {
            assert!(!monotone_on_tail(eps), "eps = {eps}");
        }
    }

    #[test]
    fn truncation_error_bound() {
        for eps in [0.1f64, 0.05, 0.01, 2.5e-3] {
            let r = build_recovery_cubic(eps).unwrap();
            let bound = profile_bump(eps.ln().abs());
            assert!(bound <= eps);
            for i in 0..4000 {
                let s = i as f64 * 0.005;
                assert!((r.value(s) - profile_bump(s)).abs() <= bound);
            }
        }
    }

    #[test]
    fn lattice_translation_shifts_field() {
        let g = Grid::cube(2, 32, 1.0).unwrap();
        let h = 1.0 / 32.0;
        let eps = 0.06;
        let u = initial_condition(&circle(), &g, eps, false).unwrap();
        let moved = Shape::Sphere {
            center: vec![0.5 + 3.0 * h, 0.5],
            radius: 0.3,
        };
        let v = initial_condition(&moved, &g, eps, false).unwrap();
        assert!(v.sup_distance(&u.shifted(0, 3)).unwrap() < 1e-14);
    }
}
