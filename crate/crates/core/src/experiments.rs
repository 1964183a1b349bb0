//! Validation experiments shared by the command line and the test suite.
//! Each one runs the solver (or the radial quadrature) with fixed settings
//! and turns the measurements into named pass/fail checks.

use std::path::PathBuf;
use std::sync::Arc;

use crate::diagnostics::{
    band_from_field, count_components, exact_radius_law, fit_radius_law, gamma_limsup_study, DiagnosticsRecord,
    GammaRow, RadiusEstimator,
};
use crate::error::Result;
use crate::geometry::{initial_condition, Ball, Shape};
use crate::grid::{Grid, RealField};
use crate::io::{level_set_mask, write_diagnostics_csv};
use crate::model::ModelParams;
use crate::potential::FLAT_POINT;
use crate::solver::{run, DiagnosticsSink, HaltReason, RunPlan, RunState};

/// Problem sizes: `Quick` keeps every experiment to a few minutes on one core.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Quick,
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
    /// Extra measurements that are printed but not judged.
    pub notes: Vec<String>,
}

impl Report {
    fn check(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            pass,
            detail: detail.into(),
        });
    }

    fn note(&mut self, line: impl Into<String>) {
        self.notes.push(line.into());
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn lines(&self) -> Vec<String> {
        let mut out: Vec<String> = self.notes.iter().map(|n| format!("  {n}")).collect();
        out.extend(self.checks.iter().map(|c| {
            format!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail)
        }));
        out
    }
}

/// Where to put per-run diagnostics CSVs, if anywhere.
#[derive(Debug, Clone, Default)]
pub struct Output(pub Option<PathBuf>);

impl Output {
    fn save(&self, name: &str, records: &[DiagnosticsRecord]) -> Result<()> {
        if let Some(dir) = &self.0 {
            std::fs::create_dir_all(dir).map_err(|e| crate::error::Error::io(dir, e))?;
            write_diagnostics_csv(records, &dir.join(format!("{name}.csv")))?;
        }
        Ok(())
    }
}

fn circle(dim: usize, radius: f64) -> Shape {
    Shape::Sphere {
        center: vec![0.5; dim],
        radius,
    }
}

fn setup(dim: usize, n: usize, shape: &Shape, eps: f64) -> Result<(Arc<Grid>, RealField)> {
    let grid = Grid::cube(dim, n, 1.0)?;
    let u0 = initial_condition(shape, &grid, eps, false)?;
    Ok((grid, u0))
}

fn steps_for(t_end: f64, dt: f64) -> u64 {
    ((t_end / dt).round() as u64).max(1)
}

fn radius_errors(records: &[DiagnosticsRecord], dim: usize, r0: f64) -> Result<Vec<(f64, f64)>> {
    records
        .iter()
        .map(|r| {
            let exact = exact_radius_law(dim, 1, r0, r.time)?;
            Ok((r.time, (r.radius_estimate.unwrap_or(f64::NAN) - exact).abs()))
        })
        .collect()
}

/// Trapezoidal time average of `(t, e)` samples.
fn time_average(samples: &[(f64, f64)]) -> f64 {
    let span = samples.last().map_or(0.0, |s| s.0) - samples.first().map_or(0.0, |s| s.0);
    if span <= 0.0 {
        return samples.first().map_or(0.0, |s| s.1);
    }
    samples
        .windows(2)
        .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
        .sum::<f64>()
        / span
}

/// Stationarity of the exact 1-d profile: `N = 256`, `ε = 3/N`, `σ = 4ε²`,
/// `δt = 0.01ε²`, `10⁴` steps.
pub fn profile_1d(out: &Output) -> Result<Report> {
    let n = 256;
    let eps = 3.0 / n as f64;
    let params = ModelParams::unstabilized(eps, 4.0, 0.01);
    let (_, u0) = setup(1, n, &circle(1, 0.0), eps)?;
    let plan = RunPlan::new(params, 10_000, 1000);
    let mut records = Vec::new();
    let end = run(u0.clone(), &plan, &mut records)?;
    out.save("profile1d", &records)?;
    let drift = end.u.sup_distance(&u0)?;
    let disc = records.iter().map(|r| r.discrepancy_sup).fold(0.0, f64::max);
    let mut rep = Report::default();
    rep.check("profile drift", drift <= 1e-3, format!("max |u - u0| = {drift:.3e} (limit 1e-3)"));
    rep.check("profile discrepancy", disc <= 1e-3, format!("max discrepancy = {disc:.3e} (limit 1e-3)"));
    rep.check(
        "profile run completed",
        end.halted == Some(HaltReason::MaxSteps),
        format!("halted = {:?} after {} steps", end.halted, end.step_index),
    );
    Ok(rep)
}

/// Shrinking circle `R0 = 0.3` at `N = 256`, `σ = 4ε²`, `δt = 0.01ε²`, for
/// `ε = 3/N` and `ε = 1.5/N`, compared with `√(R0² − 2t)`.
pub fn circle_2d(t_end: f64, out: &Output) -> Result<Report> {
    let n = 256;
    let r0 = 0.3;
    let mut rep = Report::default();
    let mut averages = Vec::new();
    for factor in [3.0, 1.5] {
        let eps = factor / n as f64;
        let params = ModelParams::unstabilized(eps, 4.0, 0.01);
        let (_, u0) = setup(2, n, &circle(2, r0), eps)?;
        let steps = steps_for(t_end, params.dt);
        let mut plan = RunPlan::new(params, steps, (steps / 60).max(1));
        plan.estimator = RadiusEstimator::Circle2d;
        let mut records = Vec::new();
        let end = run(u0, &plan, &mut records)?;
        out.save(&format!("circle2d_eps{factor}"), &records)?;
        let errors = radius_errors(&records, 2, r0)?;
        let max_err = errors.iter().map(|e| e.1).fold(0.0, f64::max);
        let avg = time_average(&errors);
        averages.push(avg);
        rep.note(format!(
            "eps = {factor}/N: {} steps to t = {:.4}, max error {max_err:.3e} ({:.2} eps), time-averaged error {avg:.3e}",
            end.step_index,
            end.time,
            max_err / eps
        ));
        if factor == 3.0 {
            rep.check(
                "circle radius error (eps = 3/N)",
                max_err <= 3.0 * eps && end.halted == Some(HaltReason::MaxSteps),
                format!("max error {max_err:.3e} = {:.2} eps (limit 3 eps)", max_err / eps),
            );
        }
    }
    let ratio = averages[0] / averages[1];
    rep.check(
        "circle error ratio err(3/N)/err(1.5/N)",
        (1.4..=3.0).contains(&ratio),
        format!("ratio {ratio:.3} (required in [1.4, 3.0])"),
    );
    Ok(rep)
}

/// Two overlapping circles whose union is an elongated, ellipse-like set.
pub fn sigma_study_shape() -> Shape {
    Shape::BallUnion {
        balls: vec![
            Ball {
                center: vec![0.35, 0.5],
                radius: 0.3,
            },
            Ball {
                center: vec![0.65, 0.5],
                radius: 0.3,
            },
        ],
    }
}

/// Profile stability against `σ`: `N = 256`, `ε = 2/N`, `δt = 0.01ε²`,
/// `10⁴` steps with `σ = 4ε²` and with `σ = ε²`.
pub fn sigma_study(steps: u64, out: &Output) -> Result<Report> {
    let n = 256;
    let eps = 2.0 / n as f64;
    let shape = sigma_study_shape();
    let mut rep = Report::default();
    for factor in [4.0, 1.0] {
        let params = ModelParams::unstabilized(eps, factor, 0.01);
        let (_, u0) = setup(2, n, &shape, eps)?;
        let plan = RunPlan::new(params, steps, 100);
        let mut records = Vec::new();
        let end = run(u0, &plan, &mut records)?;
        out.save(&format!("sigma_study_{factor}eps2"), &records)?;
        let low = records
            .iter()
            .map(|r| (r.interface_peak_min, r.step))
            .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a });
        rep.note(format!(
            "sigma = {factor} eps^2: lowest interface peak {:.4} at step {}, halted {:?} at step {}",
            low.0, low.1, end.halted, end.step_index
        ));
        if factor == 4.0 {
            rep.check(
                "profile stable with sigma = 4 eps^2",
                low.0 >= 0.24 && end.step_index == steps,
                format!("min interface peak {:.4} over {} steps (limit >= 0.24)", low.0, end.step_index),
            );
        } else {
            rep.check(
                "profile collapse with sigma = eps^2",
                low.0 < 0.22,
                format!("min interface peak {:.4} (instability requires < 0.22)", low.0),
            );
        }
    }
    Ok(rep)
}

/// Energy decay of the stabilized splitting `α = 1/ε²`, `β = 1`, `δt = ε²`
/// on the circle, `N = 256`, `ε = 3/N`, `σ = 4ε²`.
pub fn energy_stability(steps: u64, out: &Output) -> Result<Report> {
    let n = 256;
    let eps = 3.0 / n as f64;
    let params = ModelParams::stabilized(eps, 4.0);
    let (_, u0) = setup(2, n, &circle(2, 0.3), eps)?;
    let plan = RunPlan::new(params, steps, 1);
    let mut records = Vec::new();
    let end = run(u0, &plan, &mut records)?;
    out.save("energy_stability", &records)?;
    let mut worst = f64::NEG_INFINITY;
    let mut ok = true;
    for w in records.windows(2) {
        let (a, b) = (w[0].energy.total, w[1].energy.total);
        let rise = (b - a) / a.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(rise);
        ok &= b <= a + 1e-8 * a.abs();
    }
    let mut rep = Report::default();
    rep.note(format!(
        "{} records, energy {:.6e} -> {:.6e}, halted {:?} at step {}",
        records.len(),
        records.first().map_or(f64::NAN, |r| r.energy.total),
        records.last().map_or(f64::NAN, |r| r.energy.total),
        end.halted,
        end.step_index
    ));
    rep.check(
        "energy nonincreasing (stabilized scheme)",
        ok && records.len() > 1,
        format!("largest relative increase {worst:.3e} (slack 1e-8)"),
    );
    Ok(rep)
}

/// Radial energy of the recovery fields for one radius `r = 0.3`, `d = 2, 3`,
/// `σ₀ ∈ {0, 0.02}`, `ε ∈ {10⁻², 5·10⁻³, 2.5·10⁻³}`.
pub fn gamma_limsup(out: &Output) -> Result<Report> {
    let eps_list = [1e-2, 5e-3, 2.5e-3];
    let mut rep = Report::default();
    let mut table: Vec<String> = vec!["dim,sigma0,eps,mass,willmore,total,target,gap,relative_gap,u_min".into()];
    for dim in [2, 3] {
        for sigma0 in [0.0, 0.02] {
            let rows: Vec<GammaRow> = gamma_limsup_study(&[0.3], sigma0, &eps_list, dim)?;
            for r in &rows {
                table.push(format!(
                    "{dim},{sigma0},{:e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    r.eps, r.mass, r.willmore, r.total, r.target, r.gap, r.relative_gap, r.u_min
                ));
            }
            let decreasing = rows.windows(2).all(|w| w[1].gap < w[0].gap);
            let last = rows.last().map_or(f64::NAN, |r| r.relative_gap);
            let gaps: Vec<String> = rows.iter().map(|r| format!("{:.2}%", 100.0 * r.relative_gap)).collect();
            rep.check(
                format!("energy convergence d = {dim}, sigma0 = {sigma0}"),
                decreasing && last <= 0.05,
                format!("relative gaps {} for eps {:?} (need decreasing, last <= 5%)", gaps.join(", "), eps_list),
            );
        }
    }
    if let Some(dir) = &out.0 {
        std::fs::create_dir_all(dir).map_err(|e| crate::error::Error::io(dir, e))?;
        let path = dir.join("gamma_limsup.csv");
        std::fs::write(&path, table.join("\n") + "\n").map_err(|e| crate::error::Error::io(&path, e))?;
    }
    Ok(rep)
}

/// Shrinking sphere `R0 = 0.3`, `ε = 2/N`, `σ = 2ε²`, `δt = 0.01ε²` to
/// `t = 0.01`, compared with `√(R0² − 4t)`.
pub fn sphere_3d(n: usize, tol_factor: f64, out: &Output) -> Result<Report> {
    let r0 = 0.3;
    let eps = 2.0 / n as f64;
    let params = ModelParams::unstabilized(eps, 2.0, 0.01);
    let (_, u0) = setup(3, n, &circle(3, r0), eps)?;
    let steps = steps_for(0.01, params.dt);
    let mut plan = RunPlan::new(params, steps, (steps / 40).max(1));
    plan.estimator = RadiusEstimator::Sphere3d;
    let mut records = Vec::new();
    let end = run(u0, &plan, &mut records)?;
    out.save(&format!("sphere3d_n{n}"), &records)?;
    let errors = radius_errors(&records, 3, r0)?;
    let max_err = errors.iter().map(|e| e.1).fold(0.0, f64::max);
    let mut rep = Report::default();
    rep.note(format!("N = {n}: {} steps to t = {:.4}", end.step_index, end.time));
    rep.check(
        format!("sphere radius error (N = {n})"),
        max_err <= tol_factor * eps && end.halted == Some(HaltReason::MaxSteps),
        format!("max error {max_err:.3e} = {:.2} eps (limit {tol_factor} eps)", max_err / eps),
    );
    Ok(rep)
}

/// Sink that also tracks the `{u ≥ 1/6}` component count and the largest
/// value on the interface band at every record.
struct QualitativeSink {
    records: Vec<DiagnosticsRecord>,
    band_max: Vec<f64>,
    components: Vec<usize>,
    track_components: bool,
}

impl QualitativeSink {
    fn new(track_components: bool) -> Self {
        QualitativeSink {
            records: Vec::new(),
            band_max: Vec::new(),
            components: Vec::new(),
            track_components,
        }
    }

    fn observe(&mut self, u: &RealField) -> Result<()> {
        let band = band_from_field(u);
        let m = u
            .values()
            .iter()
            .zip(&band)
            .filter(|(_, b)| **b)
            .map(|(v, _)| *v)
            .fold(f64::NEG_INFINITY, f64::max);
        self.band_max.push(m);
        if self.track_components {
            self.components
                .push(count_components(u.grid(), &level_set_mask(u, FLAT_POINT))?);
        }
        Ok(())
    }
}

impl DiagnosticsSink for QualitativeSink {
    fn record(&mut self, record: &DiagnosticsRecord) -> Result<()> {
        self.records.push(*record);
        Ok(())
    }

    fn snapshot(&mut self, u: &RealField, _step: u64, _time: f64) -> Result<()> {
        self.observe(u)
    }
}

fn qualitative_run(
    dim: usize,
    n: usize,
    shape: &Shape,
    params: ModelParams,
    t_end: f64,
    estimator: RadiusEstimator,
    track_components: bool,
) -> Result<(RunState, QualitativeSink)> {
    let (_, u0) = setup(dim, n, shape, params.eps)?;
    let steps = steps_for(t_end, params.dt);
    let stride = (steps / 25).max(1);
    let mut plan = RunPlan::new(params, steps, stride);
    plan.snapshot_every = stride;
    plan.estimator = estimator;
    let mut sink = QualitativeSink::new(track_components);
    let end = run(u0, &plan, &mut sink)?;
    sink.observe(&end.u)?;
    Ok((end, sink))
}

fn band_check(rep: &mut Report, name: &str, end: &RunState, sink: &QualitativeSink) {
    let lo = sink.band_max.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sink.band_max.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let completed = end.halted == Some(HaltReason::MaxSteps);
    rep.check(
        format!("{name}: completes without divergence"),
        completed,
        format!("halted {:?} at step {}", end.halted, end.step_index),
    );
    rep.check(
        format!("{name}: band maximum within [0.24, 0.25]"),
        lo >= 0.24 && hi <= 0.25 + 1e-12,
        format!("band max ranges over [{lo:.4}, {hi:.4}]"),
    );
}

/// Glued circles with triple points, dumbbell and codimension-2 circle.
/// Checked qualitatively: no divergence, profile peak kept on the band,
/// connected dumbbell, and a linear `R²(t)` law for the circle.
pub fn qualitative(scale: Scale, out: &Output) -> Result<Report> {
    let mut rep = Report::default();

    let n2 = 256;
    let eps = 2.0 / n2 as f64;
    let mut params = ModelParams::unstabilized(eps, 4.0, 0.1);
    params.projection = true;
    let glued = Shape::GluedSpheres {
        balls: vec![
            Ball {
                center: vec![0.4, 0.5],
                radius: 0.2,
            },
            Ball {
                center: vec![0.6, 0.5],
                radius: 0.2,
            },
        ],
    };
    let t2 = if scale == Scale::Quick { 0.004 } else { 0.02 };
    let (end, sink) = qualitative_run(2, n2, &glued, params, t2, RadiusEstimator::None, false)?;
    out.save("triple_junction", &sink.records)?;
    band_check(&mut rep, "glued circles", &end, &sink);

    let n3 = if scale == Scale::Quick { 64 } else { 128 };
    let eps3 = 2.0 / n3 as f64;
    let params3 = ModelParams::unstabilized(eps3, 2.0, 0.01);
    let dumbbell = Shape::Dumbbell {
        a: vec![0.3, 0.5, 0.5],
        b: vec![0.7, 0.5, 0.5],
        ball_radius: 0.18,
        neck_radius: 0.06,
    };
    let (end, sink) = qualitative_run(3, n3, &dumbbell, params3, 0.005, RadiusEstimator::None, true)?;
    out.save("dumbbell", &sink.records)?;
    band_check(&mut rep, "dumbbell", &end, &sink);
    let max_components = sink.components.iter().copied().max().unwrap_or(0);
    let min_components = sink.components.iter().copied().min().unwrap_or(0);
    rep.check(
        "dumbbell: {u >= 1/6} stays connected",
        max_components == 1 && min_components == 1,
        format!("component counts {:?}", sink.components),
    );

    let r0 = 0.25;
    let ring = Shape::Ring {
        center: vec![0.5; 3],
        normal: vec![0.0, 0.0, 1.0],
        radius: r0,
    };
    let (end, sink) = qualitative_run(3, n3, &ring, params3, 0.008, RadiusEstimator::Ring3d, false)?;
    out.save("ring3d", &sink.records)?;
    band_check(&mut rep, "codim-2 circle", &end, &sink);
    let times: Vec<f64> = sink.records.iter().map(|r| r.time).collect();
    let radii: Vec<f64> = sink.records.iter().filter_map(|r| r.radius_estimate).collect();
    let fit = fit_radius_law(&times, &radii)?;
    rep.note(format!(
        "codim-2 circle: R0 = {r0}, fitted R0^2 = {:.5}, kappa = {:.4}, R^2 = {:.5}",
        fit.r0_squared, fit.kappa, fit.r_squared
    ));
    rep.check(
        "codim-2 circle: R(t)^2 linear with kappa > 0",
        fit.r_squared >= 0.99 && fit.kappa > 0.0,
        format!("kappa = {:.4}, R^2 = {:.5}", fit.kappa, fit.r_squared),
    );
    Ok(rep)
}
