//! TOML run configuration.
//!
//! ```toml
//! [grid]
//! dim = 2
//! n = 256            # or one entry per axis: [256, 128]
//! len = 1.0          # or [1.0, 0.5]
//!
//! [model]
//! eps_rule = "3/N"   # or eps = 0.0117
//! sigma_rule = "4*eps^2"
//! dt_rule = "0.01*eps^2"
//! alpha = 0.0        # alpha_rule = "1/eps^2" also accepted
//! beta = 0.0
//! projection = true
//!
//! [[shapes]]
//! type = "sphere"
//! center = [0.5, 0.5]
//! radius = 0.3
//!
//! [run]
//! steps = 1000
//! diag_every = 100
//! snapshot_every = 500
//! extinction_threshold = 0.05
//! output_dir = "out/circle"
//! experiment_name = "circle2d"
//! radius_estimator = "circle2d"
//! ```
//!
//! Rules resolve against `N`, the smallest per-axis resolution, and against
//! the resolved `eps`. Accepted forms are `c/N`, `c*eps^k`, `c/eps^k`,
//! `c*eps`, `c/eps`, `eps^k` and plain numbers.

use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use toml::de::{DeTable, DeValue};
use toml::Spanned;

use crate::diagnostics::RadiusEstimator;
use crate::error::{Error, Result};
use crate::geometry::Shape;
use crate::grid::Grid;
use crate::model::ModelParams;
use crate::potential::FLAT_POINT;
use crate::solver::{RunPlan, DEFAULT_EXTINCTION_THRESHOLD};

/// A scalar given once for every axis or per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerAxis<T> {
    All(T),
    Each(Vec<T>),
}

impl<T: Clone> PerAxis<T> {
    fn expand(&self, dim: usize) -> Option<Vec<T>> {
        match self {
            PerAxis::All(v) => Some(vec![v.clone(); dim]),
            PerAxis::Each(v) if v.len() == dim => Some(v.clone()),
            PerAxis::Each(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub n: PerAxis<usize>,
    pub len: PerAxis<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_rule: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_rule: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_rule: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_rule: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_rule: Option<String>,
    #[serde(default = "yes")]
    pub projection: bool,
    #[serde(default)]
    pub dealias: bool,
}

fn yes() -> bool {
    true
}

/// Shape of the initial profile across Γ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialProfile {
    #[default]
    Exact,
    Truncated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub steps: u64,
    pub diag_every: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<u64>,
    #[serde(default = "default_threshold")]
    pub extinction_threshold: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default = "default_name")]
    pub experiment_name: String,
    #[serde(default)]
    pub radius_estimator: RadiusEstimator,
    /// Emit radius estimates even when several shapes are present.
    #[serde(default)]
    pub force_radius: bool,
    #[serde(default)]
    pub initial_profile: InitialProfile,
    /// Level of the exported `{u ≥ level}` masks.
    #[serde(default = "default_level")]
    pub mask_level: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_EXTINCTION_THRESHOLD
}

fn default_output_dir() -> String {
    "out".into()
}

fn default_name() -> String {
    "run".into()
}

fn default_level() -> f64 {
    FLAT_POINT
}

/// Run configuration as written in the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub model: ModelSection,
    #[serde(default)]
    pub shapes: Vec<Shape>,
    pub run: RunSection,
}

/// Configuration with every rule replaced by its value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub n: Vec<usize>,
    pub len: Vec<f64>,
    pub params: ModelParams,
}

/// Parsed rule `coef · var^power`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Rule {
    coef: f64,
    var: RuleVar,
    power: i32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum RuleVar {
    Const,
    N,
    Eps,
}

fn parse_rule(text: &str) -> std::result::Result<Rule, String> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if let Ok(v) = s.parse::<f64>() {
        return Ok(Rule {
            coef: v,
            var: RuleVar::Const,
            power: 0,
        });
    }
    let (coef_text, op, rest) = match s.find(['*', '/']) {
        Some(i) => (&s[..i], &s[i..i + 1], &s[i + 1..]),
        None => ("1", "*", s.as_str()),
    };
    let coef: f64 = coef_text
        .parse()
        .map_err(|_| format!("cannot read coefficient `{coef_text}` in rule `{text}`"))?;
    let (name, power) = match rest.split_once('^') {
        Some((name, p)) => (
            name,
            p.parse::<i32>()
                .map_err(|_| format!("cannot read exponent `{p}` in rule `{text}`"))?,
        ),
        None => (rest, 1),
    };
    let var = match name {
        "N" => RuleVar::N,
        "eps" => RuleVar::Eps,
        _ => return Err(format!("unknown variable `{name}` in rule `{text}`")),
    };
    let power = if op == "/" { -power } else { power };
    Ok(Rule { coef, var, power })
}

impl Rule {
    fn eval(&self, n: usize, eps: Option<f64>) -> std::result::Result<f64, String> {
        let base = match self.var {
            RuleVar::Const => 1.0,
            RuleVar::N => n as f64,
            RuleVar::Eps => eps.ok_or("eps cannot refer to itself")?,
        };
        Ok(self.coef * base.powi(self.power))
    }
}

/// Line (1-based) containing byte `offset`.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn key_str<'a>(k: &'a Spanned<std::borrow::Cow<'_, str>>) -> &'a str {
    k.get_ref().as_ref()
}

/// Span of the value at `path` (dotted keys, `[i]` for array entries).
fn span_of(table: &DeTable<'_>, path: &str) -> Option<Range<usize>> {
    let mut parts = path.split('.');
    let first = parts.next()?;
    let (name, index) = split_index(first);
    let mut value = table.iter().find(|(k, _)| key_str(k) == name).map(|(_, v)| v)?;
    if let Some(i) = index {
        value = value.get_ref().as_array()?.get(i)?;
    }
    for part in parts {
        let (name, index) = split_index(part);
        let t = value.get_ref().as_table()?;
        value = t.iter().find(|(k, _)| key_str(k) == name).map(|(_, v)| v)?;
        if let Some(i) = index {
            value = value.get_ref().as_array()?.get(i)?;
        }
    }
    Some(value.span())
}

fn split_index(part: &str) -> (&str, Option<usize>) {
    match part.split_once('[') {
        Some((name, rest)) => (name, rest.trim_end_matches(']').parse().ok()),
        None => (part, None),
    }
}

/// Deepest key path whose key or value span contains `span`.
fn path_at(table: &DeTable<'_>, span: &Range<usize>, prefix: &str) -> Option<String> {
    let contains = |r: Range<usize>| r.start <= span.start && span.end <= r.end.max(r.start + 1);
    for (k, v) in table.iter() {
        let path = if prefix.is_empty() {
            key_str(k).to_string()
        } else {
            format!("{prefix}.{}", key_str(k))
        };
        if contains(k.span()) {
            return Some(path);
        }
        // header tables only span their header line, so always descend
        match v.get_ref() {
            DeValue::Table(t) => {
                if let Some(p) = path_at(t, span, &path) {
                    return Some(p);
                }
            }
            DeValue::Array(items) => {
                for (i, item) in items.iter().enumerate() {
                    let p = format!("{path}[{i}]");
                    if let DeValue::Table(t) = item.get_ref() {
                        if let Some(found) = path_at(t, span, &p) {
                            return Some(found);
                        }
                    }
                    if contains(item.span()) {
                        return Some(p);
                    }
                }
            }
            _ => {}
        }
        if contains(v.span()) {
            return Some(path);
        }
    }
    None
}

fn backticked(message: &str) -> Option<&str> {
    let start = message.find('`')? + 1;
    let end = start + message[start..].find('`')?;
    Some(&message[start..end])
}

struct Located<'t, 'i> {
    text: &'t str,
    table: &'t DeTable<'i>,
}

impl Located<'_, '_> {
    fn error(&self, key: &str, message: impl Into<String>) -> Error {
        let line = span_of(self.table, key)
            .or_else(|| {
                let parent = key.rsplit_once('.').map(|(p, _)| p)?;
                span_of(self.table, parent)
            })
            .map(|r| line_of(self.text, r.start));
        Error::Config {
            key: key.to_string(),
            line,
            message: message.into(),
        }
    }
}

/// Parses and validates a configuration; rules are checked by resolving them.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let doc = DeTable::parse(text).map_err(|e| Error::Config {
        key: String::new(),
        line: e.span().map(|r| line_of(text, r.start)),
        message: e.message().to_string(),
    })?;
    let table = doc.get_ref().clone();
    let loc = Located { text, table: &table };

    let config = RunConfig::deserialize(toml::de::Deserializer::from(doc)).map_err(|e| {
        let message = e.message().to_string();
        let span = e.span();
        let mut key = span
            .as_ref()
            .and_then(|s| path_at(&table, s, ""))
            .unwrap_or_default();
        if message.starts_with("missing field") {
            if let Some(field) = backticked(&message) {
                key = if key.is_empty() {
                    field.to_string()
                } else {
                    format!("{key}.{field}")
                };
            }
        } else if message.starts_with("unknown field") {
            if let Some(field) = backticked(&message) {
                if !key.ends_with(field) {
                    key = if key.is_empty() {
                        field.to_string()
                    } else {
                        format!("{key}.{field}")
                    };
                }
            }
        }
        Error::Config {
            key,
            line: span.map(|r| line_of(text, r.start)),
            message,
        }
    })?;
    config.resolve_located(&loc)?;
    Ok(config)
}

impl RunConfig {
    /// Resolves every rule and checks parameter ranges.
    pub fn resolve(&self) -> Result<Resolved> {
        let text = self.to_toml()?;
        let doc = DeTable::parse(&text).map_err(|e| Error::Config {
            key: String::new(),
            line: None,
            message: e.message().to_string(),
        })?;
        self.resolve_located(&Located {
            text: &text,
            table: doc.get_ref(),
        })
    }

    fn resolve_located(&self, loc: &Located<'_, '_>) -> Result<Resolved> {
        let g = &self.grid;
        if !(1..=3).contains(&g.dim) {
            return Err(loc.error("grid.dim", format!("dimension {} not in 1..=3", g.dim)));
        }
        let n = g
            .n
            .expand(g.dim)
            .ok_or_else(|| loc.error("grid.n", "needs one entry per axis"))?;
        let len = g
            .len
            .expand(g.dim)
            .ok_or_else(|| loc.error("grid.len", "needs one entry per axis"))?;
        if let Some(bad) = n.iter().find(|&&v| v < 4) {
            return Err(loc.error("grid.n", format!("resolution {bad} below 4")));
        }
        if let Some(bad) = len.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
            return Err(loc.error("grid.len", format!("box length {bad} must be positive")));
        }
        let n_min = *n.iter().min().unwrap_or(&0);

        let m = &self.model;
        let pick = |name: &str, value: Option<f64>, rule: &Option<String>, eps: Option<f64>, default: Option<f64>| {
            let key = format!("model.{name}");
            let rule_key = format!("model.{name}_rule");
            match (value, rule) {
                (Some(_), Some(_)) => Err(loc.error(&key, format!("give either {name} or {name}_rule, not both"))),
                (Some(v), None) => Ok(v),
                (None, Some(r)) => parse_rule(r)
                    .and_then(|rule| rule.eval(n_min, eps))
                    .map_err(|msg| loc.error(&rule_key, msg)),
                (None, None) => default.ok_or_else(|| loc.error(&key, format!("missing {name} or {name}_rule"))),
            }
        };
        let eps = pick("eps", m.eps, &m.eps_rule, None, None)?;
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(loc.error(key_for("eps", &m.eps_rule), format!("eps = {eps} must be positive")));
        }
        let sigma = pick("sigma", m.sigma, &m.sigma_rule, Some(eps), None)?;
        let dt = pick("dt", m.dt, &m.dt_rule, Some(eps), None)?;
        let alpha = pick("alpha", m.alpha, &m.alpha_rule, Some(eps), Some(0.0))?;
        let beta = pick("beta", m.beta, &m.beta_rule, Some(eps), Some(0.0))?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(loc.error(key_for("dt", &m.dt_rule), format!("dt = {dt} must be positive")));
        }
        for (name, v, rule) in [("sigma", sigma, &m.sigma_rule), ("alpha", alpha, &m.alpha_rule), ("beta", beta, &m.beta_rule)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(loc.error(key_for(name, rule), format!("{name} = {v} must be nonnegative")));
            }
        }

        for (i, shape) in self.shapes.iter().enumerate() {
            if let Err(e) = shape.validate(g.dim) {
                return Err(loc.error(&format!("shapes[{i}]"), e.to_string()));
            }
        }

        let r = &self.run;
        if r.steps == 0 {
            return Err(loc.error("run.steps", "must be at least 1"));
        }
        if r.diag_every == 0 {
            return Err(loc.error("run.diag_every", "must be at least 1"));
        }
        if r.snapshot_every == Some(0) {
            return Err(loc.error("run.snapshot_every", "must be at least 1"));
        }
        if !(r.extinction_threshold >= 0.0) {
            return Err(loc.error("run.extinction_threshold", "must be nonnegative"));
        }
        let wanted_dim = match r.radius_estimator {
            RadiusEstimator::None => None,
            RadiusEstimator::Circle2d => Some(2),
            RadiusEstimator::Sphere3d | RadiusEstimator::Ring3d => Some(3),
        };
        if let Some(d) = wanted_dim {
            if d != g.dim {
                return Err(loc.error("run.radius_estimator", format!("estimator needs a {d}-d grid")));
            }
            if self.shapes.len() != 1 && !r.force_radius {
                return Err(loc.error(
                    "run.radius_estimator",
                    "radius estimates need exactly one shape (set force_radius to override)",
                ));
            }
        }

        Ok(Resolved {
            n,
            len,
            params: ModelParams {
                eps,
                sigma,
                dt,
                alpha,
                beta,
                projection: m.projection,
                dealias: m.dealias,
            },
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config {
            key: String::new(),
            line: None,
            message: e.to_string(),
        })
    }

    pub fn build_grid(&self) -> Result<Arc<Grid>> {
        let r = self.resolve()?;
        Grid::new(&r.n, &r.len)
    }

    pub fn plan(&self) -> Result<RunPlan> {
        let r = self.resolve()?;
        Ok(RunPlan {
            params: r.params,
            steps: self.run.steps,
            diag_every: self.run.diag_every,
            snapshot_every: self.run.snapshot_every.unwrap_or(u64::MAX),
            extinction_threshold: self.run.extinction_threshold,
            estimator: self.run.radius_estimator,
        })
    }
}

fn key_for(name: &str, rule: &Option<String>) -> &'static str {
    match (name, rule.is_some()) {
        ("eps", true) => "model.eps_rule",
        ("eps", false) => "model.eps",
        ("dt", true) => "model.dt_rule",
        ("dt", false) => "model.dt",
        ("sigma", true) => "model.sigma_rule",
        ("sigma", false) => "model.sigma",
        ("alpha", true) => "model.alpha_rule",
        ("alpha", false) => "model.alpha",
        ("beta", true) => "model.beta_rule",
        _ => "model.beta",
    }
}

/// Applies `section.key=value` overrides to configuration text. The value
/// is read as a TOML value, falling back to a plain string. Setting `x`
/// drops `x_rule` and the reverse.
pub fn apply_overrides(text: &str, overrides: &[String]) -> Result<String> {
    if overrides.is_empty() {
        return Ok(text.to_string());
    }
    let mut doc: toml::Table = toml::from_str(text).map_err(|e| Error::Config {
        key: String::new(),
        line: e.span().map(|r| line_of(text, r.start)),
        message: e.message().to_string(),
    })?;
    for item in overrides {
        let bad = |msg: &str| Error::Config {
            key: item.clone(),
            line: None,
            message: msg.to_string(),
        };
        let (path, raw) = item.split_once('=').ok_or_else(|| bad("override must look like key=value"))?;
        let path = path.trim();
        let (section, key) = path
            .split_once('.')
            .ok_or_else(|| bad("override key must be section.key"))?;
        let value = toml::from_str::<toml::Table>(&format!("v = {}", raw.trim()))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
        let table = doc
            .entry(section.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| bad("override section is not a table"))?;
        match key.strip_suffix("_rule") {
            Some(base) => {
                table.remove(base);
            }
            None => {
                table.remove(&format!("{key}_rule"));
            }
        }
        table.insert(key.to_string(), value);
    }
    toml::to_string(&doc).map_err(|e| Error::Config {
        key: String::new(),
        line: None,
        message: e.to_string(),
    })
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a> {
    pub program: &'static str,
    pub version: &'static str,
    pub threads: usize,
    pub resolved: &'a Resolved,
    pub config: &'a RunConfig,
}

impl<'a> Manifest<'a> {
    pub fn new(config: &'a RunConfig, resolved: &'a Resolved, threads: usize) -> Self {
        Manifest {
            program: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            threads,
            resolved,
            config,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config {
            key: String::new(),
            line: None,
            message: e.to_string(),
        })
    }
}
