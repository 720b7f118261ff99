//! JSON run configuration.
//!
//! ```json
//! {
//!   "n": 2,
//!   "res": 16,
//!   "metric": "flat",
//!   "a": {"constant": [[0.2, 0.1], [0.2, 0.1]]},
//!   "F": [{"amplitude": 0.5, "wavevector": [1, 0, 0, 0], "phase": "cos"}],
//!   "solver": {"newton_tol": 1e-11},
//!   "outputs": {"dir": "out", "monitors": ["estimates", "kernel"]},
//!   "seed": 7
//! }
//! ```
//!
//! `res` is one resolution for every axis or a list of `2n`. `metric` is
//! `"flat"` or `{"perturbation": {"entries": [...], "check_positive": true}}`
//! where each entry adds `re + i im` at `(i, j)`, `i <= j`, to the identity.
//! `a` is `{"constant": [[re, im], ...]}` or
//! `{"expressions": [{"re": expr, "im": expr}, ...]}`; omitted means zero.

use std::path::PathBuf;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hermitian::SmallHerm;
use crate::operator::{assemble_gtilde, ProblemData};
use crate::solver::SolverConfig;
use crate::torus::{
    sample_field, ComplexScalarField, FieldError, HermitianMatrixField, OneFormField, PeriodicGrid,
    TrigExpression, MAX_DIM,
};

#[derive(Debug, Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    /// Location in the document, e.g. `res[3]` or `a.expressions[0].re[1]`.
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Resolution {
    Uniform(usize),
    PerAxis(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricEntry {
    pub i: usize,
    pub j: usize,
    #[serde(default)]
    pub re: TrigExpression,
    #[serde(default)]
    pub im: TrigExpression,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub entries: Vec<MetricEntry>,
    /// Reject the configuration unless `g` is positive definite at every point.
    #[serde(default = "yes")]
    pub check_positive: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricSpec {
    #[default]
    Flat,
    Perturbation(Perturbation),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentExpr {
    #[serde(default)]
    pub re: TrigExpression,
    #[serde(default)]
    pub im: TrigExpression,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormSpec {
    Constant(Vec<[f64; 2]>),
    Expressions(Vec<ComponentExpr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Monitor {
    Estimates,
    Kernel,
    Probe,
    Eigen,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Outputs {
    pub dir: PathBuf,
    pub monitors: Vec<Monitor>,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("results"),
            monitors: vec![Monitor::Estimates],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n: usize,
    pub res: Resolution,
    #[serde(default)]
    pub metric: MetricSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<FormSpec>,
    #[serde(rename = "F", default)]
    pub f: TrigExpression,
    /// Manufactured solution `u*` for `verify`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<TrigExpression>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub probe_trials: usize,
}

fn default_trials() -> usize {
    3
}

/// Parses and validates a configuration. In strict mode unknown keys are
/// errors; otherwise they are logged and ignored.
pub fn parse_config(text: &str, strict: bool) -> Result<RunConfig, ConfigError> {
    let mut ignored = Vec::new();
    let mut de = serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = {
        let mut record = |p: serde_ignored::Path| ignored.push(p.to_string());
        let wrapped = serde_ignored::Deserializer::new(&mut de, &mut record);
        serde_path_to_error::deserialize(wrapped).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::new(if path.is_empty() { ".".into() } else { path }, e.into_inner().to_string())
        })?
    };
    de.end().map_err(|e| ConfigError::new(".", e.to_string()))?;
    if let Some(first) = ignored.first() {
        if strict {
            return Err(ConfigError::new(first.clone(), "unknown key"));
        }
        for p in &ignored {
            log::warn!("ignoring unknown key {p}");
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn check_expr(expr: &TrigExpression, grid: &PeriodicGrid, path: &str) -> Result<(), ConfigError> {
    expr.check_resolvable(grid).map_err(|e| match e {
        FieldError::Unresolvable { term, .. } | FieldError::WavevectorLength { term, .. } => {
            ConfigError::new(format!("{path}[{term}]"), e.to_string())
        }
        other => ConfigError::new(path, other.to_string()),
    })
}

impl RunConfig {
    pub fn resolutions(&self) -> Vec<usize> {
        match &self.res {
            Resolution::Uniform(r) => vec![*r; 2 * self.n],
            Resolution::PerAxis(v) => v.clone(),
        }
    }

    pub fn grid(&self) -> Result<PeriodicGrid, ConfigError> {
        if !(1..=MAX_DIM).contains(&self.n) {
            return Err(ConfigError::new("n", format!("dimension {} is outside 1..=3", self.n)));
        }
        let res = self.resolutions();
        if res.len() != 2 * self.n {
            return Err(ConfigError::new(
                "res",
                format!("expected {} resolutions, found {}", 2 * self.n, res.len()),
            ));
        }
        for (axis, &r) in res.iter().enumerate() {
            if r < 4 || r % 2 != 0 {
                let path = match self.res {
                    Resolution::Uniform(_) => "res".to_string(),
                    Resolution::PerAxis(_) => format!("res[{axis}]"),
                };
                return Err(ConfigError::new(
                    path,
                    format!("axis {axis}: resolution {r} must be even and at least 4"),
                ));
            }
        }
        PeriodicGrid::new(self.n, res).map_err(|e| ConfigError::new("res", e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let grid = self.grid()?;
        let n = self.n;
        check_expr(&self.f, &grid, "F")?;
        if let Some(t) = &self.truth {
            check_expr(t, &grid, "truth")?;
        }
        match &self.a {
            None => {}
            Some(FormSpec::Constant(c)) if c.len() != n => {
                return Err(ConfigError::new(
                    "a.constant",
                    format!("expected {n} components, found {}", c.len()),
                ));
            }
            Some(FormSpec::Constant(c)) => {
                if let Some(k) = c.iter().position(|v| !(v[0].is_finite() && v[1].is_finite())) {
                    return Err(ConfigError::new(format!("a.constant[{k}]"), "not finite"));
                }
            }
            Some(FormSpec::Expressions(e)) => {
                if e.len() != n {
                    return Err(ConfigError::new(
                        "a.expressions",
                        format!("expected {n} components, found {}", e.len()),
                    ));
                }
                for (k, c) in e.iter().enumerate() {
                    check_expr(&c.re, &grid, &format!("a.expressions[{k}].re"))?;
                    check_expr(&c.im, &grid, &format!("a.expressions[{k}].im"))?;
                }
            }
        }
        if let MetricSpec::Perturbation(pert) = &self.metric {
            for (k, e) in pert.entries.iter().enumerate() {
                let path = format!("metric.perturbation.entries[{k}]");
                if e.i > e.j || e.j >= n {
                    return Err(ConfigError::new(
                        path,
                        format!("entry ({}, {}) must satisfy i <= j < {n}", e.i, e.j),
                    ));
                }
                if e.i == e.j && !e.im.is_empty() {
                    return Err(ConfigError::new(format!("{path}.im"), "diagonal entries are real"));
                }
                check_expr(&e.re, &grid, &format!("{path}.re"))?;
                check_expr(&e.im, &grid, &format!("{path}.im"))?;
            }
            if pert.check_positive {
                let g = self.metric_field(&grid)?;
                let min = crate::operator::min_eigenvalue(&g);
                if !(min > 0.0) {
                    return Err(ConfigError::new(
                        "metric",
                        format!("metric is not positive definite (min eigenvalue {min:e})"),
                    ));
                }
            }
        }
        self.solver
            .validate()
            .map_err(|m| ConfigError::new("solver", m))?;
        Ok(())
    }

    fn metric_field(&self, grid: &PeriodicGrid) -> Result<HermitianMatrixField, ConfigError> {
        let n = self.n;
        let pert = match &self.metric {
            MetricSpec::Flat => return Ok(HermitianMatrixField::identity(grid)),
            MetricSpec::Perturbation(p) => p,
        };
        let sample = |e: &TrigExpression, path: String| {
            sample_field(e, grid).map_err(|err| ConfigError::new(path, err.to_string()))
        };
        let mut parts = Vec::new();
        for (k, e) in pert.entries.iter().enumerate() {
            let path = format!("metric.perturbation.entries[{k}]");
            parts.push((
                e.i,
                e.j,
                sample(&e.re, format!("{path}.re"))?,
                sample(&e.im, format!("{path}.im"))?,
            ));
        }
        Ok(HermitianMatrixField::from_fn(grid, |q| {
            let mut m = SmallHerm::identity(n);
            for (i, j, re, im) in &parts {
                let v = m.get(*i, *j) + C64::new(re.values()[q].re, im.values()[q].re);
                m.set(*i, *j, v);
            }
            m
        }))
    }

    fn form(&self, grid: &PeriodicGrid) -> Result<OneFormField, ConfigError> {
        let err = |path: &str, e: FieldError| ConfigError::new(path, e.to_string());
        match &self.a {
            None => Ok(OneFormField::zero(grid)),
            Some(FormSpec::Constant(c)) => {
                let c: Vec<C64> = c.iter().map(|v| C64::new(v[0], v[1])).collect();
                OneFormField::constant(grid, &c).map_err(|e| err("a.constant", e))
            }
            Some(FormSpec::Expressions(list)) => {
                let mut comps = Vec::new();
                for (k, c) in list.iter().enumerate() {
                    let re = sample_field(&c.re, grid).map_err(|e| err(&format!("a.expressions[{k}].re"), e))?;
                    let im = sample_field(&c.im, grid).map_err(|e| err(&format!("a.expressions[{k}].im"), e))?;
                    let vals = re
                        .values()
                        .iter()
                        .zip(im.values())
                        .map(|(r, i)| C64::new(r.re, i.re))
                        .collect();
                    comps.push(ComplexScalarField::from_complex(grid, vals).map_err(|e| err("a", e))?);
                }
                OneFormField::new(grid, comps).map_err(|e| err("a", e))
            }
        }
    }

    /// `(g, a, F)` on the configured grid.
    pub fn problem(&self) -> Result<ProblemData, ConfigError> {
        let grid = self.grid()?;
        let g = self.metric_field(&grid)?;
        let a = self.form(&grid)?;
        let f = sample_field(&self.f, &grid).map_err(|e| ConfigError::new("F", e.to_string()))?;
        ProblemData::new(g, a, f).map_err(|e| ConfigError::new("metric", e.to_string()))
    }

    /// The problem with `F* = log det gt(u*) - log det g` and the sampled `u*`.
    pub fn manufactured_problem(&self) -> Result<(ProblemData, ComplexScalarField), ConfigError> {
        let truth = self
            .truth
            .as_ref()
            .ok_or_else(|| ConfigError::new("truth", "manufactured run needs a truth expression"))?;
        let base = self.problem()?;
        let ustar = sample_field(truth, base.grid()).map_err(|e| ConfigError::new("truth", e.to_string()))?;
        let op = assemble_gtilde(&base, &ustar).map_err(|e| ConfigError::new("truth", e.to_string()))?;
        let fstar = op.log_det_ratio.ok_or_else(|| {
            ConfigError::new(
                "truth",
                format!("perturbed metric of the truth is not positive (min eigenvalue {:e})", op.min_eig),
            )
        })?;
        let p = base
            .with_source(fstar)
            .map_err(|e| ConfigError::new("truth", e.to_string()))?;
        Ok((p, ustar))
    }
}
