//! Built-in example systems with closed-form equations of motion.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::algebroid::AlgebroidChart;
use crate::error::{Error, Result};
use crate::integrator::IntegratorConfig;
use crate::model::System;
use crate::numerics::{FdConfig, Matrix, Vector};
use crate::reduction::MorphismSpec;

pub mod ball;
pub mod robot;
pub mod sleigh;
pub mod suslov;
pub mod veselova;

pub const SYSTEM_NAMES: [&str; 5] = [
    "suslov",
    "chaplygin_sleigh",
    "veselova",
    "mobile_robot",
    "rolling_ball",
];

/// Named numeric parameters with defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    entries: Vec<(String, f64)>,
}

impl Params {
    pub fn new(defaults: &[(&str, f64)]) -> Self {
        Self {
            entries: defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    pub fn get(&self, key: &str) -> f64 {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| *v)
            .unwrap_or_else(|| panic!("parameter `{key}` is not declared"))
    }

    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::InvalidParameters(format!("{key} = {value} is not finite")));
        }
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => {
                slot.1 = value;
                Ok(())
            }
            None => Err(Error::InvalidParameters(format!(
                "unknown parameter `{key}`; expected one of {}",
                self.names().join(", ")
            ))),
        }
    }

    pub fn with_overrides(mut self, overrides: &[(String, f64)]) -> Result<Self> {
        for (k, v) in overrides {
            self.set(k, *v)?;
        }
        Ok(self)
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|(k, _)| k.as_str()).collect()
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    /// Errors unless every listed parameter is strictly positive.
    pub fn require_positive(&self, keys: &[&str]) -> Result<()> {
        for k in keys {
            let v = self.get(k);
            if v <= 0.0 {
                return Err(Error::InvalidParameters(format!("{k} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

type OracleFn = dyn Fn(&Vector, &Vector) -> Result<(Vector, Vector)> + Send + Sync;
type SamplerFn = dyn Fn(&mut ChaCha8Rng) -> (Vector, Vector) + Send + Sync;

/// A system, its reduced form and the morphism between them.
#[derive(Clone)]
pub struct ReductionPair {
    pub label: String,
    pub source: System,
    pub target: System,
    pub morphism: MorphismSpec,
    /// Factorization of `morphism` through intermediate charts, when one exists.
    pub stages: Vec<MorphismSpec>,
    /// Samples on-constraint states of the source.
    pub source_sampler: Arc<SamplerFn>,
    pub x0: Vector,
    pub y0: Vector,
}

impl fmt::Debug for ReductionPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ReductionPair({})", self.label)
    }
}

/// Fully wired example system.
#[derive(Clone)]
pub struct SystemDescriptor {
    pub name: &'static str,
    pub params: Params,
    /// System integrated by default.
    pub system: System,
    /// Every chart the example uses.
    pub charts: Vec<AlgebroidChart>,
    pub reductions: Vec<ReductionPair>,
    oracle: Arc<OracleFn>,
    sampler: Arc<SamplerFn>,
    chart_sampler: Vec<Arc<dyn Fn(&mut ChaCha8Rng) -> Vector + Send + Sync>>,
    pub x0: Vector,
    pub y0: Vector,
    pub integrator: IntegratorConfig,
}

impl fmt::Debug for SystemDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemDescriptor")
            .field("name", &self.name)
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

impl SystemDescriptor {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        name: &'static str,
        params: Params,
        system: System,
        oracle: impl Fn(&Vector, &Vector) -> Result<(Vector, Vector)> + Send + Sync + 'static,
        sampler: impl Fn(&mut ChaCha8Rng) -> (Vector, Vector) + Send + Sync + 'static,
        x0: Vector,
        y0: Vector,
    ) -> Self {
        Self {
            name,
            params,
            charts: vec![system.chart().clone()],
            system,
            reductions: Vec::new(),
            oracle: Arc::new(oracle),
            sampler: Arc::new(sampler),
            chart_sampler: Vec::new(),
            x0,
            y0,
            integrator: IntegratorConfig::default(),
        }
    }

    pub(crate) fn with_chart(
        mut self,
        chart: AlgebroidChart,
        points: impl Fn(&mut ChaCha8Rng) -> Vector + Send + Sync + 'static,
    ) -> Self {
        self.charts.push(chart);
        self.chart_sampler.push(Arc::new(points));
        self
    }

    pub(crate) fn with_reduction(mut self, pair: ReductionPair) -> Self {
        self.reductions.push(pair);
        self
    }

    /// Closed-form right-hand side, independent of the generic solver.
    pub fn oracle(&self, x: &Vector, y: &Vector) -> Result<(Vector, Vector)> {
        let residual = self.system.constraint_residual(x, y)?;
        if residual > 1e-9 {
            return Err(Error::OffConstraint { residual });
        }
        (self.oracle)(x, y)
    }

    /// Closed-form right-hand side without the constraint check, for integration.
    pub fn oracle_rhs(&self, x: &Vector, y: &Vector) -> Result<(Vector, Vector)> {
        (self.oracle)(x, y)
    }

    /// Random on-constraint state in the chart's validity box.
    pub fn sample_state(&self, rng: &mut ChaCha8Rng) -> (Vector, Vector) {
        (self.sampler)(rng)
    }

    /// Random base point for chart `k` of [`charts`](Self::charts).
    pub fn sample_chart_point(&self, k: usize, rng: &mut ChaCha8Rng) -> Vector {
        if k == 0 {
            self.sample_state(rng).0
        } else {
            (self.chart_sampler[k - 1])(rng)
        }
    }

    /// Rebuilds every system with a different finite-difference configuration.
    pub fn with_fd(mut self, fd: FdConfig) -> Result<Self> {
        self.system = self.system.with_fd(fd)?;
        for pair in &mut self.reductions {
            pair.source = pair.source.with_fd(fd)?;
            pair.target = pair.target.with_fd(fd)?;
        }
        Ok(self)
    }

    /// Names of the verification suites that apply.
    pub fn checks(&self) -> Vec<&'static str> {
        let mut c = vec![
            "structure_equations",
            "regularity_sweep",
            "energy",
            "oracle_match",
        ];
        if matches!(self.system, System::Linear(_)) {
            c.push("route_equivalence");
        }
        match self.name {
            "suslov" => c.push("noether"),
            "chaplygin_sleigh" => c.push("reduction"),
            "mobile_robot" => c.extend(["reduction", "chaplygin"]),
            "rolling_ball" => c.extend(["reduction", "bracket_table"]),
            _ => {}
        }
        c.push("momentum");
        c
    }
}

/// Builds a named example with parameter overrides.
pub fn build(name: &str, overrides: &[(String, f64)]) -> Result<SystemDescriptor> {
    match name {
        "suslov" => suslov::build(suslov::defaults().with_overrides(overrides)?),
        "chaplygin_sleigh" => sleigh::build(sleigh::defaults().with_overrides(overrides)?),
        "veselova" => veselova::build(veselova::defaults().with_overrides(overrides)?),
        "mobile_robot" => robot::build(robot::defaults().with_overrides(overrides)?),
        "rolling_ball" => ball::build(ball::defaults().with_overrides(overrides)?),
        other => Err(Error::UnknownSystem(other.to_string())),
    }
}

/// Default parameters of a named example.
pub fn default_params(name: &str) -> Result<Params> {
    match name {
        "suslov" => Ok(suslov::defaults()),
        "chaplygin_sleigh" => Ok(sleigh::defaults()),
        "veselova" => Ok(veselova::defaults()),
        "mobile_robot" => Ok(robot::defaults()),
        "rolling_ball" => Ok(ball::defaults()),
        other => Err(Error::UnknownSystem(other.to_string())),
    }
}

pub(crate) fn uniform_vec(rng: &mut ChaCha8Rng, k: usize, lo: f64, hi: f64) -> Vector {
    Vector::from_fn(k, |_, _| rng.random_range(lo..hi))
}

/// `[v]_×`, so that `hat(v) w = v × w`.
pub fn hat(v: &Vector) -> Matrix {
    Matrix::from_row_slice(3, 3, &[0.0, -v[2], v[1], v[2], 0.0, -v[0], -v[1], v[0], 0.0])
}

pub(crate) fn v3(a: f64, b: f64, c: f64) -> Vector {
    Vector::from_column_slice(&[a, b, c])
}

pub(crate) fn cross(a: &Vector, b: &Vector) -> Vector {
    v3(
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )
}
