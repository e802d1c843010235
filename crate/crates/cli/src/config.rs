//! JSON run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nhmech::integrator::{IntegratorConfig, Method};
use nhmech::systems::{self, SystemDescriptor};
use nhmech::verify::CHECK_NAMES;
use serde::Deserialize;

use crate::Failure;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSpec,
    #[serde(default)]
    pub initial_state: Option<StateSpec>,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub checks: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    pub method: Option<String>,
    pub step: Option<f64>,
    pub horizon: Option<f64>,
    pub sample_every: Option<usize>,
    pub post_step_projection: Option<bool>,
    pub projection_tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub trajectory: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.output.trajectory, &mut cfg.output.report]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), Failure> {
        if !systems::SYSTEM_NAMES.contains(&self.system.name.as_str()) {
            return Err(Failure::Config(format!(
                "system.name: unknown system `{}`; expected one of {}",
                self.system.name,
                systems::SYSTEM_NAMES.join(", ")
            )));
        }
        if let Some(bad) = self.checks.iter().find(|c| !CHECK_NAMES.contains(&c.as_str())) {
            return Err(Failure::Config(format!(
                "checks: unknown check `{bad}`; expected one of {}",
                CHECK_NAMES.join(", ")
            )));
        }
        if self.checks.is_empty() && self.output.trajectory.is_none() {
            return Err(Failure::Config(
                "checks: nothing to do; list checks or set output.trajectory".into(),
            ));
        }
        if self.samples == Some(0) {
            return Err(Failure::Config("samples: must be at least 1".into()));
        }
        Ok(())
    }

    /// Builds the descriptor with parameter, state and integrator overrides applied.
    pub fn descriptor(&self) -> Result<SystemDescriptor, Failure> {
        let overrides: Vec<(String, f64)> = self.system.params.iter().map(|(k, v)| (k.clone(), *v)).collect();
        let mut desc = systems::build(&self.system.name, &overrides)
            .map_err(|e| Failure::Config(format!("system.params: {e}")))?;
        desc.integrator = self.integrator.apply(desc.integrator)?;
        if let Some(s) = &self.initial_state {
            let (n, m) = desc.system.dims();
            if s.x.len() != n || s.y.len() != m {
                return Err(Failure::Config(format!(
                    "initial_state: expected x of length {n} and y of length {m}, got {} and {}",
                    s.x.len(),
                    s.y.len()
                )));
            }
            let x = nalgebra::DVector::from_column_slice(&s.x);
            let y = nalgebra::DVector::from_column_slice(&s.y);
            let residual = desc
                .system
                .constraint_residual(&x, &y)
                .map_err(|e| Failure::Config(format!("initial_state: {e}")))?;
            if residual > 1e-9 {
                return Err(Failure::Config(format!(
                    "initial_state: violates the constraints (residual {residual:.3e})"
                )));
            }
            desc.x0 = x;
            desc.y0 = y;
        }
        Ok(desc)
    }
}

impl IntegratorSpec {
    fn apply(&self, mut cfg: IntegratorConfig) -> Result<IntegratorConfig, Failure> {
        if let Some(m) = &self.method {
            cfg.method = match m.as_str() {
                "rk4" => Method::Rk4,
                "rk4_halving" => Method::Rk4Halving,
                other => {
                    return Err(Failure::Config(format!(
                        "integrator.method: unknown method `{other}`; expected rk4 or rk4_halving"
                    )))
                }
            };
        }
        if let Some(v) = self.step {
            cfg.step = v;
        }
        if let Some(v) = self.horizon {
            cfg.horizon = v;
        }
        if let Some(v) = self.sample_every {
            cfg.sample_every = v;
        }
        if let Some(v) = self.post_step_projection {
            cfg.post_step_projection = v;
        }
        if let Some(v) = self.projection_tol {
            cfg.projection_tol = v;
        }
        cfg.validate()
            .map_err(|e| Failure::Config(format!("integrator: {e}")))?;
        Ok(cfg)
    }
}
