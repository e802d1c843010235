//! Fixed-step RK4 with optional step halving, sampling and monitors.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::System;
use crate::numerics::Vector;

/// Vector field on the total space with optional drift corrections.
pub trait Dynamics {
    fn dims(&self) -> (usize, usize);

    /// `(ẋ, ẏ)` at a state, possibly slightly off the constraint.
    fn rhs(&self, x: &Vector, y: &Vector) -> Result<(Vector, Vector)>;

    /// Exact correction applied after every accepted step.
    fn pin(&self, _x: &Vector, y: &Vector) -> Result<Vector> {
        Ok(y.clone())
    }

    /// Optional projection onto the constraint set.
    fn project(&self, _x: &Vector, y: &Vector, _tol: f64) -> Result<Vector> {
        Ok(y.clone())
    }
}

impl Dynamics for System {
    fn dims(&self) -> (usize, usize) {
        System::dims(self)
    }

    fn rhs(&self, x: &Vector, y: &Vector) -> Result<(Vector, Vector)> {
        self.stage_field(x, y)
    }

    fn pin(&self, x: &Vector, y: &Vector) -> Result<Vector> {
        System::pin(self, x, y)
    }

    fn project(&self, x: &Vector, y: &Vector, tol: f64) -> Result<Vector> {
        System::project(self, x, y, tol)
    }
}

/// Dynamics given by a plain closure.
pub struct OdeFn<F> {
    pub n: usize,
    pub m: usize,
    pub f: F,
}

impl<F> OdeFn<F>
where
    F: Fn(&Vector, &Vector) -> Result<(Vector, Vector)>,
{
    pub fn new(n: usize, m: usize, f: F) -> Self {
        Self { n, m, f }
    }
}

impl<F> Dynamics for OdeFn<F>
where
    F: Fn(&Vector, &Vector) -> Result<(Vector, Vector)>,
{
    fn dims(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    fn rhs(&self, x: &Vector, y: &Vector) -> Result<(Vector, Vector)> {
        (self.f)(x, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Rk4,
    Rk4Halving,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub method: Method,
    pub step: f64,
    pub horizon: f64,
    pub sample_every: usize,
    pub post_step_projection: bool,
    pub projection_tol: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::Rk4,
            step: 1e-3,
            horizon: 10.0,
            sample_every: 10,
            post_step_projection: false,
            projection_tol: 1e-12,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidParameters(format!(
                "step must be positive, got {}",
                self.step
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameters(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.sample_every == 0 {
            return Err(Error::InvalidParameters("sample_every must be at least 1".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.step).round().max(1.0) as usize
    }
}

type MonitorFn = dyn Fn(&Vector, &Vector) -> Result<f64> + Send + Sync;

/// Named scalar recorded at every sample.
#[derive(Clone)]
pub struct Monitor {
    pub label: String,
    f: Arc<MonitorFn>,
}

impl fmt::Debug for Monitor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Monitor({})", self.label)
    }
}

impl Monitor {
    pub fn new(
        label: impl Into<String>,
        f: impl Fn(&Vector, &Vector) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, x: &Vector, y: &Vector) -> Result<f64> {
        (self.f)(x, y)
    }
}

/// Energy and constraint residual monitors for a system.
pub fn standard_monitors(sys: &System) -> Vec<Monitor> {
    let (a, b) = (sys.clone(), sys.clone());
    let mut out = vec![Monitor::new("E", move |x, y| a.energy(x, y))];
    if sys.constraint_count() > 0 {
        out.push(Monitor::new("constraint", move |x, y| {
            b.constraint_residual(x, y)
        }));
    }
    out
}

/// Sampled solution with monitor series.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub xs: Vec<Vector>,
    pub ys: Vec<Vector>,
    pub monitors: Vec<(String, Vec<f64>)>,
    /// Richardson estimate `max |y_h − y_{h/2}| / 15` when step halving ran.
    pub error_estimate: Option<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn monitor(&self, label: &str) -> Option<&[f64]> {
        self.monitors
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, v)| v.as_slice())
    }

    /// Uniform sample spacing.
    pub fn dt(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    pub fn last(&self) -> Option<(&Vector, &Vector)> {
        Some((self.xs.last()?, self.ys.last()?))
    }
}

fn axpy(a: &Vector, h: f64, k: &Vector) -> Vector {
    a + k * h
}

fn rk4_step(dyn_: &dyn Dynamics, x: &Vector, y: &Vector, h: f64) -> Result<(Vector, Vector)> {
    let (k1x, k1y) = dyn_.rhs(x, y)?;
    let (k2x, k2y) = dyn_.rhs(&axpy(x, 0.5 * h, &k1x), &axpy(y, 0.5 * h, &k1y))?;
    let (k3x, k3y) = dyn_.rhs(&axpy(x, 0.5 * h, &k2x), &axpy(y, 0.5 * h, &k2y))?;
    let (k4x, k4y) = dyn_.rhs(&axpy(x, h, &k3x), &axpy(y, h, &k3y))?;
    let xn = x + (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0);
    let yn = y + (k1y + k2y * 2.0 + k3y * 2.0 + k4y) * (h / 6.0);
    Ok((xn, yn))
}

#[allow(clippy::too_many_arguments)]
fn run(
    dyn_: &dyn Dynamics,
    x0: &Vector,
    y0: &Vector,
    step: f64,
    steps: usize,
    sample_every: usize,
    cfg: &IntegratorConfig,
    monitors: &[Monitor],
) -> Result<Trajectory> {
    let mut traj = Trajectory {
        monitors: monitors.iter().map(|m| (m.label.clone(), Vec::new())).collect(),
        ..Default::default()
    };
    let record = |traj: &mut Trajectory, t: f64, x: &Vector, y: &Vector| -> Result<()> {
        traj.times.push(t);
        traj.xs.push(x.clone());
        traj.ys.push(y.clone());
        for (slot, m) in traj.monitors.iter_mut().zip(monitors) {
            slot.1.push(m.eval(x, y).map_err(|e| Error::StepFailure {
                t,
                source: Box::new(e),
            })?);
        }
        Ok(())
    };
    let (mut x, mut y) = (x0.clone(), y0.clone());
    record(&mut traj, 0.0, &x, &y)?;
    for k in 0..steps {
        let t = k as f64 * step;
        let wrap = |e: Error| Error::StepFailure {
            t,
            source: Box::new(e),
        };
        let (xn, yn) = rk4_step(dyn_, &x, &y, step).map_err(wrap)?;
        let mut yn = dyn_.pin(&xn, &yn).map_err(wrap)?;
        if cfg.post_step_projection {
            yn = dyn_.project(&xn, &yn, cfg.projection_tol).map_err(wrap)?;
        }
        if !xn.iter().chain(yn.iter()).all(|v| v.is_finite()) {
            return Err(wrap(Error::NonFiniteEvaluation("state".into())));
        }
        x = xn;
        y = yn;
        if (k + 1) % sample_every == 0 {
            record(&mut traj, (k + 1) as f64 * step, &x, &y)?;
        }
    }
    Ok(traj)
}

/// Integrates from `(x0, y0)` and samples every `cfg.sample_every` steps.
pub fn integrate(
    dyn_: &dyn Dynamics,
    x0: &Vector,
    y0: &Vector,
    cfg: &IntegratorConfig,
    monitors: &[Monitor],
) -> Result<Trajectory> {
    cfg.validate()?;
    let (n, m) = dyn_.dims();
    if x0.len() != n || y0.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "initial state ({}, {}) for dynamics of dimension ({n}, {m})",
            x0.len(),
            y0.len()
        )));
    }
    let steps = cfg.steps();
    match cfg.method {
        Method::Rk4 => run(dyn_, x0, y0, cfg.step, steps, cfg.sample_every, cfg, monitors),
        Method::Rk4Halving => {
            let coarse = run(dyn_, x0, y0, cfg.step, steps, cfg.sample_every, cfg, &[])?;
            let mut fine = run(
                dyn_,
                x0,
                y0,
                0.5 * cfg.step,
                2 * steps,
                2 * cfg.sample_every,
                cfg,
                monitors,
            )?;
            let mut err = 0.0f64;
            for k in 0..coarse.len().min(fine.len()) {
                err = err.max((&coarse.xs[k] - &fine.xs[k]).amax());
                err = err.max((&coarse.ys[k] - &fine.ys[k]).amax());
            }
            fine.error_estimate = Some(err / 15.0);
            Ok(fine)
        }
    }
}

/// Drift summary of one monitor.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorSummary {
    pub label: String,
    pub initial: f64,
    /// `max_k |m_k − m_0|`
    pub max_drift: f64,
    /// `max_k |m_k|`
    pub max_abs: f64,
    pub drift: Vec<f64>,
}

pub fn monitor_report(traj: &Trajectory) -> Vec<MonitorSummary> {
    traj.monitors
        .iter()
        .map(|(label, series)| {
            let initial = series.first().copied().unwrap_or(0.0);
            let drift: Vec<f64> = series.iter().map(|v| v - initial).collect();
            MonitorSummary {
                label: label.clone(),
                initial,
                max_drift: drift.iter().fold(0.0, |a, d| a.max(d.abs())),
                max_abs: series.iter().fold(0.0, |a, v| a.max(v.abs())),
                drift,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn oscillator() -> OdeFn<impl Fn(&Vector, &Vector) -> Result<(Vector, Vector)>> {
        OdeFn::new(1, 1, |x: &Vector, y: &Vector| Ok((y.clone(), -x.clone())))
    }

    fn endpoint_error(step: f64) -> f64 {
        let cfg = IntegratorConfig {
            step,
            horizon: 2.0 * PI,
            sample_every: 1,
            ..Default::default()
        };
        let cfg = IntegratorConfig {
            step: cfg.horizon / (cfg.horizon / step).round(),
            ..cfg
        };
        let x0 = Vector::from_element(1, 1.0);
        let y0 = Vector::zeros(1);
        let tr = integrate(&oscillator(), &x0, &y0, &cfg, &[]).unwrap();
        let (x, y) = tr.last().unwrap();
        (x[0] - 1.0).abs().max(y[0].abs())
    }

    #[test]
    fn oscillator_period() {
        assert!(endpoint_error(1e-3) < 1e-8);
    }

    #[test]
    fn rk4_order() {
        let ratio = endpoint_error(0.1) / endpoint_error(0.05);
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn zero_dynamics_is_constant() {
        let z = OdeFn::new(2, 1, |_: &Vector, _: &Vector| {
            Ok((Vector::zeros(2), Vector::zeros(1)))
        });
        let x0 = Vector::from_column_slice(&[1.0, 2.0]);
        let y0 = Vector::from_element(1, 3.0);
        let tr = integrate(
            &z,
            &x0,
            &y0,
            &IntegratorConfig {
                horizon: 1.0,
                ..Default::default()
            },
            &[],
        )
        .unwrap();
        assert!(tr.xs.iter().all(|x| x == &x0));
        assert!(tr.ys.iter().all(|y| y == &y0));
    }

    #[test]
    fn halving_reports_small_error() {
        let cfg = IntegratorConfig {
            method: Method::Rk4Halving,
            step: 1e-2,
            horizon: 1.0,
            ..Default::default()
        };
        let tr = integrate(
            &oscillator(),
            &Vector::from_element(1, 1.0),
            &Vector::zeros(1),
            &cfg,
            &[],
        )
        .unwrap();
        assert!(tr.error_estimate.unwrap() < 1e-10);
        assert_eq!(tr.len(), 11);
    }

    #[test]
    fn empty_monitor_report() {
        assert!(monitor_report(&Trajectory::default()).is_empty());
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = IntegratorConfig {
            step: 0.0,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::InvalidParameters(_))));
    }
}
