//! Hamiltonian sections and the nonholonomic bracket `{f, g} = ω_L(P̄X_f, P̄X_g)`.

use std::fmt;
use std::sync::Arc;

use crate::algebroid::{differential_on_bundle, ProlongationVector};
use crate::error::Result;
use crate::integrator::Trajectory;
use crate::lagrangian::{LagrangianField, PhaseData};
use crate::model::System;
use crate::numerics::{sample_derivative, solve_dense, FdConfig, ScalarField, Vector, TOL_DET};

type CovectorFn = dyn Fn(&System, &PhaseData) -> Result<Vector> + Send + Sync;

#[derive(Clone)]
enum Kind {
    Function(ScalarField),
    Energy,
    /// Covector in the working dual basis, for quasi-coordinates without a global function.
    Covector(Arc<CovectorFn>),
}

/// Observable on the total space, identified by its differential.
#[derive(Clone)]
pub struct Observable {
    pub label: String,
    kind: Kind,
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Observable({})", self.label)
    }
}

impl Observable {
    /// Function of original coordinates `(x, y)`.
    pub fn function(label: impl Into<String>, f: ScalarField) -> Self {
        Self {
            label: label.into(),
            kind: Kind::Function(f),
        }
    }

    /// The Lagrangian energy, with its differential taken analytically.
    pub fn energy() -> Self {
        Self {
            label: "E".into(),
            kind: Kind::Energy,
        }
    }

    /// Exact or non-exact 1-form given directly in the working dual basis.
    pub fn covector(
        label: impl Into<String>,
        f: impl Fn(&System, &PhaseData) -> Result<Vector> + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            kind: Kind::Covector(Arc::new(f)),
        }
    }

    /// `i`-th base coordinate.
    pub fn base_coordinate(label: impl Into<String>, n: usize, m: usize, i: usize) -> Self {
        Self::function(label, ScalarField::new(n, m, move |x, _| x[i]))
    }

    /// `α`-th fiber coordinate in the original basis.
    pub fn fiber_coordinate(label: impl Into<String>, n: usize, m: usize, a: usize) -> Self {
        Self::function(label, ScalarField::new(n, m, move |_, y| y[a]))
    }

    /// Value, when the observable is a function.
    pub fn value(&self, sys: &System, x: &Vector, y: &Vector) -> Option<f64> {
        match &self.kind {
            Kind::Function(f) => Some(f.eval(x, y)),
            Kind::Energy => sys.energy(x, y).ok(),
            Kind::Covector(_) => None,
        }
    }

    /// Differential in the working dual basis `{𝒳^α, 𝒱^α}`.
    pub fn differential(&self, sys: &System, p: &PhaseData) -> Result<Vector> {
        match &self.kind {
            Kind::Function(f) => {
                let fw = sys.to_working_function(f);
                let cfg = fd_for_observables(sys);
                differential_on_bundle(sys.working_chart(), &fw, &p.x, &p.y, &cfg)
            }
            Kind::Energy => Ok(p.energy_differential()),
            Kind::Covector(c) => c(sys, p),
        }
    }
}

fn fd_for_observables(sys: &System) -> FdConfig {
    FdConfig {
        scheme: crate::numerics::FdScheme::Central4,
        ..sys.lagrangian().fd
    }
}

/// Solves `i_X ω_L = df` for a function on the total space.
pub fn hamiltonian_section(
    lf: &LagrangianField,
    f: &ScalarField,
    x: &Vector,
    y: &Vector,
) -> Result<ProlongationVector> {
    let p = lf.phase(x, y)?;
    let df = differential_on_bundle(lf.chart(), f, x, y, &lf.fd)?;
    p.hamiltonian_vector(&df)
}

fn hamiltonian_stacked(p: &PhaseData, df: &Vector) -> Result<Vector> {
    solve_dense(&(-p.cartan()), df, TOL_DET)
}

/// Nonholonomic bracket at an on-constraint state.
pub fn nh_bracket(sys: &System, f: &Observable, g: &Observable, x: &Vector, y: &Vector) -> Result<f64> {
    let p = sys.working_phase(x, y)?;
    let omega = p.cartan();
    let pbar = sys.projector_pbar(x, y)?;
    let xf = &pbar * hamiltonian_stacked(&p, &f.differential(sys, &p)?)?;
    let xg = &pbar * hamiltonian_stacked(&p, &g.differential(sys, &p)?)?;
    Ok(xf.dot(&(&omega * xg)))
}

/// Bracket through the form restricted to `𝒯^D D`; linear constraints only.
pub fn nh_bracket_restricted(
    sys: &System,
    f: &Observable,
    g: &Observable,
    x: &Vector,
    y: &Vector,
) -> Result<Option<f64>> {
    let System::Linear(lin) = sys else {
        return Ok(None);
    };
    let p = sys.working_phase(x, y)?;
    let basis = lin.tdd_basis();
    let omega = basis.transpose() * p.cartan() * &basis;
    let df = basis.transpose() * f.differential(sys, &p)?;
    let dg = basis.transpose() * g.differential(sys, &p)?;
    let xf = solve_dense(&(-&omega), &df, TOL_DET)?;
    let xg = solve_dense(&(-&omega), &dg, TOL_DET)?;
    Ok(Some(xf.dot(&(&omega * xg))))
}

/// `{f, {g, h}} + {g, {h, f}} + {h, {f, g}}` by finite differences of the bracket functions.
pub fn jacobiator(
    sys: &System,
    f: &Observable,
    g: &Observable,
    h: &Observable,
    x: &Vector,
    y: &Vector,
) -> Result<f64> {
    let bracket_fn = |a: &Observable, b: &Observable| -> Observable {
        let (s, a, b) = (sys.clone(), a.clone(), b.clone());
        let (n, m) = sys.dims();
        Observable::function(
            format!("{{{},{}}}", a.label, b.label),
            ScalarField::new(n, m, move |x, y| {
                let y_on = s.project(x, y, 1e-13).unwrap_or_else(|_| y.clone());
                nh_bracket(&s, &a, &b, x, &y_on).unwrap_or(f64::NAN)
            }),
        )
    };
    let gh = bracket_fn(g, h);
    let hf = bracket_fn(h, f);
    let fg = bracket_fn(f, g);
    Ok(nh_bracket(sys, f, &gh, x, y)? + nh_bracket(sys, g, &hf, x, y)? + nh_bracket(sys, h, &fg, x, y)?)
}

/// `df(R_L) + {f, E_L}`, the predicted rate of change of `f`.
pub fn predicted_rate(sys: &System, f: &Observable, x: &Vector, y: &Vector) -> Result<f64> {
    let p = sys.working_phase(x, y)?;
    let df = f.differential(sys, &p)?;
    let defect = sys.bracket_defect(x, y)?;
    Ok(defect.pair(&df) + nh_bracket(sys, f, &Observable::energy(), x, y)?)
}

/// Largest `|ḟ − ρ¹(R_L)f − {f, E_L}|` over the interior samples of a trajectory.
pub fn evolution_residual(sys: &System, f: &Observable, traj: &Trajectory) -> Result<f64> {
    let values: Vec<f64> = traj
        .xs
        .iter()
        .zip(&traj.ys)
        .map(|(x, y)| f.value(sys, x, y).unwrap_or(f64::NAN))
        .collect();
    let rates = sample_derivative(&values, traj.dt());
    let mut worst = 0.0f64;
    for k in 2..traj.len().saturating_sub(2) {
        let predicted = predicted_rate(sys, f, &traj.xs[k], &traj.ys[k])?;
        worst = worst.max((rates[k] - predicted).abs());
    }
    Ok(worst)
}
