//! Uniform front over free, linearly and nonlinearly constrained systems.
//!
//! Each system has an original basis, used for states, and a working basis in
//! which prolongation vectors and covectors are expressed. The two coincide
//! except for linear constraints, where the working basis is the adapted frame.

use crate::algebroid::{AlgebroidChart, ProlongationVector};
use crate::constrained_linear::{LinearNHSystem, ON_CONSTRAINT_TOL};
use crate::constrained_nonlinear::NonlinearNHSystem;
use crate::error::{Error, Result};
use crate::lagrangian::{LagrangianField, PhaseData};
use crate::numerics::{FdConfig, Matrix, ScalarField, Vector};

/// Largest `|ỹ^A|` tolerated at intermediate integrator stages before snapping.
pub const STAGE_TOL: f64 = 1e-4;

#[derive(Clone, Debug)]
pub enum System {
    Free(LagrangianField),
    Linear(LinearNHSystem),
    Nonlinear(NonlinearNHSystem),
}

impl System {
    pub fn chart(&self) -> &AlgebroidChart {
        self.lagrangian().chart()
    }

    pub fn lagrangian(&self) -> &LagrangianField {
        match self {
            System::Free(l) => l,
            System::Linear(s) => s.lagrangian(),
            System::Nonlinear(s) => s.lagrangian(),
        }
    }

    /// Same system with a different finite-difference configuration.
    pub fn with_fd(&self, fd: FdConfig) -> Result<System> {
        Ok(match self {
            System::Free(l) => System::Free(l.clone().with_fd(fd)),
            System::Linear(s) => System::Linear(LinearNHSystem::new(
                s.lagrangian().clone().with_fd(fd),
                s.frame().clone(),
            )?),
            System::Nonlinear(s) => System::Nonlinear(NonlinearNHSystem::new(
                s.lagrangian().clone().with_fd(fd),
                s.constraints().to_vec(),
            )?),
        })
    }

    pub fn working_chart(&self) -> &AlgebroidChart {
        self.working_lagrangian().chart()
    }

    pub fn working_lagrangian(&self) -> &LagrangianField {
        match self {
            System::Linear(s) => s.adapted_lagrangian(),
            _ => self.lagrangian(),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.chart().n, self.chart().m)
    }

    /// Number of independent constraints.
    pub fn constraint_count(&self) -> usize {
        match self {
            System::Free(_) => 0,
            System::Linear(s) => s.s(),
            System::Nonlinear(s) => s.s(),
        }
    }

    pub fn constraint_residual(&self, x: &Vector, y: &Vector) -> Result<f64> {
        match self {
            System::Free(_) => Ok(0.0),
            System::Linear(s) => s.constraint_residual(x, y),
            System::Nonlinear(s) => s.constraint_residual(x, y),
        }
    }

    pub fn energy(&self, x: &Vector, y: &Vector) -> Result<f64> {
        self.lagrangian().energy(x, y)
    }

    /// Fiber coordinates in the working basis, checked against the constraint.
    pub fn to_working(&self, x: &Vector, y: &Vector) -> Result<Vector> {
        match self {
            System::Free(_) => Ok(y.clone()),
            System::Linear(s) => s.adapted_on_constraint(x, y, ON_CONSTRAINT_TOL),
            System::Nonlinear(s) => {
                let residual = s.constraint_residual(x, y)?;
                if residual > ON_CONSTRAINT_TOL {
                    return Err(Error::OffConstraint { residual });
                }
                Ok(y.clone())
            }
        }
    }

    /// Phase data of the working Lagrangian at an on-constraint state.
    pub fn working_phase(&self, x: &Vector, y: &Vector) -> Result<PhaseData> {
        let yw = self.to_working(x, y)?;
        self.working_lagrangian().phase(x, &yw)
    }

    /// Expresses a function of original coordinates in working coordinates.
    pub fn to_working_function(&self, f: &ScalarField) -> ScalarField {
        match self {
            System::Linear(s) => {
                let (f, b) = (f.clone(), s.frame().b.clone());
                ScalarField::new(f.n, f.m, move |x, ya| f.eval(x, &(b.at(x) * ya)))
            }
            _ => f.clone(),
        }
    }

    /// Constrained dynamics in the working basis.
    pub fn dynamics_section(&self, x: &Vector, y: &Vector) -> Result<ProlongationVector> {
        match self {
            System::Free(l) => l.phase(x, y)?.free_section(),
            System::Linear(s) => s.constrained_section(x, y),
            System::Nonlinear(s) => s.constrained_section(x, y),
        }
    }

    /// `P̄` on stacked working components.
    pub fn projector_pbar(&self, x: &Vector, y: &Vector) -> Result<Matrix> {
        match self {
            System::Free(_) => Ok(Matrix::identity(2 * self.dims().1, 2 * self.dims().1)),
            System::Linear(s) => Ok(s.projector_pbar(x, y)?.p_bar()),
            System::Nonlinear(s) => s.projector_pbar(x, y),
        }
    }

    /// `P` on stacked working components.
    pub fn projector_p(&self, x: &Vector, y: &Vector) -> Result<Matrix> {
        let m = self.dims().1;
        match self {
            System::Free(_) => Ok(Matrix::identity(2 * m, 2 * m)),
            System::Linear(s) => Ok(Matrix::identity(2 * m, 2 * m) - s.projector_q(x, y)?.matrix),
            System::Nonlinear(s) => s.projector_p(x, y),
        }
    }

    /// `R_L = P(Γ_L) − P̄(Γ_L)`, identically zero for linear constraints.
    pub fn bracket_defect(&self, x: &Vector, y: &Vector) -> Result<ProlongationVector> {
        match self {
            System::Nonlinear(s) => s.bracket_defect(x, y),
            _ => {
                let yw = self.to_working(x, y)?;
                let m = self.dims().1;
                Ok(ProlongationVector::new(
                    x.clone(),
                    yw,
                    Vector::zeros(m),
                    Vector::zeros(m),
                ))
            }
        }
    }

    /// Right-hand side `(ẋ, ẏ)` in original coordinates, strict on the constraint.
    pub fn vector_field(&self, x: &Vector, y: &Vector) -> Result<(Vector, Vector)> {
        match self {
            System::Free(l) => l.free_dynamics(x, y),
            System::Linear(s) => {
                let sol = s.solve_ld(x, y)?;
                Ok((sol.xdot, sol.ydot))
            }
            System::Nonlinear(s) => {
                let sol = s.solve_ld(x, y)?;
                Ok((sol.xdot, sol.ydot))
            }
        }
    }

    /// Right-hand side tolerant of the small drift of intermediate RK stages.
    pub fn stage_field(&self, x: &Vector, y: &Vector) -> Result<(Vector, Vector)> {
        match self {
            System::Free(l) => l.free_dynamics(x, y),
            System::Linear(s) => {
                let ya = s.adapted_on_constraint(x, y, STAGE_TOL)?;
                let sol = s.solve_ld_adapted(x, &ya)?;
                Ok((sol.xdot, sol.ydot))
            }
            System::Nonlinear(s) => {
                let sol = s.solve_unchecked(x, y)?;
                Ok((sol.xdot, sol.ydot))
            }
        }
    }

    /// Removes the constraint drift that the scheme can remove exactly.
    pub fn pin(&self, x: &Vector, y: &Vector) -> Result<Vector> {
        match self {
            System::Linear(s) => {
                let ya = s.adapted_on_constraint(x, y, STAGE_TOL)?;
                s.from_adapted(x, &ya)
            }
            _ => Ok(y.clone()),
        }
    }

    /// Newton projection onto nonlinear constraints; identity otherwise.
    pub fn project(&self, x: &Vector, y: &Vector, tol: f64) -> Result<Vector> {
        match self {
            System::Nonlinear(s) => s.project_fiber(x, y, tol, 20),
            _ => Ok(y.clone()),
        }
    }
}
