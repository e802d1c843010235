//! Nonlinear constraints `φ^A(x, y) = 0` with Chetaev forces.

use crate::algebroid::{AlgebroidChart, ProlongationVector};
use crate::error::{Error, Result};
use crate::lagrangian::{LagrangianField, PhaseData};
use crate::numerics::{
    inverse, nullspace, rank, solve_dense, solve_dense_multi, Matrix, ScalarField, Vector, TOL_DET,
};

pub const ON_CONSTRAINT_TOL: f64 = 1e-9;

/// Values and first derivatives of the constraint functions at one state.
#[derive(Debug, Clone)]
pub struct ConstraintJet {
    pub values: Vector,
    /// s×n
    pub dx: Matrix,
    /// s×m
    pub dy: Matrix,
}

impl ConstraintJet {
    /// `dφ^A` in the dual basis `{𝒳^α, 𝒱^α}`, one row per constraint.
    pub fn differential(&self, anchor: &Matrix) -> Matrix {
        let (s, m) = self.dy.shape();
        let mut d = Matrix::zeros(s, 2 * m);
        d.view_mut((0, 0), (s, m)).copy_from(&(&self.dx * anchor));
        d.view_mut((0, m), (s, m)).copy_from(&self.dy);
        d
    }
}

/// Multipliers and force directions of the nonlinear solve.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierSolution {
    pub xdot: Vector,
    pub ydot: Vector,
    pub lambda: Vector,
    /// Columns are the vertical components of `Z_A = −W⁻¹ ∇_y φ^A`.
    pub z_basis: Matrix,
}

/// Lagrangian with constraint functions on the total space.
#[derive(Clone, Debug)]
pub struct NonlinearNHSystem {
    lagrangian: LagrangianField,
    phi: Vec<ScalarField>,
}

impl NonlinearNHSystem {
    pub fn new(lagrangian: LagrangianField, phi: Vec<ScalarField>) -> Result<Self> {
        let chart = lagrangian.chart();
        if let Some(bad) = phi.iter().find(|f| f.n != chart.n || f.m != chart.m) {
            return Err(Error::DimensionMismatch(format!(
                "constraint on ({}, {}) for chart {} with (n, m) = ({}, {})",
                bad.n, bad.m, chart.name, chart.n, chart.m
            )));
        }
        if phi.len() > chart.m {
            return Err(Error::DimensionMismatch(format!(
                "{} constraints on fiber rank {}",
                phi.len(),
                chart.m
            )));
        }
        Ok(Self { lagrangian, phi })
    }

    pub fn chart(&self) -> &AlgebroidChart {
        self.lagrangian.chart()
    }

    pub fn lagrangian(&self) -> &LagrangianField {
        &self.lagrangian
    }

    pub fn constraints(&self) -> &[ScalarField] {
        &self.phi
    }

    pub fn s(&self) -> usize {
        self.phi.len()
    }

    pub fn m(&self) -> usize {
        self.chart().m
    }

    pub fn constraint_jet(&self, x: &Vector, y: &Vector) -> Result<ConstraintJet> {
        let (n, m, s) = (x.len(), y.len(), self.s());
        let mut values = Vector::zeros(s);
        let mut dx = Matrix::zeros(s, n);
        let mut dy = Matrix::zeros(s, m);
        for (a, f) in self.phi.iter().enumerate() {
            values[a] = f.try_eval(x, y)?;
            let g = f.gradient(x, y, &self.lagrangian.fd)?;
            dx.set_row(a, &g.rows(0, n).transpose());
            dy.set_row(a, &g.rows(n, m).transpose());
        }
        Ok(ConstraintJet { values, dx, dy })
    }

    pub fn constraint_residual(&self, x: &Vector, y: &Vector) -> Result<f64> {
        let mut r = 0.0f64;
        for f in &self.phi {
            r = r.max(f.try_eval(x, y)?.abs());
        }
        Ok(r)
    }

    fn check_on(&self, x: &Vector, y: &Vector) -> Result<()> {
        let residual = self.constraint_residual(x, y)?;
        if residual > ON_CONSTRAINT_TOL {
            return Err(Error::OffConstraint { residual });
        }
        Ok(())
    }

    fn check_rank(&self, jet: &ConstraintJet) -> Result<()> {
        let k = rank(&jet.dy, 1e-10);
        if k < self.s() {
            return Err(Error::RankDeficientConstraint {
                rank: k,
                expected: self.s(),
            });
        }
        Ok(())
    }

    /// Orthonormal basis of `ker ∂φ/∂y`.
    pub fn virtual_displacements(&self, x: &Vector, y: &Vector) -> Result<Matrix> {
        self.check_on(x, y)?;
        let jet = self.constraint_jet(x, y)?;
        self.check_rank(&jet)?;
        if self.s() == 0 {
            return Ok(Matrix::identity(self.m(), self.m()));
        }
        Ok(nullspace(&jet.dy, 1e-10))
    }

    /// `C^{AB} = ∂_yφ^A W⁻¹ ∂_yφ^B`.
    pub fn regularity_matrix(&self, x: &Vector, y: &Vector) -> Result<Matrix> {
        let p = self.lagrangian.phase(x, y)?;
        let jet = self.constraint_jet(x, y)?;
        let winv_dy = solve_dense_multi(&p.jet.w, &jet.dy.transpose(), TOL_DET)?;
        let c = &jet.dy * winv_dy;
        Ok((&c + c.transpose()) * 0.5)
    }

    fn solve_phase(&self, p: &PhaseData, jet: &ConstraintJet) -> Result<MultiplierSolution> {
        let w = &p.jet.w;
        let f_free = p.free_accel()?;
        let z = -solve_dense_multi(w, &jet.dy.transpose(), TOL_DET)?;
        let xdot = p.xdot();
        // dφ^B(Γ_L) and C^{AB} = −dφ^B(Z_A)
        let dphi_free = &jet.dx * &xdot + &jet.dy * &f_free;
        let c = -(&jet.dy * &z);
        let lambda = solve_dense(&c, &dphi_free, TOL_DET)
            .map_err(|e| Error::SingularConstrainedSystem(format!("constraint regularity matrix: {e}")))?;
        let ydot = f_free + &z * &lambda;
        Ok(MultiplierSolution {
            xdot,
            ydot,
            lambda,
            z_basis: z,
        })
    }

    /// `Γ = Γ_L + λ^A Z_A` with `λ` fixed by tangency to the constraint.
    pub fn solve_ld(&self, x: &Vector, y: &Vector) -> Result<MultiplierSolution> {
        self.check_on(x, y)?;
        self.solve_unchecked(x, y)
    }

    /// Solve without the on-constraint check, for intermediate integrator stages.
    pub fn solve_unchecked(&self, x: &Vector, y: &Vector) -> Result<MultiplierSolution> {
        let p = self.lagrangian.phase(x, y)?;
        let jet = self.constraint_jet(x, y)?;
        self.solve_phase(&p, &jet)
    }

    pub fn constrained_section(&self, x: &Vector, y: &Vector) -> Result<ProlongationVector> {
        let sol = self.solve_ld(x, y)?;
        Ok(ProlongationVector::new(x.clone(), y.clone(), y.clone(), sol.ydot))
    }

    /// `dφ^B(Z)` for a prolongation vector.
    pub fn constraint_derivative(&self, z: &ProlongationVector) -> Result<Vector> {
        let jet = self.constraint_jet(&z.x, &z.y)?;
        let anchor = self.chart().anchor(&z.x);
        Ok(jet.differential(&anchor) * z.stacked())
    }

    /// Instantaneous `dE_L/dt = −λ^A ∂_yφ^A · y` along the constrained flow.
    pub fn energy_drift(&self, x: &Vector, y: &Vector) -> Result<f64> {
        let sol = self.solve_ld(x, y)?;
        let jet = self.constraint_jet(x, y)?;
        Ok(-sol.lambda.dot(&(&jet.dy * y)))
    }

    /// Projector `P = id − Z_A ⊗ (DZ)⁻¹ dφ` onto `𝒯^E ℳ` along the force directions.
    pub fn projector_p(&self, x: &Vector, y: &Vector) -> Result<Matrix> {
        let p = self.lagrangian.phase(x, y)?;
        let jet = self.constraint_jet(x, y)?;
        let m = self.m();
        let zv = -solve_dense_multi(&p.jet.w, &jet.dy.transpose(), TOL_DET)?;
        let mut z = Matrix::zeros(2 * m, self.s());
        z.view_mut((m, 0), (m, self.s())).copy_from(&zv);
        let d = jet.differential(&p.anchor);
        let dz = &d * &z;
        let coef = solve_dense_multi(&dz, &d, TOL_DET)
            .map_err(|e| Error::SingularConstrainedSystem(format!("constraint regularity matrix: {e}")))?;
        Ok(Matrix::identity(2 * m, 2 * m) - z * coef)
    }

    /// Basis of `𝒯^𝒱 ℳ`: vectors with `comp_x ∈ ker ∂_yφ` that are tangent to `ℳ`.
    pub fn tvm_basis(&self, x: &Vector, y: &Vector) -> Result<Matrix> {
        let jet = self.constraint_jet(x, y)?;
        let (m, s) = (self.m(), self.s());
        let anchor = self.chart().anchor(x);
        let mut a = Matrix::zeros(2 * s, 2 * m);
        a.view_mut((0, 0), (s, m)).copy_from(&jet.dy);
        a.view_mut((s, 0), (s, 2 * m))
            .copy_from(&jet.differential(&anchor));
        if s == 0 {
            return Ok(Matrix::identity(2 * m, 2 * m));
        }
        let basis = nullspace(&a, 1e-10);
        if basis.ncols() != 2 * (m - s) {
            return Err(Error::RankDeficientConstraint {
                rank: 2 * m - basis.ncols(),
                expected: 2 * s,
            });
        }
        Ok(basis)
    }

    /// Symplectic projector `P̄` onto `𝒯^𝒱 ℳ`.
    pub fn projector_pbar(&self, x: &Vector, y: &Vector) -> Result<Matrix> {
        let p = self.lagrangian.phase(x, y)?;
        let basis = self.tvm_basis(x, y)?;
        crate::constrained_linear::symplectic_projector(&p.cartan(), &basis)
    }

    /// `R_L = P(Γ_L) − P̄(Γ_L)`, the part of the flow the bracket does not generate.
    pub fn bracket_defect(&self, x: &Vector, y: &Vector) -> Result<ProlongationVector> {
        self.check_on(x, y)?;
        let p = self.lagrangian.phase(x, y)?;
        let gamma = p.free_section()?.stacked();
        let diff = (self.projector_p(x, y)? - self.projector_pbar(x, y)?) * gamma;
        Ok(ProlongationVector::from_stacked(x, y, &diff))
    }

    /// Newton projection of `y` onto `φ(x, ·) = 0` with minimal-norm corrections.
    pub fn project_fiber(&self, x: &Vector, y: &Vector, tol: f64, max_iter: usize) -> Result<Vector> {
        let mut y = y.clone();
        for _ in 0..max_iter {
            let jet = self.constraint_jet(x, &y)?;
            if jet.values.amax() <= tol {
                return Ok(y);
            }
            let gram = &jet.dy * jet.dy.transpose();
            let step = jet.dy.transpose() * solve_dense(&gram, &jet.values, TOL_DET)?;
            y -= step;
        }
        let residual = self.constraint_residual(x, &y)?;
        if residual <= tol {
            Ok(y)
        } else {
            Err(Error::OffConstraint { residual })
        }
    }

    /// Smallest eigenvalue of `C^{AB}` over the given states.
    pub fn certify_regular(&self, states: &[(Vector, Vector)]) -> Result<f64> {
        let mut lo = f64::INFINITY;
        for (x, y) in states {
            let c = self.regularity_matrix(x, y)?;
            if c.nrows() > 0 {
                lo = lo.min(c.symmetric_eigenvalues().min());
            }
        }
        Ok(lo)
    }

    /// `Δφ = ∂_yφ · y`; zero when the Liouville section is tangent to `ℳ`.
    pub fn liouville_defect(&self, x: &Vector, y: &Vector) -> Result<Vector> {
        Ok(self.constraint_jet(x, y)?.dy * y)
    }

    pub fn inverse_hessian(&self, x: &Vector, y: &Vector) -> Result<Matrix> {
        inverse(&self.lagrangian.hessian_w(x, y)?, TOL_DET)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebroid::{MatrixField, Structure};
    use crate::constrained_linear::{AdaptedFrame, LinearNHSystem};
    use crate::lagrangian::{mechanical_lagrangian, MetricField};

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn rigid(i: [f64; 3]) -> LagrangianField {
        let chart = AlgebroidChart::lie_algebra("so(3)", Structure::so3());
        mechanical_lagrangian(
            chart,
            MetricField::new(MatrixField::constant(Matrix::from_diagonal(&v(&i)))),
        )
    }

    #[test]
    fn linear_constraint_agrees_with_linear_module() {
        let lf = rigid([1.0, 2.0, 3.0]);
        let nl = NonlinearNHSystem::new(lf.clone(), vec![ScalarField::new(0, 3, |_, y| y[2])]).unwrap();
        let lin = LinearNHSystem::new(lf, AdaptedFrame::identity(3, 2)).unwrap();
        let (x, y) = (v(&[]), v(&[0.5, -1.2, 0.0]));
        let a = nl.solve_ld(&x, &y).unwrap();
        let b = lin.solve_ld(&x, &y).unwrap();
        assert!((a.ydot - b.ydot).amax() < 1e-9);
        // Chetaev multipliers enter with the opposite sign to the reaction components
        assert!((a.lambda + b.lambda).amax() < 1e-9);
    }

    #[test]
    fn virtual_displacements_for_coordinate_constraint() {
        let nl = NonlinearNHSystem::new(rigid([1.0, 1.0, 1.0]), vec![ScalarField::new(0, 3, |_, y| y[0])])
            .unwrap();
        let k = nl.virtual_displacements(&v(&[]), &v(&[0.0, 1.0, 2.0])).unwrap();
        assert_eq!(k.ncols(), 2);
        assert!(k.row(0).amax() < 1e-12);
    }

    #[test]
    fn solution_is_tangent() {
        let nl = NonlinearNHSystem::new(
            rigid([1.0, 2.0, 3.0]),
            vec![ScalarField::new(0, 3, |_, y| y[0] * y[0] + y[1] * y[1] - 1.0)],
        )
        .unwrap();
        let y = v(&[0.6, 0.8, 0.3]);
        let z = nl.constrained_section(&v(&[]), &y).unwrap();
        assert!(nl.constraint_derivative(&z).unwrap().amax() < 1e-8);
    }

    #[test]
    fn projection_returns_to_constraint() {
        let nl = NonlinearNHSystem::new(
            rigid([1.0, 2.0, 3.0]),
            vec![ScalarField::new(0, 3, |_, y| y.norm_squared() - 1.0)],
        )
        .unwrap();
        let y = nl
            .project_fiber(&v(&[]), &v(&[1.1, 0.2, 0.0]), 1e-12, 20)
            .unwrap();
        assert!((y.norm() - 1.0).abs() < 1e-12);
    }
}
