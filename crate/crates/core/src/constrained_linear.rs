//! Linearly constrained systems in an adapted frame.
//!
//! The frame `B(x)` has columns `e_α`; the first `r` span the constraint
//! subbundle `D`, so the constraints read `ỹ^A = 0` for `ỹ = B⁻¹ y`.
//! Public entry points take states in the original basis; prolongation
//! vectors returned by the route functions live in the adapted basis.

use crate::algebroid::{AlgebroidChart, MatrixField, ProlongationVector, Structure};
use crate::error::{Error, Result};
use crate::lagrangian::{LagrangianField, PhaseData};
use crate::numerics::{
    inverse, nullspace, solve_dense, solve_dense_multi, FdConfig, Matrix, Vector, TOL_DET,
};

/// Tolerance below which `ỹ^A` is snapped to zero.
pub const ON_CONSTRAINT_TOL: f64 = 1e-9;

/// Frame whose first `r` columns span `D`.
#[derive(Clone, Debug)]
pub struct AdaptedFrame {
    pub b: MatrixField,
    pub r: usize,
}

impl AdaptedFrame {
    pub fn new(b: MatrixField, r: usize) -> Self {
        assert_eq!(b.rows, b.cols, "frame must be square");
        assert!(r <= b.rows, "rank of D exceeds the fiber rank");
        Self { b, r }
    }

    pub fn identity(m: usize, r: usize) -> Self {
        Self::new(MatrixField::identity(m), r)
    }

    /// Frame from `s` annihilating covectors (rows of an s×m field).
    ///
    /// The kernel basis comes from a pointwise SVD and may jump between
    /// nearby points; prefer an analytic frame for integration.
    pub fn from_annihilators(forms: MatrixField) -> Self {
        let (s, m) = (forms.rows, forms.cols);
        let b = MatrixField::new(m, m, move |x| {
            let a = forms.at(x);
            let k = nullspace(&a, 1e-12);
            let mut out = Matrix::zeros(m, m);
            if k.ncols() == m - s {
                out.view_mut((0, 0), (m, m - s)).copy_from(&k);
                out.view_mut((0, m - s), (m, s)).copy_from(&a.transpose());
            } else {
                out.fill(f64::NAN);
            }
            out
        });
        Self::new(b, m - s)
    }

    pub fn m(&self) -> usize {
        self.b.rows
    }

    pub fn s(&self) -> usize {
        self.m() - self.r
    }
}

/// Chart expressed in the frame basis: `ρ̃ = ρB`, `C̃` from frame brackets.
pub fn adapted_chart(chart: &AlgebroidChart, frame: &AdaptedFrame, cfg: FdConfig) -> AlgebroidChart {
    let m = chart.m;
    let (rho_f, b_f) = (chart.anchor_field().clone(), frame.b.clone());
    let anchor = rho_f.mul(&b_f);
    let ch = chart.clone();
    let bf = frame.b.clone();
    let structure = move |x: &Vector| -> Structure {
        let mut out = Structure::zeros(m);
        let b = bf.at(x);
        let (Ok(binv), Ok(db)) = (inverse(&b, TOL_DET), bf.derivatives(x, &cfg)) else {
            return out.scaled(f64::NAN);
        };
        let rho = ch.anchor(x);
        let c = ch.structure(x);
        let rb = &rho * &b;
        for a in 0..m {
            for bb in (a + 1)..m {
                let (ea, eb) = (b.column(a).into_owned(), b.column(bb).into_owned());
                let mut br = c.apply(&ea, &eb);
                for (i, dbi) in db.iter().enumerate() {
                    br += dbi.column(bb) * rb[(i, a)] - dbi.column(a) * rb[(i, bb)];
                }
                let coef = &binv * br;
                for g in 0..m {
                    out.set_bracket(a, bb, g, coef[g]);
                }
            }
        }
        out
    };
    let mut adapted = AlgebroidChart::new(format!("{} (adapted)", chart.name), anchor, structure);
    adapted.base_labels = chart.base_labels.clone();
    adapted.fiber_labels = (0..m).map(|i| format!("e{}", i + 1)).collect();
    adapted
}

/// Lagrange-d'Alembert solution at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct LdSolution {
    pub xdot: Vector,
    /// Acceleration in the original basis.
    pub ydot: Vector,
    /// Acceleration in the adapted basis; the last `s` entries vanish.
    pub ydot_adapted: Vector,
    /// Constraint-force components on `e^A`.
    pub lambda: Vector,
}

/// Coefficients `Q^a_A` and the projector `Q = Z_A ⊗ 𝒱^A` on stacked vectors.
#[derive(Debug, Clone)]
pub struct ProjectorQ {
    /// r×s matrix with entries `Q^a_A`.
    pub coeffs: Matrix,
    /// 2m×2m matrix acting on `(comp_x, comp_v)`.
    pub matrix: Matrix,
}

/// `Q̄ = Z_A ⊗ 𝒱^A + Y_A ⊗ 𝒳^A` with its basis.
#[derive(Debug, Clone)]
pub struct ProjectorPbar {
    /// Columns `Y_A` followed by `Z_A`, stacked components.
    pub basis: Matrix,
    /// 2m×2m matrix of `Q̄`.
    pub q_bar: Matrix,
}

impl ProjectorPbar {
    pub fn p_bar(&self) -> Matrix {
        Matrix::identity(self.q_bar.nrows(), self.q_bar.ncols()) - &self.q_bar
    }
}

/// Lagrangian with linear constraints given by an adapted frame.
#[derive(Clone, Debug)]
pub struct LinearNHSystem {
    chart: AlgebroidChart,
    lagrangian: LagrangianField,
    frame: AdaptedFrame,
    adapted: AlgebroidChart,
    adapted_lagrangian: LagrangianField,
}

impl LinearNHSystem {
    pub fn new(lagrangian: LagrangianField, frame: AdaptedFrame) -> Result<Self> {
        let chart = lagrangian.chart().clone();
        if frame.m() != chart.m {
            return Err(Error::DimensionMismatch(format!(
                "frame of rank {} on chart {} with fiber rank {}",
                frame.m(),
                chart.name,
                chart.m
            )));
        }
        let adapted = adapted_chart(&chart, &frame, lagrangian.fd);
        let adapted_lagrangian = lagrangian.pull_back(adapted.clone(), frame.b.clone());
        Ok(Self {
            chart,
            lagrangian,
            frame,
            adapted,
            adapted_lagrangian,
        })
    }

    pub fn chart(&self) -> &AlgebroidChart {
        &self.chart
    }

    pub fn lagrangian(&self) -> &LagrangianField {
        &self.lagrangian
    }

    pub fn frame(&self) -> &AdaptedFrame {
        &self.frame
    }

    pub fn adapted_chart(&self) -> &AlgebroidChart {
        &self.adapted
    }

    pub fn adapted_lagrangian(&self) -> &LagrangianField {
        &self.adapted_lagrangian
    }

    pub fn m(&self) -> usize {
        self.chart.m
    }

    pub fn r(&self) -> usize {
        self.frame.r
    }

    pub fn s(&self) -> usize {
        self.frame.s()
    }

    pub fn to_adapted(&self, x: &Vector, y: &Vector) -> Result<Vector> {
        solve_dense(&self.frame.b.try_at(x)?, y, TOL_DET)
    }

    pub fn from_adapted(&self, x: &Vector, ya: &Vector) -> Result<Vector> {
        Ok(self.frame.b.try_at(x)? * ya)
    }

    /// Largest `|ỹ^A|`.
    pub fn constraint_residual(&self, x: &Vector, y: &Vector) -> Result<f64> {
        let ya = self.to_adapted(x, y)?;
        Ok(ya.rows(self.r(), self.s()).amax())
    }

    /// Adapted coordinates with `ỹ^A` snapped to zero within `tol`.
    pub fn adapted_on_constraint(&self, x: &Vector, y: &Vector, tol: f64) -> Result<Vector> {
        let mut ya = self.to_adapted(x, y)?;
        let residual = ya.rows(self.r(), self.s()).amax();
        if residual > tol {
            return Err(Error::OffConstraint { residual });
        }
        ya.rows_mut(self.r(), self.s()).fill(0.0);
        Ok(ya)
    }

    /// Phase data of the adapted Lagrangian at an on-constraint state.
    pub fn phase(&self, x: &Vector, y: &Vector) -> Result<PhaseData> {
        let ya = self.adapted_on_constraint(x, y, ON_CONSTRAINT_TOL)?;
        self.adapted_lagrangian.phase(x, &ya)
    }

    /// Regularity matrix `C_ab = W_ab` at `ỹ^A = 0`.
    pub fn regularity_matrix(&self, x: &Vector, y: &Vector) -> Result<Matrix> {
        let p = self.phase(x, y)?;
        Ok(p.jet.w.view((0, 0), (self.r(), self.r())).into_owned())
    }

    fn solve_regular(&self, c: &Matrix, rhs: &Matrix) -> Result<Matrix> {
        solve_dense_multi(c, rhs, TOL_DET)
            .map_err(|e| Error::SingularConstrainedSystem(format!("regularity matrix C_ab: {e}")))
    }

    fn solve_phase(&self, p: &PhaseData) -> Result<(Vector, Vector)> {
        let (r, s) = (self.r(), self.s());
        let c = p.jet.w.view((0, 0), (r, r)).into_owned();
        let b = p.force_rhs();
        let br = Matrix::from_column_slice(r, 1, b.rows(0, r).as_slice());
        let fr = self.solve_regular(&c, &br)?;
        let mut f = Vector::zeros(r + s);
        f.rows_mut(0, r).copy_from(&fr.column(0));
        let lambda = (&p.jet.w * &f - b).rows(r, s).into_owned();
        Ok((f, lambda))
    }

    /// Lagrange-d'Alembert solve in the adapted frame.
    pub fn solve_ld(&self, x: &Vector, y: &Vector) -> Result<LdSolution> {
        let ya = self.adapted_on_constraint(x, y, ON_CONSTRAINT_TOL)?;
        self.solve_ld_adapted(x, &ya)
    }

    /// As [`solve_ld`](Self::solve_ld) from adapted coordinates, which must satisfy `ỹ^A = 0`.
    pub fn solve_ld_adapted(&self, x: &Vector, ya: &Vector) -> Result<LdSolution> {
        let p = self.adapted_lagrangian.phase(x, ya)?;
        let (f, lambda) = self.solve_phase(&p)?;
        let xdot = p.xdot();
        let b = self.frame.b.try_at(x)?;
        let db = self.frame.b.derivatives(x, &self.lagrangian.fd)?;
        let mut ydot = &b * &f;
        for (i, dbi) in db.iter().enumerate() {
            ydot += dbi * ya * xdot[i];
        }
        Ok(LdSolution {
            xdot,
            ydot,
            ydot_adapted: f,
            lambda,
        })
    }

    /// Constrained dynamics as an adapted-basis prolongation vector.
    pub fn constrained_section(&self, x: &Vector, y: &Vector) -> Result<ProlongationVector> {
        let p = self.phase(x, y)?;
        let (f, _) = self.solve_phase(&p)?;
        Ok(ProlongationVector::new(x.clone(), p.y.clone(), p.y.clone(), f))
    }

    fn projector_q_phase(&self, p: &PhaseData) -> Result<ProjectorQ> {
        let (m, r, s) = (self.m(), self.r(), self.s());
        let w = &p.jet.w;
        let c = w.view((0, 0), (r, r)).into_owned();
        let w_ab = w.view((0, r), (r, s)).into_owned();
        let coeffs = self.solve_regular(&c, &w_ab)?;
        let mut matrix = Matrix::zeros(2 * m, 2 * m);
        for a_cap in 0..s {
            let col = m + r + a_cap;
            matrix[(col, col)] = 1.0;
            for a in 0..r {
                matrix[(m + a, col)] = -coeffs[(a, a_cap)];
            }
        }
        Ok(ProjectorQ { coeffs, matrix })
    }

    /// Projector `Q` onto the Chetaev force directions `Z_A = 𝒱_A − Q^a_A 𝒱_a`.
    pub fn projector_q(&self, x: &Vector, y: &Vector) -> Result<ProjectorQ> {
        self.projector_q_phase(&self.phase(x, y)?)
    }

    /// `P(Γ_L)` restricted to `D`.
    pub fn constrained_dynamics_p(&self, x: &Vector, y: &Vector) -> Result<ProlongationVector> {
        let p = self.phase(x, y)?;
        let gamma = p.free_section()?;
        let q = self.projector_q_phase(&p)?;
        let z = gamma.stacked();
        let out = &z - &q.matrix * &z;
        Ok(ProlongationVector::from_stacked(&p.x, &p.y, &out))
    }

    fn projector_pbar_phase(&self, p: &PhaseData) -> Result<ProjectorPbar> {
        let (m, r, s) = (self.m(), self.r(), self.s());
        let q = self.projector_q_phase(p)?;
        let mxx = p.cartan_xx();
        let c = p.jet.w.view((0, 0), (r, r)).into_owned();
        // N_{bA} = M_{Ab} − M_{ab} Q^a_A
        let mut n = Matrix::zeros(r, s);
        for b in 0..r {
            for a_cap in 0..s {
                let mut v = mxx[(r + a_cap, b)];
                for a in 0..r {
                    v -= mxx[(a, b)] * q.coeffs[(a, a_cap)];
                }
                n[(b, a_cap)] = v;
            }
        }
        let v_coef = self.solve_regular(&c, &n)?;
        let mut basis = Matrix::zeros(2 * m, 2 * s);
        let mut q_bar = q.matrix.clone();
        for a_cap in 0..s {
            let mut y_col = Vector::zeros(2 * m);
            y_col[r + a_cap] = 1.0;
            for a in 0..r {
                y_col[a] = -q.coeffs[(a, a_cap)];
                y_col[m + a] = v_coef[(a, a_cap)];
            }
            basis.set_column(a_cap, &y_col);
            basis.set_column(s + a_cap, &q.matrix.column(m + r + a_cap));
            q_bar.set_column(r + a_cap, &y_col);
        }
        Ok(ProjectorPbar { basis, q_bar })
    }

    /// Symplectic projector `P̄` onto `𝒯^D D` along its `ω_L`-orthogonal complement.
    pub fn projector_pbar(&self, x: &Vector, y: &Vector) -> Result<ProjectorPbar> {
        self.projector_pbar_phase(&self.phase(x, y)?)
    }

    /// `P̄` assembled from a basis of `𝒯^D D` and `ω_L`.
    pub fn projector_pbar_generic(&self, x: &Vector, y: &Vector) -> Result<Matrix> {
        let p = self.phase(x, y)?;
        let basis = self.tdd_basis();
        symplectic_projector(&p.cartan(), &basis)
    }

    /// `P̄(Γ_L)` restricted to `D`.
    pub fn constrained_dynamics_pbar(&self, x: &Vector, y: &Vector) -> Result<ProlongationVector> {
        let p = self.phase(x, y)?;
        let gamma = p.free_section()?.stacked();
        let pb = self.projector_pbar_phase(&p)?;
        let out = &gamma - &pb.q_bar * &gamma;
        Ok(ProlongationVector::from_stacked(&p.x, &p.y, &out))
    }

    /// Columns `{𝒳_a, 𝒱_a}` spanning `𝒯^D D` in stacked components.
    pub fn tdd_basis(&self) -> Matrix {
        let (m, r) = (self.m(), self.r());
        let mut basis = Matrix::zeros(2 * m, 2 * r);
        for a in 0..r {
            basis[(a, a)] = 1.0;
            basis[(m + a, r + a)] = 1.0;
        }
        basis
    }

    /// Restriction of `ω_L` to `𝒯^D D`.
    pub fn restricted_form(&self, x: &Vector, y: &Vector) -> Result<Matrix> {
        let p = self.phase(x, y)?;
        let basis = self.tdd_basis();
        Ok(basis.transpose() * p.cartan() * basis)
    }

    /// Solves `i_Γ ω^{L,D} = dE_L` on `𝒯^D D`.
    pub fn constrained_dynamics_distributional(&self, x: &Vector, y: &Vector) -> Result<ProlongationVector> {
        let p = self.phase(x, y)?;
        let basis = self.tdd_basis();
        let omega = basis.transpose() * p.cartan() * &basis;
        let de = basis.transpose() * p.energy_differential();
        let z = solve_dense(&(-omega), &de, TOL_DET)
            .map_err(|e| Error::SingularConstrainedSystem(format!("restricted Cartan form: {e}")))?;
        Ok(ProlongationVector::from_stacked(&p.x, &p.y, &(basis * z)))
    }

    /// Smallest eigenvalue of `C_ab` over the given on-constraint states.
    pub fn certify_regular(&self, states: &[(Vector, Vector)]) -> Result<f64> {
        let mut lo = f64::INFINITY;
        for (x, y) in states {
            let c = self.regularity_matrix(x, y)?;
            let sym = (&c + c.transpose()) * 0.5;
            lo = lo.min(sym.symmetric_eigenvalues().min());
        }
        if self.r() == 0 {
            return Ok(f64::INFINITY);
        }
        Ok(lo)
    }

    /// Energy of the original Lagrangian.
    pub fn energy(&self, x: &Vector, y: &Vector) -> Result<f64> {
        self.lagrangian.energy(x, y)
    }
}

/// `P̄ = B (Bᵀ Ω B)⁻¹ Bᵀ Ω` for the subspace spanned by the columns of `basis`.
pub fn symplectic_projector(omega: &Matrix, basis: &Matrix) -> Result<Matrix> {
    let restricted = basis.transpose() * omega * basis;
    let rhs = basis.transpose() * omega;
    let sol = solve_dense_multi(&restricted, &rhs, TOL_DET)
        .map_err(|e| Error::SingularConstrainedSystem(format!("restricted Cartan form: {e}")))?;
    Ok(basis * sol)
}

/// Vertical endomorphism `S(𝒳_α) = 𝒱_α`, `S(𝒱_α) = 0` on stacked components.
pub fn vertical_endomorphism(m: usize) -> Matrix {
    let mut s = Matrix::zeros(2 * m, 2 * m);
    for a in 0..m {
        s[(m + a, a)] = 1.0;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::{mechanical_lagrangian, MetricField};

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn suslov(i: [f64; 3]) -> LinearNHSystem {
        let chart = AlgebroidChart::lie_algebra("so(3)", Structure::so3());
        let lf = mechanical_lagrangian(
            chart,
            MetricField::new(MatrixField::constant(Matrix::from_diagonal(&v(&i)))),
        );
        LinearNHSystem::new(lf, AdaptedFrame::identity(3, 2)).unwrap()
    }

    #[test]
    fn suslov_matches_eliminated_form() {
        let inertia = [1.0, 2.0, 3.5];
        let sys = suslov(inertia);
        let w = v(&[0.7, -0.4, 0.0]);
        let sol = sys.solve_ld(&v(&[]), &w).unwrap();
        // Γ = e₃ is an eigenvector of 𝕀, so the in-plane Euler equations apply
        let iw = v(&[inertia[0] * w[0], inertia[1] * w[1], 0.0]);
        let rhs = iw.cross(&w);
        let expected = v(&[rhs[0] / inertia[0], rhs[1] / inertia[1], 0.0]);
        assert!((sol.ydot - expected).amax() < 1e-12);
        assert_eq!(sol.ydot_adapted[2], 0.0);
    }

    #[test]
    fn routes_agree_on_suslov() {
        let sys = suslov([1.0, 2.0, 3.5]);
        let (x, y) = (v(&[]), v(&[0.3, 1.1, 0.0]));
        let ld = sys.constrained_section(&x, &y).unwrap();
        for other in [
            sys.constrained_dynamics_p(&x, &y).unwrap(),
            sys.constrained_dynamics_pbar(&x, &y).unwrap(),
            sys.constrained_dynamics_distributional(&x, &y).unwrap(),
        ] {
            assert!(ld.distance(&other) < 1e-12);
        }
    }

    #[test]
    fn off_constraint_is_rejected() {
        let sys = suslov([1.0, 2.0, 3.0]);
        let err = sys.solve_ld(&v(&[]), &v(&[1.0, 0.0, 1e-6])).unwrap_err();
        assert!(matches!(err, Error::OffConstraint { .. }));
    }

    #[test]
    fn pbar_matches_generic_formula() {
        let chart = AlgebroidChart::lie_algebra("so(3)", Structure::so3());
        let g = Matrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 1.0]);
        let lf = mechanical_lagrangian(chart, MetricField::new(MatrixField::constant(g)));
        let sys = LinearNHSystem::new(lf, AdaptedFrame::identity(3, 2)).unwrap();
        let (x, y) = (v(&[]), v(&[0.4, -0.9, 0.0]));
        let explicit = sys.projector_pbar(&x, &y).unwrap().p_bar();
        let generic = sys.projector_pbar_generic(&x, &y).unwrap();
        assert!((explicit - generic).amax() < 1e-12);
    }
}
