//! Algebroid morphisms, reduction checks, Chaplygin reduction and momentum maps.
//!
//! A morphism stores its fiber action on vectors, `y' = Φ(x) y`. Its transpose
//! is the matrix that pulls back dual bases.

use std::fmt;
use std::sync::Arc;

use crate::algebroid::{
    bracket_sections, complete_lift, AlgebroidChart, MatrixField, ProlongationVector, SectionField,
};
use crate::bracket::{nh_bracket, Observable};
use crate::constrained_linear::LinearNHSystem;
use crate::error::{Error, Result};
use crate::integrator::{integrate, IntegratorConfig, Trajectory};
use crate::lagrangian::LagrangianField;
use crate::model::System;
use crate::numerics::{
    fd_derivative_matrix, inverse, rank, sample_derivative, solve_dense, FdConfig, Matrix, ScalarField,
    Vector, TOL_DET,
};

type BaseMapFn = dyn Fn(&Vector) -> Vector + Send + Sync;

/// Fiberwise linear bundle map between two charts.
#[derive(Clone)]
pub struct MorphismSpec {
    pub source: AlgebroidChart,
    pub target: AlgebroidChart,
    base_map: Arc<BaseMapFn>,
    pub fiber_map: MatrixField,
    pub fd: FdConfig,
}

impl fmt::Debug for MorphismSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MorphismSpec({} -> {})", self.source.name, self.target.name)
    }
}

/// Largest residual of a morphism identity over the sampled points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorphismReport {
    pub max_residual: f64,
    pub pass: bool,
}

impl MorphismSpec {
    pub fn new(
        source: AlgebroidChart,
        target: AlgebroidChart,
        base_map: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        fiber_map: MatrixField,
    ) -> Result<Self> {
        if fiber_map.rows != target.m || fiber_map.cols != source.m {
            return Err(Error::DimensionMismatch(format!(
                "fiber map {}x{} between fiber ranks {} and {}",
                fiber_map.rows, fiber_map.cols, source.m, target.m
            )));
        }
        Ok(Self {
            source,
            target,
            base_map: Arc::new(base_map),
            fiber_map,
            fd: FdConfig::default(),
        })
    }

    pub fn identity(chart: &AlgebroidChart) -> Self {
        Self {
            source: chart.clone(),
            target: chart.clone(),
            base_map: Arc::new(|x: &Vector| x.clone()),
            fiber_map: MatrixField::identity(chart.m),
            fd: FdConfig::default(),
        }
    }

    pub fn base_map(&self, x: &Vector) -> Vector {
        (self.base_map)(x)
    }

    pub fn map_state(&self, x: &Vector, y: &Vector) -> (Vector, Vector) {
        (self.base_map(x), self.fiber_map.at(x) * y)
    }

    /// `∂φ^i/∂x^j`, n'×n.
    pub fn base_jacobian(&self, x: &Vector) -> Result<Matrix> {
        let n = self.source.n;
        let np = self.target.n;
        let mut jac = Matrix::zeros(np, n);
        for j in 0..n {
            let col = fd_derivative_matrix(
                |t| {
                    let mut xt = x.clone();
                    xt[j] += t;
                    let v = self.base_map(&xt);
                    Ok(Matrix::from_column_slice(np, 1, v.as_slice()))
                },
                self.fd.step_base,
                self.fd.scheme,
            )?;
            jac.set_column(j, &col.column(0));
        }
        Ok(jac)
    }

    /// `Dφ · ρ = ρ'(φ(x)) · Φ`.
    pub fn check_admissible(&self, points: &[Vector], tol: f64) -> Result<MorphismReport> {
        let mut worst = 0.0f64;
        for x in points {
            let lhs = self.base_jacobian(x)? * self.source.anchor(x);
            let rhs = self.target.anchor(&self.base_map(x)) * self.fiber_map.try_at(x)?;
            worst = worst.max((lhs - rhs).amax());
        }
        finite_report(worst, tol)
    }

    /// Compatibility of `Φ` with the brackets.
    pub fn check_morphism(&self, points: &[Vector], tol: f64) -> Result<MorphismReport> {
        let (m, mp) = (self.source.m, self.target.m);
        let mut worst = 0.0f64;
        for x in points {
            let phi = self.fiber_map.try_at(x)?;
            let dphi = self.fiber_map.derivatives(x, &self.fd)?;
            let rho = self.source.anchor(x);
            let c = self.source.structure(x);
            let cp = self.target.structure(&self.base_map(x));
            for a in 0..m {
                for d in 0..m {
                    let (ea, ed) = (phi.column(a).into_owned(), phi.column(d).into_owned());
                    let mut rhs = cp.apply(&ea, &ed);
                    for (i, dpi) in dphi.iter().enumerate() {
                        rhs += dpi.column(d) * rho[(i, a)] - dpi.column(a) * rho[(i, d)];
                    }
                    let mut lhs = Vector::zeros(mp);
                    for g in 0..m {
                        lhs += phi.column(g) * c.get(g, a, d);
                    }
                    worst = worst.max((lhs - rhs).amax());
                }
            }
        }
        finite_report(worst, tol)
    }

    /// Matrix of `𝒯^Φ Φ` on stacked components at `(x, y)`.
    pub fn prolongation_matrix(&self, x: &Vector, y: &Vector) -> Result<Matrix> {
        let (m, mp) = (self.source.m, self.target.m);
        let phi = self.fiber_map.try_at(x)?;
        let dphi = self.fiber_map.derivatives(x, &self.fd)?;
        let rho = self.source.anchor(x);
        let mut t = Matrix::zeros(2 * mp, 2 * m);
        t.view_mut((0, 0), (mp, m)).copy_from(&phi);
        t.view_mut((mp, m), (mp, m)).copy_from(&phi);
        for b in 0..m {
            let mut col = Vector::zeros(mp);
            for (i, dpi) in dphi.iter().enumerate() {
                col += dpi * y * rho[(i, b)];
            }
            t.view_mut((mp, b), (mp, 1)).copy_from(&col);
        }
        Ok(t)
    }

    pub fn push_prolongation(&self, z: &ProlongationVector) -> Result<ProlongationVector> {
        let t = self.prolongation_matrix(&z.x, &z.y)?;
        let (xp, yp) = self.map_state(&z.x, &z.y);
        Ok(ProlongationVector::from_stacked(&xp, &yp, &(t * z.stacked())))
    }

    /// `self` followed by `next`.
    pub fn compose(&self, next: &MorphismSpec) -> Result<MorphismSpec> {
        if self.target.name != next.source.name
            || self.target.n != next.source.n
            || self.target.m != next.source.m
        {
            return Err(Error::ChartMismatch(format!(
                "cannot compose {} -> {} with {} -> {}",
                self.source.name, self.target.name, next.source.name, next.target.name
            )));
        }
        let (f1, f2) = (self.base_map.clone(), next.base_map.clone());
        let (p1, p2) = (self.fiber_map.clone(), next.fiber_map.clone());
        let f1b = f1.clone();
        let fiber = MatrixField::new(p2.rows, p1.cols, move |x| p2.at(&f1b(x)) * p1.at(x));
        Ok(MorphismSpec {
            source: self.source.clone(),
            target: next.target.clone(),
            base_map: Arc::new(move |x| f2(&f1(x))),
            fiber_map: fiber,
            fd: self.fd,
        })
    }

    /// Pulls back an observable on the target.
    pub fn pull_back_observable(&self, target_sys: &System, f: &Observable) -> Observable {
        let (mor, tsys, f) = (self.clone(), target_sys.clone(), f.clone());
        Observable::covector(format!("{}∘Φ", f.label), move |sys, p| {
            if matches!(sys, System::Linear(_)) {
                return Err(Error::PreconditionFailed(
                    "observable pull-back needs a source without an adapted frame".into(),
                ));
            }
            let (xp, yp) = mor.map_state(&p.x, &p.y);
            let pt = tsys.working_phase(&xp, &yp)?;
            let df = f.differential(&tsys, &pt)?;
            Ok(mor.prolongation_matrix(&p.x, &p.y)?.transpose() * df)
        })
    }
}

fn finite_report(worst: f64, tol: f64) -> Result<MorphismReport> {
    if !worst.is_finite() {
        return Err(Error::NonFiniteEvaluation("morphism residual".into()));
    }
    Ok(MorphismReport {
        max_residual: worst,
        pass: worst <= tol,
    })
}

/// Outcome of integrating a system and its reduction side by side.
#[derive(Debug, Clone)]
pub struct ReductionReport {
    /// `max_t ‖Φ(a(t)) − a'(t)‖_∞`
    pub deviation: f64,
    /// `max_t |E'(Φ(a(t))) − E(a(t))|`
    pub energy_deviation: f64,
    /// `max_t |L'(Φ(a(t))) − L(a(t))|`
    pub lagrangian_mismatch: f64,
    pub source: Trajectory,
    pub target: Trajectory,
}

/// Checks the preconditions of reduction at one state.
pub fn check_reduction_preconditions(
    source: &System,
    target: &System,
    mor: &MorphismSpec,
    x: &Vector,
    y: &Vector,
) -> Result<()> {
    let phi = mor.fiber_map.try_at(x)?;
    if rank(&phi, 1e-10) != mor.target.m {
        return Err(Error::PreconditionFailed(format!(
            "fiber map is not surjective at {:?}",
            x.as_slice()
        )));
    }
    let (xp, yp) = mor.map_state(x, y);
    let dl = (source.lagrangian().value(x, y)? - target.lagrangian().value(&xp, &yp)?).abs();
    if dl > 1e-9 {
        return Err(Error::PreconditionFailed(format!(
            "Lagrangians differ by {dl:.3e} under the morphism"
        )));
    }
    let dc = target.constraint_residual(&xp, &yp)?;
    if dc > 1e-8 {
        return Err(Error::PreconditionFailed(format!(
            "image of the constraint set misses the target constraint by {dc:.3e}"
        )));
    }
    Ok(())
}

/// Integrates both systems and compares the pushed source trajectory with the target one.
pub fn verify_reduction(
    source: &System,
    target: &System,
    mor: &MorphismSpec,
    x0: &Vector,
    y0: &Vector,
    cfg: &IntegratorConfig,
) -> Result<ReductionReport> {
    check_reduction_preconditions(source, target, mor, x0, y0)?;
    let (xp0, yp0) = mor.map_state(x0, y0);
    let tr_s = integrate(source, x0, y0, cfg, &[])?;
    let tr_t = integrate(target, &xp0, &yp0, cfg, &[])?;
    let mut deviation = 0.0f64;
    let mut energy_deviation = 0.0f64;
    let mut lagrangian_mismatch = 0.0f64;
    for k in 0..tr_s.len().min(tr_t.len()) {
        let (x, y) = (&tr_s.xs[k], &tr_s.ys[k]);
        let (xp, yp) = mor.map_state(x, y);
        deviation = deviation
            .max((&xp - &tr_t.xs[k]).amax())
            .max((&yp - &tr_t.ys[k]).amax());
        energy_deviation = energy_deviation.max((target.energy(&xp, &yp)? - source.energy(x, y)?).abs());
        lagrangian_mismatch = lagrangian_mismatch
            .max((target.lagrangian().value(&xp, &yp)? - source.lagrangian().value(x, y)?).abs());
    }
    Ok(ReductionReport {
        deviation,
        energy_deviation,
        lagrangian_mismatch,
        source: tr_s,
        target: tr_t,
    })
}

/// `max |{f'∘Φ, g'∘Φ} − {f', g'}'∘Φ|` over states.
pub fn verify_bracket_morphism(
    source: &System,
    target: &System,
    mor: &MorphismSpec,
    pairs: &[(Observable, Observable)],
    states: &[(Vector, Vector)],
) -> Result<f64> {
    let mut worst = 0.0f64;
    for (x, y) in states {
        check_reduction_preconditions(source, target, mor, x, y)?;
        let (xp, yp) = mor.map_state(x, y);
        for (f, g) in pairs {
            let lhs = nh_bracket(
                source,
                &mor.pull_back_observable(target, f),
                &mor.pull_back_observable(target, g),
                x,
                y,
            )?;
            let rhs = nh_bracket(target, f, g, &xp, &yp)?;
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}

/// Reduction of a Chaplygin-type system to the tangent bundle of the base.
#[derive(Clone, Debug)]
pub struct ChaplyginReduction {
    source: LinearNHSystem,
    /// Horizontal lift `h(∂_i)` as columns, m×n.
    pub horizontal: MatrixField,
    pub reduced: LagrangianField,
}

impl ChaplyginReduction {
    pub fn new(sys: &LinearNHSystem) -> Result<Self> {
        let chart = sys.chart().clone();
        let (n, r) = (chart.n, sys.r());
        if r != n {
            return Err(Error::NotChaplyginType(format!(
                "rank of D is {r}, base dimension is {n}"
            )));
        }
        let (frame, anchor) = (sys.frame().b.clone(), chart.anchor_field().clone());
        let horizontal = MatrixField::new(chart.m, n, move |x| {
            let bd = frame.at(x).columns(0, r).into_owned();
            let block = anchor.at(x) * &bd;
            match inverse(&block, TOL_DET) {
                Ok(inv) => bd * inv,
                Err(_) => Matrix::from_element(bd.nrows(), r, f64::NAN),
            }
        });
        let reduced = sys.lagrangian().pull_back(
            AlgebroidChart::tangent_bundle(n).with_labels_from(&chart),
            horizontal.clone(),
        );
        Ok(Self {
            source: sys.clone(),
            horizontal,
            reduced,
        })
    }

    /// Fails with `NotChaplyginType` where `ρ|_D` is not invertible.
    pub fn check_at(&self, x: &Vector) -> Result<()> {
        let h = self.horizontal.at(x);
        if h.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NotChaplyginType(format!(
                "anchor restricted to D is singular at {:?}",
                x.as_slice()
            )))
        }
    }

    pub fn source(&self) -> &LinearNHSystem {
        &self.source
    }

    /// Curvature `K(∂_i, ∂_j) = [h∂_i, h∂_j]` in the original fiber basis.
    pub fn curvature(&self, x: &Vector) -> Result<Vec<Vec<Vector>>> {
        self.check_at(x)?;
        let n = self.source.chart().n;
        let cfg = self.source.lagrangian().fd;
        let cols: Vec<SectionField> = (0..n)
            .map(|i| {
                let h = self.horizontal.clone();
                SectionField::new(self.source.m(), move |x| h.at(x).column(i).into_owned())
            })
            .collect();
        let mut out = vec![vec![Vector::zeros(self.source.m()); n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let k = bracket_sections(self.source.chart(), &cols[i], &cols[j], x, &cfg)?;
                out[j][i] = -&k;
                out[i][j] = k;
            }
        }
        Ok(out)
    }

    /// Gyroscopic 1-form `⟨J, K(v, ·)⟩` on `TM`.
    pub fn jk_form(&self, x: &Vector, v: &Vector) -> Result<Vector> {
        let n = v.len();
        let y = self.horizontal.at(x) * v;
        let dy = self.source.lagrangian().jet(x, &y)?.dy;
        let k = self.curvature(x)?;
        Ok(Vector::from_fn(n, |j, _| {
            (0..n).map(|i| v[i] * dy.dot(&k[i][j])).sum()
        }))
    }

    /// Reduced vector field `(ẋ, v̇)` with `W̄ v̇ = b̄ + JK`.
    pub fn vector_field(&self, x: &Vector, v: &Vector) -> Result<(Vector, Vector)> {
        let p = self.reduced.phase(x, v)?;
        let jk = self.jk_form(x, v)?;
        Ok((v.clone(), p.forced_accel(&jk)?))
    }

    /// Constrained dynamics on `E` at `h(v)` pushed to `TM` through the anchor.
    pub fn pushed_constrained(&self, x: &Vector, v: &Vector) -> Result<Vector> {
        let y = self.horizontal.at(x) * v;
        let sol = self.source.solve_ld(x, &y)?;
        let chart = self.source.chart();
        let drho = chart.anchor_derivatives(x, &self.source.lagrangian().fd)?;
        let mut vdot = chart.anchor(x) * &sol.ydot;
        for (i, d) in drho.iter().enumerate() {
            vdot += d * &y * sol.xdot[i];
        }
        Ok(vdot)
    }
}

trait LabelsFrom {
    fn with_labels_from(self, chart: &AlgebroidChart) -> Self;
}

impl LabelsFrom for AlgebroidChart {
    fn with_labels_from(mut self, chart: &AlgebroidChart) -> Self {
        self.name = format!("T({})", chart.name);
        self.base_labels = chart.base_labels.clone();
        self.fiber_labels = chart.base_labels.iter().map(|l| format!("{l}_dot")).collect();
        self
    }
}

/// Vector bundle map `Ψ: K → E` over the identity, m×k.
#[derive(Clone, Debug)]
pub struct MomentumBundle {
    pub k: usize,
    pub psi: MatrixField,
}

impl MomentumBundle {
    pub fn new(psi: MatrixField) -> Self {
        Self { k: psi.cols, psi }
    }

    /// `Ψ σ` as a section of `E`.
    pub fn image(&self, sigma: &SectionField) -> SectionField {
        let (psi, s) = (self.psi.clone(), sigma.clone());
        SectionField::new(self.psi.rows, move |x| psi.at(x) * s.at(x))
    }
}

/// `J(a) = Ψᵀ ∂L/∂y`.
pub fn momentum(lf: &LagrangianField, mb: &MomentumBundle, x: &Vector, y: &Vector) -> Result<Vector> {
    Ok(mb.psi.try_at(x)?.transpose() * lf.jet(x, y)?.dy)
}

/// `J^σ(a) = ⟨J(a), σ(x)⟩`.
pub fn momentum_scalar(
    lf: &LagrangianField,
    mb: &MomentumBundle,
    sigma: &SectionField,
    x: &Vector,
    y: &Vector,
) -> Result<f64> {
    Ok(momentum(lf, mb, x, y)?.dot(&sigma.at(x)))
}

/// `⟨dL, (Ψσ)^C⟩` at a state.
pub fn momentum_source(
    lf: &LagrangianField,
    mb: &MomentumBundle,
    sigma: &SectionField,
    x: &Vector,
    y: &Vector,
) -> Result<f64> {
    let lift = complete_lift(lf.chart(), &mb.image(sigma), x, y, &lf.fd)?;
    let jet = lf.jet(x, y)?;
    let dx = lf.chart().anchor(x) * &lift.comp_x;
    Ok(jet.dx.dot(&dx) + jet.dy.dot(&lift.comp_v))
}

/// Momentum-equation check along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumReport {
    /// `max |d/dt J^σ − ⟨dL, (Ψσ)^C⟩|`
    pub residual: f64,
    /// `max |J^σ(t) − J^σ(0)|`
    pub drift: f64,
    /// `max |⟨dL, (Ψσ)^C⟩|`
    pub max_source: f64,
}

pub fn momentum_equation_residual(
    sys: &System,
    mb: &MomentumBundle,
    sigma: &SectionField,
    traj: &Trajectory,
) -> Result<MomentumReport> {
    let lf = sys.lagrangian();
    let image = mb.image(sigma);
    if let System::Linear(lin) = sys {
        for x in &traj.xs {
            let ya = solve_dense(&lin.frame().b.try_at(x)?, &image.at(x), TOL_DET)?;
            let residual = ya.rows(lin.r(), lin.s()).amax();
            if residual > 1e-9 {
                return Err(Error::SectionNotInKD { residual });
            }
        }
    }
    let values = traj
        .xs
        .iter()
        .zip(&traj.ys)
        .map(|(x, y)| momentum_scalar(lf, mb, sigma, x, y))
        .collect::<Result<Vec<f64>>>()?;
    let rates = sample_derivative(&values, traj.dt());
    let mut residual = 0.0f64;
    let mut max_source = 0.0f64;
    for k in 0..traj.len() {
        let src = momentum_source(lf, mb, sigma, &traj.xs[k], &traj.ys[k])?;
        max_source = max_source.max(src.abs());
        residual = residual.max((rates[k] - src).abs());
    }
    let j0 = values.first().copied().unwrap_or(0.0);
    let drift = values.iter().fold(0.0f64, |a, v| a.max((v - j0).abs()));
    Ok(MomentumReport {
        residual,
        drift,
        max_source,
    })
}

/// Composition of a function on the target with the morphism.
pub fn pull_back_function(mor: &MorphismSpec, f: &ScalarField) -> ScalarField {
    let (mor, f) = (mor.clone(), f.clone());
    ScalarField::new(mor.source.n, mor.source.m, move |x, y| {
        let (xp, yp) = mor.map_state(x, y);
        f.eval(&xp, &yp)
    })
}
