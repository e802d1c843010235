//! One-chart Lie algebroids: anchor, structure functions, brackets and lifts.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{
    fd_derivative_1d, fd_jacobian_matrix, FdConfig, FdScheme, Matrix, ScalarField, Vector,
};

type MatFn = dyn Fn(&Vector) -> Matrix + Send + Sync;
type MatDerivFn = dyn Fn(&Vector) -> Vec<Matrix> + Send + Sync;

/// Matrix-valued function of a base point, optionally with its partial derivatives.
#[derive(Clone)]
pub struct MatrixField {
    pub rows: usize,
    pub cols: usize,
    eval: Arc<MatFn>,
    deriv: Option<Arc<MatDerivFn>>,
}

impl fmt::Debug for MatrixField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MatrixField({}x{})", self.rows, self.cols)
    }
}

impl MatrixField {
    pub fn new(rows: usize, cols: usize, eval: impl Fn(&Vector) -> Matrix + Send + Sync + 'static) -> Self {
        Self {
            rows,
            cols,
            eval: Arc::new(eval),
            deriv: None,
        }
    }

    pub fn constant(m: Matrix) -> Self {
        let (rows, cols) = m.shape();
        Self::new(rows, cols, move |_| m.clone())
            .with_derivative(move |x| vec![Matrix::zeros(rows, cols); x.len()])
    }

    pub fn identity(k: usize) -> Self {
        Self::constant(Matrix::identity(k, k))
    }

    /// Attach analytic partial derivatives `∂M/∂x^i`.
    pub fn with_derivative(mut self, d: impl Fn(&Vector) -> Vec<Matrix> + Send + Sync + 'static) -> Self {
        self.deriv = Some(Arc::new(d));
        self
    }

    pub fn has_derivative(&self) -> bool {
        self.deriv.is_some()
    }

    pub fn at(&self, x: &Vector) -> Matrix {
        (self.eval)(x)
    }

    pub fn try_at(&self, x: &Vector) -> Result<Matrix> {
        let m = (self.eval)(x);
        if m.iter().all(|v| v.is_finite()) {
            Ok(m)
        } else {
            Err(Error::NonFiniteEvaluation(format!(
                "matrix field at x={:?}",
                x.as_slice()
            )))
        }
    }

    /// Partial derivatives, analytic when available.
    pub fn derivatives(&self, x: &Vector, cfg: &FdConfig) -> Result<Vec<Matrix>> {
        match &self.deriv {
            Some(d) => Ok(d(x)),
            None => fd_jacobian_matrix(|p| self.try_at(p), x, cfg.step_base, cfg.scheme),
        }
    }

    /// Pointwise product `self(x) * other(x)` with product-rule derivative.
    pub fn mul(&self, other: &MatrixField) -> MatrixField {
        let (a, b) = (self.clone(), other.clone());
        let (a2, b2) = (self.clone(), other.clone());
        let out = MatrixField::new(self.rows, other.cols, move |x| a.at(x) * b.at(x));
        if self.has_derivative() && other.has_derivative() {
            out.with_derivative(move |x| {
                let cfg = FdConfig::default();
                let (ma, mb) = (a2.at(x), b2.at(x));
                let da = a2.derivatives(x, &cfg).expect("analytic");
                let db = b2.derivatives(x, &cfg).expect("analytic");
                da.iter()
                    .zip(db.iter())
                    .map(|(dai, dbi)| dai * &mb + &ma * dbi)
                    .collect()
            })
        } else {
            out
        }
    }
}

/// Structure constants `C^γ_{αβ}` of one point, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct Structure {
    pub m: usize,
    data: Vec<f64>,
}

impl Structure {
    pub fn zeros(m: usize) -> Self {
        Self {
            m,
            data: vec![0.0; m * m * m],
        }
    }

    #[inline]
    pub fn get(&self, g: usize, a: usize, b: usize) -> f64 {
        self.data[(g * self.m + a) * self.m + b]
    }

    #[inline]
    pub fn set(&mut self, g: usize, a: usize, b: usize, v: f64) {
        self.data[(g * self.m + a) * self.m + b] = v;
    }

    /// Sets `[e_a, e_b] = v e_g` together with the antisymmetric entry.
    pub fn set_bracket(&mut self, a: usize, b: usize, g: usize, v: f64) {
        self.set(g, a, b, v);
        self.set(g, b, a, -v);
    }

    /// Structure constants of `so(3)` in the cross-product convention `[e_a, e_b] = e_a × e_b`.
    pub fn so3() -> Self {
        let mut c = Structure::zeros(3);
        c.set_bracket(0, 1, 2, 1.0);
        c.set_bracket(1, 2, 0, 1.0);
        c.set_bracket(2, 0, 1, 1.0);
        c
    }

    /// `C(u, v)^γ = C^γ_{αβ} u^α v^β`.
    pub fn apply(&self, u: &Vector, v: &Vector) -> Vector {
        let m = self.m;
        let mut out = Vector::zeros(m);
        for g in 0..m {
            let mut s = 0.0;
            for a in 0..m {
                if u[a] == 0.0 {
                    continue;
                }
                for b in 0..m {
                    s += self.get(g, a, b) * u[a] * v[b];
                }
            }
            out[g] = s;
        }
        out
    }

    /// Largest `|C^γ_{αβ} + C^γ_{βα}|`.
    pub fn antisymmetry_defect(&self) -> f64 {
        let m = self.m;
        let mut d = 0.0f64;
        for g in 0..m {
            for a in 0..m {
                for b in 0..m {
                    d = d.max((self.get(g, a, b) + self.get(g, b, a)).abs());
                }
            }
        }
        d
    }

    /// Raw entries, index `(γ·m + α)·m + β`.
    pub fn entries(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sub(&self, other: &Structure) -> Structure {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Structure { m: self.m, data }
    }

    pub fn scaled(&self, s: f64) -> Structure {
        Structure {
            m: self.m,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }
}

type StructFn = dyn Fn(&Vector) -> Structure + Send + Sync;

/// Lie algebroid described in a single chart.
#[derive(Clone)]
pub struct AlgebroidChart {
    pub name: String,
    pub n: usize,
    pub m: usize,
    anchor: MatrixField,
    structure: Arc<StructFn>,
    pub base_labels: Vec<String>,
    pub fiber_labels: Vec<String>,
}

impl fmt::Debug for AlgebroidChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AlgebroidChart({}, n={}, m={})", self.name, self.n, self.m)
    }
}

fn default_labels(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("{prefix}{i}")).collect()
}

impl AlgebroidChart {
    pub fn new(
        name: impl Into<String>,
        anchor: MatrixField,
        structure: impl Fn(&Vector) -> Structure + Send + Sync + 'static,
    ) -> Self {
        let (n, m) = (anchor.rows, anchor.cols);
        Self {
            name: name.into(),
            n,
            m,
            anchor,
            structure: Arc::new(structure),
            base_labels: default_labels("x", n),
            fiber_labels: default_labels("y", m),
        }
    }

    /// Tangent bundle in a coordinate frame: `ρ = I`, `C = 0`.
    pub fn tangent_bundle(n: usize) -> Self {
        Self::new(format!("T(R^{n})"), MatrixField::identity(n), move |_| {
            Structure::zeros(n)
        })
    }

    /// Lie algebra seen as an algebroid over a point.
    pub fn lie_algebra(name: impl Into<String>, c: Structure) -> Self {
        let m = c.m;
        Self::new(name, MatrixField::constant(Matrix::zeros(0, m)), move |_| {
            c.clone()
        })
    }

    pub fn with_labels(mut self, base: &[&str], fiber: &[&str]) -> Self {
        assert_eq!(base.len(), self.n, "base label count");
        assert_eq!(fiber.len(), self.m, "fiber label count");
        self.base_labels = base.iter().map(|s| s.to_string()).collect();
        self.fiber_labels = fiber.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn anchor(&self, x: &Vector) -> Matrix {
        self.anchor.at(x)
    }

    pub fn anchor_field(&self) -> &MatrixField {
        &self.anchor
    }

    pub fn structure(&self, x: &Vector) -> Structure {
        (self.structure)(x)
    }

    pub fn anchor_derivatives(&self, x: &Vector, cfg: &FdConfig) -> Result<Vec<Matrix>> {
        self.anchor.derivatives(x, cfg)
    }

    /// `∂C/∂x^i` by central differences.
    pub fn structure_derivatives(&self, x: &Vector, cfg: &FdConfig) -> Result<Vec<Structure>> {
        let h = cfg.step_base;
        (0..self.n)
            .map(|i| {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let d = self.structure(&xp).sub(&self.structure(&xm)).scaled(0.5 / h);
                if d.is_finite() {
                    Ok(d)
                } else {
                    Err(Error::NonFiniteEvaluation("structure derivative".into()))
                }
            })
            .collect()
    }
}

/// Section of the algebroid, `x ↦ σ(x) ∈ R^m`.
#[derive(Clone)]
pub struct SectionField {
    pub m: usize,
    eval: Arc<dyn Fn(&Vector) -> Vector + Send + Sync>,
    jac: Option<Arc<dyn Fn(&Vector) -> Matrix + Send + Sync>>,
}

impl fmt::Debug for SectionField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SectionField(m={})", self.m)
    }
}

impl SectionField {
    pub fn new(m: usize, eval: impl Fn(&Vector) -> Vector + Send + Sync + 'static) -> Self {
        Self {
            m,
            eval: Arc::new(eval),
            jac: None,
        }
    }

    pub fn constant(v: Vector) -> Self {
        let m = v.len();
        Self::new(m, move |_| v.clone()).with_jacobian(move |x| Matrix::zeros(m, x.len()))
    }

    /// Attach the analytic Jacobian `∂σ^α/∂x^i` (m×n).
    pub fn with_jacobian(mut self, j: impl Fn(&Vector) -> Matrix + Send + Sync + 'static) -> Self {
        self.jac = Some(Arc::new(j));
        self
    }

    /// `f σ` for a base function `f`.
    pub fn scaled_by(&self, f: &ScalarField) -> SectionField {
        let (s, f) = (self.clone(), f.clone());
        let empty = Vector::zeros(0);
        SectionField::new(self.m, move |x| s.at(x) * f.eval(x, &empty))
    }

    pub fn at(&self, x: &Vector) -> Vector {
        (self.eval)(x)
    }

    /// `∂σ^α/∂x^i` as an m×n matrix.
    pub fn jacobian(&self, x: &Vector, cfg: &FdConfig) -> Result<Matrix> {
        if let Some(j) = &self.jac {
            return Ok(j(x));
        }
        let cols = fd_jacobian_matrix(
            |p| Ok(Matrix::from_column_slice(self.m, 1, self.at(p).as_slice())),
            x,
            cfg.step_base,
            cfg.scheme,
        )?;
        let mut j = Matrix::zeros(self.m, x.len());
        for (i, c) in cols.iter().enumerate() {
            j.set_column(i, &c.column(0));
        }
        Ok(j)
    }
}

/// Element of the prolongation `𝒯^E E` in the basis `{𝒳_α, 𝒱_α}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProlongationVector {
    pub x: Vector,
    pub y: Vector,
    pub comp_x: Vector,
    pub comp_v: Vector,
}

impl ProlongationVector {
    pub fn new(x: Vector, y: Vector, comp_x: Vector, comp_v: Vector) -> Self {
        Self { x, y, comp_x, comp_v }
    }

    /// Builds from stacked components `(comp_x, comp_v)`.
    pub fn from_stacked(x: &Vector, y: &Vector, z: &Vector) -> Self {
        let m = y.len();
        Self::new(
            x.clone(),
            y.clone(),
            z.rows(0, m).into_owned(),
            z.rows(m, m).into_owned(),
        )
    }

    pub fn stacked(&self) -> Vector {
        let m = self.comp_x.len();
        let mut z = Vector::zeros(2 * m);
        z.rows_mut(0, m).copy_from(&self.comp_x);
        z.rows_mut(m, m).copy_from(&self.comp_v);
        z
    }

    /// Tangent vector `ρ¹(Z) = (ρ comp_x, comp_v)` on the total space.
    pub fn anchored(&self, anchor: &Matrix) -> Vector {
        let n = anchor.nrows();
        let m = self.comp_v.len();
        let mut t = Vector::zeros(n + m);
        t.rows_mut(0, n).copy_from(&(anchor * &self.comp_x));
        t.rows_mut(n, m).copy_from(&self.comp_v);
        t
    }

    /// Pairing with a covector given in the dual basis `{𝒳^α, 𝒱^α}`.
    pub fn pair(&self, covector: &Vector) -> f64 {
        covector.dot(&self.stacked())
    }

    pub fn distance(&self, other: &ProlongationVector) -> f64 {
        (self.stacked() - other.stacked()).amax()
    }
}

/// Residuals of the two structure equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureReport {
    pub max_residual_anchor: f64,
    pub max_residual_jacobi: f64,
    pub max_antisymmetry: f64,
    pub pass: bool,
}

/// Evaluates anchor compatibility and the cyclic Jacobi identity at each point.
pub fn check_structure_equations(
    chart: &AlgebroidChart,
    points: &[Vector],
    tol: f64,
    cfg: &FdConfig,
) -> Result<StructureReport> {
    let (n, m) = (chart.n, chart.m);
    let mut r_anchor = 0.0f64;
    let mut r_jacobi = 0.0f64;
    let mut r_anti = 0.0f64;
    for x in points {
        let rho = chart.anchor(x);
        let c = chart.structure(x);
        if !c.is_finite() || !rho.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteEvaluation(format!(
                "chart {} at {:?}",
                chart.name,
                x.as_slice()
            )));
        }
        r_anti = r_anti.max(c.antisymmetry_defect());
        let drho = chart.anchor_derivatives(x, cfg)?;
        let dc = chart.structure_derivatives(x, cfg)?;
        for a in 0..m {
            for b in 0..m {
                for i in 0..n {
                    let mut lhs = 0.0;
                    for j in 0..n {
                        lhs += rho[(j, a)] * drho[j][(i, b)] - rho[(j, b)] * drho[j][(i, a)];
                    }
                    let rhs: f64 = (0..m).map(|g| rho[(i, g)] * c.get(g, a, b)).sum();
                    r_anchor = r_anchor.max((lhs - rhs).abs());
                }
            }
        }
        for a in 0..m {
            for b in 0..m {
                for g in 0..m {
                    for nu in 0..m {
                        let mut s = 0.0;
                        for &(p, q, r) in &[(a, b, g), (b, g, a), (g, a, b)] {
                            for i in 0..n {
                                s += rho[(i, p)] * dc[i].get(nu, q, r);
                            }
                            for mu in 0..m {
                                s += c.get(mu, q, r) * c.get(nu, p, mu);
                            }
                        }
                        r_jacobi = r_jacobi.max(s.abs());
                    }
                }
            }
        }
    }
    Ok(StructureReport {
        max_residual_anchor: r_anchor,
        max_residual_jacobi: r_jacobi,
        max_antisymmetry: r_anti,
        pass: r_anchor <= tol && r_jacobi <= tol && r_anti <= tol,
    })
}

/// Bracket of two sections at `x`.
pub fn bracket_sections(
    chart: &AlgebroidChart,
    sigma: &SectionField,
    eta: &SectionField,
    x: &Vector,
    cfg: &FdConfig,
) -> Result<Vector> {
    let rho = chart.anchor(x);
    let c = chart.structure(x);
    let (s, e) = (sigma.at(x), eta.at(x));
    let (js, je) = (sigma.jacobian(x, cfg)?, eta.jacobian(x, cfg)?);
    let out = &je * (&rho * &s) - &js * (&rho * &e) + c.apply(&s, &e);
    Ok(out)
}

/// `df_α = ρ^i_α ∂f/∂x^i` for a function on the base.
pub fn differential_of_function(
    chart: &AlgebroidChart,
    f: &ScalarField,
    x: &Vector,
    cfg: &FdConfig,
) -> Result<Vector> {
    let grad = f.gradient(x, &Vector::zeros(0), cfg)?;
    Ok(chart.anchor(x).transpose() * grad.rows(0, chart.n))
}

/// Differential of a function on the total space in the dual basis `{𝒳^α, 𝒱^α}`.
pub fn differential_on_bundle(
    chart: &AlgebroidChart,
    f: &ScalarField,
    x: &Vector,
    y: &Vector,
    cfg: &FdConfig,
) -> Result<Vector> {
    let (n, m) = (chart.n, chart.m);
    let g = f.gradient(x, y, cfg)?;
    let mut out = Vector::zeros(2 * m);
    out.rows_mut(0, m)
        .copy_from(&(chart.anchor(x).transpose() * g.rows(0, n)));
    out.rows_mut(m, m).copy_from(&g.rows(n, m));
    Ok(out)
}

/// Complete lift `σ^C` at `(x, y)`.
pub fn complete_lift(
    chart: &AlgebroidChart,
    sigma: &SectionField,
    x: &Vector,
    y: &Vector,
    cfg: &FdConfig,
) -> Result<ProlongationVector> {
    let rho = chart.anchor(x);
    let c = chart.structure(x);
    let s = sigma.at(x);
    let js = sigma.jacobian(x, cfg)?;
    let comp_v = &js * (&rho * y) - c.apply(&s, y);
    Ok(ProlongationVector::new(x.clone(), y.clone(), s, comp_v))
}

/// `|d_{σ^C} μ̂ − (d_σ μ)^|` at `(x, y)`, where `μ̂(x, y) = ⟨μ(x), y⟩` for a 1-section `μ`.
///
/// The left side differentiates `μ̂` along the anchored complete lift, the right side
/// uses the Lie derivative `(d_σ μ)(η) = ρ(σ)⟨μ, η⟩ − ⟨μ, [σ, η]⟩`.
pub fn complete_lift_defect(
    chart: &AlgebroidChart,
    sigma: &SectionField,
    mu: &SectionField,
    x: &Vector,
    y: &Vector,
    cfg: &FdConfig,
) -> Result<f64> {
    let lift = complete_lift(chart, sigma, x, y, cfg)?;
    let rho = chart.anchor(x);
    let dx = &rho * &lift.comp_x;
    let (mu_c, y0) = (mu.clone(), y.clone());
    let along = fd_derivative_1d(
        |t| {
            let xt = x + &dx * t;
            let yt = &y0 + &lift.comp_v * t;
            Ok(mu_c.at(&xt).dot(&yt))
        },
        cfg.step_base,
        FdScheme::Central4,
    )?;
    let (s, m) = (sigma.at(x), mu.at(x));
    let (js, jm) = (sigma.jacobian(x, cfg)?, mu.jacobian(x, cfg)?);
    let c = chart.structure(x);
    let rs = &rho * &s;
    let mut lie = &jm * &rs;
    for b in 0..chart.m {
        let mut e = Vector::zeros(chart.m);
        e[b] = 1.0;
        let bracket = -(&js * rho.column(b)) + c.apply(&s, &e);
        lie[b] -= m.dot(&bracket);
    }
    Ok((along - lie.dot(y)).abs())
}

/// Vertical lift of `b` at `(x, y)`.
pub fn vertical_lift(b: &Vector, x: &Vector, y: &Vector) -> ProlongationVector {
    ProlongationVector::new(x.clone(), y.clone(), Vector::zeros(b.len()), b.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn tangent_bundle_structure_equations_vanish() {
        let chart = AlgebroidChart::tangent_bundle(3);
        let pts = vec![v(&[0.1, 0.2, 0.3]), v(&[-1.0, 2.0, 0.5])];
        let r = check_structure_equations(&chart, &pts, 1e-12, &FdConfig::default()).unwrap();
        assert_eq!(r.max_residual_anchor, 0.0);
        assert_eq!(r.max_residual_jacobi, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn so3_jacobi() {
        let chart = AlgebroidChart::lie_algebra("so(3)", Structure::so3());
        let r = check_structure_equations(&chart, &[v(&[])], 1e-12, &FdConfig::default()).unwrap();
        assert!(r.max_residual_jacobi <= 1e-12);
    }

    #[test]
    fn broken_structure_fails_jacobi() {
        let mut c = Structure::so3();
        c.set_bracket(0, 1, 0, 1.0);
        let chart = AlgebroidChart::lie_algebra("broken", c);
        let r = check_structure_equations(&chart, &[v(&[])], 1e-9, &FdConfig::default()).unwrap();
        assert!(!r.pass);
    }

    #[test]
    fn constant_sections_on_lie_algebra() {
        let chart = AlgebroidChart::lie_algebra("so(3)", Structure::so3());
        let s = SectionField::constant(v(&[1.0, 0.0, 0.0]));
        let e = SectionField::constant(v(&[0.0, 1.0, 0.0]));
        let b = bracket_sections(&chart, &s, &e, &v(&[]), &FdConfig::default()).unwrap();
        assert_eq!(b, v(&[0.0, 0.0, 1.0]));
    }

    #[test]
    fn tangent_bundle_bracket_is_vector_field_commutator() {
        let chart = AlgebroidChart::tangent_bundle(2);
        let s = SectionField::new(2, |x| v(&[x[1], -x[0] * x[0]]));
        let e = SectionField::new(2, |x| v(&[x[0].sin(), x[0] * x[1]]));
        let x = v(&[0.4, -0.7]);
        let cfg = FdConfig::default();
        let b = bracket_sections(&chart, &s, &e, &x, &cfg).unwrap();
        // (S·∇)E − (E·∇)S with hand-computed Jacobians
        let (sx, ex) = (s.at(&x), e.at(&x));
        let je = Matrix::from_row_slice(2, 2, &[x[0].cos(), 0.0, x[1], x[0]]);
        let js = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0 * x[0], 0.0]);
        let expected = je * sx - js * ex;
        assert!((b - expected).amax() < 1e-8);
    }

    #[test]
    fn complete_lift_vanishes_at_zero_fiber() {
        let chart = AlgebroidChart::lie_algebra("so(3)", Structure::so3());
        let s = SectionField::constant(v(&[0.3, -1.0, 2.0]));
        let z = complete_lift(&chart, &s, &v(&[]), &v(&[0.0, 0.0, 0.0]), &FdConfig::default()).unwrap();
        assert_eq!(z.comp_v.amax(), 0.0);
        assert_eq!(z.comp_x, v(&[0.3, -1.0, 2.0]));
    }

    #[test]
    fn vertical_lift_components() {
        let z = vertical_lift(&v(&[1.0, 0.0]), &v(&[0.0]), &v(&[2.0, 3.0]));
        assert_eq!(z.comp_x, v(&[0.0, 0.0]));
        assert_eq!(z.comp_v, v(&[1.0, 0.0]));
    }

    #[test]
    fn complete_lift_satisfies_lie_derivative_property() {
        let anchor = MatrixField::new(2, 3, |x| {
            Matrix::from_row_slice(2, 3, &[1.0, 0.0, -x[1], 0.0, 1.0, x[0]])
        });
        let chart = AlgebroidChart::new("plane with rotation", anchor, |_| {
            let mut c = Structure::zeros(3);
            c.set_bracket(0, 2, 1, 1.0);
            c.set_bracket(1, 2, 0, -1.0);
            c
        });
        let cfg = FdConfig::default();
        let pts: Vec<Vector> = vec![v(&[0.3, -0.2]), v(&[1.1, 0.7])];
        assert!(check_structure_equations(&chart, &pts, 1e-7, &cfg).unwrap().pass);
        let sigma = SectionField::new(3, |x| v(&[x[0] * x[1], 1.0 + x[0], x[1].sin()]));
        let mu = SectionField::new(3, |x| v(&[x[1], x[0] * x[0], 0.5]));
        for x in &pts {
            let d = complete_lift_defect(&chart, &sigma, &mu, x, &v(&[0.4, -1.2, 0.9]), &cfg).unwrap();
            assert!(d < 1e-7, "defect {d}");
        }
    }
}
