//! Finite differences and small dense linear algebra.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Default reciprocal-condition threshold for [`solve_dense`].
pub const TOL_DET: f64 = 1e-12;

/// Finite-difference stencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdScheme {
    Central2,
    /// Central differences at h, h/2, h/4 with two Richardson passes.
    Central4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdConfig {
    pub step_base: f64,
    pub step_fiber: f64,
    pub scheme: FdScheme,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self {
            step_base: 1e-6,
            step_fiber: 1e-6,
            scheme: FdScheme::Central2,
        }
    }
}

impl FdConfig {
    pub fn new(step_base: f64, step_fiber: f64, scheme: FdScheme) -> Result<Self> {
        if !(step_base > 0.0 && step_fiber > 0.0) {
            return Err(Error::InvalidParameters(
                "finite-difference steps must be positive".into(),
            ));
        }
        Ok(Self {
            step_base,
            step_fiber,
            scheme,
        })
    }

    /// Same steps for base and fiber.
    pub fn uniform(step: f64, scheme: FdScheme) -> Result<Self> {
        Self::new(step, step, scheme)
    }

    /// Step used for second derivatives built from `step`.
    pub fn second_step(&self, step: f64) -> f64 {
        match self.scheme {
            FdScheme::Central2 => 0.1 * step.sqrt(),
            FdScheme::Central4 => step.sqrt(),
        }
    }
}

type EvalFn = dyn Fn(&Vector, &Vector) -> f64 + Send + Sync;
type GradFn = dyn Fn(&Vector, &Vector) -> Vector + Send + Sync;

/// Real function of a base point `x ∈ R^n` and a fiber point `y ∈ R^m`.
#[derive(Clone)]
pub struct ScalarField {
    pub n: usize,
    pub m: usize,
    eval: Arc<EvalFn>,
    grad: Option<Arc<GradFn>>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("analytic_grad", &self.grad.is_some())
            .finish()
    }
}

impl ScalarField {
    pub fn new(n: usize, m: usize, eval: impl Fn(&Vector, &Vector) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            n,
            m,
            eval: Arc::new(eval),
            grad: None,
        }
    }

    /// Function on the base only (fiber arity 0).
    pub fn on_base(n: usize, eval: impl Fn(&Vector) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(n, 0, move |x, _| eval(x))
    }

    /// Attach an analytic gradient returning the full `(n+m)`-vector.
    pub fn with_gradient(
        mut self,
        grad: impl Fn(&Vector, &Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        self.grad = Some(Arc::new(grad));
        self
    }

    pub fn constant(n: usize, m: usize, c: f64) -> Self {
        Self::new(n, m, move |_, _| c).with_gradient(move |_, _| Vector::zeros(n + m))
    }

    pub fn has_gradient(&self) -> bool {
        self.grad.is_some()
    }

    pub fn eval(&self, x: &Vector, y: &Vector) -> f64 {
        (self.eval)(x, y)
    }

    pub fn try_eval(&self, x: &Vector, y: &Vector) -> Result<f64> {
        let v = (self.eval)(x, y);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteEvaluation(format!(
                "scalar field at x={:?}, y={:?}",
                x.as_slice(),
                y.as_slice()
            )))
        }
    }

    /// Analytic gradient when present, finite differences otherwise.
    pub fn gradient(&self, x: &Vector, y: &Vector, cfg: &FdConfig) -> Result<Vector> {
        match &self.grad {
            Some(g) => {
                let v = g(x, y);
                check_finite_vec(&v, "analytic gradient")?;
                Ok(v)
            }
            None => fd_gradient(self, x, y, cfg),
        }
    }

    /// Largest relative gap between the analytic gradient and central differences.
    ///
    /// Returns 0 when no analytic gradient is attached.
    pub fn gradient_mismatch(&self, points: &[(Vector, Vector)], cfg: &FdConfig) -> Result<f64> {
        let Some(g) = &self.grad else {
            return Ok(0.0);
        };
        let mut worst = 0.0f64;
        for (x, y) in points {
            let analytic = g(x, y);
            let fd = fd_gradient(self, x, y, cfg)?;
            let scale = analytic.amax().max(1.0);
            worst = worst.max((analytic - fd).amax() / scale);
        }
        Ok(worst)
    }

    /// Sum of two fields.
    pub fn add(&self, other: &ScalarField) -> ScalarField {
        let (a, b) = (self.clone(), other.clone());
        ScalarField::new(self.n, self.m, move |x, y| a.eval(x, y) + b.eval(x, y))
    }

    /// Product of two fields.
    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        let (a, b) = (self.clone(), other.clone());
        ScalarField::new(self.n, self.m, move |x, y| a.eval(x, y) * b.eval(x, y))
    }

    pub fn scale(&self, c: f64) -> ScalarField {
        let a = self.clone();
        ScalarField::new(self.n, self.m, move |x, y| c * a.eval(x, y))
    }
}

fn check_finite_vec(v: &Vector, what: &str) -> Result<()> {
    if v.iter().all(|e| e.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteEvaluation(what.to_string()))
    }
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteEvaluation("stencil evaluation".into()))
    }
}

/// One-dimensional derivative of `g` at 0 with the chosen stencil.
pub fn fd_derivative_1d(g: impl Fn(f64) -> Result<f64>, h: f64, scheme: FdScheme) -> Result<f64> {
    let d = |h: f64| -> Result<f64> { Ok((finite(g(h)?)? - finite(g(-h)?)?) / (2.0 * h)) };
    match scheme {
        FdScheme::Central2 => d(h),
        FdScheme::Central4 => {
            let (d1, d2, d4) = (d(h)?, d(h / 2.0)?, d(h / 4.0)?);
            let r1 = (4.0 * d2 - d1) / 3.0;
            let r2 = (4.0 * d4 - d2) / 3.0;
            Ok((16.0 * r2 - r1) / 15.0)
        }
    }
}

/// Derivative of a matrix-valued function along `t`, stencil as above.
pub fn fd_derivative_matrix(g: impl Fn(f64) -> Result<Matrix>, h: f64, scheme: FdScheme) -> Result<Matrix> {
    let d = |h: f64| -> Result<Matrix> {
        let p = g(h)?;
        let m = g(-h)?;
        let out = (p - m) / (2.0 * h);
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(Error::NonFiniteEvaluation("matrix stencil evaluation".into()))
        }
    };
    match scheme {
        FdScheme::Central2 => d(h),
        FdScheme::Central4 => {
            let (d1, d2, d4) = (d(h)?, d(h / 2.0)?, d(h / 4.0)?);
            let r1 = (&d2 * 4.0 - &d1) / 3.0;
            let r2 = (&d4 * 4.0 - &d2) / 3.0;
            Ok((r2 * 16.0 - r1) / 15.0)
        }
    }
}

/// Partial derivatives `∂M/∂x^i` of a matrix field, one matrix per base coordinate.
pub fn fd_jacobian_matrix(
    f: impl Fn(&Vector) -> Result<Matrix>,
    x: &Vector,
    h: f64,
    scheme: FdScheme,
) -> Result<Vec<Matrix>> {
    (0..x.len())
        .map(|i| {
            fd_derivative_matrix(
                |t| {
                    let mut xp = x.clone();
                    xp[i] += t;
                    f(&xp)
                },
                h,
                scheme,
            )
        })
        .collect()
}

/// Gradient of `f` at `(x, y)`, base components first.
pub fn fd_gradient(f: &ScalarField, x: &Vector, y: &Vector, cfg: &FdConfig) -> Result<Vector> {
    let (n, m) = (x.len(), y.len());
    let mut g = Vector::zeros(n + m);
    for i in 0..n {
        g[i] = fd_derivative_1d(
            |t| {
                let mut xp = x.clone();
                xp[i] += t;
                Ok(f.eval(&xp, y))
            },
            cfg.step_base,
            cfg.scheme,
        )?;
    }
    for a in 0..m {
        g[n + a] = fd_derivative_1d(
            |t| {
                let mut yp = y.clone();
                yp[a] += t;
                Ok(f.eval(x, &yp))
            },
            cfg.step_fiber,
            cfg.scheme,
        )?;
    }
    Ok(g)
}

/// Symmetric Hessian of `f` in the joint variable `z = (x, y)`.
pub fn fd_hessian(f: &ScalarField, x: &Vector, y: &Vector, cfg: &FdConfig) -> Result<Matrix> {
    let (n, m) = (x.len(), y.len());
    let k = n + m;
    let steps: Vec<f64> = (0..k)
        .map(|i| {
            if i < n {
                cfg.second_step(cfg.step_base)
            } else {
                cfg.second_step(cfg.step_fiber)
            }
        })
        .collect();
    let eval = |dz: &[(usize, f64)]| -> Result<f64> {
        let mut xp = x.clone();
        let mut yp = y.clone();
        for &(i, d) in dz {
            if i < n {
                xp[i] += d;
            } else {
                yp[i - n] += d;
            }
        }
        finite(f.eval(&xp, &yp))
    };
    let f0 = eval(&[])?;
    let second = |i: usize, j: usize, s: f64| -> Result<f64> {
        let hi = steps[i] * s;
        let hj = steps[j] * s;
        if i == j {
            Ok((eval(&[(i, hi)])? - 2.0 * f0 + eval(&[(i, -hi)])?) / (hi * hi))
        } else {
            Ok(
                (eval(&[(i, hi), (j, hj)])? - eval(&[(i, hi), (j, -hj)])? - eval(&[(i, -hi), (j, hj)])?
                    + eval(&[(i, -hi), (j, -hj)])?)
                    / (4.0 * hi * hj),
            )
        }
    };
    let mut hess = Matrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = match cfg.scheme {
                FdScheme::Central2 => second(i, j, 1.0)?,
                FdScheme::Central4 => {
                    let (d1, d2, d4) = (second(i, j, 1.0)?, second(i, j, 0.5)?, second(i, j, 0.25)?);
                    let r1 = (4.0 * d2 - d1) / 3.0;
                    let r2 = (4.0 * d4 - d2) / 3.0;
                    (16.0 * r2 - r1) / 15.0
                }
            };
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok(hess)
}

/// Pivot-ratio estimate of the reciprocal condition number of an LU factor.
fn pivot_rcond(u_diag: impl Iterator<Item = f64>) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for d in u_diag {
        lo = lo.min(d.abs());
        hi = hi.max(d.abs());
    }
    if hi == 0.0 {
        0.0
    } else {
        lo / hi
    }
}

/// Solves `A z = b` by partially pivoted LU.
pub fn solve_dense(a: &Matrix, b: &Vector, tol_det: f64) -> Result<Vector> {
    let z = solve_dense_multi(a, &Matrix::from_column_slice(b.len(), 1, b.as_slice()), tol_det)?;
    Ok(z.column(0).into_owned())
}

/// Solves `A Z = B` for several right-hand sides.
pub fn solve_dense_multi(a: &Matrix, b: &Matrix, tol_det: f64) -> Result<Matrix> {
    let k = a.nrows();
    if a.ncols() != k || b.nrows() != k {
        return Err(Error::DimensionMismatch(format!(
            "solve: A is {}x{}, rhs has {} rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    if k == 0 {
        return Ok(Matrix::zeros(0, b.ncols()));
    }
    if !a.iter().chain(b.iter()).all(|v| v.is_finite()) {
        return Err(Error::NonFiniteEvaluation("linear system entries".into()));
    }
    let lu = a.clone().lu();
    let u = lu.u();
    let rcond = pivot_rcond((0..k).map(|i| u[(i, i)]));
    if rcond < tol_det {
        return Err(Error::SingularMatrix { rcond });
    }
    lu.solve(b).ok_or(Error::SingularMatrix { rcond: 0.0 })
}

pub fn inverse(a: &Matrix, tol_det: f64) -> Result<Matrix> {
    solve_dense_multi(a, &Matrix::identity(a.nrows(), a.nrows()), tol_det)
}

/// Reciprocal condition estimate used by [`solve_dense`].
pub fn reciprocal_condition(a: &Matrix) -> f64 {
    if a.nrows() == 0 {
        return 1.0;
    }
    let lu = a.clone().lu();
    let u = lu.u();
    pivot_rcond((0..a.nrows()).map(|i| u[(i, i)]))
}

/// Singular values and right singular vectors of `a`, padded to a square problem.
fn full_svd(a: &Matrix) -> (Vec<f64>, Matrix) {
    let (s, m) = (a.nrows(), a.ncols());
    let rows = s.max(m);
    let mut padded = Matrix::zeros(rows, m);
    padded.view_mut((0, 0), (s, m)).copy_from(a);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested v_t");
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sv = idx.iter().map(|&i| svd.singular_values[i]).collect();
    let mut v = Matrix::zeros(m, m);
    for (col, &i) in idx.iter().enumerate() {
        v.set_column(col, &vt.row(i).transpose());
    }
    (sv, v)
}

/// Orthonormal basis of `ker A` as matrix columns.
pub fn nullspace(a: &Matrix, rank_tol: f64) -> Matrix {
    let m = a.ncols();
    if m == 0 {
        return Matrix::zeros(0, 0);
    }
    if a.nrows() == 0 {
        return Matrix::identity(m, m);
    }
    let (sv, v) = full_svd(a);
    let smax = sv.first().copied().unwrap_or(0.0);
    let rank = sv
        .iter()
        .filter(|&&s| s > rank_tol * smax.max(f64::MIN_POSITIVE))
        .count();
    let rank = if smax == 0.0 { 0 } else { rank };
    v.columns(rank, m - rank).into_owned()
}

/// Numerical rank with relative tolerance.
pub fn rank(a: &Matrix, rank_tol: f64) -> usize {
    a.ncols() - nullspace(a, rank_tol).ncols()
}

/// Extends the orthonormal columns of `basis` to an orthonormal basis of `R^m`.
pub fn complete_basis(basis: &Matrix) -> Matrix {
    let m = basis.nrows();
    let comp = nullspace(&basis.transpose(), 1e-12);
    let mut out = Matrix::zeros(m, basis.ncols() + comp.ncols());
    out.view_mut((0, 0), (m, basis.ncols())).copy_from(basis);
    out.view_mut((0, basis.ncols()), (m, comp.ncols()))
        .copy_from(&comp);
    out
}

/// Largest absolute entry, 0 for empty input.
pub fn max_abs<'a>(it: impl IntoIterator<Item = &'a f64>) -> f64 {
    it.into_iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Fourth-order derivative of uniformly sampled data, with skewed stencils near the ends.
pub fn sample_derivative(values: &[f64], dt: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    if n < 5 {
        for i in 0..n {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            if b > a {
                out[i] = (values[b] - values[a]) / ((b - a) as f64 * dt);
            }
        }
        return out;
    }
    let v = values;
    for i in 2..n - 2 {
        out[i] = (v[i - 2] - 8.0 * v[i - 1] + 8.0 * v[i + 1] - v[i + 2]) / (12.0 * dt);
    }
    out[0] = (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]) / (12.0 * dt);
    out[1] = (-3.0 * v[0] - 10.0 * v[1] + 18.0 * v[2] - 6.0 * v[3] + v[4]) / (12.0 * dt);
    let w = &v[n - 5..n];
    out[n - 2] = (3.0 * w[4] + 10.0 * w[3] - 18.0 * w[2] + 6.0 * w[1] - w[0]) / (12.0 * dt);
    out[n - 1] = (25.0 * w[4] - 48.0 * w[3] + 36.0 * w[2] - 16.0 * w[1] + 3.0 * w[0]) / (12.0 * dt);
    out
}
