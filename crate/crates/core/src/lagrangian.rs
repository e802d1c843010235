//! Lagrangians on an algebroid chart: Hessian, energy, Cartan 2-section, free dynamics.

use std::fmt;

use crate::algebroid::{AlgebroidChart, MatrixField, ProlongationVector, Structure};
use crate::constrained_linear::LinearNHSystem;
use crate::error::{Error, Result};
use crate::numerics::{
    fd_hessian, inverse, solve_dense, FdConfig, FdScheme, Matrix, ScalarField, Vector, TOL_DET,
};

/// Bundle metric `G(x)` with an optional potential `V(x)`.
#[derive(Clone, Debug)]
pub struct MetricField {
    pub g: MatrixField,
    pub potential: Option<ScalarField>,
}

impl MetricField {
    pub fn new(g: MatrixField) -> Self {
        Self { g, potential: None }
    }

    pub fn with_potential(mut self, v: ScalarField) -> Self {
        self.potential = Some(v);
        self
    }

    /// Smallest eigenvalue of `G(x)`.
    pub fn min_eigenvalue(&self, x: &Vector) -> f64 {
        let g = self.g.at(x);
        let sym = (&g + g.transpose()) * 0.5;
        sym.symmetric_eigenvalues().min()
    }

    fn potential_value(&self, x: &Vector) -> f64 {
        self.potential
            .as_ref()
            .map_or(0.0, |v| v.eval(x, &Vector::zeros(0)))
    }

    fn potential_gradient(&self, x: &Vector, cfg: &FdConfig) -> Result<Vector> {
        match &self.potential {
            Some(v) => Ok(v
                .gradient(x, &Vector::zeros(0), cfg)?
                .rows(0, x.len())
                .into_owned()),
            None => Ok(Vector::zeros(x.len())),
        }
    }
}

/// Value and derivatives of `L` at one point of `E`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianJet {
    pub value: f64,
    /// `∂L/∂x^i`
    pub dx: Vector,
    /// `∂L/∂y^α`
    pub dy: Vector,
    /// `∂²L/∂y^α∂y^β`
    pub w: Matrix,
    /// `∂²L/∂x^i∂y^α`, n×m
    pub dxdy: Matrix,
}

#[derive(Clone)]
enum Kind {
    Generic(ScalarField),
    Mechanical(MetricField),
    /// `L(x, A(x) ỹ)` for a Lagrangian on another chart over the same base.
    Pulled {
        base: Box<LagrangianField>,
        map: MatrixField,
    },
}

/// Lagrangian function on an algebroid chart.
#[derive(Clone)]
pub struct LagrangianField {
    chart: AlgebroidChart,
    kind: Kind,
    pub fd: FdConfig,
}

impl fmt::Debug for LagrangianField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            Kind::Generic(_) => "generic",
            Kind::Mechanical(_) => "mechanical",
            Kind::Pulled { .. } => "pulled back",
        };
        write!(f, "LagrangianField({kind} on {})", self.chart.name)
    }
}

impl LagrangianField {
    pub fn generic(chart: AlgebroidChart, l: ScalarField) -> Self {
        Self {
            chart,
            kind: Kind::Generic(l),
            fd: FdConfig::default(),
        }
    }

    pub fn with_fd(mut self, fd: FdConfig) -> Self {
        self.fd = fd;
        if let Kind::Pulled { base, .. } = &mut self.kind {
            base.fd = fd;
        }
        self
    }

    pub fn chart(&self) -> &AlgebroidChart {
        &self.chart
    }

    /// Metric when the Lagrangian is of mechanical type.
    pub fn metric(&self) -> Option<&MetricField> {
        match &self.kind {
            Kind::Mechanical(g) => Some(g),
            _ => None,
        }
    }

    /// `L̃(x, ỹ) = L(x, A(x) ỹ)` on `chart`, whose fiber rank is the column count of `A`.
    pub fn pull_back(&self, chart: AlgebroidChart, map: MatrixField) -> LagrangianField {
        assert_eq!(map.rows, self.chart.m, "pull-back map rows");
        assert_eq!(map.cols, chart.m, "pull-back map columns");
        let kind = match &self.kind {
            Kind::Mechanical(metric) => {
                let (g, a) = (metric.g.clone(), map.clone());
                let (g2, a2) = (metric.g.clone(), map.clone());
                let fd = self.fd;
                let k = map.cols;
                let pulled = MatrixField::new(k, k, move |x| {
                    let am = a.at(x);
                    am.transpose() * g.at(x) * am
                })
                .with_derivative(move |x| {
                    let (am, gm) = (a2.at(x), g2.at(x));
                    let da = a2.derivatives(x, &fd).unwrap_or_default();
                    let dg = g2.derivatives(x, &fd).unwrap_or_default();
                    da.iter()
                        .zip(dg.iter())
                        .map(|(dai, dgi)| {
                            let t = dai.transpose() * &gm * &am;
                            &t + t.transpose() + am.transpose() * dgi * &am
                        })
                        .collect()
                });
                Kind::Mechanical(MetricField {
                    g: pulled,
                    potential: metric.potential.clone(),
                })
            }
            _ => Kind::Pulled {
                base: Box::new(self.clone()),
                map,
            },
        };
        LagrangianField {
            chart,
            kind,
            fd: self.fd,
        }
    }

    pub fn value(&self, x: &Vector, y: &Vector) -> Result<f64> {
        let v = match &self.kind {
            Kind::Generic(l) => l.eval(x, y),
            Kind::Mechanical(metric) => 0.5 * y.dot(&(metric.g.at(x) * y)) - metric.potential_value(x),
            Kind::Pulled { base, map } => return base.value(x, &(map.at(x) * y)),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteEvaluation("Lagrangian value".into()))
        }
    }

    /// First and second derivatives needed by the dynamics.
    pub fn jet(&self, x: &Vector, y: &Vector) -> Result<LagrangianJet> {
        let (n, m) = (x.len(), y.len());
        match &self.kind {
            Kind::Generic(l) => {
                let value = l.try_eval(x, y)?;
                let g = l.gradient(x, y, &self.fd)?;
                let hcfg = FdConfig {
                    scheme: FdScheme::Central4,
                    ..self.fd
                };
                let h = fd_hessian(l, x, y, &hcfg)?;
                Ok(LagrangianJet {
                    value,
                    dx: g.rows(0, n).into_owned(),
                    dy: g.rows(n, m).into_owned(),
                    w: h.view((n, n), (m, m)).into_owned(),
                    dxdy: h.view((0, n), (n, m)).into_owned(),
                })
            }
            Kind::Mechanical(metric) => {
                let g = metric.g.try_at(x)?;
                let g = (&g + g.transpose()) * 0.5;
                let dg = metric.g.derivatives(x, &self.fd)?;
                let gy = &g * y;
                let dv = metric.potential_gradient(x, &self.fd)?;
                let mut dx = Vector::zeros(n);
                let mut dxdy = Matrix::zeros(n, m);
                for i in 0..n {
                    let dgi = (&dg[i] + dg[i].transpose()) * 0.5;
                    let dgy = &dgi * y;
                    dx[i] = 0.5 * y.dot(&dgy) - dv[i];
                    dxdy.set_row(i, &dgy.transpose());
                }
                Ok(LagrangianJet {
                    value: 0.5 * y.dot(&gy) - metric.potential_value(x),
                    dx,
                    dy: gy,
                    w: g,
                    dxdy,
                })
            }
            Kind::Pulled { base, map } => {
                let a = map.try_at(x)?;
                let da = map.derivatives(x, &self.fd)?;
                let yb = &a * y;
                let bj = base.jet(x, &yb)?;
                let mut dx = bj.dx.clone();
                let mut dxdy = Matrix::zeros(n, m);
                for i in 0..n {
                    let day = &da[i] * y;
                    dx[i] += bj.dy.dot(&day);
                    let row = a.transpose() * (bj.dxdy.row(i).transpose() + &bj.w * &day)
                        + da[i].transpose() * &bj.dy;
                    dxdy.set_row(i, &row.transpose());
                }
                let w = a.transpose() * &bj.w * &a;
                Ok(LagrangianJet {
                    value: bj.value,
                    dx,
                    dy: a.transpose() * &bj.dy,
                    w: (&w + w.transpose()) * 0.5,
                    dxdy,
                })
            }
        }
    }

    pub fn hessian_w(&self, x: &Vector, y: &Vector) -> Result<Matrix> {
        Ok(self.jet(x, y)?.w)
    }

    pub fn energy(&self, x: &Vector, y: &Vector) -> Result<f64> {
        let j = self.jet(x, y)?;
        Ok(j.dy.dot(y) - j.value)
    }

    pub fn phase(&self, x: &Vector, y: &Vector) -> Result<PhaseData> {
        PhaseData::new(self, x, y)
    }

    pub fn cartan_two_form(&self, x: &Vector, y: &Vector) -> Result<Matrix> {
        Ok(self.phase(x, y)?.cartan())
    }

    /// `(ẋ, ẏ)` of the free Euler-Lagrange dynamics.
    pub fn free_dynamics(&self, x: &Vector, y: &Vector) -> Result<(Vector, Vector)> {
        let p = self.phase(x, y)?;
        Ok((p.xdot(), p.free_accel()?))
    }
}

/// Mechanical Lagrangian `L = ½ yᵀ G(x) y − V(x)`.
pub fn mechanical_lagrangian(chart: AlgebroidChart, metric: MetricField) -> LagrangianField {
    LagrangianField {
        chart,
        kind: Kind::Mechanical(metric),
        fd: FdConfig::default(),
    }
}

/// Structure data and Lagrangian jet frozen at one state.
#[derive(Debug, Clone)]
pub struct PhaseData {
    pub x: Vector,
    pub y: Vector,
    pub anchor: Matrix,
    pub structure: Structure,
    pub jet: LagrangianJet,
}

impl PhaseData {
    pub fn new(lf: &LagrangianField, x: &Vector, y: &Vector) -> Result<Self> {
        let chart = lf.chart();
        if x.len() != chart.n || y.len() != chart.m {
            return Err(Error::DimensionMismatch(format!(
                "state ({}, {}) on chart {} with (n, m) = ({}, {})",
                x.len(),
                y.len(),
                chart.name,
                chart.n,
                chart.m
            )));
        }
        Ok(Self {
            x: x.clone(),
            y: y.clone(),
            anchor: chart.anchor_field().try_at(x)?,
            structure: chart.structure(x),
            jet: lf.jet(x, y)?,
        })
    }

    pub fn m(&self) -> usize {
        self.y.len()
    }

    pub fn xdot(&self) -> Vector {
        &self.anchor * &self.y
    }

    pub fn energy(&self) -> f64 {
        self.jet.dy.dot(&self.y) - self.jet.value
    }

    /// `ω_L(𝒳_α, 𝒳_β)`.
    pub fn cartan_xx(&self) -> Matrix {
        let m = self.m();
        let t = self.jet.dxdy.transpose() * &self.anchor;
        let mut out = &t - t.transpose();
        for a in 0..m {
            for b in 0..m {
                let s: f64 = (0..m).map(|g| self.jet.dy[g] * self.structure.get(g, a, b)).sum();
                out[(a, b)] += s;
            }
        }
        out
    }

    /// `ω_L` in the basis `{𝒳_α, 𝒱_α}`; entry `(k, j)` is `ω_L(b_k, b_j)`.
    pub fn cartan(&self) -> Matrix {
        let m = self.m();
        let mut o = Matrix::zeros(2 * m, 2 * m);
        o.view_mut((0, 0), (m, m)).copy_from(&self.cartan_xx());
        o.view_mut((0, m), (m, m)).copy_from(&self.jet.w);
        o.view_mut((m, 0), (m, m)).copy_from(&(-&self.jet.w));
        o
    }

    /// `dE_L` in the dual basis `{𝒳^α, 𝒱^α}`.
    pub fn energy_differential(&self) -> Vector {
        let m = self.m();
        let de_dx = &self.jet.dxdy * &self.y - &self.jet.dx;
        let mut out = Vector::zeros(2 * m);
        out.rows_mut(0, m).copy_from(&(self.anchor.transpose() * de_dx));
        out.rows_mut(m, m).copy_from(&(&self.jet.w * &self.y));
        out
    }

    /// Right-hand side `b` of `W f = b`.
    pub fn force_rhs(&self) -> Vector {
        let m = self.m();
        let xdot = self.xdot();
        let mut b = self.anchor.transpose() * &self.jet.dx - self.jet.dxdy.transpose() * xdot;
        for a in 0..m {
            let mut s = 0.0;
            for g in 0..m {
                if self.jet.dy[g] == 0.0 {
                    continue;
                }
                for c in 0..m {
                    s += self.jet.dy[g] * self.structure.get(g, a, c) * self.y[c];
                }
            }
            b[a] -= s;
        }
        b
    }

    /// Free acceleration `W⁻¹ b`.
    pub fn free_accel(&self) -> Result<Vector> {
        solve_dense(&self.jet.w, &self.force_rhs(), TOL_DET)
    }

    /// Acceleration under an external force covector: `W f = b + F`.
    pub fn forced_accel(&self, force: &Vector) -> Result<Vector> {
        solve_dense(&self.jet.w, &(self.force_rhs() + force), TOL_DET)
    }

    /// Euler-Lagrange residual `δL_α = (W f − b)_α` for a given acceleration.
    pub fn euler_lagrange_residual(&self, accel: &Vector) -> Vector {
        &self.jet.w * accel - self.force_rhs()
    }

    /// Free dynamics as a prolongation vector.
    pub fn free_section(&self) -> Result<ProlongationVector> {
        Ok(ProlongationVector::new(
            self.x.clone(),
            self.y.clone(),
            self.y.clone(),
            self.free_accel()?,
        ))
    }

    /// Solves `i_X ω_L = θ` for a covector `θ` in the dual basis.
    pub fn hamiltonian_vector(&self, theta: &Vector) -> Result<ProlongationVector> {
        let z = solve_dense(&(-self.cartan()), theta, TOL_DET)?;
        Ok(ProlongationVector::from_stacked(&self.x, &self.y, &z))
    }
}

/// Connection coefficients `Γ^α_{βγ}`, with `∇_{e_β} e_γ = Γ^α_{βγ} e_α`.
#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    pub m: usize,
    data: Vec<f64>,
}

impl Connection {
    pub fn zeros(m: usize) -> Self {
        Self {
            m,
            data: vec![0.0; m * m * m],
        }
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[(a * self.m + b) * self.m + c]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, v: f64) {
        self.data[(a * self.m + b) * self.m + c] = v;
    }

    /// Geodesic spray acceleration `−½(Γ^γ_{αβ} + Γ^γ_{βα}) y^α y^β`.
    pub fn spray(&self, y: &Vector) -> Vector {
        let m = self.m;
        Vector::from_fn(m, |g, _| {
            let mut s = 0.0;
            for a in 0..m {
                for b in 0..m {
                    s += self.get(g, a, b) * y[a] * y[b];
                }
            }
            -s
        })
    }

    pub fn max_abs_diff(&self, other: &Connection) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }
}

/// Levi-Civita coefficients of `G` from the Koszul formula.
pub fn levi_civita_coeffs(
    chart: &AlgebroidChart,
    metric: &MetricField,
    x: &Vector,
    cfg: &FdConfig,
) -> Result<Connection> {
    let m = chart.m;
    let g = metric.g.try_at(x)?;
    let ginv = inverse(&g, TOL_DET)?;
    let dg = metric.g.derivatives(x, cfg)?;
    let rho = chart.anchor(x);
    let c = chart.structure(x);
    // [a,b;c] = ∂_i G_ab ρ^i_c + C^μ_ab G_μc
    let sym = |a: usize, b: usize, cc: usize| -> f64 {
        let mut s = 0.0;
        for (i, dgi) in dg.iter().enumerate() {
            s += dgi[(a, b)] * rho[(i, cc)];
        }
        for mu in 0..m {
            s += c.get(mu, a, b) * g[(mu, cc)];
        }
        s
    };
    let mut out = Connection::zeros(m);
    for b in 0..m {
        for cc in 0..m {
            // 2 G(∇_b e_c, e_ν) = [ν,c;b] + [ν,b;c] − [c,b;ν]
            let low: Vec<f64> = (0..m)
                .map(|nu| sym(nu, cc, b) + sym(nu, b, cc) - sym(cc, b, nu))
                .collect();
            for a in 0..m {
                let v: f64 = (0..m).map(|nu| 0.5 * ginv[(a, nu)] * low[nu]).sum();
                out.set(a, b, cc, v);
            }
        }
    }
    Ok(out)
}

/// Coefficients of `∇̌_σ η = P(∇_σ η) + ∇_σ(Q η)` in the adapted frame of `sys`.
pub fn constrained_connection_coeffs(sys: &LinearNHSystem, x: &Vector) -> Result<Connection> {
    let lf = sys.adapted_lagrangian();
    let metric = lf.metric().ok_or_else(|| {
        Error::PreconditionFailed("constrained connection needs a mechanical Lagrangian".into())
    })?;
    let chart = lf.chart();
    let cfg = lf.fd;
    let m = chart.m;
    let r = sys.r();
    let gamma = levi_civita_coeffs(chart, metric, x, &cfg)?;
    let q_of = |p: &Vector| -> Result<Matrix> {
        let g = metric.g.try_at(p)?;
        let ed = Matrix::identity(m, m).columns(0, r).into_owned();
        let cd = ed.transpose() * &g * &ed;
        let proj = &ed * inverse(&cd, TOL_DET)? * ed.transpose() * &g;
        Ok(Matrix::identity(m, m) - proj)
    };
    let q = q_of(x)?;
    let p = Matrix::identity(m, m) - &q;
    let dq = crate::numerics::fd_jacobian_matrix(q_of, x, cfg.step_base, cfg.scheme)?;
    let rho = chart.anchor(x);
    let mut out = Connection::zeros(m);
    for b in 0..m {
        for c in 0..m {
            for a in 0..m {
                let mut v = 0.0;
                for mu in 0..m {
                    v += p[(a, mu)] * gamma.get(mu, b, c) + q[(mu, c)] * gamma.get(a, b, mu);
                }
                for (i, dqi) in dq.iter().enumerate() {
                    v += rho[(i, b)] * dqi[(a, c)];
                }
                out.set(a, b, c, v);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn rigid_body(i: [f64; 3]) -> LagrangianField {
        let chart = AlgebroidChart::lie_algebra("so(3)", Structure::so3());
        mechanical_lagrangian(
            chart,
            MetricField::new(MatrixField::constant(Matrix::from_diagonal(&v(&i)))),
        )
    }

    #[test]
    fn free_rigid_body_euler_equations() {
        let lf = rigid_body([1.0, 2.0, 3.0]);
        let (_, wdot) = lf.free_dynamics(&v(&[]), &v(&[1.0, 1.0, 1.0])).unwrap();
        // (Iω)×ω = (2·1−3·1, 3·1−1·1, 1·1−2·1) = (−1, 2, −1); divide by I
        let expected = v(&[-1.0, 1.0, -1.0 / 3.0]);
        assert!((wdot - expected).amax() < 1e-14);
    }

    #[test]
    fn quartic_hessian() {
        let chart = AlgebroidChart::tangent_bundle(1);
        let lf = LagrangianField::generic(chart, ScalarField::new(1, 1, |_, y| y[0].powi(4)));
        let w = lf.hessian_w(&v(&[0.0]), &v(&[1.0])).unwrap();
        assert!((w[(0, 0)] - 12.0).abs() < 1e-6);
    }

    #[test]
    fn newton_on_tangent_bundle() {
        let chart = AlgebroidChart::tangent_bundle(2);
        let pot = ScalarField::on_base(2, |x| x[0] * x[0] + 3.0 * x[1]);
        let lf = mechanical_lagrangian(
            chart,
            MetricField::new(MatrixField::identity(2)).with_potential(pot),
        );
        let (xd, yd) = lf.free_dynamics(&v(&[0.5, 1.0]), &v(&[0.2, 0.3])).unwrap();
        assert!((xd - v(&[0.2, 0.3])).amax() < 1e-15);
        assert!((yd - v(&[-1.0, -3.0])).amax() < 1e-8);
    }

    #[test]
    fn energy_of_linear_lagrangian() {
        let chart = AlgebroidChart::tangent_bundle(1);
        let lf = LagrangianField::generic(chart, ScalarField::new(1, 1, |x, y| x[0].cos() + 2.0 * y[0]));
        let e = lf.energy(&v(&[0.3]), &v(&[1.7])).unwrap();
        assert!((e + 0.3f64.cos()).abs() < 1e-8);
    }

    #[test]
    fn cartan_block_structure_for_constant_metric() {
        let chart = AlgebroidChart::tangent_bundle(2);
        let g = Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let lf = mechanical_lagrangian(chart, MetricField::new(MatrixField::constant(g.clone())));
        let o = lf.cartan_two_form(&v(&[0.1, 0.2]), &v(&[1.0, -1.0])).unwrap();
        assert_eq!(o.view((0, 0), (2, 2)).amax(), 0.0);
        assert_eq!(o.view((0, 2), (2, 2)).into_owned(), g);
        assert_eq!(o.view((2, 0), (2, 2)).into_owned(), -g);
    }

    #[test]
    fn polar_christoffel_symbols() {
        // Euclidean metric in polar coordinates (r, θ): G = diag(1, r²).
        let chart = AlgebroidChart::tangent_bundle(2);
        let g = MatrixField::new(2, 2, |x| Matrix::from_diagonal(&v(&[1.0, x[0] * x[0]])))
            .with_derivative(|x| vec![Matrix::from_diagonal(&v(&[0.0, 2.0 * x[0]])), Matrix::zeros(2, 2)]);
        let r = 1.7;
        let gam =
            levi_civita_coeffs(&chart, &MetricField::new(g), &v(&[r, 0.3]), &FdConfig::default()).unwrap();
        assert!((gam.get(0, 1, 1) + r).abs() < 1e-14);
        assert!((gam.get(1, 0, 1) - 1.0 / r).abs() < 1e-14);
        assert!((gam.get(1, 1, 0) - 1.0 / r).abs() < 1e-14);
        assert!(gam.get(0, 0, 0).abs() < 1e-14);
    }
}
