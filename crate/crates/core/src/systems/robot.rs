//! Two-wheeled mobile robot, in the Atiyah chart `T𝕋² × se(2)` and in the full chart of `TQ`.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{uniform_vec, Params, ReductionPair, SystemDescriptor};
use crate::algebroid::{AlgebroidChart, MatrixField, Structure};
use crate::constrained_linear::{AdaptedFrame, LinearNHSystem};
use crate::error::Result;
use crate::lagrangian::{mechanical_lagrangian, MetricField};
use crate::model::System;
use crate::numerics::{Matrix, Vector};
use crate::reduction::MorphismSpec;

pub fn defaults() -> Params {
    Params::new(&[
        ("m0", 1.0),
        ("m1", 0.5),
        ("J", 0.6),
        ("J2", 0.05),
        ("l", 0.2),
        ("c", 0.4),
        ("R", 0.15),
    ])
}

/// Coefficients of the reduced Lagrangian and of the gyroscopic term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotConstants {
    pub p: f64,
    pub s: f64,
    pub u: f64,
}

pub fn constants(p: &Params) -> RobotConstants {
    let (m0, m1, j, j2, l, c, r) = unpack(p);
    let m = m0 + 2.0 * m1;
    RobotConstants {
        p: r * r / 4.0 * (m + j / (c * c)) + j2,
        s: r * r / 4.0 * (m - j / (c * c)),
        u: r.powi(3) * m0 * l / (4.0 * c * c),
    }
}

fn unpack(p: &Params) -> (f64, f64, f64, f64, f64, f64, f64) {
    (
        p.get("m0"),
        p.get("m1"),
        p.get("J"),
        p.get("J2"),
        p.get("l"),
        p.get("c"),
        p.get("R"),
    )
}

/// Wheel-angle accelerations as printed, with `U` entering with the given sign.
fn accel_with(k: &RobotConstants, u: f64, v: &Vector) -> Vector {
    let (a, b) = (v[0], v[1]);
    let det = k.p * k.p - k.s * k.s;
    let common = u * (b - a) / det;
    Vector::from_column_slice(&[common * (k.p * b + k.s * a), -common * (k.p * a + k.s * b)])
}

/// `(ψ̈₁, ψ̈₂)` exactly as the closed form is usually quoted.
pub fn printed_accel(k: &RobotConstants, v: &Vector) -> Vector {
    accel_with(k, k.u, v)
}

/// `(ψ̈₁, ψ̈₂)` implied by the robot's Lagrangian and constraints.
pub fn accel(k: &RobotConstants, v: &Vector) -> Vector {
    accel_with(k, -k.u, v)
}

/// Gyroscopic 1-form `−U(ψ̇₂−ψ̇₁)(ψ̇₁dψ₂ − ψ̇₂dψ₁)` as usually quoted.
pub fn printed_jk(k: &RobotConstants, v: &Vector) -> Vector {
    -jk(k, v)
}

/// Gyroscopic 1-form implied by the robot's Lagrangian and constraints.
pub fn jk(k: &RobotConstants, v: &Vector) -> Vector {
    let d = v[1] - v[0];
    Vector::from_column_slice(&[-k.u * d * v[1], k.u * d * v[0]])
}

/// `ξ₁, ξ₂, ξ₃` brackets: `[ξ₁,ξ₃] = −ξ₂`, `[ξ₂,ξ₃] = ξ₁`.
pub fn atiyah_structure() -> Structure {
    let mut c = Structure::zeros(5);
    c.set_bracket(2, 4, 3, -1.0);
    c.set_bracket(3, 4, 2, 1.0);
    c
}

fn atiyah_metric(p: &Params) -> Matrix {
    let (m0, m1, j, j2, l, _, _) = unpack(p);
    let m = m0 + 2.0 * m1;
    let mut g = Matrix::zeros(5, 5);
    g[(0, 0)] = j2;
    g[(1, 1)] = j2;
    g[(2, 2)] = m;
    g[(3, 3)] = m;
    g[(3, 4)] = m0 * l;
    g[(4, 3)] = m0 * l;
    g[(4, 4)] = j;
    g
}

/// Wheel-driven directions `e₁, e₂` followed by `ξ₁, ξ₂, ξ₃`.
pub fn atiyah_frame(p: &Params) -> Matrix {
    let (r, c) = (p.get("R"), p.get("c"));
    let mut b = Matrix::zeros(5, 5);
    b.set_column(
        0,
        &Vector::from_column_slice(&[1.0, 0.0, -r / 2.0, 0.0, -r / (2.0 * c)]),
    );
    b.set_column(
        1,
        &Vector::from_column_slice(&[0.0, 1.0, -r / 2.0, 0.0, r / (2.0 * c)]),
    );
    for k in 2..5 {
        b[(k, k)] = 1.0;
    }
    b
}

/// Fiber map `(ψ̇, ẋ, ẏ, θ̇) ↦ (ψ̇, ω₁, ω₂, ω₃)` at heading `θ`.
fn body_map(theta: f64) -> Matrix {
    let (s, c) = theta.sin_cos();
    let mut phi = Matrix::identity(5, 5);
    phi[(2, 2)] = c;
    phi[(2, 3)] = s;
    phi[(3, 2)] = -s;
    phi[(3, 3)] = c;
    phi
}

fn body_map_derivative(theta: f64) -> Matrix {
    let (s, c) = theta.sin_cos();
    let mut d = Matrix::zeros(5, 5);
    d[(2, 2)] = -s;
    d[(2, 3)] = c;
    d[(3, 2)] = -c;
    d[(3, 3)] = -s;
    d
}

fn heading_only(d: Matrix) -> Vec<Matrix> {
    let mut out = vec![Matrix::zeros(5, 5); 5];
    out[4] = d;
    out
}

fn body_field() -> MatrixField {
    MatrixField::new(5, 5, |x| body_map(x[4])).with_derivative(|x| heading_only(body_map_derivative(x[4])))
}

fn sample_pose(rng: &mut ChaCha8Rng) -> Vector {
    let mut x = uniform_vec(rng, 5, -2.0, 2.0);
    x[4] = rng.random_range(-3.0..3.0);
    x
}

pub fn build(p: Params) -> Result<SystemDescriptor> {
    p.require_positive(&["m0", "J", "J2", "c", "R"])?;
    if p.get("m1") < 0.0 {
        return Err(crate::Error::InvalidParameters("m1 must be non-negative".into()));
    }
    let g_atiyah = atiyah_metric(&p);
    if g_atiyah.clone().cholesky().is_none() {
        return Err(crate::Error::InvalidParameters(
            "kinetic energy is not positive definite; need (m0 + 2 m1) J > (m0 l)^2".into(),
        ));
    }
    let frame = atiyah_frame(&p);
    let atiyah = AlgebroidChart::new("T(T2) x se(2)", MatrixField::constant(projection()), |_| {
        atiyah_structure()
    })
    .with_labels(
        &["psi1", "psi2"],
        &["psi1_dot", "psi2_dot", "omega1", "omega2", "omega3"],
    );
    let reduced = LinearNHSystem::new(
        mechanical_lagrangian(
            atiyah.clone(),
            MetricField::new(MatrixField::constant(g_atiyah.clone())),
        ),
        AdaptedFrame::new(MatrixField::constant(frame.clone()), 2),
    )?;

    let full_chart = AlgebroidChart::tangent_bundle(5).with_labels(
        &["psi1", "psi2", "x", "y", "theta"],
        &["psi1_dot", "psi2_dot", "x_dot", "y_dot", "theta_dot"],
    );
    let (ga, gd) = (g_atiyah.clone(), g_atiyah);
    let metric = MatrixField::new(5, 5, move |x| {
        let phi = body_map(x[4]);
        phi.transpose() * &ga * phi
    })
    .with_derivative(move |x| {
        let (phi, d) = (body_map(x[4]), body_map_derivative(x[4]));
        heading_only(d.transpose() * &gd * &phi + phi.transpose() * &gd * d)
    });
    let (fb, fd) = (frame.clone(), frame.clone());
    let full_frame = MatrixField::new(5, 5, move |x| body_map(x[4]).transpose() * &fb)
        .with_derivative(move |x| heading_only(body_map_derivative(x[4]).transpose() * &fd));
    let full = LinearNHSystem::new(
        mechanical_lagrangian(full_chart.clone(), MetricField::new(metric)),
        AdaptedFrame::new(full_frame, 2),
    )?;
    let morphism = MorphismSpec::new(
        full_chart.clone(),
        atiyah,
        |x| Vector::from_column_slice(&[x[0], x[1]]),
        body_field(),
    )?;

    let fs = frame.clone();
    let source_sampler = Arc::new(move |rng: &mut ChaCha8Rng| {
        let x = sample_pose(rng);
        let v = uniform_vec(rng, 2, -1.0, 1.0);
        let y = body_map(x[4]).transpose() * fs.columns(0, 2) * v;
        (x, y)
    });
    let x0_full = Vector::from_column_slice(&[0.0, 0.0, 0.0, 0.0, 0.2]);
    let y0_full = body_map(0.2).transpose() * frame.columns(0, 2) * Vector::from_column_slice(&[1.0, 0.5]);
    let pair = ReductionPair {
        label: "TQ -> T(T2) x se(2)".into(),
        source: System::Linear(full),
        target: System::Linear(reduced.clone()),
        morphism,
        stages: Vec::new(),
        source_sampler,
        x0: x0_full,
        y0: y0_full,
    };

    let k = constants(&p);
    let (fo, fsam) = (frame.clone(), frame.clone());
    let oracle = move |_x: &Vector, y: &Vector| -> Result<(Vector, Vector)> {
        let v = Vector::from_column_slice(&[y[0], y[1]]);
        Ok((v.clone(), fo.columns(0, 2) * accel(&k, &v)))
    };
    let sampler = move |rng: &mut ChaCha8Rng| {
        let x = uniform_vec(rng, 2, -3.0, 3.0);
        let v = uniform_vec(rng, 2, -1.0, 1.0);
        (x, fsam.columns(0, 2) * v)
    };
    Ok(SystemDescriptor::new(
        "mobile_robot",
        p,
        System::Linear(reduced),
        oracle,
        sampler,
        Vector::zeros(2),
        frame.columns(0, 2) * Vector::from_column_slice(&[1.0, 0.5]),
    )
    .with_chart(full_chart, sample_pose)
    .with_reduction(pair))
}

fn projection() -> Matrix {
    let mut a = Matrix::zeros(2, 5);
    a[(0, 0)] = 1.0;
    a[(1, 1)] = 1.0;
    a
}
