//! Chaplygin sleigh on `SE(2)`, in the Lie algebra and in two full charts.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{uniform_vec, v3, Params, ReductionPair, SystemDescriptor};
use crate::algebroid::{AlgebroidChart, MatrixField, Structure};
use crate::constrained_linear::{AdaptedFrame, LinearNHSystem};
use crate::error::Result;
use crate::lagrangian::{mechanical_lagrangian, MetricField};
use crate::model::System;
use crate::numerics::{Matrix, Vector};
use crate::reduction::MorphismSpec;

pub fn defaults() -> Params {
    Params::new(&[("m", 1.0), ("J", 1.0), ("a", 1.0), ("b", 0.0)])
}

/// `se(2)` in the basis `(ω, v₁, v₂)`.
pub fn se2() -> Structure {
    let mut c = Structure::zeros(3);
    c.set_bracket(0, 1, 2, 1.0);
    c.set_bracket(0, 2, 1, -1.0);
    c
}

pub fn inertia(p: &Params) -> Matrix {
    let (m, j, a, b) = (p.get("m"), p.get("J"), p.get("a"), p.get("b"));
    Matrix::from_row_slice(
        3,
        3,
        &[
            j + m * (a * a + b * b),
            -b * m,
            a * m,
            -b * m,
            m,
            0.0,
            a * m,
            0.0,
            m,
        ],
    )
}

/// Body velocities from `(θ̇, ẋ, ẏ)`.
pub fn body_map(theta: f64) -> Matrix {
    let (s, c) = theta.sin_cos();
    Matrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, c, s, 0.0, -s, c])
}

fn body_map_derivative(theta: f64) -> Matrix {
    let (s, c) = theta.sin_cos();
    Matrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, -s, c, 0.0, -c, -s])
}

fn first_only(n: usize, d: Matrix) -> Vec<Matrix> {
    let mut out = vec![Matrix::zeros(d.nrows(), d.ncols()); n];
    out[0] = d;
    out
}

/// Left-invariant frame `(X_ω, X_v₁, X_v₂)` in `(θ, x, y)` coordinates.
fn left_frame() -> MatrixField {
    MatrixField::new(3, 3, |x| body_map(x[0]).transpose())
        .with_derivative(|x| first_only(3, body_map_derivative(x[0]).transpose()))
}

fn body_field() -> MatrixField {
    MatrixField::new(3, 3, |x| body_map(x[0])).with_derivative(|x| first_only(3, body_map_derivative(x[0])))
}

/// `(ω̇, v̇₁, v̇₂)` from the sleigh equations with `v₂ = 0`.
pub fn closed_form(p: &Params, w: &Vector) -> Vector {
    let (m, j, a, b) = (p.get("m"), p.get("J"), p.get("a"), p.get("b"));
    let (om, v1) = (w[0], w[1]);
    let den = j + m * a * a;
    v3(
        a * m * om * (b * om - v1) / den,
        a * om * ((j + m * (a * a + b * b)) * om - m * b * v1) / den,
        0.0,
    )
}

fn sample_pose(rng: &mut ChaCha8Rng) -> Vector {
    v3(
        rng.random_range(-3.0..3.0),
        rng.random_range(-2.0..2.0),
        rng.random_range(-2.0..2.0),
    )
}

pub fn build(p: Params) -> Result<SystemDescriptor> {
    p.require_positive(&["m", "J"])?;
    let inertia = inertia(&p);
    let body_labels = ["omega", "v1", "v2"];
    let pose_labels = ["theta", "x", "y"];

    let algebra = AlgebroidChart::lie_algebra("se(2)", se2()).with_labels(&[], &body_labels);
    let reduced = LinearNHSystem::new(
        mechanical_lagrangian(
            algebra.clone(),
            MetricField::new(MatrixField::constant(inertia.clone())),
        ),
        AdaptedFrame::identity(3, 2),
    )?;

    let full_chart =
        AlgebroidChart::tangent_bundle(3).with_labels(&pose_labels, &["theta_dot", "x_dot", "y_dot"]);
    let (i_full, i_deriv) = (inertia.clone(), inertia.clone());
    let metric = MatrixField::new(3, 3, move |x| {
        let phi = body_map(x[0]);
        phi.transpose() * &i_full * phi
    })
    .with_derivative(move |x| {
        let (phi, d) = (body_map(x[0]), body_map_derivative(x[0]));
        let dg = d.transpose() * &i_deriv * &phi + phi.transpose() * &i_deriv * d;
        first_only(3, dg)
    });
    let full = LinearNHSystem::new(
        mechanical_lagrangian(full_chart.clone(), MetricField::new(metric)),
        AdaptedFrame::new(left_frame(), 2),
    )?;

    let trivialized =
        AlgebroidChart::new("SE(2)xse(2)", left_frame(), |_| se2()).with_labels(&pose_labels, &body_labels);
    let direct = MorphismSpec::new(
        full_chart.clone(),
        algebra.clone(),
        |_| Vector::zeros(0),
        body_field(),
    )?;
    let to_trivialized = MorphismSpec::new(full_chart, trivialized.clone(), |x| x.clone(), body_field())?;
    let to_algebra = MorphismSpec::new(
        trivialized.clone(),
        algebra,
        |_| Vector::zeros(0),
        MatrixField::identity(3),
    )?;

    let source_sampler = Arc::new(|rng: &mut ChaCha8Rng| {
        let x = sample_pose(rng);
        let c = uniform_vec(rng, 2, -1.0, 1.0);
        let y = body_map(x[0]).transpose() * v3(c[0], c[1], 0.0);
        (x, y)
    });
    let pair = ReductionPair {
        label: "T(SE(2)) -> se(2)".into(),
        source: System::Linear(full),
        target: System::Linear(reduced.clone()),
        morphism: direct,
        stages: vec![to_trivialized, to_algebra],
        source_sampler,
        x0: v3(0.3, 0.0, 0.0),
        y0: body_map(0.3).transpose() * v3(1.0, 0.0, 0.0),
    };

    let params = p.clone();
    let oracle = move |_x: &Vector, w: &Vector| Ok((Vector::zeros(0), closed_form(&params, w)));
    let sampler = |rng: &mut ChaCha8Rng| {
        let c = uniform_vec(rng, 2, -1.0, 1.0);
        (Vector::zeros(0), v3(c[0], c[1], 0.0))
    };
    Ok(SystemDescriptor::new(
        "chaplygin_sleigh",
        p,
        System::Linear(reduced),
        oracle,
        sampler,
        Vector::zeros(0),
        v3(1.0, 0.0, 0.0),
    )
    .with_chart(pair.source.chart().clone(), sample_pose)
    .with_chart(trivialized, sample_pose)
    .with_reduction(pair))
}
