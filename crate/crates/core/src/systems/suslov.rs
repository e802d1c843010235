//! Rigid body whose angular velocity is orthogonal to a body-fixed direction.

use rand_chacha::ChaCha8Rng;

use super::{cross, uniform_vec, v3, Params, SystemDescriptor};
use crate::algebroid::{AlgebroidChart, MatrixField, Structure};
use crate::constrained_linear::{AdaptedFrame, LinearNHSystem};
use crate::error::{Error, Result};
use crate::lagrangian::{mechanical_lagrangian, MetricField};
use crate::model::System;
use crate::numerics::{Matrix, Vector};

pub fn defaults() -> Params {
    Params::new(&[
        ("i1", 1.0),
        ("i2", 2.0),
        ("i3", 3.0),
        ("gamma1", 0.0),
        ("gamma2", 0.0),
        ("gamma3", 1.0),
    ])
}

/// Unit constraint direction from the parameters.
pub fn direction(p: &Params) -> Result<Vector> {
    let g = v3(p.get("gamma1"), p.get("gamma2"), p.get("gamma3"));
    let norm = g.norm();
    if norm < 1e-12 {
        return Err(Error::InvalidParameters("constraint direction is zero".into()));
    }
    Ok(g / norm)
}

/// Orthonormal frame whose last column is `g`.
pub fn frame_with_last(g: &Vector) -> Matrix {
    let k = g.iamin();
    let mut axis = Vector::zeros(3);
    axis[k] = 1.0;
    let u1 = cross(g, &axis).normalize();
    let u2 = cross(g, &u1);
    Matrix::from_columns(&[u1, u2, g.clone()])
}

/// `𝕀ω̇ = 𝕀ω × ω + λΓ` with the multiplier eliminated.
pub fn closed_form(inertia: &Matrix, gamma: &Vector, w: &Vector) -> Result<(Vector, f64)> {
    let inv = inertia
        .clone()
        .try_inverse()
        .ok_or(Error::SingularMatrix { rcond: 0.0 })?;
    let euler = cross(&(inertia * w), w);
    let ig = &inv * gamma;
    let lambda = -euler.dot(&ig) / gamma.dot(&ig);
    Ok((inv * (euler + gamma * lambda), lambda))
}

pub fn build(p: Params) -> Result<crate::systems::SystemDescriptor> {
    p.require_positive(&["i1", "i2", "i3"])?;
    let gamma = direction(&p)?;
    let inertia = Matrix::from_diagonal(&v3(p.get("i1"), p.get("i2"), p.get("i3")));
    let chart = AlgebroidChart::lie_algebra("so(3)", Structure::so3())
        .with_labels(&[], &["omega1", "omega2", "omega3"]);
    let lf = mechanical_lagrangian(chart, MetricField::new(MatrixField::constant(inertia.clone())));
    let basis = frame_with_last(&gamma);
    let sys = LinearNHSystem::new(lf, AdaptedFrame::new(MatrixField::constant(basis.clone()), 2))?;

    let (u1, u2) = (basis.column(0).into_owned(), basis.column(1).into_owned());
    let y0 = &u1 * 0.6 + &u2 * 0.8;
    let g = gamma.clone();
    let oracle = move |_x: &Vector, w: &Vector| -> Result<(Vector, Vector)> {
        Ok((Vector::zeros(0), closed_form(&inertia, &g, w)?.0))
    };
    let sampler = move |rng: &mut ChaCha8Rng| {
        let c = uniform_vec(rng, 2, -1.0, 1.0);
        (Vector::zeros(0), &u1 * c[0] + &u2 * c[1])
    };
    Ok(SystemDescriptor::new(
        "suslov",
        p,
        System::Linear(sys),
        oracle,
        sampler,
        Vector::zeros(0),
        y0,
    ))
}
