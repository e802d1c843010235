//! Veselova system: a rigid body whose angular velocity is orthogonal to a space-fixed direction.
//!
//! The chart is the action algebroid over `R³ ∋ γ` with anchor `ω ↦ γ × ω`.

use rand_chacha::ChaCha8Rng;

use super::{cross, hat, uniform_vec, v3, Params, SystemDescriptor};
use crate::algebroid::{AlgebroidChart, MatrixField, Structure};
use crate::constrained_linear::{AdaptedFrame, LinearNHSystem};
use crate::error::{Error, Result};
use crate::lagrangian::{mechanical_lagrangian, MetricField};
use crate::model::System;
use crate::numerics::{Matrix, ScalarField, Vector};

pub fn defaults() -> Params {
    Params::new(&[
        ("i1", 1.0),
        ("i2", 2.0),
        ("i3", 3.0),
        ("g", 0.0),
        ("chi1", 0.0),
        ("chi2", 0.0),
        ("chi3", 1.0),
    ])
}

fn unit(k: usize) -> Vector {
    let mut e = Vector::zeros(3);
    e[k] = 1.0;
    e
}

pub fn action_chart() -> AlgebroidChart {
    let anchor = MatrixField::new(3, 3, hat).with_derivative(|_| (0..3).map(|k| hat(&unit(k))).collect());
    AlgebroidChart::new("R3 x so(3) action", anchor, |_| Structure::so3())
        .with_labels(&["gamma1", "gamma2", "gamma3"], &["omega1", "omega2", "omega3"])
}

/// `[γ×a, γ×(γ×a), γ]` with `a` the coordinate axis least aligned with `γ`.
fn constraint_frame() -> MatrixField {
    MatrixField::new(3, 3, |g| {
        let a = unit(g.iamin());
        let u = cross(g, &a);
        Matrix::from_columns(&[u.clone(), cross(g, &u), g.clone()])
    })
    .with_derivative(|g| {
        let a = unit(g.iamin());
        let u = cross(g, &a);
        (0..3)
            .map(|k| {
                let e = unit(k);
                let du = cross(&e, &a);
                let dv = cross(&e, &u) + cross(g, &du);
                Matrix::from_columns(&[du, dv, e])
            })
            .collect()
    })
}

/// `(γ̇, ω̇, λ)` with the multiplier written in closed form.
pub fn closed_form(
    inertia: &Matrix,
    potential_gradient: &Vector,
    gamma: &Vector,
    w: &Vector,
) -> Result<(Vector, Vector, f64)> {
    let inv = inertia
        .clone()
        .try_inverse()
        .ok_or(Error::SingularMatrix { rcond: 0.0 })?;
    let torque = cross(&(inertia * w), w) + cross(gamma, potential_gradient);
    let ig = &inv * gamma;
    let lambda = -torque.dot(&ig) / ig.dot(gamma);
    Ok((cross(gamma, w), inv * (torque + gamma * lambda), lambda))
}

pub fn build(p: Params) -> Result<SystemDescriptor> {
    p.require_positive(&["i1", "i2", "i3"])?;
    let inertia = Matrix::from_diagonal(&v3(p.get("i1"), p.get("i2"), p.get("i3")));
    let chi = v3(p.get("chi1"), p.get("chi2"), p.get("chi3")) * p.get("g");
    let mut metric = MetricField::new(MatrixField::constant(inertia.clone()));
    if chi.amax() > 0.0 {
        let (c1, c2) = (chi.clone(), chi.clone());
        metric = metric.with_potential(
            ScalarField::on_base(3, move |g| g.dot(&c1)).with_gradient(move |_, _| c2.clone()),
        );
    }
    let sys = LinearNHSystem::new(
        mechanical_lagrangian(action_chart(), metric),
        AdaptedFrame::new(constraint_frame(), 2),
    )?;

    let oracle = move |g: &Vector, w: &Vector| -> Result<(Vector, Vector)> {
        let (gdot, wdot, _) = closed_form(&inertia, &chi, g, w)?;
        Ok((gdot, wdot))
    };
    let sampler = |rng: &mut ChaCha8Rng| {
        let mut g = uniform_vec(rng, 3, -1.0, 1.0);
        while g.norm() < 0.1 {
            g = uniform_vec(rng, 3, -1.0, 1.0);
        }
        let g = g.normalize();
        let w = uniform_vec(rng, 3, -1.0, 1.0);
        let w = &w - &g * g.dot(&w);
        (g, w)
    };
    Ok(SystemDescriptor::new(
        "veselova",
        p,
        System::Linear(sys),
        oracle,
        sampler,
        v3(0.0, 0.6, 0.8),
        v3(1.0, 0.4, -0.3),
    ))
}
