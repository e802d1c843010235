//! Homogeneous ball rolling without sliding on a table that rotates at constant rate.
//!
//! The full chart uses Euler angles `(θ, φ, ψ)` and the body frame `∂q₁, ∂q₂, ∂q₃`;
//! it is valid while `sin θ ≥ 0.1`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{uniform_vec, Params, ReductionPair, SystemDescriptor};
use crate::algebroid::{AlgebroidChart, MatrixField, Structure};
use crate::bracket::Observable;
use crate::constrained_nonlinear::NonlinearNHSystem;
use crate::error::Result;
use crate::lagrangian::{mechanical_lagrangian, MetricField};
use crate::model::System;
use crate::numerics::{Matrix, ScalarField, Vector};
use crate::reduction::MorphismSpec;

/// Smallest `sin θ` inside the chart's validity box.
pub const MIN_SIN_THETA: f64 = 0.1;

pub fn defaults() -> Params {
    Params::new(&[("r", 1.0), ("k", 0.6), ("Omega", 0.5)])
}

/// Ratio `k²/(k²+r²)`.
pub fn ratio(p: &Params) -> f64 {
    let (r, k) = (p.get("r"), p.get("k"));
    k * k / (k * k + r * r)
}

/// Body-frame brackets `[q₂,q₁] = q₃`, `[q₁,q₃] = q₂`, `[q₃,q₂] = q₁` on the last three slots.
pub fn body_structure() -> Structure {
    let mut c = Structure::zeros(5);
    c.set_bracket(3, 2, 4, 1.0);
    c.set_bracket(2, 4, 3, 1.0);
    c.set_bracket(4, 3, 2, 1.0);
    c
}

/// Anchor of the full chart in coordinates `(x, y, θ, φ, ψ)`.
pub fn euler_anchor(q: &Vector) -> Matrix {
    let (st, ct) = q[2].sin_cos();
    let (sp, cp) = q[4].sin_cos();
    let mut a = Matrix::zeros(5, 5);
    a[(0, 0)] = 1.0;
    a[(1, 1)] = 1.0;
    a[(2, 2)] = cp;
    a[(3, 2)] = sp / st;
    a[(4, 2)] = -sp * ct / st;
    a[(2, 3)] = sp;
    a[(3, 3)] = -cp / st;
    a[(4, 3)] = cp * ct / st;
    a[(4, 4)] = 1.0;
    a
}

pub fn full_chart() -> AlgebroidChart {
    AlgebroidChart::new(
        "TR2 x T(SO(3)) body frame",
        MatrixField::new(5, 5, euler_anchor),
        |_| body_structure(),
    )
    .with_labels(
        &["x", "y", "theta", "phi", "psi"],
        &["x_dot", "y_dot", "q1_dot", "q2_dot", "q3_dot"],
    )
}

pub fn reduced_chart() -> AlgebroidChart {
    let mut rho = Matrix::zeros(2, 5);
    rho[(0, 0)] = 1.0;
    rho[(1, 1)] = 1.0;
    AlgebroidChart::new("TR2 x R3", MatrixField::constant(rho), |_| body_structure())
        .with_labels(&["x", "y"], &["x_dot", "y_dot", "omega1", "omega2", "omega3"])
}

/// `π₁ … π₅` as functions on a chart with base dimension `n` whose first two coordinates are `(x, y)`.
pub fn momenta(p: &Params, n: usize) -> Vec<ScalarField> {
    let (r, k2, om) = (p.get("r"), p.get("k").powi(2), p.get("Omega"));
    let c = ratio(p);
    let mut out = vec![
        ScalarField::new(n, 5, move |_, v| r * v[0] + k2 * v[3]),
        ScalarField::new(n, 5, move |_, v| r * v[1] - k2 * v[2]),
        ScalarField::new(n, 5, move |_, v| k2 * v[4]),
    ];
    out.extend(rolling_constraints(r, c, om, n));
    out
}

fn rolling_constraints(r: f64, c: f64, om: f64, n: usize) -> Vec<ScalarField> {
    let first =
        ScalarField::new(n, 5, move |x, v| c * (v[0] - r * v[3] + om * x[1])).with_gradient(move |_, _| {
            let mut g = Vector::zeros(n + 5);
            g[1] = c * om;
            g[n] = c;
            g[n + 3] = -c * r;
            g
        });
    let second =
        ScalarField::new(n, 5, move |x, v| c * (v[1] + r * v[2] - om * x[0])).with_gradient(move |_, _| {
            let mut g = Vector::zeros(n + 5);
            g[0] = -c * om;
            g[n + 1] = c;
            g[n + 2] = c * r;
            g
        });
    vec![first, second]
}

/// Observables `x, y, π₁, π₂, π₃` and, on the full chart, `q₁, q₂, q₃`.
pub fn observables(p: &Params, n: usize) -> Vec<Observable> {
    let pis = momenta(p, n);
    let mut out = vec![
        Observable::base_coordinate("x", n, 5, 0),
        Observable::base_coordinate("y", n, 5, 1),
    ];
    for (i, f) in pis.into_iter().take(3).enumerate() {
        out.push(Observable::function(format!("pi{}", i + 1), f));
    }
    if n == 5 {
        for i in 0..3 {
            out.push(Observable::covector(format!("q{}", i + 1), move |_, ph| {
                let mut d = Vector::zeros(2 * ph.m());
                d[2 + i] = 1.0;
                Ok(d)
            }));
        }
    }
    out
}

/// Fundamental brackets among [`observables`] at `(x, v)`, keyed by label.
pub fn bracket_table(p: &Params, x: &Vector, v: &Vector) -> Vec<(&'static str, &'static str, f64)> {
    let (r, k2, om) = (p.get("r"), p.get("k").powi(2), p.get("Omega"));
    let c = ratio(p);
    let pi1 = r * v[0] + k2 * v[3];
    let pi2 = r * v[1] - k2 * v[2];
    let pi3 = k2 * v[4];
    vec![
        ("x", "pi1", r),
        ("y", "pi2", r),
        ("q1", "pi2", -1.0),
        ("q2", "pi1", 1.0),
        ("q3", "pi3", 1.0),
        ("pi1", "pi2", pi3),
        ("pi2", "pi3", c * pi1 + r * c * om * x[1]),
        ("pi3", "pi1", c * pi2 - r * c * om * x[0]),
    ]
}

/// Accelerations of the constrained flow in body velocities.
pub fn closed_form(p: &Params, v: &Vector) -> Vector {
    let (r, k2, om) = (p.get("r"), p.get("k").powi(2), p.get("Omega"));
    let den = k2 + r * r;
    Vector::from_column_slice(&[
        -om * k2 / den * v[1],
        om * k2 / den * v[0],
        om * r / den * v[0],
        om * r / den * v[1],
        0.0,
    ])
}

/// `dE/dt = Ω² k²/(k²+r²) (x ẋ + y ẏ)` on the constraint.
pub fn energy_rate(p: &Params, x: &Vector, v: &Vector) -> f64 {
    p.get("Omega").powi(2) * ratio(p) * (x[0] * v[0] + x[1] * v[1])
}

/// Body velocities on the constraint with prescribed spin.
pub fn on_constraint(p: &Params, x: &Vector, spin: &Vector) -> Vector {
    let (r, om) = (p.get("r"), p.get("Omega"));
    Vector::from_column_slice(&[
        r * spin[1] - om * x[1],
        om * x[0] - r * spin[0],
        spin[0],
        spin[1],
        spin[2],
    ])
}

fn sample_configuration(rng: &mut ChaCha8Rng) -> Vector {
    let lo = MIN_SIN_THETA.asin() + 0.1;
    Vector::from_column_slice(&[
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(lo..PI - lo),
        rng.random_range(-PI..PI),
        rng.random_range(-PI..PI),
    ])
}

pub fn build(p: Params) -> Result<SystemDescriptor> {
    p.require_positive(&["r", "k"])?;
    let (r, c, om) = (p.get("r"), ratio(&p), p.get("Omega"));
    let metric = || {
        let k2 = p.get("k").powi(2);
        MetricField::new(MatrixField::constant(Matrix::from_diagonal(
            &Vector::from_column_slice(&[1.0, 1.0, k2, k2, k2]),
        )))
    };
    let full = NonlinearNHSystem::new(
        mechanical_lagrangian(full_chart(), metric()),
        rolling_constraints(r, c, om, 5),
    )?;
    let reduced = NonlinearNHSystem::new(
        mechanical_lagrangian(reduced_chart(), metric()),
        rolling_constraints(r, c, om, 2),
    )?;
    let morphism = MorphismSpec::new(
        full_chart(),
        reduced_chart(),
        |q| Vector::from_column_slice(&[q[0], q[1]]),
        MatrixField::identity(5),
    )?;

    let ps = p.clone();
    let sample = Arc::new(move |rng: &mut ChaCha8Rng| {
        let q = sample_configuration(rng);
        let spin = uniform_vec(rng, 3, -1.0, 1.0);
        let v = on_constraint(&ps, &q, &spin);
        (q, v)
    });
    let x0 = Vector::from_column_slice(&[0.5, 0.0, PI / 2.0, 0.0, 0.0]);
    let y0 = on_constraint(&p, &x0, &Vector::from_column_slice(&[0.05, 0.1, 2.0]));
    let pair = ReductionPair {
        label: "TQ -> TQ/SO(3)".into(),
        source: System::Nonlinear(full.clone()),
        target: System::Nonlinear(reduced),
        morphism,
        stages: Vec::new(),
        source_sampler: sample.clone(),
        x0: x0.clone(),
        y0: y0.clone(),
    };

    let po = p.clone();
    let oracle = move |q: &Vector, v: &Vector| Ok((euler_anchor(q) * v, closed_form(&po, v)));
    let reduced_points = |rng: &mut ChaCha8Rng| uniform_vec(rng, 2, -1.0, 1.0);
    let mut desc = SystemDescriptor::new(
        "rolling_ball",
        p,
        System::Nonlinear(full),
        oracle,
        move |rng: &mut ChaCha8Rng| sample(rng),
        x0,
        y0,
    )
    .with_chart(reduced_chart(), reduced_points)
    .with_reduction(pair);
    desc.integrator.post_step_projection = true;
    Ok(desc)
}
