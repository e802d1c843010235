//! Browser bindings: integrate a built-in system and hand flat sample arrays to the page.
//!
//! Every exported function returns a flat `Float64Array` with a fixed number of
//! columns per row, so the page can plot it without any decoding.

use nalgebra::DVector;
use nhmech::integrator::{integrate, IntegratorConfig, Monitor};
use nhmech::systems::{self, ball, SystemDescriptor};
use wasm_bindgen::prelude::*;

/// Samples per unit time in the returned series.
const SAMPLES_PER_UNIT: f64 = 50.0;
const MAX_HORIZON: f64 = 60.0;

fn build(name: &str, params: &[(&str, f64)]) -> Result<SystemDescriptor, String> {
    let overrides: Vec<(String, f64)> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    systems::build(name, &overrides).map_err(|e| e.to_string())
}

fn config(desc: &SystemDescriptor, horizon: f64) -> Result<IntegratorConfig, String> {
    if !(horizon > 0.0 && horizon <= MAX_HORIZON) {
        return Err(format!("horizon must lie in (0, {MAX_HORIZON}], got {horizon}"));
    }
    let mut cfg = desc.integrator;
    cfg.horizon = horizon;
    cfg.sample_every = ((1.0 / SAMPLES_PER_UNIT) / cfg.step).round().max(1.0) as usize;
    Ok(cfg)
}

/// Rows `(t, x, y, θ, ω, v₁, E)` of the sleigh's planar motion from rest at the origin.
pub fn sleigh_rows(
    mass: f64,
    inertia: f64,
    offset: f64,
    omega: f64,
    v1: f64,
    horizon: f64,
) -> Result<Vec<f64>, String> {
    let desc = build("chaplygin_sleigh", &[("m", mass), ("J", inertia), ("a", offset)])?;
    let pair = desc.reductions.first().ok_or("sleigh has no full chart")?;
    let sys = pair.source.clone();
    let cfg = config(&desc, horizon)?;
    let x0 = DVector::zeros(3);
    let body = DVector::from_column_slice(&[omega, v1, 0.0]);
    let y0 = pair
        .morphism
        .fiber_map
        .at(&x0)
        .try_inverse()
        .ok_or("singular frame")?
        * body;
    let e = sys.clone();
    let monitors = [Monitor::new("E", move |x, y| e.energy(x, y))];
    let tr = integrate(&sys, &x0, &y0, &cfg, &monitors).map_err(|e| e.to_string())?;
    let energy = tr.monitor("E").unwrap_or_default();
    let mut out = Vec::with_capacity(tr.len() * 7);
    for k in 0..tr.len() {
        let (x, y) = (&tr.xs[k], &tr.ys[k]);
        let body = pair.morphism.fiber_map.at(x) * y;
        out.extend([tr.times[k], x[1], x[2], x[0], body[0], body[1], energy[k]]);
    }
    Ok(out)
}

/// Rows `(t, x, y, E, E₀ + ∫ drift law)` for the ball on a table spinning at `table_rate`.
pub fn ball_rows(table_rate: f64, x: f64, y: f64, spin: f64, horizon: f64) -> Result<Vec<f64>, String> {
    let desc = build("rolling_ball", &[("Omega", table_rate)])?;
    let cfg = config(&desc, horizon)?;
    let x0 = DVector::from_column_slice(&[x, y, std::f64::consts::FRAC_PI_2, 0.0, 0.0]);
    let y0 = ball::on_constraint(&desc.params, &x0, &DVector::from_column_slice(&[0.05, 0.1, spin]));
    let (s, p) = (desc.system.clone(), desc.params.clone());
    let monitors = [
        Monitor::new("E", move |x, y| s.energy(x, y)),
        Monitor::new("rate", move |x, y| Ok(ball::energy_rate(&p, x, y))),
    ];
    let tr = integrate(&desc.system, &x0, &y0, &cfg, &monitors).map_err(|e| e.to_string())?;
    let energy = tr.monitor("E").unwrap_or_default();
    let rate = tr.monitor("rate").unwrap_or_default();
    let dt = tr.dt();
    let mut predicted = energy[0];
    let mut out = Vec::with_capacity(tr.len() * 5);
    for k in 0..tr.len() {
        if k > 0 {
            predicted += 0.5 * dt * (rate[k - 1] + rate[k]);
        }
        out.extend([tr.times[k], tr.xs[k][0], tr.xs[k][1], energy[k], predicted]);
    }
    Ok(out)
}

/// Rows `(t, ω₁, ω₂, ω₃, ⟨ω, Γ⟩, E)` for the Suslov body with constraint direction `Γ`.
pub fn suslov_rows(gamma: [f64; 3], horizon: f64) -> Result<Vec<f64>, String> {
    let desc = build(
        "suslov",
        &[("gamma1", gamma[0]), ("gamma2", gamma[1]), ("gamma3", gamma[2])],
    )?;
    let cfg = config(&desc, horizon)?;
    let g = DVector::from_column_slice(&gamma).normalize();
    let e = desc.system.clone();
    let monitors = [Monitor::new("E", move |x, y| e.energy(x, y))];
    let tr = integrate(&desc.system, &desc.x0, &desc.y0, &cfg, &monitors).map_err(|e| e.to_string())?;
    let energy = tr.monitor("E").unwrap_or_default();
    let mut out = Vec::with_capacity(tr.len() * 6);
    for k in 0..tr.len() {
        let w = &tr.ys[k];
        out.extend([tr.times[k], w[0], w[1], w[2], w.dot(&g), energy[k]]);
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn sleigh_trajectory(
    mass: f64,
    inertia: f64,
    offset: f64,
    omega: f64,
    v1: f64,
    horizon: f64,
) -> Result<Vec<f64>, JsError> {
    sleigh_rows(mass, inertia, offset, omega, v1, horizon).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn ball_energy(table_rate: f64, x: f64, y: f64, spin: f64, horizon: f64) -> Result<Vec<f64>, JsError> {
    ball_rows(table_rate, x, y, spin, horizon).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn suslov_trajectory(gamma1: f64, gamma2: f64, gamma3: f64, horizon: f64) -> Result<Vec<f64>, JsError> {
    suslov_rows([gamma1, gamma2, gamma3], horizon).map_err(|e| JsError::new(&e))
}
