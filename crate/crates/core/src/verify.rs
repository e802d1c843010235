//! Named verification suites run against the built-in systems.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebroid::{check_structure_equations, SectionField};
use crate::bracket::{nh_bracket, Observable};
use crate::error::{Error, Result};
use crate::integrator::{integrate, IntegratorConfig, Monitor, OdeFn, Trajectory};
use crate::model::System;
use crate::numerics::{sample_derivative, FdConfig, Vector};
use crate::reduction::{
    momentum_equation_residual, verify_bracket_morphism, verify_reduction, ChaplyginReduction,
    MomentumBundle, MorphismSpec,
};
use crate::systems::{self, ball, robot, suslov, ReductionPair, SystemDescriptor};

pub const CHECK_NAMES: [&str; 10] = [
    "structure_equations",
    "regularity_sweep",
    "route_equivalence",
    "energy",
    "noether",
    "momentum",
    "bracket_table",
    "reduction",
    "chaplygin",
    "oracle_match",
];

/// One measured quantity against its tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub detail: String,
}

impl CheckResult {
    /// Passes when `measured ≤ tolerance`.
    pub fn at_most(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance,
            pass: measured.is_finite() && measured <= tolerance,
            detail: String::new(),
        }
    }

    /// Passes when `measured > threshold`.
    pub fn above(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance: threshold,
            pass: measured.is_finite() && measured > threshold,
            detail: String::new(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Random states per pointwise check.
    pub samples: usize,
    /// Overrides the system's recommended horizon.
    pub horizon: Option<f64>,
    pub fd: FdConfig,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            samples: 100,
            horizon: None,
            fd: FdConfig::default(),
        }
    }
}

impl VerifyOptions {
    pub fn integrator(&self, desc: &SystemDescriptor) -> IntegratorConfig {
        let mut cfg = desc.integrator;
        if let Some(h) = self.horizon {
            cfg.horizon = h;
        }
        cfg
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Runs one named suite.
pub fn run_check(desc: &SystemDescriptor, check: &str, opts: &VerifyOptions) -> Result<Vec<CheckResult>> {
    if !CHECK_NAMES.contains(&check) {
        return Err(Error::InvalidParameters(format!(
            "unknown check `{check}`; expected one of {}",
            CHECK_NAMES.join(", ")
        )));
    }
    if !desc.checks().contains(&check) {
        return Err(Error::PreconditionFailed(format!(
            "check `{check}` does not apply to {}",
            desc.name
        )));
    }
    match check {
        "structure_equations" => structure_equations(desc, opts),
        "regularity_sweep" => regularity_sweep(desc, opts),
        "route_equivalence" => route_equivalence(desc, opts),
        "energy" => energy(desc, opts),
        "noether" => noether(desc, opts),
        "momentum" => momentum(desc, opts),
        "bracket_table" => bracket_table(desc, opts),
        "reduction" => reduction(desc, opts),
        "chaplygin" => chaplygin(desc, opts),
        _ => oracle_match(desc, opts),
    }
}

/// Runs every suite that applies to the system.
pub fn run_all(desc: &SystemDescriptor, opts: &VerifyOptions) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    for c in desc.checks() {
        out.extend(run_check(desc, c, opts)?);
    }
    Ok(out)
}

fn states(desc: &SystemDescriptor, opts: &VerifyOptions) -> Vec<(Vector, Vector)> {
    let mut rng = opts.rng();
    (0..opts.samples).map(|_| desc.sample_state(&mut rng)).collect()
}

fn source_states(pair: &ReductionPair, opts: &VerifyOptions, k: usize) -> Vec<(Vector, Vector)> {
    let mut rng = opts.rng();
    (0..k).map(|_| (pair.source_sampler)(&mut rng)).collect()
}

pub fn structure_equations(desc: &SystemDescriptor, opts: &VerifyOptions) -> Result<Vec<CheckResult>> {
    let mut rng = opts.rng();
    let mut out = Vec::new();
    for (k, chart) in desc.charts.iter().enumerate() {
        let pts: Vec<Vector> = (0..opts.samples)
            .map(|_| desc.sample_chart_point(k, &mut rng))
            .collect();
        let rep = check_structure_equations(chart, &pts, 1e-6, &opts.fd)?;
        let worst = rep
            .max_residual_anchor
            .max(rep.max_residual_jacobi)
            .max(rep.max_antisymmetry);
        out.push(
            CheckResult::at_most(format!("structure_equations[{}]", chart.name), worst, 1e-6).with_detail(
                format!(
                    "anchor {:.2e}, jacobi {:.2e}",
                    rep.max_residual_anchor, rep.max_residual_jacobi
                ),
            ),
        );
    }
    Ok(out)
}

/// Smallest eigenvalue of the constraint regularity matrix at a state.
pub fn regularity_margin(sys: &System, x: &Vector, y: &Vector) -> Result<f64> {
    let c = match sys {
        System::Free(l) => l.hessian_w(x, y)?,
        System::Linear(s) => s.regularity_matrix(x, y)?,
        System::Nonlinear(s) => s.regularity_matrix(x, y)?,
    };
    let sym = (&c + c.transpose()) * 0.5;
    Ok(sym.symmetric_eigenvalues().min())
}

pub fn regularity_sweep(desc: &SystemDescriptor, opts: &VerifyOptions) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let mut margin = f64::INFINITY;
    for (x, y) in states(desc, opts) {
        margin = margin.min(regularity_margin(&desc.system, &x, &y)?);
    }
    out.push(CheckResult::above("regularity_sweep", margin, 0.0).with_detail("smallest eigenvalue"));
    for pair in &desc.reductions {
        let mut margin = f64::INFINITY;
        for (x, y) in source_states(pair, opts, opts.samples) {
            margin = margin.min(regularity_margin(&pair.source, &x, &y)?);
        }
        out.push(
            CheckResult::above(
                format!("regularity_sweep[{}]", pair.source.chart().name),
                margin,
                0.0,
            )
            .with_detail("smallest eigenvalue"),
        );
    }
    Ok(out)
}

/// Largest disagreement among the four constrained-dynamics routes at a state.
pub fn route_spread(sys: &System, x: &Vector, y: &Vector) -> Result<f64> {
    let System::Linear(lin) = sys else {
        return Err(Error::PreconditionFailed(
            "route equivalence needs linear constraints".into(),
        ));
    };
    let ld = lin.constrained_section(x, y)?;
    let routes = [
        lin.constrained_dynamics_p(x, y)?,
        lin.constrained_dynamics_pbar(x, y)?,
        lin.constrained_dynamics_distributional(x, y)?,
    ];
    Ok(routes.iter().map(|r| ld.distance(r)).fold(0.0, f64::max))
}

pub fn route_equivalence(desc: &SystemDescriptor, opts: &VerifyOptions) -> Result<Vec<CheckResult>> {
    let mut worst = 0.0f64;
    for (x, y) in states(desc, opts) {
        worst = worst.max(route_spread(&desc.system, &x, &y)?);
    }
    let mut out = vec![CheckResult::at_most("route_equivalence", worst, 1e-10)];
    for pair in &desc.reductions {
        if matches!(pair.source, System::Linear(_)) {
            let mut worst = 0.0f64;
            for (x, y) in source_states(pair, opts, opts.samples) {
                worst = worst.max(route_spread(&pair.source, &x, &y)?);
            }
            out.push(CheckResult::at_most(
                format!("route_equivalence[{}]", pair.source.chart().name),
                worst,
                1e-10,
            ));
        }
    }
    Ok(out)
}

fn max_state_gap(a: &Trajectory, b: &Trajectory) -> f64 {
    let mut worst = 0.0f64;
    for k in 0..a.len().min(b.len()) {
        worst = worst
            .max((&a.xs[k] - &b.xs[k]).amax())
            .max((&a.ys[k] - &b.ys[k]).amax());
    }
    worst
}

/// Pointwise engine-vs-oracle gap over sampled states.
pub fn oracle_pointwise(desc: &SystemDescriptor, opts: &VerifyOptions) -> Result<f64> {
    let mut worst = 0.0f64;
    for (x, y) in states(desc, opts) {
        let (ex, ey) = desc.system.vector_field(&x, &y)?;
        let (ox, oy) = desc.oracle(&x, &y)?;
        worst = worst.max((ex - ox).amax()).max((ey - oy).amax());
    }
    Ok(worst)
}

/// Engine and oracle integrated from the default state.
pub fn oracle_trajectory_gap(desc: &SystemDescriptor, cfg: &IntegratorConfig) -> Result<f64> {
    let engine = integrate(&desc.system, &desc.x0, &desc.y0, cfg, &[])?;
    let (n, m) = desc.system.dims();
    let oracle = OdeFn::new(n, m, |x: &Vector, y: &Vector| desc.oracle_rhs(x, y));
    let reference = integrate(&oracle, &desc.x0, &desc.y0, cfg, &[])?;
    Ok(max_state_gap(&engine, &reference))
}

pub fn oracle_match(desc: &SystemDescriptor, opts: &VerifyOptions) -> Result<Vec<CheckResult>> {
    Ok(vec![
        CheckResult::at_most("oracle_match.pointwise", oracle_pointwise(desc, opts)?, 1e-9),
        CheckResult::at_most(
            "oracle_match.trajectory",
            oracle_trajectory_gap(desc, &opts.integrator(desc))?,
            1e-6,
        ),
    ])
}

/// Largest deviation of a monitor from its initial value.
pub fn drift(series: &[f64]) -> f64 {
    let first = series.first().copied().unwrap_or(0.0);
    series.iter().fold(0.0f64, |a, v| a.max((v - first).abs()))
}

/// `max |dE/dt − predicted rate|` over the interior samples.
pub fn energy_rate_gap(
    sys: &System,
    traj: &Trajectory,
    predicted: impl Fn(&Vector, &Vector) -> Result<f64>,
) -> Result<f64> {
    let energies = traj
        .xs
        .iter()
        .zip(&traj.ys)
        .map(|(x, y)| sys.energy(x, y))
        .collect::<Result<Vec<f64>>>()?;
    let rates = sample_derivative(&energies, traj.dt());
    let mut worst = 0.0f64;
    for k in 2..traj.len().saturating_sub(2) {
        worst = worst.max((rates[k] - predicted(&traj.xs[k], &traj.ys[k])?).abs());
    }
    Ok(worst)
}

pub fn energy(desc: &SystemDescriptor, opts: &VerifyOptions) -> Result<Vec<CheckResult>> {
    let sys = &desc.system;
    let (a, b) = (sys.clone(), sys.clone());
    let monitors = [
        Monitor::new("E", move |x, y| a.energy(x, y)),
        Monitor::new("constraint", move |x, y| b.constraint_residual(x, y)),
    ];
    let traj = integrate(sys, &desc.x0, &desc.y0, &opts.integrator(desc), &monitors)?;
    let e = traj.monitor("E").unwrap_or_default();
    let mut conservation = CheckResult::at_most("energy.drift", drift(e), 1e-6);
    let mut out = Vec::new();
    if let System::Nonlinear(nl) = sys {
        let predicted_change: f64 = {
            let rates = traj
                .xs
                .iter()
                .zip(&traj.ys)
                .map(|(x, y)| nl.energy_drift(x, y))
                .collect::<Result<Vec<f64>>>()?;
            simpson(&rates, traj.dt())
        };
        conservation = conservation.with_detail(format!(
            "measured change {:.6e}, predicted by the drift law {:.6e}",
            e.last().copied().unwrap_or(0.0) - e.first().copied().unwrap_or(0.0),
            predicted_change
        ));
        out.push(conservation);
        out.push(CheckResult::at_most(
            "energy.rate_law",
            energy_rate_gap(sys, &traj, |x, y| nl.energy_drift(x, y))?,
            1e-6,
        ));
    } else {
        out.push(conservation);
    }
    out.push(CheckResult::at_most(
        "energy.constraint",
        traj.monitor("constraint")
            .unwrap_or_default()
            .iter()
            .fold(0.0, |a: f64, v| a.max(*v)),
        1e-7,
    ));
    if desc.name == "veselova" {
        let norm = traj.xs.iter().fold(0.0f64, |a, g| a.max((g.norm() - 1.0).abs()));
        out.push(CheckResult::at_most("energy.sphere_norm", norm, 1e-7));
    }
    Ok(out)
}

/// Composite Simpson integral of equally spaced samples; the last panel is trapezoidal when the count is even.
fn simpson(f: &[f64], dt: f64) -> f64 {
    if f.len() < 2 {
        return 0.0;
    }
    let panels = (f.len() - 1) / 2 * 2;
    let mut total = 0.0;
    for k in (0..panels).step_by(2) {
        total += dt / 3.0 * (f[k] + 4.0 * f[k + 1] + f[k + 2]);
    }
    if panels + 1 < f.len() {
        total += 0.5 * dt * (f[panels] + f[panels + 1]);
    }
    total
}

/// Suslov system with `I₁ = I₂` and constraint direction `e₁`, so that `e₃` is a horizontal symmetry.
pub fn axisymmetric_suslov(desc: &SystemDescriptor) -> Result<SystemDescriptor> {
    let p = &desc.params;
    suslov::build(suslov::defaults().with_overrides(&[
        ("i1".into(), p.get("i1")),
        ("i2".into(), p.get("i1")),
        ("i3".into(), p.get("i3")),
        ("gamma1".into(), 1.0),
        ("gamma2".into(), 0.0),
        ("gamma3".into(), 0.0),
    ])?)
}

fn unit(m: usize, k: usize) -> Vector {
    let mut e = Vector::zeros(m);
    e[k] = 1.0;
    e
}

pub fn noether(desc: &SystemDescriptor, opts: &VerifyOptions) -> Result<Vec<CheckResult>> {
    let sym = axisymmetric_suslov(desc)?;
    let y0 = Vector::from_column_slice(&[0.0, 0.6, 0.8]);
    let traj = integrate(&sym.system, &sym.x0, &y0, &opts.integrator(&sym), &[])?;
    let mb = MomentumBundle::new(crate::algebroid::MatrixField::identity(3));
    let rep = momentum_equation_residual(&sym.system, &mb, &SectionField::constant(unit(3, 2)), &traj)?;
    Ok(vec![
        CheckResult::at_most("noether.drift", rep.drift, 1e-6),
        CheckResult::at_most("noether.source", rep.max_source, 1e-9),
    ])
}

/// Sections used by the momentum check: one for the free flow, one inside `D`.
fn momentum_sections(desc: &SystemDescriptor) -> (SectionField, Option<SectionField>) {
    let m = desc.system.dims().1;
    match (&desc.system, desc.name) {
        (System::Linear(_), "veselova") => {
            let e1 = unit(3, 0);
            (
                SectionField::constant(unit(3, 2)),
                Some(SectionField::new(3, move |g| systems::hat(g) * &e1)),
            )
        }
        (System::Linear(lin), _) => {
            let d0 = lin.frame().b.at(&desc.x0).column(0).into_owned();
            (
                SectionField::constant(unit(m, m - 1)),
                Some(SectionField::constant(d0)),
            )
        }
        _ => (SectionField::constant(unit(m, m - 1)), None),
    }
}

pub fn momentum(desc: &SystemDescriptor, opts: &VerifyOptions) -> Result<Vec<CheckResult>> {
    let m = desc.system.dims().1;
    let mb = MomentumBundle::new(crate::algebroid::MatrixField::identity(m));
    let cfg = opts.integrator(desc);
    let (free_section, constrained_section) = momentum_sections(desc);
    let free = System::Free(desc.system.lagrangian().clone());
    let traj = integrate(&free, &desc.x0, &desc.y0, &cfg, &[])?;
    let rep = momentum_equation_residual(&free, &mb, &free_section, &traj)?;
    let mut out = vec![CheckResult::at_most("momentum.free", rep.residual, 1e-6)
        .with_detail(format!("largest source {:.3e}", rep.max_source))];
    if let Some(sigma) = constrained_section {
        let traj = integrate(&desc.system, &desc.x0, &desc.y0, &cfg, &[])?;
        let rep = momentum_equation_residual(&desc.system, &mb, &sigma, &traj)?;
        out.push(
            CheckResult::at_most("momentum.constrained", rep.residual, 1e-6)
                .with_detail(format!("largest source {:.3e}", rep.max_source)),
        );
    }
    Ok(out)
}

fn expected_bracket(table: &[(&str, &str, f64)], a: &str, b: &str) -> f64 {
    for (p, q, v) in table {
        if *p == a && *q == b {
            return *v;
        }
        if *p == b && *q == a {
            return -*v;
        }
    }
    0.0
}

/// Largest entrywise error of all fundamental brackets against a table.
pub fn bracket_table_error(
    sys: &System,
    obs: &[Observable],
    table: &[(&str, &str, f64)],
    x: &Vector,
    y: &Vector,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for i in 0..obs.len() {
        for j in (i + 1)..obs.len() {
            let got = nh_bracket(sys, &obs[i], &obs[j], x, y)?;
            let want = expected_bracket(table, &obs[i].label, &obs[j].label);
            worst = worst.max((got - want).abs());
        }
    }
    Ok(worst)
}

fn ball_pair(desc: &SystemDescriptor) -> Result<&ReductionPair> {
    desc.reductions
        .first()
        .ok_or_else(|| Error::PreconditionFailed("no reduced chart".into()))
}

pub fn bracket_table(desc: &SystemDescriptor, opts: &VerifyOptions) -> Result<Vec<CheckResult>> {
    let p = &desc.params;
    let full_obs = ball::observables(p, 5);
    let reduced_obs = ball::observables(p, 2);
    let pair = ball_pair(desc)?;
    let k = opts.samples.min(20);
    let (mut full, mut reduced) = (0.0f64, 0.0f64);
    for (x, y) in states(desc, opts).into_iter().take(k) {
        let table = ball::bracket_table(p, &x, &y);
        full = full.max(bracket_table_error(&desc.system, &full_obs, &table, &x, &y)?);
        let (xp, yp) = pair.morphism.map_state(&x, &y);
        let table = ball::bracket_table(p, &xp, &yp);
        reduced = reduced.max(bracket_table_error(&pair.target, &reduced_obs, &table, &xp, &yp)?);
    }
    Ok(vec![
        CheckResult::at_most("bracket_table.full", full, 1e-8),
        CheckResult::at_most("bracket_table.reduced", reduced, 1e-8),
    ])
}

/// Largest gap between pushing a source trajectory through a morphism and through its stages.
pub fn staged_gap(direct: &MorphismSpec, stages: &[MorphismSpec], traj: &Trajectory) -> Result<f64> {
    let mut composite = stages[0].clone();
    for s in &stages[1..] {
        composite = composite.compose(s)?;
    }
    let mut worst = 0.0f64;
    for (x, y) in traj.xs.iter().zip(&traj.ys) {
        let (a, b) = direct.map_state(x, y);
        let (c, d) = composite.map_state(x, y);
        worst = worst.max((a - c).amax()).max((b - d).amax());
        let ta = direct.prolongation_matrix(x, y)?;
        let tc = composite.prolongation_matrix(x, y)?;
        worst = worst.max((ta - tc).amax());
    }
    Ok(worst)
}

pub fn reduction(desc: &SystemDescriptor, opts: &VerifyOptions) -> Result<Vec<CheckResult>> {
    let cfg = opts.integrator(desc);
    let mut out = Vec::new();
    for pair in &desc.reductions {
        let mut cfg = cfg;
        cfg.post_step_projection = matches!(pair.source, System::Nonlinear(_));
        let rep = verify_reduction(
            &pair.source,
            &pair.target,
            &pair.morphism,
            &pair.x0,
            &pair.y0,
            &cfg,
        )?;
        out.push(CheckResult::at_most(
            format!("reduction.commutation[{}]", pair.label),
            rep.deviation,
            1e-6,
        ));
        out.push(CheckResult::at_most(
            format!("reduction.energy[{}]", pair.label),
            rep.energy_deviation,
            1e-8,
        ));
        if !pair.stages.is_empty() {
            out.push(CheckResult::at_most(
                format!("reduction.staged[{}]", pair.label),
                staged_gap(&pair.morphism, &pair.stages, &rep.source)?,
                1e-9,
            ));
        }
        if matches!(pair.source, System::Nonlinear(_)) && desc.name == "rolling_ball" {
            let obs = ball::observables(&desc.params, 2);
            let pairs: Vec<(Observable, Observable)> = (0..obs.len())
                .flat_map(|i| ((i + 1)..obs.len()).map(move |j| (i, j)))
                .map(|(i, j)| (obs[i].clone(), obs[j].clone()))
                .collect();
            let sts = source_states(pair, opts, opts.samples.min(20));
            let worst = verify_bracket_morphism(&pair.source, &pair.target, &pair.morphism, &pairs, &sts)?;
            out.push(CheckResult::at_most(
                format!("reduction.bracket_morphism[{}]", pair.label),
                worst,
                1e-7,
            ));
        }
    }
    Ok(out)
}

/// Reduced states `(x, v)` for the robot's Chaplygin checks.
fn chaplygin_states(opts: &VerifyOptions) -> Vec<(Vector, Vector)> {
    let mut rng = opts.rng();
    (0..opts.samples)
        .map(|_| {
            (
                systems::uniform_vec(&mut rng, 2, -3.0, 3.0),
                systems::uniform_vec(&mut rng, 2, -1.0, 1.0),
            )
        })
        .collect()
}

/// Worst gaps of the Chaplygin reduction: gyroscopic form, pushforward, reduced accelerations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChaplyginGaps {
    pub jk: f64,
    pub jk_printed: f64,
    pub pushforward: f64,
    pub accel: f64,
    pub accel_printed: f64,
}

pub fn chaplygin_gaps(desc: &SystemDescriptor, opts: &VerifyOptions) -> Result<ChaplyginGaps> {
    let System::Linear(lin) = &desc.system else {
        return Err(Error::NotChaplyginType("system has no linear constraints".into()));
    };
    let red = ChaplyginReduction::new(lin)?;
    let k = robot::constants(&desc.params);
    let mut g = ChaplyginGaps {
        jk: 0.0,
        jk_printed: 0.0,
        pushforward: 0.0,
        accel: 0.0,
        accel_printed: 0.0,
    };
    for (x, v) in chaplygin_states(opts) {
        let jk = red.jk_form(&x, &v)?;
        let (_, vdot) = red.vector_field(&x, &v)?;
        g.jk = g.jk.max((&jk - robot::jk(&k, &v)).amax());
        g.jk_printed = g.jk_printed.max((&jk - robot::printed_jk(&k, &v)).amax());
        g.pushforward = g
            .pushforward
            .max((&vdot - red.pushed_constrained(&x, &v)?).amax());
        g.accel = g.accel.max((&vdot - robot::accel(&k, &v)).amax());
        g.accel_printed = g.accel_printed.max((&vdot - robot::printed_accel(&k, &v)).amax());
    }
    Ok(g)
}

pub fn chaplygin(desc: &SystemDescriptor, opts: &VerifyOptions) -> Result<Vec<CheckResult>> {
    let g = chaplygin_gaps(desc, opts)?;
    Ok(vec![
        CheckResult::at_most("chaplygin.jk_form", g.jk, 1e-9),
        CheckResult::at_most("chaplygin.pushforward", g.pushforward, 1e-8),
        CheckResult::at_most("chaplygin.reduced_accel", g.accel, 1e-10),
    ])
}
