//! Acceptance criteria, one PASS/FAIL line each, with the measurements behind it.
//!
//! Items marked `known` are closed forms that disagree with the engine because of a
//! sign or a degenerate choice in the quoted expression; the corrected form is checked
//! alongside. The process fails only on items that are not marked.

use std::f64::consts::PI;
use std::process::ExitCode;

use nhmech::algebroid::{complete_lift_defect, MatrixField, SectionField};
use nhmech::bracket::{evolution_residual, jacobiator, nh_bracket, Observable};
use nhmech::integrator::{integrate, IntegratorConfig, Method};
use nhmech::lagrangian::{mechanical_lagrangian, MetricField};
use nhmech::numerics::{FdConfig, ScalarField, Vector};
use nhmech::reduction::ChaplyginReduction;
use nhmech::systems::{self, ball, robot, suslov, veselova, SystemDescriptor, SYSTEM_NAMES};
use nhmech::verify::{self, CheckResult, VerifyOptions};
use nhmech::System;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SAMPLES: usize = 100;

struct Item {
    label: String,
    measured: f64,
    tolerance: f64,
    pass: bool,
    known: Option<&'static str>,
}

impl From<CheckResult> for Item {
    fn from(r: CheckResult) -> Self {
        Self {
            label: r.name,
            measured: r.measured,
            tolerance: r.tolerance,
            pass: r.pass,
            known: None,
        }
    }
}

fn at_most(label: impl Into<String>, measured: f64, tolerance: f64) -> Item {
    CheckResult::at_most(label, measured, tolerance).into()
}

fn above(label: impl Into<String>, measured: f64, threshold: f64) -> Item {
    CheckResult::above(label, measured, threshold).into()
}

fn known(mut item: Item, why: &'static str) -> Item {
    item.known = Some(why);
    item
}

fn tagged(prefix: &str, results: Vec<CheckResult>) -> Vec<Item> {
    results
        .into_iter()
        .map(|r| {
            let mut i = Item::from(r);
            i.label = format!("{prefix}: {}", i.label);
            i
        })
        .collect()
}

fn opts() -> VerifyOptions {
    VerifyOptions {
        samples: SAMPLES,
        ..VerifyOptions::default()
    }
}

fn build(name: &str, overrides: &[(&str, f64)]) -> SystemDescriptor {
    let o: Vec<(String, f64)> = overrides.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    systems::build(name, &o).unwrap_or_else(|e| panic!("building {name}: {e}"))
}

fn tilted_suslov() -> SystemDescriptor {
    build("suslov", &[("gamma1", 0.3), ("gamma2", -0.5), ("gamma3", 0.8)])
}

fn heavy_veselova() -> SystemDescriptor {
    build(
        "veselova",
        &[("g", 1.0), ("chi1", 0.2), ("chi2", -0.4), ("chi3", 0.9)],
    )
}

fn states(d: &SystemDescriptor, seed: u64) -> Vec<(Vector, Vector)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..SAMPLES).map(|_| d.sample_state(&mut rng)).collect()
}

fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

fn structure_equations() -> Vec<Item> {
    SYSTEM_NAMES
        .iter()
        .flat_map(|n| tagged(n, verify::structure_equations(&build(n, &[]), &opts()).unwrap()))
        .collect()
}

fn regularity() -> Vec<Item> {
    let mut out: Vec<Item> = SYSTEM_NAMES
        .iter()
        .flat_map(|n| tagged(n, verify::regularity_sweep(&build(n, &[]), &opts()).unwrap()))
        .collect();
    out.extend(tagged(
        "veselova, heavy",
        verify::regularity_sweep(&heavy_veselova(), &opts()).unwrap(),
    ));
    out
}

fn route_equivalence() -> Vec<Item> {
    let mut out = Vec::new();
    for n in ["suslov", "chaplygin_sleigh", "veselova", "mobile_robot"] {
        out.extend(tagged(
            n,
            verify::route_equivalence(&build(n, &[]), &opts()).unwrap(),
        ));
    }
    out.extend(tagged(
        "suslov, tilted",
        verify::route_equivalence(&tilted_suslov(), &opts()).unwrap(),
    ));
    out.extend(tagged(
        "veselova, heavy",
        verify::route_equivalence(&heavy_veselova(), &opts()).unwrap(),
    ));
    out
}

fn oracle_match() -> Vec<Item> {
    let mut out = Vec::new();
    for n in SYSTEM_NAMES {
        out.extend(tagged(n, verify::oracle_match(&build(n, &[]), &opts()).unwrap()));
    }
    out.extend(tagged(
        "suslov, tilted",
        verify::oracle_match(&tilted_suslov(), &opts()).unwrap(),
    ));
    out.extend(tagged(
        "veselova, heavy",
        verify::oracle_match(&heavy_veselova(), &opts()).unwrap(),
    ));

    let s = build("suslov", &[]);
    let p = &s.params;
    let inertia = nalgebra::DMatrix::from_diagonal(&v(&[p.get("i1"), p.get("i2"), p.get("i3")]));
    let inv = inertia.clone().try_inverse().unwrap();
    let gamma = v(&[0.0, 0.0, 1.0]);
    let mut worst = 0.0f64;
    for (x, w) in states(&s, 1) {
        let (_, engine) = s.system.vector_field(&x, &w).unwrap();
        let ig = &inv * &gamma;
        let eliminated = &inv * (w.cross(&ig) * (&inertia * &w).dot(&gamma));
        worst = worst.max((engine - eliminated).amax());
    }
    out.push(at_most("suslov: multiplier-free form", worst, 1e-9));

    let sl = build("chaplygin_sleigh", &[]);
    let (_, acc) = sl.system.vector_field(&v(&[]), &v(&[1.0, 0.0, 0.0])).unwrap();
    out.push(at_most(
        "sleigh: (omega, v1) = (1, 0) gives (0, 1)",
        (acc - v(&[0.0, 1.0, 0.0])).amax(),
        1e-12,
    ));

    let ves = heavy_veselova();
    let vp = &ves.params;
    let inertia = nalgebra::DMatrix::from_diagonal(&v(&[vp.get("i1"), vp.get("i2"), vp.get("i3")]));
    let grad = v(&[vp.get("chi1"), vp.get("chi2"), vp.get("chi3")]) * vp.get("g");
    let System::Linear(lin) = &ves.system else {
        unreachable!()
    };
    let mut worst = 0.0f64;
    for (g, w) in states(&ves, 2) {
        let (_, _, lambda) = veselova::closed_form(&inertia, &grad, &g, &w).unwrap();
        worst = worst.max((lin.solve_ld(&g, &w).unwrap().lambda[0] - lambda).abs());
    }
    out.push(at_most("veselova: multiplier", worst, 1e-9));

    let rb = build("mobile_robot", &[]);
    let k = robot::constants(&rb.params);
    let System::Linear(lin) = &rb.system else {
        unreachable!()
    };
    let red = ChaplyginReduction::new(lin).unwrap();
    let w_bar = red.reduced.hessian_w(&v(&[0.1, 0.2]), &v(&[0.3, -0.4])).unwrap();
    let expected = nalgebra::DMatrix::from_row_slice(2, 2, &[k.p, k.s, k.s, k.p]);
    out.push(at_most(
        "robot: reduced inertia [[P, S], [S, P]]",
        (w_bar - expected).amax(),
        1e-12,
    ));
    let frame = robot::atiyah_frame(&rb.params);
    let (mut printed, mut straight) = (0.0f64, 0.0f64);
    for (x, y) in states(&rb, 3) {
        let (_, ydot) = rb.system.vector_field(&x, &y).unwrap();
        let vel = v(&[y[0], y[1]]);
        printed = printed.max((&ydot - frame.columns(0, 2) * robot::printed_accel(&k, &vel)).amax());
        let (_, ys) = rb
            .system
            .vector_field(&x, &(frame.columns(0, 2) * v(&[y[0], y[0]])))
            .unwrap();
        straight = straight.max(ys.amax());
    }
    out.push(known(
        at_most("robot: wheel accelerations as quoted", printed, 1e-9),
        "quoted with the opposite sign of U; the U-corrected form is the oracle above",
    ));
    out.push(at_most("robot: equal wheel rates roll straight", straight, 1e-12));

    let b = build("rolling_ball", &[]);
    let pis = ball::momenta(&b.params, 5);
    let cfg = FdConfig::default();
    let mut worst = 0.0f64;
    for (x, y) in states(&b, 4) {
        let (_, ydot) = b.system.vector_field(&x, &y).unwrap();
        for pi in &pis[..3] {
            let grad = pi.gradient(&x, &y, &cfg).unwrap();
            worst = worst.max(grad.rows(5, 5).dot(&ydot).abs());
        }
    }
    out.push(at_most(
        "ball: pi1, pi2, pi3 constant along the flow",
        worst,
        1e-9,
    ));
    out
}

fn conservation() -> Vec<Item> {
    let mut out = Vec::new();
    for n in ["suslov", "chaplygin_sleigh", "veselova", "mobile_robot"] {
        out.extend(tagged(n, verify::energy(&build(n, &[]), &opts()).unwrap()));
    }
    out.extend(tagged(
        "suslov, tilted",
        verify::energy(&tilted_suslov(), &opts()).unwrap(),
    ));
    out.extend(tagged(
        "veselova, heavy",
        verify::energy(&heavy_veselova(), &opts()).unwrap(),
    ));
    for n in ["chaplygin_sleigh", "mobile_robot"] {
        let d = build(n, &[]);
        for pair in &d.reductions {
            let tr = integrate(&pair.source, &pair.x0, &pair.y0, &d.integrator, &[]).unwrap();
            let e: Vec<f64> = tr
                .xs
                .iter()
                .zip(&tr.ys)
                .map(|(x, y)| pair.source.energy(x, y).unwrap())
                .collect();
            out.push(at_most(
                format!("{n}: energy.drift[{}]", pair.source.chart().name),
                verify::drift(&e),
                1e-6,
            ));
        }
    }
    out.extend(tagged(
        "suslov",
        verify::noether(&build("suslov", &[]), &opts()).unwrap(),
    ));
    out
}

fn energy_law() -> Vec<Item> {
    let mut out = Vec::new();
    for om in [0.0, 0.5, 1.0] {
        let d = build("rolling_ball", &[("Omega", om)]);
        let System::Nonlinear(nl) = &d.system else {
            unreachable!()
        };
        let p = d.params.clone();
        let tr = integrate(&d.system, &d.x0, &d.y0, &d.integrator, &[]).unwrap();
        let gap = verify::energy_rate_gap(&d.system, &tr, |x, y| Ok(ball::energy_rate(&p, x, y))).unwrap();
        out.push(at_most(
            format!("Omega = {om}: measured dE/dt vs closed law"),
            gap,
            1e-6,
        ));
        let mut worst = 0.0f64;
        for (x, y) in states(&d, 5) {
            worst = worst.max((nl.energy_drift(&x, &y).unwrap() - ball::energy_rate(&p, &x, &y)).abs());
        }
        out.push(at_most(
            format!("Omega = {om}: drift formula vs closed law"),
            worst,
            1e-9,
        ));
        if om == 0.0 {
            let e: Vec<f64> = tr
                .xs
                .iter()
                .zip(&tr.ys)
                .map(|(x, y)| d.system.energy(x, y).unwrap())
                .collect();
            out.push(at_most("Omega = 0: energy drift", verify::drift(&e), 1e-6));
            let defect = states(&d, 6)
                .iter()
                .map(|(x, y)| d.system.bracket_defect(x, y).unwrap().stacked().amax())
                .fold(0.0, f64::max);
            out.push(at_most("Omega = 0: R_L", defect, 1e-9));
        }
    }
    out
}

fn find(obs: &[Observable], label: &str) -> Observable {
    obs.iter().find(|o| o.label == label).cloned().unwrap()
}

fn product(label: &str, a: &ScalarField, b: &ScalarField) -> Observable {
    Observable::function(label, a.mul(b))
}

fn brackets() -> Vec<Item> {
    let mut out = Vec::new();

    let sl = build("chaplygin_sleigh", &[]);
    let sl_fns: Vec<ScalarField> = (0..3).map(|a| ScalarField::new(0, 3, move |_, y| y[a])).collect();
    let sl_obs: Vec<Observable> = ["omega", "v1", "v2"]
        .iter()
        .zip(&sl_fns)
        .map(|(l, f)| Observable::function(*l, f.clone()))
        .chain([Observable::energy()])
        .collect();
    let b = build("rolling_ball", &[]);
    let pis = ball::momenta(&b.params, 5);
    let b_obs = ball::observables(&b.params, 5);
    let x_fn = ScalarField::new(5, 5, |x, _| x[0]);

    let (mut anti, mut leibniz, mut extension) = (0.0f64, 0.0f64, 0.0f64);
    for (x, y) in states(&sl, 7).into_iter().take(20) {
        for f in &sl_obs {
            for g in &sl_obs {
                let s = nh_bracket(&sl.system, f, g, &x, &y).unwrap()
                    + nh_bracket(&sl.system, g, f, &x, &y).unwrap();
                anti = anti.max(s.abs());
            }
        }
        let (om, v1) = (&sl_fns[0], &sl_fns[1]);
        let lhs = nh_bracket(&sl.system, &product("omega v1", om, v1), &sl_obs[3], &x, &y).unwrap();
        let rhs = om.eval(&x, &y) * nh_bracket(&sl.system, &sl_obs[1], &sl_obs[3], &x, &y).unwrap()
            + v1.eval(&x, &y) * nh_bracket(&sl.system, &sl_obs[0], &sl_obs[3], &x, &y).unwrap();
        leibniz = leibniz.max((lhs - rhs).abs());
        let bump = ScalarField::new(0, 3, |_, y| 1.0 + y[0] * y[0]);
        let extended = Observable::function("v1 + v2 (1 + omega^2)", sl_fns[1].add(&sl_fns[2].mul(&bump)));
        let a = nh_bracket(&sl.system, &sl_obs[1], &sl_obs[0], &x, &y).unwrap();
        let c = nh_bracket(&sl.system, &extended, &sl_obs[0], &x, &y).unwrap();
        extension = extension.max((a - c).abs());
    }
    for (x, y) in states(&b, 8).into_iter().take(20) {
        for f in &b_obs {
            for g in &b_obs {
                let s = nh_bracket(&b.system, f, g, &x, &y).unwrap()
                    + nh_bracket(&b.system, g, f, &x, &y).unwrap();
                anti = anti.max(s.abs());
            }
        }
        let pi2 = find(&b_obs, "pi2");
        let lhs = nh_bracket(&b.system, &product("x pi1", &x_fn, &pis[0]), &pi2, &x, &y).unwrap();
        let rhs = x[0] * nh_bracket(&b.system, &find(&b_obs, "pi1"), &pi2, &x, &y).unwrap()
            + pis[0].eval(&x, &y) * nh_bracket(&b.system, &find(&b_obs, "x"), &pi2, &x, &y).unwrap();
        leibniz = leibniz.max((lhs - rhs).abs());
        let bump = ScalarField::new(5, 5, |x, _| 1.0 + x[0] * x[0]);
        let extended = Observable::function("pi1 + pi4 (1 + x^2)", pis[0].add(&pis[3].mul(&bump)));
        for g in ["pi2", "x", "q2"] {
            let g = find(&b_obs, g);
            let a = nh_bracket(&b.system, &find(&b_obs, "pi1"), &g, &x, &y).unwrap();
            let c = nh_bracket(&b.system, &extended, &g, &x, &y).unwrap();
            extension = extension.max((a - c).abs());
        }
    }
    out.push(at_most("antisymmetry", anti, 1e-7));
    out.push(at_most("Leibniz rule", leibniz, 1e-7));
    out.push(at_most(
        "independence of the extension off the constraint",
        extension,
        1e-7,
    ));
    out.extend(tagged(
        "rolling_ball",
        verify::bracket_table(&b, &opts()).unwrap(),
    ));

    let (r, kk) = (b.params.get("r"), b.params.get("k"));
    let (x, y) = states(&b, 9).remove(0);
    let jac = |f: &str, g: &str, h: &str| {
        jacobiator(
            &b.system,
            &find(&b_obs, f),
            &find(&b_obs, g),
            &find(&b_obs, h),
            &x,
            &y,
        )
        .unwrap()
        .abs()
    };
    out.push(known(
        above("Jacobiator on (pi1, pi2, pi3)", jac("pi1", "pi2", "pi3"), 1e-3),
        "vanishes identically by the bracket table itself; (x, pi2, pi3) is used instead",
    ));
    let jx = jac("x", "pi2", "pi3");
    out.push(above("Jacobiator on (x, pi2, pi3)", jx, 1e-3));
    out.push(at_most(
        "Jacobiator on (x, pi2, pi3) vs r k^2/(k^2+r^2)",
        (jx - r * kk * kk / (kk * kk + r * r)).abs(),
        1e-5,
    ));

    let tr = integrate(&sl.system, &sl.x0, &sl.y0, &sl.integrator, &[]).unwrap();
    out.push(at_most(
        "evolution law, sleigh v1",
        evolution_residual(&sl.system, &sl_obs[1], &tr).unwrap(),
        1e-6,
    ));
    for om in [0.0, 0.5] {
        let d = build("rolling_ball", &[("Omega", om)]);
        let obs = ball::observables(&d.params, 5);
        let tr = integrate(&d.system, &d.x0, &d.y0, &d.integrator, &[]).unwrap();
        for f in [find(&obs, "pi1"), find(&obs, "x"), Observable::energy()] {
            let res = evolution_residual(&d.system, &f, &tr).unwrap();
            out.push(at_most(
                format!("evolution law, ball Omega = {om}, {}", f.label),
                res,
                1e-6,
            ));
        }
    }
    out
}

fn reduction() -> Vec<Item> {
    ["chaplygin_sleigh", "mobile_robot", "rolling_ball"]
        .iter()
        .flat_map(|n| tagged(n, verify::reduction(&build(n, &[]), &opts()).unwrap()))
        .collect()
}

fn chaplygin() -> Vec<Item> {
    let g = verify::chaplygin_gaps(&build("mobile_robot", &[]), &opts()).unwrap();
    let why = "quoted with the opposite sign of U; the U-corrected form matches";
    vec![
        known(at_most("gyroscopic 1-form as quoted", g.jk_printed, 1e-9), why),
        at_most("gyroscopic 1-form, U-corrected", g.jk, 1e-9),
        at_most("JK-forced dynamics vs anchor pushforward", g.pushforward, 1e-8),
        known(
            at_most("reduced accelerations as quoted", g.accel_printed, 1e-10),
            why,
        ),
        at_most("reduced accelerations, U-corrected", g.accel, 1e-10),
    ]
}

fn momentum() -> Vec<Item> {
    let mut out: Vec<Item> = SYSTEM_NAMES
        .iter()
        .flat_map(|n| tagged(n, verify::momentum(&build(n, &[]), &opts()).unwrap()))
        .collect();
    out.extend(tagged(
        "veselova, heavy",
        verify::momentum(&heavy_veselova(), &opts()).unwrap(),
    ));
    out.extend(tagged(
        "suslov",
        verify::noether(&build("suslov", &[]), &opts()).unwrap(),
    ));
    out
}

fn oscillator_error(steps: usize) -> f64 {
    let chart = nhmech::algebroid::AlgebroidChart::tangent_bundle(1);
    let metric = MetricField::new(MatrixField::identity(1))
        .with_potential(ScalarField::on_base(1, |x| 0.5 * x[0] * x[0]));
    let sys = System::Free(mechanical_lagrangian(chart, metric));
    let cfg = IntegratorConfig {
        method: Method::Rk4,
        step: 2.0 * PI / steps as f64,
        horizon: 2.0 * PI,
        sample_every: steps,
        ..IntegratorConfig::default()
    };
    let tr = integrate(&sys, &v(&[1.0]), &v(&[0.0]), &cfg, &[]).unwrap();
    let (x, y) = tr.last().unwrap();
    (x[0] - 1.0).abs().max(y[0].abs())
}

fn numerics() -> Vec<Item> {
    let mut out = Vec::new();
    let factor = oscillator_error(50) / oscillator_error(100);
    out.push(Item {
        label: "RK4 error ratio under step halving".into(),
        measured: factor,
        tolerance: 16.0,
        pass: (12.0..=20.0).contains(&factor),
        known: None,
    });

    let cfg = FdConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    let ves = build("veselova", &[]);
    let b = build("rolling_ball", &[]);
    let sigma3 = SectionField::new(3, |g| v(&[g[1] * g[2], g[0].cos(), 1.0 + g[2]]));
    let mu3 = SectionField::new(3, |g| v(&[g[0] * g[0], -g[2], g[1].sin()]));
    let sigma5 = SectionField::new(5, |q| v(&[q[2].sin(), q[0], q[4] * q[1], 1.0, q[3].cos()]));
    let mu5 = SectionField::new(5, |q| v(&[q[1], q[2] * q[2], -q[0], q[4].sin(), 0.5]));
    for _ in 0..SAMPLES {
        let (g, w) = ves.sample_state(&mut rng);
        worst = worst.max(complete_lift_defect(ves.system.chart(), &sigma3, &mu3, &g, &w, &cfg).unwrap());
        let (q, u) = b.sample_state(&mut rng);
        worst = worst.max(complete_lift_defect(b.system.chart(), &sigma5, &mu5, &q, &u, &cfg).unwrap());
    }
    out.push(at_most("complete-lift defining property", worst, 1e-7));

    let pis = ball::momenta(&b.params, 5);
    let pts = states(&b, 11);
    let mut worst = 0.0f64;
    for f in &pis[3..] {
        worst = worst.max(f.gradient_mismatch(&pts, &cfg).unwrap());
    }
    let heavy = heavy_veselova();
    if let Some(pot) = heavy
        .system
        .lagrangian()
        .metric()
        .and_then(|m| m.potential.clone())
    {
        let pts: Vec<(Vector, Vector)> = states(&heavy, 12).into_iter().map(|(g, _)| (g, v(&[]))).collect();
        worst = worst.max(pot.gradient_mismatch(&pts, &cfg).unwrap());
    }
    out.push(at_most(
        "analytic gradients vs central differences (relative)",
        worst,
        1e-5,
    ));

    let suslov_frame = suslov::frame_with_last(&v(&[0.3, -0.5, 0.8]).normalize());
    let ortho = (suslov_frame.transpose() * &suslov_frame - nalgebra::DMatrix::identity(3, 3)).amax();
    out.push(at_most("Suslov frame orthonormal", ortho, 1e-14));
    out
}

fn report(id: u8, title: &str, items: &[Item]) -> (bool, usize) {
    let pass = items.iter().all(|i| i.pass);
    let unexpected = items.iter().filter(|i| !i.pass && i.known.is_none()).count();
    println!("{} {id:>2}. {title}", if pass { "PASS" } else { "FAIL" });
    for i in items {
        let mark = if i.pass { "ok  " } else { "miss" };
        print!(
            "        {mark} {}: {:.3e} (tol {:e})",
            i.label, i.measured, i.tolerance
        );
        match (i.pass, i.known) {
            (false, Some(why)) => println!("  [known: {why}]"),
            _ => println!(),
        }
    }
    (pass, unexpected)
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Vec<Item>); 11] = [
        ("structure equations on every chart", structure_equations),
        ("regularity of the constrained systems", regularity),
        (
            "agreement of the four constrained-dynamics routes",
            route_equivalence,
        ),
        ("engine vs closed-form equations of motion", oracle_match),
        ("energy, Noether and constraint conservation", conservation),
        ("rolling-ball energy law", energy_law),
        ("nonholonomic bracket properties and tables", brackets),
        ("reduction by morphisms", reduction),
        ("Chaplygin reduction of the robot", chaplygin),
        ("momentum equation", momentum),
        ("numerical self-checks", numerics),
    ];
    let mut unexpected = 0;
    let mut failed = 0;
    for (k, (title, f)) in criteria.iter().enumerate() {
        let (pass, bad) = report(k as u8 + 1, title, &f());
        unexpected += bad;
        failed += usize::from(!pass);
    }
    println!(
        "{} of 11 criteria pass; {unexpected} unexpected failures",
        11 - failed
    );
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
