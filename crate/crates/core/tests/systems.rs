use approx::assert_abs_diff_eq;
use nhmech::systems::{self, ball, default_params, sleigh, SYSTEM_NAMES};
use nhmech::verify::{self, VerifyOptions};
use nhmech::{Error, System};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Vector = nalgebra::DVector<f64>;

fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

fn build(name: &str, overrides: &[(&str, f64)]) -> systems::SystemDescriptor {
    let o: Vec<(String, f64)> = overrides.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    systems::build(name, &o).unwrap()
}

#[test]
fn every_builtin_builds_with_defaults() {
    for name in SYSTEM_NAMES {
        let d = build(name, &[]);
        assert_eq!(d.name, name);
        assert!(
            d.system.constraint_residual(&d.x0, &d.y0).unwrap() < 1e-12,
            "{name}"
        );
        assert!(!d.checks().is_empty());
    }
}

#[test]
fn unknown_system_and_parameter_are_rejected() {
    assert!(matches!(
        systems::build("pendulum", &[]),
        Err(Error::UnknownSystem(_))
    ));
    let err = systems::build("suslov", &[("mass".into(), 1.0)]).unwrap_err();
    assert!(err.to_string().contains("mass"));
    assert!(default_params("pendulum").is_err());
}

#[test]
fn nonphysical_parameters_are_rejected() {
    for (name, key) in [
        ("suslov", "i2"),
        ("chaplygin_sleigh", "m"),
        ("veselova", "i1"),
        ("mobile_robot", "J"),
        ("rolling_ball", "k"),
    ] {
        let err = systems::build(name, &[(key.into(), -1.0)]).unwrap_err();
        assert!(matches!(err, Error::InvalidParameters(_)), "{name}: {err}");
    }
}

#[test]
fn sleigh_turns_forward_motion_into_spin() {
    let d = build("chaplygin_sleigh", &[]);
    let (_, acc) = d.oracle(&v(&[]), &v(&[1.0, 0.0, 0.0])).unwrap();
    assert_abs_diff_eq!(acc, v(&[0.0, 1.0, 0.0]), epsilon = 1e-15);
    let (_, engine) = d.system.vector_field(&v(&[]), &v(&[1.0, 0.0, 0.0])).unwrap();
    assert_abs_diff_eq!(engine, acc, epsilon = 1e-12);
}

#[test]
fn sleigh_closed_form_with_offset_contact() {
    let p = default_params("chaplygin_sleigh")
        .unwrap()
        .with_overrides(&[("b".into(), 0.4)])
        .unwrap();
    let (m, j, a, b) = (1.0, 1.0, 1.0, 0.4);
    let (om, v1) = (0.7, -0.3);
    let acc = sleigh::closed_form(&p, &v(&[om, v1, 0.0]));
    let den = j + m * a * a;
    assert_abs_diff_eq!(acc[0], a * m * om * (b * om - v1) / den, epsilon = 1e-15);
    assert_abs_diff_eq!(
        acc[1],
        a * om * ((j + m * (a * a + b * b)) * om - m * b * v1) / den,
        epsilon = 1e-15
    );
    assert_eq!(acc[2], 0.0);
}

#[test]
fn sleigh_lateral_velocity_stays_zero() {
    let d = build("chaplygin_sleigh", &[]);
    let tr = nhmech::integrator::integrate(&d.system, &d.x0, &d.y0, &d.integrator, &[]).unwrap();
    assert!(tr.ys.iter().all(|y| y[2].abs() < 1e-14));
}

#[test]
fn oracle_refuses_off_constraint_states() {
    let d = build("suslov", &[]);
    let err = d.oracle(&v(&[]), &v(&[0.0, 0.0, 1.0])).unwrap_err();
    assert!(matches!(err, Error::OffConstraint { .. }));
}

#[test]
fn robot_straight_line_rolling() {
    let d = build("mobile_robot", &[]);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (x, _) = d.sample_state(&mut rng);
    let System::Linear(lin) = &d.system else {
        panic!("robot is linearly constrained")
    };
    let frame = lin.frame().b.at(&x);
    let y = frame.column(0) + frame.column(1);
    let (_, acc) = d.oracle(&x, &y.into_owned()).unwrap();
    assert!(acc.amax() < 1e-14);
}

#[test]
fn ball_flat_components_vanish_without_spin_table() {
    let d = build("rolling_ball", &[("Omega", 0.0)]);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let (x, y) = d.sample_state(&mut rng);
        let (_, acc) = d.oracle(&x, &y).unwrap();
        assert!(acc.rows(0, 2).amax() < 1e-15);
    }
}

#[test]
fn ball_energy_rate_matches_drift_law() {
    let d = build("rolling_ball", &[("Omega", 1.0)]);
    let System::Nonlinear(nl) = &d.system else {
        panic!("ball is nonlinearly constrained")
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (r, k) = (d.params.get("r"), d.params.get("k"));
    for _ in 0..10 {
        let (x, y) = d.sample_state(&mut rng);
        let law = k * k / (k * k + r * r) * (x[0] * y[0] + x[1] * y[1]);
        assert_abs_diff_eq!(ball::energy_rate(&d.params, &x, &y), law, epsilon = 1e-14);
        assert_abs_diff_eq!(nl.energy_drift(&x, &y).unwrap(), law, epsilon = 1e-9);
    }
}

#[test]
fn verify_smoke() {
    let opts = VerifyOptions {
        samples: 10,
        horizon: Some(1.0),
        ..VerifyOptions::default()
    };
    let d = build("chaplygin_sleigh", &[]);
    let results = verify::run_all(&d, &opts).unwrap();
    assert!(results.iter().all(|r| r.pass), "{results:#?}");
    assert!(matches!(
        verify::run_check(&d, "bracket_table", &opts),
        Err(Error::PreconditionFailed(_))
    ));
    assert!(matches!(
        verify::run_check(&d, "nonsense", &opts),
        Err(Error::InvalidParameters(_))
    ));
}

#[test]
fn ball_energy_check_reports_the_drift_law() {
    let d = build("rolling_ball", &[("Omega", 1.0)]);
    let opts = VerifyOptions {
        samples: 5,
        horizon: Some(2.0),
        ..VerifyOptions::default()
    };
    let results = verify::energy(&d, &opts).unwrap();
    let drift = results.iter().find(|r| r.name == "energy.drift").unwrap();
    assert!(!drift.pass);
    assert!(drift.detail.contains("drift law"));
    assert!(results.iter().find(|r| r.name == "energy.rate_law").unwrap().pass);
}

#[test]
fn fd_override_keeps_dynamics() {
    let d = build("veselova", &[]);
    let coarse = d
        .clone()
        .with_fd(nhmech::numerics::FdConfig::uniform(1e-5, nhmech::numerics::FdScheme::Central2).unwrap())
        .unwrap();
    let (x, y) = (d.x0.clone(), d.y0.clone());
    let (_, a) = d.system.vector_field(&x, &y).unwrap();
    let (_, b) = coarse.system.vector_field(&x, &y).unwrap();
    assert_abs_diff_eq!(a, b, epsilon = 1e-8);
}
