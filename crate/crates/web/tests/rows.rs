use nhmech_web::{ball_rows, sleigh_rows, suslov_rows};

#[test]
fn sleigh_rows_conserve_energy_and_start_at_the_origin() {
    let rows = sleigh_rows(1.0, 1.0, 1.0, 1.0, 0.0, 5.0).unwrap();
    assert_eq!(rows.len() % 7, 0);
    assert_eq!(rows.len() / 7, 251);
    assert_eq!(&rows[..4], &[0.0, 0.0, 0.0, 0.0]);
    let e0 = rows[6];
    assert!(rows.chunks(7).all(|r| (r[6] - e0).abs() < 1e-9));
    let last = &rows[rows.len() - 7..];
    assert!(last[5] > 0.9, "spin turns into forward speed: {last:?}");
}

#[test]
fn ball_rows_track_the_drift_law() {
    let rows = ball_rows(1.0, 0.5, 0.0, 2.0, 5.0).unwrap();
    let last = &rows[rows.len() - 5..];
    assert!((last[3] - rows[3]).abs() > 1e-2);
    assert!((last[3] - last[4]).abs() < 1e-4, "{last:?}");
    let still = ball_rows(0.0, 0.5, 0.0, 2.0, 5.0).unwrap();
    assert!(still.chunks(5).all(|r| (r[3] - still[3]).abs() < 1e-9));
}

#[test]
fn suslov_rows_keep_the_constraint() {
    let rows = suslov_rows([0.3, -0.5, 0.8], 5.0).unwrap();
    assert!(rows.chunks(6).all(|r| r[4].abs() < 1e-9));
}

#[test]
fn bad_inputs_are_reported() {
    assert!(sleigh_rows(-1.0, 1.0, 1.0, 1.0, 0.0, 5.0).is_err());
    assert!(ball_rows(0.5, 0.0, 0.0, 1.0, 0.0).is_err());
    assert!(suslov_rows([0.0, 0.0, 0.0], 5.0).is_err());
}
