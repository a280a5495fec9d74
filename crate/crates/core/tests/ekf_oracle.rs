mod common;

use common::*;
use nalgebra::{DMatrix, DVector, Vector2, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use servotrack::ekf::{
    noise_grid, predict, run_filter, tune_noise_grid, update, ConstantVelocity, EkfModels, EkfState, LabelledTrack,
    SystemModel,
};

fn models(dt: f64, q: f64, meas_var: f64) -> EkfModels<ConstantVelocity> {
    let cv = ConstantVelocity::new(2, dt);
    let r = cv.process_noise(q);
    EkfModels::new(
        cv,
        r,
        DMatrix::identity(2, 2) * meas_var,
        DMatrix::identity(2, 2) * 0.01,
    )
    .unwrap()
}

#[test]
fn matches_a_directly_coded_kalman_filter() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let m = models(0.2, 3.0, 4.0);
    let kf = LinearKf::constant_velocity(0.2, to_static4(&m.r), to_static2(&m.q));
    let mut state = EkfState::new(DVector::zeros(4), DMatrix::identity(4, 4) * 10.0).unwrap();
    let mut x = Vector4::zeros();
    let mut p = nalgebra::Matrix4::identity() * 10.0;
    for _ in 0..2000 {
        let u = Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let z = Vector2::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
        state = predict(&state, &m, &dvec(u.as_slice())).unwrap();
        state = update(&state, &m, &dvec(z.as_slice())).unwrap();
        (x, p) = kf.predict(&x, &p, &u);
        (x, p) = kf.update(&x, &p, &z);
        for i in 0..4 {
            assert!((state.mu[i] - x[i]).abs() < 1e-9 * x[i].abs().max(1.0));
            for j in 0..4 {
                assert!((state.sigma[(i, j)] - p[(i, j)]).abs() < 1e-9 * p[(i, j)].abs().max(1.0));
            }
        }
    }
}

#[test]
fn jacobians_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cv = ConstantVelocity::new(2, 0.2);
    let h = 1e-5;
    for _ in 0..100 {
        let x = DVector::from_fn(4, |_, _| rng.random_range(-100.0..100.0));
        let u = DVector::from_fn(2, |_, _| rng.random_range(-5.0..5.0));
        let fd = |f: &dyn Fn(&DVector<f64>) -> DVector<f64>, rows: usize| {
            let mut j = DMatrix::zeros(rows, 4);
            for c in 0..4 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[c] += h;
                xm[c] -= h;
                j.set_column(c, &((f(&xp) - f(&xm)) / (2.0 * h)));
            }
            j
        };
        let check = |analytic: DMatrix<f64>, numeric: DMatrix<f64>| {
            let err = (&analytic - &numeric).norm() / analytic.norm().max(1.0);
            assert!(err < 1e-5, "relative error {err}");
        };
        check(cv.transition_jacobian(&x, &u), fd(&|s| cv.transition(s, &u), 4));
        check(cv.measurement_jacobian(&x), fd(&|s| cv.measure(s), 2));
        check(cv.label_jacobian(&x), fd(&|s| cv.label(s), 2));
    }
}

#[test]
fn covariance_stays_symmetric_and_psd() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = models(0.2, 50.0, 25.0);
    let mut state = EkfState::new(DVector::zeros(4), DMatrix::identity(4, 4) * 1e4).unwrap();
    for step in 0..10_000 {
        state = predict(&state, &m, &DVector::zeros(0)).unwrap();
        if rng.random_bool(0.8) {
            let z = DVector::from_fn(2, |_, _| rng.random_range(-500.0..500.0));
            state = update(&state, &m, &z).unwrap();
        }
        let asym = (&state.sigma - state.sigma.transpose()).amax();
        assert!(asym < 1e-9, "step {step}: asymmetry {asym}");
        let min_eig = state.sigma.clone().symmetric_eigenvalues().min();
        assert!(min_eig >= -1e-9, "step {step}: eigenvalue {min_eig}");
    }
}

#[test]
fn tuning_recovers_generating_noise_within_one_cell() {
    let dt = 0.2;
    let base = models(dt, 1.0, 1.0);
    let process = [1.0, 4.0, 16.0, 64.0, 256.0];
    let measurement = [0.25, 1.0, 4.0, 16.0, 64.0];
    let (true_p, true_m) = (2usize, 3usize);
    let grid = noise_grid(&process, &measurement);
    for seed in 0..6u64 {
        let r_true = &base.r * process[true_p];
        let track = pixel_track(100 + seed, 400, &r_true, measurement[true_m].sqrt(), dt);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // labels: true positions with small annotation noise
        let labels: Vec<_> = track
            .states
            .iter()
            .map(|x| {
                dvec(&[
                    x[0] + 0.1 * rng.random_range(-1.0..1.0),
                    x[1] + 0.1 * rng.random_range(-1.0..1.0),
                ])
            })
            .collect();
        let initial = EkfState::new(
            dvec(&[track.measurements[0][0], track.measurements[0][1], 0.0, 0.0]),
            DMatrix::from_diagonal(&dvec(&[100.0, 100.0, 1e3, 1e3])),
        )
        .unwrap();
        let controls = vec![DVector::zeros(0); track.measurements.len() - 1];
        let data = LabelledTrack {
            initial: &initial,
            controls: &controls,
            measurements: &track.measurements,
            labels: &labels,
        };
        let best = tune_noise_grid(&data, &base, &grid).unwrap();
        let (bp, bm) = (best.index / measurement.len(), best.index % measurement.len());
        assert!(
            bp.abs_diff(true_p) <= 1 && bm.abs_diff(true_m) <= 1,
            "seed {seed}: picked ({}, {}), truth ({}, {})",
            process[bp],
            measurement[bm],
            process[true_p],
            measurement[true_m]
        );
    }
}

#[test]
fn filter_runs_over_a_track() {
    let m = models(0.2, 100.0, 25.0);
    let track = pixel_track(9, 50, &m.r, 5.0, 0.2);
    let initial = EkfState::new(dvec(&[160.0, 120.0, 0.0, 0.0]), DMatrix::identity(4, 4) * 100.0).unwrap();
    let controls = vec![DVector::zeros(0); 49];
    let out = run_filter(&initial, &m, &controls, &track.measurements).unwrap();
    assert_eq!(out.len(), 50);
}
