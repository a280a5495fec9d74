//! Oracles and generators shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Plain linear Kalman filter for a 2-axis constant-velocity model, written
/// with fixed-size matrices and no shared code with the library.
pub struct LinearKf {
    pub f: Matrix4<f64>,
    pub b: Matrix4x2,
    pub h: Matrix2x4<f64>,
    pub r: Matrix4<f64>,
    pub q: Matrix2<f64>,
}

pub type Matrix4x2 = nalgebra::Matrix4x2<f64>;

impl LinearKf {
    pub fn constant_velocity(dt: f64, r: Matrix4<f64>, q: Matrix2<f64>) -> Self {
        let f = Matrix4::new(
            1.0, 0.0, dt, 0.0, //
            0.0, 1.0, 0.0, dt, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 1.0,
        );
        #[rustfmt::skip]
        let b = Matrix4x2::new(
            0.5 * dt * dt, 0.0,
            0.0, 0.5 * dt * dt,
            dt, 0.0,
            0.0, dt,
        );
        let h = Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0);
        Self { f, b, h, r, q }
    }

    pub fn predict(&self, x: &Vector4<f64>, p: &Matrix4<f64>, u: &Vector2<f64>) -> (Vector4<f64>, Matrix4<f64>) {
        (self.f * x + self.b * u, self.f * p * self.f.transpose() + self.r)
    }

    pub fn update(&self, x: &Vector4<f64>, p: &Matrix4<f64>, z: &Vector2<f64>) -> (Vector4<f64>, Matrix4<f64>) {
        let s = self.h * p * self.h.transpose() + self.q;
        let k = p * self.h.transpose() * s.try_inverse().expect("invertible innovation");
        (x + k * (z - self.h * x), (Matrix4::identity() - k * self.h) * p)
    }
}

pub fn to_static4(m: &DMatrix<f64>) -> Matrix4<f64> {
    Matrix4::from_iterator(m.iter().copied())
}

pub fn to_static2(m: &DMatrix<f64>) -> Matrix2<f64> {
    Matrix2::from_iterator(m.iter().copied())
}

pub fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

/// Draws from N(0, cov) through the Cholesky factor.
pub fn sample_gaussian(cov: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let l = cov.clone().cholesky().expect("positive definite").l();
    let n = DVector::from_fn(cov.nrows(), |_, _| StandardNormal.sample(rng));
    l * n
}

/// Constant-velocity pixel track: true states, and position measurements
/// with isotropic noise `meas_sigma`.
pub struct PixelTrack {
    pub states: Vec<DVector<f64>>,
    pub measurements: Vec<DVector<f64>>,
}

pub fn pixel_track(seed: u64, steps: usize, r: &DMatrix<f64>, meas_sigma: f64, dt: f64) -> PixelTrack {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = dvec(&[160.0, 120.0, 8.0, -5.0]);
    let mut states = Vec::with_capacity(steps);
    let mut measurements = Vec::with_capacity(steps);
    for t in 0..steps {
        if t > 0 {
            let w = sample_gaussian(r, &mut rng);
            let (px, py, vx, vy) = (x[0], x[1], x[2], x[3]);
            x = dvec(&[px + dt * vx, py + dt * vy, vx, vy]) + w;
        }
        let nx: f64 = StandardNormal.sample(&mut rng);
        let ny: f64 = StandardNormal.sample(&mut rng);
        measurements.push(dvec(&[x[0] + meas_sigma * nx, x[1] + meas_sigma * ny]));
        states.push(x.clone());
    }
    PixelTrack { states, measurements }
}

pub fn rmse(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let s: f64 = a
        .iter()
        .zip(b)
        .map(|(p, q)| (p.0 - q.0).powi(2) + (p.1 - q.1).powi(2))
        .sum();
    (s / a.len() as f64).sqrt()
}
