//! Extended Kalman filter with a trajectory log-likelihood and a grid search
//! over noise scalings.
//!
//! Noise naming follows the filter equations used throughout this crate:
//! `R` is process noise, `Q` measurement noise and `P` label noise.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EkfError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("innovation covariance is singular or ill-conditioned (condition {condition:e})")]
    SingularInnovation { condition: f64 },
    #[error("{0} covariance is not positive definite")]
    NotPositiveDefinite(&'static str),
    #[error("noise grid is empty")]
    EmptyGrid,
}

/// Innovation covariances above this condition number are rejected.
pub const MAX_INNOVATION_CONDITION: f64 = 1e12;

/// Dynamics `f`, measurement `g`, label `h` and their Jacobians.
pub trait SystemModel {
    fn state_dim(&self) -> usize;
    fn measurement_dim(&self) -> usize;
    fn label_dim(&self) -> usize;
    fn control_dim(&self) -> usize;

    fn transition(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;
    fn transition_jacobian(&self, x: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64>;
    fn measure(&self, x: &DVector<f64>) -> DVector<f64>;
    fn measurement_jacobian(&self, x: &DVector<f64>) -> DMatrix<f64>;
    fn label(&self, x: &DVector<f64>) -> DVector<f64>;
    fn label_jacobian(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct EkfState {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
}

impl EkfState {
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>) -> Result<Self, EkfError> {
        check_square("state covariance", &sigma, mu.len())?;
        Ok(Self { mu, sigma })
    }
}

#[derive(Debug, Clone)]
pub struct EkfModels<M> {
    pub system: M,
    /// Process noise.
    pub r: DMatrix<f64>,
    /// Measurement noise.
    pub q: DMatrix<f64>,
    /// Label noise.
    pub p: DMatrix<f64>,
}

impl<M: SystemModel> EkfModels<M> {
    pub fn new(system: M, r: DMatrix<f64>, q: DMatrix<f64>, p: DMatrix<f64>) -> Result<Self, EkfError> {
        check_square("R", &r, system.state_dim())?;
        check_square("Q", &q, system.measurement_dim())?;
        check_square("P", &p, system.label_dim())?;
        for (name, m) in [("R", &r), ("Q", &q), ("P", &p)] {
            if m.clone().cholesky().is_none() {
                return Err(EkfError::NotPositiveDefinite(name));
            }
        }
        Ok(Self { system, r, q, p })
    }

    /// Same system with process and measurement noise multiplied by the given factors.
    pub fn scaled(&self, scale: NoiseScale) -> Self
    where
        M: Clone,
    {
        Self {
            system: self.system.clone(),
            r: &self.r * scale.process,
            q: &self.q * scale.measurement,
            p: self.p.clone(),
        }
    }
}

fn check_square(what: &'static str, m: &DMatrix<f64>, n: usize) -> Result<(), EkfError> {
    for found in [m.nrows(), m.ncols()] {
        if found != n {
            return Err(EkfError::DimensionMismatch {
                what,
                expected: n,
                found,
            });
        }
    }
    Ok(())
}

fn check_len(what: &'static str, v: &DVector<f64>, n: usize) -> Result<(), EkfError> {
    if v.len() != n {
        return Err(EkfError::DimensionMismatch {
            what,
            expected: n,
            found: v.len(),
        });
    }
    Ok(())
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// `mu' = f(mu, u)`, `Sigma' = F Sigma F^T + R`.
pub fn predict<M: SystemModel>(
    state: &EkfState,
    models: &EkfModels<M>,
    u: &DVector<f64>,
) -> Result<EkfState, EkfError> {
    let sys = &models.system;
    check_len("state", &state.mu, sys.state_dim())?;
    if !u.is_empty() {
        check_len("control", u, sys.control_dim())?;
    }
    let f = sys.transition_jacobian(&state.mu, u);
    let sigma = symmetrize(&f * &state.sigma * f.transpose() + &models.r);
    Ok(EkfState {
        mu: sys.transition(&state.mu, u),
        sigma,
    })
}

/// Standard EKF correction with gain `K = Sigma G^T (G Sigma G^T + Q)^-1`.
pub fn update<M: SystemModel>(state: &EkfState, models: &EkfModels<M>, z: &DVector<f64>) -> Result<EkfState, EkfError> {
    let sys = &models.system;
    check_len("state", &state.mu, sys.state_dim())?;
    check_len("measurement", z, sys.measurement_dim())?;

    let g = sys.measurement_jacobian(&state.mu);
    let innovation_cov = symmetrize(&g * &state.sigma * g.transpose() + &models.q);
    let sv = innovation_cov.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition < MAX_INNOVATION_CONDITION) {
        return Err(EkfError::SingularInnovation { condition });
    }
    let inv = innovation_cov
        .try_inverse()
        .ok_or(EkfError::SingularInnovation { condition })?;
    let gain = &state.sigma * g.transpose() * inv;
    let residual = z - sys.measure(&state.mu);
    let n = state.mu.len();
    let sigma = symmetrize((DMatrix::identity(n, n) - &gain * &g) * &state.sigma);
    Ok(EkfState {
        mu: &state.mu + &gain * residual,
        sigma,
    })
}

/// `log N(x; mean, cov)`.
pub fn log_gaussian(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64, EkfError> {
    let k = x.len();
    check_len("density argument", mean, k)?;
    check_square("covariance", cov, k)?;
    let chol = cov.clone().cholesky().ok_or(EkfError::NotPositiveDefinite("density"))?;
    let r = x - mean;
    let whitened = chol
        .l()
        .solve_lower_triangular(&r)
        .ok_or(EkfError::NotPositiveDefinite("density"))?;
    let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Ok(-0.5 * (k as f64 * (2.0 * PI).ln() + log_det + whitened.norm_squared()))
}

/// Joint log-density of a state trajectory with its labels and measurements:
/// transitions `t = 1..T` under `R`, labels and measurements `t = 0..T` under
/// `P` and `Q`. The initial-state prior is not included.
///
/// `controls[t - 1]` drives the transition into `states[t]`.
pub fn trajectory_log_likelihood<M: SystemModel>(
    states: &[DVector<f64>],
    controls: &[DVector<f64>],
    measurements: &[DVector<f64>],
    labels: &[DVector<f64>],
    models: &EkfModels<M>,
) -> Result<f64, EkfError> {
    let n = states.len();
    for (what, len, expected) in [
        ("controls", controls.len(), n.saturating_sub(1)),
        ("measurements", measurements.len(), n),
        ("labels", labels.len(), n),
    ] {
        if len != expected {
            return Err(EkfError::DimensionMismatch {
                what,
                expected,
                found: len,
            });
        }
    }
    let sys = &models.system;
    let mut total = 0.0;
    for t in 0..n {
        check_len("state", &states[t], sys.state_dim())?;
        if t > 0 {
            let predicted = sys.transition(&states[t - 1], &controls[t - 1]);
            total += log_gaussian(&states[t], &predicted, &models.r)?;
        }
        total += log_gaussian(&labels[t], &sys.label(&states[t]), &models.p)?;
        total += log_gaussian(&measurements[t], &sys.measure(&states[t]), &models.q)?;
    }
    Ok(total)
}

/// Runs the filter over a measurement sequence: update on `z_0`, then
/// predict-with-`u_t` and update on `z_t` for each later step.
pub fn run_filter<M: SystemModel>(
    initial: &EkfState,
    models: &EkfModels<M>,
    controls: &[DVector<f64>],
    measurements: &[DVector<f64>],
) -> Result<Vec<EkfState>, EkfError> {
    if controls.len() != measurements.len().saturating_sub(1) {
        return Err(EkfError::DimensionMismatch {
            what: "controls",
            expected: measurements.len().saturating_sub(1),
            found: controls.len(),
        });
    }
    let mut out = Vec::with_capacity(measurements.len());
    let mut state = initial.clone();
    for (t, z) in measurements.iter().enumerate() {
        if t > 0 {
            state = predict(&state, models, &controls[t - 1])?;
        }
        state = update(&state, models, z)?;
        out.push(state.clone());
    }
    Ok(out)
}

/// Multipliers applied to `R` and `Q` during tuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseScale {
    pub process: f64,
    pub measurement: f64,
}

/// Cartesian product of the two scale lists, process-major.
pub fn noise_grid(process: &[f64], measurement: &[f64]) -> Vec<NoiseScale> {
    process
        .iter()
        .flat_map(|&p| {
            measurement.iter().map(move |&m| NoiseScale {
                process: p,
                measurement: m,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneResult {
    pub index: usize,
    pub scale: NoiseScale,
    pub log_likelihood: f64,
}

/// Labelled data for noise tuning.
pub struct LabelledTrack<'a> {
    pub initial: &'a EkfState,
    pub controls: &'a [DVector<f64>],
    pub measurements: &'a [DVector<f64>],
    pub labels: &'a [DVector<f64>],
}

/// Log-likelihood of the labels under the filter's own posterior:
/// `sum_t log N(y_t; h(mu_t), H_t Sigma_t H_t^T + P)`.
pub fn label_log_likelihood<M: SystemModel>(
    filtered: &[EkfState],
    labels: &[DVector<f64>],
    models: &EkfModels<M>,
) -> Result<f64, EkfError> {
    if filtered.len() != labels.len() {
        return Err(EkfError::DimensionMismatch {
            what: "labels",
            expected: filtered.len(),
            found: labels.len(),
        });
    }
    let sys = &models.system;
    filtered
        .iter()
        .zip(labels)
        .map(|(s, y)| {
            let h = sys.label_jacobian(&s.mu);
            let cov = symmetrize(&h * &s.sigma * h.transpose() + &models.p);
            log_gaussian(y, &sys.label(&s.mu), &cov)
        })
        .sum()
}

/// Filters the track under every grid scaling and keeps the scaling under
/// which the labels are most probable given the filter output (means and
/// covariances). Ties keep the earliest grid point.
///
/// Scoring point estimates alone cannot separate a common scaling of `R` and
/// `Q`; carrying the posterior covariance makes the overall scale observable.
pub fn tune_noise_grid<M: SystemModel + Clone>(
    track: &LabelledTrack<'_>,
    models: &EkfModels<M>,
    grid: &[NoiseScale],
) -> Result<TuneResult, EkfError> {
    let mut best: Option<TuneResult> = None;
    for (index, &scale) in grid.iter().enumerate() {
        let scaled = models.scaled(scale);
        let filtered = run_filter(track.initial, &scaled, track.controls, track.measurements)?;
        let ll = label_log_likelihood(&filtered, track.labels, &scaled)?;
        if best.is_none_or(|b| ll > b.log_likelihood) {
            best = Some(TuneResult {
                index,
                scale,
                log_likelihood: ll,
            });
        }
    }
    best.ok_or(EkfError::EmptyGrid)
}

/// Constant-velocity model over `axes` coordinates. State is
/// `[p_0..p_k, v_0..v_k]`; measurements and labels are the positions. An
/// optional control is a per-axis acceleration held over the step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantVelocity {
    pub axes: usize,
    pub dt: f64,
}

impl ConstantVelocity {
    pub fn new(axes: usize, dt: f64) -> Self {
        Self { axes, dt }
    }

    /// Continuous white-noise-acceleration covariance over one step for
    /// acceleration spectral density `q` (units^2 / s^3). Full rank for `q > 0`.
    pub fn process_noise(&self, q: f64) -> DMatrix<f64> {
        let k = self.axes;
        let dt = self.dt;
        let mut r = DMatrix::zeros(2 * k, 2 * k);
        for i in 0..k {
            r[(i, i)] = q * dt.powi(3) / 3.0;
            r[(i, k + i)] = q * dt.powi(2) / 2.0;
            r[(k + i, i)] = q * dt.powi(2) / 2.0;
            r[(k + i, k + i)] = q * dt;
        }
        r
    }

    fn positions(&self, x: &DVector<f64>) -> DVector<f64> {
        x.rows(0, self.axes).into_owned()
    }

    fn selector(&self) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.axes, 2 * self.axes);
        for i in 0..self.axes {
            h[(i, i)] = 1.0;
        }
        h
    }
}

impl SystemModel for ConstantVelocity {
    fn state_dim(&self) -> usize {
        2 * self.axes
    }

    fn measurement_dim(&self) -> usize {
        self.axes
    }

    fn label_dim(&self) -> usize {
        self.axes
    }

    fn control_dim(&self) -> usize {
        self.axes
    }

    fn transition(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let k = self.axes;
        let mut out = x.clone();
        for i in 0..k {
            let a = if u.is_empty() { 0.0 } else { u[i] };
            out[i] = x[i] + self.dt * x[k + i] + 0.5 * self.dt * self.dt * a;
            out[k + i] = x[k + i] + self.dt * a;
        }
        out
    }

    fn transition_jacobian(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> DMatrix<f64> {
        let k = self.axes;
        let mut f = DMatrix::identity(2 * k, 2 * k);
        for i in 0..k {
            f[(i, k + i)] = self.dt;
        }
        f
    }

    fn measure(&self, x: &DVector<f64>) -> DVector<f64> {
        self.positions(x)
    }

    fn measurement_jacobian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.selector()
    }

    fn label(&self, x: &DVector<f64>) -> DVector<f64> {
        self.positions(x)
    }

    fn label_jacobian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.selector()
    }
}
