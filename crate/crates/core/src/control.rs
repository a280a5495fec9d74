//! Image-plane control laws.
//!
//! Yaw and throttle are piecewise-linear in the blob centroid: saturated on the
//! outer quarters of each axis, linear toward zero in the central half. Forward
//! speed follows a Gaussian of the centroid's distance from the image centre
//! whose width is learned online from the observed distances.

use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ControlError {
    #[error("sigma must be positive, got {0}")]
    NonPositiveSigma(f64),
}

/// Smallest sigma the learned model will hand to the controller, in pixels.
pub const MIN_SIGMA_PX: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlLimits {
    /// m/s
    pub v_max_forward: f64,
    /// m/s^2
    pub a_max: f64,
    /// rad/s
    pub yaw_rate_max: f64,
    /// m
    pub range_gate: f64,
}

impl Default for ControlLimits {
    fn default() -> Self {
        Self {
            v_max_forward: 5.0,
            a_max: 2.5,
            yaw_rate_max: 1.0,
            range_gate: 1.0,
        }
    }
}

impl ControlLimits {
    pub fn is_valid(&self) -> bool {
        self.v_max_forward > 0.0 && self.a_max > 0.0 && self.yaw_rate_max > 0.0 && self.range_gate > 0.0
    }
}

/// Normalised yaw and throttle rates (signed, |.| <= 1) plus forward speed in m/s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlCommand {
    /// Positive turns toward image-right.
    pub yaw: f64,
    /// Positive climbs.
    pub throttle: f64,
    pub forward: f64,
}

impl ControlCommand {
    pub const HOVER: Self = Self {
        yaw: 0.0,
        throttle: 0.0,
        forward: 0.0,
    };

    pub fn satisfies(&self, limits: &ControlLimits) -> bool {
        self.yaw.abs() <= 1.0 && self.throttle.abs() <= 1.0 && (0.0..=limits.v_max_forward).contains(&self.forward)
    }
}

fn unit_step(t: f64) -> f64 {
    if t >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// `1 - [(H(p - n/4) - H(p - 3n/4)) * (1 - (4/n)|p - n/2|)]` with `H` the unit step.
pub fn axis_magnitude(p: f64, extent: f64) -> f64 {
    let window = unit_step(p - extent / 4.0) - unit_step(p - 3.0 * extent / 4.0);
    let inner = window * (1.0 - 4.0 / extent * (p - extent / 2.0).abs());
    (1.0 - inner).clamp(0.0, 1.0)
}

fn signum_or_zero(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Signed yaw rate for a centroid at column `x`: positive when the target sits right of centre.
pub fn yaw_command(x: f64, width: f64) -> f64 {
    signum_or_zero(x - width / 2.0) * axis_magnitude(x, width)
}

/// Signed throttle for a centroid at row `y`: negative (descend) when the target sits below centre.
pub fn throttle_command(y: f64, height: f64) -> f64 {
    signum_or_zero(height / 2.0 - y) * axis_magnitude(y, height)
}

/// Online model of how far centroids stray from the image centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianModel {
    pub mean_x: f64,
    pub mean_y: f64,
    /// RMS of every distance seen so far.
    pub sigma_centroid: f64,
    pub n: u64,
    pub sum_sq_dist: f64,
    /// Sigma actually used for control; held while outliers arrive.
    pub frozen_sigma: f64,
}

impl GaussianModel {
    /// Untrained model centred on the image with sigma = width / 4.
    pub fn new(width: f64, height: f64) -> Self {
        let sigma = width / 4.0;
        Self {
            mean_x: width / 2.0,
            mean_y: height / 2.0,
            sigma_centroid: sigma,
            n: 0,
            sum_sq_dist: 0.0,
            frozen_sigma: sigma,
        }
    }

    /// Fixed model with a given sigma that never learns.
    pub fn fixed(width: f64, height: f64, sigma: f64) -> Self {
        let sigma = sigma.max(MIN_SIGMA_PX);
        Self {
            sigma_centroid: sigma,
            frozen_sigma: sigma,
            ..Self::new(width, height)
        }
    }
}

/// Absorbs one centroid. The running RMS always updates; the control sigma
/// only follows it when the new distance is within the current control sigma.
pub fn sigma_update(model: GaussianModel, cx: f64, cy: f64, width: f64, height: f64) -> GaussianModel {
    let d = (cx - width / 2.0).hypot(cy - height / 2.0);
    let n = model.n + 1;
    let sum_sq_dist = model.sum_sq_dist + d * d;
    let sigma_centroid = (sum_sq_dist / n as f64).sqrt();
    let frozen_sigma = if d > model.frozen_sigma {
        model.frozen_sigma
    } else {
        sigma_centroid.max(MIN_SIGMA_PX)
    };
    GaussianModel {
        n,
        sum_sq_dist,
        sigma_centroid,
        frozen_sigma,
        ..model
    }
}

pub fn half_diagonal(width: f64, height: f64) -> f64 {
    (width / 2.0).hypot(height / 2.0)
}

/// Normalised Gaussian density.
pub fn gaussian_pdf(x: f64, mu: f64, sigma: f64) -> Result<f64, ControlError> {
    if !(sigma > 0.0) {
        return Err(ControlError::NonPositiveSigma(sigma));
    }
    let z = (x - mu) / sigma;
    Ok((-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt()))
}

/// Forward speed for a centroid `d` pixels from the centre.
///
/// Distance and sigma are expressed as fractions of the image half-diagonal
/// before the Gaussian is applied; the result is capped at `v_max_forward`.
pub fn forward_command(model: &GaussianModel, d: f64, width: f64, height: f64, limits: &ControlLimits) -> f64 {
    let diag = half_diagonal(width, height);
    let sigma = (model.frozen_sigma / diag).max(f64::MIN_POSITIVE);
    let v = limits.v_max_forward * gaussian_pdf(d / diag, 0.0, sigma).unwrap_or(0.0);
    v.clamp(0.0, limits.v_max_forward)
}

/// Colour spread implied by the centroid spread, on a 3 x 256 scale, floored at a sixth of a channel.
pub fn sigma_color(model: &GaussianModel, width: f64, height: f64) -> f64 {
    let ratio = model.frozen_sigma / half_diagonal(width, height);
    (3.0 * 256.0 * ratio).max(256.0 / 6.0)
}

/// Range readings older than this are ignored.
pub const RANGE_MAX_AGE_S: f64 = 0.060;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeReading {
    pub range_m: f64,
    pub age_s: f64,
}

impl RangeReading {
    pub fn fresh(range_m: f64) -> Self {
        Self { range_m, age_s: 0.0 }
    }

    pub fn usable(&self) -> Option<f64> {
        (self.age_s <= RANGE_MAX_AGE_S && self.range_m >= 0.0).then_some(self.range_m)
    }
}

/// Zeroes forward motion when an obstacle is closer than the range gate.
pub fn safety_gate(cmd: ControlCommand, range_m: f64, limits: &ControlLimits) -> ControlCommand {
    if range_m < limits.range_gate {
        ControlCommand { forward: 0.0, ..cmd }
    } else {
        cmd
    }
}

/// [`safety_gate`] over an optional sensor reading; missing or stale readings pass through.
pub fn safety_gate_reading(
    cmd: ControlCommand,
    reading: Option<RangeReading>,
    limits: &ControlLimits,
) -> ControlCommand {
    match reading.and_then(|r| r.usable()) {
        Some(range) => safety_gate(cmd, range, limits),
        None => cmd,
    }
}

pub const RC_MIN_US: u16 = 1400;
pub const RC_MAX_US: u16 = 1600;

/// Neutral pulse widths per channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RcTrim {
    pub roll: u16,
    pub pitch: u16,
    pub throttle: u16,
    pub yaw: u16,
}

impl Default for RcTrim {
    fn default() -> Self {
        Self {
            roll: 1500,
            pitch: 1500,
            throttle: 1480,
            yaw: 1500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RcOutput {
    pub roll_us: u16,
    pub pitch_us: u16,
    pub throttle_us: u16,
    pub yaw_us: u16,
}

impl RcOutput {
    pub fn channels(&self) -> [u16; 4] {
        [self.roll_us, self.pitch_us, self.throttle_us, self.yaw_us]
    }
}

fn round_half_up(v: f64) -> f64 {
    (v + 0.5).floor()
}

fn signed_to_us(s: f64, trim: u16) -> u16 {
    let trim_f = f64::from(trim);
    let s = s.clamp(-1.0, 1.0);
    let us = if s >= 0.0 {
        trim_f + s * (f64::from(RC_MAX_US) - trim_f)
    } else {
        trim_f + s * (trim_f - f64::from(RC_MIN_US))
    };
    round_half_up(us).clamp(f64::from(RC_MIN_US), f64::from(RC_MAX_US)) as u16
}

/// Maps a command to override pulse widths. Roll is never commanded; forward
/// speed rides the pitch channel between trim and the upper limit.
pub fn to_rc(cmd: &ControlCommand, limits: &ControlLimits, trim: &RcTrim) -> RcOutput {
    let fwd = if limits.v_max_forward > 0.0 {
        (cmd.forward / limits.v_max_forward).clamp(0.0, 1.0)
    } else {
        0.0
    };
    RcOutput {
        roll_us: trim.roll.clamp(RC_MIN_US, RC_MAX_US),
        pitch_us: signed_to_us(fwd, trim.pitch),
        throttle_us: signed_to_us(cmd.throttle, trim.throttle),
        yaw_us: signed_to_us(cmd.yaw, trim.yaw),
    }
}
