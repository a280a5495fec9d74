use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::camera::Pose;
use crate::control::{ControlCommand, ControlLimits};

pub const DEFAULT_V_CLIMB_MAX: f64 = 2.0;

/// Everything the simulator evolves. All randomness in a run is drawn from `rng`.
#[derive(Debug, Clone)]
pub struct WorldState {
    pub t: f64,
    pub quad: Pose,
    /// Speed along the heading, m/s.
    pub forward_speed: f64,
    /// Climb rate, m/s.
    pub vertical_speed: f64,
    pub v_climb_max: f64,
    pub target_pos: [f64; 3],
    pub rng: ChaCha8Rng,
}

impl WorldState {
    pub fn new(quad: Pose, target_pos: [f64; 3], seed: u64) -> Self {
        Self {
            t: 0.0,
            quad,
            forward_speed: 0.0,
            vertical_speed: 0.0,
            v_climb_max: DEFAULT_V_CLIMB_MAX,
            target_pos,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// First-order quad kinematics over one physics step.
///
/// Heading integrates the yaw command, forward speed slews toward the command
/// at no more than `a_max`, climb rate follows the throttle directly, and the
/// vehicle moves along its new heading. Altitude is floored at the ground.
pub fn step_quad(world: &WorldState, cmd: &ControlCommand, limits: &ControlLimits, dt: f64) -> WorldState {
    let mut next = world.clone();
    let yaw = wrap_angle(world.quad.yaw + cmd.yaw.clamp(-1.0, 1.0) * limits.yaw_rate_max * dt);

    let target_speed = cmd.forward.clamp(0.0, limits.v_max_forward);
    let max_dv = limits.a_max * dt;
    let dv = (target_speed - world.forward_speed).clamp(-max_dv, max_dv);
    let speed = world.forward_speed + dv;
    let climb = cmd.throttle.clamp(-1.0, 1.0) * world.v_climb_max;

    let pose = Pose { yaw, ..world.quad };
    let fwd = pose.forward();
    let [x, y, z] = world.quad.position;
    next.quad = Pose {
        position: [
            x + fwd[0] * speed * dt,
            y + fwd[1] * speed * dt,
            (z + climb * dt).max(0.0),
        ],
        yaw,
    };
    next.forward_speed = speed;
    next.vertical_speed = if z + climb * dt <= 0.0 { 0.0 } else { climb };
    next.t = world.t + dt;
    next
}
