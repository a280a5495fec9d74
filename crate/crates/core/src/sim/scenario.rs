//! Closed-loop scenario runner.

use super::camera::Pose;
use super::metrics::{compute_metrics, Metrics};
use super::path::step_target;
use super::pipeline::{TrackStep, Tracker};
use super::render::{render, FeatureTemplate, Rendered};
use super::trace::TraceRow;
use super::world::{step_quad, WorldState};
use crate::config::{ConfigError, ScenarioConfig};
use crate::control::{safety_gate_reading, to_rc, RangeReading};

#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub trace: Vec<TraceRow>,
    pub metrics: Metrics,
}

/// Forward ranger: distance to the target surface when the target lies
/// within the sensor cone and range, otherwise nothing.
fn range_reading(world: &WorldState, cfg: &ScenarioConfig) -> Option<RangeReading> {
    if !cfg.target.enabled {
        return None;
    }
    let q = world.quad.position;
    let t = world.target_pos;
    let d = [t[0] - q[0], t[1] - q[1], t[2] - q[2]];
    let dist = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    let fwd = world.quad.forward();
    let along = fwd[0] * d[0] + fwd[1] * d[1];
    if dist <= 0.0 || along / dist < cfg.sensor.cone_deg.to_radians().cos() {
        return None;
    }
    let surface = (dist - cfg.target.radius).max(0.0);
    (surface <= cfg.sensor.range_max).then(|| RangeReading::fresh(surface))
}

/// Initial world: target at the start of its path, quad `start_range` away
/// along `start_bearing_deg`, facing the target plus `yaw_offset_deg`.
pub fn initial_world(cfg: &ScenarioConfig) -> WorldState {
    let target = step_target(&cfg.target_path(), 0.0);
    let b = cfg.quad.start_bearing_deg.to_radians();
    let mut quad = Pose {
        position: [
            target[0] + cfg.quad.start_range * b.cos(),
            target[1] + cfg.quad.start_range * b.sin(),
            cfg.quad.altitude,
        ],
        yaw: 0.0,
    };
    quad.yaw = quad.heading_to(target) + cfg.quad.yaw_offset_deg.to_radians();
    let mut world = WorldState::new(quad, target, cfg.seed);
    world.v_climb_max = cfg.v_climb_max;
    world
}

/// Runs the scenario, calling `on_frame` with each rendered frame and the
/// tracker's output before the command is applied.
pub fn run_scenario_with<F>(cfg: &ScenarioConfig, mut on_frame: F) -> Result<ScenarioOutput, ConfigError>
where
    F: FnMut(usize, &Rendered, &TrackStep),
{
    cfg.validate()?;
    let substeps = cfg.substeps().expect("validated");
    let cam = cfg.camera;
    let path = cfg.target_path();
    let appearance = cfg.appearance();
    let style = cfg.scene_style();

    let mut world = initial_world(cfg);
    let template = FeatureTemplate::random(cfg.features.bits, &mut world.rng);
    let mut tracker = Tracker::new(
        cfg.pipeline_params(),
        cam.width,
        cam.height,
        cam.frame_period(),
        &template,
    );

    let frames = cfg.frames();
    let mut trace = Vec::with_capacity(frames);
    for k in 0..frames {
        let rendered = render(&mut world, &cam, appearance.as_ref(), &style, &template);
        let step = tracker.observe(&rendered);
        on_frame(k, &rendered, &step);

        let cmd = tracker.command(&step, &cfg.limits);
        let cmd = safety_gate_reading(cmd, range_reading(&world, cfg), &cfg.limits);
        let rc = to_rc(&cmd, &cfg.limits, &cfg.rc);
        let obs = step.observation;
        trace.push(TraceRow {
            t: world.t,
            target: world.target_pos,
            quad: world.quad.position,
            quad_yaw: world.quad.yaw,
            px: if obs.valid { obs.centroid_x } else { 0.0 },
            py: if obs.valid { obs.centroid_y } else { 0.0 },
            rms_radius: if obs.valid { obs.rms_radius } else { 0.0 },
            detected: obs.valid,
            cmd,
            rc,
        });

        for i in 0..substeps {
            world = step_quad(&world, &cmd, &cfg.limits, cfg.sim_dt);
            // time from the step count, so it never accumulates rounding drift
            world.t = (k * substeps + i + 1) as f64 * cfg.sim_dt;
            world.target_pos = step_target(&path, world.t);
        }
    }

    let metrics = compute_metrics(&trace, &cam).map_err(|e| ConfigError {
        key: "duration".into(),
        origin: crate::config::Origin::Validation,
        msg: e.to_string(),
    })?;
    Ok(ScenarioOutput { trace, metrics })
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutput, ConfigError> {
    run_scenario_with(cfg, |_, _, _| {})
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(overrides: &[&str]) -> ScenarioConfig {
        let mut c = ScenarioConfig::default();
        c.apply_overrides(overrides).unwrap();
        c
    }

    #[test]
    fn static_target_always_detected() {
        let out = run_scenario(&cfg(&["duration=30", "path.speed=0"])).unwrap();
        assert_eq!(out.metrics.frames, 150);
        assert_eq!(out.metrics.detection_rate, 1.0);
    }

    #[test]
    fn static_target_settles_to_centre() {
        let c = cfg(&[
            "duration=20",
            "path.speed=0",
            "quad.yaw_offset_deg=6",
            "quad.altitude=0.8",
        ]);
        let out = run_scenario(&c).unwrap();
        let late: Vec<_> = out.trace.iter().filter(|r| r.t >= 5.0).collect();
        assert!(late.iter().all(|r| r.detected));
        let err = late.iter().map(|r| (r.px - 160.0).hypot(r.py - 120.0)).sum::<f64>() / late.len() as f64;
        assert!(err < 10.0, "mean error after 5 s: {err}");
    }

    #[test]
    fn empty_world() {
        let out = run_scenario(&cfg(&["duration=10", "target.enabled=false"])).unwrap();
        assert_eq!(out.metrics.detection_rate, 0.0);
        assert_eq!(out.metrics.lost_at, Some(0.0));
    }

    #[test]
    fn gate_stops_short_of_the_target() {
        let out = run_scenario(&cfg(&["duration=20", "path.speed=0"])).unwrap();
        let last = out.trace.last().unwrap();
        let d = (last.quad[0] - last.target[0]).hypot(last.quad[1] - last.target[1]);
        assert!(d > 0.25 + 0.5, "quad ran into the target: {d}");
        assert!(d < 0.25 + 1.5, "quad never closed in: {d}");
    }

    #[test]
    fn time_advances_by_frame_period() {
        let out = run_scenario(&cfg(&["duration=2"])).unwrap();
        for (k, r) in out.trace.iter().enumerate() {
            assert!((r.t - 0.2 * k as f64).abs() < 1e-12);
        }
    }
}
