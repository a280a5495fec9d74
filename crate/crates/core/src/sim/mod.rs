//! Deterministic closed-loop simulator: a target moving on a planar path, a
//! quadrotor with a forward-looking pinhole camera, and the tracking
//! pipelines that close the loop.

pub mod camera;
pub mod metrics;
pub mod path;
pub mod pipeline;
pub mod render;
pub mod scenario;
pub mod trace;
pub mod world;

pub use camera::{CameraModel, Pose, Projection};
pub use metrics::{compute_metrics, Metrics, MetricsError};
pub use path::{step_target, PathKind, TargetPath};
pub use pipeline::{PipelineKind, PipelineParams, TrackStep, Tracker};
pub use render::{render, FeatureTemplate, Rendered, SceneStyle, TargetAppearance};
pub use scenario::{initial_world, run_scenario, run_scenario_with, ScenarioOutput};
pub use trace::{read_trace, trace_to_string, write_trace, TraceError, TraceRow};
pub use world::{step_quad, WorldState};
