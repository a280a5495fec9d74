//! Run summary computed from a trace.
//!
//! Ground-truth image positions are recovered by projecting the logged target
//! position through the logged quad pose, so a trace file is self-sufficient
//! given the camera model.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use super::camera::{CameraModel, Pose};
use super::trace::TraceRow;

/// Consecutive invalid frames after which the target counts as lost (5 s at 5 Hz).
pub const LOST_FRAMES: usize = 25;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("trace has no rows")]
    EmptyTrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    /// Frames with a valid observation over all frames.
    pub detection_rate: f64,
    /// Frames whose true target centre lies in the central half-rectangle, over all frames.
    pub tracking_efficiency: f64,
    /// Mean distance of the observed centroid from the image centre over detected frames, px.
    pub mean_pixel_error: Option<f64>,
    pub frames: usize,
    /// Start of the first run of [`LOST_FRAMES`] invalid frames, s.
    pub lost_at: Option<f64>,
    /// Frames after the first detection in which the true target centre is outside the image.
    pub out_of_view_after_lock: usize,
}

fn true_projection(row: &TraceRow, cam: &CameraModel) -> Option<(f64, f64)> {
    let pose = Pose {
        position: row.quad,
        yaw: row.quad_yaw,
    };
    cam.project(&pose, row.target)
        .map(|p| (p.u, p.v))
        .filter(|&(u, v)| cam.contains(u, v))
}

pub fn compute_metrics(trace: &[TraceRow], cam: &CameraModel) -> Result<Metrics, MetricsError> {
    if trace.is_empty() {
        return Err(MetricsError::EmptyTrace);
    }
    let n = trace.len() as f64;
    let detected = trace.iter().filter(|r| r.detected).count();
    let centred = trace
        .iter()
        .filter(|r| true_projection(r, cam).is_some_and(|(u, v)| cam.in_central_half(u, v)))
        .count();
    let (cx, cy) = cam.center();
    let mean_pixel_error = (detected > 0).then(|| {
        trace
            .iter()
            .filter(|r| r.detected)
            .map(|r| (r.px - cx).hypot(r.py - cy))
            .sum::<f64>()
            / detected as f64
    });

    let mut lost_at = None;
    let mut run = 0;
    for (i, r) in trace.iter().enumerate() {
        run = if r.detected { 0 } else { run + 1 };
        if run == LOST_FRAMES {
            lost_at = Some(trace[i + 1 - LOST_FRAMES].t);
            break;
        }
    }

    let out_of_view_after_lock = trace
        .iter()
        .skip_while(|r| !r.detected)
        .filter(|r| true_projection(r, cam).is_none())
        .count();

    Ok(Metrics {
        detection_rate: detected as f64 / n,
        tracking_efficiency: centred as f64 / n,
        mean_pixel_error,
        frames: trace.len(),
        lost_at,
        out_of_view_after_lock,
    })
}

impl Metrics {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serialises")
    }
}

/// `key: value` lines; absent values print as `none`.
impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |x| format!("{x:.6}"));
        writeln!(f, "detection_rate: {:.6}", self.detection_rate)?;
        writeln!(f, "tracking_efficiency: {:.6}", self.tracking_efficiency)?;
        writeln!(f, "mean_pixel_error: {}", opt(self.mean_pixel_error))?;
        writeln!(f, "frames: {}", self.frames)?;
        writeln!(f, "lost_at: {}", opt(self.lost_at))?;
        writeln!(f, "out_of_view_after_lock: {}", self.out_of_view_after_lock)
    }
}
