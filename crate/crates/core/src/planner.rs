//! Path scoring by Gaussian proximity to a goal, and the best-to-current
//! weight ratio used to scale the Gaussian forward velocity.

use thiserror::Error;

use crate::control::{gaussian_pdf, ControlError};

#[derive(Debug, Error, PartialEq)]
pub enum PlannerError {
    #[error(transparent)]
    Sigma(#[from] ControlError),
    #[error("no candidate path has a positive weight sum")]
    AllZeroWeights,
    #[error("executing path index {index} out of range for {len} candidates")]
    NoSuchPath { index: usize, len: usize },
}

pub type Point3 = [f64; 3];

fn distance(a: &Point3, b: &Point3) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt()
}

/// Sum over waypoints of the Gaussian density of their distance to `goal`.
pub fn path_weight_sum(path: &[Point3], goal: &Point3, sigma: f64) -> Result<f64, PlannerError> {
    gaussian_pdf(0.0, 0.0, sigma)?;
    path.iter()
        .map(|wp| gaussian_pdf(distance(wp, goal), 0.0, sigma).map_err(PlannerError::from))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePath {
    waypoints: Vec<Point3>,
    weight_sum: f64,
}

impl CandidatePath {
    pub fn new(waypoints: Vec<Point3>, goal: &Point3, sigma: f64) -> Result<Self, PlannerError> {
        let weight_sum = path_weight_sum(&waypoints, goal, sigma)?;
        Ok(Self { waypoints, weight_sum })
    }

    /// Path with a precomputed sum, e.g. from an external planner.
    pub fn with_sum(waypoints: Vec<Point3>, weight_sum: f64) -> Self {
        Self {
            waypoints,
            weight_sum: weight_sum.max(0.0),
        }
    }

    pub fn waypoints(&self) -> &[Point3] {
        &self.waypoints
    }

    pub fn weight_sum(&self) -> f64 {
        self.weight_sum
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    /// Index of the highest-weight path (first on ties).
    pub chosen: usize,
    /// best_sum / executing_sum; infinite when the executing path has zero weight.
    pub ratio: f64,
    pub velocity: f64,
}

/// Picks the best path and scales `gaussian_velocity` for the path being
/// executed by `best_sum / executing_sum`, capped at `v_max`.
pub fn select_and_scale(
    paths: &[CandidatePath],
    executing: usize,
    gaussian_velocity: f64,
    v_max: f64,
) -> Result<Selection, PlannerError> {
    let mut chosen = None;
    for (i, p) in paths.iter().enumerate() {
        if p.weight_sum > 0.0 && chosen.is_none_or(|c: usize| p.weight_sum > paths[c].weight_sum) {
            chosen = Some(i);
        }
    }
    let chosen = chosen.ok_or(PlannerError::AllZeroWeights)?;
    let current = paths
        .get(executing)
        .ok_or(PlannerError::NoSuchPath {
            index: executing,
            len: paths.len(),
        })?
        .weight_sum;
    let best = paths[chosen].weight_sum;
    let ratio = if current > 0.0 { best / current } else { f64::INFINITY };
    let velocity = if gaussian_velocity <= 0.0 {
        gaussian_velocity.max(0.0)
    } else {
        (gaussian_velocity * ratio).min(v_max)
    };
    Ok(Selection {
        chosen,
        ratio,
        velocity,
    })
}
