use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    Line,
    Circle,
    FigureEight,
}

impl FromStr for PathKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "line" => Ok(Self::Line),
            "circle" => Ok(Self::Circle),
            "figure-eight" => Ok(Self::FigureEight),
            other => Err(format!(
                "unknown path kind {other:?} (expected line, circle or figure-eight)"
            )),
        }
    }
}

impl fmt::Display for PathKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Line => "line",
            Self::Circle => "circle",
            Self::FigureEight => "figure-eight",
        })
    }
}

const TABLE_SAMPLES: usize = 4096;

/// Ground-plane route of the target, traversed at constant speed by arc length.
///
/// `size` is the radius for a circle and the half-width of the lobes for a
/// figure-eight (a lemniscate of Gerono); lines are unbounded.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetPath {
    pub kind: PathKind,
    pub speed: f64,
    pub size: f64,
    pub center: [f64; 2],
    pub heading: f64,
    pub height: f64,
    pub toppling_speed: f64,
    /// Cumulative arc length at evenly spaced parameter values (figure-eight only).
    arc_table: Vec<f64>,
}

impl TargetPath {
    pub const DEFAULT_TOPPLING_SPEED: f64 = 0.75;

    pub fn new(kind: PathKind, speed: f64, size: f64) -> Self {
        let mut path = Self {
            kind,
            speed,
            size,
            center: [0.0, 0.0],
            heading: 0.0,
            height: 0.0,
            toppling_speed: Self::DEFAULT_TOPPLING_SPEED,
            arc_table: Vec::new(),
        };
        if kind == PathKind::FigureEight {
            path.arc_table = gerono_arc_table(size);
        }
        path
    }

    pub fn with_center(mut self, center: [f64; 2]) -> Self {
        self.center = center;
        self
    }

    pub fn with_heading(mut self, heading: f64) -> Self {
        self.heading = heading;
        self
    }

    pub fn with_height(mut self, height: f64) -> Self {
        self.height = height;
        self
    }

    pub fn with_toppling_speed(mut self, toppling_speed: f64) -> Self {
        self.toppling_speed = toppling_speed;
        self
    }

    /// One lap, or `None` for an open path.
    pub fn period_length(&self) -> Option<f64> {
        match self.kind {
            PathKind::Line => None,
            PathKind::Circle => Some(TAU * self.size),
            PathKind::FigureEight => self.arc_table.last().copied(),
        }
    }

    fn gerono_param(&self, s: f64) -> f64 {
        let total = *self.arc_table.last().unwrap_or(&1.0);
        let s = s.rem_euclid(total);
        let idx = self.arc_table.partition_point(|&a| a <= s).clamp(1, TABLE_SAMPLES);
        let (a0, a1) = (self.arc_table[idx - 1], self.arc_table[idx]);
        let frac = if a1 > a0 { (s - a0) / (a1 - a0) } else { 0.0 };
        (idx as f64 - 1.0 + frac) * TAU / TABLE_SAMPLES as f64
    }

    pub fn position_at_arc(&self, s: f64) -> [f64; 3] {
        let [cx, cy] = self.center;
        let (x, y) = match self.kind {
            PathKind::Line => (s * self.heading.cos(), s * self.heading.sin()),
            PathKind::Circle => {
                let r = self.size;
                (r * (s / r).cos(), r * (s / r).sin())
            }
            PathKind::FigureEight => {
                let phi = self.gerono_param(s);
                (self.size * phi.sin(), self.size * phi.sin() * phi.cos())
            }
        };
        [cx + x, cy + y, self.height]
    }

    pub fn curvature_at_arc(&self, s: f64) -> f64 {
        match self.kind {
            PathKind::Line => 0.0,
            PathKind::Circle => 1.0 / self.size,
            PathKind::FigureEight => gerono_curvature(self.size, self.gerono_param(s)),
        }
    }

    /// Arc length of the first point of maximum curvature along one lap.
    pub fn first_curvature_max(&self) -> f64 {
        match self.kind {
            // constant curvature: every point is a maximum, the first is the start
            PathKind::Line | PathKind::Circle => 0.0,
            PathKind::FigureEight => {
                let mut best = (0, f64::NEG_INFINITY);
                for i in 0..TABLE_SAMPLES {
                    let phi = i as f64 * TAU / TABLE_SAMPLES as f64;
                    let k = gerono_curvature(self.size, phi);
                    if k > best.1 * (1.0 + 1e-12) {
                        best = (i, k);
                    }
                }
                self.arc_table[best.0]
            }
        }
    }

    pub fn topples(&self) -> bool {
        self.speed > self.toppling_speed
    }
}

fn gerono_speed(a: f64, phi: f64) -> f64 {
    a * (phi.cos().powi(2) + (2.0 * phi).cos().powi(2)).sqrt()
}

fn gerono_curvature(a: f64, phi: f64) -> f64 {
    let (dx, dy) = (a * phi.cos(), a * (2.0 * phi).cos());
    let (ddx, ddy) = (-a * phi.sin(), -2.0 * a * (2.0 * phi).sin());
    let speed_sq = dx * dx + dy * dy;
    (dx * ddy - dy * ddx).abs() / speed_sq.powf(1.5)
}

fn gerono_arc_table(a: f64) -> Vec<f64> {
    let step = TAU / TABLE_SAMPLES as f64;
    let mut table = Vec::with_capacity(TABLE_SAMPLES + 1);
    table.push(0.0);
    let mut acc = 0.0;
    for i in 0..TABLE_SAMPLES {
        // Simpson on each sub-interval
        let p0 = i as f64 * step;
        let seg =
            step / 6.0 * (gerono_speed(a, p0) + 4.0 * gerono_speed(a, p0 + step / 2.0) + gerono_speed(a, p0 + step));
        acc += seg;
        table.push(acc);
    }
    table
}

/// Target position at time `t`. Paths driven faster than the toppling speed
/// stop for good at their first curvature maximum.
pub fn step_target(path: &TargetPath, t: f64) -> [f64; 3] {
    let mut s = path.speed * t.max(0.0);
    if path.topples() {
        s = s.min(path.first_curvature_max());
    }
    path.position_at_arc(s)
}
