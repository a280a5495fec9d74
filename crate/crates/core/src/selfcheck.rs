//! Built-in numerical self-checks, runnable from the command line.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::control::{
    axis_magnitude, gaussian_pdf, safety_gate, throttle_command, to_rc, yaw_command, ControlCommand, ControlLimits,
    RcTrim, RC_MAX_US, RC_MIN_US,
};
use crate::stereo::{depth, StereoGeometry};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status}  {}  ({})", self.name, self.detail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfcheckOptions {
    /// Allowed deviation of the Gaussian integral from 1.
    pub normalization_tol: f64,
    pub seed: u64,
}

impl Default for SelfcheckOptions {
    fn default() -> Self {
        Self {
            normalization_tol: 1e-6,
            seed: 0x5e1f,
        }
    }
}

/// Composite Simpson rule with `n` (even) intervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

fn normalization(tol: f64) -> CheckResult {
    let mut worst: f64 = 0.0;
    for sigma in [0.1, 1.0, 80.0] {
        let area = simpson(
            |x| gaussian_pdf(x, 0.0, sigma).unwrap_or(f64::NAN),
            -8.0 * sigma,
            8.0 * sigma,
            4000,
        );
        worst = worst.max((area - 1.0).abs());
    }
    CheckResult {
        name: format!("normalization: 1 ± {tol:e}"),
        passed: worst <= tol,
        detail: format!("worst |integral - 1| = {worst:.3e} over sigma in {{0.1, 1, 80}}"),
    }
}

fn law_sweep(name: &str, law: fn(f64, f64) -> f64, extent: f64, outward_sign: f64) -> CheckResult {
    let mut problems = Vec::new();
    let table = [
        (extent / 2.0, 0.0),
        (0.0, -outward_sign),
        (3.0 * extent / 8.0, -0.5 * outward_sign),
    ];
    for (p, want) in table {
        let got = law(p, extent);
        if (got - want).abs() > 1e-12 {
            problems.push(format!("law({p}) = {got}, expected {want}"));
        }
    }
    let n = 100_000;
    for i in 0..=n {
        let p = extent * i as f64 / n as f64;
        let m = axis_magnitude(p, extent);
        let v = law(p, extent);
        let outer = p <= extent / 4.0 || p >= 3.0 * extent / 4.0;
        if !(0.0..=1.0).contains(&m) || (v.abs() - m).abs() > 1e-12 || (outer && m != 1.0) {
            problems.push(format!("sweep fails at {p}"));
            break;
        }
    }
    CheckResult {
        name: format!("{name} law: centre 0, edges saturated, range [-1, 1]"),
        passed: problems.is_empty(),
        detail: if problems.is_empty() {
            "table and 1e5-point sweep".into()
        } else {
            problems.join("; ")
        },
    }
}

fn stereo_round_trip(rng: &mut ChaCha8Rng) -> CheckResult {
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let geom = StereoGeometry::new(rng.random_range(1.0..2000.0), rng.random_range(0.01..2.0)).expect("positive");
        let h = rng.random_range(0.0..1000.0);
        let p1 = rng.random_range(-500.0..500.0);
        let p2 = p1 + geom.disparity_for_depth(h);
        let back = depth(&geom, p1, p2).unwrap_or(f64::NAN);
        worst = worst.max((back - h).abs() / h.max(1.0));
    }
    CheckResult {
        name: "stereo: depth -> disparity -> depth".into(),
        passed: worst <= 1e-9,
        detail: format!("worst relative error {worst:.3e} over 1e4 points"),
    }
}

fn gate_and_rc(rng: &mut ChaCha8Rng) -> CheckResult {
    let limits = ControlLimits::default();
    let trim = RcTrim::default();
    let mut bad = 0;
    for _ in 0..10_000 {
        let cmd = ControlCommand {
            yaw: rng.random_range(-2.0..2.0),
            throttle: rng.random_range(-2.0..2.0),
            forward: rng.random_range(-1.0..10.0),
        };
        let range = rng.random_range(0.0..3.0);
        let gated = safety_gate(cmd, range, &limits);
        let rc = to_rc(&gated, &limits, &trim);
        if (range < limits.range_gate && gated.forward != 0.0)
            || rc.channels().iter().any(|c| !(RC_MIN_US..=RC_MAX_US).contains(c))
        {
            bad += 1;
        }
    }
    CheckResult {
        name: "safety gate and RC range".into(),
        passed: bad == 0,
        detail: format!("{bad} violations in 1e4 random commands"),
    }
}

pub fn run_selfcheck(opts: &SelfcheckOptions) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    vec![
        normalization(opts.normalization_tol),
        // yaw is negative left of centre, throttle negative below it
        law_sweep("yaw", yaw_command, 320.0, 1.0),
        law_sweep("throttle", throttle_command, 240.0, -1.0),
        stereo_round_trip(&mut rng),
        gate_and_rc(&mut rng),
    ]
}
