//! Scenario configuration.
//!
//! Files are line-oriented `key = value` text. `[section]` headers prefix the
//! keys that follow them, so `[camera]` then `width = 320` sets
//! `camera.width`; dotted keys work anywhere. `#` starts a comment and values
//! may be double-quoted. Every key has a default and unknown keys are errors.
//!
//! Layering, lowest to highest: defaults, file, `SERVOTRACK_*` environment
//! variables, explicit `key=value` overrides.

use std::fmt;

use thiserror::Error;

use crate::control::{ControlLimits, RcTrim, RC_MAX_US, RC_MIN_US};
use crate::features::MatchThreshold;
use crate::imaging::{ColorTolerance, HsvColor};
use crate::sim::camera::CameraModel;
use crate::sim::path::{PathKind, TargetPath};
use crate::sim::pipeline::{PipelineKind, PipelineParams};
use crate::sim::render::{SceneStyle, TargetAppearance};
use crate::sim::world::DEFAULT_V_CLIMB_MAX;

/// Environment variables with this prefix override keys; `__` stands for `.`,
/// so `SERVOTRACK_CAMERA__RATE_HZ=10` sets `camera.rate_hz`.
pub const ENV_PREFIX: &str = "SERVOTRACK_";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Override,
    Env(String),
    Validation,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Line(n) => write!(f, "line {n}"),
            Self::Override => f.write_str("command-line override"),
            Self::Env(var) => write!(f, "environment variable {var}"),
            Self::Validation => f.write_str("resolved config"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{origin}: key `{key}`: {msg}")]
pub struct ConfigError {
    pub key: String,
    pub origin: Origin,
    pub msg: String,
}

impl ConfigError {
    fn invalid(key: &str, msg: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            origin: Origin::Validation,
            msg: msg.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathConfig {
    pub kind: PathKind,
    pub speed: f64,
    /// Circle radius or figure-eight lobe half-width, m.
    pub size: f64,
    pub center_x: f64,
    pub center_y: f64,
    /// Direction of travel for a line, degrees counter-clockwise from +x.
    pub heading_deg: f64,
    /// Height of the target centre above ground, m.
    pub height: f64,
    pub toppling_speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetConfig {
    pub enabled: bool,
    pub radius: f64,
    pub hue: f64,
    pub saturation: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadConfig {
    /// Horizontal distance from the target's start position, m.
    pub start_range: f64,
    /// Direction from the target to the quad, degrees counter-clockwise from +x.
    pub start_bearing_deg: f64,
    pub altitude: f64,
    /// Initial heading offset from facing the target, degrees (positive = clockwise).
    pub yaw_offset_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub bits: usize,
    pub bit_noise: f64,
    pub clutter: usize,
    pub threshold: MatchThreshold,
    pub kernel_size: usize,
    pub kernel_frames: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EkfConfig {
    pub process_noise: f64,
    pub measurement_sigma: f64,
    pub coast_frames: usize,
}

/// Forward-looking ultrasonic ranger feeding the safety gate.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorConfig {
    pub range_max: f64,
    pub cone_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Background {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub duration: f64,
    pub pipeline: PipelineKind,
    pub sim_dt: f64,
    pub camera: CameraModel,
    pub pixel_noise: f64,
    pub limits: ControlLimits,
    pub v_climb_max: f64,
    pub rc: RcTrim,
    pub path: PathConfig,
    pub target: TargetConfig,
    pub background: Background,
    pub quad: QuadConfig,
    pub tolerance: ColorTolerance,
    pub min_blob_pixels: usize,
    pub roi_size: usize,
    pub features: FeatureConfig,
    pub sigma_color_hook: bool,
    pub ekf: EkfConfig,
    pub sensor: SensorConfig,
    pub dump_frames: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let pipeline = PipelineParams::default();
        Self {
            seed: 1,
            duration: 120.0,
            pipeline: PipelineKind::ColorBlob,
            sim_dt: 0.05,
            camera: CameraModel::default(),
            pixel_noise: 4.0,
            // desk-scale cruise speed; the vehicle limit is higher
            limits: ControlLimits {
                v_max_forward: 1.0,
                ..ControlLimits::default()
            },
            v_climb_max: DEFAULT_V_CLIMB_MAX,
            rc: RcTrim::default(),
            path: PathConfig {
                kind: PathKind::Circle,
                speed: 0.5,
                size: 5.0,
                center_x: 0.0,
                center_y: 0.0,
                heading_deg: 0.0,
                height: 0.5,
                toppling_speed: TargetPath::DEFAULT_TOPPLING_SPEED,
            },
            target: TargetConfig {
                enabled: true,
                radius: 0.25,
                hue: 0.0,
                saturation: 0.9,
                value: 0.9,
            },
            background: {
                let [r, g, b] = SceneStyle::default().background;
                Background { r, g, b }
            },
            quad: QuadConfig {
                start_range: 3.0,
                start_bearing_deg: 0.0,
                altitude: 0.5,
                yaw_offset_deg: 0.0,
            },
            tolerance: pipeline.tolerance,
            min_blob_pixels: pipeline.min_blob_pixels,
            roi_size: pipeline.roi_size,
            features: FeatureConfig {
                bits: crate::features::DEFAULT_DESCRIPTOR_BITS,
                bit_noise: SceneStyle::default().bit_noise,
                clutter: SceneStyle::default().clutter,
                threshold: pipeline.threshold,
                kernel_size: pipeline.kernel_size,
                kernel_frames: pipeline.kernel_frames,
            },
            sigma_color_hook: pipeline.sigma_color_hook,
            ekf: EkfConfig {
                process_noise: pipeline.ekf_process_noise,
                measurement_sigma: pipeline.ekf_measurement_sigma,
                coast_frames: pipeline.coast_frames,
            },
            sensor: SensorConfig {
                range_max: 4.0,
                cone_deg: 15.0,
            },
            dump_frames: false,
        }
    }
}

trait Value: Sized {
    fn parse_value(raw: &str) -> Result<Self, String>;
    fn show(&self) -> String;
}

impl Value for f64 {
    fn parse_value(raw: &str) -> Result<Self, String> {
        raw.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("expected a finite number, found {raw:?}"))
    }

    fn show(&self) -> String {
        // shortest representation that parses back exactly
        format!("{self:?}")
    }
}

macro_rules! int_value {
    ($($t:ty),*) => {$(
        impl Value for $t {
            fn parse_value(raw: &str) -> Result<Self, String> {
                raw.parse::<$t>().map_err(|_| {
                    format!("expected an integer in {}..={}, found {raw:?}", <$t>::MIN, <$t>::MAX)
                })
            }

            fn show(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

int_value!(u8, u16, u32, u64, usize);

impl Value for bool {
    fn parse_value(raw: &str) -> Result<Self, String> {
        match raw {
            "true" | "yes" | "on" | "1" => Ok(true),
            "false" | "no" | "off" | "0" => Ok(false),
            _ => Err(format!("expected true or false, found {raw:?}")),
        }
    }

    fn show(&self) -> String {
        self.to_string()
    }
}

impl Value for PipelineKind {
    fn parse_value(raw: &str) -> Result<Self, String> {
        raw.parse()
    }

    fn show(&self) -> String {
        self.to_string()
    }
}

impl Value for PathKind {
    fn parse_value(raw: &str) -> Result<Self, String> {
        raw.parse()
    }

    fn show(&self) -> String {
        self.to_string()
    }
}

macro_rules! config_keys {
    ($($key:literal => $($field:ident).+;)*) => {
        /// Every recognised key, in dump order.
        pub const KEYS: &[&str] = &[$($key),*];

        fn set_key(cfg: &mut ScenarioConfig, key: &str, raw: &str) -> Result<(), String> {
            match key {
                $($key => cfg.$($field).+ = Value::parse_value(raw)?,)*
                _ => return Err("unknown key".into()),
            }
            Ok(())
        }

        fn entries(cfg: &ScenarioConfig) -> Vec<(&'static str, String)> {
            vec![$(($key, cfg.$($field).+.show())),*]
        }
    };
}

config_keys! {
    "seed" => seed;
    "duration" => duration;
    "pipeline" => pipeline;
    "sim.dt" => sim_dt;
    "camera.width" => camera.width;
    "camera.height" => camera.height;
    "camera.hfov_deg" => camera.hfov_deg;
    "camera.rate_hz" => camera.rate_hz;
    "camera.pixel_noise" => pixel_noise;
    "limits.v_max_forward" => limits.v_max_forward;
    "limits.a_max" => limits.a_max;
    "limits.yaw_rate_max" => limits.yaw_rate_max;
    "limits.range_gate" => limits.range_gate;
    "limits.v_climb_max" => v_climb_max;
    "rc.roll_trim" => rc.roll;
    "rc.pitch_trim" => rc.pitch;
    "rc.throttle_trim" => rc.throttle;
    "rc.yaw_trim" => rc.yaw;
    "path.kind" => path.kind;
    "path.speed" => path.speed;
    "path.size" => path.size;
    "path.center_x" => path.center_x;
    "path.center_y" => path.center_y;
    "path.heading_deg" => path.heading_deg;
    "path.height" => path.height;
    "path.toppling_speed" => path.toppling_speed;
    "target.enabled" => target.enabled;
    "target.radius" => target.radius;
    "target.hue" => target.hue;
    "target.saturation" => target.saturation;
    "target.value" => target.value;
    "background.r" => background.r;
    "background.g" => background.g;
    "background.b" => background.b;
    "quad.start_range" => quad.start_range;
    "quad.start_bearing_deg" => quad.start_bearing_deg;
    "quad.altitude" => quad.altitude;
    "quad.yaw_offset_deg" => quad.yaw_offset_deg;
    "imaging.hue_tolerance" => tolerance.hue_half_width;
    "imaging.sat_tolerance" => tolerance.sat_half_width;
    "imaging.val_tolerance" => tolerance.val_half_width;
    "imaging.min_blob_pixels" => min_blob_pixels;
    "imaging.roi_size" => roi_size;
    "features.bits" => features.bits;
    "features.bit_noise" => features.bit_noise;
    "features.clutter" => features.clutter;
    "features.threshold" => features.threshold.value;
    "features.threshold_min" => features.threshold.min_value;
    "features.threshold_max" => features.threshold.max_value;
    "features.threshold_increment" => features.threshold.increment;
    "features.threshold_decrement" => features.threshold.decrement;
    "features.kernel_size" => features.kernel_size;
    "features.kernel_frames" => features.kernel_frames;
    "status.sigma_color_hook" => sigma_color_hook;
    "ekf.process_noise" => ekf.process_noise;
    "ekf.measurement_sigma" => ekf.measurement_sigma;
    "ekf.coast_frames" => ekf.coast_frames;
    "sensor.range_max" => sensor.range_max;
    "sensor.cone_deg" => sensor.cone_deg;
    "output.dump_frames" => dump_frames;
}

fn strip_comment(line: &str) -> &str {
    let mut in_quotes = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quotes = !in_quotes,
            '#' if !in_quotes => return &line[..i],
            _ => {}
        }
    }
    line
}

fn unquote(v: &str) -> &str {
    v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v)
}

impl ScenarioConfig {
    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str, origin: Origin) -> Result<(), ConfigError> {
        set_key(self, key, unquote(value.trim())).map_err(|msg| ConfigError {
            key: key.into(),
            origin,
            msg,
        })
    }

    /// Applies a config file's text on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').map(str::trim).ok_or_else(|| ConfigError {
                    key: line.into(),
                    origin: Origin::Line(line_no),
                    msg: "unterminated section header".into(),
                })?;
                section = name.to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError {
                key: line.into(),
                origin: Origin::Line(line_no),
                msg: "expected `key = value`".into(),
            })?;
            let key = key.trim();
            let full = if section.is_empty() {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            self.set(&full, value, Origin::Line(line_no))?;
        }
        Ok(())
    }

    /// Defaults overlaid with a file's text, then validated.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `KEY=value` overrides of the form given on the command line.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<(), ConfigError> {
        for o in overrides {
            let o = o.as_ref();
            let (key, value) = o.split_once('=').ok_or_else(|| ConfigError {
                key: o.into(),
                origin: Origin::Override,
                msg: "expected key=value".into(),
            })?;
            self.set(key.trim(), value, Origin::Override)?;
        }
        Ok(())
    }

    /// Applies every `SERVOTRACK_*` variable among `vars`, in name order.
    pub fn apply_env<I: IntoIterator<Item = (String, String)>>(&mut self, vars: I) -> Result<(), ConfigError> {
        let mut vars: Vec<_> = vars
            .into_iter()
            .filter_map(|(name, value)| {
                let rest = name.strip_prefix(ENV_PREFIX)?;
                Some((rest.to_ascii_lowercase().replace("__", "."), name, value))
            })
            .collect();
        vars.sort();
        for (key, name, value) in vars {
            self.set(&key, &value, Origin::Env(name))?;
        }
        Ok(())
    }

    /// The fully resolved configuration in the file format; parsing it back
    /// reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut section = "";
        for (key, value) in entries(self) {
            let (sec, name) = key.split_once('.').unwrap_or(("", key));
            if sec != section {
                out.push_str(&format!("\n[{sec}]\n"));
                section = sec;
            }
            out.push_str(&format!("{name} = {value}\n"));
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let check = |ok: bool, key: &str, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::invalid(key, msg))
            }
        };
        check(self.duration > 0.0, "duration", "must be positive")?;
        check(self.sim_dt > 0.0, "sim.dt", "must be positive")?;
        check(
            self.camera.width >= 4 && self.camera.height >= 4,
            "camera.width",
            "image must be at least 4x4",
        )?;
        check(
            self.camera.hfov_deg > 0.0 && self.camera.hfov_deg < 180.0,
            "camera.hfov_deg",
            "must lie in (0, 180)",
        )?;
        check(self.camera.rate_hz > 0.0, "camera.rate_hz", "must be positive")?;
        check(
            self.substeps().is_some(),
            "sim.dt",
            "frame period must be a whole number of physics steps",
        )?;
        check(self.pixel_noise >= 0.0, "camera.pixel_noise", "must be non-negative")?;
        check(self.limits.is_valid(), "limits", "all limits must be positive")?;
        check(self.v_climb_max > 0.0, "limits.v_climb_max", "must be positive")?;
        for (key, trim) in [
            ("rc.roll_trim", self.rc.roll),
            ("rc.pitch_trim", self.rc.pitch),
            ("rc.throttle_trim", self.rc.throttle),
            ("rc.yaw_trim", self.rc.yaw),
        ] {
            check(
                (RC_MIN_US..=RC_MAX_US).contains(&trim),
                key,
                "must lie within 1400..=1600",
            )?;
        }
        check(self.path.speed >= 0.0, "path.speed", "must be non-negative")?;
        check(
            self.path.kind == PathKind::Line || self.path.size > 0.0,
            "path.size",
            "must be positive",
        )?;
        check(
            self.path.toppling_speed > 0.0,
            "path.toppling_speed",
            "must be positive",
        )?;
        check(self.target.radius > 0.0, "target.radius", "must be positive")?;
        check(
            (0.0..=1.0).contains(&self.target.saturation),
            "target.saturation",
            "must lie in [0, 1]",
        )?;
        check(
            (0.0..=1.0).contains(&self.target.value),
            "target.value",
            "must lie in [0, 1]",
        )?;
        check(self.quad.start_range > 0.0, "quad.start_range", "must be positive")?;
        check(self.quad.altitude >= 0.0, "quad.altitude", "must be non-negative")?;
        check(
            self.tolerance.is_valid(),
            "imaging",
            "hue tolerance must lie in (0, 180], saturation and value in (0, 0.5]",
        )?;
        check(
            self.min_blob_pixels >= 1,
            "imaging.min_blob_pixels",
            "must be at least 1",
        )?;
        check(self.roi_size >= 1, "imaging.roi_size", "must be at least 1")?;
        let f = &self.features;
        check(
            f.bits > 0 && f.bits.is_multiple_of(8),
            "features.bits",
            "must be a positive multiple of 8",
        )?;
        check(
            (0.0..=1.0).contains(&f.bit_noise),
            "features.bit_noise",
            "must lie in [0, 1]",
        )?;
        check(
            f.threshold.min_value <= f.threshold.value && f.threshold.value <= f.threshold.max_value,
            "features.threshold",
            "must satisfy threshold_min <= threshold <= threshold_max",
        )?;
        check(f.kernel_size >= 1, "features.kernel_size", "must be at least 1")?;
        check(f.kernel_frames >= 1, "features.kernel_frames", "must be at least 1")?;
        check(self.ekf.process_noise > 0.0, "ekf.process_noise", "must be positive")?;
        check(
            self.ekf.measurement_sigma > 0.0,
            "ekf.measurement_sigma",
            "must be positive",
        )?;
        check(self.sensor.range_max > 0.0, "sensor.range_max", "must be positive")?;
        check(
            self.sensor.cone_deg > 0.0 && self.sensor.cone_deg <= 90.0,
            "sensor.cone_deg",
            "must lie in (0, 90]",
        )?;
        Ok(())
    }

    /// Physics steps per camera frame, when the frame period is a whole multiple of `sim.dt`.
    pub fn substeps(&self) -> Option<usize> {
        let ratio = 1.0 / (self.camera.rate_hz * self.sim_dt);
        let n = ratio.round();
        (n >= 1.0 && (ratio - n).abs() < 1e-9 * n).then_some(n as usize)
    }

    pub fn frames(&self) -> usize {
        (self.duration * self.camera.rate_hz).round() as usize
    }

    pub fn target_path(&self) -> TargetPath {
        TargetPath::new(self.path.kind, self.path.speed, self.path.size)
            .with_center([self.path.center_x, self.path.center_y])
            .with_heading(self.path.heading_deg.to_radians())
            .with_height(self.path.height)
            .with_toppling_speed(self.path.toppling_speed)
    }

    pub fn appearance(&self) -> Option<TargetAppearance> {
        self.target.enabled.then(|| TargetAppearance {
            color: HsvColor::new(self.target.hue, self.target.saturation, self.target.value),
            radius_m: self.target.radius,
        })
    }

    pub fn scene_style(&self) -> SceneStyle {
        SceneStyle {
            background: [self.background.r, self.background.g, self.background.b],
            pixel_noise: self.pixel_noise,
            bit_noise: self.features.bit_noise,
            clutter: self.features.clutter,
        }
    }

    pub fn pipeline_params(&self) -> PipelineParams {
        PipelineParams {
            kind: self.pipeline,
            tolerance: self.tolerance,
            min_blob_pixels: self.min_blob_pixels,
            roi_size: self.roi_size,
            sigma_color_hook: self.sigma_color_hook,
            threshold: self.features.threshold,
            kernel_size: self.features.kernel_size,
            kernel_frames: self.features.kernel_frames,
            ekf_process_noise: self.ekf.process_noise,
            ekf_measurement_sigma: self.ekf.measurement_sigma,
            coast_frames: self.ekf.coast_frames,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = ScenarioConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.substeps(), Some(4));
        assert_eq!(cfg.frames(), 600);
    }

    #[test]
    fn sections_comments_and_quotes() {
        let text = "seed = 7  # trailing\n\n[camera]\nrate_hz = 10\n[path]\nkind = \"figure-eight\"\n";
        let cfg = ScenarioConfig::parse(text).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.camera.rate_hz, 10.0);
        assert_eq!(cfg.path.kind, PathKind::FigureEight);
        // a dotted key inside a section is still prefixed
        let err = ScenarioConfig::parse("[path]\nlimits.a_max = 1\n").unwrap_err();
        assert_eq!(err.key, "path.limits.a_max");
    }

    #[test]
    fn unknown_pipeline_names_the_key_and_line() {
        let err = ScenarioConfig::parse("seed = 1\npipeline = grabcut\n").unwrap_err();
        assert_eq!(err.key, "pipeline");
        assert_eq!(err.origin, Origin::Line(2));
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn unknown_key_rejected() {
        let err = ScenarioConfig::parse("camera.fps = 5\n").unwrap_err();
        assert_eq!(err.key, "camera.fps");
        assert_eq!(err.msg, "unknown key");
    }

    #[test]
    fn inconsistent_rates_rejected() {
        let err = ScenarioConfig::parse("camera.rate_hz = 3\n").unwrap_err();
        assert_eq!(err.key, "sim.dt");
    }

    #[test]
    fn layering_order() {
        let mut cfg = ScenarioConfig::parse("seed = 2\nduration = 10\n").unwrap();
        cfg.apply_env([
            ("SERVOTRACK_SEED".to_string(), "3".to_string()),
            ("SERVOTRACK_CAMERA__RATE_HZ".to_string(), "10".to_string()),
            ("OTHER_SEED".to_string(), "99".to_string()),
        ])
        .unwrap();
        cfg.apply_overrides(&["seed=4"]).unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.duration, 10.0);
        assert_eq!(cfg.camera.rate_hz, 10.0);
        let err = cfg
            .apply_env([("SERVOTRACK_BOGUS".to_string(), "1".to_string())])
            .unwrap_err();
        assert_eq!(err.origin, Origin::Env("SERVOTRACK_BOGUS".into()));
    }

    #[test]
    fn resolved_dump_round_trips() {
        let mut cfg = ScenarioConfig::default();
        cfg.apply_overrides(&[
            "path.speed=0.1",
            "pipeline=ekf-assisted",
            "target.hue=123.456",
            "background.g=7",
        ])
        .unwrap();
        let text = cfg.to_text();
        assert_eq!(ScenarioConfig::parse(&text).unwrap(), cfg);
        for key in KEYS {
            let (sec, name) = key.split_once('.').unwrap_or(("", key));
            assert!(text.contains(&format!("{name} = ")), "{sec}.{name} missing");
        }
    }
}
