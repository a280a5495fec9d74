//! Browser bindings for the servotrack demo page.
//!
//! The page in `www/` calls three operations: a colour map of the steering
//! laws, a full closed-loop run, and an HSV mask explorer over a rendered
//! frame. Each has a plain Rust core so it can be tested natively.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use servotrack::config::ScenarioConfig;
use servotrack::control::{forward_command, throttle_command, yaw_command, ControlLimits, GaussianModel};
use servotrack::imaging::{blob_observe, hsv_mask, BlobObservation, ColorTolerance, HsvColor};
use servotrack::sim::{
    render, run_scenario, trace_to_string, CameraModel, FeatureTemplate, Pose, SceneStyle, TargetAppearance, TraceRow,
    WorldState,
};
use wasm_bindgen::prelude::*;

/// RGBA image of the control laws over a `width x height` frame. Red encodes
/// yaw (128 is zero), green throttle, blue the forward speed for a model with
/// the given centroid sigma.
pub fn law_field_rgba(width: usize, height: usize, sigma_px: f64) -> Vec<u8> {
    let (w, h) = (width as f64, height as f64);
    let limits = ControlLimits::default();
    let model = GaussianModel::fixed(w, h, sigma_px);
    let mut out = Vec::with_capacity(width * height * 4);
    for y in 0..height {
        for x in 0..width {
            let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
            let d = (fx - w / 2.0).hypot(fy - h / 2.0);
            let fwd = forward_command(&model, d, w, h, &limits) / limits.v_max_forward;
            out.extend_from_slice(&[
                (128.0 + 127.0 * yaw_command(fx, w)).round() as u8,
                (128.0 + 127.0 * throttle_command(fy, h)).round() as u8,
                (255.0 * fwd).round() as u8,
                255,
            ]);
        }
    }
    out
}

#[wasm_bindgen(js_name = lawField)]
pub fn law_field(width: usize, height: usize, sigma_px: f64) -> Vec<u8> {
    law_field_rgba(width, height, sigma_px)
}

/// Result of one closed-loop run, flattened for plotting.
#[wasm_bindgen]
pub struct Simulation {
    rows: Vec<TraceRow>,
    metrics_json: String,
    trace_csv: String,
    resolved: String,
}

impl Simulation {
    /// Runs a scenario from config text plus `key=value` lines.
    pub fn run(config_text: &str, overrides: &str) -> Result<Self, String> {
        let mut cfg = ScenarioConfig::parse(config_text).map_err(|e| e.to_string())?;
        let sets: Vec<&str> = overrides.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        cfg.apply_overrides(&sets).map_err(|e| e.to_string())?;
        cfg.validate().map_err(|e| e.to_string())?;
        let out = run_scenario(&cfg).map_err(|e| e.to_string())?;
        Ok(Self {
            trace_csv: trace_to_string(&out.trace),
            metrics_json: out.metrics.to_json(),
            resolved: cfg.to_text(),
            rows: out.trace,
        })
    }
}

#[wasm_bindgen]
impl Simulation {
    #[wasm_bindgen(constructor)]
    pub fn new(config_text: &str, overrides: &str) -> Result<Simulation, JsError> {
        Self::run(config_text, overrides).map_err(|e| JsError::new(&e))
    }

    pub fn frames(&self) -> usize {
        self.rows.len()
    }

    /// `[x0, y0, x1, y1, ...]` of the quad.
    #[wasm_bindgen(js_name = quadXy)]
    pub fn quad_xy(&self) -> Vec<f64> {
        self.rows.iter().flat_map(|r| [r.quad[0], r.quad[1]]).collect()
    }

    #[wasm_bindgen(js_name = quadYaw)]
    pub fn quad_yaw(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.quad_yaw).collect()
    }

    #[wasm_bindgen(js_name = targetXy)]
    pub fn target_xy(&self) -> Vec<f64> {
        self.rows.iter().flat_map(|r| [r.target[0], r.target[1]]).collect()
    }

    /// Observed centroid per frame, NaN when nothing was detected.
    #[wasm_bindgen(js_name = pixelXy)]
    pub fn pixel_xy(&self) -> Vec<f64> {
        self.rows
            .iter()
            .flat_map(|r| if r.detected { [r.px, r.py] } else { [f64::NAN; 2] })
            .collect()
    }

    #[wasm_bindgen(js_name = metricsJson)]
    pub fn metrics_json(&self) -> String {
        self.metrics_json.clone()
    }

    #[wasm_bindgen(js_name = traceCsv)]
    pub fn trace_csv(&self) -> String {
        self.trace_csv.clone()
    }

    #[wasm_bindgen(js_name = resolvedConfig)]
    pub fn resolved_config(&self) -> String {
        self.resolved.clone()
    }
}

/// Rendered frame with the thresholded pixels highlighted.
#[wasm_bindgen]
pub struct MaskView {
    rgba: Vec<u8>,
    obs: BlobObservation,
}

/// Inputs for [`MaskView::build`].
#[derive(Debug, Clone, Copy)]
pub struct MaskRequest {
    pub target_hue: f64,
    pub filter: HsvColor,
    pub tolerance: ColorTolerance,
    pub lateral_m: f64,
    pub range_m: f64,
    pub pixel_noise: f64,
    pub seed: u64,
}

impl MaskView {
    pub fn build(req: &MaskRequest) -> Result<Self, String> {
        if !req.tolerance.is_valid() {
            return Err("tolerance out of range".into());
        }
        let cam = CameraModel::default();
        let pose = Pose {
            position: [0.0, 0.0, 1.0],
            yaw: 0.0,
        };
        // forward is +x, image right is -y
        let target = [req.range_m, -req.lateral_m, 1.0];
        let mut world = WorldState::new(pose, target, req.seed);
        let template = FeatureTemplate::random(64, &mut ChaCha8Rng::seed_from_u64(req.seed));
        let app = TargetAppearance {
            color: HsvColor::new(req.target_hue, 0.9, 0.9),
            ..TargetAppearance::default()
        };
        let style = SceneStyle {
            pixel_noise: req.pixel_noise.max(0.0),
            clutter: 0,
            ..SceneStyle::default()
        };
        let frame = render(&mut world, &cam, Some(&app), &style, &template).frame;
        let mask = hsv_mask(&frame, &req.filter, &req.tolerance);
        let mut rgba = Vec::with_capacity(frame.width() * frame.height() * 4);
        for y in 0..frame.height() {
            for x in 0..frame.width() {
                let [r, g, b] = frame.get(x, y);
                if mask.get(x, y) {
                    rgba.extend_from_slice(&[255, 255, 255, 255]);
                } else {
                    rgba.extend_from_slice(&[r / 2, g / 2, b / 2, 255]);
                }
            }
        }
        Ok(Self {
            rgba,
            obs: blob_observe(&mask, 1),
        })
    }
}

#[wasm_bindgen]
impl MaskView {
    #[allow(clippy::too_many_arguments)]
    #[wasm_bindgen(constructor)]
    pub fn new(
        target_hue: f64,
        filter_hue: f64,
        filter_sat: f64,
        filter_val: f64,
        hue_tol: f64,
        sat_tol: f64,
        val_tol: f64,
        lateral_m: f64,
        pixel_noise: f64,
        seed: u32,
    ) -> Result<MaskView, JsError> {
        let req = MaskRequest {
            target_hue,
            filter: HsvColor::new(filter_hue, filter_sat, filter_val),
            tolerance: ColorTolerance {
                hue_half_width: hue_tol,
                sat_half_width: sat_tol,
                val_half_width: val_tol,
            },
            lateral_m,
            range_m: 3.0,
            pixel_noise,
            seed: u64::from(seed),
        };
        Self::build(&req).map_err(|e| JsError::new(&e))
    }

    pub fn width(&self) -> usize {
        CameraModel::default().width
    }

    pub fn height(&self) -> usize {
        CameraModel::default().height
    }

    pub fn rgba(&self) -> Vec<u8> {
        self.rgba.clone()
    }

    pub fn valid(&self) -> bool {
        self.obs.valid
    }

    #[wasm_bindgen(js_name = centroidX)]
    pub fn centroid_x(&self) -> f64 {
        self.obs.centroid_x
    }

    #[wasm_bindgen(js_name = centroidY)]
    pub fn centroid_y(&self) -> f64 {
        self.obs.centroid_y
    }

    #[wasm_bindgen(js_name = rmsRadius)]
    pub fn rms_radius(&self) -> f64 {
        self.obs.rms_radius
    }

    #[wasm_bindgen(js_name = pixelCount)]
    pub fn pixel_count(&self) -> usize {
        self.obs.pixel_count
    }
}
