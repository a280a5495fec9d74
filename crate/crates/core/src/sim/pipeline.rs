//! Observation pipelines that turn a rendered frame into a target estimate,
//! and the STATUS controller that turns the estimate into a command.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use super::render::{FeatureTemplate, Rendered};
use crate::control::{
    forward_command, sigma_color, sigma_update, throttle_command, yaw_command, ControlCommand, ControlLimits,
    GaussianModel,
};
use crate::ekf::{predict, update, ConstantVelocity, EkfModels, EkfState};
use crate::features::{
    adapt_threshold, filter_by_color, hamming_match, kernel_estimate, kernel_update, mean_feature_color,
    weighted_centroid, Feature, KernelBuffer, MatchThreshold,
};
use crate::imaging::{
    blob_observe, hsv_mask, prominent_color_with_support, BlobObservation, ColorTolerance, HsvColor, Roi,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineKind {
    ColorBlob,
    FeatureKernel,
    EkfAssisted,
    StatusSitl,
}

impl PipelineKind {
    pub const ALL: [Self; 4] = [
        Self::ColorBlob,
        Self::FeatureKernel,
        Self::EkfAssisted,
        Self::StatusSitl,
    ];
}

impl FromStr for PipelineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|k| k.to_string() == s).ok_or_else(|| {
            format!("unknown pipeline {s:?} (expected color-blob, feature-kernel, ekf-assisted or status-sitl)")
        })
    }
}

impl fmt::Display for PipelineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ColorBlob => "color-blob",
            Self::FeatureKernel => "feature-kernel",
            Self::EkfAssisted => "ekf-assisted",
            Self::StatusSitl => "status-sitl",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineParams {
    pub kind: PipelineKind,
    pub tolerance: ColorTolerance,
    pub min_blob_pixels: usize,
    pub roi_size: usize,
    /// Widen the hue tolerance with the learned centroid spread.
    pub sigma_color_hook: bool,
    pub threshold: MatchThreshold,
    pub kernel_size: usize,
    pub kernel_frames: usize,
    /// Acceleration spectral density of the pixel-space EKF, px^2/s^3.
    pub ekf_process_noise: f64,
    /// Measurement standard deviation of the pixel-space EKF, px.
    pub ekf_measurement_sigma: f64,
    /// Frames the EKF may predict through before the tracker gives up.
    pub coast_frames: usize,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            kind: PipelineKind::ColorBlob,
            tolerance: ColorTolerance::default(),
            min_blob_pixels: crate::imaging::DEFAULT_MIN_BLOB_PIXELS,
            roi_size: 64,
            sigma_color_hook: false,
            threshold: MatchThreshold::default(),
            kernel_size: KernelBuffer::DEFAULT_SIZE,
            kernel_frames: KernelBuffer::DEFAULT_CAPACITY,
            ekf_process_noise: 400.0,
            ekf_measurement_sigma: 3.0,
            coast_frames: 5,
        }
    }
}

/// Result of one frame: the raw observation and the point the controller steers toward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackStep {
    pub observation: BlobObservation,
    pub aim: Option<(f64, f64)>,
}

/// Per-run tracker state. One instance per scenario; nothing is shared.
#[derive(Debug, Clone)]
pub struct Tracker {
    params: PipelineParams,
    width: usize,
    height: usize,
    template: Vec<Feature>,
    target_color: Option<HsvColor>,
    model: GaussianModel,
    threshold: MatchThreshold,
    kernel: KernelBuffer,
    ekf_models: EkfModels<ConstantVelocity>,
    ekf: Option<EkfState>,
    coasted: usize,
}

impl Tracker {
    pub fn new(
        params: PipelineParams,
        width: usize,
        height: usize,
        frame_period: f64,
        template: &FeatureTemplate,
    ) -> Self {
        let cv = ConstantVelocity::new(2, frame_period);
        let q = DMatrix::identity(2, 2) * params.ekf_measurement_sigma.powi(2);
        let r = cv.process_noise(params.ekf_process_noise);
        let ekf_models = EkfModels::new(cv, r, q.clone(), q).expect("positive noise parameters");
        Self {
            width,
            height,
            template: template.as_features(),
            target_color: None,
            model: GaussianModel::new(width as f64, height as f64),
            threshold: params.threshold,
            kernel: KernelBuffer::new(params.kernel_size, params.kernel_frames),
            ekf_models,
            ekf: None,
            coasted: 0,
            params,
        }
    }

    pub fn model(&self) -> &GaussianModel {
        &self.model
    }

    pub fn target_color(&self) -> Option<HsvColor> {
        self.target_color
    }

    pub fn threshold(&self) -> MatchThreshold {
        self.threshold
    }

    /// Locks the target colour from the central ROI once enough pixels agree
    /// on a hue; sensor noise on a plain background never does.
    fn acquire_color(&mut self, r: &Rendered) {
        if self.target_color.is_none() {
            let roi = Roi::centered(self.width, self.height, self.params.roi_size);
            self.target_color = prominent_color_with_support(&r.frame, roi)
                .ok()
                .filter(|&(_, support)| support >= self.params.min_blob_pixels)
                .map(|(c, _)| c);
        }
    }

    fn color_blob(&mut self, r: &Rendered) -> BlobObservation {
        self.acquire_color(r);
        let Some(target) = self.target_color else {
            return BlobObservation::invalid();
        };
        let tol = if self.params.sigma_color_hook {
            self.params
                .tolerance
                .with_sigma_color(sigma_color(&self.model, self.width as f64, self.height as f64))
        } else {
            self.params.tolerance
        };
        blob_observe(&hsv_mask(&r.frame, &target, &tol), self.params.min_blob_pixels)
    }

    fn feature_kernel(&mut self, r: &Rendered) -> BlobObservation {
        self.acquire_color(r);
        let matches = hamming_match(&self.template, &r.features, &self.threshold).unwrap_or_default();
        self.threshold = adapt_threshold(self.threshold, matches.len());
        let kept = match self.target_color {
            Some(c) => filter_by_color(&matches, &r.frame, &c),
            None => matches,
        };
        if let Some(c) = mean_feature_color(&kept, &r.frame) {
            self.target_color = Some(c);
        }
        let centroid = weighted_centroid(&kept);
        let kernel = std::mem::take(&mut self.kernel);
        self.kernel = kernel_update(kernel, &kept, self.width, self.height);
        // the kernel vote decides presence and size; the current frame's
        // centroid, when it has one, gives the freshest position
        let est = kernel_estimate(&self.kernel);
        if centroid.valid && est.valid {
            BlobObservation {
                centroid_x: centroid.x,
                centroid_y: centroid.y,
                ..est
            }
        } else {
            est
        }
    }

    fn filter(&mut self, obs: &BlobObservation) -> Option<(f64, f64)> {
        let zero = DVector::zeros(2);
        if obs.valid {
            let z = DVector::from_vec(vec![obs.centroid_x, obs.centroid_y]);
            let next = match &self.ekf {
                Some(s) => predict(s, &self.ekf_models, &zero).and_then(|p| update(&p, &self.ekf_models, &z)),
                None => {
                    let mut sigma = DMatrix::zeros(4, 4);
                    let var = self.params.ekf_measurement_sigma.powi(2);
                    sigma[(0, 0)] = var;
                    sigma[(1, 1)] = var;
                    sigma[(2, 2)] = 100.0 * var;
                    sigma[(3, 3)] = 100.0 * var;
                    EkfState::new(DVector::from_vec(vec![obs.centroid_x, obs.centroid_y, 0.0, 0.0]), sigma)
                }
            };
            self.ekf = next.ok();
            self.coasted = 0;
        } else if let Some(s) = &self.ekf {
            self.coasted += 1;
            self.ekf = if self.coasted <= self.params.coast_frames {
                predict(s, &self.ekf_models, &zero).ok()
            } else {
                None
            };
        }
        self.ekf.as_ref().map(|s| (s.mu[0], s.mu[1]))
    }

    /// Runs the configured pipeline on one frame.
    pub fn observe(&mut self, r: &Rendered) -> TrackStep {
        let observation = match self.params.kind {
            PipelineKind::ColorBlob | PipelineKind::EkfAssisted | PipelineKind::StatusSitl => self.color_blob(r),
            PipelineKind::FeatureKernel => self.feature_kernel(r),
        };
        let aim = if self.params.kind == PipelineKind::EkfAssisted {
            self.filter(&observation)
        } else {
            observation
                .valid
                .then_some((observation.centroid_x, observation.centroid_y))
        };
        TrackStep { observation, aim }
    }

    /// STATUS command toward the aim point; hover when there is none.
    pub fn command(&mut self, step: &TrackStep, limits: &ControlLimits) -> ControlCommand {
        let Some((x, y)) = step.aim else {
            return ControlCommand::HOVER;
        };
        let (w, h) = (self.width as f64, self.height as f64);
        self.model = match self.params.kind {
            PipelineKind::StatusSitl => GaussianModel::fixed(w, h, (step.observation.pixel_count as f64).sqrt()),
            _ => sigma_update(self.model, x, y, w, h),
        };
        let d = (x - w / 2.0).hypot(y - h / 2.0);
        ControlCommand {
            yaw: yaw_command(x, w),
            throttle: throttle_command(y, h),
            forward: forward_command(&self.model, d, w, h, limits),
        }
    }
}
