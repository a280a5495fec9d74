//! Synthetic camera: a flat-shaded sphere over a uniform background, plus
//! binary features sampled on the projected disc.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::camera::{CameraModel, Projection};
use super::world::WorldState;
use crate::features::{Descriptor, Feature};
use crate::imaging::{Frame, HsvColor, Rgb};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetAppearance {
    pub color: HsvColor,
    /// Sphere radius, m.
    pub radius_m: f64,
}

impl Default for TargetAppearance {
    fn default() -> Self {
        Self {
            color: HsvColor::new(0.0, 0.9, 0.9),
            radius_m: 0.25,
        }
    }
}

/// Fraction of the disc radius at which the ring features sit.
pub const FEATURE_RING: f64 = 0.85;
pub const RING_FEATURES: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneStyle {
    pub background: Rgb,
    /// Std of additive per-channel noise, 8-bit units.
    pub pixel_noise: f64,
    /// Per-bit flip probability applied to target descriptors each frame.
    pub bit_noise: f64,
    /// Random background features per frame.
    pub clutter: usize,
}

impl Default for SceneStyle {
    fn default() -> Self {
        Self {
            background: [96, 96, 96],
            pixel_noise: 0.0,
            bit_noise: 0.05,
            clutter: 6,
        }
    }
}

/// Descriptors the target carries: index 0 is the centre, 1..=8 the ring.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTemplate {
    pub descriptors: Vec<Descriptor>,
}

impl FeatureTemplate {
    pub fn random<R: Rng + ?Sized>(bits: usize, rng: &mut R) -> Self {
        Self {
            descriptors: (0..=RING_FEATURES).map(|_| Descriptor::random(bits, rng)).collect(),
        }
    }

    pub fn bits(&self) -> usize {
        self.descriptors.first().map_or(0, Descriptor::bits)
    }

    /// Template as matchable features (positions are irrelevant).
    pub fn as_features(&self) -> Vec<Feature> {
        self.descriptors
            .iter()
            .map(|d| Feature::new(0.0, 0.0, d.clone(), 1.0))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Rendered {
    pub frame: Frame,
    pub features: Vec<Feature>,
    /// Projection of the target centre, when it is in front of the camera.
    pub projection: Option<Projection>,
    /// Projected disc radius in pixels (0 when not visible).
    pub disc_radius: f64,
}

/// Renders the target sphere as a filled disc of radius `f * R / range`.
///
/// A target behind the camera produces an empty frame and no features; disc
/// pixels and features falling outside the image are dropped.
pub fn render(
    world: &mut WorldState,
    cam: &CameraModel,
    target: Option<&TargetAppearance>,
    style: &SceneStyle,
    template: &FeatureTemplate,
) -> Rendered {
    let (w, h) = (cam.width, cam.height);
    let mut frame = Frame::filled(w, h, style.background).expect("camera dimensions are non-zero");
    let mut features = Vec::new();

    let projection = target.and_then(|_| cam.project(&world.quad, world.target_pos));
    let mut disc_radius = 0.0;
    if let (Some(p), Some(app)) = (projection, target) {
        let r = cam.focal_px() * app.radius_m / p.range;
        disc_radius = r;
        let color = app.color.to_rgb();
        let x0 = (p.u - r).floor().max(0.0);
        let x1 = (p.u + r).ceil().min(w as f64 - 1.0);
        let y0 = (p.v - r).floor().max(0.0);
        let y1 = (p.v + r).ceil().min(h as f64 - 1.0);
        if x0 <= x1 && y0 <= y1 {
            for y in y0 as usize..=y1 as usize {
                for x in x0 as usize..=x1 as usize {
                    let (dx, dy) = (x as f64 - p.u, y as f64 - p.v);
                    if dx * dx + dy * dy <= r * r {
                        frame.set(x, y, color);
                    }
                }
            }
        }

        let bits = template.bits().max(8);
        for (i, desc) in template.descriptors.iter().enumerate() {
            let (fx, fy) = if i == 0 {
                (p.u, p.v)
            } else {
                let a = (i - 1) as f64 * TAU / RING_FEATURES as f64;
                (p.u + FEATURE_RING * r * a.cos(), p.v + FEATURE_RING * r * a.sin())
            };
            let noisy = desc.with_noise(style.bit_noise, &mut world.rng);
            if !cam.contains(fx, fy) {
                continue;
            }
            let flipped = desc.hamming(&noisy).unwrap_or(0) as f64;
            let confidence = (1.0 - flipped / bits as f64).max(1.0 / bits as f64);
            features.push(Feature::new(fx, fy, noisy, confidence));
        }
    }

    let bits = template.bits().max(8);
    for _ in 0..style.clutter {
        let fx = world.rng.random_range(0.0..w as f64);
        let fy = world.rng.random_range(0.0..h as f64);
        let confidence = world.rng.random_range(0.2..=1.0);
        features.push(Feature::new(
            fx,
            fy,
            Descriptor::random(bits, &mut world.rng),
            confidence,
        ));
    }

    if style.pixel_noise > 0.0 {
        let noise = Normal::new(0.0, style.pixel_noise).expect("finite noise std");
        for y in 0..h {
            for x in 0..w {
                let px = frame
                    .get(x, y)
                    .map(|c| (f64::from(c) + noise.sample(&mut world.rng)).round().clamp(0.0, 255.0) as u8);
                frame.set(x, y, px);
            }
        }
    }

    Rendered {
        frame,
        features,
        projection,
        disc_radius,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{blob_observe, hsv_mask, ColorTolerance};
    use crate::sim::camera::Pose;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(target: [f64; 3]) -> (WorldState, FeatureTemplate) {
        let world = WorldState::new(
            Pose {
                position: [0.0, 0.0, 0.5],
                yaw: 0.0,
            },
            target,
            3,
        );
        let template = FeatureTemplate::random(256, &mut ChaCha8Rng::seed_from_u64(9));
        (world, template)
    }

    fn observe(r: &Rendered, app: &TargetAppearance) -> crate::imaging::BlobObservation {
        blob_observe(&hsv_mask(&r.frame, &app.color, &ColorTolerance::default()), 1)
    }

    #[test]
    fn on_axis_disc_is_centred() {
        let (mut world, template) = setup([3.0, 0.0, 0.5]);
        let app = TargetAppearance::default();
        let r = render(
            &mut world,
            &CameraModel::default(),
            Some(&app),
            &SceneStyle::default(),
            &template,
        );
        let obs = observe(&r, &app);
        assert!(obs.valid);
        assert_abs_diff_eq!(obs.centroid_x, 160.0, epsilon = 1e-9);
        assert_abs_diff_eq!(obs.centroid_y, 120.0, epsilon = 1e-9);
        assert_eq!(r.features.len(), 9 + SceneStyle::default().clutter);
    }

    #[test]
    fn doubling_range_halves_radius() {
        let cam = CameraModel::default();
        let app = TargetAppearance::default();
        let style = SceneStyle::default();
        let (mut near, template) = setup([2.0, 0.0, 0.5]);
        let (mut far, _) = setup([4.0, 0.0, 0.5]);
        let a = render(&mut near, &cam, Some(&app), &style, &template);
        let b = render(&mut far, &cam, Some(&app), &style, &template);
        assert_abs_diff_eq!(a.disc_radius, 2.0 * b.disc_radius, epsilon = 1e-9);
        // disc area scales with radius squared, so the RMS radius halves as well
        let (ra, rb) = (observe(&a, &app).rms_radius, observe(&b, &app).rms_radius);
        assert!((ra - 2.0 * rb).abs() <= 1.0, "{ra} vs {rb}");
    }

    #[test]
    fn target_behind_is_culled() {
        let (mut world, template) = setup([-3.0, 0.0, 0.5]);
        let app = TargetAppearance::default();
        let style = SceneStyle {
            clutter: 0,
            ..SceneStyle::default()
        };
        let r = render(&mut world, &CameraModel::default(), Some(&app), &style, &template);
        assert!(r.projection.is_none());
        assert!(r.features.is_empty());
        assert_eq!(observe(&r, &app).pixel_count, 0);
    }

    #[test]
    fn same_seed_same_pixels() {
        let cam = CameraModel::default();
        let app = TargetAppearance::default();
        let style = SceneStyle {
            pixel_noise: 6.0,
            ..SceneStyle::default()
        };
        let (mut a, template) = setup([3.0, 0.5, 0.5]);
        let (mut b, _) = setup([3.0, 0.5, 0.5]);
        let ra = render(&mut a, &cam, Some(&app), &style, &template);
        let rb = render(&mut b, &cam, Some(&app), &style, &template);
        assert_eq!(ra.frame, rb.frame);
        assert_eq!(ra.features, rb.features);
    }
}
