use serde::Serialize;

/// Horizontal-mounted pinhole camera. Pixel `(i, j)` has its centre at image
/// coordinate `(i, j)`; the principal point is `(width/2, height/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CameraModel {
    pub width: usize,
    pub height: usize,
    pub hfov_deg: f64,
    pub rate_hz: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            width: 320,
            height: 240,
            hfov_deg: 60.0,
            rate_hz: 5.0,
        }
    }
}

/// Points closer than this along the optical axis are not imaged.
pub const NEAR_PLANE_M: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    /// Distance along the optical axis.
    pub depth: f64,
    /// Euclidean distance from the camera.
    pub range: f64,
}

impl CameraModel {
    pub fn focal_px(&self) -> f64 {
        (self.width as f64 / 2.0) / (self.hfov_deg.to_radians() / 2.0).tan()
    }

    pub fn center(&self) -> (f64, f64) {
        (self.width as f64 / 2.0, self.height as f64 / 2.0)
    }

    pub fn frame_period(&self) -> f64 {
        1.0 / self.rate_hz
    }

    pub fn project(&self, pose: &Pose, point: [f64; 3]) -> Option<Projection> {
        let d = [
            point[0] - pose.position[0],
            point[1] - pose.position[1],
            point[2] - pose.position[2],
        ];
        let fwd = pose.forward();
        let right = pose.right();
        let depth = fwd[0] * d[0] + fwd[1] * d[1];
        if depth <= NEAR_PLANE_M {
            return None;
        }
        let lateral = right[0] * d[0] + right[1] * d[1];
        let up = d[2];
        let f = self.focal_px();
        let (cx, cy) = self.center();
        Some(Projection {
            u: cx + f * lateral / depth,
            v: cy - f * up / depth,
            depth,
            range: (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt(),
        })
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64
    }

    /// Inside the central half-rectangle `[w/4, 3w/4] x [h/4, 3h/4]`.
    pub fn in_central_half(&self, u: f64, v: f64) -> bool {
        let (w, h) = (self.width as f64, self.height as f64);
        (w / 4.0..=3.0 * w / 4.0).contains(&u) && (h / 4.0..=3.0 * h / 4.0).contains(&v)
    }
}

/// Vehicle position and heading. Heading is measured clockwise from +x seen
/// from above, so a positive yaw command turns toward image-right.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub position: [f64; 3],
    pub yaw: f64,
}

impl Pose {
    pub fn forward(&self) -> [f64; 3] {
        [self.yaw.cos(), -self.yaw.sin(), 0.0]
    }

    pub fn right(&self) -> [f64; 3] {
        [-self.yaw.sin(), -self.yaw.cos(), 0.0]
    }

    /// Heading that points the camera at `target`.
    pub fn heading_to(&self, target: [f64; 3]) -> f64 {
        let dx = target[0] - self.position[0];
        let dy = target[1] - self.position[1];
        (-dy).atan2(dx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn on_axis_point_hits_principal_point() {
        let cam = CameraModel::default();
        let pose = Pose {
            position: [1.0, 2.0, 0.5],
            yaw: 0.3,
        };
        let fwd = pose.forward();
        let p = cam
            .project(&pose, [1.0 + 4.0 * fwd[0], 2.0 + 4.0 * fwd[1], 0.5])
            .unwrap();
        assert_abs_diff_eq!(p.u, 160.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p.v, 120.0, epsilon = 1e-9);
        assert_abs_diff_eq!(p.depth, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn right_and_up_map_to_image_axes() {
        let cam = CameraModel::default();
        let pose = Pose::default();
        // facing +x, right is -y
        let p = cam.project(&pose, [5.0, -1.0, 1.0]).unwrap();
        assert!(p.u > 160.0 && p.v < 120.0);
        assert!(cam.project(&pose, [-5.0, 0.0, 0.0]).is_none());
    }

    #[test]
    fn heading_to_faces_target() {
        let pose = Pose {
            position: [3.0, -2.0, 0.0],
            yaw: 0.0,
        };
        let target = [0.0, 1.0, 0.0];
        let facing = Pose {
            yaw: pose.heading_to(target),
            ..pose
        };
        let p = CameraModel::default().project(&facing, target).unwrap();
        assert_abs_diff_eq!(p.u, 160.0, epsilon = 1e-9);
    }

    #[test]
    fn focal_length_for_sixty_degrees() {
        assert_abs_diff_eq!(
            CameraModel::default().focal_px(),
            160.0 / 30f64.to_radians().tan(),
            epsilon = 1e-12
        );
    }
}
