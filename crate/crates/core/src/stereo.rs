//! Depth from the pixel shift of one feature seen by two virtual cameras.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StereoError {
    #[error("zero disparity: the point is at infinity")]
    ZeroDisparity,
    #[error("focal length and baseline must be positive (f = {focal}, d = {baseline})")]
    InvalidGeometry { focal: f64, baseline: f64 },
}

/// Equivalent focal length (pixel-scaled, same unit as depth) and camera baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StereoGeometry {
    focal: f64,
    baseline: f64,
}

impl StereoGeometry {
    pub fn new(focal: f64, baseline: f64) -> Result<Self, StereoError> {
        if focal > 0.0 && baseline > 0.0 {
            Ok(Self { focal, baseline })
        } else {
            Err(StereoError::InvalidGeometry { focal, baseline })
        }
    }

    pub fn focal(&self) -> f64 {
        self.focal
    }

    pub fn baseline(&self) -> f64 {
        self.baseline
    }

    /// Disparity `p2 - p1` that a point at depth `h` produces.
    pub fn disparity_for_depth(&self, h: f64) -> f64 {
        self.focal * self.baseline / (h + self.focal)
    }
}

/// `h = f * d / (p2 - p1) - f`. Negative depths are returned as-is; see [`is_physical`].
pub fn depth(geom: &StereoGeometry, p1: f64, p2: f64) -> Result<f64, StereoError> {
    let disparity = p2 - p1;
    if disparity == 0.0 {
        return Err(StereoError::ZeroDisparity);
    }
    Ok(geom.focal * geom.baseline / disparity - geom.focal)
}

pub fn is_physical(h: f64) -> bool {
    h >= 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn worked_values() {
        let unit = StereoGeometry::new(1.0, 1.0).unwrap();
        assert_eq!(depth(&unit, 0.0, 1.0).unwrap(), 0.0);

        let g = StereoGeometry::new(37.0, 0.4).unwrap();
        assert_abs_diff_eq!(depth(&g, 2.0, 2.4).unwrap(), 0.0, epsilon = 1e-12);

        let g = StereoGeometry::new(100.0, 0.1).unwrap();
        let h = depth(&g, 0.0, 2.0).unwrap();
        assert_abs_diff_eq!(h, -95.0, epsilon = 1e-12);
        assert!(!is_physical(h));
    }

    #[test]
    fn errors() {
        let g = StereoGeometry::new(1.0, 1.0).unwrap();
        assert_eq!(depth(&g, 3.0, 3.0), Err(StereoError::ZeroDisparity));
        assert!(StereoGeometry::new(0.0, 1.0).is_err());
        assert!(StereoGeometry::new(1.0, -1.0).is_err());
    }
}
