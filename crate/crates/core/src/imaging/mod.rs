//! Frame handling and colour-blob observation.
//!
//! The pipeline is: convert pixels to hexagonal HSV, pick the prominent colour
//! inside a region of interest, threshold the frame around it and reduce the
//! mask to a centroid plus RMS radius.

mod pnm;

pub use pnm::PnmError;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ImagingError {
    #[error("frame must be at least 1x1, got {width}x{height}")]
    EmptyFrame { width: usize, height: usize },
    #[error("pixel buffer holds {actual} pixels, expected {expected}")]
    PixelCount { expected: usize, actual: usize },
    #[error("region of interest {roi:?} is empty or outside a {width}x{height} frame")]
    BadRoi { roi: Roi, width: usize, height: usize },
    #[error("no pixel in the region of interest passes the chroma filter")]
    AllPixelsAchromatic,
}

/// Packed 8-bit RGB pixel.
pub type Rgb = [u8; 3];

/// Row-major RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<Rgb>,
}

impl Frame {
    pub fn new(width: usize, height: usize, pixels: Vec<Rgb>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::EmptyFrame { width, height });
        }
        if pixels.len() != width * height {
            return Err(ImagingError::PixelCount {
                expected: width * height,
                actual: pixels.len(),
            });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, color: Rgb) -> Result<Self, ImagingError> {
        Self::new(width, height, vec![color; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, color: Rgb) {
        self.pixels[y * self.width + x] = color;
    }

    /// HSV of the pixel nearest to a real-valued image coordinate, clamped to the frame.
    pub fn hsv_at(&self, x: f64, y: f64) -> HsvColor {
        let xi = (x.round().max(0.0) as usize).min(self.width - 1);
        let yi = (y.round().max(0.0) as usize).min(self.height - 1);
        let [r, g, b] = self.get(xi, yi);
        rgb_to_hsv(r, g, b)
    }
}

/// Hexagonal-approximation HSV. Hue in degrees `[0, 360)`, saturation and value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsvColor {
    pub hue: f64,
    pub saturation: f64,
    pub value: f64,
}

impl HsvColor {
    pub fn new(hue: f64, saturation: f64, value: f64) -> Self {
        Self {
            hue: hue.rem_euclid(360.0),
            saturation: saturation.clamp(0.0, 1.0),
            value: value.clamp(0.0, 1.0),
        }
    }

    /// Inverse of [`rgb_to_hsv`], rounded to 8-bit channels.
    pub fn to_rgb(self) -> Rgb {
        let c = self.value * self.saturation;
        let h = self.hue.rem_euclid(360.0) / 60.0;
        let x = c * (1.0 - (h % 2.0 - 1.0).abs());
        let (r, g, b) = match h as u32 {
            0 => (c, x, 0.0),
            1 => (x, c, 0.0),
            2 => (0.0, c, x),
            3 => (0.0, x, c),
            4 => (x, 0.0, c),
            _ => (c, 0.0, x),
        };
        let m = self.value - c;
        let to_byte = |v: f64| ((v + m) * 255.0).round().clamp(0.0, 255.0) as u8;
        [to_byte(r), to_byte(g), to_byte(b)]
    }
}

/// Shortest angular distance between two hues, in degrees.
pub fn hue_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Converts 8-bit RGB to hexagonal HSV. Achromatic pixels get hue 0.
pub fn rgb_to_hsv(r: u8, g: u8, b: u8) -> HsvColor {
    let (rf, gf, bf) = (f64::from(r), f64::from(g), f64::from(b));
    let max = rf.max(gf).max(bf);
    let min = rf.min(gf).min(bf);
    let delta = max - min;

    let hue = if delta == 0.0 {
        0.0
    } else if max == rf {
        60.0 * ((gf - bf) / delta).rem_euclid(6.0)
    } else if max == gf {
        60.0 * ((bf - rf) / delta + 2.0)
    } else {
        60.0 * ((rf - gf) / delta + 4.0)
    };
    let hue = if hue >= 360.0 { hue - 360.0 } else { hue };
    let saturation = if max == 0.0 { 0.0 } else { delta / max };

    HsvColor {
        hue,
        saturation,
        value: max / 255.0,
    }
}

/// Half-widths of the acceptance box around a target colour.
///
/// The defaults threshold a sixth of the hue circle and half of the
/// saturation and value ranges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorTolerance {
    pub hue_half_width: f64,
    pub sat_half_width: f64,
    pub val_half_width: f64,
}

impl Default for ColorTolerance {
    fn default() -> Self {
        Self {
            hue_half_width: 30.0,
            sat_half_width: 0.25,
            val_half_width: 0.25,
        }
    }
}

impl ColorTolerance {
    pub fn is_valid(&self) -> bool {
        self.hue_half_width > 0.0
            && self.hue_half_width <= 180.0
            && self.sat_half_width > 0.0
            && self.sat_half_width <= 0.5
            && self.val_half_width > 0.0
            && self.val_half_width <= 0.5
    }

    /// Inclusive on every boundary; hue wraps across 0/360.
    pub fn accepts(&self, target: &HsvColor, pixel: &HsvColor) -> bool {
        hue_distance(target.hue, pixel.hue) <= self.hue_half_width
            && (pixel.saturation - target.saturation).abs() <= self.sat_half_width
            && (pixel.value - target.value).abs() <= self.val_half_width
    }

    /// Widens (or narrows) the hue window from a colour spread expressed on a
    /// 256-level channel scale: `sigma_color / 256` is the fraction of the hue
    /// circle covered. Saturation and value windows are kept.
    pub fn with_sigma_color(self, sigma_color: f64) -> Self {
        Self {
            hue_half_width: (180.0 * sigma_color / 256.0).clamp(f64::MIN_POSITIVE, 180.0),
            ..self
        }
    }
}

/// Axis-aligned pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Roi {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Roi {
    /// Square of side `size` centred in a `width x height` frame, shrunk to fit.
    pub fn centered(width: usize, height: usize, size: usize) -> Self {
        let w = size.min(width).max(1);
        let h = size.min(height).max(1);
        Self {
            x: (width - w) / 2,
            y: (height - h) / 2,
            width: w,
            height: h,
        }
    }
}

const HUE_BIN_DEG: f64 = 10.0;
const HUE_BINS: usize = 36;
const MIN_CHROMA: f64 = 0.2;

/// Modal hue (10 degree bins) of the chromatic pixels inside `roi`.
///
/// The returned hue is the centre of the winning bin; saturation and value are
/// the means over the pixels of that bin. Ties go to the lower hue.
pub fn prominent_color(frame: &Frame, roi: Roi) -> Result<HsvColor, ImagingError> {
    prominent_color_with_support(frame, roi).map(|(c, _)| c)
}

/// [`prominent_color`] plus the number of pixels in the winning bin.
pub fn prominent_color_with_support(frame: &Frame, roi: Roi) -> Result<(HsvColor, usize), ImagingError> {
    if roi.width == 0 || roi.height == 0 || roi.x + roi.width > frame.width || roi.y + roi.height > frame.height {
        return Err(ImagingError::BadRoi {
            roi,
            width: frame.width,
            height: frame.height,
        });
    }

    let mut counts = [0usize; HUE_BINS];
    let mut sat_sum = [0.0f64; HUE_BINS];
    let mut val_sum = [0.0f64; HUE_BINS];
    for y in roi.y..roi.y + roi.height {
        for x in roi.x..roi.x + roi.width {
            let [r, g, b] = frame.get(x, y);
            let hsv = rgb_to_hsv(r, g, b);
            if hsv.saturation < MIN_CHROMA || hsv.value < MIN_CHROMA {
                continue;
            }
            let bin = ((hsv.hue / HUE_BIN_DEG) as usize).min(HUE_BINS - 1);
            counts[bin] += 1;
            sat_sum[bin] += hsv.saturation;
            val_sum[bin] += hsv.value;
        }
    }

    // `max_by_key` keeps the last maximum, so scan explicitly for the first.
    let mut best = 0;
    for bin in 1..HUE_BINS {
        if counts[bin] > counts[best] {
            best = bin;
        }
    }
    if counts[best] == 0 {
        return Err(ImagingError::AllPixelsAchromatic);
    }
    let n = counts[best] as f64;
    let color = HsvColor {
        hue: (best as f64 + 0.5) * HUE_BIN_DEG,
        saturation: sat_sum[best] / n,
        value: val_sum[best] / n,
    };
    Ok((color, counts[best]))
}

/// Binary image with the same dimensions as the frame it was computed from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::EmptyFrame { width, height });
        }
        if bits.len() != width * height {
            return Err(ImagingError::PixelCount {
                expected: width * height,
                actual: bits.len(),
            });
        }
        Ok(Self { width, height, bits })
    }

    /// Mask with the listed pixels switched on. Out-of-range points are ignored.
    pub fn from_points(width: usize, height: usize, points: &[(usize, usize)]) -> Self {
        let mut mask = Self::new(width, height);
        for &(x, y) in points {
            if x < width && y < height {
                mask.set(x, y, true);
            }
        }
        mask
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.bits[y * self.width + x] = on;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Coordinates of every on-pixel in row-major order.
    pub fn on_pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(move |(i, _)| (i % self.width, i / self.width))
    }
}

/// Thresholds every pixel of `frame` against `target` with `tol`.
pub fn hsv_mask(frame: &Frame, target: &HsvColor, tol: &ColorTolerance) -> Mask {
    let bits = frame
        .pixels
        .iter()
        .map(|&[r, g, b]| tol.accepts(target, &rgb_to_hsv(r, g, b)))
        .collect();
    Mask {
        width: frame.width,
        height: frame.height,
        bits,
    }
}

pub const DEFAULT_MIN_BLOB_PIXELS: usize = 9;

/// Centroid and RMS radius of a thresholded blob. Controllers must ignore the
/// geometry when `valid` is false.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobObservation {
    pub centroid_x: f64,
    pub centroid_y: f64,
    pub rms_radius: f64,
    pub pixel_count: usize,
    pub valid: bool,
}

impl BlobObservation {
    pub fn invalid() -> Self {
        Self {
            centroid_x: 0.0,
            centroid_y: 0.0,
            rms_radius: 0.0,
            pixel_count: 0,
            valid: false,
        }
    }

    /// Centroid and RMS radius of a point set; `valid` once `points.len() >= min_count`.
    pub fn from_points(points: &[(f64, f64)], min_count: usize) -> Self {
        if points.is_empty() {
            return Self::invalid();
        }
        let n = points.len() as f64;
        let (sx, sy) = points.iter().fold((0.0, 0.0), |(ax, ay), &(x, y)| (ax + x, ay + y));
        let (cx, cy) = (sx / n, sy / n);
        let mean_sq = points
            .iter()
            .map(|&(x, y)| (x - cx).powi(2) + (y - cy).powi(2))
            .sum::<f64>()
            / n;
        Self {
            centroid_x: cx,
            centroid_y: cy,
            rms_radius: mean_sq.sqrt(),
            pixel_count: points.len(),
            valid: points.len() >= min_count.max(1),
        }
    }

    /// Distance of the centroid from the image centre `(w/2, h/2)`.
    pub fn center_distance(&self, width: usize, height: usize) -> f64 {
        let dx = self.centroid_x - width as f64 / 2.0;
        let dy = self.centroid_y - height as f64 / 2.0;
        dx.hypot(dy)
    }
}

/// Reduces a mask to its centroid and RMS radius.
pub fn blob_observe(mask: &Mask, min_blob_pixels: usize) -> BlobObservation {
    // Two passes over integer sums keep the centroid exact for large blobs.
    let mut n = 0u64;
    let (mut sx, mut sy) = (0u64, 0u64);
    for (x, y) in mask.on_pixels() {
        n += 1;
        sx += x as u64;
        sy += y as u64;
    }
    if n == 0 {
        return BlobObservation::invalid();
    }
    let nf = n as f64;
    let (cx, cy) = (sx as f64 / nf, sy as f64 / nf);
    let sum_sq: f64 = mask
        .on_pixels()
        .map(|(x, y)| (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2))
        .sum();
    BlobObservation {
        centroid_x: cx,
        centroid_y: cy,
        rms_radius: (sum_sq / nf).sqrt(),
        pixel_count: n as usize,
        valid: n as usize >= min_blob_pixels.max(1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hsv_primary_and_gray() {
        let red = rgb_to_hsv(255, 0, 0);
        assert_eq!((red.hue, red.saturation, red.value), (0.0, 1.0, 1.0));

        let gray = rgb_to_hsv(128, 128, 128);
        assert_eq!(gray.hue, 0.0);
        assert_eq!(gray.saturation, 0.0);
        assert_abs_diff_eq!(gray.value, 128.0 / 255.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gray.value, 0.502, epsilon = 1e-3);
    }

    #[test]
    fn hsv_azure() {
        // max = b = 255, min = r = 0: H = 60 * (4 + (0 - 128) / 255)
        let c = rgb_to_hsv(0, 128, 255);
        assert_abs_diff_eq!(c.hue, 60.0 * (4.0 - 128.0 / 255.0), epsilon = 1e-12);
        assert_abs_diff_eq!(c.hue, 209.88, epsilon = 5e-3);
        assert_eq!(c.saturation, 1.0);
        assert_eq!(c.value, 1.0);
    }

    #[test]
    fn hsv_magenta_side_stays_below_360() {
        let c = rgb_to_hsv(255, 0, 1);
        assert!(c.hue < 360.0 && c.hue > 359.0, "{}", c.hue);
    }

    #[test]
    fn frame_rejects_bad_buffers() {
        assert_eq!(
            Frame::new(0, 4, vec![]),
            Err(ImagingError::EmptyFrame { width: 0, height: 4 })
        );
        assert_eq!(
            Frame::new(2, 2, vec![[0; 3]; 3]),
            Err(ImagingError::PixelCount { expected: 4, actual: 3 })
        );
    }

    fn frame_from(width: usize, height: usize, colors: &[Rgb]) -> Frame {
        Frame::new(width, height, colors.to_vec()).unwrap()
    }

    #[test]
    fn prominent_uniform_red() {
        let frame = Frame::filled(8, 8, [255, 0, 0]).unwrap();
        let c = prominent_color(
            &frame,
            Roi {
                x: 0,
                y: 0,
                width: 8,
                height: 8,
            },
        )
        .unwrap();
        assert_eq!(c.hue, 5.0);
        assert_eq!(c.saturation, 1.0);
    }

    #[test]
    fn prominent_majority_wins() {
        let green = HsvColor::new(120.0, 1.0, 1.0).to_rgb();
        let blue = HsvColor::new(240.0, 1.0, 1.0).to_rgb();
        let mut px = vec![green; 6];
        px.extend(vec![blue; 4]);
        let frame = frame_from(10, 1, &px);
        let c = prominent_color(
            &frame,
            Roi {
                x: 0,
                y: 0,
                width: 10,
                height: 1,
            },
        )
        .unwrap();
        assert_eq!(c.hue, 125.0);
    }

    #[test]
    fn prominent_tie_goes_to_lower_hue() {
        let a = HsvColor::new(20.0, 1.0, 1.0).to_rgb();
        let b = HsvColor::new(200.0, 1.0, 1.0).to_rgb();
        assert_abs_diff_eq!(rgb_to_hsv(a[0], a[1], a[2]).hue, 20.0, epsilon = 1e-9);
        let frame = frame_from(4, 1, &[b, a, b, a]);
        let c = prominent_color(
            &frame,
            Roi {
                x: 0,
                y: 0,
                width: 4,
                height: 1,
            },
        )
        .unwrap();
        assert_eq!(c.hue, 25.0);
    }

    #[test]
    fn prominent_errors() {
        let frame = Frame::filled(4, 4, [100, 100, 100]).unwrap();
        let roi = Roi {
            x: 0,
            y: 0,
            width: 4,
            height: 4,
        };
        assert_eq!(prominent_color(&frame, roi), Err(ImagingError::AllPixelsAchromatic));
        let outside = Roi {
            x: 2,
            y: 2,
            width: 4,
            height: 1,
        };
        assert!(matches!(
            prominent_color(&frame, outside),
            Err(ImagingError::BadRoi { .. })
        ));
    }

    #[test]
    fn tolerance_wraps_and_excludes() {
        let tol = ColorTolerance::default();
        let red = HsvColor::new(0.0, 1.0, 1.0);
        assert!(tol.accepts(&red, &HsvColor::new(350.0, 1.0, 1.0)));
        assert!(tol.accepts(&red, &red));
        let t = HsvColor::new(100.0, 0.5, 0.5);
        assert!(!tol.accepts(&t, &HsvColor::new(131.0, 0.5, 0.5)));
        assert!(tol.accepts(&t, &HsvColor::new(130.0, 0.5, 0.5)));
        assert!(tol.accepts(&t, &HsvColor::new(100.0, 0.75, 0.25)));
        assert!(!tol.accepts(&t, &HsvColor::new(100.0, 0.76, 0.5)));
    }

    #[test]
    fn mask_marks_matching_pixels() {
        let red = [255, 0, 0];
        let pink = HsvColor::new(350.0, 1.0, 1.0).to_rgb();
        let green = [0, 255, 0];
        let frame = frame_from(3, 1, &[red, pink, green]);
        let mask = hsv_mask(&frame, &HsvColor::new(0.0, 1.0, 1.0), &ColorTolerance::default());
        assert_eq!(mask.bits(), &[true, true, false]);
    }

    #[test]
    fn blob_cases() {
        let empty = Mask::new(16, 16);
        assert!(!blob_observe(&empty, 9).valid);

        let single = Mask::from_points(32, 32, &[(10, 20)]);
        let obs = blob_observe(&single, 1);
        assert!(obs.valid);
        assert_eq!((obs.centroid_x, obs.centroid_y, obs.rms_radius), (10.0, 20.0, 0.0));

        let square = Mask::from_points(4, 4, &[(0, 0), (2, 0), (0, 2), (2, 2)]);
        let obs = blob_observe(&square, 1);
        assert_eq!((obs.centroid_x, obs.centroid_y), (1.0, 1.0));
        assert_abs_diff_eq!(obs.rms_radius, 2f64.sqrt(), epsilon = 1e-12);
        assert_eq!(obs.pixel_count, 4);
        assert!(!blob_observe(&square, 9).valid);
    }

    #[test]
    fn sigma_color_sets_hue_window() {
        let tol = ColorTolerance::default().with_sigma_color(256.0 / 6.0);
        assert_abs_diff_eq!(tol.hue_half_width, 30.0, epsilon = 1e-12);
        assert_eq!(ColorTolerance::default().with_sigma_color(768.0).hue_half_width, 180.0);
    }
}
