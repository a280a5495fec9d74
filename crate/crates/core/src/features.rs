//! Binary-descriptor matching with an adaptive Hamming threshold, colour
//! filtering of matches, confidence-weighted centroids and the coarse
//! occupancy-kernel estimator that smooths detections over several frames.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::imaging::{hue_distance, BlobObservation, Frame, HsvColor};

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("descriptor length mismatch: expected {expected} bits, found {found}")]
    DescriptorLengthMismatch { expected: usize, found: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub const DEFAULT_DESCRIPTOR_BITS: usize = 256;

/// Packed binary descriptor; the bit length is always a multiple of 8.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Descriptor(Vec<u8>);

impl Descriptor {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        Self(bytes)
    }

    pub fn zeros(bits: usize) -> Self {
        Self(vec![0; bits.div_ceil(8)])
    }

    pub fn random<R: Rng + ?Sized>(bits: usize, rng: &mut R) -> Self {
        let mut bytes = vec![0u8; bits.div_ceil(8)];
        rng.fill(&mut bytes[..]);
        Self(bytes)
    }

    pub fn bits(&self) -> usize {
        self.0.len() * 8
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn bit(&self, i: usize) -> bool {
        self.0[i / 8] >> (i % 8) & 1 == 1
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i / 8] ^= 1 << (i % 8);
    }

    /// Copy with each bit flipped independently with probability `rate`.
    pub fn with_noise<R: Rng + ?Sized>(&self, rate: f64, rng: &mut R) -> Self {
        let mut out = self.clone();
        if rate > 0.0 {
            for i in 0..self.bits() {
                if rng.random_bool(rate.min(1.0)) {
                    out.flip(i);
                }
            }
        }
        out
    }

    pub fn hamming(&self, other: &Descriptor) -> Result<u32, FeatureError> {
        if self.0.len() != other.0.len() {
            return Err(FeatureError::DescriptorLengthMismatch {
                expected: self.bits(),
                found: other.bits(),
            });
        }
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| (a ^ b).count_ones()).sum())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, hex::FromHexError> {
        hex::decode(s).map(Self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub x: f64,
    pub y: f64,
    pub descriptor: Descriptor,
    pub confidence: f64,
}

impl Feature {
    pub fn new(x: f64, y: f64, descriptor: Descriptor, confidence: f64) -> Self {
        Self {
            x,
            y,
            descriptor,
            confidence,
        }
    }
}

/// Hamming acceptance distance, adapted frame to frame toward three matches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchThreshold {
    pub value: u32,
    pub min_value: u32,
    pub max_value: u32,
    pub increment: u32,
    pub decrement: u32,
}

/// Number of matches at which the threshold stops moving.
pub const TARGET_MATCHES: usize = 3;

impl Default for MatchThreshold {
    fn default() -> Self {
        Self::new(32, 0, (DEFAULT_DESCRIPTOR_BITS / 2) as u32)
    }
}

impl MatchThreshold {
    pub fn new(value: u32, min_value: u32, max_value: u32) -> Self {
        Self {
            value: value.clamp(min_value, max_value),
            min_value,
            max_value,
            increment: 2,
            decrement: 1,
        }
    }
}

/// Scene features whose nearest template descriptor lies within `thr.value` bits.
///
/// Nearest-neighbour ties resolve to the lowest template index; the returned
/// features keep scene order.
pub fn hamming_match(
    template: &[Feature],
    scene: &[Feature],
    thr: &MatchThreshold,
) -> Result<Vec<Feature>, FeatureError> {
    Ok(match_indices(template, scene, thr)?
        .into_iter()
        .map(|(si, _, _)| scene[si].clone())
        .collect())
}

/// `(scene index, template index, distance)` for every accepted match.
pub fn match_indices(
    template: &[Feature],
    scene: &[Feature],
    thr: &MatchThreshold,
) -> Result<Vec<(usize, usize, u32)>, FeatureError> {
    let mut out = Vec::new();
    for (si, s) in scene.iter().enumerate() {
        let mut best: Option<(usize, u32)> = None;
        for (ti, t) in template.iter().enumerate() {
            let d = t.descriptor.hamming(&s.descriptor)?;
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((ti, d));
            }
        }
        if let Some((ti, d)) = best {
            if d <= thr.value {
                out.push((si, ti, d));
            }
        }
    }
    Ok(out)
}

/// +increment below three matches, -decrement above, clamped to the configured range.
pub fn adapt_threshold(thr: MatchThreshold, match_count: usize) -> MatchThreshold {
    let value = match match_count.cmp(&TARGET_MATCHES) {
        std::cmp::Ordering::Less => thr.value.saturating_add(thr.increment),
        std::cmp::Ordering::Greater => thr.value.saturating_sub(thr.decrement),
        std::cmp::Ordering::Equal => thr.value,
    };
    MatchThreshold {
        value: value.clamp(thr.min_value, thr.max_value),
        ..thr
    }
}

/// One twelfth of the hue circle on either side of the mean colour.
pub const FEATURE_HUE_HALF_WIDTH: f64 = 360.0 / 12.0;

/// Keeps matches whose underlying pixel hue is within 30 degrees of `mean_color`.
pub fn filter_by_color(matches: &[Feature], frame: &Frame, mean_color: &HsvColor) -> Vec<Feature> {
    matches
        .iter()
        .filter(|f| {
            let hsv = frame.hsv_at(f.x, f.y);
            hue_distance(hsv.hue, mean_color.hue) <= FEATURE_HUE_HALF_WIDTH
        })
        .cloned()
        .collect()
}

/// Circular mean hue of the pixels under `features`, with mean saturation and
/// value. `None` for an empty set or when the hues cancel out.
pub fn mean_feature_color(features: &[Feature], frame: &Frame) -> Option<HsvColor> {
    if features.is_empty() {
        return None;
    }
    let (mut s, mut c, mut sat, mut val) = (0.0, 0.0, 0.0, 0.0);
    for f in features {
        let hsv = frame.hsv_at(f.x, f.y);
        let rad = hsv.hue.to_radians();
        s += rad.sin();
        c += rad.cos();
        sat += hsv.saturation;
        val += hsv.value;
    }
    if s.hypot(c) < 1e-12 {
        return None;
    }
    let n = features.len() as f64;
    Some(HsvColor::new(s.atan2(c).to_degrees(), sat / n, val / n))
}

pub const COLLINEAR_AREA_EPS: f64 = 1e-9;

/// Weighted feature centroid; invalid below three points or when all points are collinear.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentroidEstimate {
    pub x: f64,
    pub y: f64,
    pub valid: bool,
}

fn triangle_area(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    0.5 * ((b.0 - a.0) * (c.1 - a.1) - (c.0 - a.0) * (b.1 - a.1)).abs()
}

/// Largest triangle spanned by the first point, the point farthest from it,
/// and any third point. Zero iff the set is collinear (or coincident).
pub fn max_anchor_triangle_area(points: &[(f64, f64)]) -> f64 {
    let Some(&anchor) = points.first() else {
        return 0.0;
    };
    let far = points.iter().copied().fold(anchor, |best, p| {
        let d = (p.0 - anchor.0).powi(2) + (p.1 - anchor.1).powi(2);
        let bd = (best.0 - anchor.0).powi(2) + (best.1 - anchor.1).powi(2);
        if d > bd {
            p
        } else {
            best
        }
    });
    points
        .iter()
        .map(|&p| triangle_area(anchor, far, p))
        .fold(0.0, f64::max)
}

pub fn weighted_centroid(matches: &[Feature]) -> CentroidEstimate {
    let total: f64 = matches.iter().map(|f| f.confidence).sum();
    if matches.is_empty() || total <= 0.0 {
        return CentroidEstimate {
            x: 0.0,
            y: 0.0,
            valid: false,
        };
    }
    let x = matches.iter().map(|f| f.confidence * f.x).sum::<f64>() / total;
    let y = matches.iter().map(|f| f.confidence * f.y).sum::<f64>() / total;
    let points: Vec<_> = matches.iter().map(|f| (f.x, f.y)).collect();
    let valid = matches.len() >= TARGET_MATCHES && max_anchor_triangle_area(&points) > COLLINEAR_AREA_EPS;
    CentroidEstimate { x, y, valid }
}

/// RMS distance of the features from a given centre.
pub fn rms_distance(features: &[Feature], cx: f64, cy: f64) -> f64 {
    if features.is_empty() {
        return 0.0;
    }
    let sum: f64 = features.iter().map(|f| (f.x - cx).powi(2) + (f.y - cy).powi(2)).sum();
    (sum / features.len() as f64).sqrt()
}

/// Ring of down-scaled occupancy grids, one per frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelBuffer {
    size: usize,
    capacity: usize,
    frame_width: usize,
    frame_height: usize,
    grids: VecDeque<Vec<u32>>,
    frame_count: u64,
}

impl KernelBuffer {
    pub const DEFAULT_SIZE: usize = 9;
    pub const DEFAULT_CAPACITY: usize = 10;

    pub fn new(size: usize, capacity: usize) -> Self {
        assert!(size > 0 && capacity > 0, "kernel size and capacity must be positive");
        Self {
            size,
            capacity,
            frame_width: 0,
            frame_height: 0,
            grids: VecDeque::with_capacity(capacity + 1),
            frame_count: 0,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.grids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grids.is_empty()
    }

    pub fn frame_count(&self) -> u64 {
        self.frame_count
    }

    /// Count at column `col`, row `row` of the `age`-th most recent grid (0 = newest).
    pub fn count(&self, age: usize, col: usize, row: usize) -> u32 {
        let idx = self.grids.len() - 1 - age;
        self.grids[idx][row * self.size + col]
    }

    pub fn grids(&self) -> impl DoubleEndedIterator<Item = &[u32]> {
        self.grids.iter().map(Vec::as_slice)
    }

    /// Appends a raw grid; used to build fixtures and by [`kernel_update`].
    pub fn push_grid(&mut self, grid: Vec<u32>, frame_width: usize, frame_height: usize) {
        assert_eq!(grid.len(), self.size * self.size, "grid must be size x size");
        self.frame_width = frame_width;
        self.frame_height = frame_height;
        self.grids.push_back(grid);
        while self.grids.len() > self.capacity {
            self.grids.pop_front();
        }
        self.frame_count += 1;
    }

    fn cell_of(&self, x: f64, y: f64, width: usize, height: usize) -> (usize, usize) {
        let k = self.size as f64;
        let col = ((x * k / width as f64).floor().max(0.0) as usize).min(self.size - 1);
        let row = ((y * k / height as f64).floor().max(0.0) as usize).min(self.size - 1);
        (col, row)
    }
}

impl Default for KernelBuffer {
    fn default() -> Self {
        Self::new(Self::DEFAULT_SIZE, Self::DEFAULT_CAPACITY)
    }
}

/// Appends the occupancy grid of `features` in a `width x height` frame.
pub fn kernel_update(mut buf: KernelBuffer, features: &[Feature], width: usize, height: usize) -> KernelBuffer {
    let mut grid = vec![0u32; buf.size * buf.size];
    for f in features {
        let (col, row) = buf.cell_of(f.x, f.y, width, height);
        grid[row * buf.size + col] += 1;
    }
    buf.push_grid(grid, width, height);
    buf
}

/// Temporal vote over the ring: a cell is active when it was occupied in more
/// than a quarter of the stored grids. Centroid and RMS radius are taken over
/// the centres of active cells, in pixel coordinates.
pub fn kernel_estimate(buf: &KernelBuffer) -> BlobObservation {
    if buf.is_empty() {
        return BlobObservation::invalid();
    }
    let votes_needed = buf.len() / 4;
    let cell_w = buf.frame_width as f64 / buf.size as f64;
    let cell_h = buf.frame_height as f64 / buf.size as f64;
    let mut centers = Vec::new();
    for row in 0..buf.size {
        for col in 0..buf.size {
            let occupied = buf.grids.iter().filter(|g| g[row * buf.size + col] > 0).count();
            if occupied > votes_needed {
                centers.push(((col as f64 + 0.5) * cell_w, (row as f64 + 0.5) * cell_h));
            }
        }
    }
    BlobObservation::from_points(&centers, 1)
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {}",
            self.x,
            self.y,
            self.confidence,
            self.descriptor.to_hex()
        )
    }
}

/// Parses the line-oriented `x y confidence hex-descriptor` format.
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_feature_set(text: &str) -> Result<Vec<Feature>, FeatureError> {
    let mut out: Vec<Feature> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| FeatureError::Parse { line: line_no, msg };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(err(format!("expected 4 fields, found {}", fields.len())));
        }
        let num = |s: &str, what: &str| f64::from_str(s).map_err(|_| err(format!("bad {what}: {s:?}")));
        let x = num(fields[0], "x")?;
        let y = num(fields[1], "y")?;
        let confidence = num(fields[2], "confidence")?;
        if !(confidence > 0.0 && confidence <= 1.0) {
            return Err(err(format!("confidence {confidence} outside (0, 1]")));
        }
        let descriptor = Descriptor::from_hex(fields[3]).map_err(|e| err(format!("bad descriptor: {e}")))?;
        if let Some(first) = out.first() {
            if first.descriptor.bits() != descriptor.bits() {
                return Err(FeatureError::DescriptorLengthMismatch {
                    expected: first.descriptor.bits(),
                    found: descriptor.bits(),
                });
            }
        }
        out.push(Feature::new(x, y, descriptor, confidence));
    }
    Ok(out)
}

pub fn format_feature_set(features: &[Feature]) -> String {
    features.iter().map(|f| format!("{f}\n")).collect()
}
