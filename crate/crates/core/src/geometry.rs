//! Planar pose algebra, scan-to-point conversion and angle bookkeeping.
//!
//! Angles are radians everywhere and headings live in the half-open
//! interval `[-π, π)`.

use std::f64::consts::PI;
use std::fmt;

use crate::error::SlamError;

const TAU: f64 = 2.0 * PI;

/// Wraps an angle into `[-π, π)`.
///
/// Non-finite input is rejected.
pub fn normalize_angle(a: f64) -> Result<f64, SlamError> {
    if !a.is_finite() {
        return Err(SlamError::NonFinite("angle"));
    }
    Ok(wrap_angle(a))
}

/// Infallible variant of [`normalize_angle`] for values already known to be finite.
#[inline]
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

/// Signed shortest difference `a - b`, wrapped.
#[inline]
pub fn angle_diff(a: f64, b: f64) -> f64 {
    wrap_angle(a - b)
}

/// Planar pose (x, y, θ) in meters and radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    /// Builds a pose, wrapping the heading.
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub const fn identity() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    /// Maps a sensor-frame point into the frame this pose is expressed in.
    #[inline]
    pub fn transform_point(&self, e: (f64, f64)) -> (f64, f64) {
        transform_point(self, e)
    }

    /// Applies a robot-frame increment.
    pub fn compose(&self, d: &PoseDelta) -> Pose {
        compose(self, d)
    }

    /// Robot-frame increment that takes `self` to `other`; inverse of [`Pose::compose`].
    pub fn delta_to(&self, other: &Pose) -> PoseDelta {
        let (s, c) = self.theta.sin_cos();
        let gx = other.x - self.x;
        let gy = other.y - self.y;
        PoseDelta::new(
            c * gx + s * gy,
            -s * gx + c * gy,
            angle_diff(other.theta, self.theta),
        )
    }

    /// Component-wise world-frame difference `self - other` with the heading wrapped.
    pub fn sub(&self, other: &Pose) -> PoseDelta {
        PoseDelta::new(
            self.x - other.x,
            self.y - other.y,
            angle_diff(self.theta, other.theta),
        )
    }

    /// Component-wise world-frame sum `self + d` with the heading wrapped.
    pub fn add(&self, d: &PoseDelta) -> Pose {
        Pose::new(self.x + d.dx, self.y + d.dy, self.theta + d.dtheta)
    }

    pub fn distance(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl fmt::Display for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.4}, {:.4}, {:.4})", self.x, self.y, self.theta)
    }
}

/// Pose increment (Δx, Δy, Δθ).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PoseDelta {
    pub dx: f64,
    pub dy: f64,
    pub dtheta: f64,
}

impl PoseDelta {
    pub fn new(dx: f64, dy: f64, dtheta: f64) -> Self {
        Self {
            dx,
            dy,
            dtheta: wrap_angle(dtheta),
        }
    }

    pub const fn zero() -> Self {
        Self {
            dx: 0.0,
            dy: 0.0,
            dtheta: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.dx.is_finite() && self.dy.is_finite() && self.dtheta.is_finite()
    }

    pub fn translation_norm(&self) -> f64 {
        self.dx.hypot(self.dy)
    }

    pub fn scale(&self, k: f64) -> PoseDelta {
        PoseDelta::new(self.dx * k, self.dy * k, self.dtheta * k)
    }

    /// Rotates the translational part by `angle`, leaving Δθ untouched.
    pub fn rotated(&self, angle: f64) -> PoseDelta {
        let (s, c) = angle.sin_cos();
        PoseDelta {
            dx: c * self.dx - s * self.dy,
            dy: s * self.dx + c * self.dy,
            dtheta: self.dtheta,
        }
    }
}

/// `R_p · e + T_p`.
#[inline]
pub fn transform_point(p: &Pose, e: (f64, f64)) -> (f64, f64) {
    let (s, c) = p.theta.sin_cos();
    (c * e.0 - s * e.1 + p.x, s * e.0 + c * e.1 + p.y)
}

/// Applies a robot-frame increment: translation rotated by the current heading,
/// then the heading advanced by Δθ and re-wrapped.
pub fn compose(p: &Pose, d: &PoseDelta) -> Pose {
    let (x, y) = transform_point(p, (d.dx, d.dy));
    Pose::new(x, y, p.theta + d.dtheta)
}

/// One LiDAR revolution. Beam `i` points at `angle_min + i * angle_increment`.
///
/// No-return beams are stored as `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scan {
    ranges: Vec<Option<f64>>,
    pub angle_min: f64,
    pub angle_increment: f64,
    pub range_max: f64,
    pub timestamp: f64,
}

impl Scan {
    pub fn new(
        ranges: Vec<Option<f64>>,
        angle_min: f64,
        angle_increment: f64,
        range_max: f64,
        timestamp: f64,
    ) -> Result<Self, SlamError> {
        if ranges.len() < 2 {
            return Err(SlamError::InvalidScan(format!(
                "need at least 2 beams, got {}",
                ranges.len()
            )));
        }
        if !(angle_increment > 0.0) || !angle_increment.is_finite() {
            return Err(SlamError::InvalidScan(format!(
                "angle increment must be positive, got {angle_increment}"
            )));
        }
        if !(range_max > 0.0) || !range_max.is_finite() {
            return Err(SlamError::InvalidScan(format!(
                "range_max must be positive, got {range_max}"
            )));
        }
        if !angle_min.is_finite() || !timestamp.is_finite() {
            return Err(SlamError::InvalidScan("non-finite header field".into()));
        }
        if let Some((i, r)) = ranges
            .iter()
            .enumerate()
            .find_map(|(i, r)| r.filter(|r| !(*r > 0.0 && *r <= range_max)).map(|r| (i, r)))
        {
            return Err(SlamError::InvalidScan(format!(
                "beam {i} has range {r} outside (0, {range_max}]"
            )));
        }
        Ok(Self {
            ranges,
            angle_min,
            angle_increment,
            range_max,
            timestamp,
        })
    }

    pub fn ranges(&self) -> &[Option<f64>] {
        &self.ranges
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn angle(&self, i: usize) -> f64 {
        self.angle_min + i as f64 * self.angle_increment
    }

    /// Angular span covered by the beams, `N · angle_increment`.
    pub fn fov(&self) -> f64 {
        self.ranges.len() as f64 * self.angle_increment
    }

    pub fn valid_count(&self) -> usize {
        self.ranges.iter().filter(|r| r.is_some()).count()
    }

    /// Ranges with no-return beams replaced by `fill`.
    pub fn filled_ranges(&self, fill: f64) -> Vec<f64> {
        self.ranges.iter().map(|r| r.unwrap_or(fill)).collect()
    }

    /// Iterator over `(angle, range)` of valid beams.
    pub fn valid_beams(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.ranges
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.map(|r| (self.angle(i), r)))
    }
}

/// Sensor-frame Cartesian endpoints of the valid beams of a scan.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointSet {
    pub points: Vec<(f64, f64)>,
}

impl PointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, (f64, f64)> {
        self.points.iter()
    }
}

/// Polar to Cartesian conversion of every valid beam; invalid beams are skipped.
pub fn scan_to_points(scan: &Scan) -> Result<PointSet, SlamError> {
    let points: Vec<_> = scan
        .valid_beams()
        .map(|(a, d)| {
            let (s, c) = a.sin_cos();
            (d * c, d * s)
        })
        .collect();
    if points.is_empty() {
        return Err(SlamError::InvalidScan("scan has no valid beams".into()));
    }
    Ok(PointSet { points })
}
