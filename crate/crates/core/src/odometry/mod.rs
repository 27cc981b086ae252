//! LiDAR odometry by scan-to-local-map matching.
//!
//! Incoming scans are aligned against a log-odds occupancy grid that
//! accumulates previous scans, then integrated at the aligned pose. The pose
//! is kept in the local-map frame (start pose = origin); increments handed to
//! the rest of the system are egocentric (forward, lateral, rotation).
//!
//! The grid can be kept at several resolutions (each level doubling the cell
//! size). Matching then runs coarse to fine, which widens the basin of
//! convergence without changing the finest-level objective.

mod grid;
pub mod matcher;

use serde::Deserialize;

pub use grid::{interpolate, logistic, ContinuousMapView, LocalMap};
use matcher::{align, GaussNewtonParams};

use crate::error::{Result, SlamError};
use crate::geometry::{scan_to_points, Pose, PoseDelta, Scan};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdometryConfig {
    /// Finest cell size, meters.
    pub resolution: f64,
    pub max_iterations: usize,
    /// Convergence threshold on the update norm.
    pub epsilon: f64,
    pub hit: f64,
    pub miss: f64,
    pub l_min: f64,
    pub l_max: f64,
    /// Side length of the square local map, meters, centred on the start pose.
    pub map_size: f64,
    /// Number of map resolutions; 1 disables the coarse-to-fine pyramid.
    pub levels: usize,
    /// Normal matrices with a larger condition number are treated as degenerate.
    pub max_condition: f64,
}

impl Default for OdometryConfig {
    fn default() -> Self {
        Self {
            resolution: 0.05,
            max_iterations: 20,
            epsilon: 1e-5,
            hit: 0.9,
            miss: -0.4,
            l_min: -4.0,
            l_max: 4.0,
            map_size: 40.0,
            levels: 3,
            max_condition: 40.0,
        }
    }
}

impl OdometryConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SlamError::Config(format!("odometry.{m}")));
        if !(self.resolution > 0.0) {
            return bad("resolution must be positive");
        }
        if self.max_iterations < 1 {
            return bad("max_iterations must be >= 1");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if !(self.hit > 0.0 && self.miss < 0.0) {
            return bad("hit must be positive and miss negative");
        }
        if !(self.l_min < 0.0 && self.l_max > 0.0) {
            return bad("l_min must be negative and l_max positive");
        }
        if !(self.map_size > 2.0 * self.resolution) {
            return bad("map_size too small");
        }
        if self.levels < 1
            || self.map_size / (self.resolution * (1u64 << (self.levels - 1)) as f64) < 4.0
        {
            return bad("levels must be >= 1 and leave at least 4 coarse cells");
        }
        if !(self.max_condition > 1.0) {
            return bad("max_condition must exceed 1");
        }
        Ok(())
    }

    fn gn_params(&self) -> GaussNewtonParams {
        GaussNewtonParams {
            max_iterations: self.max_iterations,
            epsilon: self.epsilon,
            max_condition: self.max_condition,
            max_halvings: 6,
        }
    }
}

/// Outcome of aligning one scan against the local map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchResult {
    /// Map-frame change `p' - p` of the robot pose.
    pub delta: PoseDelta,
    pub low_confidence: bool,
    /// Summed occupancy of the endpoints at the returned pose (finest level).
    pub score: f64,
    pub iterations: usize,
}

/// Egocentric increment produced by one odometry step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometryStep {
    pub delta: PoseDelta,
    pub low_confidence: bool,
}

#[derive(Debug, Clone)]
pub struct OdometryState {
    pose: Pose,
    /// Finest level first.
    maps: Vec<LocalMap>,
    config: OdometryConfig,
    scans_integrated: usize,
}

impl OdometryState {
    pub fn new(config: OdometryConfig) -> Result<Self> {
        config.validate()?;
        let half = config.map_size / 2.0;
        let maps = (0..config.levels)
            .map(|l| {
                let res = config.resolution * (1u64 << l) as f64;
                let size = (config.map_size / res).round() as usize;
                LocalMap::new(res, (-half, -half), size, config.l_min, config.l_max)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            pose: Pose::identity(),
            maps,
            config,
            scans_integrated: 0,
        })
    }

    /// Current pose estimate in the local-map frame.
    pub fn pose(&self) -> Pose {
        self.pose
    }

    /// Finest-resolution map.
    pub fn map(&self) -> &LocalMap {
        &self.maps[0]
    }

    pub fn levels(&self) -> &[LocalMap] {
        &self.maps
    }

    pub fn config(&self) -> &OdometryConfig {
        &self.config
    }

    pub fn scans_integrated(&self) -> usize {
        self.scans_integrated
    }

    /// Aligns `scan` starting from the current pose.
    pub fn match_scan(&self, scan: &Scan) -> Result<MatchResult> {
        self.match_scan_from(scan, self.pose)
    }

    /// Aligns `scan` starting from an explicit initial guess; the returned
    /// delta is still relative to the current pose.
    pub fn match_scan_from(&self, scan: &Scan, initial: Pose) -> Result<MatchResult> {
        if self.scans_integrated == 0 {
            return Err(SlamError::InvalidScan(
                "local map has no integrated scans to match against".into(),
            ));
        }
        let points = scan_to_points(scan)?;
        let params = self.config.gn_params();
        let mut estimate = initial;
        let mut last = None;
        for map in self.maps.iter().rev() {
            let a = align(map, &points, estimate, &params);
            estimate = a.pose;
            last = Some(a);
        }
        let fine = last.expect("at least one level");
        if fine.degenerate {
            return Ok(MatchResult {
                delta: PoseDelta::zero(),
                low_confidence: true,
                score: fine.score,
                iterations: fine.iterations,
            });
        }
        Ok(MatchResult {
            delta: estimate.sub(&self.pose),
            low_confidence: false,
            score: fine.score,
            iterations: fine.iterations,
        })
    }

    /// Integrates `scan` at `pose` into every level.
    pub fn integrate_scan(&mut self, scan: &Scan, pose: &Pose) {
        for map in &mut self.maps {
            map.integrate_scan(scan, pose, self.config.hit, self.config.miss);
        }
        self.scans_integrated += 1;
    }

    /// One odometry update. The first scan only seeds the map.
    pub fn step(&mut self, scan: &Scan) -> Result<OdometryStep> {
        if self.scans_integrated == 0 {
            let p = self.pose;
            self.integrate_scan(scan, &p);
            return Ok(OdometryStep {
                delta: PoseDelta::zero(),
                low_confidence: false,
            });
        }
        let m = self.match_scan(scan)?;
        let next = self.pose.add(&m.delta);
        // keep a margin so endpoints near the robot stay on the map
        let margin = 1.0;
        let map = self.map();
        let (ox, oy) = map.origin();
        let e = map.extent();
        if next.x < ox + margin
            || next.y < oy + margin
            || next.x > ox + e - margin
            || next.y > oy + e - margin
        {
            return Err(SlamError::LeftLocalMap {
                x: next.x,
                y: next.y,
            });
        }
        let delta = self.pose.delta_to(&next);
        self.integrate_scan(scan, &next);
        self.pose = next;
        Ok(OdometryStep {
            delta,
            low_confidence: m.low_confidence,
        })
    }
}
