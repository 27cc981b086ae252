//! Run configuration, read from a TOML file with one table (or dotted key
//! prefix) per module, e.g. `pose_cells.k_v = 0.1`. Missing keys take their
//! defaults and unknown keys are rejected.

use std::f64::consts::TAU;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Result, SlamError};
use crate::experience_map::RelaxConfig;
use crate::local_view::LocalViewConfig;
use crate::odometry::OdometryConfig;
use crate::pose_cells::PoseCellConfig;
use crate::sim::LidarModel;

/// When the pipeline creates experiences and closes loops.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperienceConfig {
    /// Travel since the last node event that forces a new node (m).
    pub min_travel: f64,
    /// Rotation since the last node event that forces a new node (rad).
    pub min_turn: f64,
    /// Largest wrapped pose-cell distance at which an experience matches, in cells.
    pub pc_match_radius: usize,
    /// Experiences younger than this (s) are not loop-closure targets.
    pub loop_min_age: f64,
    /// Views younger than this (s) do not inject into the pose cells.
    pub inject_min_age: f64,
}

impl Default for ExperienceConfig {
    fn default() -> Self {
        Self {
            min_travel: 0.5,
            min_turn: 20f64.to_radians(),
            pc_match_radius: 2,
            loop_min_age: 10.0,
            inject_min_age: 10.0,
        }
    }
}

impl ExperienceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_travel > 0.0 && self.min_turn > 0.0) {
            return Err(SlamError::Config(
                "experience.min_travel and min_turn must be positive".into(),
            ));
        }
        if !(self.loop_min_age >= 0.0 && self.loop_min_age.is_finite()) {
            return Err(SlamError::Config(
                "experience.loop_min_age must be >= 0".into(),
            ));
        }
        if !(self.inject_min_age >= 0.0 && self.inject_min_age.is_finite()) {
            return Err(SlamError::Config(
                "experience.inject_min_age must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlamConfig {
    pub seed: u64,
    pub odometry: OdometryConfig,
    pub local_view: LocalViewConfig,
    pub pose_cells: PoseCellConfig,
    pub relax: RelaxConfig,
    pub experience: ExperienceConfig,
    /// Sensor model used by the simulator.
    pub lidar: LidarModel,
}

impl SlamConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SlamConfig =
            toml::from_str(text).map_err(|e| SlamError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SlamError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            SlamError::Config(msg) => SlamError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Per-module checks plus the cross-module ones.
    pub fn validate(&self) -> Result<()> {
        self.odometry.validate()?;
        self.local_view.validate()?;
        self.pose_cells.validate()?;
        self.relax.validate()?;
        self.experience.validate()?;
        self.lidar.validate()?;
        if self.local_view.wrap && (self.lidar.fov - TAU).abs() > 1e-9 {
            return Err(SlamError::Config(
                "local_view.wrap needs a full-turn lidar.fov; set local_view.wrap = false for partial scans".into(),
            ));
        }
        if self.local_view.template_size > self.lidar.beam_count {
            return Err(SlamError::Config(
                "local_view.template_size exceeds lidar.beam_count".into(),
            ));
        }
        Ok(())
    }
}
