//! Biologically inspired 2D LiDAR SLAM.
//!
//! The engine fuses four parts, run once per scan by [`pipeline::Slam`]:
//!
//! - [`odometry`]: scan-to-local-map matching on a log-odds occupancy grid,
//!   producing egocentric pose increments.
//! - [`local_view`]: two-stage place recognition (range-sum hash, then a
//!   shift-tolerant template comparison) driving local view cell activity.
//! - [`pose_cells`]: a 3D continuous attractor network over (x, y, θ) that
//!   path-integrates odometry and is recalibrated by local view cells.
//! - [`experience_map`]: a topological graph of experiences with loop closure
//!   and iterative relaxation; its pose is the system output.
//!
//! [`sim`] provides a deterministic raycasting world for experiments and
//! [`io`] holds the plain-text log formats.

// `!(x > 0.0)` style checks deliberately reject NaN along with bad values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experience_map;
pub mod geometry;
pub mod io;
pub mod local_view;
pub mod odometry;
pub mod pipeline;
pub mod pose_cells;
pub mod sim;

pub use error::{Result, SlamError};
pub use geometry::{Pose, PoseDelta, Scan};
