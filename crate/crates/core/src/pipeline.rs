//! Per-scan update loop: odometry, local view cells, pose cells, then the
//! experience map, whose pose is the system estimate.

use crate::config::SlamConfig;
use crate::error::{Result, SlamError};
use crate::experience_map::ExperienceMap;
use crate::geometry::{Pose, PoseDelta, Scan};
use crate::io::{ReportRecord, Summary, ViewRecord};
use crate::local_view::{LocalViewCells, ViewOutcome};
use crate::odometry::OdometryState;
use crate::pose_cells::{Cell, DecodedPose, PoseCellNetwork, ViewToPoseLinks};

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub step: usize,
    pub t: f64,
    /// Robot-frame odometry increment.
    pub odom_delta: PoseDelta,
    pub low_confidence: bool,
    pub active_view: usize,
    pub is_new_view: bool,
    /// Lowest template difference among coarse candidates.
    pub best_similarity: Option<f64>,
    pub decoded_pose: DecodedPose,
    pub map_pose_estimate: Pose,
    pub current_experience: usize,
    pub node_count: usize,
    pub edge_count: usize,
    pub loop_closed: bool,
}

impl StepReport {
    pub fn view_record(&self) -> ViewRecord {
        ViewRecord {
            t: self.t,
            active_index: self.active_view,
            is_new: self.is_new_view,
            s_best: self.best_similarity.unwrap_or(f64::NAN),
        }
    }

    /// Report-log record; `truth` is expressed in the estimate's frame.
    pub fn record(&self, truth: Option<&Pose>) -> ReportRecord {
        let (ex, ey) = match truth {
            Some(p) => (
                self.map_pose_estimate.x - p.x,
                self.map_pose_estimate.y - p.y,
            ),
            None => (f64::NAN, f64::NAN),
        };
        ReportRecord {
            t: self.t,
            err_x: ex,
            err_y: ey,
            err: ex.hypot(ey),
            node_count: self.node_count,
            edge_count: self.edge_count,
            loop_closed: self.loop_closed,
            active_view: self.active_view,
        }
    }
}

pub struct Slam {
    cfg: SlamConfig,
    odometry: OdometryState,
    views: LocalViewCells,
    cells: PoseCellNetwork,
    links: ViewToPoseLinks,
    map: Option<ExperienceMap>,
    // creation time of each experience
    born: Vec<f64>,
    // learning time of each view
    view_born: Vec<f64>,
    masked: Vec<f64>,
    last_t: Option<f64>,
    steps: usize,
}

impl Slam {
    pub fn new(cfg: SlamConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            odometry: OdometryState::new(cfg.odometry.clone())?,
            cells: PoseCellNetwork::new(cfg.pose_cells.clone())?,
            views: LocalViewCells::new(),
            links: ViewToPoseLinks::new(),
            map: None,
            born: Vec::new(),
            view_born: Vec::new(),
            masked: Vec::new(),
            last_t: None,
            steps: 0,
            cfg,
        })
    }

    pub fn config(&self) -> &SlamConfig {
        &self.cfg
    }

    pub fn odometry(&self) -> &OdometryState {
        &self.odometry
    }

    pub fn local_views(&self) -> &LocalViewCells {
        &self.views
    }

    pub fn pose_cells(&self) -> &PoseCellNetwork {
        &self.cells
    }

    /// `None` before the first step.
    pub fn experience_map(&self) -> Option<&ExperienceMap> {
        self.map.as_ref()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Processes one scan. Errors carry the step index.
    pub fn step(&mut self, scan: &Scan) -> Result<StepReport> {
        let k = self.steps;
        let r = self.step_inner(scan).map_err(|e| SlamError::Step {
            step: k,
            source: Box::new(e),
        })?;
        self.steps += 1;
        Ok(r)
    }

    fn step_inner(&mut self, scan: &Scan) -> Result<StepReport> {
        let t = scan.timestamp;
        let dt = self.last_t.map_or(0.0, |l| (t - l).max(0.0));
        let odo = self.odometry.step(scan)?;
        let view = self.views.process(scan, &self.cfg.local_view);

        // the network moves in its own frame: rotate by its heading at mid-motion
        let heading = self.cells.decode().pose.theta + 0.5 * odo.delta.dtheta;
        self.cells.path_integrate(&odo.delta.rotated(heading))?;
        if view.is_new {
            self.view_born.push(t);
            self.cells.learn_link(view.active_index, &mut self.links)?;
            self.cells.inject_view(&[], &self.links);
        } else {
            // a view just learned would drag the packet back to where it was learned
            let min_age = self.cfg.experience.inject_min_age;
            self.masked.clear();
            self.masked.extend(
                self.views
                    .activity()
                    .iter()
                    .zip(&self.view_born)
                    .map(|(&v, &b)| if t - b >= min_age { v } else { 0.0 }),
            );
            self.cells.inject_view(&self.masked, &self.links);
        }
        self.cells.attractor_step();
        let decoded = self.cells.decode();
        let cell = self.cells.argmax();

        let loop_closed = match self.map.as_mut() {
            None => {
                self.map = Some(ExperienceMap::new(cell, view.active_index));
                self.born.push(t);
                false
            }
            Some(map) => {
                map.accumulate(&odo.delta, dt);
                // heading of this scan relative to the matched view
                let turn = view.shift as f64 * scan.len() as f64 * scan.angle_increment
                    / self.cfg.local_view.template_size as f64;
                update_map(
                    map,
                    &mut self.born,
                    &self.cells,
                    &self.cfg,
                    cell,
                    &view,
                    self.views.activity(),
                    turn,
                    t,
                )?
            }
        };
        self.last_t = Some(t);

        let map = self.map.as_ref().expect("map exists after the first step");
        Ok(StepReport {
            step: self.steps,
            t,
            odom_delta: odo.delta,
            low_confidence: odo.low_confidence,
            active_view: view.active_index,
            is_new_view: view.is_new,
            best_similarity: view.best_similarity,
            decoded_pose: decoded,
            map_pose_estimate: map.current_pose_estimate(),
            current_experience: map.current_id(),
            node_count: map.nodes().len(),
            edge_count: map.edges().len(),
            loop_closed,
        })
    }
}

/// Experience bookkeeping for one step. Returns whether a loop was closed.
#[allow(clippy::too_many_arguments)]
fn update_map(
    map: &mut ExperienceMap,
    born: &mut Vec<f64>,
    cells: &PoseCellNetwork,
    cfg: &SlamConfig,
    cell: Cell,
    outcome: &ViewOutcome,
    activity: &[f64],
    turn: f64,
    t: f64,
) -> Result<bool> {
    let (view, is_new) = (outcome.active_index, outcome.is_new);
    let ec = &cfg.experience;
    let near = |c: Cell| cells.cell_distance(c, cell) <= ec.pc_match_radius;
    let cur = map.current();
    // stay while the current experience's view still matches at all, so that
    // the best match flickering between neighbours does not close loops
    let at_current =
        (cur.view_index == view || activity[cur.view_index] > 0.0) && near(cur.pc_coord);

    let mut closed = false;
    let mut relocated = false;
    if !is_new && !at_current {
        let target = map.find(|e| {
            e.view_index == view && near(e.pc_coord) && t - born[e.id] >= ec.loop_min_age
        });
        if let Some(id) = target {
            if map.connected(map.current_id(), id) {
                // already linked: a new edge would only repeat the old one
                map.relocate(id, turn)?;
                relocated = true;
            } else {
                let dt = map.elapsed_since_event();
                map.close_loop_turned(id, map.pending_delta(), dt, turn)?;
                closed = true;
            }
        }
    }
    if !closed && !relocated && !at_current {
        let moved = map.since_last_event();
        let travelled = moved.x.hypot(moved.y) > ec.min_travel || moved.theta.abs() > ec.min_turn;
        if is_new || travelled {
            let dt = map.elapsed_since_event();
            map.create_experience(cell, view, map.pending_delta(), dt)?;
            born.push(t);
        }
    }
    let iterations = if closed {
        cfg.relax.loop_iterations
    } else {
        cfg.relax.iterations_per_step
    };
    map.relax(&cfg.relax, iterations);
    Ok(closed)
}

/// Per-step translational errors and the run summary.
#[derive(Debug, Clone, Default)]
pub struct ErrorStats {
    errors: Vec<f64>,
}

impl ErrorStats {
    pub fn push(&mut self, err: f64) {
        self.errors.push(err);
    }

    pub fn errors(&self) -> &[f64] {
        &self.errors
    }

    pub fn mean(&self) -> f64 {
        if self.errors.is_empty() {
            return f64::NAN;
        }
        self.errors.iter().sum::<f64>() / self.errors.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.errors
            .iter()
            .copied()
            .reduce(f64::min)
            .unwrap_or(f64::NAN)
    }

    pub fn max(&self) -> f64 {
        self.errors
            .iter()
            .copied()
            .reduce(f64::max)
            .unwrap_or(f64::NAN)
    }

    pub fn rmse(&self) -> f64 {
        if self.errors.is_empty() {
            return f64::NAN;
        }
        (self.errors.iter().map(|e| e * e).sum::<f64>() / self.errors.len() as f64).sqrt()
    }
}

/// One input to [`run`]: a scan, optionally with the true pose.
#[derive(Debug, Clone)]
pub struct Frame {
    pub scan: Scan,
    pub truth: Option<Pose>,
}

impl From<crate::sim::SimFrame> for Frame {
    fn from(f: crate::sim::SimFrame) -> Self {
        Frame {
            scan: f.scan,
            truth: Some(f.truth_pose),
        }
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub reports: Vec<StepReport>,
    pub records: Vec<ReportRecord>,
    pub summary: Summary,
    pub stats: ErrorStats,
}

/// Drives frames through a pipeline. Ground truth is re-expressed in the
/// frame of the first truth pose, where the estimate starts at the origin.
pub struct Runner {
    pub slam: Slam,
    origin: Option<Pose>,
    pub stats: ErrorStats,
    has_truth: bool,
}

impl Runner {
    pub fn new(cfg: SlamConfig) -> Result<Self> {
        Ok(Self {
            slam: Slam::new(cfg)?,
            origin: None,
            stats: ErrorStats::default(),
            has_truth: false,
        })
    }

    pub fn push(&mut self, frame: &Frame) -> Result<(StepReport, ReportRecord)> {
        let report = self.slam.step(&frame.scan)?;
        let truth = frame.truth.map(|p| {
            let o = *self.origin.get_or_insert(p);
            let d = o.delta_to(&p);
            Pose {
                x: d.dx,
                y: d.dy,
                theta: d.dtheta,
            }
        });
        let rec = report.record(truth.as_ref());
        if truth.is_some() {
            self.has_truth = true;
            self.stats.push(rec.err);
        }
        Ok((report, rec))
    }

    pub fn summary(&self) -> Summary {
        let map = self.slam.experience_map();
        let (mean, min, max, rmse) = if self.has_truth {
            (
                self.stats.mean(),
                self.stats.min(),
                self.stats.max(),
                self.stats.rmse(),
            )
        } else {
            (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
        };
        Summary {
            mean_err: mean,
            min_err: min,
            max_err: max,
            rmse,
            n_steps: self.slam.steps(),
            n_nodes: map.map_or(0, |m| m.nodes().len()),
            n_edges: map.map_or(0, |m| m.edges().len()),
            n_views: self.slam.local_views().len(),
        }
    }
}

/// Runs a whole sequence. Fails on empty input.
pub fn run<I, F>(frames: I, cfg: SlamConfig) -> Result<RunOutput>
where
    I: IntoIterator<Item = Result<F>>,
    F: Into<Frame>,
{
    let mut runner = Runner::new(cfg)?;
    let mut reports = Vec::new();
    let mut records = Vec::new();
    for f in frames {
        let (rep, rec) = runner.push(&f?.into())?;
        reports.push(rep);
        records.push(rec);
    }
    if reports.is_empty() {
        return Err(SlamError::InvalidScan("no frames to process".into()));
    }
    Ok(RunOutput {
        summary: runner.summary(),
        stats: runner.stats.clone(),
        reports,
        records,
    })
}
