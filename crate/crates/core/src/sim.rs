//! Deterministic 2D world simulator: wall segments, a raycasting LiDAR and
//! scripted waypoint trajectories with ground truth.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;

use crate::error::{Result, SlamError};
use crate::geometry::{angle_diff, Pose, Scan};

/// Wall segment between two endpoints, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub a: (f64, f64),
    pub b: (f64, f64),
}

impl Segment {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self {
            a: (x1, y1),
            b: (x2, y2),
        }
    }

    pub fn length(&self) -> f64 {
        (self.b.0 - self.a.0).hypot(self.b.1 - self.a.1)
    }

    fn is_finite(&self) -> bool {
        self.a.0.is_finite() && self.a.1.is_finite() && self.b.0.is_finite() && self.b.1.is_finite()
    }

    /// Ray parameter of the intersection of `origin + t * dir` with this segment.
    #[inline]
    fn ray_hit(&self, origin: (f64, f64), dir: (f64, f64)) -> Option<f64> {
        let s = (self.b.0 - self.a.0, self.b.1 - self.a.1);
        let denom = cross(dir, s);
        if denom.abs() < 1e-15 {
            return None;
        }
        let ao = (self.a.0 - origin.0, self.a.1 - origin.1);
        let t = cross(ao, s) / denom;
        let u = cross(ao, dir) / denom;
        (t > 1e-12 && (0.0..=1.0).contains(&u)).then_some(t)
    }
}

#[inline]
fn cross(a: (f64, f64), b: (f64, f64)) -> f64 {
    a.0 * b.1 - a.1 * b.0
}

/// Axis-aligned extent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min: (f64, f64),
    pub max: (f64, f64),
}

impl Bounds {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min.0 && x <= self.max.0 && y >= self.min.1 && y <= self.max.1
    }

    pub fn width(&self) -> f64 {
        self.max.0 - self.min.0
    }

    pub fn height(&self) -> f64 {
        self.max.1 - self.min.1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    segments: Vec<Segment>,
    bounds: Bounds,
}

impl World {
    /// World whose bounds are the bounding box of its segments.
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(SlamError::InvalidWorld("no segments".into()));
        }
        validate_segments(&segments)?;
        let mut min = (f64::INFINITY, f64::INFINITY);
        let mut max = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for s in &segments {
            for p in [s.a, s.b] {
                min = (min.0.min(p.0), min.1.min(p.1));
                max = (max.0.max(p.0), max.1.max(p.1));
            }
        }
        Ok(Self {
            segments,
            bounds: Bounds { min, max },
        })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    /// Distance to the nearest wall along a ray, if any.
    pub fn cast(&self, origin: (f64, f64), angle: f64) -> Option<f64> {
        let dir = (angle.cos(), angle.sin());
        self.segments
            .iter()
            .filter_map(|s| s.ray_hit(origin, dir))
            .min_by(f64::total_cmp)
    }
}

fn validate_segments(segments: &[Segment]) -> Result<()> {
    for (i, s) in segments.iter().enumerate() {
        if !s.is_finite() {
            return Err(SlamError::InvalidWorld(format!(
                "segment {i} has non-finite coordinates"
            )));
        }
        if s.length() < 1e-9 {
            return Err(SlamError::InvalidWorld(format!(
                "segment {i} has zero length"
            )));
        }
    }
    Ok(())
}

/// Maze description: an optional rectangular enclosure `[0, w] × [0, h]`
/// plus interior walls.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MazeLayout {
    pub extent: Option<(f64, f64)>,
    pub walls: Vec<Segment>,
}

impl MazeLayout {
    pub fn room(width: f64, height: f64) -> Self {
        Self {
            extent: Some((width, height)),
            walls: Vec::new(),
        }
    }

    pub fn with_wall(mut self, wall: Segment) -> Self {
        self.walls.push(wall);
        self
    }

    /// Axis-aligned box obstacle as four walls.
    pub fn with_box(mut self, x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        self.walls.extend([
            Segment::new(x0, y0, x1, y0),
            Segment::new(x1, y0, x1, y1),
            Segment::new(x1, y1, x0, y1),
            Segment::new(x0, y1, x0, y0),
        ]);
        self
    }
}

pub fn build_maze_world(layout: &MazeLayout) -> Result<World> {
    let mut segments = Vec::with_capacity(layout.walls.len() + 4);
    if let Some((w, h)) = layout.extent {
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            return Err(SlamError::InvalidWorld(format!(
                "degenerate extent {w} x {h}"
            )));
        }
        segments.extend([
            Segment::new(0.0, 0.0, w, 0.0),
            Segment::new(w, 0.0, w, h),
            Segment::new(w, h, 0.0, h),
            Segment::new(0.0, h, 0.0, 0.0),
        ]);
    }
    validate_segments(&layout.walls)?;
    segments.extend(layout.walls.iter().copied());
    World::new(segments)
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LidarModel {
    pub beam_count: usize,
    pub fov: f64,
    pub range_max: f64,
    pub range_noise_sigma: f64,
    pub angle_min: f64,
}

impl Default for LidarModel {
    fn default() -> Self {
        Self {
            beam_count: 360,
            fov: 2.0 * PI,
            range_max: 10.0,
            range_noise_sigma: 0.01,
            angle_min: -PI,
        }
    }
}

impl LidarModel {
    pub fn validate(&self) -> Result<()> {
        if self.beam_count < 2 {
            return Err(SlamError::InvalidLidar("beam_count must be >= 2".into()));
        }
        if !(self.fov > 0.0 && self.fov <= 2.0 * PI + 1e-12) {
            return Err(SlamError::InvalidLidar(format!(
                "fov {} outside (0, 2π]",
                self.fov
            )));
        }
        if !(self.range_max > 0.0 && self.range_max.is_finite()) {
            return Err(SlamError::InvalidLidar("range_max must be positive".into()));
        }
        if !(self.range_noise_sigma >= 0.0 && self.range_noise_sigma.is_finite()) {
            return Err(SlamError::InvalidLidar(
                "range_noise_sigma must be >= 0".into(),
            ));
        }
        if !self.angle_min.is_finite() {
            return Err(SlamError::InvalidLidar("angle_min must be finite".into()));
        }
        Ok(())
    }

    /// Beams span `[angle_min, angle_min + fov)`.
    pub fn angle_increment(&self) -> f64 {
        self.fov / self.beam_count as f64
    }
}

/// Simulated scan from `pose`, noise drawn from a generator seeded with `rng_seed`.
pub fn raycast(world: &World, pose: &Pose, model: &LidarModel, rng_seed: u64) -> Result<Scan> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    raycast_with(world, pose, model, 0.0, &mut rng)
}

fn raycast_with(
    world: &World,
    pose: &Pose,
    model: &LidarModel,
    t: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Scan> {
    model.validate()?;
    if !world.bounds.contains(pose.x, pose.y) {
        return Err(SlamError::OutOfBounds {
            x: pose.x,
            y: pose.y,
        });
    }
    let noise = (model.range_noise_sigma > 0.0)
        .then(|| Normal::new(0.0, model.range_noise_sigma).expect("sigma validated"));
    let inc = model.angle_increment();
    let ranges = (0..model.beam_count)
        .map(|i| {
            let a = pose.theta + model.angle_min + i as f64 * inc;
            let hit = world
                .cast((pose.x, pose.y), a)
                .filter(|d| *d <= model.range_max)?;
            let r = match &noise {
                Some(n) => hit + n.sample(rng),
                None => hit,
            };
            Some(r.clamp(1e-6, model.range_max))
        })
        .collect();
    Scan::new(ranges, model.angle_min, inc, model.range_max, t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub pose: Pose,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryScript {
    pub waypoints: Vec<Waypoint>,
    pub scan_rate: f64,
}

impl TrajectoryScript {
    pub fn new(waypoints: Vec<Waypoint>, scan_rate: f64) -> Result<Self> {
        let s = Self {
            waypoints,
            scan_rate,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.waypoints.is_empty() {
            return Err(SlamError::InvalidTrajectory("no waypoints".into()));
        }
        if !(self.scan_rate > 0.0 && self.scan_rate.is_finite()) {
            return Err(SlamError::InvalidTrajectory(
                "scan_rate must be positive".into(),
            ));
        }
        if let Some(w) = self
            .waypoints
            .iter()
            .find(|w| !w.pose.is_finite() || !w.t.is_finite())
        {
            return Err(SlamError::InvalidTrajectory(format!(
                "non-finite waypoint at t={}",
                w.t
            )));
        }
        if let Some(w) = self.waypoints.windows(2).find(|w| w[1].t <= w[0].t) {
            return Err(SlamError::InvalidTrajectory(format!(
                "arrival times not strictly increasing ({} then {})",
                w[0].t, w[1].t
            )));
        }
        Ok(())
    }

    /// Drives a polyline at constant `speed`, turning in place at `turn_rate`
    /// to face each leg before driving it.
    pub fn from_route(
        points: &[(f64, f64)],
        initial_heading: f64,
        speed: f64,
        turn_rate: f64,
        scan_rate: f64,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(SlamError::InvalidTrajectory("empty route".into()));
        }
        if !(speed > 0.0 && turn_rate > 0.0) {
            return Err(SlamError::InvalidTrajectory(
                "speed and turn rate must be positive".into(),
            ));
        }
        let mut t = 0.0;
        let mut pose = Pose::new(points[0].0, points[0].1, initial_heading);
        let mut waypoints = vec![Waypoint { pose, t }];
        for &(x, y) in &points[1..] {
            let (dx, dy) = (x - pose.x, y - pose.y);
            let len = dx.hypot(dy);
            if len < 1e-9 {
                continue;
            }
            let heading = dy.atan2(dx);
            let turn = angle_diff(heading, pose.theta).abs();
            if turn > 1e-9 {
                t += turn / turn_rate;
                pose = Pose::new(pose.x, pose.y, heading);
                waypoints.push(Waypoint { pose, t });
            }
            t += len / speed;
            pose = Pose::new(x, y, heading);
            waypoints.push(Waypoint { pose, t });
        }
        Self::new(waypoints, scan_rate)
    }

    pub fn start_time(&self) -> f64 {
        self.waypoints[0].t
    }

    pub fn end_time(&self) -> f64 {
        self.waypoints[self.waypoints.len() - 1].t
    }

    /// Number of frames emitted, both interval endpoints included.
    pub fn frame_count(&self) -> usize {
        ((self.end_time() - self.start_time()) * self.scan_rate + 1e-9).floor() as usize + 1
    }

    pub fn frame_time(&self, k: usize) -> f64 {
        self.start_time() + k as f64 / self.scan_rate
    }

    /// Interpolated pose: linear in position, shortest arc in heading.
    /// Times outside the script clamp to the end waypoints.
    pub fn pose_at(&self, t: f64) -> Pose {
        let w = &self.waypoints;
        if t <= w[0].t {
            return w[0].pose;
        }
        let k = w.partition_point(|p| p.t <= t);
        if k >= w.len() {
            return w[w.len() - 1].pose;
        }
        let (a, b) = (&w[k - 1], &w[k]);
        let f = (t - a.t) / (b.t - a.t);
        Pose::new(
            a.pose.x + f * (b.pose.x - a.pose.x),
            a.pose.y + f * (b.pose.y - a.pose.y),
            a.pose.theta + f * angle_diff(b.pose.theta, a.pose.theta),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimFrame {
    pub scan: Scan,
    pub truth_pose: Pose,
    pub t: f64,
}

/// Lazily produced frames of a scripted run. Frame `k` draws its noise from
/// stream `k` of a generator seeded with the run seed, so frames are
/// reproducible independently of iteration order.
pub struct FrameIter<'a> {
    world: &'a World,
    model: LidarModel,
    script: &'a TrajectoryScript,
    rng_seed: u64,
    next: usize,
    count: usize,
}

impl Iterator for FrameIter<'_> {
    type Item = Result<SimFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.count {
            return None;
        }
        let k = self.next;
        self.next += 1;
        let t = self.script.frame_time(k);
        let pose = self.script.pose_at(t);
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        rng.set_stream(k as u64);
        Some(
            raycast_with(self.world, &pose, &self.model, t, &mut rng)
                .map(|scan| SimFrame {
                    scan,
                    truth_pose: pose,
                    t,
                })
                .map_err(|e| match e {
                    SlamError::OutOfBounds { x, y } => SlamError::TrajectoryOutOfBounds { t, x, y },
                    other => other,
                }),
        )
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.count - self.next;
        (n, Some(n))
    }
}

/// Streaming form of [`run_trajectory`]. Bounds are checked up front so an
/// invalid script fails before any frame is produced.
pub fn frames<'a>(
    world: &'a World,
    model: &LidarModel,
    script: &'a TrajectoryScript,
    rng_seed: u64,
) -> Result<FrameIter<'a>> {
    model.validate()?;
    script.validate()?;
    let count = script.frame_count();
    let b = world.bounds();
    for k in 0..count {
        let t = script.frame_time(k);
        let p = script.pose_at(t);
        if !b.contains(p.x, p.y) {
            return Err(SlamError::TrajectoryOutOfBounds { t, x: p.x, y: p.y });
        }
    }
    Ok(FrameIter {
        world,
        model: *model,
        script,
        rng_seed,
        next: 0,
        count,
    })
}

pub fn run_trajectory(
    world: &World,
    model: &LidarModel,
    script: &TrajectoryScript,
    rng_seed: u64,
) -> Result<Vec<SimFrame>> {
    frames(world, model, script, rng_seed)?.collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn noiseless(beams: usize, angle_min: f64, fov: f64, range_max: f64) -> LidarModel {
        LidarModel {
            beam_count: beams,
            fov,
            range_max,
            range_noise_sigma: 0.0,
            angle_min,
        }
    }

    fn square_room() -> World {
        build_maze_world(&MazeLayout::room(4.0, 4.0)).unwrap()
    }

    #[test]
    fn perpendicular_wall() {
        let world = World::new(vec![
            Segment::new(2.0, -5.0, 2.0, 5.0),
            Segment::new(-1.0, -5.0, -1.0, 5.0),
        ])
        .unwrap();
        // two beams: 0 and π
        let scan = raycast(
            &world,
            &Pose::new(0.0, 0.0, 0.0),
            &noiseless(2, 0.0, 2.0 * PI, 10.0),
            0,
        )
        .unwrap();
        assert!((scan.ranges()[0].unwrap() - 2.0).abs() < 1e-12);
        assert!((scan.ranges()[1].unwrap() - 1.0).abs() < 1e-12);

        let short = raycast(
            &world,
            &Pose::new(0.0, 0.0, 0.0),
            &noiseless(2, 0.0, 2.0 * PI, 1.5),
            0,
        )
        .unwrap();
        assert_eq!(short.ranges()[0], None);
        assert!((short.ranges()[1].unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn room_centre_cardinal_beams() {
        let scan = raycast(
            &square_room(),
            &Pose::new(2.0, 2.0, 0.0),
            &noiseless(4, 0.0, 2.0 * PI, 10.0),
            7,
        )
        .unwrap();
        for r in scan.ranges() {
            assert!((r.unwrap() - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn raycast_rejects_outside_pose() {
        let err = raycast(
            &square_room(),
            &Pose::new(5.0, 2.0, 0.0),
            &LidarModel::default(),
            0,
        );
        assert!(matches!(err, Err(SlamError::OutOfBounds { .. })));
    }

    #[test]
    fn noise_is_seeded() {
        let model = LidarModel {
            range_noise_sigma: 0.05,
            ..LidarModel::default()
        };
        let p = Pose::new(1.3, 2.1, 0.4);
        let a = raycast(&square_room(), &p, &model, 11).unwrap();
        let b = raycast(&square_room(), &p, &model, 11).unwrap();
        let c = raycast(&square_room(), &p, &model, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a
            .ranges()
            .iter()
            .flatten()
            .all(|r| *r > 0.0 && *r <= model.range_max));
    }

    #[test]
    fn maze_builder() {
        let w = build_maze_world(&MazeLayout::room(16.8, 12.6)).unwrap();
        assert_eq!(w.segments().len(), 4);
        assert_eq!(w.bounds().min, (0.0, 0.0));
        assert_eq!(w.bounds().max, (16.8, 12.6));

        assert!(build_maze_world(&MazeLayout::default()).is_err());

        let w = build_maze_world(
            &MazeLayout::room(16.8, 12.6).with_wall(Segment::new(4.0, 0.0, 4.0, 6.0)),
        )
        .unwrap();
        assert_eq!(w.segments().len(), 5);

        let zero = MazeLayout::room(5.0, 5.0).with_wall(Segment::new(1.0, 1.0, 1.0, 1.0));
        assert!(build_maze_world(&zero).is_err());
    }

    #[test]
    fn stationary_script_frames() {
        let p = Pose::new(2.0, 2.0, 0.3);
        let model = LidarModel {
            beam_count: 8,
            ..LidarModel::default()
        };
        let single = TrajectoryScript::new(vec![Waypoint { pose: p, t: 0.0 }], 1.0).unwrap();
        assert_eq!(
            run_trajectory(&square_room(), &model, &single, 0)
                .unwrap()
                .len(),
            1
        );

        let hold = TrajectoryScript::new(
            vec![Waypoint { pose: p, t: 0.0 }, Waypoint { pose: p, t: 1.0 }],
            1.0,
        )
        .unwrap();
        let frames = run_trajectory(&square_room(), &model, &hold, 0).unwrap();
        assert_eq!(frames.len(), 2);
        assert!(frames.iter().all(|f| f.truth_pose == p));
    }

    #[test]
    fn linear_script_frames() {
        let world = build_maze_world(&MazeLayout::room(14.0, 4.0)).unwrap();
        let s = TrajectoryScript::new(
            vec![
                Waypoint {
                    pose: Pose::new(1.0, 2.0, 0.0),
                    t: 0.0,
                },
                Waypoint {
                    pose: Pose::new(11.0, 2.0, 0.0),
                    t: 10.0,
                },
            ],
            1.0,
        )
        .unwrap();
        let frames = run_trajectory(&world, &LidarModel::default(), &s, 3).unwrap();
        assert_eq!(frames.len(), 11);
        for (k, f) in frames.iter().enumerate() {
            assert!((f.truth_pose.x - (1.0 + k as f64)).abs() < 1e-12);
            assert_eq!(f.scan.timestamp, f.t);
        }
    }

    #[test]
    fn heading_takes_shortest_arc() {
        let s = TrajectoryScript::new(
            vec![
                Waypoint {
                    pose: Pose::new(0.0, 0.0, 3.0),
                    t: 0.0,
                },
                Waypoint {
                    pose: Pose::new(0.0, 0.0, -3.0),
                    t: 1.0,
                },
            ],
            100.0,
        )
        .unwrap();
        // the short way is 2π - 6 ≈ 0.283 rad through ±π; cos stays near -1
        for k in 0..=100 {
            let th = s.pose_at(k as f64 / 100.0).theta;
            assert!(th.cos() < -0.98, "theta {th} left the short arc");
        }
    }

    #[test]
    fn script_leaving_bounds_reports_time() {
        let s = TrajectoryScript::new(
            vec![
                Waypoint {
                    pose: Pose::new(2.0, 2.0, 0.0),
                    t: 0.0,
                },
                Waypoint {
                    pose: Pose::new(6.0, 2.0, 0.0),
                    t: 4.0,
                },
            ],
            1.0,
        )
        .unwrap();
        match run_trajectory(&square_room(), &LidarModel::default(), &s, 0) {
            Err(SlamError::TrajectoryOutOfBounds { t, .. }) => assert_eq!(t, 3.0),
            other => panic!("expected out-of-bounds, got {other:?}"),
        }
    }

    #[test]
    fn script_validation() {
        let p = Pose::identity();
        assert!(TrajectoryScript::new(vec![], 1.0).is_err());
        assert!(TrajectoryScript::new(vec![Waypoint { pose: p, t: 0.0 }], 0.0).is_err());
        assert!(TrajectoryScript::new(
            vec![Waypoint { pose: p, t: 1.0 }, Waypoint { pose: p, t: 1.0 }],
            1.0
        )
        .is_err());
    }

    #[test]
    fn route_turns_then_drives() {
        let s = TrajectoryScript::from_route(
            &[(1.0, 1.0), (3.0, 1.0), (3.0, 3.0)],
            0.0,
            0.5,
            PI / 2.0,
            10.0,
        )
        .unwrap();
        // drive 4 s, turn 1 s, drive 4 s
        assert_eq!(s.waypoints.len(), 4);
        assert!((s.end_time() - 9.0).abs() < 1e-12);
        let mid_turn = s.pose_at(4.5);
        assert!((mid_turn.theta - PI / 4.0).abs() < 1e-12);
    }

    /// Brute-force oracle: intersect the beam with every segment by solving the
    /// 2x2 system `o + t d = a + u (b - a)` with nalgebra.
    fn oracle_range(world: &World, origin: (f64, f64), angle: f64) -> Option<f64> {
        use nalgebra::{Matrix2, Vector2};
        let d = Vector2::new(angle.cos(), angle.sin());
        let mut best: Option<f64> = None;
        for s in world.segments() {
            let m = Matrix2::new(d.x, s.a.0 - s.b.0, d.y, s.a.1 - s.b.1);
            let rhs = Vector2::new(s.a.0 - origin.0, s.a.1 - origin.1);
            if m.determinant().abs() < 1e-14 {
                continue;
            }
            let sol = m.lu().solve(&rhs).unwrap();
            if sol.x > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&sol.y) {
                best = Some(best.map_or(sol.x, |b| b.min(sol.x)));
            }
        }
        best
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn noiseless_ranges_match_oracle(x in 0.5f64..9.5, y in 0.5f64..6.5, th in -PI..PI) {
            let world = build_maze_world(
                &MazeLayout::room(10.0, 7.0)
                    .with_box(3.0, 3.0, 4.0, 4.5)
                    .with_wall(Segment::new(6.0, 1.0, 8.5, 2.5)),
            ).unwrap();
            let p = Pose::new(x, y, th);
            prop_assume!(world.bounds().contains(x, y));
            let model = noiseless(90, -PI, 2.0 * PI, 30.0);
            let scan = raycast(&world, &p, &model, 0).unwrap();
            for (i, r) in scan.ranges().iter().enumerate() {
                let want = oracle_range(&world, (x, y), th + scan.angle(i));
                match (r, want) {
                    (Some(r), Some(w)) => prop_assert!((r - w).abs() < 1e-9, "beam {} {} vs {}", i, r, w),
                    (None, None) => {}
                    (r, w) => prop_assert!(false, "beam {} mismatch {:?} vs {:?}", i, r, w),
                }
            }
        }

        #[test]
        fn truth_lies_on_interpolated_path(rate in 1.0f64..20.0) {
            let s = TrajectoryScript::from_route(
                &[(1.0, 1.0), (3.0, 1.0), (3.0, 3.0), (1.0, 3.0)], 0.0, 0.4, 1.0, rate,
            ).unwrap();
            let frames = run_trajectory(&square_room(), &LidarModel { beam_count: 4, ..LidarModel::default() }, &s, 1).unwrap();
            for f in &frames {
                // every leg is axis aligned on x ∈ {1,3} or y ∈ {1,3}
                let on_x = (f.truth_pose.x - 1.0).abs() < 1e-9 || (f.truth_pose.x - 3.0).abs() < 1e-9;
                let on_y = (f.truth_pose.y - 1.0).abs() < 1e-9 || (f.truth_pose.y - 3.0).abs() < 1e-9;
                prop_assert!(on_x || on_y);
            }
        }
    }

    #[test]
    fn runs_are_bitwise_deterministic() {
        let s = TrajectoryScript::from_route(
            &[(1.0, 1.0), (3.0, 1.0), (3.0, 3.0)],
            0.0,
            0.4,
            1.0,
            10.0,
        )
        .unwrap();
        let a = run_trajectory(&square_room(), &LidarModel::default(), &s, 99).unwrap();
        let b = run_trajectory(&square_room(), &LidarModel::default(), &s, 99).unwrap();
        assert_eq!(a.len(), b.len());
        for (fa, fb) in a.iter().zip(&b) {
            let bits = |f: &SimFrame| {
                f.scan
                    .ranges()
                    .iter()
                    .map(|r| r.map(f64::to_bits))
                    .collect::<Vec<_>>()
            };
            assert_eq!(bits(fa), bits(fb));
        }
    }
}
