//! Experience map: a topological graph of experiences joined by odometric
//! transitions, corrected by iterative relaxation after loop closures.
//!
//! Node poses and transition deltas are additive in map-frame components:
//! a transition `i → j` asserts `p_j ≈ p_i + Δ_ij`, the heading component
//! wrapped.

use serde::Deserialize;

use crate::error::{Result, SlamError};
use crate::geometry::{wrap_angle, Pose, PoseDelta};
use crate::pose_cells::Cell;

#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub id: usize,
    pub pc_coord: Cell,
    pub view_index: usize,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub from_id: usize,
    pub to_id: usize,
    pub delta: PoseDelta,
    /// Elapsed time between the two experiences (s). Stored, unused by relaxation.
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelaxOrder {
    /// Nodes updated one after another in id order, each seeing the
    /// corrections already applied to lower ids.
    Sequential,
    /// All corrections computed first, then applied together.
    Simultaneous,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelaxConfig {
    /// Correction factor.
    pub a: f64,
    /// Iterations per pipeline step without a loop closure.
    pub iterations_per_step: usize,
    /// Iterations on a step that closed a loop.
    pub loop_iterations: usize,
    /// Use `p_k - p_i - Δ_ki` for incoming edges instead of `p_k - p_i + Δ_ki`.
    /// The former does not vanish on a consistent graph.
    pub literal_incoming_sign: bool,
    /// Use `min(a, 1/deg)` as the factor of a node with `deg` incident edges.
    /// With a fixed `a` a node moves `a·deg` times its optimal step: the
    /// residual can grow once `a·deg > 2`, and simultaneous updates diverge
    /// on such graphs.
    pub degree_scaled: bool,
    pub order: RelaxOrder,
}

impl Default for RelaxConfig {
    fn default() -> Self {
        Self {
            a: 0.5,
            iterations_per_step: 1,
            loop_iterations: 20,
            literal_incoming_sign: false,
            degree_scaled: true,
            order: RelaxOrder::Sequential,
        }
    }
}

impl RelaxConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a <= 0.5) {
            return Err(SlamError::Config("relax.a must lie in (0, 0.5]".into()));
        }
        if self.iterations_per_step == 0 || self.loop_iterations == 0 {
            return Err(SlamError::Config(
                "relax iteration counts must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

fn residual(from: &Pose, to: &Pose, delta: &PoseDelta) -> PoseDelta {
    PoseDelta {
        dx: to.x - from.x - delta.dx,
        dy: to.y - from.y - delta.dy,
        dtheta: wrap_angle(to.theta - from.theta - delta.dtheta),
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExperienceMap {
    nodes: Vec<Experience>,
    edges: Vec<Transition>,
    out_edges: Vec<Vec<usize>>,
    in_edges: Vec<Vec<usize>>,
    current: usize,
    // motion since the last node event, in the frame of the current node
    since: Pose,
    since_dt: f64,
}

impl ExperienceMap {
    /// Map with node 0 at the origin.
    pub fn new(pc_coord: Cell, view_index: usize) -> Self {
        Self {
            nodes: vec![Experience {
                id: 0,
                pc_coord,
                view_index,
                pose: Pose::identity(),
            }],
            out_edges: vec![Vec::new()],
            in_edges: vec![Vec::new()],
            ..Self::default()
        }
    }

    pub fn nodes(&self) -> &[Experience] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Transition] {
        &self.edges
    }

    pub fn current_id(&self) -> usize {
        self.current
    }

    pub fn current(&self) -> &Experience {
        &self.nodes[self.current]
    }

    /// Robot-frame motion accumulated since the last node event.
    pub fn accumulate(&mut self, delta: &PoseDelta, dt: f64) {
        self.since = self.since.compose(delta);
        self.since_dt += dt;
    }

    /// Motion since the last node event as a relative pose in the current
    /// node's frame.
    pub fn since_last_event(&self) -> Pose {
        self.since
    }

    pub fn elapsed_since_event(&self) -> f64 {
        self.since_dt
    }

    /// Current node pose composed with the motion accumulated since.
    pub fn current_pose_estimate(&self) -> Pose {
        let s = self.since;
        self.current().pose.compose(&PoseDelta {
            dx: s.x,
            dy: s.y,
            dtheta: s.theta,
        })
    }

    /// Map-frame delta from the current node to the current estimate.
    pub fn pending_delta(&self) -> PoseDelta {
        self.current_pose_estimate().sub(&self.current().pose)
    }

    fn check(&self, id: usize) -> Result<()> {
        if id < self.nodes.len() {
            Ok(())
        } else {
            Err(SlamError::UnknownExperience(id))
        }
    }

    fn push_edge(&mut self, from_id: usize, to_id: usize, delta: PoseDelta, dt: f64) {
        let k = self.edges.len();
        self.edges.push(Transition {
            from_id,
            to_id,
            delta,
            dt,
        });
        self.out_edges[from_id].push(k);
        self.in_edges[to_id].push(k);
    }

    /// Adds node `p_current + delta` with an edge from the current node and
    /// makes it current.
    pub fn create_experience(
        &mut self,
        pc_coord: Cell,
        view_index: usize,
        delta: PoseDelta,
        dt: f64,
    ) -> Result<usize> {
        if !delta.is_finite() || !dt.is_finite() || dt < 0.0 {
            return Err(SlamError::NonFinite("experience transition"));
        }
        let id = self.nodes.len();
        let pose = self.current().pose.add(&delta);
        self.nodes.push(Experience {
            id,
            pc_coord,
            view_index,
            pose,
        });
        self.out_edges.push(Vec::new());
        self.in_edges.push(Vec::new());
        self.push_edge(self.current, id, delta, dt);
        self.current = id;
        self.since = Pose::identity();
        self.since_dt = 0.0;
        Ok(id)
    }

    /// Adds an edge from the current node to `matched` and makes it current.
    pub fn close_loop(&mut self, matched: usize, delta: PoseDelta, dt: f64) -> Result<()> {
        self.close_loop_turned(matched, delta, dt, 0.0)
    }

    /// Loop closure for a robot standing at `matched` but turned `offset`
    /// radians from its heading. The edge gets `delta.dtheta - offset` and
    /// the estimate keeps the offset.
    pub fn close_loop_turned(
        &mut self,
        matched: usize,
        delta: PoseDelta,
        dt: f64,
        offset: f64,
    ) -> Result<()> {
        self.check(matched)?;
        if matched == self.current {
            return Err(SlamError::SelfLoop(matched));
        }
        if !delta.is_finite() || !dt.is_finite() || dt < 0.0 || !offset.is_finite() {
            return Err(SlamError::NonFinite("loop closure transition"));
        }
        let delta = PoseDelta {
            dtheta: wrap_angle(delta.dtheta - offset),
            ..delta
        };
        self.push_edge(self.current, matched, delta, dt);
        self.current = matched;
        self.since = Pose::new(0.0, 0.0, offset);
        self.since_dt = 0.0;
        Ok(())
    }

    /// Whether an edge joins `a` and `b` in either direction.
    pub fn connected(&self, a: usize, b: usize) -> bool {
        self.out_edges[a].iter().any(|&k| self.edges[k].to_id == b)
            || self.out_edges[b].iter().any(|&k| self.edges[k].to_id == a)
    }

    /// Makes `id` current without adding an edge, for a robot standing at
    /// it turned `offset` radians. Odometry since the last event is dropped.
    pub fn relocate(&mut self, id: usize, offset: f64) -> Result<()> {
        self.check(id)?;
        if !offset.is_finite() {
            return Err(SlamError::NonFinite("relocation offset"));
        }
        self.current = id;
        self.since = Pose::new(0.0, 0.0, offset);
        self.since_dt = 0.0;
        Ok(())
    }

    /// Lowest-id experience other than the current one that satisfies `accept`.
    pub fn find(&self, mut accept: impl FnMut(&Experience) -> bool) -> Option<usize> {
        self.nodes
            .iter()
            .find(|e| e.id != self.current && accept(e))
            .map(|e| e.id)
    }

    pub fn edge_residual(&self, edge: &Transition) -> PoseDelta {
        residual(
            &self.nodes[edge.from_id].pose,
            &self.nodes[edge.to_id].pose,
            &edge.delta,
        )
    }

    /// Sum over edges of the squared residual norm (translation and heading).
    pub fn squared_residual(&self) -> f64 {
        self.edges
            .iter()
            .map(|e| {
                let r = self.edge_residual(e);
                r.dx * r.dx + r.dy * r.dy + r.dtheta * r.dtheta
            })
            .sum()
    }

    fn correction(&self, i: usize, cfg: &RelaxConfig) -> PoseDelta {
        let p = &self.nodes[i].pose;
        let (mut x, mut y, mut t) = (0.0, 0.0, 0.0);
        for &k in &self.out_edges[i] {
            let e = &self.edges[k];
            let r = residual(p, &self.nodes[e.to_id].pose, &e.delta);
            x += r.dx;
            y += r.dy;
            t += r.dtheta;
        }
        for &k in &self.in_edges[i] {
            let e = &self.edges[k];
            let q = &self.nodes[e.from_id].pose;
            let s = if cfg.literal_incoming_sign { -1.0 } else { 1.0 };
            x += q.x - p.x + s * e.delta.dx;
            y += q.y - p.y + s * e.delta.dy;
            t += wrap_angle(q.theta - p.theta + s * e.delta.dtheta);
        }
        let deg = self.out_edges[i].len() + self.in_edges[i].len();
        let a = if cfg.degree_scaled && deg > 0 {
            cfg.a.min(1.0 / deg as f64)
        } else {
            cfg.a
        };
        PoseDelta {
            dx: a * x,
            dy: a * y,
            dtheta: a * t,
        }
    }

    /// Per-node corrections of one iteration, all evaluated on the current poses.
    pub fn corrections(&self, cfg: &RelaxConfig) -> Vec<PoseDelta> {
        (0..self.nodes.len())
            .map(|i| self.correction(i, cfg))
            .collect()
    }

    pub fn relax(&mut self, cfg: &RelaxConfig, iterations: usize) {
        for _ in 0..iterations {
            match cfg.order {
                RelaxOrder::Simultaneous => {
                    let c = self.corrections(cfg);
                    for (n, d) in self.nodes.iter_mut().zip(&c) {
                        n.pose = n.pose.add(d);
                    }
                }
                RelaxOrder::Sequential => {
                    for i in 0..self.nodes.len() {
                        let d = self.correction(i, cfg);
                        self.nodes[i].pose = self.nodes[i].pose.add(&d);
                    }
                }
            }
        }
    }

    /// Every edge endpoint exists and every node is reachable from node 0
    /// ignoring edge direction.
    pub fn is_consistent(&self) -> bool {
        let n = self.nodes.len();
        if self.current >= n
            || self
                .edges
                .iter()
                .any(|e| e.from_id >= n || e.to_id >= n || e.from_id == e.to_id)
        {
            return false;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            let next = self.out_edges[i]
                .iter()
                .map(|&k| self.edges[k].to_id)
                .chain(self.in_edges[i].iter().map(|&k| self.edges[k].from_id));
            for j in next.collect::<Vec<_>>() {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}
