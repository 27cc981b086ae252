//! Pose cells: a 3D continuous attractor network over `(x', y', θ')`.
//!
//! Activity lives on a torus of `n_x × n_y × n_θ` cells. Each step the packet
//! is shifted by odometry (path integration), optionally recalibrated by
//! local view cells, then relaxed by local excitation and inhibition plus a
//! uniform global inhibition, and renormalized to unit mass.

use std::f64::consts::TAU;

use serde::Deserialize;

use crate::error::{Result, SlamError};
use crate::geometry::{wrap_angle, Pose, PoseDelta};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoseCellConfig {
    pub n_x: usize,
    pub n_y: usize,
    pub n_theta: usize,
    /// Meters per cell in x and y.
    pub cell_size_xy: f64,
    /// Radians per cell in θ.
    pub cell_size_theta: f64,
    /// Excitation kernel width, in cells. The kernel is truncated at 3σ.
    pub excite_sigma: f64,
    pub inhibit_sigma: f64,
    pub global_inhibition: f64,
    /// Calibration rate of view injection.
    pub k_v: f64,
    /// Consecutive matched steps required before injection takes effect.
    pub consec_threshold: usize,
    /// Half width of the decoding window, in cells.
    pub decode_radius: usize,
}

impl Default for PoseCellConfig {
    fn default() -> Self {
        Self {
            n_x: 40,
            n_y: 40,
            n_theta: 36,
            cell_size_xy: 0.25,
            cell_size_theta: 10f64.to_radians(),
            excite_sigma: 1.0,
            inhibit_sigma: 2.0,
            global_inhibition: 0.00002,
            k_v: 0.1,
            consec_threshold: 3,
            decode_radius: 4,
        }
    }
}

impl PoseCellConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SlamError::Config(format!("pose_cells: {m}")));
        if self.n_x < 5 || self.n_y < 5 || self.n_theta < 5 {
            return bad("every axis needs at least 5 cells");
        }
        if !(self.cell_size_xy > 0.0 && self.cell_size_xy.is_finite()) {
            return bad("cell_size_xy must be positive");
        }
        if !(self.cell_size_theta > 0.0)
            || (self.n_theta as f64 * self.cell_size_theta - TAU).abs() > 1e-6
        {
            return bad("n_theta * cell_size_theta must cover one turn");
        }
        if !(self.excite_sigma > 0.0 && self.inhibit_sigma > 0.0) {
            return bad("kernel sigmas must be positive");
        }
        if !(self.global_inhibition >= 0.0 && self.global_inhibition.is_finite()) {
            return bad("global_inhibition must be >= 0");
        }
        if !(self.k_v >= 0.0 && self.k_v.is_finite()) {
            return bad("k_v must be >= 0");
        }
        Ok(())
    }

    /// Cells per meter.
    pub fn k_xy(&self) -> f64 {
        1.0 / self.cell_size_xy
    }

    /// Cells per radian.
    pub fn k_theta(&self) -> f64 {
        1.0 / self.cell_size_theta
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.n_x, self.n_y, self.n_theta]
    }
}

/// Normalized 1D Gaussian over offsets `-r..=r`, `r = ceil(3σ)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as i64;
    let raw: Vec<f64> = (-r..=r)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

pub type Cell = [usize; 3];

/// Links from learned views to the pose cell captured when each was learned.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ViewToPoseLinks {
    links: Vec<Option<Cell>>,
}

impl ViewToPoseLinks {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, view: usize) -> Option<Cell> {
        self.links.get(view).copied().flatten()
    }

    pub fn len(&self) -> usize {
        self.links.iter().flatten().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert(&mut self, view: usize, cell: Cell) -> Result<()> {
        if self.get(view).is_some() {
            return Err(SlamError::AlreadyLinked(view));
        }
        if self.links.len() <= view {
            self.links.resize(view + 1, None);
        }
        self.links[view] = Some(cell);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodedPose {
    pub pose: Pose,
    /// Fractional cell coordinates of the packet centre.
    pub cell: [f64; 3],
    /// Share of the total activity inside the decoding window.
    pub packet_mass: f64,
}

#[derive(Debug, Clone)]
pub struct PoseCellNetwork {
    cfg: PoseCellConfig,
    activity: Vec<f64>,
    excite: Vec<f64>,
    inhibit: Vec<f64>,
    consecutive: usize,
    scratch: Vec<f64>,
}

impl PoseCellNetwork {
    /// Unit activity in the centre cell, which decodes to the origin.
    pub fn new(cfg: PoseCellConfig) -> Result<Self> {
        cfg.validate()?;
        let [nx, ny, nt] = cfg.dims();
        let mut net = Self {
            excite: gaussian_kernel(cfg.excite_sigma),
            inhibit: gaussian_kernel(cfg.inhibit_sigma),
            activity: vec![0.0; nx * ny * nt],
            scratch: vec![0.0; nx * ny * nt],
            consecutive: 0,
            cfg,
        };
        net.set_single([nx / 2, ny / 2, nt / 2]);
        Ok(net)
    }

    pub fn config(&self) -> &PoseCellConfig {
        &self.cfg
    }

    pub fn dims(&self) -> [usize; 3] {
        self.cfg.dims()
    }

    pub fn activity(&self) -> &[f64] {
        &self.activity
    }

    pub fn index(&self, c: Cell) -> usize {
        (c[2] * self.cfg.n_y + c[1]) * self.cfg.n_x + c[0]
    }

    pub fn cell_of(&self, idx: usize) -> Cell {
        let nx = self.cfg.n_x;
        let ny = self.cfg.n_y;
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    pub fn get(&self, c: Cell) -> f64 {
        self.activity[self.index(c)]
    }

    pub fn total(&self) -> f64 {
        self.activity.iter().sum()
    }

    /// Replaces the activity. Values must be finite and non-negative with a
    /// positive total.
    pub fn set_activity(&mut self, activity: Vec<f64>) -> Result<()> {
        if activity.len() != self.activity.len() {
            return Err(SlamError::Config(
                "activity length does not match the grid".into(),
            ));
        }
        if activity.iter().any(|v| !(v.is_finite() && *v >= 0.0))
            || !(activity.iter().sum::<f64>() > 0.0)
        {
            return Err(SlamError::NonFinite("pose cell activity"));
        }
        self.activity = activity;
        Ok(())
    }

    pub fn set_single(&mut self, c: Cell) {
        self.activity.iter_mut().for_each(|v| *v = 0.0);
        let k = self.index(c);
        self.activity[k] = 1.0;
    }

    /// Most active cell; ties go to the lowest index.
    pub fn argmax(&self) -> Cell {
        let mut best = 0;
        for (k, &v) in self.activity.iter().enumerate() {
            if v > self.activity[best] {
                best = k;
            }
        }
        self.cell_of(best)
    }

    /// Consecutive matched steps seen by [`inject_view`](Self::inject_view).
    pub fn consecutive_matches(&self) -> usize {
        self.consecutive
    }

    // Wrap-around 1D convolution of `src` along `axis` into `dst`. Lines
    // that are entirely zero stay zero, which keeps a compact packet cheap.
    fn convolve_axis(&self, src: &[f64], dst: &mut [f64], kernel: &[f64], axis: usize) {
        let dims = self.dims();
        let n = dims[axis];
        let stride = [1, dims[0], dims[0] * dims[1]][axis];
        let r = kernel.len() / 2;
        let mut line = vec![0.0; n];
        let bases = (0..src.len() / (n * stride))
            .flat_map(|o| (0..stride).map(move |i| o * n * stride + i));
        for base in bases {
            let mut any = false;
            for (p, v) in line.iter_mut().enumerate() {
                *v = src[base + p * stride];
                any |= *v != 0.0;
            }
            for p in 0..n {
                let mut acc = 0.0;
                if any {
                    for (t, w) in kernel.iter().enumerate() {
                        acc += w * line[(p + n * (r / n + 1) + t - r) % n];
                    }
                }
                dst[base + p * stride] = acc;
            }
        }
    }

    fn convolve(&mut self, kernel: &[f64]) -> Vec<f64> {
        let mut a = self.activity.clone();
        let mut b = std::mem::take(&mut self.scratch);
        for axis in 0..3 {
            self.convolve_axis(&a, &mut b, kernel, axis);
            std::mem::swap(&mut a, &mut b);
        }
        self.scratch = b;
        a
    }

    /// `PC ← max(0, PC + E∗PC − I∗PC − g)`, then normalized to unit mass. If
    /// everything is clamped away the previous maximum cell is re-seeded.
    pub fn attractor_step(&mut self) {
        let peak = self.argmax();
        let ex = self.convolve(&self.excite.clone());
        let inh = self.convolve(&self.inhibit.clone());
        let g = self.cfg.global_inhibition;
        for ((v, e), i) in self.activity.iter_mut().zip(&ex).zip(&inh) {
            *v = (*v + e - i - g).max(0.0);
        }
        let total = self.total();
        if total > 0.0 && total.is_finite() {
            self.activity.iter_mut().for_each(|v| *v /= total);
        } else {
            self.set_single(peak);
        }
    }

    /// Shifts the activity by `(k_xy Δx, k_xy Δy, k_θ Δθ)` cells, with `delta`
    /// expressed in the network's frame. Integer parts roll the torus; the
    /// fractional part `f` of each axis keeps `1 - f` of a cell's mass on the
    /// rolled cell and moves `f` one further.
    pub fn path_integrate(&mut self, delta: &PoseDelta) -> Result<()> {
        if !delta.is_finite() {
            return Err(SlamError::NonFinite("path integration delta"));
        }
        let shifts = [
            delta.dx * self.cfg.k_xy(),
            delta.dy * self.cfg.k_xy(),
            delta.dtheta * self.cfg.k_theta(),
        ];
        let dims = self.dims();
        for (axis, s) in shifts.into_iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            let n = dims[axis] as i64;
            let whole = s.floor();
            let f = s - whole;
            let whole = whole as i64;
            let stride = [1, dims[0], dims[0] * dims[1]][axis];
            let mut out = std::mem::take(&mut self.scratch);
            for (k, o) in out.iter_mut().enumerate() {
                let pos = ((k / stride) % dims[axis]) as i64;
                let base = k as i64 - pos * stride as i64;
                let at = |p: i64| self.activity[(base + p.rem_euclid(n) * stride as i64) as usize];
                *o = if f == 0.0 {
                    at(pos - whole)
                } else {
                    (1.0 - f) * at(pos - whole) + f * at(pos - whole - 1)
                };
            }
            self.scratch = std::mem::replace(&mut self.activity, out);
        }
        Ok(())
    }

    /// Adds `k_V · V_i` at the cell linked to each view `i`. A step with any
    /// positive `V_i` counts as matched, anything else resets the count, and
    /// nothing is injected until `consec_threshold` matched steps in a row
    /// have been seen. Returns whether activity was injected.
    pub fn inject_view(&mut self, views: &[f64], links: &ViewToPoseLinks) -> bool {
        let matched = views
            .iter()
            .enumerate()
            .any(|(i, &v)| v > 0.0 && links.get(i).is_some());
        if !matched {
            self.consecutive = 0;
            return false;
        }
        self.consecutive += 1;
        if self.consecutive < self.cfg.consec_threshold || self.cfg.k_v == 0.0 {
            return false;
        }
        for (i, &v) in views.iter().enumerate() {
            if let (true, Some(c)) = (v > 0.0, links.get(i)) {
                let k = self.index(c);
                self.activity[k] += self.cfg.k_v * v;
            }
        }
        true
    }

    /// Links `view` to the current most active cell.
    pub fn learn_link(&self, view: usize, links: &mut ViewToPoseLinks) -> Result<Cell> {
        let c = self.argmax();
        links.insert(view, c)?;
        Ok(c)
    }

    /// Activity-weighted circular mean over a window around the most active
    /// cell, independently per axis.
    pub fn decode(&self) -> DecodedPose {
        let dims = self.dims();
        let peak = self.argmax();
        let r = self.cfg.decode_radius as i64;
        let span = |axis: usize| -> Vec<usize> {
            let n = dims[axis] as i64;
            let mut v: Vec<usize> = (-r..=r)
                .map(|d| (peak[axis] as i64 + d).rem_euclid(n) as usize)
                .collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        let (xs, ys, ts) = (span(0), span(1), span(2));
        let mut sums = [[0.0f64; 2]; 3];
        let mut mass = 0.0;
        for &k in &ts {
            for &j in &ys {
                for &i in &xs {
                    let w = self.get([i, j, k]);
                    if w == 0.0 {
                        continue;
                    }
                    mass += w;
                    for (axis, c) in [i, j, k].into_iter().enumerate() {
                        let a = TAU * c as f64 / dims[axis] as f64;
                        sums[axis][0] += w * a.cos();
                        sums[axis][1] += w * a.sin();
                    }
                }
            }
        }
        let mut cell = [0.0; 3];
        for axis in 0..3 {
            let n = dims[axis] as f64;
            let c = sums[axis][1].atan2(sums[axis][0]).rem_euclid(TAU) * n / TAU;
            cell[axis] = if c >= n { 0.0 } else { c };
        }
        let total = self.total();
        DecodedPose {
            pose: self.cell_to_pose(cell),
            cell,
            packet_mass: if total > 0.0 { mass / total } else { 0.0 },
        }
    }

    /// Metric pose of a fractional cell coordinate; the centre cell is the origin.
    pub fn cell_to_pose(&self, c: [f64; 3]) -> Pose {
        let [nx, ny, nt] = self.dims();
        Pose {
            x: (c[0] - (nx / 2) as f64) * self.cfg.cell_size_xy,
            y: (c[1] - (ny / 2) as f64) * self.cfg.cell_size_xy,
            theta: wrap_angle((c[2] - (nt / 2) as f64) * self.cfg.cell_size_theta),
        }
    }

    /// Wrapped Chebyshev distance between two cells, in cells.
    pub fn cell_distance(&self, a: Cell, b: Cell) -> usize {
        let dims = self.dims();
        (0..3)
            .map(|ax| {
                let d = a[ax].abs_diff(b[ax]);
                d.min(dims[ax] - d)
            })
            .max()
            .unwrap_or(0)
    }
}
