use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Result, SlamError};
use crate::geometry::{Pose, Scan};

/// Log-odds occupancy grid. Cell `(i, j)` covers
/// `[ox + i·res, ox + (i+1)·res) × [oy + j·res, oy + (j+1)·res)`.
#[derive(Debug, Clone)]
pub struct LocalMap {
    resolution: f64,
    origin: (f64, f64),
    size: usize,
    log_odds: Vec<f64>,
    l_min: f64,
    l_max: f64,
    // per-scan update marks: 0 untouched, 1 miss, 2 hit
    marks: Vec<u8>,
    touched: Vec<usize>,
}

impl LocalMap {
    pub fn new(
        resolution: f64,
        origin: (f64, f64),
        size: usize,
        l_min: f64,
        l_max: f64,
    ) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(SlamError::Config(format!(
                "map resolution must be positive, got {resolution}"
            )));
        }
        if size < 2 {
            return Err(SlamError::Config(
                "map must be at least 2 cells wide".into(),
            ));
        }
        if !(l_min < 0.0 && l_max > 0.0) {
            return Err(SlamError::Config(
                "log-odds clamps must straddle zero".into(),
            ));
        }
        Ok(Self {
            resolution,
            origin,
            size,
            log_odds: vec![0.0; size * size],
            l_min,
            l_max,
            marks: vec![0; size * size],
            touched: Vec::new(),
        })
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Side length in meters.
    pub fn extent(&self) -> f64 {
        self.size as f64 * self.resolution
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let e = self.extent();
        x >= self.origin.0 && y >= self.origin.1 && x < self.origin.0 + e && y < self.origin.1 + e
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.size + i
    }

    pub fn log_odds(&self, i: usize, j: usize) -> f64 {
        self.log_odds[self.idx(i, j)]
    }

    pub fn set_log_odds(&mut self, i: usize, j: usize, l: f64) {
        let k = self.idx(i, j);
        self.log_odds[k] = l.clamp(self.l_min, self.l_max);
    }

    /// Occupancy probability, the logistic transform of the log-odds.
    #[inline]
    pub fn probability(&self, i: usize, j: usize) -> f64 {
        logistic(self.log_odds[self.idx(i, j)])
    }

    /// Cell containing a world point, if inside the map.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let u = ((x - self.origin.0) / self.resolution).floor();
        let v = ((y - self.origin.1) / self.resolution).floor();
        let n = self.size as f64;
        (u >= 0.0 && v >= 0.0 && u < n && v < n).then_some((u as usize, v as usize))
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.origin.0 + (i as f64 + 0.5) * self.resolution,
            self.origin.1 + (j as f64 + 0.5) * self.resolution,
        )
    }

    pub fn view(&self) -> ContinuousMapView<'_> {
        ContinuousMapView { backing: self }
    }

    /// Integrates one scan taken from `pose`. Every cell is updated at most once
    /// per scan: cells crossed by a beam get `miss`, endpoint cells get `hit`,
    /// and a hit overrides a miss. Beams are truncated at the map border.
    pub fn integrate_scan(&mut self, scan: &Scan, pose: &Pose, hit: f64, miss: f64) {
        let Some(start) = self.cell_of(pose.x, pose.y) else {
            return;
        };
        let (s, c) = pose.theta.sin_cos();
        for (a, d) in scan.valid_beams() {
            let (sa, ca) = a.sin_cos();
            let ex = pose.x + d * (c * ca - s * sa);
            let ey = pose.y + d * (s * ca + c * sa);
            let end = self.cell_of(ex, ey);
            self.trace(start, (pose.x, pose.y), (ex, ey), end);
            if let Some((i, j)) = end {
                let k = self.idx(i, j);
                if self.marks[k] == 0 {
                    self.touched.push(k);
                }
                self.marks[k] = 2;
            }
        }
        for k in std::mem::take(&mut self.touched) {
            let delta = if self.marks[k] == 2 { hit } else { miss };
            self.log_odds[k] = (self.log_odds[k] + delta).clamp(self.l_min, self.l_max);
            self.marks[k] = 0;
        }
    }

    /// Grid walk (Amanatides–Woo) from the sensor cell towards the endpoint,
    /// marking every visited cell except the endpoint cell as a miss.
    fn trace(
        &mut self,
        start: (usize, usize),
        from: (f64, f64),
        to: (f64, f64),
        end: Option<(usize, usize)>,
    ) {
        let gx = (from.0 - self.origin.0) / self.resolution;
        let gy = (from.1 - self.origin.1) / self.resolution;
        let dx = (to.0 - from.0) / self.resolution;
        let dy = (to.1 - from.1) / self.resolution;
        let (mut i, mut j) = (start.0 as i64, start.1 as i64);
        let step_i: i64 = if dx > 0.0 { 1 } else { -1 };
        let step_j: i64 = if dy > 0.0 { 1 } else { -1 };
        let next_boundary = |g: f64, cell: i64, step: i64| {
            if step > 0 {
                (cell + 1) as f64 - g
            } else {
                g - cell as f64
            }
        };
        let mut t_max_x = if dx != 0.0 {
            next_boundary(gx, i, step_i) / dx.abs()
        } else {
            f64::INFINITY
        };
        let mut t_max_y = if dy != 0.0 {
            next_boundary(gy, j, step_j) / dy.abs()
        } else {
            f64::INFINITY
        };
        let t_delta_x = if dx != 0.0 {
            1.0 / dx.abs()
        } else {
            f64::INFINITY
        };
        let t_delta_y = if dy != 0.0 {
            1.0 / dy.abs()
        } else {
            f64::INFINITY
        };
        let n = self.size as i64;
        let end = end.map(|(a, b)| (a as i64, b as i64));
        let budget = (dx.abs().ceil() + dy.abs().ceil()) as usize + 2;
        for _ in 0..budget {
            if Some((i, j)) == end {
                return;
            }
            let k = (j * n + i) as usize;
            if self.marks[k] == 0 {
                self.marks[k] = 1;
                self.touched.push(k);
            }
            if t_max_x < t_max_y {
                if t_max_x > 1.0 {
                    return;
                }
                t_max_x += t_delta_x;
                i += step_i;
            } else {
                if t_max_y > 1.0 {
                    return;
                }
                t_max_y += t_delta_y;
                j += step_j;
            }
            if i < 0 || j < 0 || i >= n || j >= n {
                return;
            }
        }
    }

    /// Writes the occupancy probabilities as a binary graymap (white = free)
    /// plus a `<path>.meta` sidecar with `resolution origin_x origin_y size`.
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut out = Vec::with_capacity(self.size * self.size + 32);
        write!(out, "P5\n{} {}\n255\n", self.size, self.size).expect("vec write");
        // image rows run top to bottom, map rows bottom to top
        for j in (0..self.size).rev() {
            for i in 0..self.size {
                out.push(((1.0 - self.probability(i, j)) * 255.0).round() as u8);
            }
        }
        fs::write(path, out).map_err(|e| SlamError::io(path, e))?;
        let meta = path.with_extension("meta");
        let text = format!(
            "{} {} {} {}\n",
            self.resolution, self.origin.0, self.origin.1, self.size
        );
        fs::write(&meta, text).map_err(|e| SlamError::io(&meta, e))
    }
}

#[inline]
pub fn logistic(l: f64) -> f64 {
    1.0 / (1.0 + (-l).exp())
}

/// Continuous occupancy function over a [`LocalMap`]: bilinear interpolation
/// between cell centres.
#[derive(Debug, Clone, Copy)]
pub struct ContinuousMapView<'a> {
    pub backing: &'a LocalMap,
}

impl ContinuousMapView<'_> {
    /// Occupancy probability and its spatial gradient at a world point.
    /// Queries without four surrounding cell centres inside the map read as
    /// 0 with zero gradient.
    #[inline]
    pub fn interpolate(&self, x: f64, y: f64) -> (f64, (f64, f64)) {
        let m = self.backing;
        let u = (x - m.origin.0) / m.resolution - 0.5;
        let v = (y - m.origin.1) / m.resolution - 0.5;
        let (fi, fj) = (u.floor(), v.floor());
        if !(fi >= 0.0 && fj >= 0.0 && fi + 1.0 < m.size as f64 && fj + 1.0 < m.size as f64) {
            return (0.0, (0.0, 0.0));
        }
        let (i, j) = (fi as usize, fj as usize);
        let (fu, fv) = (u - fi, v - fj);
        let p00 = m.probability(i, j);
        let p10 = m.probability(i + 1, j);
        let p01 = m.probability(i, j + 1);
        let p11 = m.probability(i + 1, j + 1);
        let value = (1.0 - fv) * ((1.0 - fu) * p00 + fu * p10) + fv * ((1.0 - fu) * p01 + fu * p11);
        let du = (1.0 - fv) * (p10 - p00) + fv * (p11 - p01);
        let dv = (1.0 - fu) * (p01 - p00) + fu * (p11 - p10);
        (value, (du / m.resolution, dv / m.resolution))
    }
}

pub fn interpolate(view: &ContinuousMapView<'_>, xy: (f64, f64)) -> (f64, (f64, f64)) {
    view.interpolate(xy.0, xy.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn map(res: f64, size: usize) -> LocalMap {
        LocalMap::new(res, (0.0, 0.0), size, -4.0, 4.0).unwrap()
    }

    fn one_beam(range: f64) -> Scan {
        // second beam points backwards and never returns
        Scan::new(
            vec![Some(range), None],
            0.0,
            std::f64::consts::PI,
            10.0,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn interpolation_at_node() {
        let mut m = map(1.0, 4);
        m.set_log_odds(1, 1, 2.0);
        m.set_log_odds(2, 1, -1.0);
        let (v, g) = m.view().interpolate(1.5, 1.5);
        assert!((v - logistic(2.0)).abs() < 1e-15);
        assert!((g.0 - (logistic(-1.0) - logistic(2.0))).abs() < 1e-15);
        assert!((g.1 - (0.5 - logistic(2.0))).abs() < 1e-15);
    }

    #[test]
    fn uniform_map_is_flat() {
        let m = map(0.05, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let (x, y) = (rng.random_range(0.03..0.97), rng.random_range(0.03..0.97));
            let (v, g) = m.view().interpolate(x, y);
            assert!((v - 0.5).abs() < 1e-15);
            assert_eq!(g, (0.0, 0.0));
        }
    }

    #[test]
    fn midpoint_between_free_and_occupied() {
        let mut m = map(1.0, 2);
        m.log_odds = vec![
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
        ];
        let (v, _) = m.view().interpolate(1.0, 0.5);
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn outside_queries_read_zero() {
        let m = map(1.0, 4);
        assert_eq!(m.view().interpolate(0.2, 2.0), (0.0, (0.0, 0.0)));
        assert_eq!(m.view().interpolate(3.8, 2.0), (0.0, (0.0, 0.0)));
        assert_eq!(m.view().interpolate(-5.0, 2.0), (0.0, (0.0, 0.0)));
        assert_eq!(m.view().interpolate(f64::NAN, 2.0), (0.0, (0.0, 0.0)));
    }

    #[test]
    fn single_beam_cell_counts() {
        let mut m = map(0.5, 8);
        // sensor at the centre of cell (0, 1), beam 1 m along +x ends in cell (2, 1)
        m.integrate_scan(&one_beam(1.0), &Pose::new(0.25, 0.75, 0.0), 0.9, -0.4);
        let touched: Vec<_> = (0..8)
            .flat_map(|j| (0..8).map(move |i| (i, j)))
            .filter(|&(i, j)| m.log_odds(i, j) != 0.0)
            .collect();
        assert_eq!(touched, vec![(0, 1), (1, 1), (2, 1)]);
        assert_eq!(m.log_odds(0, 1), -0.4);
        assert_eq!(m.log_odds(1, 1), -0.4);
        assert_eq!(m.log_odds(2, 1), 0.9);
    }

    #[test]
    fn integration_is_additive_until_clamp() {
        let mut m = map(0.5, 8);
        let p = Pose::new(0.25, 0.75, 0.0);
        m.integrate_scan(&one_beam(1.0), &p, 0.9, -0.4);
        let once = m.log_odds(2, 1);
        m.integrate_scan(&one_beam(1.0), &p, 0.9, -0.4);
        assert_eq!(m.log_odds(2, 1), 2.0 * once);

        // ceil(4.0 / 0.9) = 5 updates saturate the endpoint
        let mut m = map(0.5, 8);
        for k in 1..=8 {
            m.integrate_scan(&one_beam(1.0), &p, 0.9, -0.4);
            let want = if k >= 5 { 4.0 } else { 0.9 * k as f64 };
            assert!((m.log_odds(2, 1) - want).abs() < 1e-12, "after {k}");
        }
        assert!((m.log_odds(0, 1) + 3.2).abs() < 1e-12);
    }

    #[test]
    fn beams_leaving_the_map_are_truncated() {
        let mut m = map(0.5, 4);
        m.integrate_scan(&one_beam(9.0), &Pose::new(0.25, 0.25, 0.0), 0.9, -0.4);
        for i in 0..4 {
            assert_eq!(m.log_odds(i, 0), -0.4);
        }
    }

    #[test]
    fn pgm_dump_has_header_and_sidecar() {
        let dir = std::env::temp_dir().join(format!("bioslam-pgm-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let mut m = map(0.5, 8);
        m.integrate_scan(&one_beam(1.0), &Pose::new(0.25, 0.75, 0.0), 0.9, -0.4);
        let path = dir.join("local.pgm");
        m.write_pgm(&path).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert!(bytes.starts_with(b"P5\n8 8\n255\n"));
        assert_eq!(bytes.len(), 11 + 64);
        let meta = fs::read_to_string(dir.join("local.meta")).unwrap();
        assert_eq!(meta.trim(), "0.5 0 0 8");
        fs::remove_dir_all(dir).ok();
    }

    /// Dense oracle: the bilinear interpolant written as a sum of tent
    /// functions over every cell centre.
    fn tent_oracle(m: &LocalMap, x: f64, y: f64) -> f64 {
        let u = (x - m.origin.0) / m.resolution - 0.5;
        let v = (y - m.origin.1) / m.resolution - 0.5;
        let mut acc = 0.0;
        for j in 0..m.size {
            for i in 0..m.size {
                let w =
                    (1.0 - (u - i as f64).abs()).max(0.0) * (1.0 - (v - j as f64).abs()).max(0.0);
                acc += w * m.probability(i, j);
            }
        }
        acc
    }

    fn random_map(seed: u64, size: usize) -> LocalMap {
        let mut m = LocalMap::new(0.1, (-0.7, 0.3), size, -4.0, 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for j in 0..size {
            for i in 0..size {
                m.set_log_odds(i, j, rng.random_range(-4.0..4.0));
            }
        }
        m
    }

    #[test]
    fn matches_dense_tent_oracle() {
        let m = random_map(5, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let lo = m.origin.0 + 0.5 * m.resolution + 1e-9;
        for _ in 0..1000 {
            let x = rng.random_range(lo..m.origin.0 + (m.size as f64 - 0.5) * m.resolution - 1e-9);
            let y = rng.random_range(
                m.origin.1 + 0.05 + 1e-9..m.origin.1 + (m.size as f64 - 0.5) * m.resolution - 1e-9,
            );
            let (v, _) = m.view().interpolate(x, y);
            assert!((v - tent_oracle(&m, x, y)).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn gradient_matches_central_differences(fx in 0.05f64..0.95, fy in 0.05f64..0.95, ci in 0usize..9, cj in 0usize..9, seed in 0u64..50) {
            let m = random_map(seed, 12);
            let x = m.origin.0 + (ci as f64 + 0.5 + fx) * m.resolution;
            let y = m.origin.1 + (cj as f64 + 0.5 + fy) * m.resolution;
            let h = 1e-5;
            let (_, g) = m.view().interpolate(x, y);
            let nx = (m.view().interpolate(x + h, y).0 - m.view().interpolate(x - h, y).0) / (2.0 * h);
            let ny = (m.view().interpolate(x, y + h).0 - m.view().interpolate(x, y - h).0) / (2.0 * h);
            let scale = g.0.abs().max(g.1.abs()).max(1e-3);
            prop_assert!((g.0 - nx).abs() / scale < 1e-4);
            prop_assert!((g.1 - ny).abs() / scale < 1e-4);
        }

        #[test]
        fn value_stays_in_unit_interval(x in -1.0f64..1.5, y in 0.0f64..1.6, seed in 0u64..20) {
            let m = random_map(seed, 12);
            let (v, _) = m.view().interpolate(x, y);
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
