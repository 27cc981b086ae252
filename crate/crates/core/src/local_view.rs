//! Local view cells: two-stage LiDAR place recognition.
//!
//! Stage one hashes a scan to the integer `floor(10^-d_s · Σ d_i)` and only
//! views sharing that hash are compared further. Stage two compares
//! downsampled range templates by their mean squared difference, minimized
//! over a small band of cyclic shifts to tolerate heading changes. Cell
//! activity is `1 - min(s_t, s) / s_t` for candidates that match, zero
//! otherwise, and a scan that matches nothing is learned as a new view.

use std::collections::HashMap;

use serde::Deserialize;

use crate::error::{Result, SlamError};
use crate::geometry::Scan;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalViewConfig {
    /// Downscaling exponent of the coarse feature.
    pub d_s: f64,
    /// Template length.
    pub template_size: usize,
    /// Shift tolerance, in template cells.
    pub beta: usize,
    /// Similarity threshold (m²); defaults to `0.1 · (range_max / 10)²`.
    pub s_t: Option<f64>,
    /// Range substituted for no-return beams; defaults to the scan's range_max.
    pub invalid_fill: Option<f64>,
    /// Circular template shifts (full-revolution scanners). When false the
    /// comparison uses the overlapping part of the shifted templates.
    pub wrap: bool,
    /// Also compare against views in the adjacent hash buckets.
    pub probe_adjacent: bool,
}

impl Default for LocalViewConfig {
    fn default() -> Self {
        Self {
            d_s: 1.0,
            template_size: 72,
            beta: 4,
            s_t: None,
            invalid_fill: None,
            wrap: true,
            probe_adjacent: false,
        }
    }
}

impl LocalViewConfig {
    pub fn validate(&self) -> Result<()> {
        if self.template_size < 8 {
            return Err(SlamError::Config(
                "local_view.template_size must be >= 8".into(),
            ));
        }
        if self.beta >= self.template_size {
            return Err(SlamError::Config(
                "local_view.beta must be smaller than the template".into(),
            ));
        }
        if let Some(s) = self.s_t {
            if !(s > 0.0) {
                return Err(SlamError::Config("local_view.s_t must be positive".into()));
            }
        }
        if !self.d_s.is_finite() {
            return Err(SlamError::Config("local_view.d_s must be finite".into()));
        }
        if let Some(f) = self.invalid_fill {
            if !(f >= 0.0 && f.is_finite()) {
                return Err(SlamError::Config(
                    "local_view.invalid_fill must be finite and >= 0".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn threshold(&self, range_max: f64) -> f64 {
        self.s_t.unwrap_or(0.1 * (range_max / 10.0).powi(2))
    }

    fn fill(&self, scan: &Scan) -> f64 {
        self.invalid_fill.unwrap_or(scan.range_max)
    }
}

/// Downsampled range profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewTemplate {
    values: Vec<f64>,
}

impl ViewTemplate {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(SlamError::InvalidScan(
                "template values must be finite and >= 0".into(),
            ));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Cyclic rotation: `out[i] = self[(i + j) mod M]`.
    pub fn rotated(&self, j: isize) -> Self {
        let m = self.values.len() as isize;
        let values = (0..m)
            .map(|i| self.values[(i + j).rem_euclid(m) as usize])
            .collect();
        Self { values }
    }
}

/// Learned view: coarse hash and template.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalView {
    pub coarse: i64,
    pub template: ViewTemplate,
}

impl LocalView {
    pub fn from_scan(scan: &Scan, cfg: &LocalViewConfig) -> Self {
        let ranges = scan.filled_ranges(cfg.fill(scan));
        Self {
            coarse: coarse_feature_of(&ranges, cfg.d_s),
            template: template_of(&ranges, cfg.template_size),
        }
    }
}

/// `floor(10^-d_s · Σ d_i)` with no-return beams replaced by `fill`.
pub fn coarse_feature(scan: &Scan, d_s: f64, fill: f64) -> i64 {
    coarse_feature_of(&scan.filled_ranges(fill), d_s)
}

pub fn coarse_feature_of(ranges: &[f64], d_s: f64) -> i64 {
    let sum: f64 = ranges.iter().sum();
    (10f64.powf(-d_s) * sum).floor() as i64
}

/// `T(i) = L(N/M · i)`, `i = 1..M`, with `L` linear interpolation between
/// 1-based beam indices clamped to `[1, N]`.
pub fn build_template(scan: &Scan, m: usize, fill: f64) -> ViewTemplate {
    template_of(&scan.filled_ranges(fill), m)
}

pub fn template_of(ranges: &[f64], m: usize) -> ViewTemplate {
    let n = ranges.len();
    let d = |k: usize| ranges[k.clamp(1, n) - 1];
    let values = (1..=m)
        .map(|i| {
            let pos = (n * i) as f64 / m as f64;
            let lo = pos.floor();
            let (kl, kh) = (lo as usize, pos.ceil() as usize);
            d(kl) + (pos - lo) * (d(kh) - d(kl))
        })
        .collect();
    ViewTemplate { values }
}

/// Minimum over shifts `j ∈ [-β, β]` of the mean squared difference
/// between `t1` shifted by `j` and `t2`.
pub fn similarity(t1: &ViewTemplate, t2: &ViewTemplate, beta: usize, wrap: bool) -> f64 {
    best_shift(t1, t2, beta, wrap).0
}

/// [`similarity`] together with the smallest minimising shift `j`, so that
/// `t2[i] ≈ t1[i + j]`: the scan behind `t2` is rotated `j` template cells
/// counter-clockwise of the one behind `t1`.
pub fn best_shift(t1: &ViewTemplate, t2: &ViewTemplate, beta: usize, wrap: bool) -> (f64, isize) {
    assert_eq!(t1.len(), t2.len(), "templates must have equal length");
    let m = t1.len() as isize;
    let (a, b) = (&t1.values, &t2.values);
    let beta = beta as isize;
    // pairs are (a[i + j], b[i]); summing in order of the b index for j >= 0
    // and of the a index for j < 0 makes S(a, b) and S(b, a) bit-identical
    (-beta..=beta)
        .map(|j| {
            let term = |i: isize| {
                let diff = a[(i + j).rem_euclid(m) as usize] - b[i.rem_euclid(m) as usize];
                diff * diff
            };
            let (lo, hi) = if wrap {
                (0, m)
            } else {
                ((-j).max(0), (m - j).min(m))
            };
            let sum: f64 = if j >= 0 {
                (lo..hi).map(term).sum()
            } else {
                let (klo, khi) = if wrap { (0, m) } else { (lo + j, hi + j) };
                (klo..khi).map(|k| term(k - j)).sum()
            };
            (sum / (hi - lo) as f64, j)
        })
        .fold(
            (f64::INFINITY, 0),
            |best, c| if c.0 < best.0 { c } else { best },
        )
}

/// Result of presenting one scan to the local view cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewOutcome {
    pub active_index: usize,
    pub is_new: bool,
    /// Lowest similarity among coarse candidates, `None` without candidates.
    pub best_similarity: Option<f64>,
    /// Template shift of the matched view (see [`best_shift`]); 0 when new.
    pub shift: isize,
}

#[derive(Debug, Clone, Default)]
pub struct LocalViewCells {
    views: Vec<LocalView>,
    activity: Vec<f64>,
    active_index: Option<usize>,
    buckets: HashMap<i64, Vec<usize>>,
}

impl LocalViewCells {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn views(&self) -> &[LocalView] {
        &self.views
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    pub fn activity(&self) -> &[f64] {
        &self.activity
    }

    pub fn active_index(&self) -> Option<usize> {
        self.active_index
    }

    /// Indices of learned views whose coarse feature equals `h`, ascending.
    pub fn candidates(&self, h: i64) -> &[usize] {
        self.buckets.get(&h).map_or(&[], Vec::as_slice)
    }

    /// Matches a scan against the learned views, updating activities and
    /// learning the scan when nothing matches.
    pub fn process(&mut self, scan: &Scan, cfg: &LocalViewConfig) -> ViewOutcome {
        let view = LocalView::from_scan(scan, cfg);
        assert_eq!(
            view.template.len(),
            cfg.template_size,
            "template size changed between calls"
        );
        let s_t = cfg.threshold(scan.range_max);
        self.activity.iter_mut().for_each(|v| *v = 0.0);

        let mut best: Option<(usize, f64, isize)> = None;
        let mut best_similarity: Option<f64> = None;
        let probes: &[i64] = if cfg.probe_adjacent {
            &[0, -1, 1]
        } else {
            &[0]
        };
        for dh in probes {
            let bucket = self
                .buckets
                .get(&(view.coarse + dh))
                .map_or(&[][..], Vec::as_slice);
            for &i in bucket {
                let (s, j) =
                    best_shift(&self.views[i].template, &view.template, cfg.beta, cfg.wrap);
                best_similarity = Some(best_similarity.map_or(s, |b: f64| b.min(s)));
                if s < s_t {
                    let v = 1.0 - s.min(s_t) / s_t;
                    self.activity[i] = v;
                    let better = match best {
                        None => true,
                        Some((bi, bv, _)) => v > bv || (v == bv && i < bi),
                    };
                    if better {
                        best = Some((i, v, j));
                    }
                }
            }
        }

        let (active_index, is_new, shift) = match best {
            Some((i, _, j)) => (i, false, j),
            None => {
                let i = self.views.len();
                self.buckets.entry(view.coarse).or_default().push(i);
                self.views.push(view);
                // a freshly learned view matches the current scan exactly
                self.activity.push(1.0);
                (i, true, 0)
            }
        };
        self.active_index = Some(active_index);
        ViewOutcome {
            active_index,
            is_new,
            best_similarity,
            shift,
        }
    }
}
