//! Gauss-Newton scan-to-map alignment.
//!
//! The pose `(x, y, θ)` of the scan in the map frame is refined so that the
//! summed occupancy of the projected endpoints is maximal. Each iteration
//! linearizes the bilinear map interpolant around the current estimate and
//! solves the 3x3 normal equations for the update that drives every endpoint
//! towards occupancy 1.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use super::grid::LocalMap;
use crate::geometry::{wrap_angle, PointSet, Pose};

/// Solver knobs for one alignment.
#[derive(Debug, Clone, Copy)]
pub struct GaussNewtonParams {
    pub max_iterations: usize,
    pub epsilon: f64,
    /// Largest admissible condition number of the normal matrix.
    pub max_condition: f64,
    pub max_halvings: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alignment {
    pub pose: Pose,
    pub score: f64,
    pub iterations: usize,
    pub degenerate: bool,
}

/// Summed interpolated occupancy of the points projected with `pose`.
pub fn score(map: &LocalMap, points: &PointSet, pose: &Pose) -> f64 {
    let view = map.view();
    points
        .iter()
        .map(|&e| {
            let (x, y) = pose.transform_point(e);
            view.interpolate(x, y).0
        })
        .sum()
}

fn normal_equations(
    map: &LocalMap,
    points: &PointSet,
    pose: &Pose,
) -> (Matrix3<f64>, Vector3<f64>) {
    let view = map.view();
    let (s, c) = pose.theta.sin_cos();
    let mut h = Matrix3::zeros();
    let mut b = Vector3::zeros();
    for &(ex, ey) in points.iter() {
        let wx = c * ex - s * ey + pose.x;
        let wy = s * ex + c * ey + pose.y;
        let (m, (gx, gy)) = view.interpolate(wx, wy);
        if gx == 0.0 && gy == 0.0 {
            continue;
        }
        let dth = gx * (-s * ex - c * ey) + gy * (c * ex - s * ey);
        let j = Vector3::new(gx, gy, dth);
        h += j * j.transpose();
        b += j * (1.0 - m);
    }
    (h, b)
}

fn is_degenerate(h: &Matrix3<f64>, max_condition: f64) -> bool {
    let eig = SymmetricEigen::new(*h).eigenvalues;
    let lo = eig.min();
    let hi = eig.max();
    !(lo > 0.0 && hi.is_finite() && hi / lo <= max_condition)
}

/// Refines `initial` against one map. Accepted iterates never lower the score:
/// a step that would is halved until it does not, or abandoned.
pub fn align(
    map: &LocalMap,
    points: &PointSet,
    initial: Pose,
    params: &GaussNewtonParams,
) -> Alignment {
    let mut pose = initial;
    let mut best = score(map, points, &pose);
    let mut iterations = 0;
    let mut degenerate = false;
    for _ in 0..params.max_iterations {
        iterations += 1;
        let (h, b) = normal_equations(map, points, &pose);
        if is_degenerate(&h, params.max_condition) {
            degenerate = true;
            break;
        }
        let Some(step) = h.try_inverse().map(|inv| inv * b) else {
            degenerate = true;
            break;
        };
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=params.max_halvings {
            let cand = Pose {
                x: pose.x + scale * step.x,
                y: pose.y + scale * step.y,
                theta: wrap_angle(pose.theta + scale * step.z),
            };
            let sc = score(map, points, &cand);
            if sc >= best {
                accepted = Some((cand, sc));
                break;
            }
            scale *= 0.5;
        }
        let Some((cand, sc)) = accepted else {
            break;
        };
        pose = cand;
        best = sc;
        if (scale * step).norm() < params.epsilon {
            break;
        }
    }
    Alignment {
        pose,
        score: best,
        iterations,
        degenerate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::scan_to_points;
    use crate::sim::{raycast, LidarModel, Segment};

    fn params() -> GaussNewtonParams {
        GaussNewtonParams {
            max_iterations: 20,
            epsilon: 1e-5,
            max_condition: 40.0,
            max_halvings: 6,
        }
    }

    fn room_map() -> (LocalMap, crate::sim::World, LidarModel) {
        // a pentagon-ish room so no wall runs along grid lines
        let world = crate::sim::World::new(vec![
            Segment::new(0.1, 0.3, 5.7, -0.2),
            Segment::new(5.7, -0.2, 6.3, 3.9),
            Segment::new(6.3, 3.9, 2.9, 5.4),
            Segment::new(2.9, 5.4, -0.4, 4.1),
            Segment::new(-0.4, 4.1, 0.1, 0.3),
            Segment::new(1.2, 3.1, 1.9, 3.6),
        ])
        .unwrap();
        let model = LidarModel {
            range_noise_sigma: 0.0,
            ..LidarModel::default()
        };
        let mut map = LocalMap::new(0.05, (-10.0, -10.0), 400, -4.0, 4.0).unwrap();
        let origin = Pose::new(3.0, 2.5, 0.0);
        let scan = raycast(&world, &origin, &model, 0).unwrap();
        for _ in 0..3 {
            map.integrate_scan(&scan, &origin, 0.9, -0.4);
        }
        (map, world, model)
    }

    #[test]
    fn accepted_iterates_never_lower_the_score() {
        let (map, world, model) = room_map();
        let truth = Pose::new(3.03, 2.48, 0.02);
        let pts = scan_to_points(&raycast(&world, &truth, &model, 0).unwrap()).unwrap();
        let start = Pose::new(3.0, 2.5, 0.0);
        let before = score(&map, &pts, &start);
        let a = align(&map, &pts, start, &params());
        assert!(a.score >= before);
        assert!(!a.degenerate);
        assert!(a.pose.distance(&truth) < 0.01);
    }

    #[test]
    fn empty_map_is_degenerate() {
        let map = LocalMap::new(0.05, (-5.0, -5.0), 200, -4.0, 4.0).unwrap();
        let (_, world, model) = room_map();
        let pts = scan_to_points(&raycast(&world, &Pose::new(3.0, 2.5, 0.0), &model, 0).unwrap())
            .unwrap();
        let a = align(&map, &pts, Pose::identity(), &params());
        assert!(a.degenerate);
        assert_eq!(a.pose, Pose::identity());
    }
}
