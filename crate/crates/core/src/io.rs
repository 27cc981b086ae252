//! Plain-text file formats. One record per line, fields separated by
//! whitespace, `#` starts a comment. Floats are written with Rust's shortest
//! round-trip formatting, so a written file reads back bit-exactly. Parse
//! errors carry the 1-based line number.
//!
//! | file | record |
//! |------|--------|
//! | world | `x1 y1 x2 y2` (one wall segment) |
//! | trajectory | `scan_rate <hz>` once, then `t x y theta` waypoints, or a `route <speed> <turn_rate> <heading>` line followed by `x y` points |
//! | scan log | `t angle_min angle_increment range_max r_1 .. r_N`, `inf` = no return |
//! | truth log | `t x y theta` |
//! | report log | `t err_x err_y err node_count edge_count loop_closed active_view` |
//! | view log | `t active_index is_new s_best` |
//! | nodes | `id x y theta view_index` |
//! | edges | `from to dx dy dtheta dt` |
//! | summary | `mean_err min_err max_err rmse n_steps n_nodes n_edges n_views` |
//! | pose cells | `n_x n_y n_theta`, then one line of `n_x` activities per `(y, theta)`, y fastest |

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Result, SlamError};
use crate::experience_map::{Experience, ExperienceMap, Transition};
use crate::geometry::{Pose, PoseDelta, Scan};
use crate::sim::{Segment, TrajectoryScript, Waypoint, World};

/// Non-empty, non-comment lines as `(line_number, fields)`.
fn records(path: &Path) -> Result<Vec<(usize, Vec<String>)>> {
    let file = fs::File::open(path).map_err(|e| SlamError::io(path, e))?;
    let mut out = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| SlamError::io(path, e))?;
        let body = line.split('#').next().unwrap_or("");
        let fields: Vec<String> = body.split_whitespace().map(str::to_owned).collect();
        if !fields.is_empty() {
            out.push((k + 1, fields));
        }
    }
    Ok(out)
}

fn field<T: FromStr>(
    path: &Path,
    line: usize,
    fields: &[String],
    i: usize,
    name: &str,
) -> Result<T> {
    let raw = fields
        .get(i)
        .ok_or_else(|| SlamError::parse(path, line, format!("missing field {name}")))?;
    raw.parse()
        .map_err(|_| SlamError::parse(path, line, format!("bad {name} {raw:?}")))
}

fn expect_len(path: &Path, line: usize, fields: &[String], n: usize) -> Result<()> {
    if fields.len() == n {
        Ok(())
    } else {
        Err(SlamError::parse(
            path,
            line,
            format!("expected {n} fields, found {}", fields.len()),
        ))
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| SlamError::io(path, e))
}

pub fn read_world(path: &Path) -> Result<World> {
    let mut segs = Vec::new();
    for (line, f) in records(path)? {
        expect_len(path, line, &f, 4)?;
        let v: Vec<f64> = (0..4)
            .map(|i| field(path, line, &f, i, "coordinate"))
            .collect::<Result<_>>()?;
        if v.iter().any(|c| !c.is_finite()) {
            return Err(SlamError::parse(path, line, "non-finite coordinate"));
        }
        segs.push(Segment::new(v[0], v[1], v[2], v[3]));
    }
    World::new(segs).map_err(|e| SlamError::parse(path, 0, e.to_string()))
}

pub fn write_world(path: &Path, world: &World) -> Result<()> {
    let mut s = String::new();
    for seg in world.segments() {
        writeln!(s, "{} {} {} {}", seg.a.0, seg.a.1, seg.b.0, seg.b.1).unwrap();
    }
    write_text(path, &s)
}

// line of the directive, speed, turn rate and heading, route points
type Route = (usize, [f64; 3], Vec<(f64, f64)>);

pub fn read_trajectory(path: &Path) -> Result<TrajectoryScript> {
    let mut rate = None;
    let mut waypoints = Vec::new();
    let mut route: Option<Route> = None;
    for (line, f) in records(path)? {
        match f[0].as_str() {
            "scan_rate" => {
                expect_len(path, line, &f, 2)?;
                rate = Some(field::<f64>(path, line, &f, 1, "scan_rate")?);
            }
            "route" => {
                expect_len(path, line, &f, 4)?;
                if route.is_some() || !waypoints.is_empty() {
                    return Err(SlamError::parse(
                        path,
                        line,
                        "route must be the only motion description",
                    ));
                }
                let speed = field(path, line, &f, 1, "speed")?;
                let turn = field(path, line, &f, 2, "turn_rate")?;
                let heading = field(path, line, &f, 3, "heading")?;
                route = Some((line, [speed, turn, heading], Vec::new()));
            }
            _ => {
                let v: Vec<f64> = (0..f.len())
                    .map(|i| field(path, line, &f, i, "value"))
                    .collect::<Result<_>>()?;
                if v.iter().any(|c| !c.is_finite()) {
                    return Err(SlamError::parse(path, line, "non-finite value"));
                }
                match route.as_mut() {
                    Some((_, _, points)) => {
                        expect_len(path, line, &f, 2)?;
                        points.push((v[0], v[1]));
                    }
                    None => {
                        expect_len(path, line, &f, 4)?;
                        waypoints.push(Waypoint {
                            pose: Pose::new(v[1], v[2], v[3]),
                            t: v[0],
                        });
                    }
                }
            }
        }
    }
    let rate = rate.ok_or_else(|| SlamError::parse(path, 0, "missing scan_rate directive"))?;
    match route {
        Some((line, [speed, turn, heading], points)) => {
            TrajectoryScript::from_route(&points, heading, speed, turn, rate)
                .map_err(|e| SlamError::parse(path, line, e.to_string()))
        }
        None => TrajectoryScript::new(waypoints, rate)
            .map_err(|e| SlamError::parse(path, 0, e.to_string())),
    }
}

pub fn write_trajectory(path: &Path, script: &TrajectoryScript) -> Result<()> {
    let mut s = format!("scan_rate {}\n", script.scan_rate);
    for w in &script.waypoints {
        writeln!(s, "{} {} {} {}", w.t, w.pose.x, w.pose.y, w.pose.theta).unwrap();
    }
    write_text(path, &s)
}

pub fn scan_line(scan: &Scan) -> String {
    let mut s = format!(
        "{} {} {} {}",
        scan.timestamp, scan.angle_min, scan.angle_increment, scan.range_max
    );
    for r in scan.ranges() {
        match r {
            Some(d) => write!(s, " {d}").unwrap(),
            None => s.push_str(" inf"),
        }
    }
    s
}

pub fn parse_scan_line(path: &Path, line: usize, f: &[String]) -> Result<Scan> {
    if f.len() < 6 {
        return Err(SlamError::parse(
            path,
            line,
            format!("expected at least 6 fields, found {}", f.len()),
        ));
    }
    let t: f64 = field(path, line, f, 0, "t")?;
    let amin: f64 = field(path, line, f, 1, "angle_min")?;
    let inc: f64 = field(path, line, f, 2, "angle_increment")?;
    let rmax: f64 = field(path, line, f, 3, "range_max")?;
    let ranges = (4..f.len())
        .map(|i| {
            let r: f64 = field(path, line, f, i, "range")?;
            Ok(if r.is_infinite() && r > 0.0 {
                None
            } else {
                Some(r)
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Scan::new(ranges, amin, inc, rmax, t).map_err(|e| SlamError::parse(path, line, e.to_string()))
}

pub fn read_scan_log(path: &Path) -> Result<Vec<Scan>> {
    records(path)?
        .into_iter()
        .map(|(line, f)| parse_scan_line(path, line, &f))
        .collect()
}

pub fn truth_line(t: f64, p: &Pose) -> String {
    format!("{t} {} {} {}", p.x, p.y, p.theta)
}

/// Ground-truth records `(t, pose)`.
pub fn read_truth_log(path: &Path) -> Result<Vec<(f64, Pose)>> {
    let mut out = Vec::new();
    for (line, f) in records(path)? {
        expect_len(path, line, &f, 4)?;
        let v: Vec<f64> = (0..4)
            .map(|i| field(path, line, &f, i, "value"))
            .collect::<Result<_>>()?;
        if v.iter().any(|c| !c.is_finite()) {
            return Err(SlamError::parse(path, line, "non-finite value"));
        }
        out.push((
            v[0],
            Pose {
                x: v[1],
                y: v[2],
                theta: v[3],
            },
        ));
    }
    Ok(out)
}

/// One line of the report log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportRecord {
    pub t: f64,
    /// NaN without ground truth.
    pub err_x: f64,
    pub err_y: f64,
    pub err: f64,
    pub node_count: usize,
    pub edge_count: usize,
    pub loop_closed: bool,
    pub active_view: usize,
}

fn fmt_f(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        v.to_string()
    }
}

impl ReportRecord {
    pub fn line(&self) -> String {
        format!(
            "{} {} {} {} {} {} {} {}",
            self.t,
            fmt_f(self.err_x),
            fmt_f(self.err_y),
            fmt_f(self.err),
            self.node_count,
            self.edge_count,
            u8::from(self.loop_closed),
            self.active_view
        )
    }
}

pub fn read_report_log(path: &Path) -> Result<Vec<ReportRecord>> {
    let mut out = Vec::new();
    for (line, f) in records(path)? {
        expect_len(path, line, &f, 8)?;
        let closed: u8 = field(path, line, &f, 6, "loop_closed")?;
        if closed > 1 {
            return Err(SlamError::parse(path, line, "loop_closed must be 0 or 1"));
        }
        out.push(ReportRecord {
            t: field(path, line, &f, 0, "t")?,
            err_x: field(path, line, &f, 1, "err_x")?,
            err_y: field(path, line, &f, 2, "err_y")?,
            err: field(path, line, &f, 3, "err")?,
            node_count: field(path, line, &f, 4, "node_count")?,
            edge_count: field(path, line, &f, 5, "edge_count")?,
            loop_closed: closed == 1,
            active_view: field(path, line, &f, 7, "active_view")?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewRecord {
    pub t: f64,
    pub active_index: usize,
    pub is_new: bool,
    /// NaN when no candidate was compared.
    pub s_best: f64,
}

impl ViewRecord {
    pub fn line(&self) -> String {
        format!(
            "{} {} {} {}",
            self.t,
            self.active_index,
            u8::from(self.is_new),
            fmt_f(self.s_best)
        )
    }
}

pub fn read_view_log(path: &Path) -> Result<Vec<ViewRecord>> {
    let mut out = Vec::new();
    for (line, f) in records(path)? {
        expect_len(path, line, &f, 4)?;
        let is_new: u8 = field(path, line, &f, 2, "is_new")?;
        out.push(ViewRecord {
            t: field(path, line, &f, 0, "t")?,
            active_index: field(path, line, &f, 1, "active_index")?,
            is_new: is_new == 1,
            s_best: field(path, line, &f, 3, "s_best")?,
        });
    }
    Ok(out)
}

/// Writes `nodes.txt` and `edges.txt` style exports.
pub fn write_map(nodes_path: &Path, edges_path: &Path, map: &ExperienceMap) -> Result<()> {
    let mut s = String::new();
    for n in map.nodes() {
        writeln!(
            s,
            "{} {} {} {} {}",
            n.id, n.pose.x, n.pose.y, n.pose.theta, n.view_index
        )
        .unwrap();
    }
    write_text(nodes_path, &s)?;
    let mut s = String::new();
    for e in map.edges() {
        writeln!(
            s,
            "{} {} {} {} {} {}",
            e.from_id, e.to_id, e.delta.dx, e.delta.dy, e.delta.dtheta, e.dt
        )
        .unwrap();
    }
    write_text(edges_path, &s)
}

/// Node records; `pc_coord` is not exported and reads back as zero.
pub fn read_nodes(path: &Path) -> Result<Vec<Experience>> {
    let mut out = Vec::new();
    for (line, f) in records(path)? {
        expect_len(path, line, &f, 5)?;
        out.push(Experience {
            id: field(path, line, &f, 0, "id")?,
            pose: Pose {
                x: field(path, line, &f, 1, "x")?,
                y: field(path, line, &f, 2, "y")?,
                theta: field(path, line, &f, 3, "theta")?,
            },
            view_index: field(path, line, &f, 4, "view_index")?,
            pc_coord: [0; 3],
        });
    }
    Ok(out)
}

pub fn read_edges(path: &Path) -> Result<Vec<Transition>> {
    let mut out = Vec::new();
    for (line, f) in records(path)? {
        expect_len(path, line, &f, 6)?;
        out.push(Transition {
            from_id: field(path, line, &f, 0, "from")?,
            to_id: field(path, line, &f, 1, "to")?,
            delta: PoseDelta {
                dx: field(path, line, &f, 2, "dx")?,
                dy: field(path, line, &f, 3, "dy")?,
                dtheta: field(path, line, &f, 4, "dtheta")?,
            },
            dt: field(path, line, &f, 5, "dt")?,
        });
    }
    Ok(out)
}

/// Run summary. Error statistics are NaN when no ground truth was available.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean_err: f64,
    pub min_err: f64,
    pub max_err: f64,
    pub rmse: f64,
    pub n_steps: usize,
    pub n_nodes: usize,
    pub n_edges: usize,
    pub n_views: usize,
}

impl Summary {
    pub fn line(&self) -> String {
        format!(
            "{} {} {} {} {} {} {} {}",
            fmt_f(self.mean_err),
            fmt_f(self.min_err),
            fmt_f(self.max_err),
            fmt_f(self.rmse),
            self.n_steps,
            self.n_nodes,
            self.n_edges,
            self.n_views
        )
    }
}

pub fn write_summary(path: &Path, s: &Summary) -> Result<()> {
    write_text(path, &format!("{}\n", s.line()))
}

pub fn read_summary(path: &Path) -> Result<Summary> {
    let recs = records(path)?;
    let (line, f) = recs
        .first()
        .ok_or_else(|| SlamError::parse(path, 1, "empty summary"))?;
    let (line, f) = (*line, f);
    expect_len(path, line, f, 8)?;
    Ok(Summary {
        mean_err: field(path, line, f, 0, "mean_err")?,
        min_err: field(path, line, f, 1, "min_err")?,
        max_err: field(path, line, f, 2, "max_err")?,
        rmse: field(path, line, f, 3, "rmse")?,
        n_steps: field(path, line, f, 4, "n_steps")?,
        n_nodes: field(path, line, f, 5, "n_nodes")?,
        n_edges: field(path, line, f, 6, "n_edges")?,
        n_views: field(path, line, f, 7, "n_views")?,
    })
}

/// Pose-cell activity snapshot, x fastest.
pub fn write_activity(path: &Path, dims: [usize; 3], activity: &[f64]) -> Result<()> {
    assert_eq!(
        activity.len(),
        dims.iter().product::<usize>(),
        "activity does not match dims"
    );
    let mut s = format!("{} {} {}\n", dims[0], dims[1], dims[2]);
    for row in activity.chunks(dims[0]) {
        let fields: Vec<String> = row.iter().map(f64::to_string).collect();
        s.push_str(&fields.join(" "));
        s.push('\n');
    }
    write_text(path, &s)
}

pub fn read_activity(path: &Path) -> Result<([usize; 3], Vec<f64>)> {
    let recs = records(path)?;
    let (line, head) = recs
        .first()
        .ok_or_else(|| SlamError::parse(path, 1, "empty snapshot"))?;
    expect_len(path, *line, head, 3)?;
    let dims: [usize; 3] = [
        field(path, *line, head, 0, "n_x")?,
        field(path, *line, head, 1, "n_y")?,
        field(path, *line, head, 2, "n_theta")?,
    ];
    let mut values = Vec::with_capacity(dims.iter().product());
    for (line, f) in &recs[1..] {
        expect_len(path, *line, f, dims[0])?;
        for i in 0..dims[0] {
            values.push(field(path, *line, f, i, "activity")?);
        }
    }
    if values.len() != dims.iter().product::<usize>() {
        return Err(SlamError::parse(
            path,
            recs.len(),
            "snapshot is missing rows",
        ));
    }
    Ok((dims, values))
}

/// Line-buffered writer for the streaming logs.
pub struct LineWriter {
    inner: std::io::BufWriter<fs::File>,
    path: std::path::PathBuf,
}

impl LineWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let f = fs::File::create(path).map_err(|e| SlamError::io(path, e))?;
        Ok(Self {
            inner: std::io::BufWriter::new(f),
            path: path.to_path_buf(),
        })
    }

    pub fn line(&mut self, text: &str) -> Result<()> {
        writeln!(self.inner, "{text}").map_err(|e| SlamError::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| SlamError::io(&self.path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("bioslam-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn scan_round_trip_is_exact() {
        let scan = Scan::new(
            vec![Some(1.0 / 3.0), None, Some(9.999999), Some(0.1 + 0.2)],
            -PI,
            PI / 2.0,
            10.0,
            0.1 * 3.0,
        )
        .unwrap();
        let p = tmp("scans.txt");
        write_text(
            &p,
            &format!("# header\n{}\n\n{}\n", scan_line(&scan), scan_line(&scan)),
        )
        .unwrap();
        let back = read_scan_log(&p).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0], scan);
    }

    #[test]
    fn scan_parse_errors_name_the_line() {
        let p = tmp("bad_scans.txt");
        write_text(&p, "0 0 0.1 10 1 1 1\n0.1 0 0.1 10 1 x 1\n").unwrap();
        let e = read_scan_log(&p).unwrap_err().to_string();
        assert!(e.contains(":2:"), "{e}");
    }

    #[test]
    fn world_and_trajectory_round_trip() {
        let w = World::new(vec![
            Segment::new(0.0, 0.0, 3.5, 0.0),
            Segment::new(3.5, 0.0, 3.5, 2.25),
        ])
        .unwrap();
        let p = tmp("w.world");
        write_world(&p, &w).unwrap();
        assert_eq!(read_world(&p).unwrap(), w);

        let s = TrajectoryScript::from_route(
            &[(0.5, 0.5), (3.0, 0.5), (3.0, 2.0)],
            0.0,
            0.3,
            0.7,
            10.0,
        )
        .unwrap();
        let p = tmp("t.traj");
        write_trajectory(&p, &s).unwrap();
        assert_eq!(read_trajectory(&p).unwrap(), s);
    }

    #[test]
    fn route_form_expands_like_from_route() {
        let p = tmp("route.traj");
        write_text(&p, "scan_rate 5\nroute 0.3 0.7 0.0  # speed turn_rate heading\n0.5 0.5\n3.0 0.5\n3.0 2.0\n").unwrap();
        let want =
            TrajectoryScript::from_route(&[(0.5, 0.5), (3.0, 0.5), (3.0, 2.0)], 0.0, 0.3, 0.7, 5.0)
                .unwrap();
        assert_eq!(read_trajectory(&p).unwrap(), want);
        write_text(&p, "scan_rate 5\nroute 0.3 0.7 0.0\n0.5 0.5 1\n").unwrap();
        assert!(read_trajectory(&p).unwrap_err().to_string().contains(":3:"));
    }

    #[test]
    fn trajectory_without_rate_is_rejected() {
        let p = tmp("norate.traj");
        write_text(&p, "0 0 0 0\n1 1 0 0\n").unwrap();
        assert!(read_trajectory(&p)
            .unwrap_err()
            .to_string()
            .contains("scan_rate"));
    }

    #[test]
    fn report_and_summary_round_trip() {
        let r = ReportRecord {
            t: 1.5,
            err_x: f64::NAN,
            err_y: f64::NAN,
            err: f64::NAN,
            node_count: 3,
            edge_count: 2,
            loop_closed: true,
            active_view: 7,
        };
        assert_eq!(r.line(), "1.5 nan nan nan 3 2 1 7");
        let p = tmp("report.txt");
        write_text(&p, &format!("{}\n", r.line())).unwrap();
        let back = read_report_log(&p).unwrap()[0];
        assert!(back.err.is_nan() && back.loop_closed && back.active_view == 7);

        let s = Summary {
            mean_err: 0.25,
            min_err: 0.0,
            max_err: 1.0 / 3.0,
            rmse: 0.3,
            n_steps: 10,
            n_nodes: 4,
            n_edges: 4,
            n_views: 5,
        };
        let p = tmp("summary.txt");
        write_summary(&p, &s).unwrap();
        assert_eq!(read_summary(&p).unwrap(), s);
    }

    #[test]
    fn map_export_round_trip() {
        let mut m = ExperienceMap::new([1, 2, 3], 0);
        m.create_experience([0; 3], 1, PoseDelta::new(0.7, -0.1, 0.2), 2.5)
            .unwrap();
        m.close_loop(0, PoseDelta::new(-0.7, 0.1, -0.2), 1.0)
            .unwrap();
        let (np, ep) = (tmp("nodes.txt"), tmp("edges.txt"));
        write_map(&np, &ep, &m).unwrap();
        let nodes = read_nodes(&np).unwrap();
        assert_eq!(nodes.len(), 2);
        assert_eq!(nodes[1].pose, m.nodes()[1].pose);
        assert_eq!(read_edges(&ep).unwrap(), m.edges());
    }

    #[test]
    fn activity_snapshot_round_trip() {
        let dims = [3, 2, 2];
        let values: Vec<f64> = (0..12).map(|k| k as f64 / 7.0).collect();
        let p = tmp("cells.txt");
        write_activity(&p, dims, &values).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert_eq!(read_activity(&p).unwrap(), (dims, values));
    }
}
