use std::fs;
use std::path::{Path, PathBuf};
use std::sync::mpsc::sync_channel;
use std::thread;

use anyhow::{bail, Context, Result};
use bioslam::config::SlamConfig;
use bioslam::io::{
    read_scan_log, read_trajectory, read_truth_log, read_world, scan_line, truth_line,
    write_activity, write_map, write_summary, LineWriter,
};
use bioslam::pipeline::{Frame, Runner};
use bioslam::sim::{frames, SimFrame};

// frames in flight between the raycaster and the pipeline
const QUEUE: usize = 64;

fn load_config(path: Option<&Path>) -> Result<SlamConfig> {
    Ok(match path {
        Some(p) => SlamConfig::load(p)?,
        None => SlamConfig::default(),
    })
}

/// Streams frames through the pipeline into the output directory.
struct Outputs {
    dir: PathBuf,
    runner: Runner,
    report: LineWriter,
    views: LineWriter,
}

impl Outputs {
    fn new(dir: &Path, cfg: SlamConfig) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            runner: Runner::new(cfg)?,
            report: LineWriter::create(&dir.join("report.txt"))?,
            views: LineWriter::create(&dir.join("views.txt"))?,
        })
    }

    fn push(&mut self, frame: &Frame) -> Result<()> {
        let (rep, rec) = self.runner.push(frame)?;
        self.report.line(&rec.line())?;
        self.views.line(&rep.view_record().line())?;
        Ok(())
    }

    fn finish(self) -> Result<()> {
        let Outputs {
            dir,
            runner,
            report,
            views,
        } = self;
        report.finish()?;
        views.finish()?;
        let slam = &runner.slam;
        let Some(map) = slam.experience_map() else {
            bail!("no frames to process");
        };
        write_map(&dir.join("nodes.txt"), &dir.join("edges.txt"), map)?;
        write_summary(&dir.join("summary.txt"), &runner.summary())?;
        slam.odometry()
            .map()
            .write_pgm(&dir.join("local_map.pgm"))?;
        let cells = slam.pose_cells();
        write_activity(&dir.join("pose_cells.txt"), cells.dims(), cells.activity())?;
        Ok(())
    }
}

pub fn simulate(
    world: &Path,
    trajectory: &Path,
    config: Option<&Path>,
    out: &Path,
    seed: Option<u64>,
) -> Result<()> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let world = read_world(world)?;
    let script = read_trajectory(trajectory)?;
    let lidar = cfg.lidar;
    let source = frames(&world, &lidar, &script, cfg.seed)?;

    let mut outputs = Outputs::new(out, cfg)?;
    let mut scans = LineWriter::create(&out.join("scans.txt"))?;
    let mut truth = LineWriter::create(&out.join("truth.txt"))?;
    thread::scope(|s| -> Result<()> {
        let (tx, rx) = sync_channel::<bioslam::Result<SimFrame>>(QUEUE);
        s.spawn(move || {
            for f in source {
                // the receiver is gone once the pipeline has failed
                if tx.send(f).is_err() {
                    break;
                }
            }
        });
        for f in rx {
            let f = f?;
            scans.line(&scan_line(&f.scan))?;
            truth.line(&truth_line(f.t, &f.truth_pose))?;
            outputs.push(&f.into())?;
        }
        Ok(())
    })?;
    scans.finish()?;
    truth.finish()?;
    outputs.finish()
}

pub fn replay(
    scanlog: &Path,
    truth: Option<&Path>,
    config: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let cfg = load_config(config)?;
    let scans = read_scan_log(scanlog)?;
    if scans.is_empty() {
        bail!("{}: no scans", scanlog.display());
    }
    let truth = match truth {
        Some(p) => {
            let t = read_truth_log(p)?;
            if t.len() != scans.len() {
                bail!(
                    "{}: {} truth records for {} scans",
                    p.display(),
                    t.len(),
                    scans.len()
                );
            }
            for (k, ((tt, _), scan)) in t.iter().zip(&scans).enumerate() {
                if (tt - scan.timestamp).abs() > 1e-9 {
                    bail!(
                        "{}: record {} has t={} but scan {} has t={}",
                        p.display(),
                        k + 1,
                        tt,
                        k + 1,
                        scan.timestamp
                    );
                }
            }
            Some(t)
        }
        None => None,
    };
    let mut outputs = Outputs::new(out, cfg)?;
    for (k, scan) in scans.into_iter().enumerate() {
        let frame = Frame {
            scan,
            truth: truth.as_ref().map(|t| t[k].1),
        };
        outputs.push(&frame)?;
    }
    outputs.finish()
}
