use bioslam::config::SlamConfig;
use bioslam::pipeline::run;
use bioslam::sim::{build_maze_world, frames, LidarModel, MazeLayout, Segment, TrajectoryScript};

const LAPS: usize = 3;

#[test]
fn revisiting_a_loop_closes_it_and_stops_growing_the_map() {
    // no rotational symmetry: a scan from one side must not pass for the other
    let world = build_maze_world(
        &MazeLayout::room(8.0, 6.0)
            .with_box(3.0, 2.3, 4.6, 3.6)
            .with_box(0.3, 0.3, 1.2, 0.9)
            .with_box(6.6, 4.0, 7.6, 4.4)
            .with_wall(Segment::new(3.0, 6.0, 3.0, 5.3))
            .with_wall(Segment::new(8.0, 2.0, 7.4, 2.0)),
    )
    .unwrap();
    let corners = [(2.0, 1.5), (6.0, 1.5), (6.0, 4.5), (2.0, 4.5)];
    let mut route = vec![corners[0]];
    for _ in 0..LAPS {
        route.extend(corners[1..].iter().chain(&corners[..1]));
    }
    let script = TrajectoryScript::from_route(&route, 0.0, 0.3, 0.8, 10.0).unwrap();
    let out = run(
        frames(&world, &LidarModel::default(), &script, 5).unwrap(),
        SlamConfig::default(),
    )
    .unwrap();

    // every lap takes the same time
    let lap = (script.end_time() - script.start_time()) / LAPS as f64;
    let at = |t: f64| {
        out.reports
            .iter()
            .position(|r| r.t >= t)
            .unwrap_or(out.reports.len() - 1)
    };
    let (lap2, lap3, end) = (at(lap), at(2.0 * lap), out.reports.len() - 1);

    let first_closure = out
        .reports
        .iter()
        .position(|r| r.loop_closed)
        .expect("no loop closure");
    assert!(
        first_closure >= lap2 && first_closure < lap2 + 100,
        "first closure at step {first_closure}, second lap starts at {lap2}"
    );
    let grown = |a: usize, b: usize| out.reports[b].node_count - out.reports[a].node_count;
    let first_lap = out.reports[lap2].node_count;
    assert!(
        grown(lap3, end) * 10 <= first_lap,
        "third lap added {} nodes, first lap {first_lap}",
        grown(lap3, end)
    );
    assert!(
        out.summary.mean_err < 0.2,
        "mean error {}",
        out.summary.mean_err
    );
}
