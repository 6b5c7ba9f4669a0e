use terramcl::config::RunConfig;
use terramcl::eval::replay;
use terramcl::geom::{Pose6D, RigidTransform};
use terramcl::log::{format_log, records_from_run};
use terramcl::sensor::SensorSpec;
use terramcl::sim::{
    generate_world, open_loop_poses, simulate_run, standard_route, standard_world, BeamPattern, SimError, SimSensor,
    TrajectorySpec, Waypoint,
};
use terramcl::worldmap::{build_gridmap, build_octree, ElevationGrid, GridParams, OccupancyOctree};

fn maps() -> (OccupancyOctree, ElevationGrid) {
    let oc = build_octree(&generate_world(&standard_world(1)).unwrap(), 0.1).unwrap();
    let grid = build_gridmap(&oc, Pose6D::new(4.0, 7.0, 0.0, 0.0, 0.0, 0.0), GridParams::default()).unwrap();
    (oc, grid)
}

fn sensors(noise: f64) -> Vec<SimSensor> {
    vec![
        SimSensor {
            spec: SensorSpec::new("lidar2d", RigidTransform::from_translation(0.0, 0.0, 0.3), 0.03, 10.0, 30).unwrap(),
            pattern: BeamPattern::lidar_2d(),
            noise,
        },
        SimSensor {
            spec: SensorSpec::new("lidar3d", RigidTransform::from_translation(0.0, 0.0, 0.6), 0.03, 10.0, 23).unwrap(),
            pattern: BeamPattern::Rings {
                rings: 16,
                min_deg: -15.0,
                max_deg: 15.0,
                azimuths: 36,
            },
            noise,
        },
    ]
}

fn config(sensors: Vec<SimSensor>) -> RunConfig {
    let mut cfg = RunConfig {
        sensors,
        ..RunConfig::default()
    };
    let m = &mut cfg.mcl;
    m.min_particles = 100;
    m.max_particles = 400;
    m.prediction_rate = 10.0;
    m.correction_rate = 10.0;
    m.reseed_rate = 10.0;
    m.reseed_jitter = [0.02, 0.02, 0.0, 0.0, 0.0, 0.008];
    cfg
}

fn parked(hold: f64) -> TrajectorySpec {
    TrajectorySpec {
        waypoints: vec![Waypoint { x: 4.0, y: 7.0, yaw: 0.3 }],
        speed: 0.5,
        turn_rate: 0.5,
        rate: 10.0,
        hold,
        checkpoint_every: 0.0,
        teleport: None,
    }
}

#[test]
fn parked_robot_sees_identity_odometry_and_repeated_scans() {
    let (oc, grid) = maps();
    let log = simulate_run(&oc, &grid, &parked(2.0), &sensors(0.0), [0.0; 6], 3).unwrap();
    assert_eq!(log.ticks.len(), 21);
    let first = &log.ticks[0];
    for tick in &log.ticks {
        assert_eq!(tick.odom, RigidTransform::identity());
        assert_eq!(tick.truth, first.truth);
        for (a, b) in tick.scans.iter().zip(&first.scans) {
            assert_eq!(a.readings, b.readings);
        }
    }
}

#[test]
fn truth_follows_the_terrain_and_time_increases() {
    let (oc, grid) = maps();
    let log = simulate_run(&oc, &grid, &standard_route(), &[], [0.05, 0.05, 0.0, 0.0, 0.0, 0.05], 1).unwrap();
    assert_eq!(log.ticks.len(), standard_route().tick_count());
    let mut climbed = false;
    for w in log.ticks.windows(2) {
        assert!(w[1].t > w[0].t);
    }
    for tick in &log.ticks {
        let z = grid.elevation_at(tick.truth.x, tick.truth.y).unwrap();
        assert!((tick.truth.z - z).abs() < 1e-6);
        climbed |= z > 0.45;
    }
    assert!(climbed, "the route should cross the raised platform");
}

#[test]
fn same_seed_same_log() {
    let (oc, grid) = maps();
    let run = |seed| {
        let log = simulate_run(&oc, &grid, &parked(1.0), &sensors(0.03), [0.05; 6], seed).unwrap();
        format_log(&records_from_run(&log))
    };
    assert_eq!(run(9), run(9));
    assert_ne!(run(9), run(10));
}

#[test]
fn waypoint_off_terrain_is_rejected() {
    let (oc, grid) = maps();
    let mut traj = parked(0.0);
    traj.waypoints.push(Waypoint { x: 40.0, y: 7.0, yaw: 0.0 });
    let err = simulate_run(&oc, &grid, &traj, &[], [0.0; 6], 0).unwrap_err();
    assert!(matches!(err, SimError::OffTerrain { .. }), "{err}");
}

#[test]
fn noiseless_replay_tracks_within_a_voxel() {
    let (oc, grid) = maps();
    let log = simulate_run(&oc, &grid, &standard_route(), &sensors(0.0), [0.0; 6], 0).unwrap();
    let mut cfg = config(sensors(0.0));
    cfg.mcl.odom_noise = [0.0; 6];
    cfg.mcl.initial_spread = [0.0; 6];
    let out = replay(&records_from_run(&log), &oc, &grid, &cfg, 0, false).unwrap();
    assert!(out.rows.len() > 1000);
    let worst = out.rows.iter().map(|r| r.translation_error.unwrap()).fold(0.0, f64::max);
    assert!(worst < 0.1, "worst translation error {worst}");
}

#[test]
fn filter_beats_dead_reckoning() {
    let (oc, grid) = maps();
    let log = simulate_run(&oc, &grid, &standard_route(), &sensors(0.03), [0.05, 0.05, 0.0, 0.0, 0.0, 0.05], 4).unwrap();
    let open = open_loop_poses(&log);
    let last = log.ticks.last().unwrap();
    let drift = (open.last().unwrap().position() - last.truth.position()).norm();
    let out = replay(&records_from_run(&log), &oc, &grid, &config(sensors(0.03)), 4, false).unwrap();
    let filter = out.rows.last().unwrap().translation_error.unwrap();
    assert!(drift > 5.0 * filter, "open loop {drift} vs filter {filter}");
}
