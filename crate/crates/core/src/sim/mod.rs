//! Synthetic worlds, trajectories and sensor data for testing the filter
//! without a robot, plus a brute-force ray-cast oracle.

mod oracle;
mod run;
mod trajectory;
mod world;

use thiserror::Error;

pub use oracle::{oracle_cast_ray, oracle_cast_ray_voxel};
pub use run::{noisy_displacement, open_loop_poses, simulate_run, simulate_scan, BeamPattern, GroundTruthLog, SimSensor, SimTick};
pub use trajectory::{figure_eight, kidnap_route, standard_route, RouteBuilder, Teleport, TrajectorySpec, Waypoint};
pub use world::{generate_world, random_world, standard_world, Bounds, Direction, Primitive, WorldSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("empty world: no primitives")]
    EmptyWorld,
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("waypoint off terrain at t={t:.3} ({x:.3}, {y:.3})")]
    OffTerrain { t: f64, x: f64, y: f64 },
}
