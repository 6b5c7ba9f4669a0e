use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::geom::{Pose6D, RigidTransform};
use crate::sensor::{RangeScan, Reading, SensorSpec};
use crate::worldmap::{CellOccupancy, ElevationGrid, OccupancyOctree};

use super::{SimError, TrajectorySpec};

/// Beam directions of a simulated range sensor, in the sensor frame.
#[derive(Debug, Clone, PartialEq)]
pub enum BeamPattern {
    /// `beams` directions evenly spread over 360 degrees in the xy-plane.
    Planar { beams: usize },
    /// `rings` elevation angles between `min_deg` and `max_deg`, each with
    /// `azimuths` evenly spread directions.
    Rings { rings: usize, min_deg: f64, max_deg: f64, azimuths: usize },
}

impl BeamPattern {
    pub fn lidar_2d() -> Self {
        BeamPattern::Planar { beams: 360 }
    }

    pub fn lidar_3d() -> Self {
        BeamPattern::Rings {
            rings: 16,
            min_deg: -15.0,
            max_deg: 15.0,
            azimuths: 360,
        }
    }

    pub fn directions(&self) -> Vec<Vector3<f64>> {
        match *self {
            BeamPattern::Planar { beams } => (0..beams)
                .map(|i| {
                    let a = std::f64::consts::TAU * i as f64 / beams as f64;
                    Vector3::new(a.cos(), a.sin(), 0.0)
                })
                .collect(),
            BeamPattern::Rings { rings, min_deg, max_deg, azimuths } => {
                let mut dirs = Vec::with_capacity(rings * azimuths);
                for j in 0..rings {
                    let f = if rings > 1 { j as f64 / (rings - 1) as f64 } else { 0.5 };
                    let el = (min_deg + f * (max_deg - min_deg)).to_radians();
                    for i in 0..azimuths {
                        let a = std::f64::consts::TAU * i as f64 / azimuths as f64;
                        dirs.push(Vector3::new(el.cos() * a.cos(), el.cos() * a.sin(), el.sin()));
                    }
                }
                dirs
            }
        }
    }
}

/// A sensor as the simulator sees it: the filter-facing spec, its beam
/// pattern and the range noise actually applied.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSensor {
    pub spec: SensorSpec,
    pub pattern: BeamPattern,
    pub noise: f64,
}

/// One simulated tick.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTick {
    pub t: f64,
    pub truth: Pose6D,
    /// Dead-reckoned base pose in the odometry frame.
    pub odom: RigidTransform,
    pub scans: Vec<RangeScan>,
    pub checkpoint: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruthLog {
    pub ticks: Vec<SimTick>,
}

/// True 6-DoF pose on the terrain under a planar pose.
fn terrain_pose(grid: &ElevationGrid, t: f64, x: f64, y: f64, yaw: f64) -> Result<Pose6D, SimError> {
    let off = || SimError::OffTerrain { t, x, y };
    if grid.occupancy_at(x, y) != CellOccupancy::Free {
        return Err(off());
    }
    let z = grid.elevation_at(x, y).ok_or_else(off)?;
    let (roll, pitch) = grid.attitude_at(x, y, yaw).ok_or_else(off)?;
    Ok(Pose6D::new(x, y, z, roll, pitch, yaw))
}

/// Casts every beam of `sensor` from the true sensor pose and adds range
/// noise. Beams with no return within max range come back infinite.
pub fn simulate_scan(
    oc: &OccupancyOctree,
    truth: &Pose6D,
    sensor: &SimSensor,
    t: f64,
    rng: &mut ChaCha8Rng,
) -> RangeScan {
    let pose = truth.to_transform().compose(&sensor.spec.extrinsic);
    let origin = pose.translation();
    let max_range = sensor.spec.max_range;
    let dirs = sensor.pattern.directions();
    let ranges: Vec<f64> = dirs
        .par_iter()
        .map(|d| oc.cast_ray(&origin, &(origin + pose.transform_vector(d)), max_range))
        .collect();
    let readings = dirs
        .iter()
        .zip(ranges)
        .map(|(d, range)| {
            if !range.is_finite() {
                return Reading::infinite(*d);
            }
            let noisy = if sensor.noise > 0.0 {
                let z: f64 = StandardNormal.sample(rng);
                (range + z * sensor.noise).max(0.0)
            } else {
                range
            };
            if noisy > max_range {
                Reading::infinite(*d)
            } else {
                Reading::Hit(d * noisy)
            }
        })
        .collect();
    RangeScan {
        sensor_id: sensor.spec.id.clone(),
        timestamp: t,
        readings,
    }
}

/// Perturbs a body-frame displacement with the same per-coordinate noise
/// model the filter's prediction assumes.
pub fn noisy_displacement(u: &RigidTransform, noise: &[f64; 6], rng: &mut ChaCha8Rng) -> RigidTransform {
    let translation = u.translation().norm();
    let rotation = u.rotation_angle();
    let scale = [translation, translation, translation, rotation, rotation, rotation];
    let mut d = u.to_pose().to_array();
    for i in 0..6 {
        let sd = noise[i] * scale[i];
        if sd > 0.0 {
            let z: f64 = StandardNormal.sample(rng);
            d[i] += z * sd;
        }
    }
    Pose6D::from_array(d).to_transform()
}

/// Drives the trajectory over the terrain, producing true poses, noisy
/// odometry and noisy scans for every tick.
pub fn simulate_run(
    oc: &OccupancyOctree,
    grid: &ElevationGrid,
    traj: &TrajectorySpec,
    sensors: &[SimSensor],
    odom_noise: [f64; 6],
    seed: u64,
) -> Result<GroundTruthLog, SimError> {
    traj.validate()?;
    for w in &traj.waypoints {
        terrain_pose(grid, 0.0, w.x, w.y, w.yaw)?;
    }
    let mut odom_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scan_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ca9_5eed);
    let mut ticks = Vec::with_capacity(traj.tick_count());
    let mut odom = RigidTransform::identity();
    let mut prev_planned: Option<Pose6D> = None;
    let mut next_checkpoint = 0.0;

    for k in 0..traj.tick_count() {
        let t = k as f64 / traj.rate;
        let w = traj.pose_at(t);
        let planned = terrain_pose(grid, t, w.x, w.y, w.yaw)?;
        let truth = match traj.teleport {
            Some(tp) if t + 1e-9 >= tp.at => terrain_pose(grid, t, w.x + tp.offset[0], w.y + tp.offset[1], w.yaw)?,
            _ => planned,
        };
        // Odometry integrates the planned motion, so teleports stay unseen.
        if let Some(prev) = prev_planned {
            let u = RigidTransform::relative_motion(&prev.to_transform(), &planned.to_transform());
            odom = odom.compose(&noisy_displacement(&u, &odom_noise, &mut odom_rng));
        }
        prev_planned = Some(planned);
        let scans = sensors.iter().map(|s| simulate_scan(oc, &truth, s, t, &mut scan_rng)).collect();
        let checkpoint = traj.checkpoint_every > 0.0 && t + 1e-9 >= next_checkpoint;
        if checkpoint {
            next_checkpoint += traj.checkpoint_every;
        }
        ticks.push(SimTick {
            t,
            truth,
            odom,
            scans,
            checkpoint,
        });
    }
    Ok(GroundTruthLog { ticks })
}

/// Dead-reckoned trajectory: the first true pose composed with odometry.
pub fn open_loop_poses(log: &GroundTruthLog) -> Vec<Pose6D> {
    let Some(first) = log.ticks.first() else {
        return Vec::new();
    };
    let anchor = first.truth.to_transform().compose(&first.odom.inverse());
    log.ticks.iter().map(|tick| anchor.compose(&tick.odom).to_pose()).collect()
}
