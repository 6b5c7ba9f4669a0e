use std::collections::BTreeMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geom::{Pose6D, RigidTransform};
use crate::sensor::{RangeScan, SensorSpec};
use crate::worldmap::{ElevationGrid, OccupancyOctree};

use super::{correct, estimate, initialize, predict, reseed, BeliefEstimate, DuePhases, MclConfig, MclError, ParticleSet, StepScheduler};

/// Wall-clock microseconds spent in each phase during one step; `None` when
/// the phase did not run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseTimings {
    pub predict_us: Option<f64>,
    pub correct_us: Option<f64>,
    pub reseed_us: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub t: f64,
    pub phases: DuePhases,
    /// Estimate taken right after correction, before reseed; present only on
    /// correction steps.
    pub estimate: Option<BeliefEstimate>,
    pub particle_count: usize,
    pub timings: PhaseTimings,
}

/// Runs the three filter phases on their own schedules over a stream of
/// odometry and scans.
///
/// Odometry accumulates between predictions, and only the most recent scan
/// of each sensor is used at a correction.
pub struct Localizer<'m> {
    config: MclConfig,
    specs: Vec<SensorSpec>,
    octree: &'m OccupancyOctree,
    grid: &'m ElevationGrid,
    particles: ParticleSet,
    scheduler: StepScheduler,
    rng: ChaCha8Rng,
    predicted_odom: Option<RigidTransform>,
    latest_odom: Option<RigidTransform>,
    pending: BTreeMap<String, RangeScan>,
}

impl<'m> Localizer<'m> {
    pub fn new(
        config: MclConfig,
        specs: Vec<SensorSpec>,
        octree: &'m OccupancyOctree,
        grid: &'m ElevationGrid,
        initial: Pose6D,
        seed: u64,
    ) -> Result<Self, MclError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let particles = initialize(&config, initial, config.initial_spread, grid, &mut rng)?;
        Ok(Self {
            scheduler: StepScheduler::new(&config),
            config,
            specs,
            octree,
            grid,
            particles,
            rng,
            predicted_odom: None,
            latest_odom: None,
            pending: BTreeMap::new(),
        })
    }

    pub fn particles(&self) -> &ParticleSet {
        &self.particles
    }

    pub fn config(&self) -> &MclConfig {
        &self.config
    }

    pub fn estimate(&self) -> Result<BeliefEstimate, MclError> {
        estimate(&self.particles)
    }

    pub fn push_odometry(&mut self, odom: RigidTransform) {
        if self.predicted_odom.is_none() {
            self.predicted_odom = Some(odom);
        }
        self.latest_odom = Some(odom);
    }

    pub fn push_scan(&mut self, scan: RangeScan) -> Result<(), MclError> {
        if !self.specs.iter().any(|s| s.id == scan.sensor_id) {
            return Err(MclError::UnknownSensor(scan.sensor_id));
        }
        self.pending.insert(scan.sensor_id.clone(), scan);
        Ok(())
    }

    /// Advances the clock to `t` and runs whichever phases are due.
    pub fn step(&mut self, t: f64, imu_orientation: Option<(f64, f64)>) -> Result<StepReport, MclError> {
        let phases = self.scheduler.due(t);
        let mut timings = PhaseTimings::default();
        let mut belief = None;

        if phases.predict {
            let start = Instant::now();
            if let (Some(prev), Some(curr)) = (self.predicted_odom, self.latest_odom) {
                predict(&mut self.particles, &prev, &curr, self.grid, imu_orientation, &self.config, &mut self.rng);
                self.predicted_odom = Some(curr);
            }
            timings.predict_us = Some(elapsed_us(start));
        }
        if phases.correct {
            let start = Instant::now();
            let scans: Vec<RangeScan> = std::mem::take(&mut self.pending).into_values().collect();
            correct(&mut self.particles, &scans, &self.specs, self.octree, &self.config)?;
            timings.correct_us = Some(elapsed_us(start));
            belief = Some(estimate(&self.particles)?);
        }
        if phases.reseed {
            let start = Instant::now();
            let uncertainty = match belief {
                Some(b) => b.uncertainty_sum,
                None => estimate(&self.particles)?.uncertainty_sum,
            };
            reseed(&mut self.particles, &self.config, uncertainty, &mut self.rng);
            timings.reseed_us = Some(elapsed_us(start));
        }
        Ok(StepReport {
            t,
            phases,
            estimate: belief,
            particle_count: self.particles.len(),
            timings,
        })
    }
}

fn elapsed_us(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e6
}
