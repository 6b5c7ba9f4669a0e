//! The particle filter: prediction, correction, reseed, quality and
//! pose estimation.

mod config;
mod localizer;
mod scheduler;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::geom::{pose_statistics, Covariance6, GeomError, Pose6D, RigidTransform};
use crate::sensor::{log_probability_floor, log_score_distances, measured_distance, theoretic_from_sensor, RangeScan, Reading, SensorSpec};
use crate::worldmap::{ElevationGrid, OccupancyOctree};

pub use config::MclConfig;
pub use localizer::{Localizer, PhaseTimings, StepReport};
pub use scheduler::{DuePhases, StepScheduler};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MclError {
    #[error("empty particle set")]
    EmptyParticleSet,
    #[error("seed off map")]
    SeedOffMap,
    #[error("unknown sensor '{0}'")]
    UnknownSensor(String),
    #[error("invalid filter configuration: {0}")]
    InvalidConfig(String),
}

impl From<GeomError> for MclError {
    fn from(e: GeomError) -> Self {
        match e {
            GeomError::EmptyParticleSet => MclError::EmptyParticleSet,
            other => MclError::InvalidConfig(other.to_string()),
        }
    }
}

/// One pose hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub pose: Pose6D,
    /// Normalized weight.
    pub weight: f64,
    /// Natural log of the normalized weight; stays finite where `weight`
    /// underflows to zero.
    pub log_weight: f64,
    /// Readings consistent with the map since the last reseed.
    pub hits: u32,
    /// Readings evaluated since the last reseed.
    pub possible_hits: u32,
    /// Set when the last prediction left known terrain.
    pub off_map: bool,
}

impl Particle {
    pub fn new(pose: Pose6D, weight: f64) -> Self {
        Self {
            pose,
            weight,
            log_weight: weight.ln(),
            hits: 0,
            possible_hits: 0,
            off_map: false,
        }
    }

    pub fn hit_ratio(&self) -> f64 {
        if self.possible_hits == 0 {
            0.0
        } else {
            self.hits as f64 / self.possible_hits as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParticleSet {
    pub particles: Vec<Particle>,
    /// Number of reseeds applied.
    pub generation: u64,
}

impl ParticleSet {
    /// Wraps particles, resetting them to uniform weights.
    pub fn uniform(poses: impl IntoIterator<Item = Pose6D>) -> Self {
        let mut particles: Vec<Particle> = poses.into_iter().map(|p| Particle::new(p, 1.0)).collect();
        let w = 1.0 / particles.len().max(1) as f64;
        for p in &mut particles {
            p.weight = w;
            p.log_weight = w.ln();
        }
        Self {
            particles,
            generation: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }

    /// Rescales log-weights so the linear weights sum to one.
    pub fn normalize(&mut self) {
        normalize_log_weights(&mut self.particles);
    }
}

fn normalize_log_weights(particles: &mut [Particle]) {
    if particles.is_empty() {
        return;
    }
    let max = particles.iter().map(|p| p.log_weight).fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        let w = 1.0 / particles.len() as f64;
        for p in particles.iter_mut() {
            p.weight = w;
            p.log_weight = w.ln();
        }
        return;
    }
    let sum: f64 = particles.iter().map(|p| (p.log_weight - max).exp()).sum();
    let log_norm = max + sum.ln();
    for p in particles.iter_mut() {
        p.log_weight -= log_norm;
        p.weight = p.log_weight.exp();
    }
}

/// Filter state summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeliefEstimate {
    pub mean: Pose6D,
    pub covariance: Covariance6,
    pub quality: f64,
    /// Product of the covariance diagonal.
    pub uncertainty_scalar: f64,
    /// Sum of the covariance diagonal.
    pub uncertainty_sum: f64,
}

fn sample_normal<R: Rng + ?Sized>(rng: &mut R, std_dev: f64) -> f64 {
    if std_dev == 0.0 {
        0.0
    } else {
        let z: f64 = StandardNormal.sample(rng);
        z * std_dev
    }
}

/// Draws `config.max_particles` particles around `initial`, snapped to the
/// terrain, with uniform weights.
pub fn initialize<R: Rng + ?Sized>(
    config: &MclConfig,
    initial: Pose6D,
    spread: [f64; 6],
    grid: &ElevationGrid,
    rng: &mut R,
) -> Result<ParticleSet, MclError> {
    config.validate()?;
    if grid.elevation_at(initial.x, initial.y).is_none() {
        return Err(MclError::SeedOffMap);
    }
    let poses: Vec<Pose6D> = (0..config.max_particles)
        .map(|_| {
            let mut v = initial.to_array();
            for (x, s) in v.iter_mut().zip(spread.iter()) {
                *x += sample_normal(rng, *s);
            }
            Pose6D::from_array(v)
        })
        .collect();
    let mut set = ParticleSet::uniform(poses);
    for p in &mut set.particles {
        let fallback = p.pose.z;
        snap_to_terrain(p, grid, config.use_imu_orientation.then_some((initial.roll, initial.pitch)), fallback);
    }
    Ok(set)
}

/// Sets z (and roll/pitch) from the grid; marks the particle off-map and
/// keeps `fallback_z` when the terrain under it is unknown.
fn snap_to_terrain(p: &mut Particle, grid: &ElevationGrid, imu: Option<(f64, f64)>, fallback_z: f64) {
    match grid.elevation_at(p.pose.x, p.pose.y) {
        Some(z) => {
            p.pose.z = z;
            p.off_map = false;
            let attitude = imu.or_else(|| grid.attitude_at(p.pose.x, p.pose.y, p.pose.yaw));
            if let Some((roll, pitch)) = attitude {
                p.pose = Pose6D::new(p.pose.x, p.pose.y, z, roll, pitch, p.pose.yaw);
            }
        }
        None => {
            p.pose.z = fallback_z;
            p.off_map = true;
        }
    }
}

/// Moves every particle by the odometry displacement plus noise, then snaps
/// it to the terrain.
///
/// Noise is drawn independently for each of the six displacement
/// components, with standard deviation `odom_noise[i]` times the
/// translation length (components 0-2) or the rotation angle (3-5).
pub fn predict<R: Rng + ?Sized>(
    ps: &mut ParticleSet,
    odom_prev: &RigidTransform,
    odom_curr: &RigidTransform,
    grid: &ElevationGrid,
    imu_orientation: Option<(f64, f64)>,
    config: &MclConfig,
    rng: &mut R,
) {
    let u = RigidTransform::relative_motion(odom_prev, odom_curr);
    let base = u.to_pose().to_array();
    let translation = u.translation().norm();
    let rotation = u.rotation_angle();
    let scale = [translation, translation, translation, rotation, rotation, rotation];
    let imu = if config.use_imu_orientation { imu_orientation } else { None };
    for p in &mut ps.particles {
        let mut d = base;
        for i in 0..6 {
            d[i] += sample_normal(rng, config.odom_noise[i] * scale[i]);
        }
        let step = Pose6D::from_array(d).to_transform();
        let previous_z = p.pose.z;
        p.pose = p.pose.to_transform().compose(&step).to_pose();
        snap_to_terrain(p, grid, imu, previous_z);
    }
}

struct PreparedBeam<'a> {
    sensor: usize,
    reading: &'a Reading,
    measured: f64,
}

/// Updates weights and hit counters from range scans, then normalizes.
///
/// Beam likelihoods multiply in log space. Particles flagged off-map score
/// every beam at the three-sigma floor without ray casting.
pub fn correct(
    ps: &mut ParticleSet,
    scans: &[RangeScan],
    specs: &[SensorSpec],
    oc: &OccupancyOctree,
    config: &MclConfig,
) -> Result<(), MclError> {
    let mut beams = Vec::new();
    for scan in scans {
        let sensor = specs
            .iter()
            .position(|s| s.id == scan.sensor_id)
            .ok_or_else(|| MclError::UnknownSensor(scan.sensor_id.clone()))?;
        for reading in scan.decimated(specs[sensor].decimation) {
            beams.push(PreparedBeam {
                sensor,
                reading,
                measured: measured_distance(reading),
            });
        }
    }
    let thresholds: Vec<f64> = specs
        .iter()
        .map(|s| config.hit_threshold.unwrap_or_else(|| s.default_hit_threshold()))
        .collect();
    let floors: Vec<f64> = specs.iter().map(|s| log_probability_floor(s.sigma)).collect();

    let scored: Vec<(f64, u32)> = ps
        .particles
        .par_iter()
        .map(|p| {
            if p.off_map {
                return (beams.iter().map(|b| floors[b.sensor]).sum(), 0);
            }
            let body = p.pose.to_transform();
            let sensor_poses: Vec<RigidTransform> = specs.iter().map(|s| body.compose(&s.extrinsic)).collect();
            let mut log_likelihood = 0.0;
            let mut hits = 0u32;
            for b in &beams {
                let spec = &specs[b.sensor];
                let theoretic = theoretic_from_sensor(&sensor_poses[b.sensor], b.reading, spec.max_range, oc);
                let (lp, hit) = log_score_distances(b.measured, theoretic, spec, thresholds[b.sensor]);
                log_likelihood += lp;
                hits += hit as u32;
            }
            (log_likelihood, hits)
        })
        .collect();
    // A likelihood shared by every particle cancels in normalization; skip
    // the arithmetic so such updates leave weights bit-for-bit unchanged.
    let informative = scored.first().is_some_and(|(first, _)| scored.iter().any(|(l, _)| l != first));
    for (p, (log_likelihood, hits)) in ps.particles.iter_mut().zip(scored) {
        if informative {
            p.log_weight += log_likelihood;
        }
        p.hits += hits;
        p.possible_hits += beams.len() as u32;
    }
    if informative || (ps.weight_sum() - 1.0).abs() > 1e-12 {
        ps.normalize();
    }
    Ok(())
}

/// Mean hit ratio over particles; particles with no evaluated readings
/// count as zero.
pub fn quality(ps: &ParticleSet) -> Result<f64, MclError> {
    if ps.is_empty() {
        return Err(MclError::EmptyParticleSet);
    }
    Ok(ps.particles.iter().map(Particle::hit_ratio).sum::<f64>() / ps.len() as f64)
}

/// Replaces the lowest-weighted particles with jittered clones of the best
/// ones and adapts the particle count.
///
/// `uncertainty` is compared with the grow/shrink thresholds; the driver
/// passes the covariance diagonal sum.
pub fn reseed<R: Rng + ?Sized>(ps: &mut ParticleSet, config: &MclConfig, uncertainty: f64, rng: &mut R) {
    if ps.is_empty() {
        return;
    }
    sort_by_weight(&mut ps.particles);
    let n = ps.len();
    let winners = ((config.winners_pct * n as f64).round() as usize).clamp(1, n);

    let winner_quality = ps.particles[..winners].iter().map(Particle::hit_ratio).sum::<f64>() / winners as f64;
    let widen = config.recovery_quality > 0.0 && winner_quality < config.recovery_quality;
    let jitter_scale = if widen { config.recovery_jitter_scale } else { 1.0 };
    let jitter: Vec<f64> = config.reseed_jitter.iter().map(|s| s * jitter_scale).collect();
    let losers = ((config.losers_pct * n as f64).round() as usize).min(n - winners);
    ps.particles.truncate(n - losers);

    let pool: Vec<Particle> = ps.particles[..winners].to_vec();
    let selector = Normal::new(0.0, winners as f64 / 2.0).expect("positive std-dev");
    let clone_winner = |rng: &mut R| {
        let g: f64 = selector.sample(rng);
        let idx = (g.round().abs() as usize).min(winners - 1);
        let mut p = pool[idx];
        let mut v = p.pose.to_array();
        for (x, s) in v.iter_mut().zip(jitter.iter()) {
            *x += sample_normal(rng, *s);
        }
        p.pose = Pose6D::from_array(v);
        p
    };
    for _ in 0..losers {
        let p = clone_winner(rng);
        ps.particles.push(p);
    }

    let step = ((config.count_step * n as f64).ceil() as usize).max(1);
    let mut target = n;
    if uncertainty > config.grow_threshold {
        target = (n + step).min(config.max_particles);
    } else if uncertainty < config.shrink_threshold {
        target = n.saturating_sub(step).max(config.min_particles);
    }
    let target = target.clamp(config.min_particles, config.max_particles);
    while ps.particles.len() < target {
        let p = clone_winner(rng);
        ps.particles.push(p);
    }
    if ps.particles.len() > target {
        sort_by_weight(&mut ps.particles);
        ps.particles.truncate(target);
    }

    for p in &mut ps.particles {
        p.hits = 0;
        p.possible_hits = 0;
    }
    ps.normalize();
    ps.generation += 1;
}

/// Stable descending sort on log-weight.
fn sort_by_weight(particles: &mut [Particle]) {
    particles.sort_by(|a, b| b.log_weight.partial_cmp(&a.log_weight).unwrap_or(std::cmp::Ordering::Equal));
}

pub fn estimate(ps: &ParticleSet) -> Result<BeliefEstimate, MclError> {
    if ps.is_empty() {
        return Err(MclError::EmptyParticleSet);
    }
    let poses: Vec<Pose6D> = ps.particles.iter().map(|p| p.pose).collect();
    let weights: Vec<f64> = ps.particles.iter().map(|p| p.weight).collect();
    let (mean, covariance) = pose_statistics(&poses, &weights)?;
    Ok(BeliefEstimate {
        mean,
        covariance,
        quality: quality(ps)?,
        uncertainty_scalar: covariance.diagonal_product(),
        uncertainty_sum: covariance.diagonal_sum(),
    })
}
