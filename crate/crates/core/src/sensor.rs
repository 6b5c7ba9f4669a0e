//! Range sensors and the per-beam Gaussian observation model.

use std::f64::consts::PI;

use nalgebra::Vector3;
use thiserror::Error;

use crate::geom::{Pose6D, RigidTransform};
use crate::worldmap::OccupancyOctree;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensorError {
    #[error("sensor '{id}': {message}")]
    InvalidSpec { id: String, message: String },
}

/// Static description of one range sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorSpec {
    pub id: String,
    /// Base frame to sensor frame.
    pub extrinsic: RigidTransform,
    /// Range precision, meters.
    pub sigma: f64,
    pub max_range: f64,
    /// Keep one reading in `decimation`.
    pub decimation: usize,
}

impl SensorSpec {
    pub fn new(
        id: impl Into<String>,
        extrinsic: RigidTransform,
        sigma: f64,
        max_range: f64,
        decimation: usize,
    ) -> Result<Self, SensorError> {
        let spec = Self {
            id: id.into(),
            extrinsic,
            sigma,
            max_range,
            decimation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SensorError> {
        let fail = |message: &str| {
            Err(SensorError::InvalidSpec {
                id: self.id.clone(),
                message: message.to_string(),
            })
        };
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return fail("sigma must be positive");
        }
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return fail("max_range must be positive");
        }
        if self.decimation == 0 {
            return fail("decimation must be at least 1");
        }
        Ok(())
    }

    /// Hit threshold used when none is configured: two sigma.
    pub fn default_hit_threshold(&self) -> f64 {
        2.0 * self.sigma
    }
}

/// One reading in the sensor frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reading {
    /// Detection at this point.
    Hit(Vector3<f64>),
    /// No return within range, along this unit direction.
    Infinite(Vector3<f64>),
}

impl Reading {
    /// Builds an `Infinite` reading, normalizing the direction.
    pub fn infinite(direction: Vector3<f64>) -> Self {
        Reading::Infinite(direction.normalize())
    }

    pub fn direction(&self) -> Vector3<f64> {
        match self {
            Reading::Hit(p) => {
                let n = p.norm();
                if n > 0.0 {
                    p / n
                } else {
                    Vector3::zeros()
                }
            }
            Reading::Infinite(d) => *d,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Reading::Infinite(_))
    }
}

/// A batch of readings from one sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeScan {
    pub sensor_id: String,
    pub timestamp: f64,
    pub readings: Vec<Reading>,
}

impl RangeScan {
    /// Every `k`-th reading starting with the first.
    pub fn decimated(&self, k: usize) -> impl Iterator<Item = &Reading> {
        self.readings.iter().step_by(k.max(1))
    }
}

/// Outcome of comparing one measured beam with its ray-cast counterpart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamEvaluation {
    pub measured: f64,
    pub theoretic: f64,
    pub probability: f64,
    pub hit: bool,
}

/// Euclidean range of a reading; infinite readings stay infinite.
pub fn measured_distance(reading: &Reading) -> f64 {
    match reading {
        Reading::Hit(p) => p.norm(),
        Reading::Infinite(_) => f64::INFINITY,
    }
}

/// Gaussian density of a range error.
pub fn beam_probability(error: f64, sigma: f64) -> f64 {
    let z = error / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt())
}

/// Lowest per-beam probability: the density at a three-sigma error.
pub fn probability_floor(sigma: f64) -> f64 {
    beam_probability(3.0 * sigma, sigma)
}

pub(crate) fn log_beam_probability(error: f64, sigma: f64) -> f64 {
    let z = (error / sigma).min(3.0);
    -0.5 * z * z - (sigma * (2.0 * PI).sqrt()).ln()
}

pub(crate) fn log_probability_floor(sigma: f64) -> f64 {
    log_beam_probability(3.0 * sigma, sigma)
}

/// Range the reading would have if the sensor sat at `sensor_pose`.
pub fn theoretic_from_sensor(
    sensor_pose: &RigidTransform,
    reading: &Reading,
    max_range: f64,
    oc: &OccupancyOctree,
) -> f64 {
    let origin = sensor_pose.translation();
    let dir = sensor_pose.transform_vector(&reading.direction());
    oc.cast_ray(&origin, &(origin + dir), max_range)
}

/// Ray-casts the reading's beam from the particle's hypothetical sensor pose.
pub fn theoretic_distance(particle_pose: &Pose6D, spec: &SensorSpec, reading: &Reading, oc: &OccupancyOctree) -> f64 {
    let sensor_pose = particle_pose.to_transform().compose(&spec.extrinsic);
    theoretic_from_sensor(&sensor_pose, reading, spec.max_range, oc)
}

/// Scores a measured/theoretic range pair.
///
/// Both infinite: probability 1 and a hit. One infinite: the finite range is
/// compared with `max_range`, never a hit. Both finite: Gaussian density of
/// the error, a hit when the error is below `hit_threshold`. All
/// probabilities are floored at the three-sigma density.
pub fn score_distances(measured: f64, theoretic: f64, spec: &SensorSpec, hit_threshold: f64) -> BeamEvaluation {
    let floor = probability_floor(spec.sigma);
    let (probability, hit) = match (measured.is_finite(), theoretic.is_finite()) {
        (false, false) => (1.0, true),
        (true, true) => {
            let error = (measured - theoretic).abs();
            (beam_probability(error, spec.sigma).max(floor), error < hit_threshold)
        }
        _ => {
            let nearest = measured.min(theoretic).min(spec.max_range);
            let error = (nearest - spec.max_range).abs();
            (beam_probability(error, spec.sigma).max(floor), false)
        }
    };
    BeamEvaluation {
        measured,
        theoretic,
        probability,
        hit,
    }
}

/// Log-space counterpart of [`score_distances`]: `(ln p, hit)`.
pub(crate) fn log_score_distances(measured: f64, theoretic: f64, spec: &SensorSpec, hit_threshold: f64) -> (f64, bool) {
    match (measured.is_finite(), theoretic.is_finite()) {
        (false, false) => (0.0, true),
        (true, true) => {
            let error = (measured - theoretic).abs();
            (log_beam_probability(error, spec.sigma), error < hit_threshold)
        }
        _ => {
            let nearest = measured.min(theoretic).min(spec.max_range);
            (log_beam_probability(spec.max_range - nearest, spec.sigma), false)
        }
    }
}

pub fn evaluate_beam(
    particle_pose: &Pose6D,
    spec: &SensorSpec,
    reading: &Reading,
    oc: &OccupancyOctree,
    hit_threshold: f64,
) -> BeamEvaluation {
    let theoretic = theoretic_distance(particle_pose, spec, reading, oc);
    score_distances(measured_distance(reading), theoretic, spec, hit_threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldmap::PointCloud;
    use approx::assert_relative_eq;

    fn spec(sigma: f64) -> SensorSpec {
        SensorSpec::new("lidar", RigidTransform::identity(), sigma, 10.0, 1).unwrap()
    }

    #[test]
    fn measured_distance_examples() {
        assert_eq!(measured_distance(&Reading::Hit(Vector3::new(3.0, 4.0, 0.0))), 5.0);
        assert_eq!(measured_distance(&Reading::Hit(Vector3::zeros())), 0.0);
        assert!(measured_distance(&Reading::infinite(Vector3::x())).is_infinite());
    }

    #[test]
    fn gaussian_values() {
        let peak = beam_probability(0.0, 0.1);
        assert_relative_eq!(peak, 3.98942, epsilon = 1e-5);
        assert_relative_eq!(beam_probability(0.1, 0.1), peak * (-0.5f64).exp(), epsilon = 1e-12);
        assert_relative_eq!(beam_probability(0.3, 0.1), 0.04432, epsilon = 1e-5);
        assert_relative_eq!(beam_probability(0.3, 0.1), 3.98942 * (-4.5f64).exp(), epsilon = 1e-5);
    }

    #[test]
    fn log_space_matches_linear() {
        for &e in &[0.0, 0.01, 0.05, 0.2, 1.0] {
            let (lp, _) = log_score_distances(5.0, 5.0 + e, &spec(0.1), 0.2);
            let p = score_distances(5.0, 5.0 + e, &spec(0.1), 0.2).probability;
            assert_relative_eq!(lp.exp(), p, epsilon = 1e-12);
        }
        let (lp, hit) = log_score_distances(3.0, f64::INFINITY, &spec(0.1), 0.2);
        let ev = score_distances(3.0, f64::INFINITY, &spec(0.1), 0.2);
        assert_relative_eq!(lp.exp(), ev.probability, epsilon = 1e-12);
        assert_eq!(hit, ev.hit);
        assert_relative_eq!(log_probability_floor(0.1).exp(), probability_floor(0.1), epsilon = 1e-15);
    }

    #[test]
    fn double_infinite_is_neutral_hit() {
        let ev = score_distances(f64::INFINITY, f64::INFINITY, &spec(0.1), 0.2);
        assert_eq!(ev.probability, 1.0);
        assert!(ev.hit);
    }

    #[test]
    fn exact_match_scores_peak() {
        let ev = score_distances(4.0, 4.0, &spec(0.1), 0.2);
        assert_eq!(ev.probability, beam_probability(0.0, 0.1));
        assert!(ev.hit);
    }

    #[test]
    fn small_error_counts_as_hit() {
        let ev = score_distances(5.0, 5.05, &spec(0.1), 0.2);
        assert_relative_eq!(ev.probability, 3.98942 * (-0.125f64).exp(), epsilon = 1e-5);
        assert!(ev.hit);
    }

    #[test]
    fn large_errors_are_floored() {
        let ev = score_distances(2.0, 7.0, &spec(0.1), 0.2);
        assert_eq!(ev.probability, probability_floor(0.1));
        assert!(!ev.hit);
        let mixed = score_distances(f64::INFINITY, 2.0, &spec(0.1), 0.2);
        assert_eq!(mixed.probability, probability_floor(0.1));
        assert!(!mixed.hit);
        // A finite reading just short of max range is nearly consistent with "no return".
        let near = score_distances(9.98, f64::INFINITY, &spec(0.1), 0.2);
        assert_relative_eq!(near.probability, beam_probability(0.02, 0.1), epsilon = 1e-12);
        assert!(!near.hit);
    }

    #[test]
    fn decimation_keeps_every_kth() {
        let scan = RangeScan {
            sensor_id: "a".into(),
            timestamp: 0.0,
            readings: (0..10).map(|i| Reading::Hit(Vector3::new(i as f64, 0.0, 0.0))).collect(),
        };
        let kept: Vec<f64> = scan.decimated(3).map(measured_distance).collect();
        assert_eq!(kept, vec![0.0, 3.0, 6.0, 9.0]);
        assert_eq!(scan.decimated(3).count(), scan.decimated(3).count());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(SensorSpec::new("a", RigidTransform::identity(), 0.0, 10.0, 1).is_err());
        assert!(SensorSpec::new("a", RigidTransform::identity(), 0.1, -1.0, 1).is_err());
        assert!(SensorSpec::new("a", RigidTransform::identity(), 0.1, 10.0, 0).is_err());
    }

    fn wall_at_x(x: f64) -> OccupancyOctree {
        let mut pts = Vec::new();
        for j in -30..=30 {
            for k in -10..=20 {
                pts.push(Vector3::new(x, j as f64 * 0.05, k as f64 * 0.05));
            }
        }
        OccupancyOctree::from_point_cloud(&PointCloud::new(pts).unwrap(), 0.1).unwrap()
    }

    #[test]
    fn theoretic_distance_against_wall() {
        let oc = wall_at_x(5.0);
        let reading = Reading::Hit(Vector3::new(5.0, 0.0, 0.0));
        let at_origin = theoretic_distance(&Pose6D::default(), &spec(0.03), &reading, &oc);
        assert!((at_origin - 5.0).abs() <= 0.1 * 3f64.sqrt());
        // Analytic: wall face at 4.95, shifted by the displacement along the beam.
        let ahead = theoretic_distance(&Pose6D::new(2.0, 0.0, 0.0, 0.0, 0.0, 0.0), &spec(0.03), &reading, &oc);
        assert!((ahead - 2.95).abs() < 1e-9, "{ahead}");
        let behind = theoretic_distance(&Pose6D::new(-2.0, 0.0, 0.0, 0.0, 0.0, 0.0), &spec(0.03), &reading, &oc);
        assert!((behind - 6.95).abs() < 1e-9, "{behind}");
        // Facing away from the wall nothing is hit.
        let away = theoretic_distance(&Pose6D::new(0.0, 0.0, 0.0, 0.0, 0.0, PI), &spec(0.03), &reading, &oc);
        assert!(away.is_infinite());
    }

    #[test]
    fn theoretic_distance_uses_extrinsic() {
        let oc = wall_at_x(5.0);
        let mounted = SensorSpec::new("a", RigidTransform::from_translation(1.0, 0.0, 0.5), 0.03, 10.0, 1).unwrap();
        let d = theoretic_distance(&Pose6D::default(), &mounted, &Reading::infinite(Vector3::x()), &oc);
        assert!((d - 3.95).abs() < 1e-9, "{d}");
    }

    #[test]
    fn theoretic_in_empty_map_is_infinite() {
        let oc = OccupancyOctree::empty(0.1).unwrap();
        let d = theoretic_distance(&Pose6D::new(3.0, 3.0, 1.0, 0.0, 0.0, 0.0), &spec(0.1), &Reading::Hit(Vector3::x()), &oc);
        assert!(d.is_infinite());
    }
}
