use crate::geom::Pose6D;

use super::MclError;

/// Filter parameters. Every field has a default; see [`MclConfig::default`].
#[derive(Debug, Clone, PartialEq)]
pub struct MclConfig {
    pub min_particles: usize,
    pub max_particles: usize,
    /// Odometry noise per unit of motion for `(x, y, z, roll, pitch, yaw)`:
    /// meters per meter traveled for the translation components, radians per
    /// radian turned for the rotation components.
    pub odom_noise: [f64; 6],
    pub winners_pct: f64,
    pub losers_pct: f64,
    pub prediction_rate: f64,
    pub correction_rate: f64,
    pub reseed_rate: f64,
    /// Beam error under which a reading counts as a hit; `None` uses two
    /// sigma of the reading's sensor.
    pub hit_threshold: Option<f64>,
    pub use_imu_orientation: bool,
    /// Particle count grows when the covariance diagonal sum exceeds this.
    pub grow_threshold: f64,
    /// Particle count shrinks when the covariance diagonal sum is below this.
    pub shrink_threshold: f64,
    /// Fraction of the current count added or removed per adaptation.
    pub count_step: f64,
    /// Standard deviations of the pose jitter given to reseeded clones.
    pub reseed_jitter: [f64; 6],
    /// When the mean hit ratio of the reseed winners falls below this, the
    /// reseed jitter is multiplied by `recovery_jitter_scale` so clones can
    /// reach a pose far from the current cloud. Zero disables the widening.
    pub recovery_quality: f64,
    pub recovery_jitter_scale: f64,
    /// Start pose for replay; `None` takes the first ground-truth record.
    pub initial_pose: Option<Pose6D>,
    /// Standard deviations of the initial particle cloud.
    pub initial_spread: [f64; 6],
}

impl Default for MclConfig {
    fn default() -> Self {
        Self {
            min_particles: 50,
            max_particles: 500,
            odom_noise: [0.1, 0.1, 0.0, 0.0, 0.0, 0.1],
            winners_pct: 0.1,
            losers_pct: 0.3,
            prediction_rate: 100.0,
            correction_rate: 10.0,
            reseed_rate: 0.3,
            hit_threshold: None,
            use_imu_orientation: false,
            grow_threshold: 0.5,
            shrink_threshold: 0.05,
            count_step: 0.1,
            reseed_jitter: [0.05, 0.05, 0.0, 0.0, 0.0, 0.02],
            recovery_quality: 0.0,
            recovery_jitter_scale: 1.0,
            initial_pose: None,
            initial_spread: [0.1, 0.1, 0.0, 0.0, 0.0, 0.05],
        }
    }
}

impl MclConfig {
    pub fn validate(&self) -> Result<(), MclError> {
        let fail = |m: &str| Err(MclError::InvalidConfig(m.to_string()));
        if self.min_particles == 0 || self.min_particles > self.max_particles {
            return fail("need 1 <= min_particles <= max_particles");
        }
        if !(0.0..=1.0).contains(&self.winners_pct) || !(0.0..=1.0).contains(&self.losers_pct) {
            return fail("winners_pct and losers_pct must lie in [0, 1]");
        }
        if self.winners_pct + self.losers_pct > 1.0 {
            return fail("winners_pct + losers_pct must not exceed 1");
        }
        for (name, rate) in [
            ("prediction_rate", self.prediction_rate),
            ("correction_rate", self.correction_rate),
            ("reseed_rate", self.reseed_rate),
        ] {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(MclError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        let nonneg = |v: &[f64]| v.iter().all(|x| *x >= 0.0 && x.is_finite());
        if !nonneg(&self.odom_noise) || !nonneg(&self.reseed_jitter) || !nonneg(&self.initial_spread) {
            return fail("noise, jitter and spread entries must be finite and non-negative");
        }
        if let Some(t) = self.hit_threshold {
            if !(t > 0.0) {
                return fail("hit_threshold must be positive");
            }
        }
        if !(self.count_step >= 0.0 && self.count_step <= 1.0) {
            return fail("count_step must lie in [0, 1]");
        }
        if !(self.recovery_jitter_scale >= 1.0) || !(0.0..=1.0).contains(&self.recovery_quality) {
            return fail("recovery_jitter_scale must be >= 1 and recovery_quality in [0, 1]");
        }
        Ok(())
    }
}
