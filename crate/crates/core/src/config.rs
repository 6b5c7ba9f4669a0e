//! Plain-text `key = value` configuration for the filter, the sensors and
//! the simulator.
//!
//! ```text
//! # filter
//! max_particles = 300
//! odom_noise = 0.1 0.1 0 0 0 0.1
//!
//! sensor.front.sigma = 0.03
//! sensor.front.max_range = 10
//! sensor.front.decimation = 4
//! sensor.front.extrinsic = 0 0 0.3 0 0 0
//! sensor.front.pattern = planar 360
//! ```
//!
//! Sensors are listed in order of first appearance. Unknown keys are
//! rejected.

use thiserror::Error;

use crate::geom::{Pose6D, RigidTransform};
use crate::mcl::MclConfig;
use crate::sensor::SensorSpec;
use crate::sim::{BeamPattern, SimSensor};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("config line {line}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mcl: MclConfig,
    pub sensors: Vec<SimSensor>,
    /// Odometry noise applied by the simulator, same units as the filter's.
    pub sim_odom_noise: [f64; 6],
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mcl: MclConfig::default(),
            sensors: Vec::new(),
            sim_odom_noise: [0.0; 6],
        }
    }
}

impl RunConfig {
    pub fn sensor_specs(&self) -> Vec<SensorSpec> {
        self.sensors.iter().map(|s| s.spec.clone()).collect()
    }
}

struct SensorDraft {
    id: String,
    sigma: f64,
    max_range: f64,
    decimation: usize,
    extrinsic: RigidTransform,
    pattern: BeamPattern,
    noise: Option<f64>,
    line: usize,
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{s}' is not finite"))
    }
}

fn parse_vec<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let parts: Vec<&str> = s.split_whitespace().collect();
    if parts.len() != N {
        return Err(format!("expected {N} numbers, found {}", parts.len()));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = parse_f64(p)?;
    }
    Ok(out)
}

fn parse_usize(s: &str) -> Result<usize, String> {
    s.parse().map_err(|_| format!("'{s}' is not a non-negative integer"))
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("'{s}' is not a boolean")),
    }
}

fn parse_pattern(s: &str) -> Result<BeamPattern, String> {
    let parts: Vec<&str> = s.split_whitespace().collect();
    match parts.as_slice() {
        ["planar", n] => Ok(BeamPattern::Planar { beams: parse_usize(n)? }),
        ["rings", n, lo, hi, az] => Ok(BeamPattern::Rings {
            rings: parse_usize(n)?,
            min_deg: parse_f64(lo)?,
            max_deg: parse_f64(hi)?,
            azimuths: parse_usize(az)?,
        }),
        _ => Err(format!("unknown beam pattern '{s}' (expected 'planar N' or 'rings N MIN MAX AZ')")),
    }
}

fn apply_filter_key(c: &mut MclConfig, key: &str, v: &str) -> Result<bool, String> {
    match key {
        "min_particles" => c.min_particles = parse_usize(v)?,
        "max_particles" => c.max_particles = parse_usize(v)?,
        "odom_noise" => c.odom_noise = parse_vec(v)?,
        "winners_pct" => c.winners_pct = parse_f64(v)?,
        "losers_pct" => c.losers_pct = parse_f64(v)?,
        "prediction_rate" => c.prediction_rate = parse_f64(v)?,
        "correction_rate" => c.correction_rate = parse_f64(v)?,
        "reseed_rate" => c.reseed_rate = parse_f64(v)?,
        "hit_threshold" => c.hit_threshold = Some(parse_f64(v)?),
        "use_imu_orientation" => c.use_imu_orientation = parse_bool(v)?,
        "grow_threshold" => c.grow_threshold = parse_f64(v)?,
        "shrink_threshold" => c.shrink_threshold = parse_f64(v)?,
        "count_step" => c.count_step = parse_f64(v)?,
        "reseed_jitter" => c.reseed_jitter = parse_vec(v)?,
        "recovery_quality" => c.recovery_quality = parse_f64(v)?,
        "recovery_jitter_scale" => c.recovery_jitter_scale = parse_f64(v)?,
        "initial_pose" => c.initial_pose = Some(Pose6D::from_array(parse_vec(v)?)),
        "initial_spread" => c.initial_spread = parse_vec(v)?,
        _ => return Ok(false),
    }
    Ok(true)
}

/// Parses a configuration file's text.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut drafts: Vec<SensorDraft> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |message: String| ConfigError { line, message };
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(format!("expected 'key = value', found '{content}'")))?;
        let (key, value) = (key.trim(), value.trim());

        if let Some(rest) = key.strip_prefix("sensor.") {
            let (id, field) = rest
                .rsplit_once('.')
                .ok_or_else(|| err(format!("sensor key '{key}' needs the form sensor.<id>.<field>")))?;
            if id.is_empty() || id.contains(char::is_whitespace) {
                return Err(err(format!("invalid sensor id '{id}'")));
            }
            let pos = match drafts.iter().position(|d| d.id == id) {
                Some(p) => p,
                None => {
                    drafts.push(SensorDraft {
                        id: id.to_string(),
                        sigma: 0.03,
                        max_range: 10.0,
                        decimation: 1,
                        extrinsic: RigidTransform::identity(),
                        pattern: BeamPattern::lidar_2d(),
                        noise: None,
                        line,
                    });
                    drafts.len() - 1
                }
            };
            let d = &mut drafts[pos];
            let result = match field {
                "sigma" => parse_f64(value).map(|v| d.sigma = v),
                "max_range" => parse_f64(value).map(|v| d.max_range = v),
                "decimation" => parse_usize(value).map(|v| d.decimation = v),
                "extrinsic" => parse_vec::<6>(value).map(|v| d.extrinsic = Pose6D::from_array(v).to_transform()),
                "pattern" => parse_pattern(value).map(|v| d.pattern = v),
                "noise" => parse_f64(value).map(|v| d.noise = Some(v)),
                _ => Err(format!("unknown sensor field '{field}'")),
            };
            result.map_err(err)?;
        } else if key == "sim.odom_noise" {
            cfg.sim_odom_noise = parse_vec(value).map_err(err)?;
        } else if !apply_filter_key(&mut cfg.mcl, key, value).map_err(err)? {
            return Err(err(format!("unknown key '{key}'")));
        }
    }
    cfg.mcl.validate().map_err(|e| ConfigError {
        line: 0,
        message: e.to_string(),
    })?;
    for d in drafts {
        let spec = SensorSpec::new(d.id, d.extrinsic, d.sigma, d.max_range, d.decimation).map_err(|e| ConfigError {
            line: d.line,
            message: e.to_string(),
        })?;
        let noise = d.noise.unwrap_or(spec.sigma);
        if noise < 0.0 {
            return Err(ConfigError {
                line: d.line,
                message: format!("sensor '{}': noise must be non-negative", spec.id),
            });
        }
        cfg.sensors.push(SimSensor {
            spec,
            pattern: d.pattern,
            noise,
        });
    }
    Ok(cfg)
}
