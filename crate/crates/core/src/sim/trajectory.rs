use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::geom::{angle_diff, normalize_angle};

use super::SimError;

/// Planar pose the robot passes through; height and tilt come from the
/// terrain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

/// Instant displacement of the true pose, unseen by odometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Teleport {
    /// Time of the jump, seconds from the start.
    pub at: f64,
    /// World-frame (dx, dy).
    pub offset: [f64; 2],
}

fn default_turn_rate() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub waypoints: Vec<Waypoint>,
    /// Linear speed, m/s.
    pub speed: f64,
    /// Angular speed for in-place turns, rad/s.
    #[serde(default = "default_turn_rate")]
    pub turn_rate: f64,
    /// Sample rate, Hz.
    pub rate: f64,
    /// Seconds spent standing still at the last waypoint.
    #[serde(default)]
    pub hold: f64,
    /// Emit a checkpoint every this many seconds; zero disables them.
    #[serde(default)]
    pub checkpoint_every: f64,
    #[serde(default)]
    pub teleport: Option<Teleport>,
}

impl TrajectorySpec {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let spec: TrajectorySpec = toml::from_str(text).map_err(|e| SimError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("trajectory serializes")
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidSpec(m.to_string()));
        if self.waypoints.is_empty() {
            return bad("trajectory needs at least one waypoint");
        }
        if !(self.speed > 0.0 && self.turn_rate > 0.0 && self.rate > 0.0) {
            return bad("speed, turn_rate and rate must be positive");
        }
        if !(self.hold >= 0.0 && self.checkpoint_every >= 0.0) {
            return bad("hold and checkpoint_every must be non-negative");
        }
        if self.waypoints.iter().any(|w| !(w.x.is_finite() && w.y.is_finite() && w.yaw.is_finite())) {
            return bad("waypoints must be finite");
        }
        Ok(())
    }

    fn segment_duration(&self, a: &Waypoint, b: &Waypoint) -> f64 {
        let dist = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
        (dist / self.speed).max(angle_diff(b.yaw, a.yaw).abs() / self.turn_rate)
    }

    /// Total duration including the final hold.
    pub fn duration(&self) -> f64 {
        self.waypoints.windows(2).map(|w| self.segment_duration(&w[0], &w[1])).sum::<f64>() + self.hold
    }

    /// Number of samples at `rate`, first at t = 0.
    pub fn tick_count(&self) -> usize {
        (self.duration() * self.rate + 1e-9).floor() as usize + 1
    }

    /// Planar pose at time `t`, before any teleport.
    pub fn pose_at(&self, t: f64) -> Waypoint {
        let mut remaining = t.max(0.0);
        for w in self.waypoints.windows(2) {
            let d = self.segment_duration(&w[0], &w[1]);
            if remaining <= d && d > 0.0 {
                let f = remaining / d;
                return Waypoint {
                    x: w[0].x + f * (w[1].x - w[0].x),
                    y: w[0].y + f * (w[1].y - w[0].y),
                    yaw: normalize_angle(w[0].yaw + f * angle_diff(w[1].yaw, w[0].yaw)),
                };
            }
            remaining -= d;
        }
        *self.waypoints.last().expect("validated non-empty")
    }
}

/// Builds a waypoint list that drives straight between points and turns in
/// place at corners. `dense` points (curves) keep their own heading.
pub struct RouteBuilder {
    waypoints: Vec<Waypoint>,
}

impl RouteBuilder {
    pub fn start(x: f64, y: f64, yaw: f64) -> Self {
        Self {
            waypoints: vec![Waypoint { x, y, yaw }],
        }
    }

    fn last(&self) -> Waypoint {
        *self.waypoints.last().expect("non-empty")
    }

    /// Turns to face (x, y), then drives there.
    pub fn drive_to(mut self, x: f64, y: f64) -> Self {
        let last = self.last();
        let heading = (y - last.y).atan2(x - last.x);
        if angle_diff(heading, last.yaw).abs() > 1e-9 {
            self.waypoints.push(Waypoint { yaw: heading, ..last });
        }
        self.waypoints.push(Waypoint { x, y, yaw: heading });
        self
    }

    /// Follows a sampled curve, heading along its tangent.
    pub fn follow(mut self, points: &[(f64, f64)]) -> Self {
        for &(x, y) in points {
            let last = self.last();
            if (x - last.x).hypot(y - last.y) < 1e-9 {
                continue;
            }
            let heading = (y - last.y).atan2(x - last.x);
            if angle_diff(heading, last.yaw).abs() > PI / 4.0 {
                self.waypoints.push(Waypoint { yaw: heading, ..last });
            }
            self.waypoints.push(Waypoint { x, y, yaw: heading });
        }
        self
    }

    pub fn finish(self) -> Vec<Waypoint> {
        self.waypoints
    }
}

/// Figure-eight centered at (cx, cy) with half-widths (ax, ay), sampled at
/// `n` points, starting and ending at the center.
pub fn figure_eight(cx: f64, cy: f64, ax: f64, ay: f64, n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|i| {
            let s = TAU * i as f64 / n as f64;
            (cx + ax * (2.0 * s).sin(), cy + ay * s.sin())
        })
        .collect()
}

/// The route on [`super::standard_world`]: a figure-eight over the flat
/// area, up the first ramp, across the platform, down the second ramp and
/// back to the start. About 55 m at 0.5 m/s.
pub fn standard_route() -> TrajectorySpec {
    let eight = figure_eight(4.0, 7.0, 2.0, 3.5, 48);
    let start_heading = (3.5f64).atan2(4.0);
    let waypoints = RouteBuilder::start(4.0, 7.0, start_heading)
        .follow(&eight)
        .drive_to(7.0, 2.0)
        .drive_to(15.0, 2.0)
        .drive_to(15.0, 6.0)
        .drive_to(7.0, 6.0)
        .drive_to(4.0, 7.0)
        .finish();
    TrajectorySpec {
        waypoints,
        speed: 0.5,
        turn_rate: 0.8,
        rate: 10.0,
        hold: 0.0,
        checkpoint_every: 10.0,
        teleport: None,
    }
}

/// Two laps of the figure-eight with the true pose jumping `offset` at
/// `at` seconds; used for kidnapped-robot runs.
pub fn kidnap_route(at: f64, offset: [f64; 2]) -> TrajectorySpec {
    let eight = figure_eight(4.0, 7.0, 2.0, 3.5, 48);
    let start_heading = (3.5f64).atan2(4.0);
    let waypoints = RouteBuilder::start(4.0, 7.0, start_heading).follow(&eight).follow(&eight).finish();
    TrajectorySpec {
        waypoints,
        speed: 0.5,
        turn_rate: 0.8,
        rate: 10.0,
        hold: 0.0,
        checkpoint_every: 0.0,
        teleport: Some(Teleport { at, offset }),
    }
}
