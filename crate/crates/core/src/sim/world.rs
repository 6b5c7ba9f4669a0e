use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::worldmap::PointCloud;

use super::SimError;

/// Rectangular world outline, optionally fenced by vertical walls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: [f64; 2],
    pub max: [f64; 2],
    /// Height of the perimeter walls; zero leaves the world open.
    #[serde(default)]
    pub wall_height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "+x")]
    PosX,
    #[serde(rename = "-x")]
    NegX,
    #[serde(rename = "+y")]
    PosY,
    #[serde(rename = "-y")]
    NegY,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    /// Horizontal ground covering the bounds, except under the footprints
    /// of the other primitives that rest on it.
    Plane { z: f64 },
    /// Solid wedge whose top rises by `grade` meters per meter toward
    /// `rises_toward`, starting at height `base`.
    Ramp {
        min: [f64; 2],
        max: [f64; 2],
        grade: f64,
        rises_toward: Direction,
        #[serde(default)]
        base: f64,
    },
    /// Axis-aligned solid box.
    Box { min: [f64; 3], max: [f64; 3] },
    /// Rectangular pit sunk `depth` below the ground plane.
    Depression { min: [f64; 2], max: [f64; 2], depth: f64 },
}

fn default_spacing() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    #[serde(default)]
    pub seed: u64,
    /// Distance between surface samples.
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    pub bounds: Bounds,
    #[serde(default)]
    pub primitives: Vec<Primitive>,
}

impl WorldSpec {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let spec: WorldSpec = toml::from_str(text).map_err(|e| SimError::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("world spec serializes")
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidSpec(m));
        if self.primitives.is_empty() {
            return Err(SimError::EmptyWorld);
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return bad("spacing must be positive".into());
        }
        let (lo, hi) = (self.bounds.min, self.bounds.max);
        if !(lo[0] < hi[0] && lo[1] < hi[1]) || self.bounds.wall_height < 0.0 {
            return bad("bounds must have min < max and a non-negative wall height".into());
        }
        let inside = |min: [f64; 2], max: [f64; 2]| {
            min[0] < max[0] && min[1] < max[1] && min[0] >= lo[0] && min[1] >= lo[1] && max[0] <= hi[0] && max[1] <= hi[1]
        };
        for (i, p) in self.primitives.iter().enumerate() {
            let ok = match p {
                Primitive::Plane { z } => z.is_finite(),
                Primitive::Ramp { min, max, grade, base, .. } => inside(*min, *max) && grade.is_finite() && *grade >= 0.0 && base.is_finite(),
                Primitive::Box { min, max } => inside([min[0], min[1]], [max[0], max[1]]) && min[2] < max[2],
                Primitive::Depression { min, max, depth } => inside(*min, *max) && *depth > 0.0,
            };
            if !ok {
                return bad(format!("primitive {i} is degenerate or outside the bounds"));
            }
        }
        Ok(())
    }
}

/// Samples a rectangle in (u, v) on a regular grid with small seeded jitter.
fn sample_rect(u: (f64, f64), v: (f64, f64), spacing: f64, rng: &mut ChaCha8Rng, mut emit: impl FnMut(f64, f64)) {
    let nu = ((u.1 - u.0) / spacing).ceil().max(1.0) as usize;
    let nv = ((v.1 - v.0) / spacing).ceil().max(1.0) as usize;
    let (du, dv) = ((u.1 - u.0) / nu as f64, (v.1 - v.0) / nv as f64);
    for a in 0..nu {
        for b in 0..nv {
            let ju: f64 = rng.gen_range(-0.2..0.2);
            let jv: f64 = rng.gen_range(-0.2..0.2);
            emit(u.0 + (a as f64 + 0.5 + ju) * du, v.0 + (b as f64 + 0.5 + jv) * dv);
        }
    }
}

/// Vertical face along x at constant y (or along y at constant x when
/// `along_y`), spanning heights `z`.
fn sample_wall(
    fixed: f64,
    span: (f64, f64),
    z: (f64, f64),
    along_y: bool,
    spacing: f64,
    rng: &mut ChaCha8Rng,
    pts: &mut Vec<Vector3<f64>>,
) {
    if z.1 <= z.0 {
        return;
    }
    sample_rect(span, z, spacing, rng, |s, h| {
        pts.push(if along_y { Vector3::new(fixed, s, h) } else { Vector3::new(s, fixed, h) });
    });
}

fn in_rect(x: f64, y: f64, min: [f64; 2], max: [f64; 2]) -> bool {
    x >= min[0] && x < max[0] && y >= min[1] && y < max[1]
}

/// Height of a ramp's top at (x, y).
pub(crate) fn ramp_height(x: f64, y: f64, min: [f64; 2], max: [f64; 2], grade: f64, dir: Direction, base: f64) -> f64 {
    let d = match dir {
        Direction::PosX => x - min[0],
        Direction::NegX => max[0] - x,
        Direction::PosY => y - min[1],
        Direction::NegY => max[1] - y,
    };
    base + grade * d.max(0.0)
}

/// Densely samples every primitive surface into a point cloud.
pub fn generate_world(spec: &WorldSpec) -> Result<PointCloud, SimError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let s = spec.spacing;
    let mut pts = Vec::new();
    let b = &spec.bounds;

    let footprints: Vec<([f64; 2], [f64; 2], Option<f64>)> = spec
        .primitives
        .iter()
        .filter_map(|p| match p {
            Primitive::Ramp { min, max, .. } | Primitive::Depression { min, max, .. } => Some((*min, *max, None)),
            Primitive::Box { min, max } => Some(([min[0], min[1]], [max[0], max[1]], Some(min[2]))),
            Primitive::Plane { .. } => None,
        })
        .collect();

    for p in &spec.primitives {
        match *p {
            Primitive::Plane { z } => {
                sample_rect((b.min[0], b.max[0]), (b.min[1], b.max[1]), s, &mut rng, |x, y| {
                    let covered = footprints
                        .iter()
                        .any(|(lo, hi, floor)| in_rect(x, y, *lo, *hi) && floor.map_or(true, |f| f <= z + 1e-9));
                    if !covered {
                        pts.push(Vector3::new(x, y, z));
                    }
                });
            }
            Primitive::Ramp { min, max, grade, rises_toward, base } => {
                sample_rect((min[0], max[0]), (min[1], max[1]), s, &mut rng, |x, y| {
                    pts.push(Vector3::new(x, y, ramp_height(x, y, min, max, grade, rises_toward, base)));
                });
                let top = ramp_height(max[0], max[1], min, max, grade, rises_toward, base)
                    .max(ramp_height(min[0], min[1], min, max, grade, rises_toward, base));
                // Side faces are triangles: keep samples under the slope.
                let along_x = matches!(rises_toward, Direction::PosX | Direction::NegX);
                let sides = if along_x { [min[1], max[1]] } else { [min[0], max[0]] };
                let span = if along_x { (min[0], max[0]) } else { (min[1], max[1]) };
                for fixed in sides {
                    sample_rect(span, (base, top), s, &mut rng, |u, h| {
                        let (x, y) = if along_x { (u, fixed) } else { (fixed, u) };
                        if h < ramp_height(x, y, min, max, grade, rises_toward, base) {
                            pts.push(Vector3::new(x, y, h));
                        }
                    });
                }
                let (fixed, high_along_y) = match rises_toward {
                    Direction::PosX => (max[0], true),
                    Direction::NegX => (min[0], true),
                    Direction::PosY => (max[1], false),
                    Direction::NegY => (min[1], false),
                };
                let span = if high_along_y { (min[1], max[1]) } else { (min[0], max[0]) };
                sample_wall(fixed, span, (base, top), high_along_y, s, &mut rng, &mut pts);
            }
            Primitive::Box { min, max } => {
                sample_rect((min[0], max[0]), (min[1], max[1]), s, &mut rng, |x, y| pts.push(Vector3::new(x, y, max[2])));
                if min[2] > 0.0 {
                    sample_rect((min[0], max[0]), (min[1], max[1]), s, &mut rng, |x, y| pts.push(Vector3::new(x, y, min[2])));
                }
                for y in [min[1], max[1]] {
                    sample_wall(y, (min[0], max[0]), (min[2], max[2]), false, s, &mut rng, &mut pts);
                }
                for x in [min[0], max[0]] {
                    sample_wall(x, (min[1], max[1]), (min[2], max[2]), true, s, &mut rng, &mut pts);
                }
            }
            Primitive::Depression { min, max, depth } => {
                let ground = ground_level(spec);
                let floor = ground - depth;
                sample_rect((min[0], max[0]), (min[1], max[1]), s, &mut rng, |x, y| pts.push(Vector3::new(x, y, floor)));
                for y in [min[1], max[1]] {
                    sample_wall(y, (min[0], max[0]), (floor, ground), false, s, &mut rng, &mut pts);
                }
                for x in [min[0], max[0]] {
                    sample_wall(x, (min[1], max[1]), (floor, ground), true, s, &mut rng, &mut pts);
                }
            }
        }
    }

    if b.wall_height > 0.0 {
        let ground = ground_level(spec);
        let z = (ground, ground + b.wall_height);
        for y in [b.min[1], b.max[1]] {
            sample_wall(y, (b.min[0], b.max[0]), z, false, s, &mut rng, &mut pts);
        }
        for x in [b.min[0], b.max[0]] {
            sample_wall(x, (b.min[1], b.max[1]), z, true, s, &mut rng, &mut pts);
        }
    }
    PointCloud::new(pts).map_err(|_| SimError::EmptyWorld)
}

/// Height of the first ground plane, or zero.
fn ground_level(spec: &WorldSpec) -> f64 {
    spec.primitives
        .iter()
        .find_map(|p| match p {
            Primitive::Plane { z } => Some(*z),
            _ => None,
        })
        .unwrap_or(0.0)
}

/// The desk-scale test world: a 20 m x 12 m walled room with a figure-eight
/// area on the left, a 10% ramp up to a 0.5 m platform, a second ramp back
/// down, a few box obstacles and a shallow pit.
pub fn standard_world(seed: u64) -> WorldSpec {
    WorldSpec {
        seed,
        spacing: 0.05,
        bounds: Bounds {
            min: [0.0, 0.0],
            max: [20.0, 12.0],
            wall_height: 2.0,
        },
        primitives: vec![
            Primitive::Plane { z: 0.0 },
            Primitive::Ramp {
                min: [8.0, 1.0],
                max: [13.0, 3.0],
                grade: 0.1,
                rises_toward: Direction::PosX,
                base: 0.0,
            },
            Primitive::Box {
                min: [13.0, 1.0, 0.0],
                max: [17.0, 7.0, 0.5],
            },
            Primitive::Ramp {
                min: [8.0, 5.0],
                max: [13.0, 7.0],
                grade: 0.1,
                rises_toward: Direction::PosX,
                base: 0.0,
            },
            Primitive::Box {
                min: [9.0, 9.0, 0.0],
                max: [10.0, 10.0, 1.0],
            },
            Primitive::Box {
                min: [17.5, 9.0, 0.0],
                max: [18.5, 10.5, 1.5],
            },
            Primitive::Box {
                min: [3.8, 0.5, 0.0],
                max: [4.3, 1.0, 1.5],
            },
            Primitive::Box {
                min: [0.5, 11.0, 0.0],
                max: [1.5, 11.5, 0.8],
            },
            Primitive::Box {
                min: [6.8, 10.8, 0.0],
                max: [7.6, 11.6, 1.2],
            },
            Primitive::Depression {
                min: [13.5, 9.0],
                max: [15.5, 11.0],
                depth: 0.3,
            },
        ],
    }
}

/// A random walled world with boxes and ramps, for property tests.
pub fn random_world(seed: u64) -> WorldSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = [rng.gen_range(4.0..8.0), rng.gen_range(4.0..8.0)];
    let mut primitives = vec![Primitive::Plane { z: 0.0 }];
    for _ in 0..rng.gen_range(2..6) {
        let w = rng.gen_range(0.2..1.5);
        let d = rng.gen_range(0.2..1.5);
        let x = rng.gen_range(0.0..size[0] - w);
        let y = rng.gen_range(0.0..size[1] - d);
        let z0 = if rng.gen_bool(0.3) { rng.gen_range(0.3..1.0) } else { 0.0 };
        primitives.push(Primitive::Box {
            min: [x, y, z0],
            max: [x + w, y + d, z0 + rng.gen_range(0.2..1.5)],
        });
    }
    if rng.gen_bool(0.7) {
        let x = rng.gen_range(0.0..size[0] - 2.0);
        let y = rng.gen_range(0.0..size[1] - 1.0);
        let dirs = [Direction::PosX, Direction::NegX, Direction::PosY, Direction::NegY];
        primitives.push(Primitive::Ramp {
            min: [x, y],
            max: [x + 2.0, y + 1.0],
            grade: rng.gen_range(0.05..0.4),
            rises_toward: dirs[rng.gen_range(0..4)],
            base: 0.0,
        });
    }
    WorldSpec {
        seed,
        spacing: 0.05,
        bounds: Bounds {
            min: [0.0, 0.0],
            max: size,
            wall_height: rng.gen_range(0.5..2.0),
        },
        primitives,
    }
}
