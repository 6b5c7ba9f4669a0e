//! The dual map: an occupancy octree for ray casting and an elevation grid
//! for terrain height, slope and traversability.

mod bundle;
mod grid;
mod octree;

use std::path::Path;

use nalgebra::Vector3;
use thiserror::Error;

pub use bundle::{read_bundle, read_bundle_file, write_bundle, write_bundle_file, MapBundle, BUNDLE_MAGIC};
pub use grid::{
    attitude_from_gradient, build_gridmap, build_gridmap_with_order, CellOccupancy, ElevationGrid, GridParams,
    DEFAULT_STEP_THRESHOLD, SMOOTHING_HALF_WIDTH,
};
pub use octree::{coord_to_index, OccupancyOctree, VoxelKey, LOG_ODDS_HIT};

/// Default map resolution, meters.
pub const DEFAULT_RESOLUTION: f64 = 0.1;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("empty point cloud")]
    EmptyPointCloud,
    #[error("non-finite coordinate in point cloud")]
    NonFinitePoint,
    #[error("invalid resolution {0}")]
    InvalidResolution(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("seed off map")]
    SeedOffMap,
    #[error("seed inside an obstacle")]
    SeedInObstacle,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("malformed map bundle: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A static point cloud of obstacle and ground returns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Vector3<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>) -> Result<Self, MapError> {
        if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(MapError::NonFinitePoint);
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Parses `x y z` lines; `#` starts a comment.
    pub fn parse_ascii(text: &str) -> Result<Self, MapError> {
        let mut points = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| MapError::Parse { line: n + 1, message };
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| parse_err(format!("bad number '{t}'"))))
                .collect::<Result<_, _>>()?;
            if values.len() != 3 {
                return Err(parse_err(format!("expected 3 values, found {}", values.len())));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(parse_err("non-finite coordinate".into()));
            }
            points.push(Vector3::new(values[0], values[1], values[2]));
        }
        Ok(Self { points })
    }

    pub fn read_ascii(path: &Path) -> Result<Self, MapError> {
        Self::parse_ascii(&std::fs::read_to_string(path)?)
    }

    pub fn to_ascii(&self) -> String {
        let mut out = String::with_capacity(self.points.len() * 30);
        for p in &self.points {
            out.push_str(&format!("{:.6} {:.6} {:.6}\n", p.x, p.y, p.z));
        }
        out
    }
}

/// Voxelizes a point cloud (every point's voxel becomes occupied).
pub fn build_octree(pc: &PointCloud, resolution: f64) -> Result<OccupancyOctree, MapError> {
    OccupancyOctree::from_point_cloud(pc, resolution)
}
