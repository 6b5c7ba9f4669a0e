//! Monte Carlo localization for ground robots on non-planar terrain.
//!
//! The map is a pair of structures built from a point cloud: an occupancy
//! octree queried by ray casting, and an elevation grid giving ground height,
//! slope and traversability. The filter keeps 6-DoF particles snapped to the
//! terrain, weights them with a per-beam Gaussian range model and tracks a
//! hit-ratio quality signal alongside the usual covariance.

pub mod config;
pub mod eval;
pub mod geom;
pub mod log;
pub mod mcl;
pub mod sensor;
pub mod sim;
pub mod worldmap;
