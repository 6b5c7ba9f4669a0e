//! Elevation grid built by flooding the octree from a seed position.

use std::collections::VecDeque;

use super::octree::{coord_to_index, OccupancyOctree};
use super::MapError;
use crate::geom::Pose6D;

/// Default step threshold between neighboring ground levels, in meters.
pub const DEFAULT_STEP_THRESHOLD: f64 = 0.15;

/// Half-width, in cells, of the window used to smooth voxel-quantized
/// ground levels into the elevation layer.
pub const SMOOTHING_HALF_WIDTH: i64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum CellOccupancy {
    Unknown = 0,
    Free = 1,
    Occupied = 2,
}

impl CellOccupancy {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Self::Unknown),
            1 => Some(Self::Free),
            2 => Some(Self::Occupied),
            _ => None,
        }
    }
}

/// Parameters of the flood fill.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    /// Maximum ground-level step between neighboring cells, meters.
    pub step_threshold: f64,
    /// Top of the obstacle band above the ground, meters.
    pub robot_height: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            step_threshold: DEFAULT_STEP_THRESHOLD,
            robot_height: 0.8,
        }
    }
}

/// 2D grid with an elevation layer and an occupancy layer.
///
/// Cell `(i, j)` is centered at `origin + (i, j) * resolution`. Elevations
/// are stored as `f32`, with NaN for unknown cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ElevationGrid {
    resolution: f64,
    origin: (f64, f64),
    width: usize,
    height: usize,
    elevation: Vec<f32>,
    occupancy: Vec<CellOccupancy>,
}

impl ElevationGrid {
    pub fn from_layers(
        resolution: f64,
        origin: (f64, f64),
        width: usize,
        height: usize,
        elevation: Vec<f32>,
        occupancy: Vec<CellOccupancy>,
    ) -> Result<Self, MapError> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(MapError::InvalidResolution(resolution));
        }
        if elevation.len() != width * height || occupancy.len() != width * height {
            return Err(MapError::Format("grid layer size does not match dimensions".into()));
        }
        for (e, o) in elevation.iter().zip(&occupancy) {
            if *o != CellOccupancy::Unknown && !e.is_finite() {
                return Err(MapError::Format("known cell without elevation".into()));
            }
        }
        Ok(Self {
            resolution,
            origin,
            width,
            height,
            elevation,
            occupancy,
        })
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn elevation_layer(&self) -> &[f32] {
        &self.elevation
    }

    pub fn occupancy_layer(&self) -> &[CellOccupancy] {
        &self.occupancy
    }

    fn index(&self, i: i64, j: i64) -> Option<usize> {
        (i >= 0 && j >= 0 && (i as usize) < self.width && (j as usize) < self.height)
            .then(|| j as usize * self.width + i as usize)
    }

    /// Cell containing a metric position.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let i = ((x - self.origin.0) / self.resolution).round() as i64;
        let j = ((y - self.origin.1) / self.resolution).round() as i64;
        self.index(i, j).map(|_| (i as usize, j as usize))
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.origin.0 + i as f64 * self.resolution,
            self.origin.1 + j as f64 * self.resolution,
        )
    }

    pub fn cell_elevation(&self, i: usize, j: usize) -> Option<f64> {
        let e = *self.elevation.get(self.index(i as i64, j as i64)?)?;
        e.is_finite().then_some(e as f64)
    }

    pub fn cell_occupancy(&self, i: usize, j: usize) -> CellOccupancy {
        self.index(i as i64, j as i64)
            .map(|idx| self.occupancy[idx])
            .unwrap_or(CellOccupancy::Unknown)
    }

    pub fn occupancy_at(&self, x: f64, y: f64) -> CellOccupancy {
        self.cell_of(x, y)
            .map(|(i, j)| self.cell_occupancy(i, j))
            .unwrap_or(CellOccupancy::Unknown)
    }

    fn known(&self, i: i64, j: i64) -> Option<f64> {
        let e = self.elevation[self.index(i, j)?];
        e.is_finite().then_some(e as f64)
    }

    /// Bilinear interpolation of the elevation layer. `None` when any cell
    /// contributing a nonzero weight is unknown or outside the grid.
    pub fn elevation_at(&self, x: f64, y: f64) -> Option<f64> {
        if !(x.is_finite() && y.is_finite()) {
            return None;
        }
        let u = (x - self.origin.0) / self.resolution;
        let v = (y - self.origin.1) / self.resolution;
        // Queries within rounding noise of a cell center use that cell alone.
        let split = |t: f64| {
            let nearest = t.round();
            if (t - nearest).abs() < 1e-9 {
                (nearest as i64, 0.0)
            } else {
                (t.floor() as i64, t - t.floor())
            }
        };
        let (i0, fu) = split(u);
        let (j0, fv) = split(v);
        let mut acc = 0.0;
        for (di, wu) in [(0, 1.0 - fu), (1, fu)] {
            for (dj, wv) in [(0, 1.0 - fv), (1, fv)] {
                let w = wu * wv;
                if w == 0.0 {
                    continue;
                }
                acc += w * self.known(i0 + di, j0 + dj)?;
            }
        }
        Some(acc)
    }

    /// Terrain gradient `(dz/dx, dz/dy)` at the cell containing `(x, y)`,
    /// from central differences (one-sided next to unknown cells).
    pub fn gradient_at(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let (i, j) = self.cell_of(x, y)?;
        let (i, j) = (i as i64, j as i64);
        let center = self.known(i, j)?;
        let r = self.resolution;
        let diff = |minus: Option<f64>, plus: Option<f64>| match (minus, plus) {
            (Some(m), Some(p)) => Some((p - m) / (2.0 * r)),
            (Some(m), None) => Some((center - m) / r),
            (None, Some(p)) => Some((p - center) / r),
            (None, None) => None,
        };
        let gx = diff(self.known(i - 1, j), self.known(i + 1, j))?;
        let gy = diff(self.known(i, j - 1), self.known(i, j + 1))?;
        Some((gx, gy))
    }

    /// Roll and pitch of a body resting on the terrain with yaw 0.
    pub fn slope_at(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        self.attitude_at(x, y, 0.0)
    }

    /// Roll and pitch of a body resting on the terrain at heading `yaw`.
    pub fn attitude_at(&self, x: f64, y: f64, yaw: f64) -> Option<(f64, f64)> {
        let (gx, gy) = self.gradient_at(x, y)?;
        Some(attitude_from_gradient(gx, gy, yaw))
    }
}

/// Roll and pitch that align a body's z axis with the normal of a plane of
/// gradient `(gx, gy)`, for a body at heading `yaw`.
///
/// With `R = Rz(yaw) Ry(pitch) Rx(roll)` the body z axis expressed in the
/// yaw-aligned frame is `(cos r sin p, -sin r, cos r cos p)`; matching it to
/// the normal `(-gx', -gy', 1)/n` gives `pitch = -atan(gx')` and
/// `roll = asin(gy'/n)`.
pub fn attitude_from_gradient(gx: f64, gy: f64, yaw: f64) -> (f64, f64) {
    let (s, c) = yaw.sin_cos();
    let gbx = gx * c + gy * s;
    let gby = -gx * s + gy * c;
    let n = (1.0 + gx * gx + gy * gy).sqrt();
    let pitch = -gbx.atan();
    let roll = (gby / n).clamp(-1.0, 1.0).asin();
    (roll, pitch)
}

/// Occupied z indices of every grid column, sorted ascending.
struct Columns {
    min_x: i32,
    min_y: i32,
    width: usize,
    height: usize,
    cells: Vec<Vec<i32>>,
}

impl Columns {
    fn new(oc: &OccupancyOctree) -> Self {
        let (lo, hi) = oc.key_bounds();
        let width = (hi.x - lo.x + 1) as usize;
        let height = (hi.y - lo.y + 1) as usize;
        let mut cells = vec![Vec::new(); width * height];
        // Keys arrive sorted by (x, y, z), so each column is already ascending.
        for k in oc.occupied_keys() {
            cells[(k.y - lo.y) as usize * width + (k.x - lo.x) as usize].push(k.z);
        }
        Self {
            min_x: lo.x,
            min_y: lo.y,
            width,
            height,
            cells,
        }
    }

    fn column(&self, idx: usize) -> &[i32] {
        &self.cells[idx]
    }

    /// Occupied voxels with a free voxel directly above.
    fn surfaces(&self, idx: usize) -> impl Iterator<Item = i32> + '_ {
        let col = &self.cells[idx];
        col.iter()
            .enumerate()
            .filter(move |(n, z)| col.get(n + 1) != Some(&(**z + 1)))
            .map(|(_, z)| *z)
    }

    fn any_in(&self, idx: usize, lo: i32, hi: i32) -> bool {
        let col = &self.cells[idx];
        let start = col.partition_point(|z| *z < lo);
        col.get(start).is_some_and(|z| *z <= hi)
    }
}

/// Builds the elevation grid by flooding from the seed column.
///
/// A neighbor is admitted when it has a ground surface (an occupied voxel
/// with free space above) within `step_threshold` of the current cell's
/// ground. Admitted cells with an occupied voxel in the band
/// `(ground, ground + robot_height]` become obstacles and are not expanded.
/// Unreached cells next to free ones that contain such a band obstacle
/// (walls, cliff faces seen from below) are marked occupied too. Obstacle
/// cells take the elevation of their lowest free neighbor.
///
/// One ground level is kept per cell: stacked walkable levels (bridges,
/// multi-storey floors) are not represented.
pub fn build_gridmap(oc: &OccupancyOctree, seed: Pose6D, params: GridParams) -> Result<ElevationGrid, MapError> {
    build_gridmap_with_order(oc, seed, params, &NEIGHBORS_8)
}

const NEIGHBORS_8: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

/// Flood fill with an explicit neighbor expansion order.
pub fn build_gridmap_with_order(
    oc: &OccupancyOctree,
    seed: Pose6D,
    params: GridParams,
    neighbor_order: &[(i64, i64); 8],
) -> Result<ElevationGrid, MapError> {
    let r = oc.resolution();
    if !(params.step_threshold > 0.0) {
        return Err(MapError::InvalidParameter("step threshold must be positive".into()));
    }
    if !(params.robot_height > r) {
        return Err(MapError::InvalidParameter(
            "robot height must exceed the map resolution".into(),
        ));
    }
    let cols = Columns::new(oc);
    let (w, h) = (cols.width, cols.height);
    let step_voxels = (params.step_threshold / r + 1e-9).floor() as i32;
    let band_voxels = (params.robot_height / r + 1e-9).floor() as i32;
    let idx_of = |i: i64, j: i64| (i >= 0 && j >= 0 && (i as usize) < w && (j as usize) < h).then(|| j as usize * w + i as usize);

    let si = coord_to_index(seed.x, r) as i64 - cols.min_x as i64;
    let sj = coord_to_index(seed.y, r) as i64 - cols.min_y as i64;
    let seed_idx = idx_of(si, sj).ok_or(MapError::SeedOffMap)?;
    let seed_z = seed.z / r;
    let seed_ground = cols
        .surfaces(seed_idx)
        .min_by(|a, b| {
            let da = (*a as f64 - seed_z).abs();
            let db = (*b as f64 - seed_z).abs();
            da.partial_cmp(&db).unwrap().then(b.cmp(a))
        })
        .ok_or(MapError::SeedOffMap)?;

    let band_hit = |idx: usize, ground: i32| cols.any_in(idx, ground + 1, ground + band_voxels);

    let mut ground: Vec<Option<i32>> = vec![None; w * h];
    let mut occupancy = vec![CellOccupancy::Unknown; w * h];
    ground[seed_idx] = Some(seed_ground);
    if band_hit(seed_idx, seed_ground) {
        return Err(MapError::SeedInObstacle);
    }
    occupancy[seed_idx] = CellOccupancy::Free;

    let mut queue = VecDeque::from([(si, sj)]);
    while let Some((i, j)) = queue.pop_front() {
        let g = ground[idx_of(i, j).unwrap()].unwrap();
        for (di, dj) in neighbor_order {
            let Some(n) = idx_of(i + di, j + dj) else { continue };
            if ground[n].is_some() {
                continue;
            }
            let candidate = cols
                .surfaces(n)
                .filter(|s| (s - g).abs() <= step_voxels)
                .min_by(|a, b| (a - g).abs().cmp(&(b - g).abs()).then(b.cmp(a)));
            let Some(s) = candidate else { continue };
            ground[n] = Some(s);
            if band_hit(n, s) {
                occupancy[n] = CellOccupancy::Occupied;
            } else {
                occupancy[n] = CellOccupancy::Free;
                queue.push_back((i + di, j + dj));
            }
        }
    }

    // Band obstacles in unreached columns bordering free cells.
    let mut extra = Vec::new();
    for j in 0..h as i64 {
        for i in 0..w as i64 {
            let idx = idx_of(i, j).unwrap();
            if ground[idx].is_some() || cols.column(idx).is_empty() {
                continue;
            }
            let blocked = NEIGHBORS_8.iter().any(|(di, dj)| {
                idx_of(i + di, j + dj).is_some_and(|n| {
                    occupancy[n] == CellOccupancy::Free && band_hit(idx, ground[n].unwrap())
                })
            });
            if blocked {
                extra.push(idx);
            }
        }
    }
    for idx in extra {
        occupancy[idx] = CellOccupancy::Occupied;
    }

    // Elevation of free cells: window mean of quantized ground levels.
    let mut elevation = vec![f32::NAN; w * h];
    for j in 0..h as i64 {
        for i in 0..w as i64 {
            let idx = idx_of(i, j).unwrap();
            if occupancy[idx] != CellOccupancy::Free {
                continue;
            }
            let g = ground[idx].unwrap();
            let mut sum = 0i64;
            let mut count = 0i64;
            for dj in -SMOOTHING_HALF_WIDTH..=SMOOTHING_HALF_WIDTH {
                for di in -SMOOTHING_HALF_WIDTH..=SMOOTHING_HALF_WIDTH {
                    let Some(n) = idx_of(i + di, j + dj) else { continue };
                    if occupancy[n] != CellOccupancy::Free {
                        continue;
                    }
                    let gn = ground[n].unwrap();
                    if (gn - g).abs() <= step_voxels {
                        sum += gn as i64;
                        count += 1;
                    }
                }
            }
            elevation[idx] = (sum as f64 / count as f64 * r) as f32;
        }
    }
    for j in 0..h as i64 {
        for i in 0..w as i64 {
            let idx = idx_of(i, j).unwrap();
            if occupancy[idx] != CellOccupancy::Occupied {
                continue;
            }
            let lowest = NEIGHBORS_8
                .iter()
                .filter_map(|(di, dj)| idx_of(i + di, j + dj))
                .filter(|n| occupancy[*n] == CellOccupancy::Free)
                .map(|n| elevation[n])
                .fold(f32::NAN, f32::min);
            elevation[idx] = if lowest.is_finite() {
                lowest
            } else {
                (ground[idx].map(|g| g as f64 * r).unwrap_or(f64::NAN)) as f32
            };
        }
    }
    // Occupied cells with neither a free neighbor nor a ground level of
    // their own cannot carry an elevation.
    for (e, o) in elevation.iter().zip(occupancy.iter_mut()) {
        if !e.is_finite() {
            *o = CellOccupancy::Unknown;
        }
    }

    ElevationGrid::from_layers(
        r,
        (cols.min_x as f64 * r, cols.min_y as f64 * r),
        w,
        h,
        elevation,
        occupancy,
    )
}
