//! Single-file map bundle (octree + grid), little-endian.
//!
//! ```text
//! "TMCLMAP1"
//! f64 resolution
//! i32 x3 octree min key, i32 x3 octree max key
//! f64 grid origin x, f64 grid origin y
//! u32 grid width, u32 grid height
//! u64 voxel count, then per voxel: i32 kx, i32 ky, i32 kz, f32 log-odds
//! f32 x (width*height) elevation, NaN = unknown
//! f32 x (width*height) occupancy code: 0 unknown, 1 free, 2 occupied
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::{CellOccupancy, ElevationGrid, MapError, OccupancyOctree, VoxelKey};

pub const BUNDLE_MAGIC: &[u8; 8] = b"TMCLMAP1";

#[derive(Debug)]
pub struct MapBundle {
    pub octree: OccupancyOctree,
    pub grid: ElevationGrid,
}

pub fn write_bundle<W: Write>(mut out: W, octree: &OccupancyOctree, grid: &ElevationGrid) -> Result<(), MapError> {
    if (octree.resolution() - grid.resolution()).abs() > 0.0 {
        return Err(MapError::Format("octree and grid resolutions differ".into()));
    }
    let mut buf = Vec::new();
    buf.extend_from_slice(BUNDLE_MAGIC);
    buf.extend_from_slice(&octree.resolution().to_le_bytes());
    let (lo, hi) = octree.key_bounds();
    for v in [lo.x, lo.y, lo.z, hi.x, hi.y, hi.z] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let (ox, oy) = grid.origin();
    buf.extend_from_slice(&ox.to_le_bytes());
    buf.extend_from_slice(&oy.to_le_bytes());
    let (w, h) = grid.dims();
    buf.extend_from_slice(&(w as u32).to_le_bytes());
    buf.extend_from_slice(&(h as u32).to_le_bytes());
    let voxels = octree.voxels();
    buf.extend_from_slice(&(voxels.len() as u64).to_le_bytes());
    for (k, l) in voxels {
        buf.extend_from_slice(&k.x.to_le_bytes());
        buf.extend_from_slice(&k.y.to_le_bytes());
        buf.extend_from_slice(&k.z.to_le_bytes());
        buf.extend_from_slice(&l.to_le_bytes());
    }
    for e in grid.elevation_layer() {
        let e = if e.is_finite() { *e } else { f32::NAN };
        buf.extend_from_slice(&e.to_le_bytes());
    }
    for o in grid.occupancy_layer() {
        buf.extend_from_slice(&(o.code() as f32).to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], MapError> {
        let end = self.pos + N;
        let bytes = self
            .data
            .get(self.pos..end)
            .ok_or_else(|| MapError::Format(format!("truncated at byte {}", self.pos)))?;
        self.pos = end;
        Ok(bytes.try_into().unwrap())
    }

    fn f64(&mut self) -> Result<f64, MapError> {
        Ok(f64::from_le_bytes(self.take()?))
    }

    fn f32(&mut self) -> Result<f32, MapError> {
        Ok(f32::from_le_bytes(self.take()?))
    }

    fn i32(&mut self) -> Result<i32, MapError> {
        Ok(i32::from_le_bytes(self.take()?))
    }

    fn u32(&mut self) -> Result<u32, MapError> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn u64(&mut self) -> Result<u64, MapError> {
        Ok(u64::from_le_bytes(self.take()?))
    }
}

pub fn read_bundle<R: Read>(mut input: R) -> Result<MapBundle, MapError> {
    let mut data = Vec::new();
    input.read_to_end(&mut data)?;
    let mut c = Cursor { data: &data, pos: 0 };
    if &c.take::<8>()? != BUNDLE_MAGIC {
        return Err(MapError::Format("bad magic".into()));
    }
    let resolution = c.f64()?;
    let lo = VoxelKey::new(c.i32()?, c.i32()?, c.i32()?);
    let hi = VoxelKey::new(c.i32()?, c.i32()?, c.i32()?);
    let mut octree = OccupancyOctree::with_bounds(resolution, lo, hi)?;
    let origin = (c.f64()?, c.f64()?);
    let w = c.u32()? as usize;
    let h = c.u32()? as usize;
    let count = c.u64()?;
    let remaining = (data.len() - c.pos) as u64;
    if count.saturating_mul(16) > remaining {
        return Err(MapError::Format("voxel count exceeds file size".into()));
    }
    for _ in 0..count {
        let k = VoxelKey::new(c.i32()?, c.i32()?, c.i32()?);
        let l = c.f32()?;
        octree.set_log_odds(k, l)?;
    }
    let cells = w
        .checked_mul(h)
        .filter(|n| (*n as u64).saturating_mul(8) <= (data.len() - c.pos) as u64)
        .ok_or_else(|| MapError::Format("grid dimensions exceed file size".into()))?;
    let mut elevation = Vec::with_capacity(cells);
    for _ in 0..cells {
        elevation.push(c.f32()?);
    }
    let mut occupancy = Vec::with_capacity(cells);
    for _ in 0..cells {
        let code = c.f32()?;
        let occ = (code.fract() == 0.0 && (0.0..=2.0).contains(&code))
            .then(|| CellOccupancy::from_code(code as u8))
            .flatten()
            .ok_or_else(|| MapError::Format(format!("bad occupancy code {code}")))?;
        occupancy.push(occ);
    }
    if c.pos != data.len() {
        return Err(MapError::Format("trailing bytes".into()));
    }
    let grid = ElevationGrid::from_layers(resolution, origin, w, h, elevation, occupancy)?;
    Ok(MapBundle { octree, grid })
}

pub fn write_bundle_file(path: &Path, octree: &OccupancyOctree, grid: &ElevationGrid) -> Result<(), MapError> {
    let file = std::fs::File::create(path)?;
    write_bundle(std::io::BufWriter::new(file), octree, grid)
}

pub fn read_bundle_file(path: &Path) -> Result<MapBundle, MapError> {
    read_bundle(std::fs::File::open(path)?)
}
