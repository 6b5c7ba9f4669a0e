//! Probabilistic occupancy octree over a bounded lattice of cubic voxels.
//!
//! Voxel `k` along an axis covers `[(k - 1/2) r, (k + 1/2) r)`, so voxel
//! centers sit on integer multiples of the resolution. The tree subdivides
//! the bounded region down to 8x8x8 bricks of log-odds values; untouched
//! voxels keep the 0.5 prior (log-odds 0).

use nalgebra::Vector3;

use super::{MapError, PointCloud};

/// Log-odds written for a voxel that contains at least one cloud point
/// (occupancy 0.97).
pub const LOG_ODDS_HIT: f32 = 3.476_099_6;

const BRICK_BITS: u32 = 3;
const BRICK_SIDE: i32 = 1 << BRICK_BITS;
const BRICK_LEN: usize = (BRICK_SIDE * BRICK_SIDE * BRICK_SIDE) as usize;

/// Integer lattice coordinates of a voxel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VoxelKey {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl VoxelKey {
    pub fn new(x: i32, y: i32, z: i32) -> Self {
        Self { x, y, z }
    }

    fn component(&self, axis: usize) -> i32 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    fn component_mut(&mut self, axis: usize) -> &mut i32 {
        match axis {
            0 => &mut self.x,
            1 => &mut self.y,
            _ => &mut self.z,
        }
    }
}

/// Converts a metric coordinate to its lattice index.
#[inline]
pub fn coord_to_index(c: f64, resolution: f64) -> i32 {
    (c / resolution + 0.5).floor() as i32
}

struct Brick {
    log_odds: [f32; BRICK_LEN],
}

enum Node {
    Empty,
    Branch(Box<[Node; 8]>),
    Leaf(Box<Brick>),
}

impl Node {
    fn empty_children() -> Box<[Node; 8]> {
        Box::new([
            Node::Empty,
            Node::Empty,
            Node::Empty,
            Node::Empty,
            Node::Empty,
            Node::Empty,
            Node::Empty,
            Node::Empty,
        ])
    }
}

/// Occupancy octree built from a static point cloud.
pub struct OccupancyOctree {
    resolution: f64,
    min_key: VoxelKey,
    max_key: VoxelKey,
    /// Number of branch levels above the bricks.
    depth: u32,
    root: Node,
    voxel_count: usize,
}

impl std::fmt::Debug for OccupancyOctree {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OccupancyOctree")
            .field("resolution", &self.resolution)
            .field("min_key", &self.min_key)
            .field("max_key", &self.max_key)
            .field("voxel_count", &self.voxel_count)
            .finish()
    }
}

impl OccupancyOctree {
    /// Creates an empty tree covering the inclusive key range `[min_key, max_key]`.
    pub fn with_bounds(resolution: f64, min_key: VoxelKey, max_key: VoxelKey) -> Result<Self, MapError> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(MapError::InvalidResolution(resolution));
        }
        if min_key.x > max_key.x || min_key.y > max_key.y || min_key.z > max_key.z {
            return Err(MapError::Format("octree bounds are inverted".into()));
        }
        let extent = (0..3)
            .map(|a| (max_key.component(a) - min_key.component(a) + 1) as i64)
            .max()
            .unwrap_or(1);
        let mut depth = 0;
        while ((BRICK_SIDE as i64) << depth) < extent {
            depth += 1;
        }
        Ok(Self {
            resolution,
            min_key,
            max_key,
            depth,
            root: Node::Empty,
            voxel_count: 0,
        })
    }

    /// An octree with no occupied voxels around the origin.
    pub fn empty(resolution: f64) -> Result<Self, MapError> {
        Self::with_bounds(resolution, VoxelKey::new(0, 0, 0), VoxelKey::new(0, 0, 0))
    }

    /// Marks the voxel containing each cloud point as occupied.
    pub fn from_point_cloud(pc: &PointCloud, resolution: f64) -> Result<Self, MapError> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(MapError::InvalidResolution(resolution));
        }
        if pc.is_empty() {
            return Err(MapError::EmptyPointCloud);
        }
        let mut keys: Vec<VoxelKey> = pc
            .points()
            .iter()
            .map(|p| {
                VoxelKey::new(
                    coord_to_index(p.x, resolution),
                    coord_to_index(p.y, resolution),
                    coord_to_index(p.z, resolution),
                )
            })
            .collect();
        keys.sort_unstable();
        keys.dedup();
        let mut min_key = keys[0];
        let mut max_key = keys[0];
        for k in &keys {
            for a in 0..3 {
                *min_key.component_mut(a) = min_key.component(a).min(k.component(a));
                *max_key.component_mut(a) = max_key.component(a).max(k.component(a));
            }
        }
        let mut tree = Self::with_bounds(resolution, min_key, max_key)?;
        for k in keys {
            tree.set_log_odds(k, LOG_ODDS_HIT)?;
        }
        Ok(tree)
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    /// Inclusive key bounds of the mapped region.
    pub fn key_bounds(&self) -> (VoxelKey, VoxelKey) {
        (self.min_key, self.max_key)
    }

    /// Metric axis-aligned bounds of the mapped region.
    pub fn metric_bounds(&self) -> (Vector3<f64>, Vector3<f64>) {
        let r = self.resolution;
        let lo = Vector3::new(
            (self.min_key.x as f64 - 0.5) * r,
            (self.min_key.y as f64 - 0.5) * r,
            (self.min_key.z as f64 - 0.5) * r,
        );
        let hi = Vector3::new(
            (self.max_key.x as f64 + 0.5) * r,
            (self.max_key.y as f64 + 0.5) * r,
            (self.max_key.z as f64 + 0.5) * r,
        );
        (lo, hi)
    }

    /// Number of voxels holding an explicit log-odds value.
    pub fn voxel_count(&self) -> usize {
        self.voxel_count
    }

    pub fn key_of(&self, p: &Vector3<f64>) -> VoxelKey {
        VoxelKey::new(
            coord_to_index(p.x, self.resolution),
            coord_to_index(p.y, self.resolution),
            coord_to_index(p.z, self.resolution),
        )
    }

    pub fn center_of(&self, k: VoxelKey) -> Vector3<f64> {
        Vector3::new(k.x as f64, k.y as f64, k.z as f64) * self.resolution
    }

    pub fn in_bounds(&self, k: VoxelKey) -> bool {
        (0..3).all(|a| {
            k.component(a) >= self.min_key.component(a) && k.component(a) <= self.max_key.component(a)
        })
    }

    fn brick_index(local: [i32; 3]) -> usize {
        let m = BRICK_SIDE - 1;
        ((local[0] & m) + BRICK_SIDE * (local[1] & m) + BRICK_SIDE * BRICK_SIDE * (local[2] & m)) as usize
    }

    fn local(&self, k: VoxelKey) -> [i32; 3] {
        [k.x - self.min_key.x, k.y - self.min_key.y, k.z - self.min_key.z]
    }

    fn child_slot(brick: [i32; 3], level: u32) -> usize {
        (((brick[0] >> level) & 1) | (((brick[1] >> level) & 1) << 1) | (((brick[2] >> level) & 1) << 2)) as usize
    }

    /// Brick holding the voxel at local coordinates, if allocated.
    fn find_brick(&self, local: [i32; 3]) -> Option<&Brick> {
        let brick = [local[0] >> BRICK_BITS, local[1] >> BRICK_BITS, local[2] >> BRICK_BITS];
        let mut node = &self.root;
        let mut level = self.depth;
        loop {
            match node {
                Node::Empty => return None,
                Node::Leaf(b) => return Some(b),
                Node::Branch(children) => {
                    level -= 1;
                    node = &children[Self::child_slot(brick, level)];
                }
            }
        }
    }

    /// Writes a log-odds value; the key must lie inside the tree bounds.
    pub fn set_log_odds(&mut self, k: VoxelKey, value: f32) -> Result<(), MapError> {
        if !self.in_bounds(k) {
            return Err(MapError::Format(format!("voxel {k:?} outside octree bounds")));
        }
        if !value.is_finite() {
            return Err(MapError::Format(format!("non-finite log-odds at {k:?}")));
        }
        let local = self.local(k);
        let brick = [local[0] >> BRICK_BITS, local[1] >> BRICK_BITS, local[2] >> BRICK_BITS];
        let mut node = &mut self.root;
        let mut level = self.depth;
        loop {
            if matches!(node, Node::Empty) {
                *node = if level == 0 {
                    Node::Leaf(Box::new(Brick {
                        log_odds: [0.0; BRICK_LEN],
                    }))
                } else {
                    Node::Branch(Node::empty_children())
                };
            }
            match node {
                Node::Leaf(b) => {
                    let slot = &mut b.log_odds[Self::brick_index(local)];
                    if *slot == 0.0 && value != 0.0 {
                        self.voxel_count += 1;
                    } else if *slot != 0.0 && value == 0.0 {
                        self.voxel_count -= 1;
                    }
                    *slot = value;
                    return Ok(());
                }
                Node::Branch(children) => {
                    level -= 1;
                    node = &mut children[Self::child_slot(brick, level)];
                }
                Node::Empty => unreachable!(),
            }
        }
    }

    /// Log-odds of a voxel; 0 (probability 0.5) when unknown or out of bounds.
    pub fn log_odds(&self, k: VoxelKey) -> f32 {
        if !self.in_bounds(k) {
            return 0.0;
        }
        let local = self.local(k);
        self.find_brick(local)
            .map(|b| b.log_odds[Self::brick_index(local)])
            .unwrap_or(0.0)
    }

    pub fn probability(&self, k: VoxelKey) -> f64 {
        let l = self.log_odds(k) as f64;
        1.0 / (1.0 + (-l).exp())
    }

    /// True when the voxel's occupancy probability exceeds 0.5.
    pub fn is_occupied_key(&self, k: VoxelKey) -> bool {
        self.log_odds(k) > 0.0
    }

    pub fn is_occupied(&self, p: &Vector3<f64>) -> bool {
        self.is_occupied_key(self.key_of(p))
    }

    /// All voxels with an explicit value, sorted by key.
    pub fn voxels(&self) -> Vec<(VoxelKey, f32)> {
        let mut out = Vec::with_capacity(self.voxel_count);
        self.collect(&self.root, self.depth, [0, 0, 0], &mut out);
        out.sort_unstable_by_key(|(k, _)| *k);
        out
    }

    fn collect(&self, node: &Node, level: u32, brick_origin: [i32; 3], out: &mut Vec<(VoxelKey, f32)>) {
        match node {
            Node::Empty => {}
            Node::Leaf(b) => {
                for (i, &v) in b.log_odds.iter().enumerate() {
                    if v != 0.0 {
                        let i = i as i32;
                        let lx = brick_origin[0] * BRICK_SIDE + i % BRICK_SIDE;
                        let ly = brick_origin[1] * BRICK_SIDE + (i / BRICK_SIDE) % BRICK_SIDE;
                        let lz = brick_origin[2] * BRICK_SIDE + i / (BRICK_SIDE * BRICK_SIDE);
                        out.push((
                            VoxelKey::new(lx + self.min_key.x, ly + self.min_key.y, lz + self.min_key.z),
                            v,
                        ));
                    }
                }
            }
            Node::Branch(children) => {
                let child_level = level - 1;
                for (slot, child) in children.iter().enumerate() {
                    let s = slot as i32;
                    let origin = [
                        brick_origin[0] | ((s & 1) << child_level),
                        brick_origin[1] | (((s >> 1) & 1) << child_level),
                        brick_origin[2] | (((s >> 2) & 1) << child_level),
                    ];
                    self.collect(child, child_level, origin, out);
                }
            }
        }
    }

    /// Occupied voxels (probability > 0.5), sorted by key.
    pub fn occupied_keys(&self) -> Vec<VoxelKey> {
        self.voxels()
            .into_iter()
            .filter(|(_, l)| *l > 0.0)
            .map(|(k, _)| k)
            .collect()
    }

    /// Distance from `origin` to the entry point of the first occupied voxel
    /// on the ray toward `target`, or `f64::INFINITY` if none lies within
    /// `max_range`.
    pub fn cast_ray(&self, origin: &Vector3<f64>, target: &Vector3<f64>, max_range: f64) -> f64 {
        self.cast_ray_voxel(origin, target, max_range)
            .map(|(_, d)| d)
            .unwrap_or(f64::INFINITY)
    }

    /// Like [`cast_ray`](Self::cast_ray) but also reports the voxel hit.
    ///
    /// Visits every voxel pierced by the ray in order (incremental lattice
    /// traversal), so no voxel is skipped regardless of how short the chord.
    pub fn cast_ray_voxel(
        &self,
        origin: &Vector3<f64>,
        target: &Vector3<f64>,
        max_range: f64,
    ) -> Option<(VoxelKey, f64)> {
        let delta = target - origin;
        let len = delta.norm();
        if !(len > 0.0) || !len.is_finite() {
            let k = self.key_of(origin);
            return self.is_occupied_key(k).then_some((k, 0.0));
        }
        let dir = delta / len;
        let r = self.resolution;
        // Lattice space: voxel k spans [k, k + 1).
        let u0 = [origin.x / r + 0.5, origin.y / r + 0.5, origin.z / r + 0.5];
        let lo = [self.min_key.x as f64, self.min_key.y as f64, self.min_key.z as f64];
        let hi = [
            self.max_key.x as f64 + 1.0,
            self.max_key.y as f64 + 1.0,
            self.max_key.z as f64 + 1.0,
        ];

        // Clip [0, max_range] against the bounds.
        let mut t_enter = 0.0_f64;
        let mut t_exit = max_range;
        for a in 0..3 {
            let d = dir[a] / r;
            if d == 0.0 {
                if u0[a] < lo[a] || u0[a] >= hi[a] {
                    return None;
                }
            } else {
                let t1 = (lo[a] - u0[a]) / d;
                let t2 = (hi[a] - u0[a]) / d;
                t_enter = t_enter.max(t1.min(t2));
                t_exit = t_exit.min(t1.max(t2));
            }
        }
        if t_enter > t_exit {
            return None;
        }

        let mut key = [0i32; 3];
        let mut step = [0i32; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut inv = [0.0; 3];
        for a in 0..3 {
            let u = u0[a] + t_enter * dir[a] / r;
            let k = (u.floor() as i32).clamp(self.min_key.component(a), self.max_key.component(a));
            key[a] = k;
            if dir[a] > 0.0 {
                step[a] = 1;
                inv[a] = r / dir[a];
                t_max[a] = ((k + 1) as f64 - u0[a]) * inv[a];
            } else if dir[a] < 0.0 {
                step[a] = -1;
                inv[a] = r / dir[a];
                t_max[a] = (k as f64 - u0[a]) * inv[a];
            }
        }

        let mut cursor = BrickCursor::default();
        let mut t = t_enter;
        loop {
            let k = VoxelKey::new(key[0], key[1], key[2]);
            if cursor.log_odds(self, k) > 0.0 {
                return Some((k, t));
            }
            let axis = if t_max[0] <= t_max[1] {
                if t_max[0] <= t_max[2] {
                    0
                } else {
                    2
                }
            } else if t_max[1] <= t_max[2] {
                1
            } else {
                2
            };
            t = t_max[axis];
            if t > t_exit {
                return None;
            }
            key[axis] += step[axis];
            if key[axis] < self.min_key.component(axis) || key[axis] > self.max_key.component(axis) {
                return None;
            }
            let boundary = if step[axis] > 0 { key[axis] + 1 } else { key[axis] };
            t_max[axis] = (boundary as f64 - u0[axis]) * inv[axis];
        }
    }
}

/// Remembers the last brick looked up so consecutive voxels along a ray
/// avoid a full descent.
#[derive(Default)]
struct BrickCursor<'a> {
    brick: Option<[i32; 3]>,
    data: Option<&'a Brick>,
}

impl<'a> BrickCursor<'a> {
    #[inline]
    fn log_odds(&mut self, tree: &'a OccupancyOctree, k: VoxelKey) -> f32 {
        let local = tree.local(k);
        let b = [local[0] >> BRICK_BITS, local[1] >> BRICK_BITS, local[2] >> BRICK_BITS];
        if self.brick != Some(b) {
            self.brick = Some(b);
            self.data = tree.find_brick(local);
        }
        self.data
            .map(|d| d.log_odds[OccupancyOctree::brick_index(local)])
            .unwrap_or(0.0)
    }
}
