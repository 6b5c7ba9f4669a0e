use nalgebra::Vector3;

use crate::worldmap::{OccupancyOctree, VoxelKey};

/// Entry distance of the ray into the axis-aligned box, if it crosses it
/// within `[t0, t1]`.
fn slab_entry(origin: &Vector3<f64>, dir: &Vector3<f64>, lo: &Vector3<f64>, hi: &Vector3<f64>, t0: f64, t1: f64) -> Option<f64> {
    let (mut near, mut far) = (t0, t1);
    for a in 0..3 {
        if dir[a] == 0.0 {
            if origin[a] < lo[a] || origin[a] >= hi[a] {
                return None;
            }
            continue;
        }
        let (mut ta, mut tb) = ((lo[a] - origin[a]) / dir[a], (hi[a] - origin[a]) / dir[a]);
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        near = near.max(ta);
        far = far.min(tb);
        if near > far {
            return None;
        }
    }
    Some(near)
}

/// Brute-force ray cast used to check the voxel traversal.
///
/// Marches the ray in steps of a tenth of the resolution; within each step
/// every occupied voxel touching the step's bounding box is slab-tested, so
/// corner clips shorter than a step are still found. Returns the entry
/// distance and key of the first occupied voxel within `max_range`.
pub fn oracle_cast_ray_voxel(
    oc: &OccupancyOctree,
    origin: &Vector3<f64>,
    target: &Vector3<f64>,
    max_range: f64,
) -> Option<(f64, VoxelKey)> {
    let dir = target - origin;
    let len = dir.norm();
    if len == 0.0 || !(max_range > 0.0) {
        return None;
    }
    let dir = dir / len;
    let r = oc.resolution();
    let step = r / 10.0;
    let half = Vector3::repeat(0.5 * r);
    let mut s = 0.0;
    while s < max_range {
        let e = (s + step).min(max_range);
        let a = origin + dir * s;
        let b = origin + dir * e;
        let ka = oc.key_of(&a);
        let kb = oc.key_of(&b);
        let mut best: Option<(f64, VoxelKey)> = None;
        for x in ka.x.min(kb.x) - 1..=ka.x.max(kb.x) + 1 {
            for y in ka.y.min(kb.y) - 1..=ka.y.max(kb.y) + 1 {
                for z in ka.z.min(kb.z) - 1..=ka.z.max(kb.z) + 1 {
                    let key = VoxelKey::new(x, y, z);
                    if !oc.is_occupied_key(key) {
                        continue;
                    }
                    let c = oc.center_of(key);
                    if let Some(t) = slab_entry(origin, &dir, &(c - half), &(c + half), s, e) {
                        if best.map_or(true, |(bt, _)| t < bt) {
                            best = Some((t, key));
                        }
                    }
                }
            }
        }
        if best.is_some() {
            return best;
        }
        s = e;
    }
    None
}

/// Distance-only form of [`oracle_cast_ray_voxel`]; infinite when nothing
/// is hit.
pub fn oracle_cast_ray(oc: &OccupancyOctree, origin: &Vector3<f64>, target: &Vector3<f64>, max_range: f64) -> f64 {
    oracle_cast_ray_voxel(oc, origin, target, max_range).map_or(f64::INFINITY, |(t, _)| t)
}
