use serde::{Deserialize, Serialize};

use super::World;
use crate::error::{Error, Result};
use crate::geom::{Aabb, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HitKind {
    Obstacle,
    Ground,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    /// Distance along the normalized ray; `+∞` when nothing was hit.
    pub distance: f64,
    pub kind: HitKind,
}

impl Hit {
    pub const MISS: Hit = Hit { distance: f64::INFINITY, kind: HitKind::None };
}

/// First intersection of a ray with the obstacles or the ground. The ray
/// terminates without a hit where it leaves the scene extent.
pub fn raycast(world: &World, origin: &Vec3, direction: &Vec3, max_range: f64) -> Result<Hit> {
    let n = direction.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::domain("raycast direction must be non-zero"));
    }
    let dir = direction / n;
    Ok(cast_normalized(world, origin, &dir, max_range))
}

pub(crate) fn cast_normalized(world: &World, origin: &Vec3, dir: &Vec3, max_range: f64) -> Hit {
    let bounds = Aabb::new(Vec3::zeros(), world.extent);
    let Some((_, t_exit)) = bounds.ray_interval(origin, dir) else {
        return Hit::MISS;
    };
    let limit = t_exit.min(max_range);
    if limit < 0.0 {
        return Hit::MISS;
    }
    let mut best = Hit::MISS;
    if dir.z < 0.0 {
        let t = -origin.z / dir.z;
        if t >= 0.0 && t <= limit + 1e-9 {
            let p = origin + dir * t;
            if p.x >= 0.0 && p.x <= world.extent.x && p.y >= 0.0 && p.y <= world.extent.y {
                best = Hit { distance: t, kind: HitKind::Ground };
            }
        }
    }
    for b in &world.boxes {
        if let Some((t0, t1)) = b.ray_interval(origin, dir) {
            if t1 < 0.0 {
                continue;
            }
            let t = t0.max(0.0);
            if t <= limit && t < best.distance {
                best = Hit { distance: t, kind: HitKind::Obstacle };
            }
        }
    }
    if best.distance > max_range {
        return Hit::MISS;
    }
    best
}

/// True iff nothing opaque sits strictly between `a` and `b`.
pub fn line_of_sight(world: &World, a: &Vec3, b: &Vec3) -> bool {
    let d = b - a;
    let len = d.norm();
    if len == 0.0 {
        return true;
    }
    let hit = cast_normalized(world, a, &(d / len), len);
    hit.kind == HitKind::None || hit.distance >= len - 1e-6
}
