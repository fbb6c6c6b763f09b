//! A* search over the 26-connected voxel graph of the inflated occupancy.

use std::cmp::Ordering;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap};

use log::warn;

use super::{VoxelGrid, World};
use crate::error::{Error, Result};
use crate::geom::Vec3;

pub const DEFAULT_CLEARANCE: f64 = 1.0;

/// Search gives up after this many expansions and reports unreachable.
const MAX_EXPANSIONS: usize = 4_000_000;

/// Sampling step used when testing a straight segment against the grid.
const SEGMENT_STEP: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Path {
    pub points: Vec<Vec3>,
}

impl Path {
    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    h: f64,
    idx: usize,
}

impl Eq for Open {}

impl Ord for Open {
    // reversed so BinaryHeap pops the smallest (f, h, idx)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Exact shortest 26-connected distance in free space, in voxel units.
fn octile(d: [usize; 3]) -> f64 {
    let mut d = d;
    d.sort_unstable();
    let (a, b, c) = (d[0] as f64, d[1] as f64, d[2] as f64);
    a * 3f64.sqrt() + (b - a) * 2f64.sqrt() + (c - b)
}

fn abs_diff(a: [usize; 3], b: [usize; 3]) -> [usize; 3] {
    [a[0].abs_diff(b[0]), a[1].abs_diff(b[1]), a[2].abs_diff(b[2])]
}

fn segment_clear(grid: &VoxelGrid, a: &Vec3, b: &Vec3) -> bool {
    let steps = ((b - a).norm() / SEGMENT_STEP).ceil().max(1.0) as usize;
    (0..=steps).all(|i| {
        let p = a + (b - a) * (i as f64 / steps as f64);
        grid.voxel_of(&p).is_some_and(|v| !grid.get(v))
    })
}

/// Is the straight segment clear of the occupancy inflated by `clearance`?
pub fn straight_clear(world: &World, a: &Vec3, b: &Vec3, clearance: f64) -> bool {
    segment_clear(&world.inflated(clearance), a, b)
}

/// Collision-free polyline from `a` to `b` keeping `clearance` from
/// obstacles and the ground, or `None` when unreachable.
pub fn plan_path(world: &World, a: &Vec3, b: &Vec3, clearance: f64) -> Result<Option<Path>> {
    if !(clearance >= 0.0) || !clearance.is_finite() {
        return Err(Error::domain("clearance must be a non-negative finite length"));
    }
    if !world.in_extent(a) {
        return Err(Error::domain(format!("path start {a:?} is outside the extent")));
    }
    if world.inside_obstacle(a) {
        return Err(Error::domain(format!("path start {a:?} is inside an obstacle")));
    }
    if a == b {
        return Ok(Some(Path { points: vec![*a] }));
    }
    let grid = world.inflated(clearance);
    let Some(goal) = grid.voxel_of(b) else { return Ok(None) };
    if grid.get(goal) {
        return Ok(None);
    }
    let start = grid.voxel_of(a).expect("start inside extent");
    if segment_clear(&grid, a, b) {
        return Ok(Some(Path { points: vec![*a, *b] }));
    }

    let step = grid.voxel;
    let start_idx = grid.index(start);
    let goal_idx = grid.index(goal);
    let dims = grid.dims;
    // g cost and parent per touched voxel
    let mut state: HashMap<usize, (f64, usize, bool)> = HashMap::new();
    let mut open = BinaryHeap::new();
    let h0 = octile(abs_diff(start, goal)) * step;
    state.insert(start_idx, (0.0, usize::MAX, false));
    open.push(Open { f: h0, h: h0, idx: start_idx });

    let blocked = |v: [usize; 3]| grid.get(v) && v != start;
    let mut expansions = 0;
    while let Some(Open { idx, .. }) = open.pop() {
        let (g, _, closed) = state[&idx];
        if closed {
            continue;
        }
        state.get_mut(&idx).unwrap().2 = true;
        if idx == goal_idx {
            break;
        }
        expansions += 1;
        if expansions > MAX_EXPANSIONS {
            warn!("path search from {a:?} to {b:?} exceeded {MAX_EXPANSIONS} expansions");
            return Ok(None);
        }
        let v = grid.coords(idx);
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue;
                    }
                    let d = [dx, dy, dz];
                    let mut n = [0usize; 3];
                    let mut inside = true;
                    for k in 0..3 {
                        let c = v[k] as i64 + d[k];
                        if c < 0 || c >= dims[k] as i64 {
                            inside = false;
                            break;
                        }
                        n[k] = c as usize;
                    }
                    if !inside || blocked(n) {
                        continue;
                    }
                    // no corner cutting: every voxel of the spanned cell block must be free
                    let axes: Vec<usize> = (0..3).filter(|&k| d[k] != 0).collect();
                    if axes.len() > 1 {
                        let mut ok = true;
                        for mask in 1..(1u32 << axes.len()) - 1 {
                            let mut w = v;
                            for (bit, &k) in axes.iter().enumerate() {
                                if mask >> bit & 1 == 1 {
                                    w[k] = n[k];
                                }
                            }
                            if blocked(w) {
                                ok = false;
                                break;
                            }
                        }
                        if !ok {
                            continue;
                        }
                    }
                    let cost = step * (axes.len() as f64).sqrt();
                    let ng = g + cost;
                    let nidx = grid.index(n);
                    let better = match state.entry(nidx) {
                        Entry::Vacant(e) => {
                            e.insert((ng, idx, false));
                            true
                        }
                        Entry::Occupied(mut e) => {
                            let s = e.get_mut();
                            if !s.2 && ng < s.0 - 1e-12 {
                                *s = (ng, idx, false);
                                true
                            } else {
                                false
                            }
                        }
                    };
                    if better {
                        let h = octile(abs_diff(n, goal)) * step;
                        open.push(Open { f: ng + h, h, idx: nidx });
                    }
                }
            }
        }
    }

    if !state.get(&goal_idx).is_some_and(|s| s.2) {
        return Ok(None);
    }
    let mut chain = Vec::new();
    let mut cur = state[&goal_idx].1;
    while cur != usize::MAX && cur != start_idx {
        chain.push(grid.center(grid.coords(cur)));
        cur = state[&cur].1;
    }
    chain.reverse();
    let mut points = Vec::with_capacity(chain.len() + 2);
    points.push(*a);
    points.extend(chain);
    points.push(*b);
    Ok(Some(Path { points }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Aabb;
    use crate::scene::Scene;
    use crate::world::build_world;

    fn world(obstacles: Vec<Aabb>) -> World {
        build_world(&Scene { obstacles, ..Scene::empty(Vec3::new(40.0, 40.0, 20.0), 0) })
    }

    fn assert_clear(w: &World, p: &Path, clearance: f64) {
        let g = w.inflated(clearance);
        for s in p.points.windows(2) {
            assert!(segment_clear(&g, &s[0], &s[1]), "{:?} -> {:?}", s[0], s[1]);
        }
    }

    #[test]
    fn free_straight_line_bounds() {
        let w = world(vec![]);
        let a = Vec3::new(5.25, 5.25, 5.25);
        let b = Vec3::new(15.25, 5.25, 5.25);
        let p = plan_path(&w, &a, &b, 1.0).unwrap().unwrap();
        let len = p.length();
        assert!((10.0..=10.0 * 3f64.sqrt()).contains(&len), "{len}");
    }

    #[test]
    fn goal_inside_box_is_unreachable() {
        let w = world(vec![Aabb::new(Vec3::new(10.0, 10.0, 0.0), Vec3::new(14.0, 14.0, 8.0))]);
        let p = plan_path(&w, &Vec3::new(2.0, 2.0, 5.0), &Vec3::new(12.0, 12.0, 4.0), 1.0).unwrap();
        assert!(p.is_none());
    }

    #[test]
    fn same_point_has_zero_length() {
        let w = world(vec![]);
        let a = Vec3::new(3.0, 3.0, 3.0);
        assert_eq!(plan_path(&w, &a, &a, 1.0).unwrap().unwrap().length(), 0.0);
    }

    #[test]
    fn start_inside_box_is_an_error() {
        let w = world(vec![Aabb::new(Vec3::new(10.0, 10.0, 0.0), Vec3::new(14.0, 14.0, 8.0))]);
        assert!(plan_path(&w, &Vec3::new(12.0, 12.0, 4.0), &Vec3::new(2.0, 2.0, 5.0), 1.0).is_err());
    }

    #[test]
    fn routes_around_a_wall() {
        let wall = Aabb::new(Vec3::new(19.0, 0.0, 0.0), Vec3::new(21.0, 30.0, 20.0));
        let w = world(vec![wall]);
        let a = Vec3::new(10.0, 10.0, 5.0);
        let b = Vec3::new(30.0, 10.0, 5.0);
        let p = plan_path(&w, &a, &b, 1.0).unwrap().unwrap();
        assert!(p.length() > (b - a).norm() + 10.0);
        assert_clear(&w, &p, 1.0);
        assert_eq!(p.points[0], a);
        assert_eq!(*p.points.last().unwrap(), b);
    }

    #[test]
    fn sealed_goal_is_unreachable() {
        // a closed room around the goal, open above only to the extent ceiling
        let room = vec![
            Aabb::new(Vec3::new(25.0, 25.0, 0.0), Vec3::new(35.0, 26.0, 20.0)),
            Aabb::new(Vec3::new(25.0, 34.0, 0.0), Vec3::new(35.0, 35.0, 20.0)),
            Aabb::new(Vec3::new(25.0, 25.0, 0.0), Vec3::new(26.0, 35.0, 20.0)),
            Aabb::new(Vec3::new(34.0, 25.0, 0.0), Vec3::new(35.0, 35.0, 20.0)),
        ];
        let w = world(room);
        assert!(plan_path(&w, &Vec3::new(5.0, 5.0, 5.0), &Vec3::new(30.0, 30.0, 5.0), 1.0).unwrap().is_none());
    }
}
