//! Queryable runtime geometry derived from a [`Scene`].
//!
//! The world is immutable after [`build_world`]; every query takes `&self`
//! and is safe to issue from several threads.

mod camera;
mod grid;
mod path;
mod raycast;

pub use camera::{capture, Camera, Capture, Mount, Observation, Pose, RigConfig, VisiblePerson};
pub use grid::{CloudIndex, VoxelGrid};
pub use path::{plan_path, straight_clear, Path, DEFAULT_CLEARANCE};
pub use raycast::{line_of_sight, raycast, Hit, HitKind};
pub(crate) use raycast::cast_normalized;

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::geom::{Aabb, Vec3};
use crate::scene::{Scene, PERSON_HEIGHT};

const CLOUD_CELL: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldConfig {
    pub voxel: f64,
    pub cloud_pitch: f64,
    /// Thickness of the implicit platform under an elevated block.
    pub platform_thickness: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self { voxel: 0.5, cloud_pitch: 0.25, platform_thickness: 0.3 }
    }
}

pub struct World {
    pub extent: Vec3,
    /// Scene obstacles followed by block platforms.
    pub boxes: Vec<Aabb>,
    pub obstacle_count: usize,
    pub occupancy: VoxelGrid,
    pub surface_cloud: Vec<Vec3>,
    pub persons: Vec<Vec3>,
    pub config: WorldConfig,
    cloud_index: CloudIndex,
    person_buckets: PersonBuckets,
    inflated: RwLock<HashMap<u64, Arc<VoxelGrid>>>,
}

impl std::fmt::Debug for World {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("World")
            .field("extent", &self.extent)
            .field("boxes", &self.boxes.len())
            .field("surface_cloud", &self.surface_cloud.len())
            .field("persons", &self.persons.len())
            .finish()
    }
}

pub fn build_world(scene: &Scene) -> World {
    build_world_with(scene, WorldConfig::default())
}

pub fn build_world_with(scene: &Scene, config: WorldConfig) -> World {
    let mut boxes = scene.obstacles.clone();
    for b in &scene.blocks {
        if b.base_height > 0.0 {
            let r = &b.region;
            let bottom = (b.base_height - config.platform_thickness).max(0.0);
            boxes.push(Aabb::new(Vec3::new(r.x_min, r.y_min, bottom), Vec3::new(r.x_max, r.y_max, b.base_height)));
        }
    }

    let mut occupancy = VoxelGrid::new(scene.extent, config.voxel);
    for b in &boxes {
        occupancy.fill_overlapping(b);
    }

    let mut surface_cloud = Vec::new();
    for b in &boxes {
        sample_box_surface(b, config.cloud_pitch, &scene.extent, &mut surface_cloud);
    }
    let cloud_index = CloudIndex::build(&surface_cloud, scene.extent, CLOUD_CELL);

    World {
        extent: scene.extent,
        obstacle_count: scene.obstacles.len(),
        boxes,
        occupancy,
        cloud_index,
        person_buckets: PersonBuckets::build(&scene.persons, 8.0),
        surface_cloud,
        persons: scene.persons.clone(),
        config,
        inflated: RwLock::new(HashMap::new()),
    }
}

impl World {
    pub fn in_extent(&self, p: &Vec3) -> bool {
        (0..3).all(|k| p[k] >= 0.0 && p[k] <= self.extent[k])
    }

    /// Is `p` inside any obstacle or platform (closed test)?
    pub fn inside_obstacle(&self, p: &Vec3) -> bool {
        self.boxes.iter().any(|b| b.contains(p))
    }

    /// Inside the extent and in a free voxel.
    pub fn is_free(&self, p: &Vec3) -> bool {
        self.in_extent(p) && self.occupancy.voxel_of(p).is_some_and(|v| !self.occupancy.get(v))
    }

    pub fn head(&self, person: usize) -> Vec3 {
        self.persons[person] + Vec3::new(0.0, 0.0, PERSON_HEIGHT)
    }

    pub fn cloud_index(&self) -> &CloudIndex {
        &self.cloud_index
    }

    /// Re-indexes `surface_cloud` after it was replaced.
    pub fn rebuild_cloud_index(&mut self) {
        self.cloud_index = CloudIndex::build(&self.surface_cloud, self.extent, CLOUD_CELL);
    }

    /// Indices of persons whose ground position is within `radius` (in xy)
    /// of `center`, in ascending order.
    pub fn persons_near(&self, center: &Vec3, radius: f64) -> Vec<usize> {
        self.person_buckets.query(&self.persons, center, radius)
    }

    /// Sampled vertical segment between two points is free of occupied voxels.
    pub fn segment_free(&self, a: &Vec3, b: &Vec3) -> bool {
        let len = (b - a).norm();
        let steps = (len / (self.config.voxel * 0.5)).ceil().max(1.0) as usize;
        (0..=steps).all(|i| self.is_free(&(a + (b - a) * (i as f64 / steps as f64))))
    }

    /// Occupancy inflated by `clearance`: a voxel is blocked when its center
    /// is closer than `clearance` to an obstacle or to the ground.
    pub fn inflated(&self, clearance: f64) -> Arc<VoxelGrid> {
        let key = clearance.to_bits();
        if let Some(g) = self.inflated.read().expect("inflation cache").get(&key) {
            return g.clone();
        }
        let mut grid = VoxelGrid::new(self.extent, self.config.voxel);
        grid.fill_ground_band(clearance);
        for b in &self.boxes {
            grid.fill_within(b, clearance);
        }
        let grid = Arc::new(grid);
        self.inflated.write().expect("inflation cache").insert(key, grid.clone());
        grid
    }
}

/// Lattice points on the surface of a box at the given pitch, clipped to
/// the extent. Shared edges and corners appear once.
pub fn sample_box_surface(b: &Aabb, pitch: f64, extent: &Vec3, out: &mut Vec<Vec3>) {
    let ticks: Vec<Vec<f64>> = (0..3).map(|k| axis_ticks(b.min[k], b.max[k], pitch)).collect();
    let (nx, ny, nz) = (ticks[0].len(), ticks[1].len(), ticks[2].len());
    for (i, &x) in ticks[0].iter().enumerate() {
        for (j, &y) in ticks[1].iter().enumerate() {
            let on_xy_face = i == 0 || i == nx - 1 || j == 0 || j == ny - 1;
            for (k, &z) in ticks[2].iter().enumerate() {
                if !(on_xy_face || k == 0 || k == nz - 1) {
                    continue;
                }
                let p = Vec3::new(x, y, z);
                if (0..3).all(|a| p[a] >= 0.0 && p[a] <= extent[a]) {
                    out.push(p);
                }
            }
        }
    }
}

/// Number of lattice points [`sample_box_surface`] produces for a box
/// that lies fully inside the extent.
pub fn surface_point_count(b: &Aabb, pitch: f64) -> usize {
    let n: Vec<usize> = (0..3).map(|k| axis_ticks(b.min[k], b.max[k], pitch).len()).collect();
    n[0] * n[1] * n[2] - n[0].saturating_sub(2) * n[1].saturating_sub(2) * n[2].saturating_sub(2)
}

fn axis_ticks(lo: f64, hi: f64, pitch: f64) -> Vec<f64> {
    let mut t = Vec::new();
    let mut k = 0usize;
    loop {
        let v = lo + k as f64 * pitch;
        if v >= hi - 1e-9 {
            break;
        }
        t.push(v);
        k += 1;
    }
    t.push(hi);
    t
}

/// 2D bucket grid over person ground positions.
struct PersonBuckets {
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl PersonBuckets {
    fn build(persons: &[Vec3], cell: f64) -> Self {
        let (mut max_x, mut max_y) = (0.0f64, 0.0f64);
        for p in persons {
            max_x = max_x.max(p.x);
            max_y = max_y.max(p.y);
        }
        let nx = (max_x / cell).floor() as usize + 1;
        let ny = (max_y / cell).floor() as usize + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        for (i, p) in persons.iter().enumerate() {
            let bx = ((p.x / cell).floor().max(0.0) as usize).min(nx - 1);
            let by = ((p.y / cell).floor().max(0.0) as usize).min(ny - 1);
            buckets[by * nx + bx].push(i as u32);
        }
        Self { cell, nx, ny, buckets }
    }

    fn query(&self, persons: &[Vec3], c: &Vec3, radius: f64) -> Vec<usize> {
        let lo_x = ((c.x - radius) / self.cell).floor().max(0.0) as usize;
        let lo_y = ((c.y - radius) / self.cell).floor().max(0.0) as usize;
        let hi_x = ((c.x + radius) / self.cell).floor();
        let hi_y = ((c.y + radius) / self.cell).floor();
        if hi_x < 0.0 || hi_y < 0.0 {
            return Vec::new();
        }
        let hi_x = (hi_x as usize).min(self.nx - 1);
        let hi_y = (hi_y as usize).min(self.ny - 1);
        let r2 = radius * radius;
        let mut out = Vec::new();
        for by in lo_y..=hi_y {
            for bx in lo_x..=hi_x {
                for &i in &self.buckets[by * self.nx + bx] {
                    let p = &persons[i as usize];
                    if (p.x - c.x).powi(2) + (p.y - c.y).powi(2) <= r2 {
                        out.push(i as usize);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Rect;
    use crate::scene::CrowdBlock;

    fn scene_with(obstacles: Vec<Aabb>) -> Scene {
        Scene { obstacles, ..Scene::empty(Vec3::new(20.0, 20.0, 20.0), 0) }
    }

    #[test]
    fn obstacle_free_world_is_empty() {
        let w = build_world(&scene_with(vec![]));
        assert_eq!(w.occupancy.count_occupied(), 0);
        assert!(w.surface_cloud.is_empty());
    }

    #[test]
    fn unit_box_surface_count_matches_closed_form() {
        let b = Aabb::new(Vec3::new(2.0, 3.0, 0.0), Vec3::new(3.0, 4.0, 1.0));
        let w = build_world(&scene_with(vec![b]));
        // 5 ticks per axis at 0.25 m: 5^3 lattice minus the 3^3 interior.
        assert_eq!(w.surface_cloud.len(), 5 * 5 * 5 - 3 * 3 * 3);
        assert_eq!(surface_point_count(&b, 0.25), 98);
        for p in &w.surface_cloud {
            let on_face = (0..3).any(|k| (p[k] - b.min[k]).abs() < 1e-6 || (p[k] - b.max[k]).abs() < 1e-6);
            assert!(on_face && b.contains(p));
        }
        // a 1 m cube at 0.5 m voxels occupies 2x2x2 voxels
        assert_eq!(w.occupancy.count_occupied(), 8);
    }

    #[test]
    fn occupied_voxels_intersect_boxes() {
        let boxes = vec![
            Aabb::new(Vec3::new(1.1, 2.3, 0.0), Vec3::new(4.9, 3.1, 2.2)),
            Aabb::new(Vec3::new(10.0, 10.0, 5.0), Vec3::new(10.2, 15.0, 5.3)),
        ];
        let w = build_world(&scene_with(boxes.clone()));
        let v = w.occupancy.voxel;
        for idx in w.occupancy.occupied_indices() {
            let lo = w.occupancy.voxel_min(idx);
            let vb = Aabb::new(lo, lo + Vec3::repeat(v));
            assert!(boxes.iter().any(|b| (0..3).all(|k| vb.min[k] < b.max[k] && vb.max[k] > b.min[k])));
        }
    }

    #[test]
    fn flush_box_stays_inside_extent() {
        let b = Aabb::new(Vec3::new(15.0, 15.0, 0.0), Vec3::new(20.0, 20.0, 20.0));
        let w = build_world(&scene_with(vec![b, Aabb::new(Vec3::new(-2.0, 0.0, 0.0), Vec3::new(1.0, 1.0, 1.0))]));
        assert!(w.surface_cloud.iter().all(|p| w.in_extent(p)));
    }

    #[test]
    fn elevated_blocks_get_platforms() {
        let mut scene = scene_with(vec![]);
        scene.blocks.push(CrowdBlock::new(Rect::new(2.0, 2.0, 6.0, 6.0), 3.0, 1.0));
        scene.blocks.push(CrowdBlock::new(Rect::new(8.0, 8.0, 9.0, 9.0), 0.0, 1.0));
        let w = build_world(&scene);
        assert_eq!(w.boxes.len(), 1);
        assert!(w.inside_obstacle(&Vec3::new(4.0, 4.0, 2.9)));
        assert!(!w.inside_obstacle(&Vec3::new(4.0, 4.0, 3.5)));
    }

    #[test]
    fn persons_near_matches_brute_force() {
        let persons: Vec<Vec3> = (0..200).map(|i| Vec3::new((i * 37 % 100) as f64, (i * 53 % 90) as f64, 0.0)).collect();
        let scene = Scene { persons: persons.clone(), ..Scene::empty(Vec3::new(100.0, 100.0, 10.0), 0) };
        let w = build_world(&scene);
        let c = Vec3::new(40.0, 30.0, 12.0);
        let expect: Vec<usize> = (0..persons.len())
            .filter(|&i| (persons[i].x - c.x).powi(2) + (persons[i].y - c.y).powi(2) <= 25.0f64.powi(2))
            .collect();
        assert_eq!(w.persons_near(&c, 25.0), expect);
    }
}
