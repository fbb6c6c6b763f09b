use crate::geom::{point_segment_distance, Aabb, Vec3};

/// Dense bit grid of cubic voxels anchored at the origin.
#[derive(Debug, Clone)]
pub struct VoxelGrid {
    pub voxel: f64,
    pub dims: [usize; 3],
    bits: Vec<u64>,
}

impl VoxelGrid {
    pub fn new(extent: Vec3, voxel: f64) -> Self {
        let dims = [0, 1, 2].map(|k| ((extent[k] / voxel).ceil() as usize).max(1));
        let n = dims[0] * dims[1] * dims[2];
        Self { voxel, dims, bits: vec![0; n.div_ceil(64)] }
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, v: [usize; 3]) -> usize {
        (v[2] * self.dims[1] + v[1]) * self.dims[0] + v[0]
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let x = idx % self.dims[0];
        let y = (idx / self.dims[0]) % self.dims[1];
        let z = idx / (self.dims[0] * self.dims[1]);
        [x, y, z]
    }

    /// Voxel holding `p`; points on the far extent face map to the last voxel.
    pub fn voxel_of(&self, p: &Vec3) -> Option<[usize; 3]> {
        let mut v = [0usize; 3];
        for k in 0..3 {
            let f = (p[k] / self.voxel).floor();
            if !(f >= 0.0) {
                return None;
            }
            let i = f as usize;
            v[k] = if i >= self.dims[k] {
                if p[k] <= self.dims[k] as f64 * self.voxel {
                    self.dims[k] - 1
                } else {
                    return None;
                }
            } else {
                i
            };
        }
        Some(v)
    }

    #[inline]
    pub fn get(&self, v: [usize; 3]) -> bool {
        self.get_index(self.index(v))
    }

    #[inline]
    pub fn get_index(&self, idx: usize) -> bool {
        self.bits[idx >> 6] >> (idx & 63) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, v: [usize; 3]) {
        let idx = self.index(v);
        self.bits[idx >> 6] |= 1 << (idx & 63);
    }

    pub fn center(&self, v: [usize; 3]) -> Vec3 {
        Vec3::new(
            (v[0] as f64 + 0.5) * self.voxel,
            (v[1] as f64 + 0.5) * self.voxel,
            (v[2] as f64 + 0.5) * self.voxel,
        )
    }

    pub fn voxel_min(&self, idx: usize) -> Vec3 {
        let v = self.coords(idx);
        Vec3::new(v[0] as f64, v[1] as f64, v[2] as f64) * self.voxel
    }

    pub fn count_occupied(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn occupied_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.get_index(i))
    }

    fn axis_range(&self, k: usize, lo: f64, hi: f64) -> Option<(usize, usize)> {
        let a = (lo / self.voxel).floor().max(0.0);
        let b = ((hi / self.voxel).ceil() - 1.0).min(self.dims[k] as f64 - 1.0);
        (a <= b).then_some((a as usize, b as usize))
    }

    /// Marks every voxel whose volume overlaps the box with positive measure.
    pub fn fill_overlapping(&mut self, b: &Aabb) {
        let Some((x0, x1)) = self.axis_range(0, b.min.x, b.max.x) else { return };
        let Some((y0, y1)) = self.axis_range(1, b.min.y, b.max.y) else { return };
        let Some((z0, z1)) = self.axis_range(2, b.min.z, b.max.z) else { return };
        for z in z0..=z1 {
            for y in y0..=y1 {
                for x in x0..=x1 {
                    self.set([x, y, z]);
                }
            }
        }
    }

    /// Marks voxels whose center is closer than `clearance` to the box.
    pub fn fill_within(&mut self, b: &Aabb, clearance: f64) {
        let g = b.expanded(clearance);
        let Some((x0, x1)) = self.axis_range(0, g.min.x, g.max.x) else { return };
        let Some((y0, y1)) = self.axis_range(1, g.min.y, g.max.y) else { return };
        let Some((z0, z1)) = self.axis_range(2, g.min.z, g.max.z) else { return };
        for z in z0..=z1 {
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let c = self.center([x, y, z]);
                    if b.distance_to(&c) < clearance {
                        self.set([x, y, z]);
                    }
                }
            }
        }
    }

    /// Marks voxels whose center lies below `clearance`.
    pub fn fill_ground_band(&mut self, clearance: f64) {
        for z in 0..self.dims[2] {
            if (z as f64 + 0.5) * self.voxel >= clearance {
                break;
            }
            for y in 0..self.dims[1] {
                for x in 0..self.dims[0] {
                    self.set([x, y, z]);
                }
            }
        }
    }
}

/// Uniform-grid index over a point cloud for segment proximity queries.
#[derive(Debug, Clone)]
pub struct CloudIndex {
    cell: f64,
    dims: [usize; 3],
    starts: Vec<u32>,
    items: Vec<u32>,
}

impl CloudIndex {
    pub fn build(points: &[Vec3], extent: Vec3, cell: f64) -> Self {
        let dims = [0, 1, 2].map(|k| ((extent[k] / cell).floor() as usize) + 1);
        let n = dims[0] * dims[1] * dims[2];
        let cell_of = |p: &Vec3| -> usize {
            let c = [0, 1, 2].map(|k| ((p[k] / cell).floor().max(0.0) as usize).min(dims[k] - 1));
            (c[2] * dims[1] + c[1]) * dims[0] + c[0]
        };
        let mut counts = vec![0u32; n + 1];
        for p in points {
            counts[cell_of(p) + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut items = vec![0u32; points.len()];
        for (i, p) in points.iter().enumerate() {
            let c = cell_of(p);
            items[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }
        Self { cell, dims, starts: counts, items }
    }

    /// Is any cloud point within `radius` of the segment `[a, b]`?
    pub fn any_near_segment(&self, cloud: &[Vec3], a: &Vec3, b: &Vec3, radius: f64) -> bool {
        if self.items.is_empty() {
            return false;
        }
        let half_diag = self.cell * 3f64.sqrt() * 0.5;
        let lo = [0, 1, 2].map(|k| {
            let v = ((a[k].min(b[k]) - radius) / self.cell).floor();
            v.max(0.0) as usize
        });
        let hi = [0, 1, 2].map(|k| {
            let v = ((a[k].max(b[k]) + radius) / self.cell).floor();
            (v.max(0.0) as usize).min(self.dims[k] - 1)
        });
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    let c = (z * self.dims[1] + y) * self.dims[0] + x;
                    let (s, e) = (self.starts[c] as usize, self.starts[c + 1] as usize);
                    if s == e {
                        continue;
                    }
                    let center = Vec3::new(x as f64 + 0.5, y as f64 + 0.5, z as f64 + 0.5) * self.cell;
                    if point_segment_distance(&center, a, b).0 > radius + half_diag {
                        continue;
                    }
                    for &i in &self.items[s..e] {
                        if point_segment_distance(&cloud[i as usize], a, b).0 <= radius {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }
}
