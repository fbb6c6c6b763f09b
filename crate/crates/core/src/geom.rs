//! Small geometric primitives shared by every stage.

use serde::{Deserialize, Serialize};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Axis-aligned box in world coordinates (meters, z-up).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn is_valid(&self) -> bool {
        (0..3).all(|i| self.min[i] < self.max[i] && self.min[i].is_finite() && self.max[i].is_finite())
    }

    /// Closed containment test.
    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    /// Euclidean distance from `p` to the box (0 inside).
    pub fn distance_to(&self, p: &Vec3) -> f64 {
        let mut d2 = 0.0;
        for i in 0..3 {
            let d = (self.min[i] - p[i]).max(0.0).max(p[i] - self.max[i]);
            d2 += d * d;
        }
        d2.sqrt()
    }

    pub fn expanded(&self, margin: f64) -> Aabb {
        let m = Vec3::repeat(margin);
        Aabb::new(self.min - m, self.max + m)
    }

    /// Slab test. Returns the parametric interval `[t_enter, t_exit]` where
    /// the line `origin + t * dir` is inside the box, if any.
    pub fn ray_interval(&self, origin: &Vec3, dir: &Vec3) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for i in 0..3 {
            if dir[i] == 0.0 {
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / dir[i];
            let mut a = (self.min[i] - origin[i]) * inv;
            let mut b = (self.max[i] - origin[i]) * inv;
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
            if t0 > t1 {
                return None;
            }
        }
        Some((t0, t1))
    }

    /// Does the closed segment `[a, b]` touch the box?
    pub fn intersects_segment(&self, a: &Vec3, b: &Vec3) -> bool {
        match self.ray_interval(a, &(b - a)) {
            Some((t0, t1)) => t1 >= 0.0 && t0 <= 1.0,
            None => false,
        }
    }
}

/// Axis-aligned rectangle in the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self { x_min, y_min, x_max, y_max }
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min).max(0.0) * (self.y_max - self.y_min).max(0.0)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    pub fn intersect(&self, other: &Rect) -> Rect {
        Rect::new(
            self.x_min.max(other.x_min),
            self.y_min.max(other.y_min),
            self.x_max.min(other.x_max),
            self.y_max.min(other.y_max),
        )
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x_min + self.x_max) * 0.5, (self.y_min + self.y_max) * 0.5)
    }
}

/// Distance from `p` to the closed segment `[a, b]` together with the
/// clamped projection parameter in `[0, 1]`.
pub fn point_segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> (f64, f64) {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return ((p - a).norm(), 0.0);
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    ((a + ab * t - p).norm(), t)
}

/// Rounds to the nearest value representable with six fractional decimal
/// digits, so that the scene file format round-trips exactly.
pub fn quantize6(x: f64) -> f64 {
    format!("{x:.6}").parse().expect("formatted float parses")
}

pub fn quantize6_vec(v: &Vec3) -> Vec3 {
    Vec3::new(quantize6(v.x), quantize6(v.y), quantize6(v.z))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_distance_clamps_to_endpoints() {
        let a = Vec3::new(0.0, 0.0, 0.0);
        let b = Vec3::new(0.0, 0.0, 10.0);
        let (d, t) = point_segment_distance(&Vec3::new(0.0, 3.0, -4.0), &a, &b);
        assert!((d - 5.0).abs() < 1e-12);
        assert_eq!(t, 0.0);
        let (d, t) = point_segment_distance(&Vec3::new(1.0, 0.0, 5.0), &a, &b);
        assert!((d - 1.0).abs() < 1e-12);
        assert!((t - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ray_interval_axis_parallel() {
        let b = Aabb::new(Vec3::new(1.0, -1.0, -1.0), Vec3::new(2.0, 1.0, 1.0));
        let (t0, t1) = b.ray_interval(&Vec3::zeros(), &Vec3::x()).unwrap();
        assert_eq!((t0, t1), (1.0, 2.0));
        assert!(b.ray_interval(&Vec3::new(0.0, 2.0, 0.0), &Vec3::x()).is_none());
    }

    #[test]
    fn quantize_is_idempotent() {
        for x in [0.1234567891, -3.9999995, 1e-9, 12345.6789012] {
            let q = quantize6(x);
            assert_eq!(q.to_bits(), quantize6(q).to_bits());
        }
    }
}
