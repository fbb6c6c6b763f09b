use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalFit {
    pub normal: Vec3,
    /// Set when the input was too small or collinear; the normal is then `+z`.
    pub degenerate: bool,
}

/// Plane normal by principal components: the eigenvector of the smallest
/// covariance eigenvalue, oriented so `z >= 0` (ties broken toward `+x`,
/// then `+y`).
pub fn fit_normal(points: &[Vec3]) -> NormalFit {
    let fallback = NormalFit { normal: Vec3::z(), degenerate: true };
    if points.len() < 3 {
        return fallback;
    }
    let mean: Vec3 = points.iter().sum::<Vec3>() / points.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - mean;
        cov += d * d.transpose();
    }
    cov /= points.len() as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (l1, l2) = (eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]);
    if !(l2 > 0.0) || l1 <= 1e-12 * l2 {
        return fallback;
    }
    let n: Vec3 = eig.eigenvectors.column(order[0]).into_owned().normalize();
    NormalFit { normal: orient(n), degenerate: false }
}

fn orient(n: Vec3) -> Vec3 {
    const EPS: f64 = 1e-12;
    let flip = if n.z.abs() > EPS {
        n.z < 0.0
    } else if n.x.abs() > EPS {
        n.x < 0.0
    } else {
        n.y < 0.0
    };
    if flip {
        -n
    } else {
        n
    }
}

/// `m` unit vectors at angle `zeta_deg` about `normal`, at evenly spaced
/// azimuths starting from the projection of `+x` (or `+y` when `+x` is
/// parallel to the normal).
pub fn candidate_directions(normal: &Vec3, zeta_deg: f64, m: usize) -> Result<Vec<Vec3>> {
    if !(zeta_deg > 0.0 && zeta_deg < 90.0) {
        return Err(Error::domain(format!("cone angle {zeta_deg} is outside (0, 90) degrees")));
    }
    if m == 0 {
        return Err(Error::domain("candidate count must be at least 1"));
    }
    let n = normal.normalize();
    let mut e1 = Vec3::x() - n * n.x;
    if e1.norm() < 1e-9 {
        e1 = Vec3::y() - n * n.y;
    }
    let e1 = e1.normalize();
    let e2 = n.cross(&e1);
    let (s, c) = zeta_deg.to_radians().sin_cos();
    Ok((0..m)
        .map(|k| {
            let phi = std::f64::consts::TAU * k as f64 / m as f64;
            (n * c + (e1 * phi.cos() + e2 * phi.sin()) * s).normalize()
        })
        .collect())
}

/// Vector from a cluster center to the viewpoint it was first seen from.
pub fn ate_view_vector(x_ate: &Vec3, x_cluster: &Vec3) -> Vec3 {
    x_ate - x_cluster
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionRule {
    /// Smallest angle to the view vector.
    #[default]
    MaxCosine,
    /// Largest angle, the literal argmin-of-cosine reading.
    MinCosine,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub index: usize,
    pub direction: Vec3,
    /// The view vector was zero, so index 0 was taken.
    pub zero_view: bool,
}

/// Cosines closer than this count as tied and keep the lower index.
pub const TIE_EPS: f64 = 1e-12;

pub fn select_direction(d_ate: &Vec3, candidates: &[Vec3], rule: SelectionRule) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::domain("no candidate directions"));
    }
    let norm = d_ate.norm();
    if norm == 0.0 {
        return Ok(Selection { index: 0, direction: candidates[0], zero_view: true });
    }
    let cosine = |v: &Vec3| d_ate.dot(v) / (norm * v.norm());
    let mut best = 0;
    let mut best_cos = cosine(&candidates[0]);
    for (i, v) in candidates.iter().enumerate().skip(1) {
        let c = cosine(v);
        let better = match rule {
            SelectionRule::MaxCosine => c > best_cos + TIE_EPS,
            SelectionRule::MinCosine => c < best_cos - TIE_EPS,
        };
        if better {
            best = i;
            best_cos = c;
        }
    }
    Ok(Selection { index: best, direction: candidates[best], zero_view: false })
}

pub fn nav_point(x_cluster: &Vec3, d_view: &Vec3, eta: f64) -> Vec3 {
    x_cluster + d_view * eta
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull of the xy projection, counter-clockwise.
pub fn convex_hull_2d(points: &[Vec3]) -> Vec<(f64, f64)> {
    let mut p: Vec<(f64, f64)> = points.iter().map(|v| (v.x, v.y)).collect();
    p.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> = if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    hull
}

pub fn hull_area(points: &[Vec3]) -> f64 {
    let h = convex_hull_2d(points);
    if h.len() < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..h.len() {
        let (a, b) = (h[i], h[(i + 1) % h.len()]);
        s += a.0 * b.1 - a.1 * b.0;
    }
    s.abs() * 0.5
}
