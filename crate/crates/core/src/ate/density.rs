//! Density-map stand-in and its projection into world coordinates.

use crate::geom::Vec3;
use crate::world::{Capture, Observation};

/// 3x3 binomial blur; sums to one.
pub const KERNEL: [[f64; 3]; 3] = [
    [1.0 / 16.0, 2.0 / 16.0, 1.0 / 16.0],
    [2.0 / 16.0, 4.0 / 16.0, 2.0 / 16.0],
    [1.0 / 16.0, 2.0 / 16.0, 1.0 / 16.0],
];

/// Default lower bound on a back-projected ray's angle below the horizon.
/// Grazing rays land far from the person they came from.
pub const MIN_DEPRESSION_DEG: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedPoint {
    pub position: Vec3,
    pub weight: f64,
}

/// Unnormalized density grid of one capture: each listed person deposits
/// unit mass blurred by [`KERNEL`]; mass falling outside the image is lost.
pub fn density_grid<F: Fn(usize) -> bool>(capture: &Capture, include: F) -> Vec<f64> {
    let n = capture.camera.resolution;
    let mut grid = vec![0.0; n * n];
    for v in capture.visible.iter().filter(|v| include(v.person)) {
        let (ci, cj) = (v.cell.0 as i64, v.cell.1 as i64);
        for (dj, row) in KERNEL.iter().enumerate() {
            for (di, w) in row.iter().enumerate() {
                let i = ci + di as i64 - 1;
                let j = cj + dj as i64 - 1;
                if i >= 0 && j >= 0 && (i as usize) < n && (j as usize) < n {
                    grid[j as usize * n + i as usize] += w;
                }
            }
        }
    }
    grid
}

/// Total density mass of the listed persons over every camera.
pub fn density_mass<F: Fn(usize) -> bool>(obs: &Observation, include: F) -> f64 {
    obs.captures.iter().map(|c| density_grid(c, &include).iter().sum::<f64>()).sum()
}

/// Thresholds each camera's normalized density grid at `kappa` and
/// back-projects surviving cells through the depth grid.
pub fn project_density(obs: &Observation, kappa: f64) -> Vec<WeightedPoint> {
    project_density_with(obs, kappa, MIN_DEPRESSION_DEG)
}

pub fn project_density_with(obs: &Observation, kappa: f64, min_depression_deg: f64) -> Vec<WeightedPoint> {
    let min_sin = min_depression_deg.to_radians().sin();
    let mut out = Vec::new();
    for cap in &obs.captures {
        let grid = density_grid(cap, |_| true);
        let max = grid.iter().cloned().fold(0.0, f64::max);
        if max <= 0.0 {
            continue;
        }
        let n = cap.camera.resolution;
        for j in 0..n {
            for i in 0..n {
                let value = grid[j * n + i] / max;
                if value <= 0.0 || value < kappa {
                    continue;
                }
                let depth = cap.depth[j * n + i];
                if !depth.is_finite() {
                    continue;
                }
                let ray = cap.camera.pixel_ray(i, j);
                if -ray.z / ray.norm() < min_sin {
                    continue;
                }
                out.push(WeightedPoint { position: cap.camera.origin + ray * depth, weight: value });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Scene;
    use crate::world::{build_world, capture, Mount, Pose, RigConfig};

    fn observe(persons: Vec<Vec3>, at: Vec3, rig: &RigConfig) -> Observation {
        let scene = Scene { persons, ..Scene::empty(Vec3::new(100.0, 100.0, 50.0), 0) };
        let w = build_world(&scene);
        capture(&w, &Pose::at(at), rig)
    }

    fn nadir() -> RigConfig {
        RigConfig { mounts: vec![Mount::Nadir], ..RigConfig::default() }
    }

    #[test]
    fn nobody_visible_projects_nothing() {
        let obs = observe(vec![], Vec3::new(50.0, 50.0, 10.0), &RigConfig::default());
        assert!(project_density(&obs, 0.7).is_empty());
        assert_eq!(density_mass(&obs, |_| true), 0.0);
    }

    #[test]
    fn person_below_projects_onto_its_ground_position() {
        let person = Vec3::new(50.0, 50.0, 0.0);
        let obs = observe(vec![person], Vec3::new(50.1, 49.9, 10.0), &nadir());
        let pts = project_density(&obs, 0.7);
        assert!(!pts.is_empty());
        assert!(pts.iter().any(|p| (p.position - person).norm() <= 0.5), "{pts:?}");
        // only the kernel center survives for a lone person at 0.7
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].weight, 1.0);
    }

    #[test]
    fn kappa_one_keeps_only_the_argmax() {
        let persons = vec![Vec3::new(50.0, 50.0, 0.0), Vec3::new(50.3, 50.0, 0.0), Vec3::new(44.0, 47.0, 0.0)];
        let obs = observe(persons, Vec3::new(50.0, 50.0, 10.0), &nadir());
        let grid = density_grid(&obs.captures[0], |_| true);
        let max = grid.iter().cloned().fold(0.0, f64::max);
        let argmax = grid.iter().filter(|v| **v == max).count();
        let pts = project_density(&obs, 1.0);
        assert_eq!(pts.len(), argmax);
        assert!(pts.iter().all(|p| p.weight == 1.0));
    }

    #[test]
    fn unclipped_deposit_has_unit_mass() {
        let obs = observe(vec![Vec3::new(50.0, 50.0, 0.0)], Vec3::new(50.0, 50.0, 10.0), &nadir());
        assert!((density_mass(&obs, |_| true) - 1.0).abs() < 1e-12);
        assert_eq!(density_mass(&obs, |_| false), 0.0);
    }
}
