//! Shared fixtures for the benchmarks.

use rand::Rng;
use zecc_core::{rng_from_seed, Aabb, CrowdBlock, Rect, RunConfig, SceneSpec, Vec3};

/// A 120 m square scene with a few buildings and three crowds.
pub fn bench_spec() -> SceneSpec {
    SceneSpec {
        extent: Vec3::new(120.0, 120.0, 60.0),
        obstacles: vec![
            Aabb::new(Vec3::new(50.0, 50.0, 0.0), Vec3::new(60.0, 70.0, 14.0)),
            Aabb::new(Vec3::new(80.0, 20.0, 0.0), Vec3::new(95.0, 35.0, 20.0)),
            Aabb::new(Vec3::new(20.0, 80.0, 3.0), Vec3::new(40.0, 90.0, 4.0)),
        ],
        blocks: vec![
            CrowdBlock::new(Rect::new(15.0, 15.0, 40.0, 45.0), 0.0, 0.3),
            CrowdBlock::new(Rect::new(20.0, 80.0, 40.0, 90.0), 0.0, 0.5),
            CrowdBlock::new(Rect::new(70.0, 70.0, 100.0, 100.0), 0.0, 0.1),
        ],
    }
}

pub fn bench_config() -> RunConfig {
    let mut cfg = RunConfig { name: Some("bench".into()), generate: Some(bench_spec()), ..RunConfig::default() };
    cfg.params.hae_altitude = 50.0;
    cfg
}

/// Uniform points in `[0, side)^2 x [0, 2)`.
pub fn random_points(n: usize, side: f64, seed: u64) -> Vec<Vec3> {
    let mut rng = rng_from_seed(seed);
    (0..n)
        .map(|_| Vec3::new(rng.random_range(0.0..side), rng.random_range(0.0..side), rng.random_range(0.0..2.0)))
        .collect()
}

pub fn random_units(n: usize, seed: u64) -> Vec<Vec3> {
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let len = v.norm();
        if (0.1..=1.0).contains(&len) {
            out.push(v / len);
        }
    }
    out
}
