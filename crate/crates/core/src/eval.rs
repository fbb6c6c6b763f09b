//! Counting and navigation metrics, plus the occlusion analysis.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::nlbn::NavPlan;
use crate::world::World;

/// Default clearance below which a sight line counts as obstructed.
pub const OCCLUSION_LAMBDA: f64 = 0.5;

/// Mean absolute percentage error over paired truths and estimates.
pub fn mape(truths: &[u64], estimates: &[u64]) -> Result<f64> {
    if truths.len() != estimates.len() {
        return Err(Error::domain("truths and estimates differ in length"));
    }
    if truths.is_empty() {
        return Err(Error::domain("no samples"));
    }
    if let Some(i) = truths.iter().position(|y| *y == 0) {
        return Err(Error::domain(format!("truth {i} is zero")));
    }
    let total: f64 = truths.iter().zip(estimates).map(|(&y, &e)| (y as f64 - e as f64).abs() / y as f64).sum();
    Ok(total / truths.len() as f64 * 100.0)
}

/// Sum of distances between consecutive points.
pub fn travel_distance(points: &[Vec3]) -> f64 {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Percentage of plan entries reached; an empty plan scores 100.
pub fn success_rate(plan: &NavPlan, reached: usize) -> f64 {
    if plan.is_empty() {
        return 100.0;
    }
    100.0 * reached as f64 / plan.len() as f64
}

/// Percentage of persons whose sight line to the nearest navigation point
/// passes within `lambda` of the obstacle surface cloud.
pub fn occlusion_ratio(world: &World, persons: &[Vec3], nav_points: &[Vec3], lambda: f64) -> Result<f64> {
    if nav_points.is_empty() {
        return Err(Error::domain("occlusion ratio needs at least one navigation point"));
    }
    if !(lambda > 0.0) {
        return Err(Error::domain("occlusion threshold must be positive"));
    }
    if persons.is_empty() {
        return Ok(0.0);
    }
    let obstructed = persons
        .par_iter()
        .filter(|p| {
            let nav = nearest(p, nav_points);
            world.cloud_index().any_near_segment(&world.surface_cloud, p, &nav, lambda)
        })
        .count();
    Ok(100.0 * obstructed as f64 / persons.len() as f64)
}

fn nearest(p: &Vec3, points: &[Vec3]) -> Vec3 {
    let mut best = points[0];
    let mut best_d = (best - p).norm_squared();
    for q in &points[1..] {
        let d = (q - p).norm_squared();
        if d < best_d {
            best = *q;
            best_d = d;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub scene: String,
    pub seed: u64,
    pub method: String,
    pub ablations: Vec<String>,
    pub y: u64,
    pub y_hat: u64,
    /// Persons per square meter of block area; `None` without blocks.
    pub density: Option<f64>,
    /// `None` when the scene has no persons.
    pub mape: Option<f64>,
    pub td: f64,
    pub success_rate: f64,
    pub occlusion_ratio: Option<f64>,
    pub descents: usize,
    pub truncated: bool,
    pub trajectory: Vec<Vec3>,
    pub nav_plan: NavPlan,
}
