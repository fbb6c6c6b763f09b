//! Fine detection at the planned viewpoints and voxel deduplication.

use std::collections::HashSet;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::nlbn::NavPlan;
use crate::world::{capture, plan_path, Observation, Pose, RigConfig, World, DEFAULT_CLEARANCE};

/// Voxel edge used to merge repeated detections of one person.
pub const DEDUP_VOXEL: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub position: Vec3,
    /// Index of the stop that produced it.
    pub viewpoint: usize,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Maximum distance from camera to head.
    pub range: f64,
    /// Standard deviation of isotropic position noise.
    pub sigma: f64,
    pub p_detect: f64,
    /// When set, detection probability decays as `exp(-range / decay)`.
    pub decay: Option<f64>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { range: 30.0, sigma: 0.0, p_detect: 1.0, decay: None }
    }
}

impl DetectorConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.range > 0.0) {
            v.push(format!("detector.range: {} must be positive", self.range));
        }
        if !(self.sigma >= 0.0) {
            v.push(format!("detector.sigma: {} must be non-negative", self.sigma));
        }
        if !(0.0..=1.0).contains(&self.p_detect) {
            v.push(format!("detector.p_detect: {} is outside [0, 1]", self.p_detect));
        }
        if let Some(d) = self.decay {
            if !(d > 0.0) {
                v.push(format!("detector.decay: {d} must be positive"));
            }
        }
        v
    }
}

/// Visibility-oracle detector: every visible person in range is reported
/// at its ground position, optionally perturbed and randomly missed.
pub fn detect<R: Rng + ?Sized>(
    world: &World,
    obs: &Observation,
    viewpoint: usize,
    config: &DetectorConfig,
    rng: &mut R,
) -> Vec<Detection> {
    let mut out = Vec::new();
    for cap in &obs.captures {
        for v in &cap.visible {
            if v.range > config.range {
                continue;
            }
            let p = match config.decay {
                Some(d) => config.p_detect * (-v.range / d).exp(),
                None => config.p_detect,
            };
            if p < 1.0 && rng.random::<f64>() >= p {
                continue;
            }
            let mut position = world.persons[v.person];
            if config.sigma > 0.0 {
                for k in 0..3 {
                    let z: f64 = rng.sample(StandardNormal);
                    position[k] = (position[k] + config.sigma * z).clamp(0.0, world.extent[k]);
                }
            }
            out.push(Detection { position, viewpoint, confidence: p });
        }
    }
    out
}

fn voxel_key(p: &Vec3, voxel: f64) -> [i64; 3] {
    [0, 1, 2].map(|k| (p[k] / voxel).floor() as i64)
}

/// Number of non-empty origin-anchored voxels of edge `voxel`.
pub fn dedup_count(positions: &[Vec3], voxel: f64) -> Result<usize> {
    Ok(dedup_representatives(positions, voxel)?.len())
}

/// First point of every occupied voxel, in input order.
pub fn dedup_representatives(positions: &[Vec3], voxel: f64) -> Result<Vec<Vec3>> {
    if !(voxel > 0.0) || !voxel.is_finite() {
        return Err(Error::domain(format!("dedup voxel {voxel} must be positive")));
    }
    let mut seen = HashSet::new();
    Ok(positions.iter().filter(|p| seen.insert(voxel_key(p, voxel))).copied().collect())
}

pub fn dedup_detections(detections: &[Detection], voxel: f64) -> Result<usize> {
    let pts: Vec<Vec3> = detections.iter().map(|d| d.position).collect();
    dedup_count(&pts, voxel)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdcConfig {
    pub detector: DetectorConfig,
    pub rig: RigConfig,
    pub clearance: f64,
    pub voxel: f64,
}

impl Default for FdcConfig {
    fn default() -> Self {
        Self { detector: DetectorConfig::default(), rig: RigConfig::default(), clearance: DEFAULT_CLEARANCE, voxel: DEDUP_VOXEL }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FdcOutcome {
    pub count: usize,
    pub detections: Vec<Detection>,
    /// Plan entry indices that were reached, in visiting order.
    pub visited: Vec<usize>,
    pub skipped: Vec<usize>,
    /// Positions of the reached stops.
    pub stops: Vec<Vec3>,
}

impl FdcOutcome {
    pub fn reached(&self) -> usize {
        self.visited.len()
    }
}

/// Tours the plan from `start`, detecting at every reachable entry with the
/// camera rig aimed back along the view direction.
pub fn run_fdc<R: Rng + ?Sized>(
    world: &World,
    plan: &NavPlan,
    start: &Vec3,
    config: &FdcConfig,
    rng: &mut R,
) -> Result<FdcOutcome> {
    let mut out = FdcOutcome::default();
    let mut at = *start;
    for (i, entry) in plan.entries.iter().enumerate() {
        if !entry.valid {
            out.skipped.push(i);
            continue;
        }
        if plan_path(world, &at, &entry.position, config.clearance)?.is_none() {
            out.skipped.push(i);
            continue;
        }
        at = entry.position;
        let rig = config.rig.aimed(-entry.direction);
        let obs = capture(world, &Pose::at(at), &rig);
        out.detections.extend(detect(world, &obs, i, &config.detector, rng));
        out.visited.push(i);
        out.stops.push(at);
    }
    out.count = dedup_detections(&out.detections, config.voxel)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nlbn::NavEntry;
    use crate::rng_from_seed;
    use crate::scene::Scene;
    use crate::world::build_world;

    fn world(persons: Vec<Vec3>) -> World {
        build_world(&Scene { persons, ..Scene::empty(Vec3::new(100.0, 100.0, 50.0), 0) })
    }

    fn overhead(p: Vec3, id: usize) -> NavEntry {
        NavEntry { position: p, direction: Vec3::z(), cluster: id, valid: true }
    }

    #[test]
    fn dedup_examples() {
        let pts = [Vec3::zeros(), Vec3::new(0.1, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)];
        assert_eq!(dedup_count(&pts, 0.25).unwrap(), 2);
        assert_eq!(dedup_count(&[], 0.25).unwrap(), 0);
        assert!(dedup_count(&pts, 0.0).is_err());
        // half-open voxels: 0.25 starts a new voxel
        assert_eq!(dedup_count(&[Vec3::new(0.2499, 0.0, 0.0), Vec3::new(0.25, 0.0, 0.0)], 0.25).unwrap(), 2);
    }

    #[test]
    fn detector_range_cutoff() {
        let w = world(vec![Vec3::new(50.0, 50.0, 0.0), Vec3::new(50.0, 100.0, 0.0)]);
        let obs = capture(&w, &Pose::at(Vec3::new(50.0, 50.0, 10.0)), &RigConfig::default());
        let det = detect(&w, &obs, 0, &DetectorConfig::default(), &mut rng_from_seed(0));
        assert!(det.iter().all(|d| d.position == Vec3::new(50.0, 50.0, 0.0)));
        assert!(!det.is_empty());
    }

    #[test]
    fn nobody_visible_nobody_detected() {
        let w = world(vec![]);
        let obs = capture(&w, &Pose::at(Vec3::new(50.0, 50.0, 10.0)), &RigConfig::default());
        assert!(detect(&w, &obs, 0, &DetectorConfig::default(), &mut rng_from_seed(0)).is_empty());
    }

    #[test]
    fn empty_plan_counts_zero() {
        let w = world(vec![Vec3::new(50.0, 50.0, 0.0)]);
        let out = run_fdc(&w, &NavPlan::default(), &Vec3::new(1.0, 1.0, 10.0), &FdcConfig::default(), &mut rng_from_seed(0))
            .unwrap();
        assert_eq!(out.count, 0);
    }

    #[test]
    fn one_person_one_stop() {
        let w = world(vec![Vec3::new(50.0, 50.0, 0.0)]);
        let plan = NavPlan { entries: vec![overhead(Vec3::new(50.0, 50.0, 8.0), 0)], clusters: vec![] };
        let out = run_fdc(&w, &plan, &Vec3::new(40.0, 40.0, 10.0), &FdcConfig::default(), &mut rng_from_seed(0)).unwrap();
        assert_eq!(out.count, 1);
        assert_eq!(out.visited, vec![0]);
    }

    #[test]
    fn two_stops_seeing_one_person_count_once() {
        let w = world(vec![Vec3::new(50.0, 50.0, 0.0)]);
        let plan = NavPlan {
            entries: vec![overhead(Vec3::new(50.0, 50.0, 8.0), 0), overhead(Vec3::new(52.0, 50.0, 8.0), 1)],
            clusters: vec![],
        };
        let out = run_fdc(&w, &plan, &Vec3::new(40.0, 40.0, 10.0), &FdcConfig::default(), &mut rng_from_seed(0)).unwrap();
        assert!(out.detections.len() >= 2);
        assert_eq!(out.count, 1);
    }

    #[test]
    fn invalid_entries_are_skipped() {
        let w = world(vec![]);
        let mut bad = overhead(Vec3::new(50.0, 50.0, 0.2), 0);
        bad.valid = true;
        let plan = NavPlan { entries: vec![bad], clusters: vec![] };
        let out = run_fdc(&w, &plan, &Vec3::new(40.0, 40.0, 10.0), &FdcConfig::default(), &mut rng_from_seed(0)).unwrap();
        assert_eq!(out.skipped, vec![0]);
    }
}
