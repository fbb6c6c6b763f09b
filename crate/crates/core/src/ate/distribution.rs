use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::density::WeightedPoint;
use crate::geom::Vec3;

/// Points closer than this are merged into one.
pub const MERGE_RADIUS: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionPoint {
    pub position: Vec3,
    pub weight: f64,
    /// Index into the viewpoint log of the capture that first produced it.
    pub viewpoint: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewpointEntry {
    pub position: Vec3,
    /// Points first seen from this viewpoint.
    pub points: Vec<usize>,
}

/// The global crowd distribution: weighted points plus the log of
/// viewpoints they were first seen from.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GlobalDistribution {
    pub points: Vec<DistributionPoint>,
    pub viewpoints: Vec<ViewpointEntry>,
    #[serde(skip)]
    hash: HashMap<[i64; 3], Vec<usize>>,
}

impl PartialEq for GlobalDistribution {
    fn eq(&self, other: &Self) -> bool {
        self.points == other.points && self.viewpoints == other.viewpoints
    }
}

fn key(p: &Vec3) -> [i64; 3] {
    [0, 1, 2].map(|k| (p[k] / MERGE_RADIUS).floor() as i64)
}

impl GlobalDistribution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn total_weight(&self) -> f64 {
        self.points.iter().map(|p| p.weight).sum()
    }

    /// Viewpoint that first saw point `i`.
    pub fn origin_of(&self, i: usize) -> Vec3 {
        self.viewpoints[self.points[i].viewpoint].position
    }

    fn nearest_within(&self, p: &Vec3) -> Option<usize> {
        let k = key(p);
        let mut best: Option<(f64, usize)> = None;
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let Some(bucket) = self.hash.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) else { continue };
                    for &i in bucket {
                        let d = (self.points[i].position - p).norm();
                        if d <= MERGE_RADIUS && best.is_none_or(|(bd, bi)| d < bd || (d == bd && i < bi)) {
                            best = Some((d, i));
                        }
                    }
                }
            }
        }
        best.map(|b| b.1)
    }

    /// Adds a capture's points. A point within [`MERGE_RADIUS`] of an
    /// existing one adds its weight there and keeps the earlier provenance.
    pub fn update(&mut self, new_points: &[WeightedPoint], viewpoint: Vec3) {
        let mut entry: Option<usize> = None;
        for wp in new_points {
            if let Some(i) = self.nearest_within(&wp.position) {
                self.points[i].weight += wp.weight;
                continue;
            }
            let v = *entry.get_or_insert_with(|| {
                self.viewpoints.push(ViewpointEntry { position: viewpoint, points: Vec::new() });
                self.viewpoints.len() - 1
            });
            let idx = self.points.len();
            self.points.push(DistributionPoint { position: wp.position, weight: wp.weight, viewpoint: v });
            self.viewpoints[v].points.push(idx);
            self.hash.entry(key(&wp.position)).or_default().push(idx);
        }
    }

    /// Rebuilds from raw parts, e.g. after deserialization.
    pub fn from_parts(points: Vec<DistributionPoint>, viewpoints: Vec<ViewpointEntry>) -> Self {
        let mut hash: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            hash.entry(key(&p.position)).or_default().push(i);
        }
        Self { points, viewpoints, hash }
    }
}

pub fn update_distribution(d: &mut GlobalDistribution, new_points: &[WeightedPoint], viewpoint: Vec3) {
    d.update(new_points, viewpoint);
}
