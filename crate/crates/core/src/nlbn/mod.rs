//! Normal-line based navigation: clusters the crowd distribution, fits a
//! surface normal per cluster and places one viewpoint per cluster on a
//! cone around that normal.

mod geometry;
mod gmm;

pub use geometry::{
    ate_view_vector, candidate_directions, convex_hull_2d, fit_normal, hull_area, nav_point, select_direction,
    NormalFit, Selection, SelectionRule, TIE_EPS,
};
pub use gmm::{fit_gmm, seed_means, GmmFit, MAX_ITERATIONS, REGULARIZATION, TOLERANCE};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ate::GlobalDistribution;
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::world::World;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NlbnParams {
    /// Target cluster footprint diameter in meters.
    pub epsilon: f64,
    pub zeta_deg: f64,
    pub eta: f64,
    pub candidates: usize,
    #[serde(default)]
    pub rule: SelectionRule,
}

impl Default for NlbnParams {
    fn default() -> Self {
        Self { epsilon: 40.0, zeta_deg: 15.0, eta: 8.0, candidates: 24, rule: SelectionRule::MaxCosine }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    #[default]
    Full,
    /// Navigate to the cluster centers themselves.
    NoNormalLine,
    /// Stand off along the cluster normal.
    NoViewSelection,
    /// Take a random cone candidate instead of the one facing the ATE view.
    RandomCandidate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Indices into the distribution's points.
    pub members: Vec<usize>,
    pub center: Vec3,
    pub normal: Vec3,
    pub degenerate_normal: bool,
    pub ate_viewpoint: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavEntry {
    pub position: Vec3,
    pub direction: Vec3,
    pub cluster: usize,
    /// Inside the extent and in a free voxel.
    pub valid: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NavPlan {
    pub entries: Vec<NavEntry>,
    pub clusters: Vec<Cluster>,
}

impl NavPlan {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Component count for a target footprint diameter `epsilon`.
pub fn component_count(points: &[Vec3], epsilon: f64) -> usize {
    let area = hull_area(points);
    let disc = std::f64::consts::PI * (epsilon / 2.0).powi(2);
    ((area / disc).ceil() as usize).max(1).min(points.len().max(1))
}

/// Splits the distribution into clusters by a weighted mixture fit. Normals
/// and ATE viewpoints are left at their defaults.
pub fn cluster_distribution<R: Rng + ?Sized>(d: &GlobalDistribution, epsilon: f64, rng: &mut R) -> Result<Vec<Cluster>> {
    if !(epsilon > 0.0) {
        return Err(Error::domain("cluster size must be positive"));
    }
    let positions: Vec<Vec3> = d.points.iter().map(|p| p.position).collect();
    let k = component_count(&positions, epsilon);
    cluster_with_k(d, k, rng)
}

pub fn cluster_with_k<R: Rng + ?Sized>(d: &GlobalDistribution, k: usize, rng: &mut R) -> Result<Vec<Cluster>> {
    if d.is_empty() {
        return Err(Error::domain("cannot cluster an empty distribution"));
    }
    let positions: Vec<Vec3> = d.points.iter().map(|p| p.position).collect();
    let weights: Vec<f64> = d.points.iter().map(|p| p.weight).collect();
    let fit = fit_gmm(&positions, &weights, k, rng)?;
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); fit.means.len()];
    for (i, &l) in fit.labels.iter().enumerate() {
        groups[l].push(i);
    }
    Ok(groups
        .into_iter()
        .filter(|g| !g.is_empty())
        .map(|members| {
            let w: f64 = members.iter().map(|&i| weights[i]).sum();
            let center = if w > 0.0 {
                members.iter().map(|&i| positions[i] * weights[i]).sum::<Vec3>() / w
            } else {
                members.iter().map(|&i| positions[i]).sum::<Vec3>() / members.len() as f64
            };
            Cluster { members, center, normal: Vec3::z(), degenerate_normal: true, ate_viewpoint: center }
        })
        .collect())
}

/// Fills in the normal and the ATE viewpoint: the log entry that first saw
/// the member nearest the center.
pub fn attach_geometry(cluster: &mut Cluster, d: &GlobalDistribution) {
    let pts: Vec<Vec3> = cluster.members.iter().map(|&i| d.points[i].position).collect();
    let fit = fit_normal(&pts);
    cluster.normal = fit.normal;
    cluster.degenerate_normal = fit.degenerate;
    let mut nearest = cluster.members[0];
    let mut best = f64::INFINITY;
    for &i in &cluster.members {
        let dist = (d.points[i].position - cluster.center).norm();
        if dist < best {
            best = dist;
            nearest = i;
        }
    }
    cluster.ate_viewpoint = d.origin_of(nearest);
}

pub fn plan_nlbn<R: Rng + ?Sized>(
    d: &GlobalDistribution,
    world: &World,
    params: &NlbnParams,
    variant: Variant,
    start: &Vec3,
    rng: &mut R,
) -> Result<NavPlan> {
    if d.is_empty() {
        return Ok(NavPlan::default());
    }
    let mut clusters = cluster_distribution(d, params.epsilon, rng)?;
    let mut entries = Vec::with_capacity(clusters.len());
    for (id, c) in clusters.iter_mut().enumerate() {
        attach_geometry(c, d);
        let candidates = candidate_directions(&c.normal, params.zeta_deg, params.candidates)?;
        let (position, direction) = match variant {
            Variant::Full => {
                let d_ate = ate_view_vector(&c.ate_viewpoint, &c.center);
                let s = select_direction(&d_ate, &candidates, params.rule)?;
                (nav_point(&c.center, &s.direction, params.eta), s.direction)
            }
            Variant::NoNormalLine => (c.center, c.normal),
            Variant::NoViewSelection => (nav_point(&c.center, &c.normal, params.eta), c.normal),
            Variant::RandomCandidate => {
                let v = candidates[rng.random_range(0..candidates.len())];
                (nav_point(&c.center, &v, params.eta), v)
            }
        };
        let valid = world.is_free(&position);
        entries.push(NavEntry { position, direction, cluster: id, valid });
    }
    Ok(NavPlan { entries: greedy_tour(entries, start), clusters })
}

/// Nearest-neighbor ordering from `start`; ties go to the lower cluster id.
pub fn greedy_tour(mut pending: Vec<NavEntry>, start: &Vec3) -> Vec<NavEntry> {
    let mut out = Vec::with_capacity(pending.len());
    let mut at = *start;
    while !pending.is_empty() {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, e) in pending.iter().enumerate() {
            let dist = (e.position - at).norm();
            if dist < best_d || (dist == best_d && e.cluster < pending[best].cluster) {
                best = i;
                best_d = dist;
            }
        }
        let e = pending.swap_remove(best);
        at = e.position;
        out.push(e);
    }
    out
}
