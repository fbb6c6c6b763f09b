//! Ground-truth scenes: obstacle boxes plus Poisson-populated crowd blocks.

mod io;
mod poisson;

pub use io::{from_json_str, load_scene, save_scene, to_json_string};
pub use poisson::{poisson_pmf, sample_block_count, sample_poisson, INVERSION_LIMIT};

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{quantize6, quantize6_vec, Aabb, Rect, Vec3};
use crate::rng_from_seed;

/// Height of a standing person; visibility targets the head point.
pub const PERSON_HEIGHT: f64 = 1.7;

/// Vertical tolerance when matching a person to its block.
pub const BLOCK_HEIGHT_TOLERANCE: f64 = 0.1;

/// Attempts per person before a colliding placement is dropped.
pub const MAX_PLACEMENT_RETRIES: usize = 100;

pub type ObstacleBox = Aabb;

/// A rectangular walking surface with a fixed crowd density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrowdBlock {
    pub region: Rect,
    pub base_height: f64,
    /// Persons per square meter.
    pub density: f64,
}

impl CrowdBlock {
    pub fn new(region: Rect, base_height: f64, density: f64) -> Self {
        Self { region, base_height, density }
    }

    /// Does the block's walking surface hold `p`?
    pub fn holds(&self, p: &Vec3) -> bool {
        self.region.contains(p.x, p.y) && (p.z - self.base_height).abs() <= BLOCK_HEIGHT_TOLERANCE
    }
}

/// Everything needed to generate a scene except the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub extent: Vec3,
    #[serde(default)]
    pub obstacles: Vec<ObstacleBox>,
    #[serde(default)]
    pub blocks: Vec<CrowdBlock>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub extent: Vec3,
    pub obstacles: Vec<ObstacleBox>,
    pub blocks: Vec<CrowdBlock>,
    pub persons: Vec<Vec3>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GenerationWarning {
    /// The block has no free walking surface; it gets no persons.
    NoFreeArea { block: usize },
    /// A person could not be placed outside obstacles and was dropped.
    Dropped { block: usize, person: u64 },
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub scene: Scene,
    pub warnings: Vec<GenerationWarning>,
}

impl Scene {
    /// Ground-truth head count.
    pub fn count(&self) -> usize {
        self.persons.len()
    }

    pub fn empty(extent: Vec3, seed: u64) -> Self {
        Scene { extent, obstacles: Vec::new(), blocks: Vec::new(), persons: Vec::new(), seed }
    }

    /// Rounds every coordinate to the six-digit grid used on disk.
    pub fn quantized(mut self) -> Self {
        self.extent = quantize6_vec(&self.extent);
        for o in &mut self.obstacles {
            o.min = quantize6_vec(&o.min);
            o.max = quantize6_vec(&o.max);
        }
        for b in &mut self.blocks {
            *b = quantize_block(b);
        }
        for p in &mut self.persons {
            *p = quantize6_vec(p);
        }
        self
    }

    /// Checks all scene invariants, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        let mut v = validate_layout(&self.extent, &self.obstacles, &self.blocks);
        for (i, p) in self.persons.iter().enumerate() {
            if !(0..3).all(|k| p[k].is_finite() && p[k] >= 0.0 && p[k] <= self.extent[k]) {
                v.push(format!("persons[{i}]: outside extent"));
                continue;
            }
            if let Some(j) = self.obstacles.iter().position(|o| person_collides(o, p)) {
                v.push(format!("persons[{i}]: intersects obstacles[{j}]"));
            }
            if !self.blocks.iter().any(|b| b.holds(p)) {
                v.push(format!("persons[{i}]: not on any block"));
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid { what: "scene", violations: v })
        }
    }
}

fn quantize_block(b: &CrowdBlock) -> CrowdBlock {
    CrowdBlock {
        region: Rect::new(
            quantize6(b.region.x_min),
            quantize6(b.region.y_min),
            quantize6(b.region.x_max),
            quantize6(b.region.y_max),
        ),
        base_height: quantize6(b.base_height),
        density: quantize6(b.density),
    }
}

fn validate_layout(extent: &Vec3, obstacles: &[ObstacleBox], blocks: &[CrowdBlock]) -> Vec<String> {
    let mut v = Vec::new();
    if !(0..3).all(|k| extent[k].is_finite() && extent[k] > 0.0) {
        v.push("extent: every component must be finite and > 0".to_string());
    }
    for (i, o) in obstacles.iter().enumerate() {
        if !o.is_valid() {
            v.push(format!("obstacles[{i}]: min must be < max componentwise"));
        }
    }
    for (i, b) in blocks.iter().enumerate() {
        let r = &b.region;
        if !(r.x_max > r.x_min && r.y_max > r.y_min) {
            v.push(format!("blocks[{i}].region: area must be > 0"));
        }
        if r.x_min < 0.0 || r.y_min < 0.0 || r.x_max > extent.x || r.y_max > extent.y {
            v.push(format!("blocks[{i}].region: outside extent"));
        }
        if !(b.density.is_finite() && b.density >= 0.0) {
            v.push(format!("blocks[{i}].density: must be finite and >= 0"));
        }
        if !(b.base_height >= 0.0 && b.base_height <= extent.z) {
            v.push(format!("blocks[{i}].base_height: outside scene height"));
        }
    }
    v
}

/// A person is the vertical segment from its feet to its head.
pub fn person_collides(obstacle: &ObstacleBox, p: &Vec3) -> bool {
    let head = p + Vec3::new(0.0, 0.0, PERSON_HEIGHT);
    obstacle.intersects_segment(p, &head)
}

fn block_fully_covered(block: &CrowdBlock, obstacles: &[ObstacleBox]) -> bool {
    const N: usize = 32;
    let r = &block.region;
    for i in 0..N {
        for j in 0..N {
            let x = r.x_min + (i as f64 + 0.5) / N as f64 * (r.x_max - r.x_min);
            let y = r.y_min + (j as f64 + 0.5) / N as f64 * (r.y_max - r.y_min);
            let p = Vec3::new(x, y, block.base_height);
            if !obstacles.iter().any(|o| person_collides(o, &p)) {
                return false;
            }
        }
    }
    true
}

/// Generates a scene. Counts per block are Poisson, positions uniform in
/// the block region. Output is a pure function of `(spec, seed)`.
pub fn generate_scene(spec: &SceneSpec, seed: u64) -> Result<Generated> {
    let violations = validate_layout(&spec.extent, &spec.obstacles, &spec.blocks);
    if !violations.is_empty() {
        return Err(Error::Invalid { what: "scene spec", violations });
    }
    let mut rng = rng_from_seed(seed);
    let mut persons = Vec::new();
    let mut warnings = Vec::new();
    let blocks: Vec<CrowdBlock> = spec.blocks.iter().map(quantize_block).collect();

    for (bi, block) in blocks.iter().enumerate() {
        let count = sample_block_count(block, &mut rng)?;
        if count == 0 {
            continue;
        }
        if block_fully_covered(block, &spec.obstacles) {
            warn!("block {bi} has no free area; it yields no persons");
            warnings.push(GenerationWarning::NoFreeArea { block: bi });
            continue;
        }
        let r = block.region;
        for person in 0..count {
            let mut placed = None;
            for _ in 0..=MAX_PLACEMENT_RETRIES {
                let x = quantize6(rng.random_range(r.x_min..r.x_max));
                let y = quantize6(rng.random_range(r.y_min..r.y_max));
                let p = Vec3::new(x, y, block.base_height);
                if !spec.obstacles.iter().any(|o| person_collides(o, &p)) {
                    placed = Some(p);
                    break;
                }
            }
            match placed {
                Some(p) => persons.push(p),
                None => {
                    warn!("block {bi}: dropped person {person} after {MAX_PLACEMENT_RETRIES} retries");
                    warnings.push(GenerationWarning::Dropped { block: bi, person });
                }
            }
        }
    }

    let scene = Scene {
        extent: spec.extent,
        obstacles: spec.obstacles.clone(),
        blocks,
        persons,
        seed,
    }
    .quantized();
    Ok(Generated { scene, warnings })
}
