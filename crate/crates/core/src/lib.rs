//! Embodied crowd counting in a procedural 3D world.
//!
//! The pipeline runs in three stages. Active top-down exploration (`ate`)
//! alternates high- and low-altitude frontier exploration to estimate a
//! global crowd distribution. Normal-line based navigation (`nlbn`) turns
//! that distribution into close-range viewpoints. Fine detection (`fdc`)
//! counts people from those viewpoints with voxel deduplication.
//!
//! `scene` generates and persists ground-truth scenes, `world` answers
//! geometric queries against them, and `eval` provides the metrics.
//! `config`, `episode` and `suite` wire everything into runnable episodes.

pub mod ate;
pub mod config;
pub mod episode;
pub mod error;
pub mod eval;
pub mod fdc;
pub mod geom;
pub mod nlbn;
pub mod scene;
pub mod suite;
pub mod world;

pub use config::{Ablation, Method, RunConfig};
pub use episode::run_episode;
pub use error::{Error, Result};
pub use eval::EpisodeReport;
pub use geom::{Aabb, Rect, Vec3};
pub use scene::{CrowdBlock, Scene, SceneSpec};
pub use world::{Pose, World};

/// Deterministic RNG used throughout the simulator.
pub type SimRng = rand_chacha::ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    use rand::SeedableRng;
    SimRng::seed_from_u64(seed)
}
