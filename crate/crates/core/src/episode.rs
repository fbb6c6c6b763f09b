//! One full episode: exploration, viewpoint planning, fine counting, metrics.

use log::{info, warn};

use crate::ate::{run_ate, ExternalScorer, HeuristicScorer, Scorer};
use crate::config::{Ablation, Method, RunConfig, ScorerChoice};
use crate::error::Result;
use crate::eval::{mape, occlusion_ratio, success_rate, travel_distance, EpisodeReport};
use crate::fdc::{dedup_detections, run_fdc};
use crate::geom::Vec3;
use crate::nlbn::{plan_nlbn, NavPlan};
use crate::scene::{generate_scene, load_scene, Scene};
use crate::world::{build_world, World};
use crate::rng_from_seed;

/// Keeps the agent's random stream apart from the scene generator's.
const AGENT_STREAM: u64 = 0x5eed_a9e7_0f5c_3e11;

/// The scene an episode runs on: loaded from file or generated from `seed`.
pub fn episode_scene(config: &RunConfig, seed: u64) -> Result<Scene> {
    match (&config.scene, &config.generate) {
        (Some(path), _) => load_scene(path),
        (None, Some(spec)) => Ok(generate_scene(spec, seed)?.scene),
        (None, None) => {
            config.validate()?;
            unreachable!("validation rejects a config without a scene")
        }
    }
}

fn scene_id(config: &RunConfig) -> String {
    if let Some(n) = &config.name {
        return n.clone();
    }
    match &config.scene {
        Some(p) => p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        None => "generated".to_string(),
    }
}

fn make_scorer(choice: &ScorerChoice) -> (Box<dyn Scorer>, HeuristicScorer) {
    match choice {
        ScorerChoice::Heuristic { saturation_mass } => {
            let h = HeuristicScorer { saturation_mass: *saturation_mass };
            (Box::new(h), h)
        }
        ScorerChoice::External { endpoint } => {
            let fallback = HeuristicScorer::default();
            match ExternalScorer::connect(endpoint) {
                Ok(s) => (Box::new(s), fallback),
                Err(e) => {
                    warn!("scorer endpoint {endpoint} unavailable ({e}); using the heuristic");
                    (Box::new(fallback), fallback)
                }
            }
        }
    }
}

fn block_density(scene: &Scene) -> Option<f64> {
    let area: f64 = scene.blocks.iter().map(|b| b.region.area()).sum();
    (area > 0.0).then(|| scene.count() as f64 / area)
}

/// Runs one episode of `config` with `seed`. Deterministic per
/// `(config, seed)` unless an external scorer is attached.
pub fn run_episode(config: &RunConfig, seed: u64) -> Result<EpisodeReport> {
    config.validate()?;
    let scene = episode_scene(config, seed)?;
    let mut world = build_world(&scene);
    world.rebuild_cloud_index();
    run_episode_in(config, &scene, &world, seed)
}

/// As [`run_episode`] on an already built world.
pub fn run_episode_in(config: &RunConfig, scene: &Scene, world: &World, seed: u64) -> Result<EpisodeReport> {
    config.validate()?;
    let mut rng = rng_from_seed(seed ^ AGENT_STREAM);
    let start = config.start.unwrap_or((world.extent.x * 0.5, world.extent.y * 0.5));
    let ate_cfg = config.ate_config(start);
    let (mut scorer, fallback) = make_scorer(&config.scorer);
    let ate = run_ate(world, &ate_cfg, scorer.as_mut(), &fallback, &mut rng)?;
    info!(
        "{}: exploration done, {} stops, {} descents, {} distribution points",
        config.label(),
        ate.trajectory.len(),
        ate.descents,
        ate.distribution.len()
    );

    let counting_on_exploration = config.method == Method::Fbe || config.has(Ablation::NoNlbn);
    let (y_hat, plan, mut trajectory, reached) = if counting_on_exploration {
        let count = dedup_detections(&ate.detections, config.params.voxel)?;
        (count, NavPlan::default(), ate.trajectory.clone(), 0)
    } else {
        let end = ate.end();
        let plan = plan_nlbn(&ate.distribution, world, &config.nlbn_params(), config.variant(), &end, &mut rng)?;
        let fdc = run_fdc(world, &plan, &end, &config.fdc_config(), &mut rng)?;
        let mut trajectory = ate.trajectory.clone();
        trajectory.extend(&fdc.stops);
        (fdc.count, plan, trajectory, fdc.reached())
    };
    trajectory.shrink_to_fit();

    let y = scene.count() as u64;
    let y_hat = y_hat as u64;
    let nav_points: Vec<Vec3> = if plan.is_empty() {
        ate.trajectory.clone()
    } else {
        plan.entries.iter().map(|e| e.position).collect()
    };
    let heads: Vec<Vec3> = (0..world.persons.len()).map(|i| world.head(i)).collect();
    let occlusion = if nav_points.is_empty() {
        None
    } else {
        Some(occlusion_ratio(world, &heads, &nav_points, config.params.lambda)?)
    };
    Ok(EpisodeReport {
        scene: scene_id(config),
        seed,
        method: config.method.to_string(),
        ablations: config.ablations.iter().map(|a| a.to_string()).collect(),
        y,
        y_hat,
        density: block_density(scene),
        mape: if y > 0 { Some(mape(&[y], &[y_hat])?) } else { None },
        td: travel_distance(&trajectory),
        success_rate: success_rate(&plan, reached),
        occlusion_ratio: occlusion,
        descents: ate.descents,
        truncated: ate.truncated,
        trajectory,
        nav_plan: plan,
    })
}
