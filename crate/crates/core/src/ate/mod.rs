//! Active top-down exploration: frontier exploration at high altitude,
//! with scorer-gated low-altitude passes that build the crowd distribution.

mod density;
mod distribution;
mod map;
mod scorer;

pub use density::{
    density_grid, density_mass, project_density, project_density_with, WeightedPoint, KERNEL, MIN_DEPRESSION_DEG,
};
pub use distribution::{update_distribution, DistributionPoint, GlobalDistribution, ViewpointEntry, MERGE_RADIUS};
pub use map::{select_frontier, select_frontier_in, Cell, CellState, OccupancyMap2D, Regime};
pub use scorer::{
    descends, score_location, ExternalScorer, HeuristicScorer, Scorer, ScorerInput, DEFAULT_SATURATION_MASS,
    DESCENT_THRESHOLD, EXTERNAL_TIMEOUT,
};

use log::{debug, warn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fdc::{detect, Detection, DetectorConfig};
use crate::geom::{Rect, Vec3};
use crate::world::{capture, plan_path, straight_clear, Observation, Pose, RigConfig, World, DEFAULT_CLEARANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AteMode {
    /// High-altitude frontiers with scorer-gated low-altitude passes.
    #[default]
    Full,
    /// Stay at the high altitude and build the distribution from there.
    NoLae,
    /// Frontier exploration of the whole extent at the low altitude.
    NoHae,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AteConfig {
    pub mode: AteMode,
    /// Start position in xy; the agent starts at the altitude of its mode.
    pub start: (f64, f64),
    pub hae_altitude: f64,
    pub lae_altitude: f64,
    pub hae_cell: f64,
    pub lae_cell: f64,
    pub kappa: f64,
    pub min_depression_deg: f64,
    pub clearance: f64,
    pub rig: RigConfig,
    pub detector: DetectorConfig,
    /// Also run the detector at every stop that feeds the distribution.
    pub collect_detections: bool,
    pub td_budget: Option<f64>,
    pub max_stops: usize,
}

impl Default for AteConfig {
    fn default() -> Self {
        Self {
            mode: AteMode::Full,
            start: (0.0, 0.0),
            hae_altitude: 80.0,
            lae_altitude: 10.0,
            hae_cell: 2.0,
            lae_cell: 1.0,
            kappa: 0.7,
            min_depression_deg: MIN_DEPRESSION_DEG,
            clearance: DEFAULT_CLEARANCE,
            rig: RigConfig::default(),
            detector: DetectorConfig::default(),
            collect_detections: false,
            td_budget: None,
            max_stops: 20_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AteOutcome {
    pub distribution: GlobalDistribution,
    /// Every stop in visiting order, including altitude changes.
    pub trajectory: Vec<Vec3>,
    pub hae_map: OccupancyMap2D,
    pub lae_map: OccupancyMap2D,
    pub detections: Vec<Detection>,
    pub descents: usize,
    pub skipped_descents: usize,
    pub scores: Vec<f64>,
    /// Stopped early by the travel budget or the stop limit.
    pub truncated: bool,
}

impl AteOutcome {
    pub fn end(&self) -> Vec3 {
        *self.trajectory.last().expect("trajectory starts with the start pose")
    }

    pub fn travel(&self) -> f64 {
        crate::eval::travel_distance(&self.trajectory)
    }
}

/// How far short of an unreachable frontier the agent may stop.
const APPROACH_LIMIT: f64 = 3.0;
const APPROACH_STEP: f64 = 0.5;

enum Move {
    Arrived,
    Unreachable,
    Stop,
}

struct Agent<'a, R: Rng + ?Sized> {
    world: &'a World,
    cfg: &'a AteConfig,
    rng: &'a mut R,
    pos: Vec3,
    td: f64,
    stops: usize,
    out: AteOutcome,
}

impl<R: Rng + ?Sized> Agent<'_, R> {
    fn move_to(&mut self, target: Vec3) -> Move {
        let leg = (target - self.pos).norm();
        if self.cfg.td_budget.is_some_and(|b| self.td + leg > b) {
            debug!("travel budget reached at {:.1} m", self.td);
            self.out.truncated = true;
            return Move::Stop;
        }
        match plan_path(self.world, &self.pos, &target, self.cfg.clearance) {
            Ok(Some(_)) => {
                self.pos = target;
                self.td += leg;
                self.out.trajectory.push(target);
                Move::Arrived
            }
            Ok(None) => Move::Unreachable,
            Err(e) => {
                warn!("path planning failed: {e}");
                Move::Unreachable
            }
        }
    }

    /// Moves to the frontier cell center, or failing that to the nearest
    /// reachable point short of it on the line back toward the agent.
    fn approach(&mut self, x: f64, y: f64, z: f64) -> Move {
        let goal = Vec3::new(x, y, z);
        let back = Vec3::new(self.pos.x - x, self.pos.y - y, 0.0);
        let len = back.norm();
        let mut offset = 0.0;
        loop {
            let p = if len > 0.0 { goal + back * (offset / len) } else { goal };
            match self.move_to(p) {
                Move::Unreachable if offset + APPROACH_STEP <= APPROACH_LIMIT.min(len) => offset += APPROACH_STEP,
                m => return m,
            }
        }
    }

    fn observe(&mut self) -> Option<Observation> {
        self.stops += 1;
        if self.stops > self.cfg.max_stops {
            warn!("stop limit {} reached", self.cfg.max_stops);
            self.out.truncated = true;
            return None;
        }
        Some(capture(self.world, &Pose::at(self.pos), &self.cfg.rig))
    }

    fn footprint(&self) -> Rect {
        let h = self.pos.z.max(0.0) * self.cfg.rig.tan_half_fov();
        let r = Rect::new(self.pos.x - h, self.pos.y - h, self.pos.x + h, self.pos.y + h);
        r.intersect(&Rect::new(0.0, 0.0, self.world.extent.x, self.world.extent.y))
    }

    fn accumulate(&mut self, obs: &Observation) {
        let pts = project_density_with(obs, self.cfg.kappa, self.cfg.min_depression_deg);
        self.out.distribution.update(&pts, self.pos);
        if self.cfg.collect_detections {
            let idx = self.stops - 1;
            let found = detect(self.world, obs, idx, &self.cfg.detector, self.rng);
            self.out.detections.extend(found);
        }
    }

    /// Low-altitude frontier exploration restricted to `region`. Returns
    /// false when exploration must stop altogether.
    fn explore_low(&mut self, region: &Rect) -> bool {
        let mut observe = true;
        let mut target: Option<Cell> = None;
        loop {
            if observe {
                let Some(obs) = self.observe() else { return false };
                self.accumulate(&obs);
                let fp = self.footprint();
                let map = &mut self.out.lae_map;
                map.update(self.world, &self.pos, &fp);
                if let Some(c) = target.filter(|c| map.is_frontier(*c, Some(region))) {
                    map.close_around(c);
                }
            }
            let Some(cell) = select_frontier_in(&self.out.lae_map, &self.pos, region) else { return true };
            target = Some(cell);
            let (x, y) = self.out.lae_map.center(cell);
            match self.approach(x, y, self.cfg.lae_altitude) {
                Move::Arrived => observe = true,
                Move::Unreachable => {
                    self.out.lae_map.block(cell);
                    observe = false;
                }
                Move::Stop => return false,
            }
        }
    }

    fn run_layered(&mut self, scorer: &mut dyn Scorer, fallback: &HeuristicScorer) -> Result<()> {
        let mut observe = true;
        let mut target: Option<Cell> = None;
        loop {
            if observe {
                let Some(obs) = self.observe() else { return Ok(()) };
                let fp = self.footprint();
                let (cells, occluded) = self.out.hae_map.update(self.world, &self.pos, &fp);
                if let Some(c) = target.filter(|c| self.out.hae_map.is_frontier(*c, None)) {
                    self.out.hae_map.close_around(c);
                }
                match self.cfg.mode {
                    AteMode::NoLae => self.accumulate(&obs),
                    _ => {
                        let lae = &self.out.lae_map;
                        let persons = &self.world.persons;
                        // only persons a descent here would cover
                        let unexplored = |i: usize| {
                            let p = persons[i];
                            fp.contains(p.x, p.y) && lae.cell_of(p.x, p.y).is_none_or(|c| lae.get(c) == CellState::Unknown)
                        };
                        let input = ScorerInput {
                            visible_counts: obs.visible_counts(),
                            density_mass: density_mass(&obs, unexplored),
                            obstacle_fraction: if cells == 0 { 0.0 } else { occluded as f64 / cells as f64 },
                            altitude: self.pos.z,
                        };
                        let s = score_location(&input, scorer, fallback)?;
                        self.out.scores.push(s);
                        if descends(s) && !self.descend(&fp) {
                            return Ok(());
                        }
                    }
                }
            }
            let Some(cell) = select_frontier(&self.out.hae_map, &self.pos) else { return Ok(()) };
            target = Some(cell);
            let (x, y) = self.out.hae_map.center(cell);
            match self.approach(x, y, self.cfg.hae_altitude) {
                Move::Arrived => observe = true,
                Move::Unreachable => {
                    self.out.hae_map.block(cell);
                    observe = false;
                }
                Move::Stop => return Ok(()),
            }
        }
    }

    /// Vertical descent, low-altitude pass over `region`, and ascent back.
    /// Returns false when exploration must stop.
    fn descend(&mut self, region: &Rect) -> bool {
        let above = self.pos;
        let below = Vec3::new(above.x, above.y, self.cfg.lae_altitude);
        if !straight_clear(self.world, &above, &below, self.cfg.clearance) {
            warn!("no free column below ({:.1}, {:.1}); staying high", above.x, above.y);
            self.out.skipped_descents += 1;
            return true;
        }
        match self.move_to(below) {
            Move::Arrived => {}
            Move::Unreachable => {
                self.out.skipped_descents += 1;
                return true;
            }
            Move::Stop => return false,
        }
        self.out.descents += 1;
        let go_on = self.explore_low(region);
        let up = Vec3::new(self.pos.x, self.pos.y, self.cfg.hae_altitude);
        if !go_on {
            return false;
        }
        match self.move_to(up) {
            Move::Arrived => true,
            Move::Unreachable => {
                // climb back where we came down
                matches!(self.move_to(below), Move::Arrived) && matches!(self.move_to(above), Move::Arrived)
            }
            Move::Stop => false,
        }
    }
}

/// Runs exploration from the configured start and returns the crowd
/// distribution, the trajectory and both maps.
pub fn run_ate<R: Rng + ?Sized>(
    world: &World,
    cfg: &AteConfig,
    scorer: &mut dyn Scorer,
    fallback: &HeuristicScorer,
    rng: &mut R,
) -> Result<AteOutcome> {
    let altitude = match cfg.mode {
        AteMode::NoHae => cfg.lae_altitude,
        _ => cfg.hae_altitude,
    };
    let start = Vec3::new(cfg.start.0, cfg.start.1, altitude);
    if !world.in_extent(&start) || world.inside_obstacle(&start) {
        return Err(Error::domain(format!("start {start:?} is not in free space")));
    }
    let out = AteOutcome {
        distribution: GlobalDistribution::new(),
        trajectory: vec![start],
        hae_map: OccupancyMap2D::new(&world.extent, cfg.hae_cell, Regime::High),
        lae_map: OccupancyMap2D::new(&world.extent, cfg.lae_cell, Regime::Low),
        detections: Vec::new(),
        descents: 0,
        skipped_descents: 0,
        scores: Vec::new(),
        truncated: false,
    };
    let mut agent = Agent { world, cfg, rng, pos: start, td: 0.0, stops: 0, out };
    match cfg.mode {
        AteMode::NoHae => {
            let all = Rect::new(0.0, 0.0, world.extent.x, world.extent.y);
            agent.explore_low(&all);
        }
        _ => agent.run_layered(scorer, fallback)?,
    }
    Ok(agent.out)
}
