//! Run configuration, read from TOML.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ate::{AteConfig, AteMode, DEFAULT_SATURATION_MASS, MIN_DEPRESSION_DEG};
use crate::error::{Error, Result};
use crate::eval::OCCLUSION_LAMBDA;
use crate::fdc::{DetectorConfig, FdcConfig, DEDUP_VOXEL};
use crate::nlbn::{NlbnParams, SelectionRule, Variant};
use crate::scene::SceneSpec;
use crate::world::{RigConfig, DEFAULT_CLEARANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Zecc,
    /// Frontier exploration at a fixed altitude, detecting at every stop.
    Fbe,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Zecc => "zecc",
            Method::Fbe => "fbe",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    NoHae,
    NoLae,
    NoNlbn,
    NoNl,
    NoVps,
    NoAteVps,
}

impl Ablation {
    pub const ALL: [Ablation; 6] =
        [Ablation::NoHae, Ablation::NoLae, Ablation::NoNlbn, Ablation::NoNl, Ablation::NoVps, Ablation::NoAteVps];

    pub fn as_str(&self) -> &'static str {
        match self {
            Ablation::NoHae => "no-hae",
            Ablation::NoLae => "no-lae",
            Ablation::NoNlbn => "no-nlbn",
            Ablation::NoNl => "no-nl",
            Ablation::NoVps => "no-vps",
            Ablation::NoAteVps => "no-ate-vps",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::domain(format!("unknown ablation `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Params {
    pub zeta_deg: f64,
    pub kappa: f64,
    pub eta: f64,
    pub epsilon: f64,
    pub hae_altitude: f64,
    pub lae_altitude: f64,
    pub voxel: f64,
    pub lambda: f64,
    pub candidates: usize,
    pub rule: SelectionRule,
    pub hae_cell: f64,
    pub lae_cell: f64,
    pub min_depression_deg: f64,
    pub clearance: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            zeta_deg: 15.0,
            kappa: 0.7,
            eta: 8.0,
            epsilon: 40.0,
            hae_altitude: 80.0,
            lae_altitude: 10.0,
            voxel: DEDUP_VOXEL,
            lambda: OCCLUSION_LAMBDA,
            candidates: 24,
            rule: SelectionRule::MaxCosine,
            hae_cell: 2.0,
            lae_cell: 1.0,
            min_depression_deg: MIN_DEPRESSION_DEG,
            clearance: DEFAULT_CLEARANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScorerChoice {
    Heuristic {
        #[serde(default = "default_saturation")]
        saturation_mass: f64,
    },
    /// `tcp://host:port` or `exec:program args`.
    External { endpoint: String },
}

fn default_saturation() -> f64 {
    DEFAULT_SATURATION_MASS
}

impl Default for ScorerChoice {
    fn default() -> Self {
        ScorerChoice::Heuristic { saturation_mass: DEFAULT_SATURATION_MASS }
    }
}

/// Suite grouping by realized crowd density, persons per square meter of
/// block area, with `min <= density < max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityBand {
    pub name: String,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Label used as the scene id in reports.
    pub name: Option<String>,
    /// Scene file to load. The seed then only drives the agent.
    pub scene: Option<PathBuf>,
    /// Scene to generate afresh for every seed.
    pub generate: Option<SceneSpec>,
    pub method: Method,
    pub ablations: BTreeSet<Ablation>,
    pub params: Params,
    pub seeds: Vec<u64>,
    pub scorer: ScorerChoice,
    pub detector: DetectorConfig,
    pub rig: RigConfig,
    pub td_budget: Option<f64>,
    /// Start position in xy; defaults to the middle of the extent.
    pub start: Option<(f64, f64)>,
    /// Altitude of the frontier baseline; defaults to the low altitude.
    pub fbe_altitude: Option<f64>,
    pub max_stops: usize,
    pub density_bands: Vec<DensityBand>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            name: None,
            scene: None,
            generate: None,
            method: Method::Zecc,
            ablations: BTreeSet::new(),
            params: Params::default(),
            seeds: vec![0],
            scorer: ScorerChoice::default(),
            detector: DetectorConfig::default(),
            rig: RigConfig::default(),
            td_budget: None,
            start: None,
            fbe_altitude: None,
            max_stops: AteConfig::default().max_stops,
            density_bands: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse { location: origin.to_string(), message: e.message().to_string() })
    }

    /// Reads a config; a relative scene path resolves against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text, &path.display().to_string())?;
        if let (Some(scene), Some(dir)) = (&cfg.scene, path.parent()) {
            if scene.is_relative() {
                cfg.scene = Some(dir.join(scene));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Every semantic problem, each naming its field.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let p = &self.params;
        if !(p.zeta_deg > 0.0 && p.zeta_deg < 90.0) {
            v.push(format!("params.zeta_deg (ζ): {} is outside (0, 90)", p.zeta_deg));
        }
        if !(0.0..=1.0).contains(&p.kappa) {
            v.push(format!("params.kappa (κ): {} is outside [0, 1]", p.kappa));
        }
        if !(p.eta > 0.0) {
            v.push(format!("params.eta (η): {} must be positive", p.eta));
        }
        if !(p.epsilon > 0.0) {
            v.push(format!("params.epsilon (ε): {} must be positive", p.epsilon));
        }
        for (name, x) in [
            ("params.voxel", p.voxel),
            ("params.lambda", p.lambda),
            ("params.hae_altitude", p.hae_altitude),
            ("params.lae_altitude", p.lae_altitude),
            ("params.hae_cell", p.hae_cell),
            ("params.lae_cell", p.lae_cell),
        ] {
            if !(x > 0.0) || !x.is_finite() {
                v.push(format!("{name}: {x} must be positive"));
            }
        }
        if p.lae_altitude >= p.hae_altitude {
            v.push(format!("params.lae_altitude: {} must be below hae_altitude {}", p.lae_altitude, p.hae_altitude));
        }
        if !(p.clearance >= 0.0) {
            v.push(format!("params.clearance: {} must be non-negative", p.clearance));
        }
        if !(0.0..90.0).contains(&p.min_depression_deg) {
            v.push(format!("params.min_depression_deg: {} is outside [0, 90)", p.min_depression_deg));
        }
        if p.candidates == 0 {
            v.push("params.candidates: must be at least 1".to_string());
        }
        match (&self.scene, &self.generate) {
            (None, None) => v.push("scene: missing; set `scene` or `generate`".to_string()),
            (Some(_), Some(_)) => v.push("scene: set only one of `scene` and `generate`".to_string()),
            _ => {}
        }
        if self.seeds.is_empty() {
            v.push("seeds: empty".to_string());
        }
        if let ScorerChoice::Heuristic { saturation_mass } = self.scorer {
            if !(saturation_mass > 0.0) {
                v.push(format!("scorer.saturation_mass: {saturation_mass} must be positive"));
            }
        }
        v.extend(self.detector.violations());
        if self.rig.mounts.is_empty() || self.rig.resolution == 0 || !(self.rig.fov_deg > 0.0 && self.rig.fov_deg < 180.0) {
            v.push("rig: needs at least one mount, a positive resolution and a field of view in (0, 180)".to_string());
        }
        if let Some(b) = self.td_budget {
            if !(b >= 0.0) {
                v.push(format!("td_budget: {b} must be non-negative"));
            }
        }
        if let Some(h) = self.fbe_altitude {
            if !(h > 0.0) {
                v.push(format!("fbe_altitude: {h} must be positive"));
            }
        }
        if self.method == Method::Fbe && !self.ablations.is_empty() {
            v.push("ablations: not applicable to the fbe method".to_string());
        }
        let a = &self.ablations;
        if a.contains(&Ablation::NoHae) && a.contains(&Ablation::NoLae) {
            v.push("ablations: no-hae and no-lae exclude each other".to_string());
        }
        let nav = [Ablation::NoNl, Ablation::NoVps, Ablation::NoAteVps].iter().filter(|x| a.contains(x)).count();
        if nav > 1 {
            v.push("ablations: pick at most one of no-nl, no-vps, no-ate-vps".to_string());
        }
        if nav > 0 && a.contains(&Ablation::NoNlbn) {
            v.push("ablations: no-nlbn excludes the navigation ablations".to_string());
        }
        for b in &self.density_bands {
            if !(b.min < b.max) {
                v.push(format!("density_bands.{}: min {} must be below max {}", b.name, b.min, b.max));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let violations = self.violations();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid { what: "config", violations })
        }
    }

    /// Method tag with its ablations, e.g. `zecc+no-lae`.
    pub fn label(&self) -> String {
        let mut s = self.method.to_string();
        for a in &self.ablations {
            s.push('+');
            s.push_str(a.as_str());
        }
        s
    }

    pub fn has(&self, a: Ablation) -> bool {
        self.ablations.contains(&a)
    }

    pub fn ate_mode(&self) -> AteMode {
        match self.method {
            Method::Fbe => AteMode::NoHae,
            Method::Zecc if self.has(Ablation::NoHae) => AteMode::NoHae,
            Method::Zecc if self.has(Ablation::NoLae) => AteMode::NoLae,
            Method::Zecc => AteMode::Full,
        }
    }

    pub fn variant(&self) -> Variant {
        if self.has(Ablation::NoNl) {
            Variant::NoNormalLine
        } else if self.has(Ablation::NoVps) {
            Variant::NoViewSelection
        } else if self.has(Ablation::NoAteVps) {
            Variant::RandomCandidate
        } else {
            Variant::Full
        }
    }

    pub fn ate_config(&self, start: (f64, f64)) -> AteConfig {
        let p = &self.params;
        let fbe = self.method == Method::Fbe;
        AteConfig {
            mode: self.ate_mode(),
            start,
            hae_altitude: p.hae_altitude,
            lae_altitude: if fbe { self.fbe_altitude.unwrap_or(p.lae_altitude) } else { p.lae_altitude },
            hae_cell: p.hae_cell,
            lae_cell: p.lae_cell,
            kappa: p.kappa,
            min_depression_deg: p.min_depression_deg,
            clearance: p.clearance,
            rig: self.rig.clone(),
            detector: self.detector,
            collect_detections: fbe || self.has(Ablation::NoNlbn),
            td_budget: self.td_budget,
            max_stops: self.max_stops,
        }
    }

    pub fn nlbn_params(&self) -> NlbnParams {
        let p = &self.params;
        NlbnParams { epsilon: p.epsilon, zeta_deg: p.zeta_deg, eta: p.eta, candidates: p.candidates, rule: p.rule }
    }

    pub fn fdc_config(&self) -> FdcConfig {
        FdcConfig { detector: self.detector, rig: self.rig.clone(), clearance: self.params.clearance, voxel: self.params.voxel }
    }
}

/// Loads and validates a config file.
pub fn validate_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let cfg = RunConfig::load(path)?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;

    fn valid() -> RunConfig {
        RunConfig { generate: Some(SceneSpec { extent: Vec3::new(50.0, 50.0, 30.0), obstacles: vec![], blocks: vec![] }), ..RunConfig::default() }
    }

    #[test]
    fn default_with_scene_is_valid() {
        assert_eq!(valid().violations(), Vec::<String>::new());
    }

    #[test]
    fn zeta_out_of_range_is_named() {
        let mut c = valid();
        c.params.zeta_deg = 95.0;
        let v = c.violations();
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("zeta"));
    }

    #[test]
    fn missing_scene_is_reported() {
        let v = RunConfig::default().violations();
        assert!(v.iter().any(|s| s.starts_with("scene")));
    }

    #[test]
    fn conflicting_ablations() {
        let mut c = valid();
        c.ablations = [Ablation::NoHae, Ablation::NoLae].into();
        assert_eq!(c.violations().len(), 1);
        c.ablations = [Ablation::NoNl, Ablation::NoVps].into();
        assert_eq!(c.violations().len(), 1);
    }

    #[test]
    fn toml_round_trip() {
        let mut c = valid();
        c.ablations = [Ablation::NoAteVps].into();
        c.scorer = ScorerChoice::External { endpoint: "tcp://127.0.0.1:9000".into() };
        c.td_budget = Some(1500.0);
        let text = c.to_toml_string();
        assert_eq!(RunConfig::from_toml_str(&text, "test").unwrap(), c);
    }

    #[test]
    fn sparse_toml_takes_defaults() {
        let c = RunConfig::from_toml_str("scene = \"s.json\"\nablations = [\"no-lae\"]\n[params]\nkappa = 0.5\n", "t").unwrap();
        assert_eq!(c.params.kappa, 0.5);
        assert_eq!(c.params.eta, 8.0);
        assert_eq!(c.label(), "zecc+no-lae");
        assert_eq!(c.ate_mode(), AteMode::NoLae);
        assert!(c.violations().is_empty());
    }

    #[test]
    fn unknown_ablation_is_a_parse_error() {
        assert!(matches!(RunConfig::from_toml_str("ablations = [\"no-foo\"]", "t"), Err(Error::Parse { .. })));
    }
}
