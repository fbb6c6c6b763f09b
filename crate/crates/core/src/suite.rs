//! Batch runs across configs and seeds, with per-method aggregates.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, Median, Statistics};

use crate::config::RunConfig;
use crate::episode::run_episode;
use crate::error::{Error, Result};
use crate::eval::EpisodeReport;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub n: usize,
    pub median: f64,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Stats> {
        if values.is_empty() {
            return None;
        }
        let std = if values.len() > 1 { values.std_dev() } else { 0.0 };
        Some(Stats { n: values.len(), median: Data::new(values.to_vec()).median(), mean: values.mean(), std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub method: String,
    /// Density band name, when the config declares bands.
    pub band: Option<String>,
    pub episodes: usize,
    pub mape: Option<Stats>,
    pub td: Option<Stats>,
    pub success_rate: Option<Stats>,
    pub occlusion_ratio: Option<Stats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub episodes: Vec<EpisodeReport>,
    pub groups: Vec<GroupSummary>,
}

fn label(r: &EpisodeReport) -> String {
    std::iter::once(r.method.as_str()).chain(r.ablations.iter().map(String::as_str)).collect::<Vec<_>>().join("+")
}

fn summarize(method: String, band: Option<String>, reports: &[&EpisodeReport]) -> GroupSummary {
    let collect = |f: &dyn Fn(&EpisodeReport) -> Option<f64>| Stats::of(&reports.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
    GroupSummary {
        method,
        band,
        episodes: reports.len(),
        mape: collect(&|r| r.mape),
        td: collect(&|r| Some(r.td)),
        success_rate: collect(&|r| Some(r.success_rate)),
        occlusion_ratio: collect(&|r| r.occlusion_ratio),
    }
}

/// Aggregates reports per method label, then per density band of that label.
pub fn aggregate(episodes: Vec<EpisodeReport>, bands: &[crate::config::DensityBand]) -> SuiteReport {
    let mut by_method: BTreeMap<String, Vec<&EpisodeReport>> = BTreeMap::new();
    for r in &episodes {
        by_method.entry(label(r)).or_default().push(r);
    }
    let mut groups = Vec::new();
    for (method, reports) in &by_method {
        groups.push(summarize(method.clone(), None, reports));
        for b in bands {
            let inside: Vec<&EpisodeReport> =
                reports.iter().copied().filter(|r| r.density.is_some_and(|d| d >= b.min && d < b.max)).collect();
            if !inside.is_empty() {
                groups.push(summarize(method.clone(), Some(b.name.clone()), &inside));
            }
        }
    }
    SuiteReport { episodes, groups }
}

/// Runs every config over each of its seeds. Episodes run in parallel;
/// the output order is config order, then seed order.
pub fn run_suite(configs: &[RunConfig]) -> Result<SuiteReport> {
    let jobs: Vec<(&RunConfig, u64)> = configs.iter().flat_map(|c| c.seeds.iter().map(move |&s| (c, s))).collect();
    if jobs.is_empty() {
        return Err(Error::domain("suite has no episodes"));
    }
    for c in configs {
        c.validate()?;
    }
    let episodes = jobs.par_iter().map(|(c, s)| run_episode(c, *s)).collect::<Result<Vec<_>>>()?;
    let mut bands = Vec::new();
    for c in configs {
        for b in &c.density_bands {
            if !bands.contains(b) {
                bands.push(b.clone());
            }
        }
    }
    Ok(aggregate(episodes, &bands))
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl SuiteReport {
    /// One row per episode: method, seed, y, ŷ, mape, td, success_rate, occlusion_ratio.
    pub fn episodes_csv(&self) -> String {
        let mut out = String::from("method,seed,y,y_hat,mape,td,success_rate,occlusion_ratio\n");
        for r in &self.episodes {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                label(r),
                r.seed,
                r.y,
                r.y_hat,
                opt(r.mape),
                r.td,
                r.success_rate,
                opt(r.occlusion_ratio)
            );
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("method,band,episodes");
        for m in ["mape", "td", "success_rate", "occlusion_ratio"] {
            let _ = write!(out, ",{m}_median,{m}_mean,{m}_std");
        }
        out.push('\n');
        for g in &self.groups {
            let _ = write!(out, "{},{},{}", g.method, g.band.as_deref().unwrap_or(""), g.episodes);
            for s in [g.mape, g.td, g.success_rate, g.occlusion_ratio] {
                match s {
                    Some(s) => {
                        let _ = write!(out, ",{},{},{}", s.median, s.mean, s.std);
                    }
                    None => out.push_str(",,,"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn group(&self, method: &str) -> Option<&GroupSummary> {
        self.groups.iter().find(|g| g.method == method && g.band.is_none())
    }
}
