use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use zecc_core::config::ScorerChoice;
use zecc_core::scene::{generate_scene, save_scene, GenerationWarning};
use zecc_core::suite::run_suite;
use zecc_core::{run_episode, Ablation, Error, Method, RunConfig};

#[derive(Parser)]
#[command(name = "zecc", version, about = "Embodied crowd counting simulator")]
struct Cli {
    /// More log output; repeat for debug.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scene file from the `generate` section of a config.
    Gen {
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Run one episode and print its report as JSON.
    Run {
        config: Option<PathBuf>,
        /// Defaults to the first seed of the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run every seed of every config and write per-episode and summary reports.
    Suite {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        #[arg(short, long)]
        out_dir: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Check configs and list every violation.
    Validate {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
}

/// Command-line values that replace the matching config fields.
#[derive(Args, Default)]
struct Overrides {
    /// Scene file; replaces any generation spec.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    /// Ablations to apply; replaces the configured set. Repeatable.
    #[arg(long = "ablation", value_parser = parse_ablation)]
    ablations: Vec<Ablation>,
    /// Run with no ablations regardless of the config.
    #[arg(long, conflicts_with = "ablations")]
    full: bool,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    hae: Option<f64>,
    #[arg(long)]
    lae: Option<f64>,
    #[arg(long)]
    voxel: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    candidates: Option<usize>,
    #[arg(long)]
    td_budget: Option<f64>,
    #[arg(long)]
    fbe_altitude: Option<f64>,
    /// External scorer, `tcp://host:port` or `exec:program args`.
    #[arg(long, env = "ZECC_SCORER_ENDPOINT")]
    scorer_endpoint: Option<String>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    match s {
        "zecc" => Ok(Method::Zecc),
        "fbe" => Ok(Method::Fbe),
        _ => Err(format!("unknown method `{s}`, expected zecc or fbe")),
    }
}

fn parse_ablation(s: &str) -> Result<Ablation, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = &self.scene {
            cfg.scene = Some(s.clone());
            cfg.generate = None;
        }
        if let Some(m) = self.method {
            cfg.method = m;
        }
        if self.full {
            cfg.ablations.clear();
        } else if !self.ablations.is_empty() {
            cfg.ablations = self.ablations.iter().copied().collect();
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = s.clone();
        }
        let p = &mut cfg.params;
        for (slot, v) in [
            (&mut p.zeta_deg, self.zeta),
            (&mut p.kappa, self.kappa),
            (&mut p.eta, self.eta),
            (&mut p.epsilon, self.epsilon),
            (&mut p.hae_altitude, self.hae),
            (&mut p.lae_altitude, self.lae),
            (&mut p.voxel, self.voxel),
            (&mut p.lambda, self.lambda),
        ] {
            if let Some(v) = v {
                *slot = v;
            }
        }
        if let Some(m) = self.candidates {
            p.candidates = m;
        }
        if self.td_budget.is_some() {
            cfg.td_budget = self.td_budget;
        }
        if self.fbe_altitude.is_some() {
            cfg.fbe_altitude = self.fbe_altitude;
        }
        if let Some(e) = &self.scorer_endpoint {
            cfg.scorer = ScorerChoice::External { endpoint: e.clone() };
        }
    }
}

fn load(path: Option<&Path>, overrides: &Overrides) -> zecc_core::Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn gen(config: &Path, seed: u64, out: &Path) -> anyhow::Result<()> {
    let cfg = RunConfig::load(config)?;
    let Some(spec) = &cfg.generate else {
        bail!("{} has no `generate` section", config.display());
    };
    let g = generate_scene(spec, seed)?;
    for w in &g.warnings {
        match w {
            GenerationWarning::NoFreeArea { block } => warn!("block {block} has no free area"),
            GenerationWarning::Dropped { block, person } => warn!("block {block}: dropped person {person}"),
        }
    }
    save_scene(&g.scene, out)?;
    println!("{} persons written to {}", g.scene.count(), out.display());
    Ok(())
}

fn run(config: Option<&Path>, seed: Option<u64>, out: Option<&Path>, overrides: &Overrides) -> anyhow::Result<()> {
    let cfg = load(config, overrides)?;
    let seed = seed.unwrap_or(cfg.seeds[0]);
    let report = run_episode(&cfg, seed)?;
    info!("{} seed {seed}: y={} y_hat={} td={:.1}", cfg.label(), report.y, report.y_hat, report.td);
    let json = serde_json::to_string_pretty(&report)?;
    match out {
        Some(p) => write(p, &json),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn suite(configs: &[PathBuf], out_dir: &Path, overrides: &Overrides) -> anyhow::Result<()> {
    let cfgs = configs.iter().map(|p| load(Some(p), overrides)).collect::<zecc_core::Result<Vec<_>>>()?;
    let report = run_suite(&cfgs)?;
    let episodes = out_dir.join("episodes");
    fs::create_dir_all(&episodes).with_context(|| format!("creating {}", episodes.display()))?;
    for r in &report.episodes {
        let label = std::iter::once(r.method.as_str()).chain(r.ablations.iter().map(String::as_str)).collect::<Vec<_>>();
        let name = format!("{}-{}-seed{}.json", r.scene, label.join("+"), r.seed);
        write(&episodes.join(name), &serde_json::to_string_pretty(r)?)?;
    }
    write(&out_dir.join("episodes.csv"), &report.episodes_csv())?;
    write(&out_dir.join("summary.csv"), &report.summary_csv())?;
    write(&out_dir.join("suite.json"), &report.to_json())?;
    print!("{}", report.summary_csv());
    Ok(())
}

fn validate(configs: &[PathBuf]) -> anyhow::Result<()> {
    let mut failed = 0;
    for path in configs {
        match RunConfig::load(path) {
            Ok(cfg) => {
                let v = cfg.violations();
                if v.is_empty() {
                    println!("{}: ok", path.display());
                } else {
                    failed += 1;
                    println!("{}: {} violation(s)", path.display(), v.len());
                    for line in v {
                        println!("  {line}");
                    }
                }
            }
            Err(e) => {
                failed += 1;
                println!("{}: {e}", path.display());
            }
        }
    }
    if failed > 0 {
        return Err(Error::Invalid { what: "config", violations: vec![format!("{failed} file(s) failed")] }.into());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Gen { config, seed, out } => gen(config, *seed, out),
        Command::Run { config, seed, out, overrides } => run(config.as_deref(), *seed, out.as_deref(), overrides),
        Command::Suite { configs, out_dir, overrides } => suite(configs, out_dir, overrides),
        Command::Validate { configs } => validate(configs),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            // bad configs and scene files are validation failures
            match e.downcast_ref::<Error>() {
                Some(Error::Invalid { .. } | Error::Parse { .. }) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
