//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::statistics::{Data, Median};

use zecc_core::config::{Ablation, RunConfig};
use zecc_core::eval::{mape, travel_distance, EpisodeReport};
use zecc_core::fdc::dedup_count;
use zecc_core::geom::point_segment_distance;
use zecc_core::nlbn::{candidate_directions, select_direction, SelectionRule};
use zecc_core::scene::{poisson_pmf, sample_block_count, CrowdBlock, Scene, SceneSpec};
use zecc_core::world::build_world;
use zecc_core::{rng_from_seed, run_episode, Aabb, Rect, SimRng, Vec3};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> RunConfig {
    RunConfig::load(configs_dir().join(name)).unwrap_or_else(|e| panic!("loading {name}: {e}"))
}

fn with(base: &RunConfig, ablations: &[Ablation]) -> RunConfig {
    RunConfig { ablations: ablations.iter().copied().collect(), ..base.clone() }
}

fn episodes(config: &RunConfig) -> Vec<EpisodeReport> {
    config.seeds.iter().map(|&s| run_episode(config, s).expect("episode runs")).collect()
}

fn median(values: impl IntoIterator<Item = f64>) -> f64 {
    Data::new(values.into_iter().collect::<Vec<_>>()).median()
}

fn random_unit(rng: &mut SimRng) -> Vec3 {
    loop {
        let v = Vec3::new(StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng));
        let n = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

fn poisson_generator() -> Outcome {
    let mean = 4.0;
    // a 4 m x 4 m block at 0.25 persons per m^2
    let block = CrowdBlock::new(Rect::new(0.0, 0.0, 4.0, 4.0), 0.0, 0.25);
    let mut rng = rng_from_seed(2024);
    let draws: Vec<u64> = (0..10_000).map(|_| sample_block_count(&block, &mut rng).unwrap()).collect();
    let n = draws.len() as f64;
    let m = draws.iter().sum::<u64>() as f64 / n;
    let var = draws.iter().map(|&k| (k as f64 - m).powi(2)).sum::<f64>() / (n - 1.0);

    // bins 0..=top, with the last one pooling the upper tail
    let top = (0..).find(|&k| n * (1.0 - (0..=k).map(|j| poisson_pmf(mean, j).unwrap()).sum::<f64>()) < 5.0).unwrap();
    let mut observed = vec![0.0; top as usize + 1];
    for &k in &draws {
        observed[k.min(top) as usize] += 1.0;
    }
    let mut expected: Vec<f64> = (0..top).map(|k| n * poisson_pmf(mean, k).unwrap()).collect();
    expected.push(n - expected.iter().sum::<f64>());
    let chi2: f64 = observed.iter().zip(&expected).map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = (observed.len() - 1) as f64;
    let critical = ChiSquared::new(dof).unwrap().inverse_cdf(0.99);
    let pass = (3.9..=4.1).contains(&m) && (3.7..=4.3).contains(&var) && chi2 < critical;
    outcome(pass, format!("mean {m:.4}, variance {var:.4}, chi2 {chi2:.2} < {critical:.2} on {dof} dof"))
}

fn cone_constraint() -> Outcome {
    let mut rng = rng_from_seed(7);
    let normals: Vec<Vec3> = (0..10_000).map(|_| random_unit(&mut rng)).collect();
    let mut worst = 0.0f64;
    for zeta in [5.0f64, 15.0, 25.0, 45.0] {
        let c = zeta.to_radians().cos();
        for n in &normals {
            for v in candidate_directions(n, zeta, 24).unwrap() {
                worst = worst.max((v.dot(n) - c).abs());
            }
        }
    }
    outcome(worst < 1e-9, format!("max |dot - cos zeta| = {worst:.3e} over 4 x 10000 x 24"))
}

fn selection_oracle() -> Outcome {
    let mut rng = rng_from_seed(11);
    let mut agree = 0;
    let total = 10_000;
    for i in 0..total {
        let d_ate = random_unit(&mut rng) * rng.random_range(0.5..50.0);
        // half cone candidate sets, half arbitrary vectors
        let candidates: Vec<Vec3> = if i % 2 == 0 {
            candidate_directions(&random_unit(&mut rng), rng.random_range(1.0..89.0), 24).unwrap()
        } else {
            let m = rng.random_range(1..40);
            (0..m).map(|_| random_unit(&mut rng)).collect()
        };
        let cosines: Vec<f64> = candidates.iter().map(|v| d_ate.dot(v) / (d_ate.norm() * v.norm())).collect();
        let best = cosines.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let oracle = cosines.iter().position(|&c| c == best).unwrap();
        if select_direction(&d_ate, &candidates, SelectionRule::MaxCosine).unwrap().index == oracle {
            agree += 1;
        }
    }
    outcome(agree == total, format!("{agree}/{total} agree with the brute-force argmax"))
}

fn nav_point_range(all: &mut Trend) -> Outcome {
    let spec = SceneSpec {
        extent: Vec3::new(160.0, 160.0, 60.0),
        obstacles: vec![
            Aabb::new(Vec3::new(70.0, 20.0, 0.0), Vec3::new(90.0, 50.0, 15.0)),
            Aabb::new(Vec3::new(20.0, 100.0, 0.0), Vec3::new(40.0, 110.0, 6.0)),
        ],
        blocks: vec![
            CrowdBlock::new(Rect::new(20.0, 20.0, 50.0, 45.0), 0.0, 0.3),
            CrowdBlock::new(Rect::new(100.0, 90.0, 140.0, 140.0), 0.0, 0.1),
            CrowdBlock::new(Rect::new(20.0, 100.0, 40.0, 110.0), 6.0, 0.4),
        ],
    };
    let mut cfg = RunConfig { generate: Some(spec), seeds: vec![0, 1, 2], ..RunConfig::default() };
    cfg.params.hae_altitude = 50.0;
    let mut entries = 0;
    let mut worst = 0.0f64;
    let runs = episodes(&cfg);
    for r in &runs {
        for e in &r.nav_plan.entries {
            let center = r.nav_plan.clusters[e.cluster].center;
            worst = worst.max(((e.position - center).norm() - cfg.params.eta).abs());
            entries += 1;
        }
    }
    all.small.extend(runs);
    outcome(entries > 0 && worst < 1e-6, format!("{entries} entries, max | |x_view - x_cluster| - eta | = {worst:.3e}"))
}

/// Minimum distance from `q` to the segment sampled every 0.01 m.
fn sampled_distance(q: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let steps = ((b - a).norm() / 0.01).ceil().max(1.0) as usize;
    (0..=steps).map(|i| (a + (b - a) * (i as f64 / steps as f64) - q).norm()).fold(f64::INFINITY, f64::min)
}

fn occlusion_oracle() -> Outcome {
    let lambda = 0.5;
    let mut rng = rng_from_seed(5);
    let (mut checked, mut agree, mut margin, mut obstructed) = (0, 0, 0, 0);
    for _ in 0..1_000 {
        let extent = Vec3::new(30.0, 30.0, 20.0);
        let boxes: Vec<Aabb> = (0..rng.random_range(1..4))
            .map(|_| {
                let lo = Vec3::new(rng.random_range(2.0..24.0), rng.random_range(2.0..24.0), 0.0);
                let size = Vec3::new(rng.random_range(0.3..4.0), rng.random_range(0.3..4.0), rng.random_range(0.5..8.0));
                Aabb::new(lo, lo + size)
            })
            .collect();
        let mut world = build_world(&Scene { obstacles: boxes, ..Scene::empty(extent, 0) });
        world.rebuild_cloud_index();
        let person = Vec3::new(rng.random_range(0.0..30.0), rng.random_range(0.0..30.0), rng.random_range(0.0..1.7));
        let nav = Vec3::new(rng.random_range(0.0..30.0), rng.random_range(0.0..30.0), rng.random_range(2.0..18.0));
        let (lo, hi) = (person.inf(&nav).add_scalar(-lambda - 0.05), person.sup(&nav).add_scalar(lambda + 0.05));
        let oracle_min = world
            .surface_cloud
            .iter()
            .filter(|q| (0..3).all(|k| q[k] >= lo[k] && q[k] <= hi[k]))
            .filter(|q| point_segment_distance(q, &person, &nav).0 <= lambda + 0.05)
            .map(|q| sampled_distance(q, &person, &nav))
            .fold(f64::INFINITY, f64::min);
        if (oracle_min - lambda).abs() < 0.02 {
            margin += 1;
            continue;
        }
        let classified = world.cloud_index().any_near_segment(&world.surface_cloud, &person, &nav, lambda);
        checked += 1;
        obstructed += usize::from(classified);
        if classified == (oracle_min <= lambda) {
            agree += 1;
        }
    }
    outcome(checked > 0 && agree == checked, format!("{agree}/{checked} agree ({obstructed} obstructed), {margin} margin cases excluded"))
}

fn dedup_oracle() -> Outcome {
    let voxel = 0.25;
    let mut rng = rng_from_seed(3);
    let mut agree = 0;
    for _ in 0..1_000 {
        let n = rng.random_range(0..200);
        let span = rng.random_range(0.5..6.0);
        let pts: Vec<Vec3> = (0..n)
            .map(|_| Vec3::new(rng.random_range(-span..span), rng.random_range(-span..span), rng.random_range(0.0..span)))
            .collect();
        // exhaustive grouping: a point opens a new group unless an earlier one shares its voxel
        let key = |p: &Vec3| [0, 1, 2].map(|k| (p[k] / voxel).floor() as i64);
        let groups = (0..pts.len()).filter(|&i| (0..i).all(|j| key(&pts[j]) != key(&pts[i]))).count();
        if dedup_count(&pts, voxel).unwrap() == groups {
            agree += 1;
        }
    }
    outcome(agree == 1_000, format!("{agree}/1000 point sets match"))
}

fn metric_formulas() -> Outcome {
    let m = mape(&[100], &[80]).unwrap();
    let td = travel_distance(&[Vec3::zeros(), Vec3::new(3.0, 4.0, 0.0), Vec3::new(3.0, 4.0, 12.0)]);
    outcome(m == 20.0 && td == 17.0, format!("mape {m}, travel distance {td}"))
}

/// Episodes kept for the end-to-end checks.
struct Trend {
    small: Vec<EpisodeReport>,
    corridors: Vec<EpisodeReport>,
    standard: Vec<EpisodeReport>,
}

fn viewpoint_trend(all: &mut Trend) -> Outcome {
    let base = load("corridors.toml");
    let mut line = Vec::new();
    let mut medians = Vec::new();
    for abl in [&[][..], &[Ablation::NoAteVps], &[Ablation::NoNl]] {
        let cfg = with(&base, abl);
        let runs = episodes(&cfg);
        let m = median(runs.iter().map(|r| r.success_rate));
        line.push(format!("{} {m:.1}", cfg.label()));
        medians.push(m);
        all.corridors.extend(runs);
    }
    let pass = medians[0] == 100.0 && medians[1] < 50.0 && medians[2] < 50.0;
    outcome(pass, format!("median success rate: {}", line.join(", ")))
}

fn exploration_trend(all: &mut Trend) -> Outcome {
    let base = load("standard.toml");
    let mut td = Vec::new();
    let mut mp = Vec::new();
    for abl in [&[][..], &[Ablation::NoHae], &[Ablation::NoLae]] {
        let runs = episodes(&with(&base, abl));
        td.push(median(runs.iter().map(|r| r.td)));
        mp.push(median(runs.iter().map(|r| r.mape.expect("standard scene has people"))));
        all.standard.extend(runs);
    }
    let pass = td[1] > td[0] && td[0] > td[2] && mp[2] > mp[0];
    outcome(
        pass,
        format!(
            "median TD no-hae {:.0} > zecc {:.0} > no-lae {:.0}; median MAPE no-lae {:.2} > zecc {:.2}",
            td[1], td[0], td[2], mp[2], mp[0]
        ),
    )
}

fn deterministic(all: &Trend) -> Outcome {
    let over: Vec<String> = all
        .small
        .iter()
        .chain(&all.corridors)
        .chain(&all.standard)
        .filter(|r| r.y_hat > r.y)
        .map(|r| format!("{} seed {} ({} > {})", r.method, r.seed, r.y_hat, r.y))
        .collect();
    let mut repeats = 0;
    let mut identical = 0;
    for (cfg, seed) in [(load("corridors.toml"), 2), (with(&load("standard.toml"), &[Ablation::NoLae]), 1)] {
        let a = serde_json::to_string(&run_episode(&cfg, seed).unwrap()).unwrap();
        let b = serde_json::to_string(&run_episode(&cfg, seed).unwrap()).unwrap();
        repeats += 1;
        if a == b {
            identical += 1;
        }
    }
    let episodes = all.small.len() + all.corridors.len() + all.standard.len();
    let pass = over.is_empty() && identical == repeats && episodes > 0;
    let mut detail = format!("y_hat <= y on {}/{episodes} episodes, {identical}/{repeats} repeats byte-identical", episodes - over.len());
    if !over.is_empty() {
        detail.push_str(&format!("; over-counts: {}", over.join(", ")));
    }
    outcome(pass, detail)
}

fn main() {
    let mut trend = Trend { small: Vec::new(), corridors: Vec::new(), standard: Vec::new() };
    let mut failures = 0;
    let mut report = |id: u32, name: &str, budget: Option<Duration>, run: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let out = run();
        let took = t.elapsed();
        let in_time = budget.is_none_or(|b| took <= b);
        let pass = out.pass && in_time;
        if !pass {
            failures += 1;
        }
        let budget = budget.map(|b| format!(" of {:.0} s", b.as_secs_f64())).unwrap_or_default();
        println!(
            "{} [{id:>2}] {name}: {} ({:.2} s{budget})",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64()
        );
    };
    let s = Duration::from_secs;
    report(1, "poisson block counts", Some(s(2)), &mut poisson_generator);
    report(2, "view cone constraint", Some(s(1)), &mut cone_constraint);
    report(3, "max-cosine selection", None, &mut selection_oracle);
    report(4, "nav point range", None, &mut || nav_point_range(&mut trend));
    report(5, "occlusion classifier", Some(s(30)), &mut occlusion_oracle);
    report(6, "voxel dedup", None, &mut dedup_oracle);
    report(7, "metric formulas", None, &mut metric_formulas);
    report(8, "viewpoint selection trend", Some(s(300)), &mut || viewpoint_trend(&mut trend));
    report(9, "exploration ablation trend", Some(s(600)), &mut || exploration_trend(&mut trend));
    report(10, "deterministic end to end", None, &mut || deterministic(&trend));
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
