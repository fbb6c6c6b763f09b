//! Scene file format: a UTF-8 JSON document with keys `extent`,
//! `obstacles`, `blocks`, `persons` and `seed`. Coordinates are written
//! with exactly six fractional digits, one person per line.
//! The schema lives in `docs/scene.schema.json`.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use super::{CrowdBlock, ObstacleBox, Scene};
use crate::error::{Error, Result};
use crate::geom::{Aabb, Rect, Vec3};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    extent: [f64; 3],
    obstacles: Vec<ObstacleFile>,
    blocks: Vec<BlockFile>,
    persons: Vec<[f64; 3]>,
    seed: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ObstacleFile {
    min: [f64; 3],
    max: [f64; 3],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockFile {
    region: [f64; 4],
    base_height: f64,
    density: f64,
}

fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

fn fmt3(out: &mut String, v: &Vec3) {
    let _ = write!(out, "[{:.6}, {:.6}, {:.6}]", v.x, v.y, v.z);
}

pub fn to_json_string(scene: &Scene) -> String {
    let mut s = String::with_capacity(64 + scene.persons.len() * 40);
    s.push_str("{\n  \"extent\": ");
    fmt3(&mut s, &scene.extent);
    s.push_str(",\n  \"obstacles\": [");
    for (i, o) in scene.obstacles.iter().enumerate() {
        s.push_str(if i == 0 { "\n    {\"min\": " } else { ",\n    {\"min\": " });
        fmt3(&mut s, &o.min);
        s.push_str(", \"max\": ");
        fmt3(&mut s, &o.max);
        s.push('}');
    }
    s.push_str(if scene.obstacles.is_empty() { "]" } else { "\n  ]" });
    s.push_str(",\n  \"blocks\": [");
    for (i, b) in scene.blocks.iter().enumerate() {
        let r = &b.region;
        let _ = write!(
            s,
            "{}{{\"region\": [{:.6}, {:.6}, {:.6}, {:.6}], \"base_height\": {:.6}, \"density\": {:.6}}}",
            if i == 0 { "\n    " } else { ",\n    " },
            r.x_min,
            r.y_min,
            r.x_max,
            r.y_max,
            b.base_height,
            b.density
        );
    }
    s.push_str(if scene.blocks.is_empty() { "]" } else { "\n  ]" });
    s.push_str(",\n  \"persons\": [");
    for (i, p) in scene.persons.iter().enumerate() {
        s.push_str(if i == 0 { "\n    " } else { ",\n    " });
        fmt3(&mut s, p);
    }
    s.push_str(if scene.persons.is_empty() { "]" } else { "\n  ]" });
    let _ = write!(s, ",\n  \"seed\": {}\n}}\n", scene.seed);
    s
}

/// Parses and validates a scene document. `origin` names the source in
/// error messages.
pub fn from_json_str(text: &str, origin: &str) -> Result<Scene> {
    let file: SceneFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        location: format!("{origin}:{}:{}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let scene = Scene {
        extent: v3(file.extent),
        obstacles: file.obstacles.into_iter().map(|o| Aabb::new(v3(o.min), v3(o.max))).collect::<Vec<ObstacleBox>>(),
        blocks: file
            .blocks
            .into_iter()
            .map(|b| CrowdBlock {
                region: Rect::new(b.region[0], b.region[1], b.region[2], b.region[3]),
                base_height: b.base_height,
                density: b.density,
            })
            .collect(),
        persons: file.persons.into_iter().map(v3).collect(),
        seed: file.seed,
    };
    scene.validate()?;
    Ok(scene)
}

pub fn save_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_json_string(scene)).map_err(|e| Error::io(path, e))
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json_str(&text, &path.display().to_string())
}
