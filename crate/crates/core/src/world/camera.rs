//! Pinhole depth cameras and the multi-camera rig.

use serde::{Deserialize, Serialize};

use super::raycast::{cast_normalized, line_of_sight, HitKind};
use super::World;
use crate::geom::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub yaw: f64,
}

impl Pose {
    pub fn at(position: Vec3) -> Self {
        Self { position, yaw: 0.0 }
    }
}

/// Where a camera points relative to the agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mount {
    /// Level camera at `yaw_offset` radians from the agent heading.
    Horizontal { yaw_offset: f64 },
    /// Straight down, image up along the agent heading.
    Nadir,
    /// Along a world-frame direction.
    Boresight { direction: Vec3 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RigConfig {
    pub mounts: Vec<Mount>,
    /// Square image side in pixels.
    pub resolution: usize,
    pub fov_deg: f64,
    pub max_range: f64,
}

impl Default for RigConfig {
    fn default() -> Self {
        let q = std::f64::consts::FRAC_PI_2;
        Self {
            mounts: vec![
                Mount::Horizontal { yaw_offset: 0.0 },
                Mount::Horizontal { yaw_offset: q },
                Mount::Horizontal { yaw_offset: 2.0 * q },
                Mount::Horizontal { yaw_offset: 3.0 * q },
                Mount::Nadir,
            ],
            resolution: 64,
            fov_deg: 90.0,
            max_range: 120.0,
        }
    }
}

impl RigConfig {
    /// Same rig with every nadir camera replaced by one looking along `direction`.
    pub fn aimed(&self, direction: Vec3) -> RigConfig {
        let mut rig = self.clone();
        for m in &mut rig.mounts {
            if *m == Mount::Nadir {
                *m = Mount::Boresight { direction };
            }
        }
        rig
    }

    pub fn tan_half_fov(&self) -> f64 {
        (self.fov_deg.to_radians() * 0.5).tan()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub origin: Vec3,
    pub forward: Vec3,
    pub right: Vec3,
    pub up: Vec3,
    pub tan_half: f64,
    pub resolution: usize,
    pub max_range: f64,
}

impl Camera {
    pub fn new(origin: Vec3, mount: &Mount, yaw: f64, rig: &RigConfig) -> Self {
        let heading = Vec3::new(yaw.cos(), yaw.sin(), 0.0);
        let (forward, up_ref) = match *mount {
            Mount::Horizontal { yaw_offset } => {
                let a = yaw + yaw_offset;
                (Vec3::new(a.cos(), a.sin(), 0.0), Vec3::z())
            }
            Mount::Nadir => (-Vec3::z(), heading),
            Mount::Boresight { direction } => {
                let f = direction.normalize();
                let up = if f.z.abs() > 0.99 { heading } else { Vec3::z() };
                (f, up)
            }
        };
        let right = forward.cross(&up_ref).normalize();
        let up = right.cross(&forward);
        Camera {
            origin,
            forward,
            right,
            up,
            tan_half: rig.tan_half_fov(),
            resolution: rig.resolution,
            max_range: rig.max_range,
        }
    }

    /// Ray through the center of pixel `(i, j)` with unit forward component,
    /// so `origin + ray * depth` recovers the hit for planar depth.
    pub fn pixel_ray(&self, i: usize, j: usize) -> Vec3 {
        let n = self.resolution as f64;
        let u = (2.0 * (i as f64 + 0.5) / n - 1.0) * self.tan_half;
        let v = (1.0 - 2.0 * (j as f64 + 0.5) / n) * self.tan_half;
        self.forward + self.right * u + self.up * v
    }

    /// Pixel containing `p`, or `None` outside the frustum.
    pub fn project(&self, p: &Vec3) -> Option<(usize, usize)> {
        let local = p - self.origin;
        let zf = local.dot(&self.forward);
        if zf <= 0.0 {
            return None;
        }
        let u = local.dot(&self.right) / (zf * self.tan_half);
        let v = local.dot(&self.up) / (zf * self.tan_half);
        if u.abs() > 1.0 || v.abs() > 1.0 {
            return None;
        }
        let n = self.resolution;
        let i = (((u + 1.0) * 0.5 * n as f64).floor() as usize).min(n - 1);
        let j = (((1.0 - v) * 0.5 * n as f64).floor() as usize).min(n - 1);
        Some((i, j))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisiblePerson {
    pub person: usize,
    pub cell: (usize, usize),
    /// Euclidean distance from the camera to the head.
    pub range: f64,
}

#[derive(Debug, Clone)]
pub struct Capture {
    pub camera: Camera,
    /// Row-major planar depth (distance along the boresight), `+∞` for no hit.
    pub depth: Vec<f64>,
    pub visible: Vec<VisiblePerson>,
    pub fov_deg: f64,
}

impl Capture {
    pub fn depth_at(&self, i: usize, j: usize) -> f64 {
        self.depth[j * self.camera.resolution + i]
    }
}

#[derive(Debug, Clone)]
pub struct Observation {
    pub pose: Pose,
    pub captures: Vec<Capture>,
}

impl Observation {
    pub fn visible_counts(&self) -> Vec<usize> {
        self.captures.iter().map(|c| c.visible.len()).collect()
    }
}

pub fn capture(world: &World, pose: &Pose, rig: &RigConfig) -> Observation {
    let origin = pose.position;
    let candidates = world.persons_near(&origin, rig.max_range);
    // line-of-sight is shared by every camera of the rig
    let mut sight: Vec<Option<bool>> = vec![None; candidates.len()];

    let captures = rig
        .mounts
        .iter()
        .map(|mount| {
            let cam = Camera::new(origin, mount, pose.yaw, rig);
            let n = cam.resolution;
            let mut depth = vec![f64::INFINITY; n * n];
            for j in 0..n {
                for i in 0..n {
                    let ray = cam.pixel_ray(i, j);
                    let len = ray.norm();
                    let hit = cast_normalized(world, &origin, &(ray / len), cam.max_range * len);
                    if hit.kind != HitKind::None {
                        depth[j * n + i] = hit.distance / len;
                    }
                }
            }
            let mut visible = Vec::new();
            for (slot, &person) in candidates.iter().enumerate() {
                let head = world.head(person);
                let range = (head - origin).norm();
                if range > cam.max_range {
                    continue;
                }
                let Some(cell) = cam.project(&head) else { continue };
                let seen = *sight[slot].get_or_insert_with(|| line_of_sight(world, &origin, &head));
                if seen {
                    visible.push(VisiblePerson { person, cell, range });
                }
            }
            Capture { camera: cam, depth, visible, fov_deg: rig.fov_deg }
        })
        .collect();

    Observation { pose: *pose, captures }
}
