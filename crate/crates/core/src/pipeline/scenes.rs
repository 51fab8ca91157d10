//! Built-in scene types, randomized instances, and the primitive suites.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{RigidPose, Vec3};
use crate::imaging::{CameraModel, DegradeParams, RenderDegradeGenerator};
use crate::pointcloud::{downsample_to_coarse, merge, project, CoarseOptions, PointCloud, COARSE_POINTS, REFINED_POINTS};
use crate::scene::{load_scene, sample_surface, shapes, Scene, SceneObject, TriangleMesh};
use crate::seed;

use super::ViewConfig;

/// Object names of a scene type: `two_objects`, `three_objects`, or a
/// `+`-joined list of builtin shapes such as `car+desk`.
pub fn scene_objects(scene_type: &str) -> Result<Vec<String>> {
    let names: Vec<&str> = match scene_type {
        "two_objects" => vec!["car", "desk"],
        "three_objects" => vec!["car", "desk", "robot_arm"],
        other => other.split('+').collect(),
    };
    for n in &names {
        if shapes::builtin(n).is_none() {
            return Err(Error::Config(format!("unknown object `{n}` in scene type `{scene_type}`")));
        }
    }
    Ok(names.into_iter().map(String::from).collect())
}

/// Radius of the smallest z-axis cylinder around the mesh origin.
fn footprint_radius(mesh: &TriangleMesh) -> f64 {
    mesh.vertices().iter().map(|v| v.xy().norm()).fold(0.0, f64::max)
}

/// Places objects left to right along x with gaps, so that their
/// footprints never overlap. `randomize` adds yaw, gap and y jitter.
fn arrange(names: &[String], rng: Option<&mut seed::Rng>) -> Result<Scene> {
    let meshes: Vec<TriangleMesh> = names.iter().map(|n| shapes::builtin(n).expect("checked")).collect();
    let radii: Vec<f64> = meshes.iter().map(footprint_radius).collect();
    let mut jitter: Vec<(f64, f64, f64)> = vec![(0.0, 0.2, 0.0); names.len()];
    if let Some(rng) = rng {
        for j in jitter.iter_mut() {
            *j = (rng.random_range(0.0..2.0 * PI), rng.random_range(0.1..0.3), rng.random_range(-0.1..0.1));
        }
    }
    let total: f64 = radii.iter().map(|r| 2.0 * r).sum::<f64>() + jitter.iter().skip(1).map(|j| j.1).sum::<f64>();
    let mut x = -total / 2.0;
    let mut objects = Vec::new();
    for (i, mesh) in meshes.into_iter().enumerate() {
        if i > 0 {
            x += jitter[i].1;
        }
        x += radii[i];
        objects.push(SceneObject {
            name: names[i].clone(),
            label: i as u32 + 1,
            mesh,
            pose: RigidPose::from_axis_angle(Vec3::new(0.0, 0.0, jitter[i].0), Vec3::new(x, jitter[i].2, 0.0)),
        });
        x += radii[i];
    }
    Scene::new(objects)
}

/// Fixed, unrotated layout of a scene type, or a scene file (`*.toml`).
pub fn reference_scene(scene_type: &str) -> Result<Scene> {
    if scene_type.ends_with(".toml") {
        return load_scene(Path::new(scene_type));
    }
    arrange(&scene_objects(scene_type)?, None)
}

/// Randomized instance of a scene type; scene files are used as-is.
pub fn scene_instance(scene_type: &str, seed: u64) -> Result<Scene> {
    if scene_type.ends_with(".toml") {
        return load_scene(Path::new(scene_type));
    }
    arrange(&scene_objects(scene_type)?, Some(&mut seed::rng(seed)))
}

/// Five single- and two-primitive scenes used for geometry checks.
pub fn primitive_suite() -> Vec<(String, Scene)> {
    let single = |name: &str, mesh: TriangleMesh, z: f64| {
        Scene::new(vec![SceneObject {
            name: name.into(),
            label: 1,
            mesh,
            pose: RigidPose::from_axis_angle(Vec3::new(0.0, 0.0, 0.4), Vec3::new(0.0, 0.0, z)),
        }])
        .expect("valid scene")
    };
    let pair = Scene::new(vec![
        SceneObject {
            name: "box".into(),
            label: 1,
            mesh: shapes::cuboid(Vec3::new(0.4, 0.3, 0.5)),
            pose: RigidPose::from_translation(Vec3::new(-0.4, 0.0, 0.25)),
        },
        SceneObject {
            name: "ball".into(),
            label: 2,
            mesh: shapes::uv_sphere(0.2, 16, 24),
            pose: RigidPose::from_translation(Vec3::new(0.4, 0.1, 0.2)),
        },
    ])
    .expect("valid scene");
    vec![
        ("cube".into(), single("cube", shapes::cuboid(Vec3::repeat(0.5)), 0.25)),
        ("sphere".into(), single("sphere", shapes::uv_sphere(0.3, 16, 24), 0.3)),
        ("cylinder".into(), single("cylinder", shapes::cylinder(0.2, 0.6, 24), 0.0)),
        ("cone".into(), single("cone", shapes::cone(0.3, 0.5, 24), 0.0)),
        ("box+ball".into(), pair),
    ]
}

/// Settings of the primitive toy suite used to train and compare refiners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToySuiteConfig {
    pub views: ViewConfig,
    pub image_size: usize,
    pub degrade: DegradeParams,
    pub coarse_points: usize,
    pub truth_points: usize,
}

impl Default for ToySuiteConfig {
    fn default() -> Self {
        Self {
            views: ViewConfig { count: 4, radius: 1.6, height: 1.0 },
            image_size: 96,
            degrade: DegradeParams::default(),
            coarse_points: COARSE_POINTS,
            truth_points: REFINED_POINTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyExample {
    pub kind: &'static str,
    pub scene: Scene,
    pub coarse: PointCloud,
    pub truth: PointCloud,
}

/// A random primitive resting on the ground at the origin: box, cylinder,
/// cone or sphere with random dimensions and yaw.
pub fn toy_primitive(rng: &mut seed::Rng) -> (&'static str, Scene) {
    let kind = ["box", "cylinder", "cone", "sphere"][rng.random_range(0..4)];
    let mut d = || rng.random_range(0.2..0.6);
    let (mesh, lift) = match kind {
        "box" => {
            let s = Vec3::new(d(), d(), d());
            (shapes::cuboid(s), s.z / 2.0)
        }
        "cylinder" => (shapes::cylinder(d() / 2.0, d(), 24), 0.0),
        "cone" => (shapes::cone(d() / 2.0, d(), 24), 0.0),
        _ => {
            let r = d() / 2.0;
            (shapes::uv_sphere(r, 12, 18), r)
        }
    };
    let yaw = rng.random_range(0.0..2.0 * PI);
    let scene = Scene::new(vec![SceneObject {
        name: kind.into(),
        label: 1,
        mesh,
        pose: RigidPose::from_axis_angle(Vec3::new(0.0, 0.0, yaw), Vec3::new(0.0, 0.0, lift)),
    }])
    .expect("valid scene");
    (kind, scene)
}

/// `count` toy examples: multi-view degraded projections reduced to a
/// coarse cloud, paired with area-uniform ground truth.
pub fn toy_suite(count: usize, master: u64, cfg: &ToySuiteConfig) -> Result<Vec<ToyExample>> {
    (0..count as u64)
        .map(|i| {
            let (kind, scene) = toy_primitive(&mut seed::rng(seed::derive(master, "toy-scene", i)));
            let generator = RenderDegradeGenerator::new(&scene, cfg.degrade);
            let target = Vec3::new(0.0, 0.0, 0.2);
            let clouds = cfg
                .views
                .cameras(target, cfg.image_size, cfg.image_size as f64)?
                .iter()
                .enumerate()
                .map(|(v, cam)| {
                    let (depth, _) = generator.generate_with_mask(cam, seed::derive(master, "toy-view", i * 16 + v as u64))?;
                    Ok(project(&depth))
                })
                .collect::<Result<Vec<_>>>()?;
            let merged = merge(&clouds);
            if merged.is_empty() {
                return Err(Error::invalid(format!("toy scene {i} is not visible from any view")));
            }
            let coarse = downsample_to_coarse(&merged, cfg.coarse_points, seed::derive(master, "toy-coarse", i), &CoarseOptions::default())?;
            let obj = &scene.objects()[0];
            let truth = sample_surface(&obj.mesh, &obj.pose, cfg.truth_points, seed::derive(master, "toy-truth", i));
            Ok(ToyExample { kind, scene, coarse, truth })
        })
        .collect()
}

impl ViewConfig {
    /// Cameras on a horizontal ring around `target`, evenly spaced in yaw.
    pub fn cameras(&self, target: Vec3, size: usize, focal: f64) -> Result<Vec<CameraModel>> {
        self.eyes(target)
            .into_iter()
            .map(|eye| CameraModel::looking_at(eye, target, Vec3::z(), size, size, focal))
            .collect()
    }

    pub fn eyes(&self, target: Vec3) -> Vec<Vec3> {
        (0..self.count)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / self.count as f64 - PI / 2.0;
                Vec3::new(target.x + self.radius * a.cos(), target.y + self.radius * a.sin(), self.height)
            })
            .collect()
    }
}
