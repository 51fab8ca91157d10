//! World geometry: triangle meshes, rigid object placement, multi-object
//! scenes, and area-uniform surface sampling for ground-truth clouds.

mod description;
mod mesh_io;
pub mod shapes;

pub use description::{load_scene, ObjectSpec, SceneSpec};
pub use mesh_io::{load_mesh, write_off, write_ply_mesh, MeshFormat};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{closest_point_on_triangle, Aabb, RigidPose, Vec3};
use crate::pointcloud::PointCloud;
use crate::seed::{self, Rng};

/// Triangles with area below this are dropped at construction.
pub const DEGENERATE_AREA: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
    normals: Vec<Vec3>,
    areas: Vec<f64>,
    degenerate_dropped: usize,
}

impl TriangleMesh {
    /// Validates indices, drops degenerate triangles and derives unit normals.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if let Some(v) = vertices.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid(format!("vertex {v} is not finite")));
        }
        let mut kept = Vec::with_capacity(triangles.len());
        let mut normals = Vec::with_capacity(triangles.len());
        let mut areas = Vec::with_capacity(triangles.len());
        let mut dropped = 0;
        for (t, tri) in triangles.into_iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&i| i >= vertices.len()) {
                return Err(Error::invalid(format!(
                    "triangle {t} references vertex {bad} of {}",
                    vertices.len()
                )));
            }
            let [a, b, c] = tri.map(|i| vertices[i]);
            let cross = (b - a).cross(&(c - a));
            let area = 0.5 * cross.norm();
            if area < DEGENERATE_AREA {
                dropped += 1;
                continue;
            }
            kept.push(tri);
            normals.push(cross / cross.norm());
            areas.push(area);
        }
        if dropped > 0 {
            log::warn!("dropped {dropped} degenerate triangles");
        }
        if kept.is_empty() {
            return Err(Error::EmptyMesh { dropped });
        }
        Ok(Self {
            vertices,
            triangles: kept,
            normals,
            areas,
            degenerate_dropped: dropped,
        })
    }

    /// Concatenates several meshes into one.
    pub fn concat(parts: &[TriangleMesh]) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for m in parts {
            let base = vertices.len();
            vertices.extend_from_slice(&m.vertices);
            triangles.extend(m.triangles.iter().map(|t| t.map(|i| i + base)));
        }
        Self::new(vertices, triangles)
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn triangle_areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn degenerate_dropped(&self) -> usize {
        self.degenerate_dropped
    }

    pub fn surface_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn triangle(&self, t: usize) -> [Vec3; 3] {
        self.triangles[t].map(|i| self.vertices[i])
    }

    /// A copy with every vertex mapped through `pose`.
    pub fn transformed(&self, pose: &RigidPose) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|v| pose.apply(v)).collect(),
            triangles: self.triangles.clone(),
            normals: self.normals.iter().map(|n| pose.rotate(n).normalize()).collect(),
            areas: self.areas.clone(),
            degenerate_dropped: self.degenerate_dropped,
        }
    }

    pub fn bounds(&self) -> Aabb {
        let mut b = Aabb::empty();
        for v in &self.vertices {
            b.grow(v);
        }
        b
    }

    /// Unsigned distance from `p` to the surface (exhaustive over triangles).
    pub fn distance_to(&self, p: &Vec3) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i]);
                (closest_point_on_triangle(p, &a, &b, &c) - p).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub name: String,
    pub label: u32,
    pub mesh: TriangleMesh,
    pub pose: RigidPose,
}

impl SceneObject {
    pub fn world_mesh(&self) -> TriangleMesh {
        self.mesh.transformed(&self.pose)
    }
}

/// Labeled objects in a common world frame. `m = objects.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    objects: Vec<SceneObject>,
    extent: Aabb,
}

impl Scene {
    /// Labels must be exactly `1..=m` in some order. An empty object list is
    /// accepted here (renderers and the simulator handle it); pipelines call
    /// [`Scene::require_objects`].
    pub fn new(mut objects: Vec<SceneObject>) -> Result<Self> {
        objects.sort_by_key(|o| o.label);
        for (i, o) in objects.iter().enumerate() {
            if o.label != i as u32 + 1 {
                return Err(Error::invalid(format!(
                    "object labels must be distinct and contiguous from 1; found {} at position {}",
                    o.label,
                    i + 1
                )));
            }
        }
        let mut extent = Aabb::empty();
        for o in &objects {
            for v in o.mesh.vertices() {
                extent.grow(&o.pose.apply(v));
            }
        }
        Ok(Self { objects, extent })
    }

    pub fn empty() -> Self {
        Self {
            objects: Vec::new(),
            extent: Aabb::empty(),
        }
    }

    pub fn require_objects(&self) -> Result<()> {
        if self.objects.is_empty() {
            Err(Error::invalid("scene has no objects"))
        } else {
            Ok(())
        }
    }

    pub fn objects(&self) -> &[SceneObject] {
        &self.objects
    }

    pub fn object_count(&self) -> usize {
        self.objects.len()
    }

    pub fn object(&self, label: u32) -> Option<&SceneObject> {
        self.objects.get(label.checked_sub(1)? as usize)
    }

    pub fn extent(&self) -> Aabb {
        self.extent
    }

    /// A copy with every object pose pre-multiplied by `pose`.
    pub fn transformed(&self, pose: &RigidPose) -> Scene {
        let objects = self
            .objects
            .iter()
            .map(|o| SceneObject {
                pose: pose.compose(&o.pose),
                ..o.clone()
            })
            .collect();
        Scene::new(objects).expect("labels unchanged")
    }
}

pub(crate) fn sample_surface_with(
    mesh: &TriangleMesh,
    pose: &RigidPose,
    k: usize,
    rng: &mut Rng,
) -> Vec<Vec3> {
    if k == 0 {
        return Vec::new();
    }
    // Selection weights come from the untransformed mesh, so the chosen
    // triangles and barycentric weights do not depend on the pose.
    let mut cdf = Vec::with_capacity(mesh.areas.len());
    let mut acc = 0.0;
    for a in &mesh.areas {
        acc += a;
        cdf.push(acc);
    }
    let total = acc;
    let world: Vec<Vec3> = mesh.vertices.iter().map(|v| pose.apply(v)).collect();
    (0..k)
        .map(|_| {
            let x = rng.random::<f64>() * total;
            let t = cdf.partition_point(|&c| c <= x).min(cdf.len() - 1);
            let (r1, r2): (f64, f64) = (rng.random(), rng.random());
            let s = r1.sqrt();
            let (wa, wb, wc) = (1.0 - s, s * (1.0 - r2), s * r2);
            let [a, b, c] = mesh.triangles[t].map(|i| world[i]);
            a * wa + b * wb + c * wc
        })
        .collect()
}

/// `k` points uniformly distributed over the posed mesh surface.
pub fn sample_surface(mesh: &TriangleMesh, pose: &RigidPose, k: usize, seed: u64) -> PointCloud {
    let mut rng = seed::rng(seed);
    PointCloud::new(sample_surface_with(mesh, pose, k, &mut rng))
}

/// `points_per_object` labeled surface samples for every object, drawn from
/// one stream in label order.
pub fn ground_truth_cloud(scene: &Scene, points_per_object: usize, seed: u64) -> PointCloud {
    let mut rng = seed::rng(seed);
    let mut points = Vec::with_capacity(scene.object_count() * points_per_object);
    let mut labels = Vec::with_capacity(points.capacity());
    for o in scene.objects() {
        points.extend(sample_surface_with(&o.mesh, &o.pose, points_per_object, &mut rng));
        labels.extend(std::iter::repeat_n(o.label, points_per_object));
    }
    PointCloud {
        points,
        labels: Some(labels),
    }
}
