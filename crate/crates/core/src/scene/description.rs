//! Declarative scene files (TOML):
//!
//! ```toml
//! [[object]]
//! name = "car"
//! mesh = "builtin:car"        # or a path relative to this file
//! label = 1
//! translation = [0.6, 0.0, 0.0]
//! axis_angle = [0.0, 0.0, 0.3]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{RigidPose, Vec3};

use super::{load_mesh, shapes, MeshFormat, Scene, SceneObject, TriangleMesh};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub name: String,
    pub mesh: String,
    pub label: u32,
    #[serde(default)]
    pub translation: [f64; 3],
    #[serde(default)]
    pub axis_angle: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    #[serde(default, rename = "object")]
    pub objects: Vec<ObjectSpec>,
}

impl ObjectSpec {
    pub fn pose(&self) -> RigidPose {
        RigidPose::from_axis_angle(Vec3::from(self.axis_angle), Vec3::from(self.translation))
    }

    /// Resolves `builtin:<name>` or a mesh file relative to `base`.
    pub fn load_mesh(&self, base: &Path) -> Result<TriangleMesh> {
        if let Some(name) = self.mesh.strip_prefix("builtin:") {
            return shapes::builtin(name)
                .ok_or_else(|| Error::Config(format!("unknown builtin mesh `{name}`")));
        }
        let path = base.join(&self.mesh);
        let format = MeshFormat::from_path(&path).ok_or_else(|| {
            Error::Config(format!("cannot infer mesh format of {}", path.display()))
        })?;
        if !path.exists() {
            return Err(Error::Config(format!("mesh file {} does not exist", path.display())));
        }
        load_mesh(&path, format)
    }
}

impl SceneSpec {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn build(&self, base: &Path) -> Result<Scene> {
        let objects = self
            .objects
            .iter()
            .map(|o| {
                Ok(SceneObject {
                    name: o.name.clone(),
                    label: o.label,
                    mesh: o.load_mesh(base)?,
                    pose: o.pose(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Scene::new(objects)
    }
}

pub fn load_scene(path: &Path) -> Result<Scene> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    SceneSpec::parse(&text)?.build(base)
}
