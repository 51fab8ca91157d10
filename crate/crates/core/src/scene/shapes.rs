//! Procedural meshes: primitives for tests and the toy suite, and coarse
//! stand-ins for the car, desk and robot arm used in the reference scenes.
//! All shapes are closed, outward-facing and centered at the local origin
//! unless noted.

use std::f64::consts::PI;

use crate::geometry::{RigidPose, Vec3};

use super::TriangleMesh;

fn build(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> TriangleMesh {
    TriangleMesh::new(vertices, triangles).expect("procedural shape is valid")
}

fn place(mesh: TriangleMesh, pose: RigidPose) -> TriangleMesh {
    let t = mesh.transformed(&pose);
    build(t.vertices().to_vec(), t.triangles().to_vec())
}

/// Axis-aligned box with edge lengths `size`, 12 triangles.
pub fn cuboid(size: Vec3) -> TriangleMesh {
    let h = size * 0.5;
    let v = (0..8)
        .map(|i| {
            Vec3::new(
                if i & 1 == 0 { -h.x } else { h.x },
                if i & 2 == 0 { -h.y } else { h.y },
                if i & 4 == 0 { -h.z } else { h.z },
            )
        })
        .collect();
    let quads = [
        [0, 2, 3, 1], // -z
        [4, 5, 7, 6], // +z
        [0, 1, 5, 4], // -y
        [2, 6, 7, 3], // +y
        [0, 4, 6, 2], // -x
        [1, 3, 7, 5], // +x
    ];
    let t = quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect();
    build(v, t)
}

/// Box occupying `[min, max]`.
pub fn cuboid_between(min: Vec3, max: Vec3) -> TriangleMesh {
    place(cuboid(max - min), RigidPose::from_translation((min + max) * 0.5))
}

/// Latitude/longitude sphere with single-vertex poles on ±z. Every vertex
/// lies exactly on the sphere, so the mesh is inscribed in it.
pub fn uv_sphere(radius: f64, stacks: usize, slices: usize) -> TriangleMesh {
    let stacks = stacks.max(2);
    let slices = slices.max(3);
    let mut v = vec![Vec3::new(0.0, 0.0, radius)];
    for i in 1..stacks {
        let theta = PI * i as f64 / stacks as f64;
        for j in 0..slices {
            let phi = 2.0 * PI * j as f64 / slices as f64;
            v.push(radius * Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()));
        }
    }
    v.push(Vec3::new(0.0, 0.0, -radius));
    let south = v.len() - 1;
    let ring = |i: usize, j: usize| 1 + (i - 1) * slices + j % slices;
    let mut t = Vec::new();
    for j in 0..slices {
        t.push([0, ring(1, j), ring(1, j + 1)]);
        t.push([south, ring(stacks - 1, j + 1), ring(stacks - 1, j)]);
    }
    for i in 1..stacks - 1 {
        for j in 0..slices {
            let (a, b, c, d) = (ring(i, j), ring(i, j + 1), ring(i + 1, j), ring(i + 1, j + 1));
            t.push([a, c, d]);
            t.push([a, d, b]);
        }
    }
    build(v, t)
}

/// Closed cylinder along z, centered.
pub fn cylinder(radius: f64, height: f64, segments: usize) -> TriangleMesh {
    frustum(radius, radius, height, segments)
}

/// Closed cone along z (apex up), centered on its height.
pub fn cone(radius: f64, height: f64, segments: usize) -> TriangleMesh {
    let segments = segments.max(3);
    let mut v = vec![Vec3::new(0.0, 0.0, -height / 2.0), Vec3::new(0.0, 0.0, height / 2.0)];
    for j in 0..segments {
        let phi = 2.0 * PI * j as f64 / segments as f64;
        v.push(Vec3::new(radius * phi.cos(), radius * phi.sin(), -height / 2.0));
    }
    let r = |j: usize| 2 + j % segments;
    let t = (0..segments)
        .flat_map(|j| [[0, r(j + 1), r(j)], [1, r(j), r(j + 1)]])
        .collect();
    build(v, t)
}

fn frustum(bottom: f64, top: f64, height: f64, segments: usize) -> TriangleMesh {
    let segments = segments.max(3);
    let (zb, zt) = (-height / 2.0, height / 2.0);
    let mut v = vec![Vec3::new(0.0, 0.0, zb), Vec3::new(0.0, 0.0, zt)];
    for j in 0..segments {
        let phi = 2.0 * PI * j as f64 / segments as f64;
        v.push(Vec3::new(bottom * phi.cos(), bottom * phi.sin(), zb));
        v.push(Vec3::new(top * phi.cos(), top * phi.sin(), zt));
    }
    let b = |j: usize| 2 + 2 * (j % segments);
    let u = |j: usize| 3 + 2 * (j % segments);
    let mut t = Vec::new();
    for j in 0..segments {
        t.push([0, b(j + 1), b(j)]);
        t.push([1, u(j), u(j + 1)]);
        t.push([b(j), b(j + 1), u(j + 1)]);
        t.push([b(j), u(j + 1), u(j)]);
    }
    build(v, t)
}

fn concat(parts: Vec<TriangleMesh>) -> TriangleMesh {
    TriangleMesh::concat(&parts).expect("parts are valid")
}

/// Toy-car stand-in: body, cabin and four wheels. About 0.8 × 0.4 × 0.33 m,
/// resting on z = 0, facing +x.
pub fn car() -> TriangleMesh {
    let wheel = |x: f64, y: f64| {
        place(
            cylinder(0.08, 0.05, 16),
            RigidPose::from_axis_angle(Vec3::new(PI / 2.0, 0.0, 0.0), Vec3::new(x, y, 0.08)),
        )
    };
    concat(vec![
        cuboid_between(Vec3::new(-0.4, -0.15, 0.06), Vec3::new(0.4, 0.15, 0.2)),
        cuboid_between(Vec3::new(-0.2, -0.13, 0.2), Vec3::new(0.15, 0.13, 0.33)),
        wheel(0.25, 0.175),
        wheel(0.25, -0.175),
        wheel(-0.25, 0.175),
        wheel(-0.25, -0.175),
    ])
}

/// Desk stand-in: top slab on four legs, 1.0 × 0.6 × 0.75 m, on z = 0.
pub fn desk() -> TriangleMesh {
    let leg = |x: f64, y: f64| {
        cuboid_between(Vec3::new(x - 0.025, y - 0.025, 0.0), Vec3::new(x + 0.025, y + 0.025, 0.72))
    };
    concat(vec![
        cuboid_between(Vec3::new(-0.5, -0.3, 0.72), Vec3::new(0.5, 0.3, 0.75)),
        leg(0.45, 0.25),
        leg(0.45, -0.25),
        leg(-0.45, 0.25),
        leg(-0.45, -0.25),
    ])
}

/// Robot-arm stand-in: base drum, upright link, angled forearm, gripper.
pub fn robot_arm() -> TriangleMesh {
    let forearm = place(
        cuboid(Vec3::new(0.4, 0.07, 0.07)),
        RigidPose::from_axis_angle(Vec3::new(0.0, -0.5, 0.0), Vec3::new(0.17, 0.0, 0.6)),
    );
    concat(vec![
        place(cylinder(0.12, 0.1, 20), RigidPose::from_translation(Vec3::new(0.0, 0.0, 0.05))),
        cuboid_between(Vec3::new(-0.04, -0.04, 0.1), Vec3::new(0.04, 0.04, 0.55)),
        place(uv_sphere(0.055, 6, 10), RigidPose::from_translation(Vec3::new(0.0, 0.0, 0.55))),
        forearm,
        cuboid_between(Vec3::new(0.33, -0.05, 0.66), Vec3::new(0.4, 0.05, 0.72)),
    ])
}

/// Looks up a builtin shape by name (used by `builtin:<name>` in scene files).
pub fn builtin(name: &str) -> Option<TriangleMesh> {
    Some(match name {
        "car" => car(),
        "desk" => desk(),
        "robot_arm" | "robot-arm" => robot_arm(),
        "cube" => cuboid(Vec3::repeat(1.0)),
        "sphere" => uv_sphere(0.5, 12, 18),
        "cylinder" => cylinder(0.3, 0.6, 20),
        "cone" => cone(0.35, 0.6, 20),
        _ => return None,
    })
}
