//! Ray casting against the triangles of a scene through a bounding volume
//! hierarchy (median split on the longest centroid axis).

use crate::geometry::{Aabb, Vec3};
use crate::scene::Scene;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Copy)]
pub struct Hit {
    /// Ray parameter: distance along `dir` in units of `|dir|`.
    pub t: f64,
    pub triangle: usize,
    pub label: u32,
    pub normal: Vec3,
}

#[derive(Debug, Clone)]
struct Tri {
    a: Vec3,
    e1: Vec3,
    e2: Vec3,
    normal: Vec3,
    label: u32,
}

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    /// Leaf: `start..start + count` into `order`; inner: `count == 0`, children `left`, `left + 1`... stored explicitly.
    start: usize,
    count: usize,
    left: usize,
    right: usize,
}

/// Immutable acceleration structure over every world-space triangle of a scene.
#[derive(Debug, Clone)]
pub struct Bvh {
    tris: Vec<Tri>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl Bvh {
    pub fn from_scene(scene: &Scene) -> Self {
        let mut tris = Vec::new();
        for o in scene.objects() {
            let mesh = o.world_mesh();
            for (t, n) in mesh.triangles().iter().zip(mesh.normals()) {
                let [a, b, c] = t.map(|i| mesh.vertices()[i]);
                tris.push(Tri {
                    a,
                    e1: b - a,
                    e2: c - a,
                    normal: *n,
                    label: o.label,
                });
            }
        }
        Self::build(tris)
    }

    fn build(tris: Vec<Tri>) -> Self {
        let centroids: Vec<Vec3> = tris
            .iter()
            .map(|t| t.a + (t.e1 + t.e2) / 3.0)
            .collect();
        let mut order: Vec<usize> = (0..tris.len()).collect();
        let mut nodes = Vec::new();
        if !tris.is_empty() {
            build_node(&tris, &centroids, &mut order, 0, tris.len(), &mut nodes);
        }
        Self { tris, order, nodes }
    }

    pub fn is_empty(&self) -> bool {
        self.tris.is_empty()
    }

    /// Nearest intersection with `t > t_min`. Both triangle sides count.
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3, t_min: f64) -> Option<Hit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best: Option<Hit> = None;
        let mut best_t = f64::INFINITY;
        let mut stack = Vec::with_capacity(64);
        stack.push(0usize);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if !slab(&node.bounds, origin, &inv, best_t) {
                continue;
            }
            if node.count > 0 {
                for &ti in &self.order[node.start..node.start + node.count] {
                    let tri = &self.tris[ti];
                    if let Some(t) = moller_trumbore(tri, origin, dir) {
                        // strict `<` keeps the lowest triangle index on exact ties
                        if t > t_min && (t < best_t || (t == best_t && best.is_some_and(|b| ti < b.triangle))) {
                            best_t = t;
                            best = Some(Hit {
                                t,
                                triangle: ti,
                                label: tri.label,
                                normal: tri.normal,
                            });
                        }
                    }
                }
            } else {
                stack.push(node.right);
                stack.push(node.left);
            }
        }
        best
    }
}

fn build_node(
    tris: &[Tri],
    centroids: &[Vec3],
    order: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for &i in &order[start..end] {
        let t = &tris[i];
        bounds.grow(&t.a);
        bounds.grow(&(t.a + t.e1));
        bounds.grow(&(t.a + t.e2));
        cbounds.grow(&centroids[i]);
    }
    let idx = nodes.len();
    nodes.push(Node {
        bounds,
        start,
        count: end - start,
        left: 0,
        right: 0,
    });
    let ext = cbounds.extent();
    if end - start <= LEAF_SIZE || ext.max() <= 0.0 {
        return idx;
    }
    let axis = ext.imax();
    let mid = (start + end) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b))
    });
    let left = build_node(tris, centroids, order, start, mid, nodes);
    let right = build_node(tris, centroids, order, mid, end, nodes);
    let node = &mut nodes[idx];
    node.count = 0;
    node.left = left;
    node.right = right;
    idx
}

fn slab(b: &Aabb, o: &Vec3, inv: &Vec3, t_max: f64) -> bool {
    let mut t0 = 0.0f64;
    let mut t1 = t_max;
    for k in 0..3 {
        let mut a = (b.min[k] - o[k]) * inv[k];
        let mut c = (b.max[k] - o[k]) * inv[k];
        if a > c {
            std::mem::swap(&mut a, &mut c);
        }
        // NaN (0 * inf) means the ray runs inside the slab plane; keep it.
        if a.is_nan() || c.is_nan() {
            continue;
        }
        t0 = t0.max(a);
        t1 = t1.min(c);
        if t0 > t1 * (1.0 + 4.0 * f64::EPSILON) {
            return false;
        }
    }
    true
}

fn moller_trumbore(tri: &Tri, o: &Vec3, d: &Vec3) -> Option<f64> {
    let p = d.cross(&tri.e2);
    let det = tri.e1.dot(&p);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv = 1.0 / det;
    let s = o - tri.a;
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&tri.e1);
    let v = d.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(tri.e2.dot(&q) * inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RigidPose;
    use crate::scene::{shapes, SceneObject};
    use rand::Rng;

    fn scene_of(meshes: Vec<(crate::scene::TriangleMesh, RigidPose)>) -> Scene {
        Scene::new(
            meshes
                .into_iter()
                .enumerate()
                .map(|(i, (mesh, pose))| SceneObject {
                    name: format!("o{i}"),
                    label: i as u32 + 1,
                    mesh,
                    pose,
                })
                .collect(),
        )
        .unwrap()
    }

    /// Same query answered by testing every triangle.
    fn brute(bvh: &Bvh, o: &Vec3, d: &Vec3) -> Option<(f64, u32)> {
        bvh.tris
            .iter()
            .filter_map(|t| moller_trumbore(t, o, d).filter(|&t| t > 0.0).map(|x| (x, t.label)))
            .min_by(|a, b| a.0.total_cmp(&b.0))
    }

    #[test]
    fn matches_brute_force() {
        let scene = scene_of(vec![
            (shapes::car(), RigidPose::from_translation(Vec3::new(0.5, 0.0, 0.0))),
            (shapes::desk(), RigidPose::from_axis_angle(Vec3::new(0.0, 0.0, 0.4), Vec3::new(-0.6, 0.3, 0.0))),
        ]);
        let bvh = Bvh::from_scene(&scene);
        let mut rng = crate::seed::rng(5);
        let origin = Vec3::new(0.0, -3.0, 0.5);
        for _ in 0..2000 {
            let d = Vec3::new(rng.random_range(-0.6..0.6), 1.0, rng.random_range(-0.4..0.3));
            let fast = bvh.intersect(&origin, &d, 0.0).map(|h| (h.t, h.label));
            assert_eq!(fast, brute(&bvh, &origin, &d));
        }
    }

    #[test]
    fn empty_scene_has_no_hits() {
        let bvh = Bvh::from_scene(&Scene::empty());
        assert!(bvh.intersect(&Vec3::zeros(), &Vec3::x(), 0.0).is_none());
    }

    #[test]
    fn axis_aligned_rays_hit_boxes() {
        let scene = scene_of(vec![(shapes::cuboid(Vec3::repeat(1.0)), RigidPose::from_translation(Vec3::new(0.0, 0.0, 3.0)))]);
        let bvh = Bvh::from_scene(&scene);
        let h = bvh.intersect(&Vec3::zeros(), &Vec3::z(), 0.0).unwrap();
        assert!((h.t - 2.5).abs() < 1e-12);
        assert!((h.normal + Vec3::z()).norm() < 1e-12);
    }
}
