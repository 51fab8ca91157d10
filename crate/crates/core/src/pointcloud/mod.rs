//! Point clouds and the operations that move between image space and point
//! space: back-projection of depth images, merging, and sampling down to the
//! fixed-size clouds the refinement stage consumes.

mod io;

pub use io::{read_ply, read_xyz, write_ply, write_xyz, PlyEncoding};

use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Vec3};
use crate::imaging::DepthImage;
use crate::seed;

/// Size of the coarse cloud fed to the refiner.
pub const COARSE_POINTS: usize = 1024;
/// Size of a refined per-object (or joint) cloud.
pub const REFINED_POINTS: usize = 4096;

/// N×3 coordinates in meters (world frame), optionally labeled per point.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub labels: Option<Vec<u32>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self {
            points,
            labels: None,
        }
    }

    pub fn with_labels(points: Vec<Vec3>, labels: Vec<u32>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::invalid(format!(
                "{} labels for {} points",
                labels.len(),
                points.len()
            )));
        }
        Ok(Self {
            points,
            labels: Some(labels),
        })
    }

    /// Gives every point the same label.
    pub fn labeled(mut self, label: u32) -> Self {
        self.labels = Some(vec![label; self.points.len()]);
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(l) = &self.labels {
            if l.len() != self.points.len() {
                return Err(Error::invalid("label count differs from point count"));
            }
        }
        if let Some(i) = self
            .points
            .iter()
            .position(|p| !p.iter().all(|c| c.is_finite()))
        {
            return Err(Error::invalid(format!("point {i} is not finite")));
        }
        Ok(())
    }

    pub fn centroid(&self) -> Option<Vec3> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self.points.iter().fold(Vec3::zeros(), |a, p| a + p);
        Some(sum / self.points.len() as f64)
    }

    pub fn bounds(&self) -> Aabb {
        let mut b = Aabb::empty();
        for p in &self.points {
            b.grow(p);
        }
        b
    }

    pub fn label(&self, i: usize) -> Option<u32> {
        self.labels.as_ref().map(|l| l[i])
    }

    /// Points carrying `label`, in their original order.
    pub fn select_label(&self, label: u32) -> PointCloud {
        let Some(labels) = &self.labels else {
            return PointCloud::default();
        };
        let points = self
            .points
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == label)
            .map(|(p, _)| *p)
            .collect::<Vec<_>>();
        PointCloud::new(points).labeled(label)
    }

    fn gather(&self, idx: &[usize]) -> PointCloud {
        PointCloud {
            points: idx.iter().map(|&i| self.points[i]).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| idx.iter().map(|&i| l[i]).collect()),
        }
    }

    /// Flat `[x0, y0, z0, x1, ...]` view, handy for numeric code.
    pub fn to_flat(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
    }

    pub fn from_flat(flat: &[f64]) -> Self {
        Self::new(
            flat.chunks_exact(3)
                .map(|c| Vec3::new(c[0], c[1], c[2]))
                .collect(),
        )
    }
}

/// Back-projects every foreground pixel through the pinhole model and maps
/// it to the world frame with the inverse of the camera pose.
pub fn project(depth: &DepthImage) -> PointCloud {
    let cam = &depth.camera;
    let to_world = cam.pose.inverse();
    let mut points = Vec::new();
    for v in 0..depth.height {
        for u in 0..depth.width {
            let d = depth.get(u, v);
            if d > 0.0 {
                let pc = Vec3::new(
                    (u as f64 - cam.cx) * d / cam.focal,
                    (v as f64 - cam.cy) * d / cam.focal,
                    d,
                );
                points.push(to_world.apply(&pc));
            }
        }
    }
    PointCloud::new(points)
}

/// Concatenates clouds. Labels survive only if every input is labeled.
pub fn merge(clouds: &[PointCloud]) -> PointCloud {
    let points = clouds.iter().flat_map(|c| c.points.iter().copied()).collect();
    let labels = clouds
        .iter()
        .map(|c| c.labels.as_ref())
        .collect::<Option<Vec<_>>>()
        .map(|ls| ls.into_iter().flatten().copied().collect());
    PointCloud { points, labels }
}

/// `k` points drawn uniformly without replacement.
pub fn random_sample(pc: &PointCloud, k: usize, seed: u64) -> Result<PointCloud> {
    if k > pc.len() {
        return Err(Error::NotEnoughPoints {
            requested: k,
            available: pc.len(),
        });
    }
    let mut rng = seed::rng(seed);
    let idx = index::sample(&mut rng, pc.len(), k).into_vec();
    Ok(pc.gather(&idx))
}

/// Indices chosen by greedy max-min (farthest point) selection starting from
/// `first`. Ties go to the lowest index.
pub fn farthest_point_indices(points: &[Vec3], k: usize, first: usize) -> Vec<usize> {
    let n = points.len();
    if k == 0 || n == 0 {
        return Vec::new();
    }
    let mut chosen = Vec::with_capacity(k);
    let mut dist = vec![f64::INFINITY; n];
    let mut current = first;
    for _ in 0..k {
        chosen.push(current);
        dist[current] = f64::NEG_INFINITY;
        let c = points[current];
        let mut best = usize::MAX;
        let mut best_d = f64::NEG_INFINITY;
        for (i, d) in dist.iter_mut().enumerate() {
            if *d == f64::NEG_INFINITY {
                continue;
            }
            let nd = (points[i] - c).norm_squared();
            if nd < *d {
                *d = nd;
            }
            if *d > best_d {
                best_d = *d;
                best = i;
            }
        }
        if best == usize::MAX {
            break;
        }
        current = best;
    }
    chosen
}

/// Farthest point sampling; the first pick is drawn uniformly from `seed`.
pub fn farthest_point_sample(pc: &PointCloud, k: usize, seed: u64) -> Result<PointCloud> {
    if k > pc.len() {
        return Err(Error::NotEnoughPoints {
            requested: k,
            available: pc.len(),
        });
    }
    if pc.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let first = seed::rng(seed).random_range(0..pc.len());
    Ok(pc.gather(&farthest_point_indices(&pc.points, k, first)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CoarseMethod {
    #[default]
    Farthest,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoarseOptions {
    pub method: CoarseMethod,
    /// Std of the Gaussian jitter added to duplicated points when padding.
    pub pad_jitter: f64,
}

impl Default for CoarseOptions {
    fn default() -> Self {
        Self {
            method: CoarseMethod::Farthest,
            pad_jitter: 1e-3,
        }
    }
}

/// Brings a cloud to exactly `k` points (normally [`COARSE_POINTS`]).
///
/// Larger clouds are reduced by farthest point sampling (or uniform sampling
/// with [`CoarseMethod::Random`]). Smaller clouds keep every input point and
/// are topped up with points resampled with replacement, each jittered by
/// `pad_jitter`.
pub fn downsample_to_coarse(
    pc: &PointCloud,
    k: usize,
    seed: u64,
    opts: &CoarseOptions,
) -> Result<PointCloud> {
    if pc.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if pc.len() >= k {
        return match opts.method {
            CoarseMethod::Farthest => farthest_point_sample(pc, k, seed),
            CoarseMethod::Random => random_sample(pc, k, seed),
        };
    }
    let mut rng = seed::rng(seed);
    let jitter = Normal::new(0.0, opts.pad_jitter.max(0.0))
        .map_err(|e| Error::invalid(e.to_string()))?;
    let mut out = pc.clone();
    for _ in pc.len()..k {
        let i = rng.random_range(0..pc.len());
        let p = pc.points[i]
            + Vec3::new(
                jitter.sample(&mut rng),
                jitter.sample(&mut rng),
                jitter.sample(&mut rng),
            );
        out.points.push(p);
        if let (Some(dst), Some(src)) = (out.labels.as_mut(), pc.labels.as_ref()) {
            dst.push(src[i]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RigidPose;
    use crate::imaging::CameraModel;
    use proptest::prelude::*;

    fn grid(n: usize) -> PointCloud {
        PointCloud::new(
            (0..n)
                .map(|i| Vec3::new(i as f64, (i * 7 % 13) as f64, (i % 5) as f64 * 0.5))
                .collect(),
        )
    }

    fn sorted(pc: &PointCloud) -> Vec<[u64; 3]> {
        let mut v: Vec<[u64; 3]> = pc
            .points
            .iter()
            .map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()])
            .collect();
        v.sort();
        v
    }

    #[test]
    fn center_pixel_projects_onto_axis() {
        let cam = CameraModel::new(9, 9, 10.0, 4.0, 4.0, RigidPose::identity()).unwrap();
        let mut depth = DepthImage::background(cam);
        depth.set(4, 4, 2.5);
        let pc = project(&depth);
        assert_eq!(pc.points, vec![Vec3::new(0.0, 0.0, 2.5)]);
        assert!(project(&DepthImage::background(depth.camera.clone())).is_empty());
    }

    #[test]
    fn merge_keeps_labels_and_counts() {
        let a = grid(4096).labeled(1);
        let b = grid(4096).labeled(2);
        let m = merge(&[a.clone(), b]);
        assert_eq!(m.len(), 4096 * 2);
        assert_eq!(m.labels.as_ref().unwrap()[4096], 2);
        assert_eq!(merge(&[a.clone()]), a);
    }

    #[test]
    fn random_sample_edge_cases() {
        let pc = grid(1000);
        let all = random_sample(&pc, 1000, 3).unwrap();
        assert_eq!(sorted(&all), sorted(&pc));
        let a = random_sample(&pc, 100, 1).unwrap();
        let b = random_sample(&pc, 100, 2).unwrap();
        assert_ne!(a, b);
        assert_eq!(a, random_sample(&pc, 100, 1).unwrap());
        assert!(matches!(
            random_sample(&pc, 1001, 0),
            Err(Error::NotEnoughPoints { .. })
        ));
    }

    #[test]
    fn model2_output_resamples_to_4096_members() {
        let pc = grid(8192);
        let s = random_sample(&pc, 4096, 9).unwrap();
        assert_eq!(s.len(), 4096);
        let all = sorted(&pc);
        for p in sorted(&s) {
            assert!(all.binary_search(&p).is_ok());
        }
    }

    #[test]
    fn fps_square_corners() {
        let pts = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.5, 0.5, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        let mut idx = farthest_point_indices(&pts, 4, 0);
        idx.sort();
        assert_eq!(idx, vec![0, 1, 3, 4]);
        assert_eq!(farthest_point_indices(&pts, 1, 2), vec![2]);
        let mut all = farthest_point_indices(&pts, 5, 3);
        all.sort();
        assert_eq!(all, vec![0, 1, 2, 3, 4]);
    }

    /// Reference greedy selection written directly from the definition.
    fn brute_greedy(points: &[Vec3], k: usize, first: usize) -> Vec<usize> {
        let mut chosen = vec![first];
        while chosen.len() < k {
            let mut best = (f64::NEG_INFINITY, usize::MAX);
            for i in 0..points.len() {
                if chosen.contains(&i) {
                    continue;
                }
                let d = chosen
                    .iter()
                    .map(|&c| (points[i] - points[c]).norm_squared())
                    .fold(f64::INFINITY, f64::min);
                if d > best.0 {
                    best = (d, i);
                }
            }
            chosen.push(best.1);
        }
        chosen
    }

    proptest! {
        #[test]
        fn fps_matches_brute_force_greedy(
            raw in prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 2..40),
            kfrac in 0.0f64..1.0,
            first_frac in 0.0f64..1.0,
        ) {
            let pts: Vec<Vec3> = raw.into_iter().map(Vec3::from).collect();
            let k = 1 + ((pts.len() - 1) as f64 * kfrac) as usize;
            let first = ((pts.len() - 1) as f64 * first_frac) as usize;
            prop_assert_eq!(farthest_point_indices(&pts, k, first), brute_greedy(&pts, k, first));
        }

        #[test]
        fn merge_is_associative(sizes in prop::collection::vec(0usize..20, 3)) {
            let c: Vec<PointCloud> = sizes.iter().enumerate()
                .map(|(j, &n)| grid(n + j).labeled(j as u32)).collect();
            let left = merge(&[merge(&[c[0].clone(), c[1].clone()]), c[2].clone()]);
            let right = merge(&[c[0].clone(), merge(&[c[1].clone(), c[2].clone()])]);
            prop_assert_eq!(left, right);
        }
    }

    #[test]
    fn coarse_sizes() {
        let opts = CoarseOptions::default();
        assert_eq!(downsample_to_coarse(&grid(5000), 1024, 1, &opts).unwrap().len(), 1024);
        let exact = grid(1024);
        let same = downsample_to_coarse(&exact, 1024, 1, &opts).unwrap();
        assert_eq!(sorted(&same), sorted(&exact));
    }

    #[test]
    fn coarse_padding_stays_on_input() {
        let pc = grid(600).labeled(3);
        let opts = CoarseOptions::default();
        let out = downsample_to_coarse(&pc, 1024, 5, &opts).unwrap();
        assert_eq!(out.len(), 1024);
        assert_eq!(&out.points[..600], &pc.points[..]);
        assert!(out.labels.as_ref().unwrap().iter().all(|&l| l == 3));
        // duplicated points are within 6 jitter standard deviations of an input point
        for p in &out.points[600..] {
            let nearest = pc
                .points
                .iter()
                .map(|q| (p - q).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(nearest < 6.0 * opts.pad_jitter * 3f64.sqrt());
        }
        let no_jitter = CoarseOptions { pad_jitter: 0.0, ..opts };
        let out = downsample_to_coarse(&pc, 1024, 5, &no_jitter).unwrap();
        let members = sorted(&pc);
        for p in sorted(&out) {
            assert!(members.binary_search(&p).is_ok());
        }
    }
}
