//! Image-space stages: ray-cast depth rendering, degradation that mimics an
//! imperfect learned depth generator, per-pixel segmentation, annotation
//! images, label corruption and per-object depth splitting.

mod annotation;
mod netpbm;
mod segment;

pub use annotation::{decode_annotation, encode_annotation, AnnotationImage, Palette};
pub use netpbm::{read_depth_pgm, read_ppm, write_depth_pgm, write_mask_pgm, write_ppm, write_gray_pgm};
pub use segment::{classical_segment, corrupt_mask, split_depth, SegmentParams};

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{RigidPose, Vec3};
use crate::radar::HeatmapVolume;
use crate::raycast::Bvh;
use crate::scene::Scene;
use crate::seed;

/// Pinhole camera. `pose` maps world coordinates into the camera frame
/// (x right, y down, z along the optical axis). Pixel `(u, v)` looks along
/// `((u − cx)/f, (v − cy)/f, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub width: usize,
    pub height: usize,
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
    pub pose: RigidPose,
}

impl CameraModel {
    pub fn new(width: usize, height: usize, focal: f64, cx: f64, cy: f64, pose: RigidPose) -> Result<Self> {
        let cam = Self {
            width,
            height,
            focal,
            cx,
            cy,
            pose,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// 128×128, f = 128 px, principal point at the image center.
    pub fn default_intrinsics(pose: RigidPose) -> Self {
        Self {
            width: 128,
            height: 128,
            focal: 128.0,
            cx: 64.0,
            cy: 64.0,
            pose,
        }
    }

    /// Camera at `eye` looking at `target` with world `up` towards image top.
    pub fn looking_at(
        eye: Vec3,
        target: Vec3,
        up: Vec3,
        width: usize,
        height: usize,
        focal: f64,
    ) -> Result<Self> {
        let to_world = RigidPose::looking_at(eye, target, up)?;
        Self::new(width, height, focal, width as f64 / 2.0, height as f64 / 2.0, to_world.inverse())
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("camera image must be non-empty"));
        }
        if !(self.focal > 0.0) {
            return Err(Error::invalid("focal length must be positive"));
        }
        if !(0.0..self.width as f64).contains(&self.cx) || !(0.0..self.height as f64).contains(&self.cy) {
            return Err(Error::invalid("principal point outside the image"));
        }
        Ok(())
    }

    pub fn center(&self) -> Vec3 {
        self.pose.inverse().translation
    }

    /// World-space ray for pixel `(u, v)`; its parameter equals camera-frame depth.
    pub fn ray(&self, u: usize, v: usize) -> (Vec3, Vec3) {
        let to_world = self.pose.inverse();
        let d = Vec3::new((u as f64 - self.cx) / self.focal, (v as f64 - self.cy) / self.focal, 1.0);
        (to_world.translation, to_world.rotate(&d))
    }

    /// Size of one pixel's footprint at depth `d`, times √2 (pixel diagonal).
    pub fn footprint(&self, depth: f64) -> f64 {
        depth / self.focal * std::f64::consts::SQRT_2
    }
}

/// Per-pixel depth (camera-frame z, meters). Zero is background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
    pub camera: CameraModel,
}

impl DepthImage {
    pub fn background(camera: CameraModel) -> Self {
        Self {
            width: camera.width,
            height: camera.height,
            data: vec![0.0; camera.width * camera.height],
            camera,
        }
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.data[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize, d: f64) {
        self.data[v * self.width + u] = d;
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&d| d > 0.0).count()
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.len() != self.width * self.height {
            return Err(Error::invalid("depth buffer size does not match dimensions"));
        }
        if self.data.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::invalid("depth values must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Per-pixel object label, 0 = background.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentationMask {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
}

impl SegmentationMask {
    pub fn background(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            labels: vec![0; width * height],
        }
    }

    pub fn count(&self, label: u32) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn max_label(&self) -> u32 {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    /// Pixels whose label is nonzero.
    pub fn foreground_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l != 0).count()
    }
}

/// Nearest-hit depth and owning-object label for every pixel.
pub fn render_depth(scene: &Scene, camera: &CameraModel) -> Result<(DepthImage, SegmentationMask)> {
    camera.validate()?;
    let bvh = Bvh::from_scene(scene);
    Ok(render_with(&bvh, camera))
}

pub(crate) fn render_with(bvh: &Bvh, camera: &CameraModel) -> (DepthImage, SegmentationMask) {
    let mut depth = DepthImage::background(camera.clone());
    let mut mask = SegmentationMask::background(camera.width, camera.height);
    if bvh.is_empty() {
        return (depth, mask);
    }
    for v in 0..camera.height {
        for u in 0..camera.width {
            let (o, d) = camera.ray(u, v);
            if let Some(hit) = bvh.intersect(&o, &d, 1e-9) {
                let i = v * camera.width + u;
                depth.data[i] = hit.t;
                mask.labels[i] = hit.label;
            }
        }
    }
    (depth, mask)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DegradeParams {
    /// Std of additive depth noise on foreground pixels (meters).
    pub noise_sigma: f64,
    /// Probability that a foreground pixel drops to background.
    pub dropout: f64,
    /// Foreground boundary erosion radius (pixels, 4-neighbourhood steps).
    pub erosion: usize,
}

impl Default for DegradeParams {
    fn default() -> Self {
        Self {
            noise_sigma: 0.005,
            dropout: 0.05,
            erosion: 0,
        }
    }
}

impl DegradeParams {
    pub const IDENTITY: Self = Self {
        noise_sigma: 0.0,
        dropout: 0.0,
        erosion: 0,
    };

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.dropout) {
            return Err(Error::invalid("dropout probability must lie in [0, 1]"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::invalid("noise sigma must be non-negative"));
        }
        Ok(())
    }
}

/// Smallest depth a noisy foreground pixel may take; keeps it foreground.
const MIN_FOREGROUND_DEPTH: f64 = 1e-6;

/// Erodes the foreground boundary by `erosion` pixels, then drops pixels
/// with probability `dropout`, then adds Gaussian noise to the survivors.
///
/// Two draws are taken for every pixel that is foreground after erosion, in
/// raster order, so the random stream does not depend on earlier outcomes.
pub fn degrade(depth: &DepthImage, params: &DegradeParams, seed: u64) -> Result<DepthImage> {
    params.validate()?;
    let mut out = depth.clone();
    let (w, h) = (depth.width, depth.height);
    for _ in 0..params.erosion {
        let prev = out.data.clone();
        for v in 0..h {
            for u in 0..w {
                let i = v * w + u;
                if prev[i] <= 0.0 {
                    continue;
                }
                let edge = u == 0
                    || v == 0
                    || u + 1 == w
                    || v + 1 == h
                    || prev[i - 1] <= 0.0
                    || prev[i + 1] <= 0.0
                    || prev[i - w] <= 0.0
                    || prev[i + w] <= 0.0;
                if edge {
                    out.data[i] = 0.0;
                }
            }
        }
    }
    if params.dropout == 0.0 && params.noise_sigma == 0.0 {
        return Ok(out);
    }
    let mut rng = seed::rng(seed);
    for d in out.data.iter_mut().filter(|d| **d > 0.0) {
        let drop: f64 = rng.random();
        let n: f64 = StandardNormal.sample(&mut rng);
        if drop < params.dropout {
            *d = 0.0;
        } else {
            *d = (*d + params.noise_sigma * n).max(MIN_FOREGROUND_DEPTH);
        }
    }
    Ok(out)
}

/// Behavioural contract of the stage-1 generator: heatmap in, depth image
/// for the heatmap's viewpoint out.
pub trait DepthGenerator: Send + Sync {
    fn generate(&self, heatmap: &HeatmapVolume, camera: &CameraModel, seed: u64) -> Result<DepthImage>;
}

/// Stand-in generator: renders the true scene from the viewpoint and
/// degrades the result. The heatmap is only checked for consistency.
pub struct RenderDegradeGenerator {
    bvh: Bvh,
    pub params: DegradeParams,
}

impl RenderDegradeGenerator {
    pub fn new(scene: &Scene, params: DegradeParams) -> Self {
        Self {
            bvh: Bvh::from_scene(scene),
            params,
        }
    }

    /// Depth plus the oracle mask restricted to surviving foreground pixels.
    pub fn generate_with_mask(&self, camera: &CameraModel, seed: u64) -> Result<(DepthImage, SegmentationMask)> {
        camera.validate()?;
        let (clean, mut mask) = render_with(&self.bvh, camera);
        let depth = degrade(&clean, &self.params, seed)?;
        for (l, d) in mask.labels.iter_mut().zip(&depth.data) {
            if *d <= 0.0 {
                *l = 0;
            }
        }
        Ok((depth, mask))
    }
}

impl DepthGenerator for RenderDegradeGenerator {
    fn generate(&self, heatmap: &HeatmapVolume, camera: &CameraModel, seed: u64) -> Result<DepthImage> {
        if heatmap.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("heatmap contains non-finite intensities"));
        }
        Ok(self.generate_with_mask(camera, seed)?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{shapes, SceneObject};

    fn single(mesh: crate::scene::TriangleMesh, pose: RigidPose) -> Scene {
        Scene::new(vec![SceneObject {
            name: "o".into(),
            label: 1,
            mesh,
            pose,
        }])
        .unwrap()
    }

    fn axis_camera() -> CameraModel {
        CameraModel::default_intrinsics(RigidPose::identity())
    }

    #[test]
    fn empty_scene_renders_background() {
        let (d, m) = render_depth(&Scene::empty(), &axis_camera()).unwrap();
        assert!(d.data.iter().all(|&x| x == 0.0));
        assert!(m.labels.iter().all(|&x| x == 0));
    }

    #[test]
    fn plane_at_three_meters() {
        let wall = shapes::cuboid(Vec3::new(10.0, 10.0, 0.01));
        let scene = single(wall, RigidPose::from_translation(Vec3::new(0.0, 0.0, 3.005)));
        let (d, m) = render_depth(&scene, &axis_camera()).unwrap();
        assert!((d.get(64, 64) - 3.0).abs() < 1e-12);
        assert!(d.data.iter().all(|&x| (x - 3.0).abs() < 1e-9));
        assert_eq!(m.count(1), 128 * 128);
    }

    #[test]
    fn sphere_minimum_depth() {
        // Pole of the inscribed sphere faces the camera (−z in the camera frame).
        for dist in [2.0, 3.5, 5.0] {
            let scene = single(shapes::uv_sphere(1.0, 24, 32), RigidPose::from_translation(Vec3::new(0.0, 0.0, dist)));
            let (d, _) = render_depth(&scene, &axis_camera()).unwrap();
            let min = d.data.iter().copied().filter(|&x| x > 0.0).fold(f64::INFINITY, f64::min);
            // analytic: nearest point of a unit sphere at distance `dist` on the axis
            let analytic = dist - 1.0;
            assert!((min - analytic).abs() < 1e-6, "{min} vs {analytic}");
        }
    }

    #[test]
    fn degrade_identity_and_full_dropout() {
        let scene = single(shapes::cuboid(Vec3::repeat(1.0)), RigidPose::from_translation(Vec3::new(0.0, 0.0, 3.0)));
        let (d, _) = render_depth(&scene, &axis_camera()).unwrap();
        assert_eq!(degrade(&d, &DegradeParams::IDENTITY, 1).unwrap(), d);
        let all = DegradeParams { noise_sigma: 0.01, dropout: 1.0, erosion: 0 };
        assert_eq!(degrade(&d, &all, 1).unwrap().foreground_count(), 0);
        let noisy = DegradeParams { noise_sigma: 0.01, dropout: 0.2, erosion: 1 };
        assert_eq!(degrade(&d, &noisy, 9).unwrap(), degrade(&d, &noisy, 9).unwrap());
        assert!(degrade(&d, &DegradeParams { dropout: 1.5, ..noisy }, 0).is_err());
    }

    #[test]
    fn dropout_count_within_binomial_interval() {
        let cam = CameraModel::new(100, 100, 100.0, 50.0, 50.0, RigidPose::identity()).unwrap();
        let mut d = DepthImage::background(cam);
        d.data.fill(2.0);
        let p = DegradeParams { noise_sigma: 0.0, dropout: 0.3, erosion: 0 };
        let n = 10_000.0;
        // 99% normal-approximation interval of Binomial(10⁴, 0.7)
        let half = 2.5758 * (n * 0.7 * 0.3f64).sqrt();
        for seed in 0..5 {
            let kept = degrade(&d, &p, seed).unwrap().foreground_count() as f64;
            assert!((kept - 7000.0).abs() <= half, "kept {kept}");
        }
    }

    #[test]
    fn erosion_peels_boundary() {
        let cam = CameraModel::new(10, 10, 10.0, 5.0, 5.0, RigidPose::identity()).unwrap();
        let mut d = DepthImage::background(cam);
        for v in 2..8 {
            for u in 2..8 {
                d.set(u, v, 1.0);
            }
        }
        let p = DegradeParams { noise_sigma: 0.0, dropout: 0.0, erosion: 1 };
        assert_eq!(degrade(&d, &p, 0).unwrap().foreground_count(), 16);
        let p = DegradeParams { erosion: 3, ..p };
        assert_eq!(degrade(&d, &p, 0).unwrap().foreground_count(), 0);
    }
}
