//! End-to-end runs of the joint (Model 1) and segment-then-merge (Model 2)
//! pipelines for one scene instance.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::imaging::{
    classical_segment, corrupt_mask, encode_annotation, split_depth, write_depth_pgm, write_mask_pgm, write_ppm, CameraModel,
    DepthGenerator, DepthImage, Palette, RenderDegradeGenerator, SegmentParams, SegmentationMask,
};
use crate::metrics::{evaluate_pair_with, AuctionOptions, ModelVariant};
use crate::pointcloud::{downsample_to_coarse, merge, project, random_sample, write_ply, PlyEncoding, PointCloud, COARSE_POINTS, REFINED_POINTS};
use crate::radar::{fft_heatmap, perturb_aperture, simulate_returns, write_heatmap, HeatmapMeta, HeatmapVolume};
use crate::reconstruct::Refiner;
use crate::scene::{ground_truth_cloud, Scene};
use crate::seed;

use super::config::{ExperimentConfig, SegmentationSource};

/// What one run produced. Paths are only filled when artifacts are written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub scene_id: String,
    pub variant: ModelVariant,
    pub seed: u64,
    pub artifacts: Vec<PathBuf>,
    /// Wall-clock seconds per stage, in execution order.
    pub stage_seconds: Vec<(String, f64)>,
    /// Objects with no pixels left after segmentation.
    pub lost_objects: Vec<u32>,
    pub metrics: Option<(f64, f64)>,
}

impl RunRecord {
    fn new(config: &ExperimentConfig, scene_id: &str, variant: ModelVariant, seed: u64) -> Self {
        Self {
            config_hash: config.hash(),
            scene_id: scene_id.into(),
            variant,
            seed,
            artifacts: Vec::new(),
            stage_seconds: Vec::new(),
            lost_objects: Vec::new(),
            metrics: None,
        }
    }

    fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f().map_err(|e| e.in_stage(stage))?;
        self.stage_seconds.push((stage.into(), t.elapsed().as_secs_f64()));
        Ok(out)
    }
}

/// Per-view sensing outputs shared by both pipelines.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub camera: CameraModel,
    pub heatmap: Option<HeatmapVolume>,
    pub depth: DepthImage,
    /// Ground-truth labels of the pixels that survived degradation.
    pub oracle_mask: SegmentationMask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensedScene {
    pub scene: Scene,
    pub seed: u64,
    pub views: Vec<View>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub cloud: PointCloud,
    pub record: RunRecord,
    /// Model 1: the merged projection. Model 2: one merged projection per
    /// object label (empty for lost objects).
    pub projected: Vec<PointCloud>,
    /// Coarse clouds fed to the refiner, in the same order.
    pub coarse: Vec<PointCloud>,
}

fn empty_heatmap() -> HeatmapVolume {
    HeatmapVolume {
        dims: [0, 0, 0],
        data: Vec::new(),
        meta: HeatmapMeta { range_bin_m: 0.0, azimuth_sin_per_bin: 0.0, elevation_sin_per_bin: 0.0, padding: [1, 1, 1], raw_dims: [0, 0, 0] },
    }
}

pub fn scene_center(scene: &Scene) -> Vec3 {
    let b = scene.extent();
    if b.is_empty() {
        Vec3::zeros()
    } else {
        b.center()
    }
}

/// Heatmaps (when enabled) and stand-in depth images from every viewpoint.
pub fn sense(scene: &Scene, config: &ExperimentConfig, scene_seed: u64) -> Result<SensedScene> {
    scene.require_objects()?;
    let center = scene_center(scene);
    let cameras = config.views.cameras(center, config.camera.size, config.camera.focal)?;
    let generator = RenderDegradeGenerator::new(scene, config.degrade);
    let placeholder = empty_heatmap();
    let views = cameras
        .into_iter()
        .enumerate()
        .map(|(v, camera)| {
            let v = v as u64;
            let heatmap = if config.radar.enabled {
                let aperture = config.radar.aperture().facing(camera.center(), center)?;
                let positions = perturb_aperture(&aperture, &config.vibration.model(seed::derive(scene_seed, "vibration", v)))?;
                let raw = simulate_returns(scene, &aperture, &positions, &config.radar.radar(), &config.radar.scatter)?;
                Some(fft_heatmap(&raw, &config.radar.fft)?)
            } else {
                None
            };
            let depth_seed = seed::derive(scene_seed, "depth", v);
            let depth = generator.generate(heatmap.as_ref().unwrap_or(&placeholder), &camera, depth_seed)?;
            let (_, oracle_mask) = generator.generate_with_mask(&camera, depth_seed)?;
            Ok(View { camera, heatmap, depth, oracle_mask })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SensedScene { scene: scene.clone(), seed: scene_seed, views })
}

/// Label of the object with the smallest surface area (lowest label on ties).
pub fn smallest_object(scene: &Scene) -> Option<u32> {
    scene
        .objects()
        .iter()
        .min_by(|a, b| a.mesh.surface_area().total_cmp(&b.mesh.surface_area()))
        .map(|o| o.label)
}

/// Classical components relabelled with the semantic label they overlap
/// most in the oracle mask; components without overlap become background.
fn align_to_oracle(pred: &SegmentationMask, oracle: &SegmentationMask, m: u32) -> SegmentationMask {
    let k = pred.max_label() as usize;
    let mut overlap = vec![vec![0usize; m as usize + 1]; k + 1];
    for (p, o) in pred.labels.iter().zip(&oracle.labels) {
        if *p > 0 && *o > 0 && *o <= m {
            overlap[*p as usize][*o as usize] += 1;
        }
    }
    let map: Vec<u32> = overlap
        .iter()
        .map(|row| {
            let (best, count) = row.iter().enumerate().skip(1).fold((0, 0), |acc, (l, &c)| if c > acc.1 { (l, c) } else { acc });
            if count > 0 {
                best as u32
            } else {
                0
            }
        })
        .collect();
    SegmentationMask {
        width: pred.width,
        height: pred.height,
        labels: pred.labels.iter().map(|&l| map[l as usize]).collect(),
    }
}

/// Segmentation masks for every view under the given source.
pub fn segment_views(sensed: &SensedScene, source: &SegmentationSource) -> Result<Vec<SegmentationMask>> {
    let m = sensed.scene.object_count() as u32;
    sensed
        .views
        .iter()
        .enumerate()
        .map(|(v, view)| match *source {
            SegmentationSource::Oracle => Ok(view.oracle_mask.clone()),
            SegmentationSource::Classical { discontinuity, min_region } => {
                let pred = classical_segment(&view.depth, &SegmentParams { discontinuity, min_region })?;
                Ok(align_to_oracle(&pred, &view.oracle_mask, m))
            }
            SegmentationSource::Corrupted { p, target } => {
                let target = target.or_else(|| smallest_object(&sensed.scene)).ok_or(Error::LabelAbsent(0))?;
                if target == 0 || target > m {
                    return Err(Error::LabelAbsent(target));
                }
                if view.oracle_mask.count(target) == 0 {
                    Ok(view.oracle_mask.clone())
                } else {
                    corrupt_mask(&view.oracle_mask, p, target, seed::derive(sensed.seed, "corrupt", v as u64))
                }
            }
        })
        .collect()
}

/// Merged projection of every view (Model 1 stage 3 input).
pub fn joint_projection(sensed: &SensedScene) -> PointCloud {
    merge(&sensed.views.iter().map(|v| project(&v.depth)).collect::<Vec<_>>())
}

/// Per-object merged projections after splitting each view by `masks`.
pub fn object_projections(sensed: &SensedScene, masks: &[SegmentationMask]) -> Result<Vec<PointCloud>> {
    let m = sensed.scene.object_count() as u32;
    let mut per_object: Vec<Vec<PointCloud>> = vec![Vec::new(); m as usize];
    for (view, mask) in sensed.views.iter().zip(masks) {
        for (i, img) in split_depth(&view.depth, mask, m)?.iter().enumerate() {
            per_object[i].push(project(img).labeled(i as u32 + 1));
        }
    }
    Ok(per_object.iter().map(|c| merge(c)).collect())
}

fn coarse_seed(scene_seed: u64) -> u64 {
    seed::derive(scene_seed, "coarse", 0)
}

fn refine_seed(scene_seed: u64) -> u64 {
    seed::derive(scene_seed, "refine", 0)
}

/// Writes per-view artifacts into `dir`.
fn write_views(sensed: &SensedScene, masks: Option<&[SegmentationMask]>, dir: &Path, record: &mut RunRecord) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let palette = Palette::distinct(sensed.scene.object_count());
    for (v, view) in sensed.views.iter().enumerate() {
        if let Some(h) = &view.heatmap {
            let p = dir.join(format!("view{v}_heatmap.bin"));
            write_heatmap(h, &serde_json::json!({ "view": v, "camera": view.camera }), &p)?;
            record.artifacts.push(p);
        }
        let p = dir.join(format!("view{v}_depth.pgm"));
        write_depth_pgm(&view.depth, &p)?;
        record.artifacts.push(p);
        let p = dir.join(format!("view{v}_annotation.ppm"));
        write_ppm(&encode_annotation(&view.oracle_mask, &palette)?, &p)?;
        record.artifacts.push(p);
        if let Some(masks) = masks {
            let p = dir.join(format!("view{v}_mask.pgm"));
            write_mask_pgm(&masks[v], &p)?;
            record.artifacts.push(p);
        }
    }
    Ok(())
}

fn write_cloud(pc: &PointCloud, path: PathBuf, record: &mut RunRecord) -> Result<()> {
    write_ply(pc, &path, PlyEncoding::BinaryLittleEndian)?;
    record.artifacts.push(path);
    Ok(())
}

/// Joint reconstruction: all views projected and merged, reduced to one
/// coarse cloud, refined once.
pub fn run_model1(sensed: &SensedScene, config: &ExperimentConfig, refiner: &dyn Refiner, out: Option<&Path>) -> Result<PipelineOutput> {
    let mut record = RunRecord::new(config, "", ModelVariant::Model1, sensed.seed);
    let projected = record.time("projection", || Ok(joint_projection(sensed)))?;
    let coarse = record.time("coarse", || downsample_to_coarse(&projected, COARSE_POINTS, coarse_seed(sensed.seed), &config.coarse))?;
    let cloud = record.time("refine", || refiner.refine(&coarse, None, refine_seed(sensed.seed)))?;
    if let Some(dir) = out {
        write_views(sensed, None, dir, &mut record)?;
        write_cloud(&coarse, dir.join("coarse.ply"), &mut record)?;
        write_cloud(&cloud, dir.join("refined.ply"), &mut record)?;
    }
    Ok(PipelineOutput { cloud, record, projected: vec![projected], coarse: vec![coarse] })
}

/// Segment-then-merge: each object is projected, reduced and refined on
/// its own; the refined clouds are merged with their labels.
pub fn run_model2(sensed: &SensedScene, config: &ExperimentConfig, refiner: &dyn Refiner, out: Option<&Path>) -> Result<PipelineOutput> {
    let mut record = RunRecord::new(config, "", ModelVariant::Model2, sensed.seed);
    let masks = record.time("segmentation", || segment_views(sensed, &config.segmentation))?;
    let projected = record.time("projection", || object_projections(sensed, &masks))?;
    let mut coarse = Vec::new();
    let mut refined = Vec::new();
    for (i, pc) in projected.iter().enumerate() {
        let label = i as u32 + 1;
        if pc.is_empty() {
            log::warn!("object {label} lost after segmentation");
            record.lost_objects.push(label);
            coarse.push(PointCloud::default());
            continue;
        }
        let c = record.time("coarse", || downsample_to_coarse(pc, COARSE_POINTS, coarse_seed(sensed.seed), &config.coarse))?;
        let r = record.time("refine", || refiner.refine(&c, Some(label), refine_seed(sensed.seed)))?;
        coarse.push(c);
        refined.push(r.labeled(label));
    }
    let cloud = merge(&refined);
    if let Some(dir) = out {
        write_views(sensed, Some(&masks), dir, &mut record)?;
        for (i, c) in coarse.iter().enumerate() {
            if !c.is_empty() {
                write_cloud(c, dir.join(format!("coarse_object{}.ply", i + 1)), &mut record)?;
            }
        }
        write_cloud(&cloud, dir.join("refined.ply"), &mut record)?;
    }
    Ok(PipelineOutput { cloud, record, projected, coarse })
}

pub fn run_variant(
    variant: ModelVariant,
    sensed: &SensedScene,
    config: &ExperimentConfig,
    refiner: &dyn Refiner,
    out: Option<&Path>,
) -> Result<PipelineOutput> {
    match variant {
        ModelVariant::Model1 => run_model1(sensed, config, refiner, out),
        ModelVariant::Model2 => run_model2(sensed, config, refiner, out),
    }
}

/// Ground truth used for scoring: `REFINED_POINTS` per object, then one
/// uniform subsample of `REFINED_POINTS` over the whole scene.
pub fn evaluation_truth(scene: &Scene, scene_seed: u64) -> Result<PointCloud> {
    let full = ground_truth_cloud(scene, REFINED_POINTS, seed::derive(scene_seed, "truth", 0));
    random_sample(&full, REFINED_POINTS, seed::derive(scene_seed, "truth-sample", 0))
}

/// CD and EMD of a run against `truth`, resampling the output down to the
/// truth size (or the truth down to the output size if the output is smaller).
pub fn score(output: &PointCloud, truth: &PointCloud, scene_seed: u64, emd_tolerance: f64) -> Result<(f64, f64)> {
    if output.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let opts = AuctionOptions { tolerance: emd_tolerance, ..AuctionOptions::default() };
    let eval_seed = seed::derive(scene_seed, "eval", 0);
    if output.len() < truth.len() {
        let t = random_sample(truth, output.len(), eval_seed)?;
        return evaluate_pair_with(output, &t, eval_seed, &opts);
    }
    evaluate_pair_with(output, truth, eval_seed, &opts)
}

/// Fraction of points farther than `tolerance` from the mesh surface.
pub fn off_surface_fraction(cloud: &PointCloud, mesh: &crate::scene::TriangleMesh, tolerance: f64) -> f64 {
    if cloud.is_empty() {
        return 1.0;
    }
    let off = cloud.points.iter().filter(|p| mesh.distance_to(p) > tolerance).count();
    off as f64 / cloud.len() as f64
}
