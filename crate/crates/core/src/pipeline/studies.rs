//! Focused studies: normal vs vibrating SAR focus, and the effect of mask
//! corruption on one object's coarse cloud.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::write_gray_pgm;
use crate::metrics::{chamfer, mean_std};
use crate::pointcloud::{downsample_to_coarse, COARSE_POINTS};
use crate::radar::{fft_heatmap, max_projection, peak_to_background, perturb_aperture, simulate_returns, HeatmapVolume, ProjectionAxis, VibrationModel};
use crate::scene::sample_surface;
use crate::seed;

use super::config::{ExperimentConfig, SegmentationSource};
use super::run::{object_projections, off_surface_fraction, scene_center, segment_views, sense, smallest_object};
use super::scenes::{reference_scene, scene_instance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SarComparison {
    pub scene_type: String,
    /// Peak-to-background energy ratio of the ideal-aperture heatmap.
    pub normal_ratio: f64,
    /// One ratio per vibration seed.
    pub vibrating_ratios: Vec<f64>,
    pub vibrating_mean: f64,
    pub exports: Vec<PathBuf>,
}

fn export_projections(h: &HeatmapVolume, prefix: &str, dir: &Path, exports: &mut Vec<PathBuf>) -> Result<()> {
    for (axis, name) in [(ProjectionAxis::Elevation, "range_azimuth"), (ProjectionAxis::Range, "azimuth_elevation")] {
        let (w, ht, values) = max_projection(h, axis);
        let path = dir.join(format!("{prefix}_{name}.pgm"));
        write_gray_pgm(w, ht, &values, &path)?;
        exports.push(path);
    }
    Ok(())
}

/// Heatmaps of the first configured scene type's reference layout, seen from
/// the first viewpoint with an ideal aperture and with `seeds` independent
/// vibration draws. Projections of the ideal and first vibrating heatmap are
/// written to `out` when given.
pub fn compare_sar_modes(config: &ExperimentConfig, seeds: usize, out: Option<&Path>) -> Result<SarComparison> {
    config.validate()?;
    if seeds == 0 {
        return Err(Error::invalid("at least one vibration seed is needed"));
    }
    let scene_type = config.scenes[0].clone();
    let scene = reference_scene(&scene_type)?;
    scene.require_objects()?;
    let center = scene_center(&scene);
    let eye = config.views.eyes(center)[0];
    let aperture = config.radar.aperture().facing(eye, center)?;
    let radar = config.radar.radar();
    let image = |positions: &[crate::geometry::Vec3]| -> Result<HeatmapVolume> {
        let raw = simulate_returns(&scene, &aperture, positions, &radar, &config.radar.scatter)?;
        fft_heatmap(&raw, &config.radar.fft)
    };
    let normal = image(&perturb_aperture(&aperture, &VibrationModel::none())?).map_err(|e| e.in_stage("radar"))?;
    let mut exports = Vec::new();
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        export_projections(&normal, "normal", dir, &mut exports)?;
    }
    let mut vibrating_ratios = Vec::with_capacity(seeds);
    for s in 0..seeds {
        let model = config.vibration.model(seed::derive(config.seed, "sar-vibration", s as u64));
        let h = image(&perturb_aperture(&aperture, &model)?).map_err(|e| e.in_stage("radar"))?;
        if let (0, Some(dir)) = (s, out) {
            export_projections(&h, "vibrating", dir, &mut exports)?;
        }
        vibrating_ratios.push(peak_to_background(&h));
    }
    let (vibrating_mean, _) = mean_std(&vibrating_ratios);
    Ok(SarComparison { scene_type, normal_ratio: peak_to_background(&normal), vibrating_ratios, vibrating_mean, exports })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionRow {
    pub p: f64,
    /// Off-surface fraction of the target's coarse cloud per seed; 1 when lost.
    pub off_surface: Vec<f64>,
    pub mean_off_surface: f64,
    /// Chamfer distance of the target's coarse cloud to its true surface,
    /// averaged over the seeds where it was not lost.
    pub mean_cd_to_truth: Option<f64>,
    /// Seeds on which the target had no pixels left.
    pub lost: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionStudy {
    pub scene_type: String,
    pub target: u32,
    pub tolerance: f64,
    pub rows: Vec<CorruptionRow>,
}

impl CorruptionStudy {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("p,mean_off_surface,mean_cd_to_truth,lost,seeds\n");
        for r in &self.rows {
            let cd = r.mean_cd_to_truth.map(|v| format!("{v:?}")).unwrap_or_default();
            s.push_str(&format!("{},{:?},{cd},{},{}\n", r.p, r.mean_off_surface, r.lost, r.off_surface.len()));
        }
        s
    }

    pub fn is_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].mean_off_surface >= w[0].mean_off_surface)
    }
}

/// Sweeps the corruption probability over `ps` on `seeds` instances of the
/// first configured scene type. The target is the configured one, or the
/// smallest object. A point is off-surface when it lies farther than two
/// pixel footprints (at the ring distance) from the target's true surface.
pub fn corruption_study(config: &ExperimentConfig, ps: &[f64], seeds: usize) -> Result<CorruptionStudy> {
    config.validate()?;
    if seeds == 0 || ps.is_empty() {
        return Err(Error::invalid("corruption study needs at least one seed and one probability"));
    }
    if let Some(p) = ps.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::invalid(format!("corruption probability {p} outside [0, 1]")));
    }
    let scene_type = config.scenes[0].clone();
    let configured = match config.segmentation {
        SegmentationSource::Corrupted { target, .. } => target,
        _ => None,
    };
    let mut per_p = vec![Vec::with_capacity(seeds); ps.len()];
    let mut lost = vec![0; ps.len()];
    let mut cds: Vec<Vec<f64>> = vec![Vec::new(); ps.len()];
    let (mut target, mut tolerance) = (0, 0.0);
    for s in 0..seeds {
        let scene_seed = seed::derive(config.seed, "corruption", s as u64);
        let scene = scene_instance(&scene_type, scene_seed)?;
        let sensed = sense(&scene, config, scene_seed)?;
        target = configured.or_else(|| smallest_object(&scene)).ok_or(Error::LabelAbsent(0))?;
        let object = scene.object(target).ok_or(Error::LabelAbsent(target))?;
        let mesh = object.world_mesh();
        let truth = sample_surface(&object.mesh, &object.pose, COARSE_POINTS, seed::derive(scene_seed, "truth", u64::from(target)));
        let camera = &sensed.views[0].camera;
        tolerance = 2.0 * camera.footprint((camera.center() - scene_center(&scene)).norm());
        for (k, &p) in ps.iter().enumerate() {
            let masks = segment_views(&sensed, &SegmentationSource::Corrupted { p, target: Some(target) })?;
            let projected = object_projections(&sensed, &masks)?;
            let cloud = &projected[target as usize - 1];
            if cloud.is_empty() {
                lost[k] += 1;
                per_p[k].push(1.0);
                continue;
            }
            let coarse = downsample_to_coarse(cloud, COARSE_POINTS, seed::derive(scene_seed, "coarse", 0), &config.coarse)?;
            per_p[k].push(off_surface_fraction(&coarse, &mesh, tolerance));
            cds[k].push(chamfer(&coarse, &truth)?);
        }
    }
    let rows = ps
        .iter()
        .zip(per_p)
        .zip(lost)
        .zip(cds)
        .map(|(((&p, off_surface), lost), cd)| CorruptionRow {
            p,
            mean_off_surface: mean_std(&off_surface).0,
            mean_cd_to_truth: (!cd.is_empty()).then(|| mean_std(&cd).0),
            off_surface,
            lost,
        })
        .collect();
    Ok(CorruptionStudy { scene_type, target, tolerance, rows })
}
