//! Synthetic dataset generation, refiner training and evaluation.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{encode_annotation, write_depth_pgm, write_ppm, Palette};
use crate::metrics::{aggregate, LossType, MetricsReport, ModelVariant, Record};
use crate::pointcloud::{downsample_to_coarse, random_sample, read_ply, write_ply, PlyEncoding, PointCloud, COARSE_POINTS, REFINED_POINTS};
use crate::radar::write_heatmap;
use crate::reconstruct::{train_joint, train_per_object, BaselineRefiner, CoarseDecoderModel, PerObjectModels, Refiner, TrainingLog, TrainingPair};
use crate::scene::ground_truth_cloud;
use crate::seed;

use super::config::{ExperimentConfig, RefinerSpec};
use super::run::{evaluation_truth, joint_projection, object_projections, run_variant, score, segment_views, sense};
use super::scenes::scene_instance;
use super::SegmentationSource;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceEntry {
    pub id: String,
    pub scene_type: String,
    pub seed: u64,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub config_hash: String,
    pub master_seed: u64,
    pub count: usize,
    pub views: usize,
    /// Heatmap/depth pairs the dataset holds: `count · views`.
    pub image_pairs: usize,
    pub instances: Vec<InstanceEntry>,
}

impl DatasetManifest {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &InstanceEntry> {
        self.instances.iter().filter(move |e| e.split == split)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::invalid(format!("{} is not a dataset (no {MANIFEST})", dir.display())),
            _ => e.into(),
        })?;
        serde_json::from_str(&text).map_err(|e| Error::parse(&path, e.line(), e.to_string()))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(self).expect("manifest serializes"))?;
        Ok(())
    }
}

pub fn instance_dir(root: &Path, entry: &InstanceEntry) -> PathBuf {
    root.join("instances").join(&entry.id)
}

/// Instance list, seeds and train/test split without generating anything.
/// Scene types are cycled in order; the split shuffles instance indices.
pub fn plan_dataset(config: &ExperimentConfig, count: usize) -> Result<DatasetManifest> {
    config.validate()?;
    if count == 0 {
        return Err(Error::invalid("dataset count must be at least 1"));
    }
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(&mut seed::rng(seed::derive(config.seed, "split", 0)));
    let n_train = ((count as f64) * config.evaluation.train_fraction).round() as usize;
    let mut split = vec![Split::Test; count];
    for &i in &order[..n_train.min(count)] {
        split[i] = Split::Train;
    }
    let instances = (0..count)
        .map(|i| InstanceEntry {
            id: format!("{i:05}"),
            scene_type: config.scenes[i % config.scenes.len()].clone(),
            seed: seed::derive(config.seed, "instance", i as u64),
            split: split[i],
        })
        .collect();
    Ok(DatasetManifest {
        config_hash: config.hash(),
        master_seed: config.seed,
        count,
        views: config.views.count,
        image_pairs: count * config.views.count,
        instances,
    })
}

fn coarse_seed(instance_seed: u64) -> u64 {
    seed::derive(instance_seed, "coarse", 0)
}

fn generate_instance(config: &ExperimentConfig, entry: &InstanceEntry, dir: &Path) -> Result<()> {
    let scene = scene_instance(&entry.scene_type, entry.seed)?;
    let sensed = sense(&scene, config, entry.seed)?;
    fs::create_dir_all(dir)?;
    let palette = Palette::distinct(scene.object_count());
    for (v, view) in sensed.views.iter().enumerate() {
        if let Some(h) = &view.heatmap {
            let meta = serde_json::json!({ "instance": entry.id, "view": v, "camera": view.camera });
            write_heatmap(h, &meta, &dir.join(format!("view{v}_heatmap.bin")))?;
        }
        write_depth_pgm(&view.depth, &dir.join(format!("view{v}_depth.pgm")))?;
        write_ppm(&encode_annotation(&view.oracle_mask, &palette)?, &dir.join(format!("view{v}_annotation.ppm")))?;
    }
    let cs = coarse_seed(entry.seed);
    let joint = downsample_to_coarse(&joint_projection(&sensed), COARSE_POINTS, cs, &config.coarse)?;
    write_ply(&joint, &dir.join("coarse_joint.ply"), PlyEncoding::BinaryLittleEndian)?;
    let masks = segment_views(&sensed, &SegmentationSource::Oracle)?;
    for (i, pc) in object_projections(&sensed, &masks)?.iter().enumerate() {
        if pc.is_empty() {
            log::warn!("instance {}: object {} not visible, no coarse cloud written", entry.id, i + 1);
            continue;
        }
        let coarse = downsample_to_coarse(pc, COARSE_POINTS, cs, &config.coarse)?;
        write_ply(&coarse, &dir.join(format!("coarse_object{}.ply", i + 1)), PlyEncoding::BinaryLittleEndian)?;
    }
    let truth = ground_truth_cloud(&scene, REFINED_POINTS, seed::derive(entry.seed, "truth", 0));
    write_ply(&truth, &dir.join("truth.ply"), PlyEncoding::BinaryLittleEndian)?;
    Ok(())
}

/// Generates every planned instance under `dir` (instances run in
/// parallel; each writes only its own directory) and then the manifest.
pub fn gen_dataset(config: &ExperimentConfig, count: usize, dir: &Path) -> Result<DatasetManifest> {
    let manifest = plan_dataset(config, count)?;
    manifest
        .instances
        .par_iter()
        .map(|e| generate_instance(config, e, &instance_dir(dir, e)).map_err(|err| err.in_stage("dataset")))
        .collect::<Result<Vec<()>>>()?;
    manifest.save(dir)?;
    Ok(manifest)
}

fn sample_truth(truth: &PointCloud, n: usize, seed: u64) -> Result<PointCloud> {
    if truth.len() > n {
        random_sample(truth, n, seed)
    } else {
        Ok(truth.clone())
    }
}

/// Training pairs from the train split. Model 1 pairs whole-scene coarse
/// clouds with whole-scene truth (label 0); Model 2 yields one pair per
/// visible object, keyed by its label. Truth is subsampled to `output_points`.
pub fn training_pairs(dir: &Path, manifest: &DatasetManifest, variant: ModelVariant, output_points: usize) -> Result<Vec<(u32, TrainingPair)>> {
    let mut pairs = Vec::new();
    for e in manifest.split(Split::Train) {
        let idir = instance_dir(dir, e);
        let truth = read_ply(&idir.join("truth.ply"))?;
        let ts = seed::derive(e.seed, "train-truth", 0);
        match variant {
            ModelVariant::Model1 => {
                let coarse = read_ply(&idir.join("coarse_joint.ply"))?;
                pairs.push((0, TrainingPair { coarse, truth: sample_truth(&truth, output_points, ts)? }));
            }
            ModelVariant::Model2 => {
                let labels: Vec<u32> = {
                    let mut l: Vec<u32> = truth.labels.iter().flatten().copied().collect();
                    l.sort_unstable();
                    l.dedup();
                    l
                };
                for label in labels {
                    let path = idir.join(format!("coarse_object{label}.ply"));
                    if !path.exists() {
                        continue;
                    }
                    let coarse = read_ply(&path)?;
                    let t = sample_truth(&truth.select_label(label), output_points, ts)?;
                    pairs.push((label, TrainingPair { coarse, truth: t }));
                }
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::invalid("the training split is empty"));
    }
    Ok(pairs)
}

pub fn object_checkpoint(dir: &Path, label: u32) -> PathBuf {
    dir.join(format!("object_{label}.bin"))
}

/// Trains on the dataset's train split and writes checkpoints plus a CSV
/// training log next to each. Model 1 writes the file `out`; Model 2
/// writes `object_<label>.bin` files into the directory `out`.
pub fn train_on_dataset(
    config: &ExperimentConfig,
    dir: &Path,
    variant: ModelVariant,
    loss: LossType,
    out: &Path,
) -> Result<BTreeMap<u32, TrainingLog>> {
    let manifest = DatasetManifest::load(dir)?;
    let arch = &config.architecture;
    let tc = crate::reconstruct::TrainingConfig { loss, ..config.training };
    let pairs = training_pairs(dir, &manifest, variant, arch.output_points)?;
    match variant {
        ModelVariant::Model1 => {
            let data: Vec<TrainingPair> = pairs.into_iter().map(|(_, p)| p).collect();
            let (model, log) = train_joint(&data, arch, &tc)?;
            if let Some(parent) = out.parent() {
                fs::create_dir_all(parent)?;
            }
            model.save(out)?;
            fs::write(out.with_extension("csv"), log.to_csv())?;
            Ok(BTreeMap::from([(0, log)]))
        }
        ModelVariant::Model2 => {
            let (models, logs) = train_per_object(&pairs, arch, &tc)?;
            fs::create_dir_all(out)?;
            for (label, m) in &models.models {
                let path = object_checkpoint(out, *label);
                m.save(&path)?;
                fs::write(path.with_extension("csv"), logs[label].to_csv())?;
            }
            Ok(logs)
        }
    }
}

/// The refiner a setting asks for.
pub fn load_refiner(spec: &RefinerSpec, variant: ModelVariant) -> Result<Box<dyn Refiner>> {
    match spec {
        RefinerSpec::Baseline => Ok(Box::new(BaselineRefiner::default())),
        RefinerSpec::Learned { checkpoint } => match variant {
            ModelVariant::Model1 => Ok(Box::new(CoarseDecoderModel::load(checkpoint)?)),
            ModelVariant::Model2 => {
                if !checkpoint.is_dir() {
                    return Err(Error::MissingCheckpoint(checkpoint.clone()));
                }
                let mut models = BTreeMap::new();
                let mut entries: Vec<PathBuf> = fs::read_dir(checkpoint)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
                entries.sort();
                for path in entries {
                    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
                    if let Some(label) = name.strip_prefix("object_").and_then(|s| s.strip_suffix(".bin")).and_then(|s| s.parse().ok()) {
                        models.insert(label, CoarseDecoderModel::load(&path)?);
                    }
                }
                if models.is_empty() {
                    return Err(Error::MissingCheckpoint(checkpoint.join("object_<label>.bin")));
                }
                Ok(Box::new(PerObjectModels { models }))
            }
        },
    }
}

/// Runs every configured setting over the test split and aggregates CD and
/// EMD per (scene type, variant, loss).
pub fn eval_experiment(config: &ExperimentConfig, dir: &Path) -> Result<MetricsReport> {
    config.validate()?;
    config.require_checkpoints()?;
    let manifest = DatasetManifest::load(dir)?;
    let test: Vec<&InstanceEntry> = manifest.split(Split::Test).collect();
    if test.is_empty() {
        return Err(Error::EmptyGroup("the test split is empty".into()));
    }
    let mut records = Vec::new();
    for setting in &config.settings {
        let refiner = load_refiner(&setting.refiner, setting.variant)?;
        let rows = test
            .par_iter()
            .map(|e| {
                let scene = scene_instance(&e.scene_type, e.seed)?;
                let sensed = sense(&scene, config, e.seed)?;
                let out = run_variant(setting.variant, &sensed, config, refiner.as_ref(), None)?;
                let truth = evaluation_truth(&scene, e.seed)?;
                let (cd, emd) = score(&out.cloud, &truth, e.seed, config.evaluation.emd_tolerance).map_err(|err| err.in_stage("evaluation"))?;
                Ok(Record { scene_id: e.id.clone(), scene_type: e.scene_type.clone(), variant: setting.variant, loss: setting.loss, cd, emd })
            })
            .collect::<Result<Vec<_>>>()?;
        records.extend(rows);
    }
    aggregate(&records)
}
