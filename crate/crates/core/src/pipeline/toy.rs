//! Refiner studies on the primitive toy suite.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{aggregate, chamfer, emd_approx, emd_exact, AuctionOptions, LossType, MetricsReport, ModelVariant, Record, EXACT_CAP};
use crate::reconstruct::{baseline_refine_to, train, Architecture, CoarseDecoderModel, TrainingConfig, TrainingLog, TrainingPair};
use crate::seed;

use super::scenes::{toy_suite, ToyExample, ToySuiteConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyStudyConfig {
    pub suite: ToySuiteConfig,
    pub architecture: Architecture,
    pub training: TrainingConfig,
    pub train: usize,
    pub test: usize,
}

impl Default for ToyStudyConfig {
    /// 48 training and 16 test scenes; 256 coarse points refined to 1024.
    fn default() -> Self {
        Self {
            suite: ToySuiteConfig { coarse_points: 256, truth_points: 1024, ..ToySuiteConfig::default() },
            architecture: Architecture { encoder: vec![3, 32, 64, 128], decoder_hidden: vec![1024], output_points: 1024, normalize: true },
            training: TrainingConfig { batch_size: 1, augment_yaw: true, ..TrainingConfig::default() },
            train: 48,
            test: 16,
        }
    }
}

impl ToyStudyConfig {
    /// Smaller clouds so that EMD training stays cheap.
    pub fn loss_comparison() -> Self {
        Self {
            suite: ToySuiteConfig { coarse_points: 256, truth_points: 256, ..ToySuiteConfig::default() },
            architecture: Architecture { encoder: vec![3, 32, 64, 128], decoder_hidden: vec![256], output_points: 256, normalize: true },
            ..Self::default()
        }
    }

    fn split(&self, master: u64) -> Result<(Vec<TrainingPair>, Vec<ToyExample>)> {
        if self.train == 0 || self.test == 0 {
            return Err(Error::invalid("toy study needs at least one training and one test scene"));
        }
        let mut all = toy_suite(self.train + self.test, master, &self.suite)?;
        let test = all.split_off(self.train);
        let train = all.into_iter().map(|e| TrainingPair { coarse: e.coarse, truth: e.truth }).collect();
        Ok((train, test))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinerComparison {
    pub learned_cd: f64,
    pub baseline_cd: f64,
    pub log: TrainingLog,
}

impl RefinerComparison {
    pub fn ratio(&self) -> f64 {
        self.learned_cd / self.baseline_cd
    }
}

/// Trains on the first `train` toy scenes and compares mean test CD of the
/// learned refiner against `baseline_refine` at the same output size.
pub fn compare_refiners(cfg: &ToyStudyConfig, master: u64) -> Result<RefinerComparison> {
    let (train_set, test) = cfg.split(master)?;
    let training = TrainingConfig { seed: seed::derive(master, "toy-train", 0), ..cfg.training };
    let (model, log) = train(&train_set, &cfg.architecture, &training)?;
    let (mut learned, mut baseline) = (0.0, 0.0);
    for (i, e) in test.iter().enumerate() {
        learned += chamfer(&model.forward(&e.coarse)?, &e.truth)?;
        let b = baseline_refine_to(&e.coarse, cfg.architecture.output_points, seed::derive(master, "toy-baseline", i as u64))?;
        baseline += chamfer(&b, &e.truth)?;
    }
    let n = test.len() as f64;
    Ok(RefinerComparison { learned_cd: learned / n, baseline_cd: baseline / n, log })
}

fn emd(a: &[crate::geometry::Vec3], b: &[crate::geometry::Vec3]) -> Result<f64> {
    if a.len() <= EXACT_CAP {
        Ok(emd_exact(a, b)?.0)
    } else {
        emd_approx(a, b, &AuctionOptions::default())
    }
}

/// Trains one model per loss on the same toy split and scores each on the
/// test scenes. Records use scene type `toy` and variant Model 1.
pub fn compare_losses(cfg: &ToyStudyConfig, master: u64) -> Result<(MetricsReport, Vec<CoarseDecoderModel>)> {
    if cfg.suite.truth_points != cfg.architecture.output_points {
        return Err(Error::SizeMismatch { left: cfg.architecture.output_points, right: cfg.suite.truth_points });
    }
    let (train_set, test) = cfg.split(master)?;
    let mut records = Vec::new();
    let mut models = Vec::new();
    for loss in [LossType::Cd, LossType::Emd] {
        let training = TrainingConfig { seed: seed::derive(master, "toy-train", 0), loss, ..cfg.training };
        let (model, _) = train(&train_set, &cfg.architecture, &training)?;
        for (i, e) in test.iter().enumerate() {
            let out = model.forward(&e.coarse)?;
            records.push(Record {
                scene_id: format!("toy{i:02}"),
                scene_type: "toy".into(),
                variant: ModelVariant::Model1,
                loss,
                cd: chamfer(&out, &e.truth)?,
                emd: emd(&out.points, &e.truth.points)?,
            });
        }
        models.push(model);
    }
    Ok((aggregate(&records)?, models))
}
