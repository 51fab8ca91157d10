use std::collections::BTreeMap;

use nalgebra::Rotation3;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::accumulate;
use super::model::{Architecture, CoarseDecoderModel};
use super::PerObjectModels;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::metrics::{AuctionOptions, AuctionState, LossType};
use crate::pointcloud::PointCloud;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Not stated by the reference setup; 8 is an assumption.
    pub batch_size: usize,
    pub loss: LossType,
    pub seed: u64,
    /// Relative gap for the auction solver used by the EMD loss.
    pub emd_tolerance: f64,
    /// Rotate each training pair about the vertical axis through the coarse
    /// cloud's center by a fresh random angle every epoch.
    pub augment_yaw: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 2e-4,
            batch_size: 8,
            loss: LossType::Cd,
            seed: 0,
            emd_tolerance: 0.01,
            augment_yaw: false,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch size must be at least 1"));
        }
        if !(self.learning_rate > 0.0) || !(self.emd_tolerance >= 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        Ok(())
    }

    /// Constant for the first half of training, then linear decay to 0 at
    /// the last epoch. Epochs are 1-based.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        let total = self.epochs as f64;
        let half = total / 2.0;
        let e = epoch as f64;
        if e <= half {
            self.learning_rate
        } else {
            self.learning_rate * ((total - e) / (total - half)).max(0.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub coarse: PointCloud,
    pub truth: PointCloud,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    pub mean_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,learning_rate,mean_loss\n");
        for r in &self.epochs {
            s.push_str(&format!("{},{:?},{:?}\n", r.epoch, r.learning_rate, r.mean_loss));
        }
        s
    }

    pub fn first_loss(&self) -> Option<f64> {
        self.epochs.first().map(|r| r.mean_loss)
    }

    pub fn last_loss(&self) -> Option<f64> {
        self.epochs.last().map(|r| r.mean_loss)
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

/// Mini-batch Adam on the configured loss. The log records, per epoch, the
/// mean loss observed before each batch's update.
pub fn train(data: &[TrainingPair], arch: &Architecture, config: &TrainingConfig) -> Result<(CoarseDecoderModel, TrainingLog)> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let mut model = CoarseDecoderModel::new(arch.clone(), seed::derive(config.seed, "init", 0))?;
    let n_params = model.parameters().len();
    let mut adam = Adam::new(n_params);
    let mut grad = vec![0.0; n_params];
    let mut states = vec![AuctionState::default(); data.len()];
    let auction = AuctionOptions { tolerance: config.emd_tolerance, ..AuctionOptions::default() };
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = TrainingLog::default();
    for epoch in 1..=config.epochs {
        let lr = config.learning_rate_at(epoch);
        order.shuffle(&mut seed::rng(seed::derive(config.seed, "shuffle", epoch as u64)));
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let rotated;
                let pair = if config.augment_yaw {
                    let key = (epoch as u64) * data.len() as u64 + i as u64;
                    let angle = seed::rng(seed::derive(config.seed, "augment", key)).random_range(0.0..std::f64::consts::TAU);
                    rotated = yaw_pair(&data[i], angle);
                    &rotated
                } else {
                    &data[i]
                };
                let v = accumulate(&model, &pair.coarse, &pair.truth, config.loss, &auction, &mut states[i], scale, &mut grad)?;
                if !v.is_finite() {
                    return Err(Error::Divergence(epoch));
                }
                total += v;
            }
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence(epoch));
            }
            adam.step(model.parameters_mut(), &grad, lr);
        }
        let mean_loss = total / data.len() as f64;
        log::debug!("epoch {epoch}: lr {lr:.3e} loss {mean_loss:.6}");
        log.epochs.push(EpochRecord { epoch, learning_rate: lr, mean_loss });
    }
    Ok((model, log))
}

fn yaw_pair(pair: &TrainingPair, angle: f64) -> TrainingPair {
    let c = pair.coarse.centroid().unwrap_or_else(Vec3::zeros);
    let rot = Rotation3::from_axis_angle(&Vec3::z_axis(), angle);
    let turn = |pc: &PointCloud| {
        let mut out = pc.clone();
        for q in &mut out.points {
            let d = rot * Vec3::new(q.x - c.x, q.y - c.y, 0.0);
            *q = Vec3::new(c.x + d.x, c.y + d.y, q.z);
        }
        out
    };
    TrainingPair { coarse: turn(&pair.coarse), truth: turn(&pair.truth) }
}

/// One model over whole-scene clouds.
pub fn train_joint(data: &[TrainingPair], arch: &Architecture, config: &TrainingConfig) -> Result<(CoarseDecoderModel, TrainingLog)> {
    train(data, arch, config)
}

/// One model per object label, each trained only on that label's clouds.
pub fn train_per_object(
    data: &[(u32, TrainingPair)],
    arch: &Architecture,
    config: &TrainingConfig,
) -> Result<(PerObjectModels, BTreeMap<u32, TrainingLog>)> {
    let mut groups: BTreeMap<u32, Vec<TrainingPair>> = BTreeMap::new();
    for (label, pair) in data {
        groups.entry(*label).or_default().push(pair.clone());
    }
    if groups.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let mut models = BTreeMap::new();
    let mut logs = BTreeMap::new();
    for (label, pairs) in groups {
        let cfg = TrainingConfig { seed: seed::derive(config.seed, "object", u64::from(label)), ..*config };
        let (m, l) = train(&pairs, arch, &cfg)?;
        models.insert(label, m);
        logs.insert(label, l);
    }
    Ok((PerObjectModels { models }, logs))
}
