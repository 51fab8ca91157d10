//! Coarse (1024) to refined (4096) point clouds.
//!
//! Two refiners share the [`Refiner`] interface: a classical baseline
//! (outlier removal plus jittered upsampling) and a small learned
//! encoder/decoder trained with Chamfer or EMD loss.

mod loss;
mod model;
mod train;

pub use loss::{accumulate, assignment_output_gradient, chamfer_output_gradient, loss_and_gradient, loss_with_assignment};
pub use model::{Architecture, CoarseDecoderModel, ForwardTrace};
pub use train::{train, train_joint, train_per_object, EpochRecord, TrainingConfig, TrainingLog, TrainingPair};

use std::collections::BTreeMap;

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::metrics::mean_std;
use crate::pointcloud::{PointCloud, REFINED_POINTS};
use crate::seed;
use crate::spatial::KdTree;

/// Anything that turns a coarse cloud into a refined one. `label` names the
/// object class when refining a single segmented object.
pub trait Refiner: Send + Sync {
    fn refine(&self, coarse: &PointCloud, label: Option<u32>, seed: u64) -> Result<PointCloud>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaselineRefiner {
    pub output_points: usize,
}

impl Default for BaselineRefiner {
    fn default() -> Self {
        Self { output_points: REFINED_POINTS }
    }
}

impl Refiner for BaselineRefiner {
    fn refine(&self, coarse: &PointCloud, _label: Option<u32>, seed: u64) -> Result<PointCloud> {
        baseline_refine_to(coarse, self.output_points, seed)
    }
}

impl Refiner for CoarseDecoderModel {
    fn refine(&self, coarse: &PointCloud, _label: Option<u32>, _seed: u64) -> Result<PointCloud> {
        self.forward(coarse)
    }
}

/// Separately trained models keyed by object label.
#[derive(Debug, Clone, PartialEq)]
pub struct PerObjectModels {
    pub models: BTreeMap<u32, CoarseDecoderModel>,
}

impl Refiner for PerObjectModels {
    fn refine(&self, coarse: &PointCloud, label: Option<u32>, seed: u64) -> Result<PointCloud> {
        let label = label.ok_or_else(|| Error::invalid("per-object refiner needs an object label"))?;
        self.models
            .get(&label)
            .ok_or_else(|| Error::invalid(format!("no model trained for object label {label}")))?
            .refine(coarse, Some(label), seed)
    }
}

pub fn baseline_refine(coarse: &PointCloud, seed: u64) -> Result<PointCloud> {
    baseline_refine_to(coarse, REFINED_POINTS, seed)
}

/// Drops points whose mean distance to their 8 nearest neighbours exceeds
/// `μ + 2σ`, keeps the survivors, and fills up to `n` with copies jittered
/// by `N(0, (d_nn / 2)²)` per axis.
pub fn baseline_refine_to(coarse: &PointCloud, n: usize, seed: u64) -> Result<PointCloud> {
    if coarse.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let pts = &coarse.points;
    let tree = KdTree::new(pts);
    let k = 8.min(pts.len() - 1);
    let kept: Vec<Vec3> = if k == 0 {
        pts.clone()
    } else {
        let mean_d: Vec<f64> = pts
            .iter()
            .map(|p| {
                // the query point itself comes back first at distance 0
                let nn = tree.knn(p, k + 1);
                nn.iter().skip(1).map(|(_, d2)| d2.sqrt()).sum::<f64>() / k as f64
            })
            .collect();
        let (mu, sigma) = mean_std(&mean_d);
        let limit = mu + 2.0 * sigma;
        pts.iter().zip(&mean_d).filter(|(_, d)| **d <= limit).map(|(p, _)| *p).collect()
    };
    let kept_tree = KdTree::new(&kept);
    let spacing: Vec<f64> = kept
        .iter()
        .map(|p| if kept.len() > 1 { kept_tree.knn(p, 2)[1].1.sqrt() } else { 0.0 })
        .collect();
    let mut rng = seed::rng(seed);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let out = (0..n)
        .map(|j| {
            let i = j % kept.len();
            if j < kept.len() {
                kept[i]
            } else {
                let s = spacing[i] / 2.0;
                kept[i] + Vec3::new(std.sample(&mut rng), std.sample(&mut rng), std.sample(&mut rng)) * s
            }
        })
        .collect();
    Ok(PointCloud::new(out))
}
