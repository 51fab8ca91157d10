//! Point-set distances and Table-style reporting.
//!
//! Both distances are means of non-squared Euclidean lengths:
//!
//! * Chamfer: `mean_a min_b |a-b| + mean_b min_a |a-b|`
//! * EMD: `min_φ mean_i |a_i - b_φ(i)|` over bijections φ

mod assignment;
mod report;

pub use assignment::{emd_approx, emd_approx_assignment, emd_exact, AuctionOptions, AuctionState, EXACT_CAP};
pub use report::{aggregate, format_number, render_row, LossType, MetricsReport, ModelVariant, Record};

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::pointcloud::{random_sample, PointCloud};
use crate::spatial::KdTree;

/// Bijection from indices of cloud A to indices of cloud B.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment(pub Vec<usize>);

impl Assignment {
    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn is_bijection(&self) -> bool {
        let mut seen = vec![false; self.0.len()];
        self.0.iter().all(|&j| j < seen.len() && !std::mem::replace(&mut seen[j], true))
    }

    /// Mean matched distance, summed in index order.
    pub fn cost(&self, a: &[Vec3], b: &[Vec3]) -> f64 {
        let sum: f64 = self.0.iter().enumerate().map(|(i, &j)| (a[i] - b[j]).norm()).sum();
        sum / a.len() as f64
    }
}

/// Nearest-neighbour correspondences in both directions plus the Chamfer value.
#[derive(Debug, Clone, PartialEq)]
pub struct ChamferMatch {
    pub value: f64,
    /// For every point of A, the index of its nearest point in B.
    pub a_to_b: Vec<usize>,
    /// For every point of B, the index of its nearest point in A.
    pub b_to_a: Vec<usize>,
}

pub fn chamfer(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    Ok(chamfer_match(&a.points, &b.points)?.value)
}

pub fn chamfer_match(a: &[Vec3], b: &[Vec3]) -> Result<ChamferMatch> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let (ab, sum_ab) = one_way(a, b);
    let (ba, sum_ba) = one_way(b, a);
    Ok(ChamferMatch {
        value: sum_ab / a.len() as f64 + sum_ba / b.len() as f64,
        a_to_b: ab,
        b_to_a: ba,
    })
}

fn one_way(from: &[Vec3], to: &[Vec3]) -> (Vec<usize>, f64) {
    let tree = KdTree::new(to);
    let mut sum = 0.0;
    let idx = from
        .iter()
        .map(|p| {
            let (j, d2) = tree.nearest(p).expect("non-empty");
            sum += d2.sqrt();
            j
        })
        .collect();
    (idx, sum)
}

/// Scores `output` against `truth`, first resampling `output` down to the
/// size of `truth` when it is larger. EMD uses the auction solver.
pub fn evaluate_pair(output: &PointCloud, truth: &PointCloud, seed: u64) -> Result<(f64, f64)> {
    evaluate_pair_with(output, truth, seed, &AuctionOptions::default())
}

pub fn evaluate_pair_with(output: &PointCloud, truth: &PointCloud, seed: u64, opts: &AuctionOptions) -> Result<(f64, f64)> {
    if truth.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let sampled;
    let out = if output.len() > truth.len() {
        sampled = random_sample(output, truth.len(), seed)?;
        &sampled
    } else {
        output
    };
    let cd = chamfer(out, truth)?;
    let emd = emd_approx(&out.points, &truth.points, opts)?;
    Ok((cd, emd))
}

/// Sample standard deviation (N-1); a single value has std 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
