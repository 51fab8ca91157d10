use std::collections::VecDeque;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

use super::{DepthImage, SegmentationMask};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentParams {
    /// 4-neighbours join a component when their depths differ by at most this.
    pub discontinuity: f64,
    /// Components with fewer pixels become background.
    pub min_region: usize,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self {
            discontinuity: 0.15,
            min_region: 20,
        }
    }
}

/// Depth-discontinuity connected components.
///
/// Surviving components are labeled `1, 2, ...` by descending size, ties
/// broken by the raster position of their first pixel.
pub fn classical_segment(depth: &DepthImage, params: &SegmentParams) -> Result<SegmentationMask> {
    if !(params.discontinuity > 0.0) {
        return Err(Error::invalid("discontinuity threshold must be positive"));
    }
    let (w, h) = (depth.width, depth.height);
    let d = &depth.data;
    let mut comp = vec![usize::MAX; w * h];
    // (size, first pixel) per component
    let mut comps: Vec<(usize, usize)> = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if d[start] <= 0.0 || comp[start] != usize::MAX {
            continue;
        }
        let id = comps.len();
        comp[start] = id;
        queue.push_back(start);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (u, v) = (i % w, i / w);
            let mut visit = |j: usize| {
                if d[j] > 0.0 && comp[j] == usize::MAX && (d[j] - d[i]).abs() <= params.discontinuity {
                    comp[j] = id;
                    queue.push_back(j);
                }
            };
            if u > 0 {
                visit(i - 1);
            }
            if u + 1 < w {
                visit(i + 1);
            }
            if v > 0 {
                visit(i - w);
            }
            if v + 1 < h {
                visit(i + w);
            }
        }
        comps.push((size, start));
    }
    let mut ranked: Vec<usize> = (0..comps.len())
        .filter(|&c| comps[c].0 >= params.min_region)
        .collect();
    ranked.sort_by(|&a, &b| comps[b].0.cmp(&comps[a].0).then(comps[a].1.cmp(&comps[b].1)));
    let mut label_of = vec![0u32; comps.len()];
    for (rank, &c) in ranked.iter().enumerate() {
        label_of[c] = rank as u32 + 1;
    }
    Ok(SegmentationMask {
        width: w,
        height: h,
        labels: comp
            .iter()
            .map(|&c| if c == usize::MAX { 0 } else { label_of[c] })
            .collect(),
    })
}

/// Relabels `round(p · n)` of the `n` pixels carrying `target` as background.
///
/// The pixels are taken from the front of one seeded permutation, so for a
/// fixed seed the flipped sets are nested as `p` grows.
pub fn corrupt_mask(mask: &SegmentationMask, p: f64, target: u32, seed: u64) -> Result<SegmentationMask> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("flip fraction must lie in [0, 1]"));
    }
    let mut pixels: Vec<usize> = mask
        .labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == target)
        .map(|(i, _)| i)
        .collect();
    if target == 0 || pixels.is_empty() {
        return Err(Error::LabelAbsent(target));
    }
    let flips = (p * pixels.len() as f64).round() as usize;
    pixels.shuffle(&mut seed::rng(seed));
    let mut out = mask.clone();
    for &i in &pixels[..flips] {
        out.labels[i] = 0;
    }
    Ok(out)
}

/// One depth image per label `1..=m`, each keeping only its own pixels.
pub fn split_depth(depth: &DepthImage, mask: &SegmentationMask, m: u32) -> Result<Vec<DepthImage>> {
    if depth.width != mask.width || depth.height != mask.height {
        return Err(Error::invalid(format!(
            "mask {}×{} does not match depth {}×{}",
            mask.width, mask.height, depth.width, depth.height
        )));
    }
    if let Some(bad) = mask.labels.iter().find(|&&l| l > m) {
        return Err(Error::invalid(format!("mask label {bad} exceeds object count {m}")));
    }
    Ok((1..=m)
        .map(|label| {
            let mut img = DepthImage::background(depth.camera.clone());
            for (i, (&l, &d)) in mask.labels.iter().zip(&depth.data).enumerate() {
                if l == label {
                    img.data[i] = d;
                }
            }
            img
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{RigidPose, Vec3};
    use crate::imaging::{render_depth, CameraModel};
    use crate::scene::{shapes, Scene, SceneObject};
    use std::collections::HashMap;

    fn camera() -> CameraModel {
        CameraModel::looking_at(Vec3::new(0.0, -3.0, 1.2), Vec3::new(0.0, 0.0, 0.3), Vec3::z(), 128, 128, 128.0).unwrap()
    }

    fn two_boxes() -> Scene {
        let obj = |label, x: f64| SceneObject {
            name: format!("b{label}"),
            label,
            mesh: shapes::cuboid(Vec3::new(0.4, 0.4, 0.5)),
            pose: RigidPose::from_translation(Vec3::new(x, 0.0, 0.25)),
        };
        Scene::new(vec![obj(1, -0.5), obj(2, 0.5)]).unwrap()
    }

    /// Fraction of oracle foreground pixels whose predicted label agrees
    /// under the best one-to-one relabeling (greedy on overlap counts).
    fn agreement(pred: &SegmentationMask, oracle: &SegmentationMask) -> f64 {
        let mut overlap: HashMap<(u32, u32), usize> = HashMap::new();
        for (&p, &o) in pred.labels.iter().zip(&oracle.labels) {
            if o != 0 && p != 0 {
                *overlap.entry((p, o)).or_default() += 1;
            }
        }
        let mut pairs: Vec<_> = overlap.into_iter().collect();
        pairs.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let (mut used_p, mut used_o, mut agree) = (vec![], vec![], 0);
        for ((p, o), n) in pairs {
            if !used_p.contains(&p) && !used_o.contains(&o) {
                used_p.push(p);
                used_o.push(o);
                agree += n;
            }
        }
        agree as f64 / oracle.foreground_count() as f64
    }

    #[test]
    fn separated_objects_match_oracle() {
        let (depth, oracle) = render_depth(&two_boxes(), &camera()).unwrap();
        let seg = classical_segment(&depth, &SegmentParams::default()).unwrap();
        assert_eq!(seg.max_label(), 2);
        assert!((agreement(&seg, &oracle) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_object_and_background() {
        let scene = Scene::new(vec![SceneObject {
            name: "s".into(),
            label: 1,
            mesh: shapes::uv_sphere(0.4, 16, 24),
            pose: RigidPose::from_translation(Vec3::new(0.0, 0.0, 0.4)),
        }])
        .unwrap();
        let (depth, oracle) = render_depth(&scene, &camera()).unwrap();
        let seg = classical_segment(&depth, &SegmentParams::default()).unwrap();
        assert_eq!(seg, oracle);
        let bg = DepthImage::background(camera());
        assert_eq!(classical_segment(&bg, &SegmentParams::default()).unwrap().foreground_count(), 0);
    }

    #[test]
    fn labels_ranked_by_size() {
        let cam = CameraModel::new(8, 1, 8.0, 4.0, 0.0, RigidPose::identity()).unwrap();
        let mut d = DepthImage::background(cam);
        d.data = vec![1.0, 0.0, 2.0, 2.0, 2.0, 0.0, 3.0, 3.0];
        let seg = classical_segment(&d, &SegmentParams { discontinuity: 0.1, min_region: 2 }).unwrap();
        assert_eq!(seg.labels, vec![0, 0, 1, 1, 1, 0, 2, 2]);
        // a depth jump splits an otherwise connected run
        d.data = vec![1.0, 1.0, 1.0, 5.0, 5.0, 5.0, 0.0, 0.0];
        let seg = classical_segment(&d, &SegmentParams { discontinuity: 0.1, min_region: 1 }).unwrap();
        assert_eq!(seg.labels, vec![1, 1, 1, 2, 2, 2, 0, 0]);
    }

    #[test]
    fn corruption_counts() {
        let mut mask = SegmentationMask::background(100, 40);
        for i in 0..2000 {
            mask.labels[i] = 1;
        }
        for i in 2000..2500 {
            mask.labels[i] = 2;
        }
        assert_eq!(corrupt_mask(&mask, 0.0, 1, 3).unwrap(), mask);
        let all = corrupt_mask(&mask, 1.0, 1, 3).unwrap();
        assert_eq!(all.count(1), 0);
        assert_eq!(all.count(2), 500);
        let half = corrupt_mask(&mask, 0.5, 1, 3).unwrap();
        assert_eq!(2000 - half.count(1), 1000);
        assert!(matches!(corrupt_mask(&mask, 0.5, 3, 0), Err(Error::LabelAbsent(3))));
        // nested flips for a fixed seed
        let q = corrupt_mask(&mask, 0.25, 1, 3).unwrap();
        for i in 0..mask.labels.len() {
            if mask.labels[i] == 1 && q.labels[i] == 0 {
                assert_eq!(half.labels[i], 0);
            }
        }
    }

    #[test]
    fn split_partitions_foreground() {
        let (depth, mask) = render_depth(&two_boxes(), &camera()).unwrap();
        let parts = split_depth(&depth, &mask, 2).unwrap();
        assert_eq!(parts.len(), 2);
        for (k, part) in parts.iter().enumerate() {
            for i in 0..depth.data.len() {
                if part.data[i] > 0.0 {
                    assert_eq!(mask.labels[i], k as u32 + 1);
                }
            }
        }
        let union: Vec<bool> = (0..depth.data.len())
            .map(|i| parts.iter().any(|p| p.data[i] > 0.0))
            .collect();
        let fg: Vec<bool> = depth.data.iter().map(|&d| d > 0.0).collect();
        assert_eq!(union, fg);
        let one = split_depth(&depth, &SegmentationMask { labels: mask.labels.iter().map(|&l| l.min(1)).collect(), ..mask.clone() }, 1).unwrap();
        assert_eq!(one[0], depth);
        assert!(split_depth(&depth, &SegmentationMask::background(3, 3), 1).is_err());
    }
}
