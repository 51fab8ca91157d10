//! Static kd-tree over 3D points. Queries return exactly what a brute-force
//! scan would: the smallest squared distance, lowest index on ties.

use crate::geometry::Vec3;

const LEAF: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec3>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[inline]
pub fn dist2(a: &Vec3, b: &Vec3) -> f64 {
    (a - b).norm_squared()
}

#[inline]
fn better(d: f64, i: usize, best: (f64, usize)) -> bool {
    d < best.0 || (d == best.0 && i < best.1)
}

impl KdTree {
    pub fn new(points: &[Vec3]) -> Self {
        let mut tree = Self {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let (mut lo, mut hi) = (Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY));
        for &i in &self.order[start..end] {
            lo = lo.inf(&self.points[i]);
            hi = hi.sup(&self.points[i]);
        }
        let axis = (hi - lo).imax();
        let mid = (start + end) / 2;
        let pts = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| pts[a][axis].total_cmp(&pts[b][axis]));
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    /// Index and squared distance of the nearest point.
    pub fn nearest(&self, q: &Vec3) -> Option<(usize, f64)> {
        if self.is_empty() {
            return None;
        }
        let mut best = (f64::INFINITY, usize::MAX);
        self.nearest_in(0, q, &mut best);
        Some((best.1, best.0))
    }

    fn nearest_in(&self, node: usize, q: &Vec3, best: &mut (f64, usize)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = dist2(q, &self.points[i]);
                    if better(d, i, *best) {
                        *best = (d, i);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.nearest_in(near, q, best);
                if diff * diff <= best.0 {
                    self.nearest_in(far, q, best);
                }
            }
        }
    }

    /// The `k` nearest points sorted by (distance, index).
    pub fn knn(&self, q: &Vec3, k: usize) -> Vec<(usize, f64)> {
        let mut heap: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        if k > 0 && !self.is_empty() {
            self.knn_in(0, q, k, &mut heap);
        }
        heap.into_iter().map(|(d, i)| (i, d)).collect()
    }

    // `found` stays sorted; k is small so insertion is cheap
    fn knn_in(&self, node: usize, q: &Vec3, k: usize, found: &mut Vec<(f64, usize)>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = dist2(q, &self.points[i]);
                    if found.len() < k || better(d, i, found[found.len() - 1]) {
                        let pos = found.partition_point(|&(fd, fi)| better(fd, fi, (d, i)));
                        found.insert(pos, (d, i));
                        found.truncate(k);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.knn_in(near, q, k, found);
                if found.len() < k || diff * diff <= found[found.len() - 1].0 {
                    self.knn_in(far, q, k, found);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(points: &[Vec3], q: &Vec3) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, p) in points.iter().enumerate() {
            let d = dist2(q, p);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }

    fn pts() -> impl Strategy<Value = Vec<Vec3>> {
        // coarse grid coordinates force many exact ties
        prop::collection::vec((-4i32..4, -4i32..4, -4i32..4), 1..120)
            .prop_map(|v| v.into_iter().map(|(x, y, z)| Vec3::new(x as f64 * 0.5, y as f64, z as f64 * 0.25)).collect())
    }

    proptest! {
        #[test]
        fn nearest_matches_brute_force(points in pts(), qs in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64), 1..20)) {
            let tree = KdTree::new(&points);
            for (x, y, z) in qs {
                let q = Vec3::new(x, y, z);
                prop_assert_eq!(tree.nearest(&q).unwrap(), brute(&points, &q));
            }
            for (i, p) in points.iter().enumerate() {
                let (j, d) = tree.nearest(p).unwrap();
                prop_assert_eq!(d, 0.0);
                prop_assert!(j <= i);
            }
        }

        #[test]
        fn knn_matches_sorted_scan(points in pts(), k in 1usize..12) {
            let tree = KdTree::new(&points);
            let q = points[0] + Vec3::new(0.1, 0.2, 0.3);
            let mut all: Vec<(usize, f64)> = points.iter().enumerate().map(|(i, p)| (i, dist2(&q, p))).collect();
            all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            all.truncate(k);
            prop_assert_eq!(tree.knn(&q, k), all);
        }
    }

    #[test]
    fn empty_tree() {
        let t = KdTree::new(&[]);
        assert!(t.nearest(&Vec3::zeros()).is_none());
        assert!(t.knn(&Vec3::zeros(), 3).is_empty());
    }
}
