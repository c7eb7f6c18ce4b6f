use crate::measures::PointCloud;
use crate::numeric::sq_dist;

pub(super) const MAX_DIM: usize = 16;
const LEAF: usize = 8;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

/// k-d tree over the rows of a [`PointCloud`]. The cloud is not stored; pass
/// the same one to [`KdTree::nearest`].
#[derive(Debug, Clone, PartialEq)]
pub struct KdTree {
    nodes: Vec<Node>,
    order: Vec<usize>,
}

impl KdTree {
    pub fn build(points: &PointCloud) -> Self {
        let mut tree = Self { nodes: Vec::new(), order: (0..points.len()).collect() };
        let n = points.len();
        tree.build_node(points, 0, n);
        tree
    }

    fn build_node(&mut self, points: &PointCloud, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let d = points.dim();
        let mut dim = 0;
        let mut spread = -1.0;
        for k in 0..d {
            let (lo, hi) = self.order[start..end]
                .iter()
                .map(|&i| points.point(i)[k])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            if hi - lo > spread {
                spread = hi - lo;
                dim = k;
            }
        }
        if spread <= 0.0 {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        self.order[start..end]
            .select_nth_unstable_by(mid - start, |&a, &b| points.point(a)[dim].total_cmp(&points.point(b)[dim]));
        let value = points.point(self.order[mid])[dim];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(points, start, mid);
        let right = self.build_node(points, mid, end);
        self.nodes[id] = Node::Split { dim, value, left, right };
        id
    }

    /// Lowest index attaining `min_i ‖x − X_i‖`.
    pub fn nearest(&self, points: &PointCloud, x: &[f64]) -> usize {
        let mut best = (f64::INFINITY, usize::MAX);
        self.search(0, points, x, &mut best);
        best.1
    }

    fn search(&self, node: usize, points: &PointCloud, x: &[f64], best: &mut (f64, usize)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = sq_dist(points.point(i), x);
                    if d < best.0 || (d == best.0 && i < best.1) {
                        *best = (d, i);
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let delta = x[dim] - value;
                let (near, far) = if delta < 0.0 { (left, right) } else { (right, left) };
                self.search(near, points, x, best);
                // Ties must still be visited so the lowest index wins.
                if delta * delta <= best.0 {
                    self.search(far, points, x, best);
                }
            }
        }
    }
}

/// Linear scan: lowest index attaining `min_i ‖x − X_i‖`.
pub fn nearest_linear(points: &PointCloud, x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d = sq_dist(p, x);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}
