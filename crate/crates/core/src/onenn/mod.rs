//! The one-nearest-neighbour map estimator: exact optimal matching of two
//! equal-size samples, extended to all of `R^d` by nearest-neighbour lookup.

mod assignment;
mod kdtree;

pub use assignment::{solve_assignment, AssignmentPlan};
pub use kdtree::{nearest_linear, KdTree};

use crate::error::{invalid, Result};
use crate::maps::TransportMap;
use crate::measures::PointCloud;

/// Spatial index used for the out-of-sample lookup.
#[derive(Debug, Clone, PartialEq)]
pub enum NeighborIndex {
    /// Linear scan over all sources.
    Linear,
    /// k-d tree; only built for `d ≤ 16`.
    KdTree(KdTree),
}

/// `T(x) = Y_{π̂(i*)}` with `i* = argmin_i ‖x − X_i‖`, ties to the lowest index.
#[derive(Debug, Clone, PartialEq)]
pub struct OneNNModel {
    sources: PointCloud,
    matched: PointCloud,
    index: NeighborIndex,
    plan: AssignmentPlan,
}

impl OneNNModel {
    pub fn sources(&self) -> &PointCloud {
        &self.sources
    }

    /// Row `i` is `Y_{π̂(i)}`.
    pub fn matched_targets(&self) -> &PointCloud {
        &self.matched
    }

    pub fn plan(&self) -> &AssignmentPlan {
        &self.plan
    }

    pub fn index(&self) -> &NeighborIndex {
        &self.index
    }

    /// Switches the lookup to a k-d tree when `d ≤ 16`.
    pub fn with_kdtree(mut self) -> Self {
        if self.sources.dim() <= kdtree::MAX_DIM {
            self.index = NeighborIndex::KdTree(KdTree::build(&self.sources));
        }
        self
    }

    pub fn nearest_source(&self, x: &[f64]) -> usize {
        match &self.index {
            NeighborIndex::Linear => nearest_linear(&self.sources, x),
            NeighborIndex::KdTree(t) => t.nearest(&self.sources, x),
        }
    }

    pub fn eval(&self, x: &[f64]) -> &[f64] {
        self.matched.point(self.nearest_source(x))
    }
}

impl TransportMap for OneNNModel {
    fn output_dim(&self) -> usize {
        self.matched.dim()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(self.eval(x));
    }
}

/// Matches `xs` to `ys` optimally and stores the matched targets.
pub fn fit_onenn(xs: &PointCloud, ys: &PointCloud) -> Result<OneNNModel> {
    let plan = solve_assignment(xs, ys)?;
    let matched = ys.select(&plan.permutation)?;
    if matched.dim() != xs.dim() {
        return Err(invalid("source and target dimensions differ"));
    }
    Ok(OneNNModel { sources: xs.clone(), matched, index: NeighborIndex::Linear, plan })
}
