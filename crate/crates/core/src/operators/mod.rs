//! Martingale transforms, maximal truncations, the dyadic maximal function,
//! sparse operators and paraproducts.

mod paraproduct;
mod sparse;
mod transform;

use std::sync::Arc;

pub use paraproduct::{carleson_norm, paraproduct, paraproduct_within, CarlesonFamily};
pub use sparse::{check_sparse, sparse_apply, SparseCollection, SparseReport, SPARSE_SLACK};
pub use transform::{
    dyadic_maximal, maximal_truncation, maximal_truncation_within, transform, transform_within,
    SignSequence,
};

pub(crate) use transform::{chain_sums, dyadic_maximal_local};

use crate::function::{node_averages, node_integrals};
use crate::tree::MeasureTree;

/// A linear operator on leaf vectors, with its adjoint in `L²(μ)`.
pub trait LeafOperator: Send + Sync {
    fn tree(&self) -> &Arc<MeasureTree>;
    fn apply(&self, values: &[f64]) -> Vec<f64>;
    fn apply_adjoint(&self, values: &[f64]) -> Vec<f64>;
}

impl LeafOperator for SignSequence {
    fn tree(&self) -> &Arc<MeasureTree> {
        SignSequence::tree(self)
    }

    fn apply(&self, values: &[f64]) -> Vec<f64> {
        let tree = self.tree();
        let avg = node_averages(tree, values);
        chain_sums(tree, tree.root(), 0.0, |q, c| {
            self.get(q) * (avg[c.0] - avg[q.0])
        })
        .0
    }

    /// Martingale differences are self-adjoint projections.
    fn apply_adjoint(&self, values: &[f64]) -> Vec<f64> {
        self.apply(values)
    }
}

impl LeafOperator for SparseCollection {
    fn tree(&self) -> &Arc<MeasureTree> {
        SparseCollection::tree(self)
    }

    fn apply(&self, values: &[f64]) -> Vec<f64> {
        self.apply_averages(&node_averages(self.tree(), values))
    }

    fn apply_adjoint(&self, values: &[f64]) -> Vec<f64> {
        self.apply(values)
    }
}

impl LeafOperator for CarlesonFamily {
    fn tree(&self) -> &Arc<MeasureTree> {
        CarlesonFamily::tree(self)
    }

    fn apply(&self, values: &[f64]) -> Vec<f64> {
        let tree = self.tree();
        let avg = node_averages(tree, values);
        chain_sums(tree, tree.root(), 0.0, |q, c| avg[q.0] * self.on_child(q, c)).0
    }

    /// `Π* g = Σ_Q μ(Q)^{-1} (∫ b_Q g dμ) 1_Q`.
    fn apply_adjoint(&self, values: &[f64]) -> Vec<f64> {
        let tree = self.tree();
        let integral = node_integrals(tree, values);
        let mut coef = vec![0.0; tree.len()];
        for q in self.nodes() {
            let pairing: f64 = tree
                .children(q)
                .iter()
                .map(|&c| self.on_child(q, c) * integral[c.0])
                .sum();
            coef[q.0] = pairing / tree.measure(q);
        }
        let mut acc = vec![0.0; tree.len()];
        let mut out = vec![0.0; tree.num_leaves()];
        for v in tree.nodes() {
            let above = tree.parent(v).map_or(0.0, |p| acc[p.0]);
            acc[v.0] = above + coef[v.0];
            if let Some(li) = tree.leaf_index(v) {
                out[li] = acc[v.0];
            }
        }
        out
    }
}
