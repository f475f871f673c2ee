use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::function::{ensure_same_tree, node_averages, CellFunction};
use crate::tree::{MeasureTree, NodeId};

/// Multipliers `ε_P ∈ [−1, 1]` on the internal nodes of a tree.
#[derive(Debug, Clone, PartialEq)]
pub struct SignSequence {
    tree: Arc<MeasureTree>,
    eps: Vec<f64>,
}

impl SignSequence {
    /// `eps` is indexed by node id; entries on leaves must be zero.
    pub fn new(tree: Arc<MeasureTree>, eps: Vec<f64>) -> Result<Self> {
        if eps.len() != tree.len() {
            return Err(Error::LengthMismatch {
                expected: tree.len(),
                got: eps.len(),
            });
        }
        for v in tree.nodes() {
            let e = eps[v.0];
            if !e.is_finite() {
                return Err(Error::NonFinite { node: v, value: e });
            }
            if tree.is_leaf(v) && e != 0.0 {
                return Err(Error::LeafNode(v));
            }
            if e.abs() > 1.0 {
                return Err(Error::CoefficientOutOfRange { node: v, value: e });
            }
        }
        Ok(SignSequence { tree, eps })
    }

    /// Builds from `(node, ε)` pairs; internal nodes not listed get `ε = 0`.
    pub fn from_pairs(tree: Arc<MeasureTree>, pairs: &[(NodeId, f64)]) -> Result<Self> {
        let mut eps = vec![0.0; tree.len()];
        for &(node, e) in pairs {
            tree.check(node)?;
            eps[node.0] = e;
        }
        SignSequence::new(tree, eps)
    }

    pub fn from_fn(tree: Arc<MeasureTree>, mut f: impl FnMut(NodeId) -> f64) -> Result<Self> {
        let eps = tree
            .nodes()
            .map(|v| if tree.is_leaf(v) { 0.0 } else { f(v) })
            .collect();
        SignSequence::new(tree, eps)
    }

    pub fn constant(tree: Arc<MeasureTree>, c: f64) -> Result<Self> {
        SignSequence::from_fn(tree, |_| c)
    }

    /// `ε_P = (−1)^{level(P)}`.
    pub fn alternating_by_level(tree: Arc<MeasureTree>) -> Self {
        let t = tree.clone();
        SignSequence::from_fn(tree, |v| if t.level(v) % 2 == 0 { 1.0 } else { -1.0 })
            .expect("signs are admissible")
    }

    pub fn random_signs(tree: Arc<MeasureTree>, rng: &mut impl Rng) -> Self {
        SignSequence::from_fn(tree, |_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .expect("signs are admissible")
    }

    pub fn random_uniform(tree: Arc<MeasureTree>, rng: &mut impl Rng) -> Self {
        SignSequence::from_fn(tree, |_| rng.random_range(-1.0..=1.0))
            .expect("coefficients are admissible")
    }

    pub fn tree(&self) -> &Arc<MeasureTree> {
        &self.tree
    }

    pub fn get(&self, node: NodeId) -> f64 {
        self.eps[node.0]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.eps
    }

    pub fn negated(&self) -> SignSequence {
        SignSequence {
            tree: self.tree.clone(),
            eps: self.eps.iter().map(|e| -e).collect(),
        }
    }
}

/// Partial sums along root-to-leaf chains restricted to the subtree of `top`.
///
/// Starting from `start` at `top`, each step from an internal node `q` to its
/// child `c` adds `term(q, c)`. Returns, for the leaves of `top` in leaf-index
/// order, the full chain sum and the largest absolute prefix (the start value
/// counts as a prefix).
pub(crate) fn chain_sums(
    tree: &MeasureTree,
    top: NodeId,
    start: f64,
    term: impl Fn(NodeId, NodeId) -> f64,
) -> (Vec<f64>, Vec<f64>) {
    let range = tree.subtree(top);
    let base = range.start;
    let mut acc = vec![0.0; range.len()];
    let mut peak = vec![0.0; range.len()];
    acc[0] = start;
    peak[0] = start.abs();
    let leaves = tree.leaf_range(top);
    let mut sums = vec![0.0; leaves.len()];
    let mut maxes = vec![0.0; leaves.len()];
    for id in range {
        let v = NodeId(id);
        if v != top {
            let p = tree.parent(v).expect("non-top node has parent");
            let a = acc[p.0 - base] + term(p, v);
            acc[id - base] = a;
            peak[id - base] = peak[p.0 - base].max(a.abs());
        }
        if let Some(li) = tree.leaf_index(v) {
            sums[li - leaves.start] = acc[id - base];
            maxes[li - leaves.start] = peak[id - base];
        }
    }
    (sums, maxes)
}

fn spread(tree: &Arc<MeasureTree>, top: NodeId, local: Vec<f64>) -> CellFunction {
    let range = tree.leaf_range(top);
    if range.len() == tree.num_leaves() {
        return CellFunction::from_vec_unchecked(tree.clone(), local);
    }
    let mut values = vec![0.0; tree.num_leaves()];
    values[range].copy_from_slice(&local);
    CellFunction::from_vec_unchecked(tree.clone(), values)
}

fn transform_parts(
    eps: &SignSequence,
    f: &CellFunction,
    top: NodeId,
) -> Result<(Vec<f64>, Vec<f64>)> {
    ensure_same_tree(eps.tree(), f.tree())?;
    let tree = f.tree();
    tree.check(top)?;
    let avg = f.averages();
    Ok(chain_sums(tree, top, 0.0, |q, c| {
        eps.get(q) * (avg[c.0] - avg[q.0])
    }))
}

/// `T f = Σ_P ε_P Δ_P f` over the internal nodes of the tree.
pub fn transform(eps: &SignSequence, f: &CellFunction) -> Result<CellFunction> {
    transform_within(eps, f, f.tree().root())
}

/// `Σ_{P ⊆ Q0} ε_P Δ_P f` on the leaves of `q0`, zero elsewhere.
pub fn transform_within(eps: &SignSequence, f: &CellFunction, q0: NodeId) -> Result<CellFunction> {
    let (sums, _) = transform_parts(eps, f, q0)?;
    Ok(spread(f.tree(), q0, sums))
}

/// `T_♯ f(x)`: the largest absolute partial sum of `Σ ε_Q Δ_Q f(x)` over the
/// ancestors of `x`, taken from the root down. The empty prefix contributes
/// zero, so the result is non-negative.
pub fn maximal_truncation(eps: &SignSequence, f: &CellFunction) -> Result<CellFunction> {
    maximal_truncation_within(eps, f, f.tree().root())
}

/// Maximal truncation using only the differences `Δ_Q`, `Q ⊆ Q0`.
pub fn maximal_truncation_within(
    eps: &SignSequence,
    f: &CellFunction,
    q0: NodeId,
) -> Result<CellFunction> {
    let (_, maxes) = transform_parts(eps, f, q0)?;
    Ok(spread(f.tree(), q0, maxes))
}

/// `M_P f(x) = max { ⟨|f|⟩_Q : x ∈ Q ⊆ P }`, zero off `P`.
pub fn dyadic_maximal(f: &CellFunction, p: NodeId) -> Result<CellFunction> {
    let tree = f.tree();
    tree.check(p)?;
    let abs_avg = node_averages(tree, &f.abs().into_values());
    Ok(spread(tree, p, dyadic_maximal_local(tree, p, &abs_avg)))
}

pub(crate) fn dyadic_maximal_local(tree: &MeasureTree, p: NodeId, abs_avg: &[f64]) -> Vec<f64> {
    let range = tree.subtree(p);
    let base = range.start;
    let mut run = vec![0.0; range.len()];
    let leaves = tree.leaf_range(p);
    let mut out = vec![0.0; leaves.len()];
    for id in range {
        let v = NodeId(id);
        run[id - base] = if v == p {
            abs_avg[id]
        } else {
            let par = tree.parent(v).expect("non-top node has parent");
            run[par.0 - base].max(abs_avg[id])
        };
        if let Some(li) = tree.leaf_index(v) {
            out[li - leaves.start] = run[id - base];
        }
    }
    out
}
