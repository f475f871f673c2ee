//! Leaf-constant functions, averages, conditional expectations and
//! martingale differences.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tree::{MeasureTree, NodeId};

/// A function measurable with respect to the finest partition: one real value
/// per leaf, indexed by leaf index.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFunction {
    tree: Arc<MeasureTree>,
    values: Vec<f64>,
}

/// Two handles refer to the same tree if they share an allocation or are
/// structurally identical.
pub fn same_tree(a: &Arc<MeasureTree>, b: &Arc<MeasureTree>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

pub(crate) fn ensure_same_tree(a: &Arc<MeasureTree>, b: &Arc<MeasureTree>) -> Result<()> {
    if same_tree(a, b) {
        Ok(())
    } else {
        Err(Error::TreeMismatch)
    }
}

impl CellFunction {
    pub fn new(tree: Arc<MeasureTree>, values: Vec<f64>) -> Result<Self> {
        if values.len() != tree.num_leaves() {
            return Err(Error::LengthMismatch {
                expected: tree.num_leaves(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                node: tree.leaf(i),
                value: values[i],
            });
        }
        Ok(CellFunction { tree, values })
    }

    pub(crate) fn from_vec_unchecked(tree: Arc<MeasureTree>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), tree.num_leaves());
        CellFunction { tree, values }
    }

    pub fn zeros(tree: Arc<MeasureTree>) -> Self {
        let n = tree.num_leaves();
        CellFunction::from_vec_unchecked(tree, vec![0.0; n])
    }

    pub fn constant(tree: Arc<MeasureTree>, c: f64) -> Self {
        let n = tree.num_leaves();
        CellFunction::from_vec_unchecked(tree, vec![c; n])
    }

    pub fn from_fn(tree: Arc<MeasureTree>, f: impl FnMut(usize) -> f64) -> Result<Self> {
        let values = (0..tree.num_leaves()).map(f).collect();
        CellFunction::new(tree, values)
    }

    /// Indicator of the cell `node`.
    pub fn indicator(tree: Arc<MeasureTree>, node: NodeId) -> Result<Self> {
        tree.check(node)?;
        let range = tree.leaf_range(node);
        let n = tree.num_leaves();
        let values = (0..n).map(|i| if range.contains(&i) { 1.0 } else { 0.0 }).collect();
        Ok(CellFunction::from_vec_unchecked(tree, values))
    }

    pub fn tree(&self) -> &Arc<MeasureTree> {
        &self.tree
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> CellFunction {
        let values = self.values.iter().map(|&v| f(v)).collect();
        CellFunction::from_vec_unchecked(self.tree.clone(), values)
    }

    pub fn abs(&self) -> CellFunction {
        self.map(f64::abs)
    }

    pub fn scaled(&self, alpha: f64) -> CellFunction {
        self.map(|v| alpha * v)
    }

    /// `f · 1_Q`.
    pub fn restrict(&self, node: NodeId) -> CellFunction {
        let range = self.tree.leaf_range(node);
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| if range.contains(&i) { v } else { 0.0 })
            .collect();
        CellFunction::from_vec_unchecked(self.tree.clone(), values)
    }

    /// `∫_Q f dμ` for every node, accumulated bottom-up.
    pub fn integrals(&self) -> Vec<f64> {
        node_integrals(&self.tree, &self.values)
    }

    /// `⟨f⟩_Q` for every node.
    pub fn averages(&self) -> Vec<f64> {
        node_averages(&self.tree, &self.values)
    }

    pub fn integral(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| v * self.tree.leaf_measure(i))
            .sum()
    }

    pub fn l1_norm(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| v.abs() * self.tree.leaf_measure(i))
            .sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// `∫ f g dμ`; panics when the trees differ.
    pub fn inner(&self, other: &CellFunction) -> f64 {
        assert!(same_tree(&self.tree, &other.tree), "tree mismatch");
        self.values
            .iter()
            .zip(&other.values)
            .enumerate()
            .map(|(i, (a, b))| a * b * self.tree.leaf_measure(i))
            .sum()
    }

    /// Pointwise `self − other`.
    pub fn sub(&self, other: &CellFunction) -> Result<CellFunction> {
        ensure_same_tree(&self.tree, &other.tree)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(CellFunction::from_vec_unchecked(self.tree.clone(), values))
    }

    /// Pointwise `self + other`.
    pub fn add(&self, other: &CellFunction) -> Result<CellFunction> {
        ensure_same_tree(&self.tree, &other.tree)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Ok(CellFunction::from_vec_unchecked(self.tree.clone(), values))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub(crate) fn node_integrals(tree: &MeasureTree, leaf_values: &[f64]) -> Vec<f64> {
    let mut integral = vec![0.0; tree.len()];
    for v in tree.nodes().rev() {
        integral[v.0] = match tree.leaf_index(v) {
            Some(i) => leaf_values[i] * tree.measure(v),
            None => tree.children(v).iter().map(|c| integral[c.0]).sum(),
        };
    }
    integral
}

pub(crate) fn node_averages(tree: &MeasureTree, leaf_values: &[f64]) -> Vec<f64> {
    let mut avg = node_integrals(tree, leaf_values);
    for v in tree.nodes() {
        avg[v.0] /= tree.measure(v);
    }
    avg
}

/// `⟨f⟩_Q = μ(Q)^{-1} Σ_{leaves ℓ ⊆ Q} f(ℓ) μ(ℓ)`.
pub fn average(f: &CellFunction, q: NodeId) -> Result<f64> {
    let tree = f.tree();
    tree.check(q)?;
    let sum: f64 = tree
        .leaf_range(q)
        .map(|i| f.values[i] * tree.leaf_measure(i))
        .sum();
    Ok(sum / tree.measure(q))
}

/// `E(f | 𝒬_n)`: the level-`n` cell averages spread over their leaves. Leaves
/// above level `n` persist unchanged into the finer partitions.
pub fn conditional_expectation(f: &CellFunction, n: u32) -> Result<CellFunction> {
    let tree = f.tree();
    if n > tree.depth() {
        return Err(Error::LevelOutOfRange {
            level: n,
            depth: tree.depth(),
        });
    }
    let avg = f.averages();
    let values = tree
        .leaves()
        .iter()
        .map(|&leaf| avg[tree.ancestor_at_level(leaf, n).0])
        .collect();
    Ok(CellFunction::from_vec_unchecked(tree.clone(), values))
}

/// `Δ_P f = Σ_{Q ∈ ch(P)} 1_Q (⟨f⟩_Q − ⟨f⟩_P)`.
pub fn martingale_difference(f: &CellFunction, p: NodeId) -> Result<CellFunction> {
    let tree = f.tree();
    tree.check(p)?;
    if tree.is_leaf(p) {
        return Err(Error::LeafNode(p));
    }
    let mut values = vec![0.0; tree.num_leaves()];
    let parent_avg = average(f, p)?;
    for &c in tree.children(p) {
        let d = average(f, c)? - parent_avg;
        for i in tree.leaf_range(c) {
            values[i] = d;
        }
    }
    Ok(CellFunction::from_vec_unchecked(tree.clone(), values))
}
