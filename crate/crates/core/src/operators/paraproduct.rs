use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::function::{ensure_same_tree, CellFunction};
use crate::tree::{MeasureTree, NodeId};

use super::transform::chain_sums;

const NORM_SLACK: f64 = 1e-12;
const INTEGRAL_RTOL: f64 = 1e-9;

/// Functions `b_Q` in the difference spaces of internal nodes, normalized so
/// that `sup_P μ(P)^{-1} Σ_{Q ⊆ P} ‖b_Q‖_∞² μ(Q) ≤ 1`.
///
/// Each `b_Q` is constant on the children of `Q`; it is stored as one value per
/// child.
#[derive(Debug, Clone, PartialEq)]
pub struct CarlesonFamily {
    tree: Arc<MeasureTree>,
    coeffs: Vec<Option<Vec<f64>>>,
}

impl CarlesonFamily {
    /// Validates the difference-space condition and the Carleson normalization.
    pub fn new(tree: Arc<MeasureTree>, entries: Vec<(NodeId, Vec<f64>)>) -> Result<Self> {
        let family = CarlesonFamily::unnormalized(tree, entries)?;
        let norm = carleson_norm(&family);
        if norm > 1.0 + NORM_SLACK {
            return Err(Error::CarlesonViolation(norm));
        }
        Ok(family)
    }

    /// Rescales the whole family by `carleson_norm^{-1/2}` so the normalization binds.
    pub fn normalized(tree: Arc<MeasureTree>, entries: Vec<(NodeId, Vec<f64>)>) -> Result<Self> {
        let mut family = CarlesonFamily::unnormalized(tree, entries)?;
        let norm = carleson_norm(&family);
        if norm > 0.0 {
            let scale = norm.sqrt().recip();
            for c in family.coeffs.iter_mut().flatten() {
                for v in c.iter_mut() {
                    *v *= scale;
                }
            }
        }
        Ok(family)
    }

    /// Builds from full leaf functions, checking that each `b_Q` is supported on
    /// `Q`, constant on its children, and has zero integral.
    pub fn from_functions(
        tree: Arc<MeasureTree>,
        functions: Vec<(NodeId, CellFunction)>,
    ) -> Result<Self> {
        let mut entries = Vec::with_capacity(functions.len());
        for (q, b) in functions {
            tree.check(q)?;
            ensure_same_tree(&tree, b.tree())?;
            if tree.is_leaf(q) {
                return Err(Error::LeafNode(q));
            }
            let inside = tree.leaf_range(q);
            if b.values()
                .iter()
                .enumerate()
                .any(|(i, &v)| v != 0.0 && !inside.contains(&i))
            {
                return Err(Error::NotADifference {
                    node: q,
                    reason: "not supported on the node".into(),
                });
            }
            let mut child_values = Vec::with_capacity(tree.children(q).len());
            for &c in tree.children(q) {
                let vals = &b.values()[tree.leaf_range(c)];
                let first = vals[0];
                if vals.iter().any(|&v| v != first) {
                    return Err(Error::NotADifference {
                        node: q,
                        reason: format!("not constant on child {c}"),
                    });
                }
                child_values.push(first);
            }
            entries.push((q, child_values));
        }
        CarlesonFamily::new(tree, entries)
    }

    fn unnormalized(tree: Arc<MeasureTree>, entries: Vec<(NodeId, Vec<f64>)>) -> Result<Self> {
        let mut coeffs = vec![None; tree.len()];
        for (q, values) in entries {
            tree.check(q)?;
            if tree.is_leaf(q) {
                return Err(Error::LeafNode(q));
            }
            let kids = tree.children(q);
            if values.len() != kids.len() {
                return Err(Error::NotADifference {
                    node: q,
                    reason: format!("{} child values for {} children", values.len(), kids.len()),
                });
            }
            if let Some(&v) = values.iter().find(|v| !v.is_finite()) {
                return Err(Error::NonFinite { node: q, value: v });
            }
            let integral: f64 = kids
                .iter()
                .zip(&values)
                .map(|(c, v)| v * tree.measure(*c))
                .sum();
            let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())) * tree.measure(q);
            if integral.abs() > INTEGRAL_RTOL * scale {
                return Err(Error::NotADifference {
                    node: q,
                    reason: format!("integral {integral} is not zero"),
                });
            }
            coeffs[q.0] = Some(values);
        }
        Ok(CarlesonFamily { tree, coeffs })
    }

    /// A random family: each internal node carries a random difference with
    /// probability `density`; the result is normalized.
    pub fn random(tree: Arc<MeasureTree>, rng: &mut impl Rng, density: f64) -> Self {
        let mut entries = Vec::new();
        for q in tree.internal_nodes() {
            if rng.random::<f64>() >= density {
                continue;
            }
            let kids = tree.children(q);
            let raw: Vec<f64> = kids.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
            let mean = kids
                .iter()
                .zip(&raw)
                .map(|(c, v)| v * tree.measure(*c))
                .sum::<f64>()
                / tree.measure(q);
            entries.push((q, raw.into_iter().map(|v| v - mean).collect()));
        }
        CarlesonFamily::normalized(tree, entries).expect("random differences are valid")
    }

    pub fn tree(&self) -> &Arc<MeasureTree> {
        &self.tree
    }

    /// Child values of `b_Q`, if present.
    pub fn coefficients(&self, q: NodeId) -> Option<&[f64]> {
        self.coeffs.get(q.0)?.as_deref()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_some())
            .map(|(i, _)| NodeId(i))
    }

    /// `b_Q` as a leaf function.
    pub fn function(&self, q: NodeId) -> Option<CellFunction> {
        let c = self.coefficients(q)?;
        let mut values = vec![0.0; self.tree.num_leaves()];
        for (&child, &v) in self.tree.children(q).iter().zip(c) {
            for i in self.tree.leaf_range(child) {
                values[i] = v;
            }
        }
        Some(CellFunction::from_vec_unchecked(self.tree.clone(), values))
    }

    pub fn sup_norm(&self, q: NodeId) -> f64 {
        self.coefficients(q)
            .map_or(0.0, |c| c.iter().fold(0.0, |m, v| m.max(v.abs())))
    }

    /// Value of `b_{parent(c)}` on the child `c`.
    pub(crate) fn on_child(&self, q: NodeId, c: NodeId) -> f64 {
        self.coefficients(q)
            .map_or(0.0, |vals| vals[self.tree.child_position(c)])
    }
}

/// `sup_P μ(P)^{-1} Σ_{Q ⊆ P} ‖b_Q‖_∞² μ(Q)` over internal `P`.
pub fn carleson_norm(b: &CarlesonFamily) -> f64 {
    let tree = b.tree();
    let mut mass = vec![0.0; tree.len()];
    for v in tree.nodes().rev() {
        let own = b.sup_norm(v).powi(2) * tree.measure(v);
        let below: f64 = tree.children(v).iter().map(|c| mass[c.0]).sum();
        mass[v.0] = own + below;
    }
    tree.internal_nodes()
        .map(|p| mass[p.0] / tree.measure(p))
        .fold(0.0, f64::max)
}

/// `Π f = Σ_Q ⟨f⟩_Q b_Q`.
pub fn paraproduct(b: &CarlesonFamily, f: &CellFunction) -> Result<CellFunction> {
    paraproduct_within(b, f, f.tree().root())
}

/// `Σ_{Q ⊆ Q0} ⟨f⟩_Q b_Q` on the leaves of `q0`, zero elsewhere.
pub fn paraproduct_within(b: &CarlesonFamily, f: &CellFunction, q0: NodeId) -> Result<CellFunction> {
    ensure_same_tree(b.tree(), f.tree())?;
    let tree = f.tree();
    tree.check(q0)?;
    let avg = f.averages();
    let (sums, _) = chain_sums(tree, q0, 0.0, |q, c| avg[q.0] * b.on_child(q, c));
    let mut values = vec![0.0; tree.num_leaves()];
    values[tree.leaf_range(q0)].copy_from_slice(&sums);
    Ok(CellFunction::from_vec_unchecked(tree.clone(), values))
}
