use std::sync::Arc;

use serde::Serialize;

use crate::error::Result;
use crate::function::{ensure_same_tree, CellFunction};
use crate::tree::{MeasureTree, NodeId};

/// Slack allowed on the ½-packing comparison.
pub const SPARSE_SLACK: f64 = 1e-12;

/// A set of cells defining `𝖲 f = Σ_{P ∈ 𝒮} ⟨f⟩_P 1_P`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCollection {
    tree: Arc<MeasureTree>,
    members: Vec<NodeId>,
    is_member: Vec<bool>,
}

/// Outcome of a ½-packing check. The witness is the worst member when the
/// check fails.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparseReport<W = NodeId> {
    pub valid: bool,
    pub worst_ratio: f64,
    pub witness: Option<W>,
}

impl SparseCollection {
    pub fn new(tree: Arc<MeasureTree>, members: impl IntoIterator<Item = NodeId>) -> Result<Self> {
        let mut is_member = vec![false; tree.len()];
        for m in members {
            tree.check(m)?;
            is_member[m.0] = true;
        }
        let members = tree.nodes().filter(|v| is_member[v.0]).collect();
        Ok(SparseCollection {
            tree,
            members,
            is_member,
        })
    }

    pub fn empty(tree: Arc<MeasureTree>) -> Self {
        let n = tree.len();
        SparseCollection {
            tree,
            members: Vec::new(),
            is_member: vec![false; n],
        }
    }

    pub fn tree(&self) -> &Arc<MeasureTree> {
        &self.tree
    }

    /// Members in preorder.
    pub fn members(&self) -> &[NodeId] {
        &self.members
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.is_member.get(node.0).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Nearest strict ancestor of each member that is itself a member.
    pub fn member_parents(&self) -> Vec<(NodeId, Option<NodeId>)> {
        let tree = &self.tree;
        let mut nearest: Vec<Option<NodeId>> = vec![None; tree.len()];
        let mut out = Vec::with_capacity(self.members.len());
        for v in tree.nodes() {
            let above = tree.parent(v).and_then(|p| {
                if self.is_member[p.0] {
                    Some(p)
                } else {
                    nearest[p.0]
                }
            });
            nearest[v.0] = above;
            if self.is_member[v.0] {
                out.push((v, above));
            }
        }
        out
    }

    /// `𝖲 f` computed from precomputed node averages.
    pub(crate) fn apply_averages(&self, avg: &[f64]) -> Vec<f64> {
        let tree = &self.tree;
        let mut acc = vec![0.0; tree.len()];
        let mut out = vec![0.0; tree.num_leaves()];
        for v in tree.nodes() {
            let above = tree.parent(v).map_or(0.0, |p| acc[p.0]);
            acc[v.0] = if self.is_member[v.0] { above + avg[v.0] } else { above };
            if let Some(li) = tree.leaf_index(v) {
                out[li] = acc[v.0];
            }
        }
        out
    }
}

/// `𝖲 f = Σ_{P ∈ 𝒮} ⟨f⟩_P 1_P`.
pub fn sparse_apply(s: &SparseCollection, f: &CellFunction) -> Result<CellFunction> {
    ensure_same_tree(s.tree(), f.tree())?;
    let out = s.apply_averages(&f.averages());
    Ok(CellFunction::from_vec_unchecked(f.tree().clone(), out))
}

/// Checks `Σ_{Q ∈ ch_𝒮(P)} μ(Q) ≤ ½ μ(P)` at every member `P`.
pub fn check_sparse(s: &SparseCollection) -> SparseReport {
    let tree = s.tree();
    let mut child_mass = vec![0.0; tree.len()];
    for (v, above) in s.member_parents() {
        if let Some(p) = above {
            child_mass[p.0] += tree.measure(v);
        }
    }
    let mut worst = 0.0f64;
    let mut witness = None;
    for &p in s.members() {
        let ratio = child_mass[p.0] / tree.measure(p);
        if ratio > worst {
            worst = ratio;
            witness = Some(p);
        }
    }
    let valid = worst <= 0.5 + SPARSE_SLACK;
    SparseReport {
        valid,
        worst_ratio: worst,
        witness: if valid { None } else { witness },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{build_tree, TreeSpec};

    fn binary(depth: u32) -> Arc<MeasureTree> {
        Arc::new(build_tree(&TreeSpec::uniform(depth, 2)).unwrap())
    }

    /// Node of the uniform binary tree for the dyadic interval `[k 2^-j, (k+1) 2^-j)`.
    fn dyadic(t: &MeasureTree, j: u32, k: usize) -> NodeId {
        let mut v = t.root();
        for bit in (0..j).rev() {
            v = t.children(v)[(k >> bit) & 1];
        }
        v
    }

    #[test]
    fn sparse_apply_examples() {
        let t = binary(2);
        let one = CellFunction::constant(t.clone(), 1.0);
        let s = SparseCollection::new(t.clone(), [t.root()]).unwrap();
        assert_eq!(sparse_apply(&s, &one).unwrap().values(), &[1.0; 4]);

        let empty = SparseCollection::empty(t.clone());
        assert_eq!(sparse_apply(&empty, &one).unwrap().values(), &[0.0; 4]);

        let f = CellFunction::new(t.clone(), vec![4.0, 0.0, 2.0, 2.0]).unwrap();
        let s = SparseCollection::new(t.clone(), [t.root(), t.leaf(0)]).unwrap();
        assert_eq!(sparse_apply(&s, &f).unwrap().values(), &[6.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn check_sparse_examples() {
        let t = binary(2);
        let alone = SparseCollection::new(t.clone(), [dyadic(&t, 0, 0)]).unwrap();
        let r = check_sparse(&alone);
        assert!(r.valid);
        assert_eq!(r.worst_ratio, 0.0);

        let quarters = SparseCollection::new(
            t.clone(),
            [dyadic(&t, 0, 0), dyadic(&t, 2, 0), dyadic(&t, 2, 2)],
        )
        .unwrap();
        let r = check_sparse(&quarters);
        assert!(r.valid);
        assert_eq!(r.worst_ratio, 0.5);

        let halves = SparseCollection::new(
            t.clone(),
            [dyadic(&t, 0, 0), dyadic(&t, 1, 0), dyadic(&t, 1, 1)],
        )
        .unwrap();
        let r = check_sparse(&halves);
        assert!(!r.valid);
        assert_eq!(r.worst_ratio, 1.0);
        assert_eq!(r.witness, Some(t.root()));
    }

    #[test]
    fn only_maximal_members_count_as_children() {
        // [0,1) ⊃ [0,½) ⊃ [0,¼): the quarter is a child of the half, not of the root.
        let t = binary(2);
        let s = SparseCollection::new(
            t.clone(),
            [dyadic(&t, 0, 0), dyadic(&t, 1, 0), dyadic(&t, 2, 0)],
        )
        .unwrap();
        let r = check_sparse(&s);
        assert!(r.valid);
        assert_eq!(r.worst_ratio, 0.5);
    }

    #[test]
    fn unknown_member_rejected() {
        let t = binary(1);
        assert!(SparseCollection::new(t, [NodeId(99)]).is_err());
    }
}
