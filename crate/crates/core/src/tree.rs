//! Finite trees of measurable cells.
//!
//! A [`MeasureTree`] stores the filtration as an arena numbered in preorder, so
//! the subtree of a node is a contiguous id range and the leaves below a node
//! are a contiguous range of leaf indices. Leaves are the atoms; every
//! [`CellFunction`](crate::CellFunction) is a vector indexed by leaf index.

use std::fmt;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on declared internal measures relative to the sum of their children.
pub const MEASURE_RTOL: f64 = 1e-12;

const MAX_NESTING: usize = 128;
const MAX_LEAVES: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeKind {
    Uniform,
    Explicit,
    Random,
}

/// One node of an explicit tree description: a bare number is a leaf measure,
/// a list is an internal node, and a table may also declare the node's measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeasureSpec {
    Leaf(f64),
    Children(Vec<MeasureSpec>),
    Node {
        measure: f64,
        children: Vec<MeasureSpec>,
    },
}

/// Text description of a tree, read from TOML.
///
/// ```toml
/// kind = "explicit"
/// leaf_measures = [0.2, [0.15, 0.15], 0.5]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeSpec {
    pub kind: TreeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branching: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaf_measures: Option<MeasureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_measure: Option<f64>,
    /// Random trees: probability that a non-root node above `depth` splits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_prob: Option<f64>,
    /// Random trees: leaf budget.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_leaves: Option<usize>,
}

impl TreeSpec {
    pub fn uniform(depth: u32, branching: u32) -> Self {
        TreeSpec {
            kind: TreeKind::Uniform,
            depth: Some(depth),
            branching: Some(branching),
            leaf_measures: None,
            seed: None,
            total_measure: None,
            split_prob: None,
            max_leaves: None,
        }
    }

    pub fn random(depth: u32, branching: u32, max_leaves: usize, seed: u64) -> Self {
        TreeSpec {
            kind: TreeKind::Random,
            depth: Some(depth),
            branching: Some(branching),
            leaf_measures: None,
            seed: Some(seed),
            total_measure: None,
            split_prob: None,
            max_leaves: Some(max_leaves),
        }
    }

    pub fn explicit(root: MeasureSpec) -> Self {
        TreeSpec {
            kind: TreeKind::Explicit,
            depth: None,
            branching: None,
            leaf_measures: Some(root),
            seed: None,
            total_measure: None,
            split_prob: None,
            max_leaves: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        if nesting_depth(text) > MAX_NESTING {
            return Err(Error::InvalidSpec(format!(
                "nesting deeper than {MAX_NESTING} levels"
            )));
        }
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("tree spec serializes")
    }
}

fn nesting_depth(text: &str) -> usize {
    let (mut depth, mut max) = (0usize, 0usize);
    for b in text.bytes() {
        match b {
            b'[' | b'{' => {
                depth += 1;
                max = max.max(depth);
            }
            b']' | b'}' => depth = depth.saturating_sub(1),
            _ => {}
        }
    }
    max
}

/// Nodes before preorder renumbering.
struct Arena {
    children: Vec<Vec<usize>>,
    leaf_measure: Vec<f64>,
    declared: Vec<Option<f64>>,
}

impl Arena {
    fn with_root() -> Self {
        Arena {
            children: vec![Vec::new()],
            leaf_measure: vec![0.0],
            declared: vec![None],
        }
    }

    fn push(&mut self, parent: usize, measure: f64) -> usize {
        let id = self.children.len();
        self.children.push(Vec::new());
        self.leaf_measure.push(measure);
        self.declared.push(None);
        self.children[parent].push(id);
        id
    }
}

/// A finite rooted tree of cells with positive measures.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureTree {
    parent: Vec<Option<NodeId>>,
    children: Vec<Vec<NodeId>>,
    child_pos: Vec<usize>,
    measure: Vec<f64>,
    level: Vec<u32>,
    subtree_end: Vec<usize>,
    leaf_start: Vec<usize>,
    leaf_end: Vec<usize>,
    leaves: Vec<NodeId>,
    leaf_index: Vec<Option<usize>>,
    depth: u32,
}

/// Builds a tree from its text description. Deterministic given the spec
/// (random trees draw from a ChaCha stream seeded by `seed`).
pub fn build_tree(spec: &TreeSpec) -> Result<MeasureTree> {
    let total = spec.total_measure.unwrap_or(1.0);
    match spec.kind {
        TreeKind::Uniform => {
            check_total(total)?;
            let depth = spec.depth.unwrap_or(1);
            let branching = spec.branching.unwrap_or(2);
            if branching < 2 {
                return Err(Error::InvalidSpec("branching must be at least 2".into()));
            }
            let leaves = (branching as f64).powi(depth as i32);
            if leaves > MAX_LEAVES as f64 {
                return Err(Error::InvalidSpec(format!(
                    "uniform tree would have {leaves} leaves (limit {MAX_LEAVES})"
                )));
            }
            Ok(uniform_tree(depth, branching as usize, total))
        }
        TreeKind::Random => {
            check_total(total)?;
            let depth = spec.depth.unwrap_or(6);
            let branching = spec.branching.unwrap_or(2);
            let split_prob = spec.split_prob.unwrap_or(0.7);
            let max_leaves = spec.max_leaves.unwrap_or(4096);
            if branching < 2 {
                return Err(Error::InvalidSpec("branching must be at least 2".into()));
            }
            if depth as usize > MAX_NESTING {
                return Err(Error::InvalidSpec(format!("depth {depth} too large")));
            }
            if !(0.0..=1.0).contains(&split_prob) {
                return Err(Error::InvalidSpec("split_prob must lie in [0, 1]".into()));
            }
            if max_leaves == 0 || max_leaves > MAX_LEAVES {
                return Err(Error::InvalidSpec(format!(
                    "max_leaves must lie in 1..={MAX_LEAVES}"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.unwrap_or(0));
            Ok(random_tree(
                &mut rng, depth, branching, split_prob, max_leaves, total,
            ))
        }
        TreeKind::Explicit => {
            let root = spec
                .leaf_measures
                .as_ref()
                .ok_or_else(|| Error::InvalidSpec("explicit tree needs leaf_measures".into()))?;
            let mut arena = Arena::with_root();
            match root {
                // A one-element list holding a number describes a single-cell tree.
                MeasureSpec::Children(items) if items.len() == 1 => match &items[0] {
                    MeasureSpec::Leaf(m) => arena.leaf_measure[0] = *m,
                    _ => fill_arena(&mut arena, 0, root)?,
                },
                _ => fill_arena(&mut arena, 0, root)?,
            }
            if let Some(total) = spec.total_measure {
                if arena.declared[0].is_none() {
                    arena.declared[0] = Some(total);
                }
            }
            MeasureTree::from_arena(&arena)
        }
    }
}

fn check_total(total: f64) -> Result<()> {
    if total.is_finite() && total > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositiveMeasure {
            location: "total_measure".into(),
            value: total,
        })
    }
}

fn fill_arena(arena: &mut Arena, at: usize, spec: &MeasureSpec) -> Result<()> {
    let children = match spec {
        MeasureSpec::Leaf(m) => {
            arena.leaf_measure[at] = *m;
            return Ok(());
        }
        MeasureSpec::Children(c) => c,
        MeasureSpec::Node { measure, children } => {
            arena.declared[at] = Some(*measure);
            children
        }
    };
    if children.len() < 2 {
        return Err(Error::InvalidSpec(
            "every internal node needs at least two children".into(),
        ));
    }
    if arena.children.len() + children.len() > 2 * MAX_LEAVES {
        return Err(Error::InvalidSpec("tree too large".into()));
    }
    for child in children {
        let id = arena.push(at, 0.0);
        fill_arena(arena, id, child)?;
    }
    Ok(())
}

fn uniform_tree(depth: u32, branching: usize, total: f64) -> MeasureTree {
    let mut arena = Arena::with_root();
    let mut frontier = vec![0usize];
    let mut measure = total;
    arena.leaf_measure[0] = total;
    for _ in 0..depth {
        measure /= branching as f64;
        let mut next = Vec::with_capacity(frontier.len() * branching);
        for &p in &frontier {
            for _ in 0..branching {
                next.push(arena.push(p, measure));
            }
        }
        frontier = next;
    }
    MeasureTree::from_arena(&arena).expect("uniform trees are valid")
}

fn random_tree(
    rng: &mut ChaCha8Rng,
    depth: u32,
    branching: u32,
    split_prob: f64,
    max_leaves: usize,
    total: f64,
) -> MeasureTree {
    let mut arena = Arena::with_root();
    arena.leaf_measure[0] = total;
    let mut leaves = 1usize;
    let mut queue = std::collections::VecDeque::from([(0usize, 0u32)]);
    while let Some((node, level)) = queue.pop_front() {
        if level >= depth {
            continue;
        }
        let k = rng.random_range(2..=branching) as usize;
        let split = level == 0 || rng.random::<f64>() < split_prob;
        if !split || leaves + k - 1 > max_leaves {
            continue;
        }
        leaves += k - 1;
        let weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        let wsum: f64 = weights.iter().sum();
        let parent_measure = arena.leaf_measure[node];
        for w in weights {
            let child = arena.push(node, parent_measure * w / wsum);
            queue.push_back((child, level + 1));
        }
    }
    MeasureTree::from_arena(&arena).expect("random trees are valid")
}

impl MeasureTree {
    fn from_arena(arena: &Arena) -> Result<Self> {
        let n = arena.children.len();
        let mut tree = MeasureTree {
            parent: vec![None; n],
            children: vec![Vec::new(); n],
            child_pos: vec![0; n],
            measure: vec![0.0; n],
            level: vec![0; n],
            subtree_end: vec![0; n],
            leaf_start: vec![0; n],
            leaf_end: vec![0; n],
            leaves: Vec::new(),
            leaf_index: vec![None; n],
            depth: 0,
        };
        let mut declared = vec![None; n];
        // (arena index, parent id, position among siblings)
        let mut stack = vec![(0usize, None::<usize>, 0usize)];
        let mut next = 0usize;
        while let Some((a, parent, pos)) = stack.pop() {
            let id = next;
            next += 1;
            declared[id] = arena.declared[a];
            tree.child_pos[id] = pos;
            if let Some(p) = parent {
                tree.parent[id] = Some(NodeId(p));
                tree.children[p].push(NodeId(id));
                tree.level[id] = tree.level[p] + 1;
            }
            let kids = &arena.children[a];
            if kids.is_empty() {
                let m = arena.leaf_measure[a];
                if !(m.is_finite() && m > 0.0) {
                    return Err(Error::NonPositiveMeasure {
                        location: format!("leaf node {id}"),
                        value: m,
                    });
                }
                tree.measure[id] = m;
                tree.leaf_index[id] = Some(tree.leaves.len());
                tree.leaves.push(NodeId(id));
            }
            for (i, &c) in kids.iter().enumerate().rev() {
                stack.push((c, Some(id), i));
            }
        }
        // Children ids exceed their parent's, so a reverse sweep is bottom-up.
        for id in (0..n).rev() {
            if let Some(li) = tree.leaf_index[id] {
                tree.subtree_end[id] = id + 1;
                tree.leaf_start[id] = li;
                tree.leaf_end[id] = li + 1;
                continue;
            }
            let kids = &tree.children[id];
            let sum: f64 = kids.iter().map(|c| tree.measure[c.0]).sum();
            if let Some(d) = declared[id] {
                if !(d.is_finite() && d > 0.0) {
                    return Err(Error::NonPositiveMeasure {
                        location: format!("node {id}"),
                        value: d,
                    });
                }
                if (d - sum).abs() > MEASURE_RTOL * d {
                    return Err(Error::MeasureMismatch {
                        location: format!("node {id}"),
                        declared: d,
                        children_sum: sum,
                    });
                }
            }
            // Renormalize to the exact child sum.
            tree.measure[id] = sum;
            let last = *kids.last().expect("internal node has children");
            tree.subtree_end[id] = tree.subtree_end[last.0];
            tree.leaf_start[id] = tree.leaf_start[kids[0].0];
            tree.leaf_end[id] = tree.leaf_end[last.0];
        }
        tree.depth = tree.level.iter().copied().max().unwrap_or(0);
        Ok(tree)
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves.len()
    }

    /// Deepest level present in the tree.
    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node.0 < self.len()
    }

    pub fn check(&self, node: NodeId) -> Result<NodeId> {
        if self.contains(node) {
            Ok(node)
        } else {
            Err(Error::UnknownNode(node))
        }
    }

    pub fn nodes(&self) -> impl DoubleEndedIterator<Item = NodeId> + ExactSizeIterator {
        (0..self.len()).map(NodeId)
    }

    pub fn internal_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes().filter(|&v| !self.is_leaf(v))
    }

    pub fn parent(&self, node: NodeId) -> Option<NodeId> {
        self.parent[node.0]
    }

    pub fn children(&self, node: NodeId) -> &[NodeId] {
        &self.children[node.0]
    }

    /// Index of `node` among its parent's children.
    pub fn child_position(&self, node: NodeId) -> usize {
        self.child_pos[node.0]
    }

    pub fn is_leaf(&self, node: NodeId) -> bool {
        self.children[node.0].is_empty()
    }

    pub fn measure(&self, node: NodeId) -> f64 {
        self.measure[node.0]
    }

    pub fn level(&self, node: NodeId) -> u32 {
        self.level[node.0]
    }

    /// Node ids of the subtree rooted at `node`, in preorder.
    pub fn subtree(&self, node: NodeId) -> Range<usize> {
        node.0..self.subtree_end[node.0]
    }

    /// Leaf indices below `node`.
    pub fn leaf_range(&self, node: NodeId) -> Range<usize> {
        self.leaf_start[node.0]..self.leaf_end[node.0]
    }

    /// True when `inner` lies in the subtree of `outer` (inclusive).
    pub fn is_descendant(&self, inner: NodeId, outer: NodeId) -> bool {
        self.subtree(outer).contains(&inner.0)
    }

    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    pub fn leaf(&self, index: usize) -> NodeId {
        self.leaves[index]
    }

    pub fn leaf_index(&self, node: NodeId) -> Option<usize> {
        self.leaf_index[node.0]
    }

    pub fn leaf_measure(&self, index: usize) -> f64 {
        self.measure[self.leaves[index].0]
    }

    pub fn leaf_measures(&self) -> Vec<f64> {
        self.leaves.iter().map(|l| self.measure[l.0]).collect()
    }

    /// Ancestor of `node` at `level`, or `node` itself when it sits at or above it.
    pub fn ancestor_at_level(&self, mut node: NodeId, level: u32) -> NodeId {
        while self.level[node.0] > level {
            node = self.parent[node.0].expect("non-root has parent");
        }
        node
    }

    /// Nodes from the root down to `node`, inclusive.
    pub fn path_from_root(&self, node: NodeId) -> Vec<NodeId> {
        let mut path = vec![node];
        let mut cur = node;
        while let Some(p) = self.parent[cur.0] {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// Serializes the tree as an explicit spec that rebuilds it bit for bit.
    pub fn to_spec(&self) -> TreeSpec {
        TreeSpec::explicit(self.node_spec(self.root()))
    }

    fn node_spec(&self, node: NodeId) -> MeasureSpec {
        if self.is_leaf(node) {
            if node == self.root() {
                return MeasureSpec::Children(vec![MeasureSpec::Leaf(self.measure(node))]);
            }
            return MeasureSpec::Leaf(self.measure(node));
        }
        MeasureSpec::Children(
            self.children(node)
                .iter()
                .map(|&c| self.node_spec(c))
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn explicit(text: &str) -> Result<MeasureTree> {
        build_tree(&TreeSpec::from_toml_str(text)?)
    }

    #[test]
    fn uniform_binary_depth_one_splits_in_half() {
        let t = build_tree(&TreeSpec::uniform(1, 2)).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.measure(t.root()), 1.0);
        for &c in t.children(t.root()) {
            assert_eq!(t.measure(c), 0.5);
        }
    }

    #[test]
    fn explicit_leaf_measures_sum_to_root() {
        let t = explicit("kind = \"explicit\"\nleaf_measures = [0.2, 0.3, 0.5]\n").unwrap();
        assert_eq!(t.num_leaves(), 3);
        assert!((t.measure(t.root()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_leaf_measure_is_rejected() {
        let err = explicit("kind = \"explicit\"\nleaf_measures = [0.0, 1.0]\n").unwrap_err();
        assert!(matches!(err, Error::NonPositiveMeasure { .. }));
    }

    #[test]
    fn declared_measure_must_match_children() {
        let ok = "kind = \"explicit\"\nleaf_measures = [{ measure = 0.5, children = [0.25, 0.25] }, 0.5]\n";
        assert!(explicit(ok).is_ok());
        let bad = "kind = \"explicit\"\nleaf_measures = [{ measure = 0.6, children = [0.25, 0.25] }, 0.5]\n";
        assert!(matches!(
            explicit(bad).unwrap_err(),
            Error::MeasureMismatch { .. }
        ));
        let total = "kind = \"explicit\"\ntotal_measure = 2.0\nleaf_measures = [0.5, 0.5]\n";
        assert!(matches!(
            explicit(total).unwrap_err(),
            Error::MeasureMismatch { .. }
        ));
    }

    #[test]
    fn single_child_is_rejected() {
        assert!(explicit("kind = \"explicit\"\nleaf_measures = [[0.5], 0.5]\n").is_err());
    }

    #[test]
    fn single_cell_tree() {
        let t = explicit("kind = \"explicit\"\nleaf_measures = [2.5]\n").unwrap();
        assert_eq!(t.len(), 1);
        assert!(t.is_leaf(t.root()));
        assert_eq!(t.measure(t.root()), 2.5);
        let back = build_tree(&t.to_spec()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn preorder_layout() {
        let t = explicit("kind = \"explicit\"\nleaf_measures = [[0.1, 0.2], 0.3, [0.15, 0.25]]\n")
            .unwrap();
        assert_eq!(t.len(), 8);
        let root = t.root();
        assert_eq!(t.subtree(root), 0..8);
        assert_eq!(t.leaf_range(root), 0..5);
        let first = t.children(root)[0];
        assert_eq!(t.leaf_range(first), 0..2);
        assert_eq!(t.level(t.leaf(4)), 2);
        assert_eq!(t.depth(), 2);
        assert!(t.is_descendant(t.leaf(1), first));
        assert!(!t.is_descendant(t.leaf(2), first));
        assert_eq!(t.child_position(t.children(root)[2]), 2);
    }

    #[test]
    fn random_trees_are_deterministic_and_valid() {
        let spec = TreeSpec::random(8, 4, 500, 7);
        let a = build_tree(&spec).unwrap();
        let b = build_tree(&spec).unwrap();
        assert_eq!(a, b);
        assert!(a.num_leaves() <= 500);
        for v in a.internal_nodes() {
            assert!(a.children(v).len() >= 2);
            let s: f64 = a.children(v).iter().map(|&c| a.measure(c)).sum();
            assert_eq!(s, a.measure(v));
            for &c in a.children(v) {
                assert_eq!(a.level(c), a.level(v) + 1);
            }
        }
    }

    #[test]
    fn spec_round_trip_is_exact() {
        let t = build_tree(&TreeSpec::random(6, 3, 200, 3)).unwrap();
        let text = t.to_spec().to_toml_string();
        let back = build_tree(&TreeSpec::from_toml_str(&text).unwrap()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn deep_nesting_is_rejected_before_parsing() {
        let text = format!(
            "kind = \"explicit\"\nleaf_measures = {}1.0{}\n",
            "[".repeat(500),
            "]".repeat(500)
        );
        assert!(TreeSpec::from_toml_str(&text).is_err());
    }
}
