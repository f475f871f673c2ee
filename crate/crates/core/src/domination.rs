//! Stopping-time construction of sparse collections dominating martingale
//! transforms, their maximal truncations, and paraproducts.
//!
//! The recursion works on localized data `(P, c_P)`: the operator restricted to
//! the differences `Δ_Q`, `Q ⊆ P`, plus a constant carry `c_P` on `P`. At each
//! cell it thresholds the control function `max{M_P f, T_♯ f}` so the
//! exceptional set has at most half the measure of `P`, adds `P` to the
//! collection, and recurses into the maximal cells of the exceptional set.
//!
//! For `x ∈ R`, `R` a maximal exceptional cell, the chain sum at `x` splits as
//!
//! ```text
//! (prefix above R^a) + h_R + F_R(x),
//! ```
//!
//! where the prefix is bounded by the threshold `λ_P` (it is a prefix at a
//! non-exceptional point of `R^a`), `h_R` is the split-off part of the term
//! at `R^a`, and `F_R` is the localized operator on `R`. So
//! `|F_P| ≤ (λ_P + max_R |h_R|) 1_P + Σ_R |F_R| 1_R`, and unrolling gives the
//! reported constant `C = max_P (λ_P + max_R |h_R|) / ⟨|f|⟩_P`. The same bound
//! holds for the maximal prefix, so truncations use the identical recursion.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::function::{ensure_same_tree, node_averages, CellFunction};
use crate::operators::{
    chain_sums, dyadic_maximal_local, sparse_apply, CarlesonFamily, SignSequence,
    SparseCollection,
};
use crate::tree::{MeasureTree, NodeId};

/// Per-cell record of the recursion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelStat {
    /// Threshold `λ` applied to the control function at this cell.
    pub threshold: f64,
    /// `μ(E) / μ(P)`.
    pub exceptional_fraction: f64,
    /// `(λ + head bound) / ⟨|f|⟩_P`.
    pub local_constant: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DominationStats {
    pub recursion_depth: usize,
    pub node_count: usize,
}

#[derive(Debug, Clone)]
pub struct DominationResult {
    pub sparse: SparseCollection,
    pub constant: f64,
    pub levels: BTreeMap<NodeId, LevelStat>,
    pub stats: DominationStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyReport {
    pub ok: bool,
    pub c_needed: f64,
    pub worst_leaf: Option<NodeId>,
}

enum Expansion<'a> {
    Transform { eps: &'a SignSequence },
    Paraproduct { b: &'a CarlesonFamily },
}

struct Recursion<'a> {
    tree: &'a MeasureTree,
    expansion: Expansion<'a>,
    avg: Vec<f64>,
    abs_avg: Vec<f64>,
}

impl Recursion<'_> {
    /// Increment of the chain sum when stepping from `q` to its child `c`.
    fn term(&self, q: NodeId, c: NodeId) -> f64 {
        match self.expansion {
            Expansion::Transform { eps } => eps.get(q) * (self.avg[c.0] - self.avg[q.0]),
            Expansion::Paraproduct { b } => self.avg[q.0] * b.on_child(q, c),
        }
    }

    /// Part of `term(R^a, R)` kept with the localized operator on `R`.
    fn carry(&self, r: NodeId) -> f64 {
        match self.expansion {
            Expansion::Transform { eps } => {
                let p = self.tree.parent(r).expect("recursion cells are proper");
                eps.get(p) * self.avg[r.0]
            }
            Expansion::Paraproduct { .. } => 0.0,
        }
    }

    /// Modulus of the part of `term(R^a, R)` split off from `F_R`.
    fn head(&self, r: NodeId) -> f64 {
        let p = self.tree.parent(r).expect("recursion cells are proper");
        match self.expansion {
            Expansion::Transform { eps } => (eps.get(p) * self.avg[p.0]).abs(),
            Expansion::Paraproduct { b } => (self.avg[p.0] * b.on_child(p, r)).abs(),
        }
    }

    fn run(&self, q0: NodeId) -> DominationResult {
        let tree = self.tree;
        let mut members = Vec::new();
        let mut levels = BTreeMap::new();
        let mut constant = 0.0f64;
        let mut max_depth = 0usize;
        let mut work = vec![(q0, 0.0f64, 1usize)];
        while let Some((p, carry, depth)) = work.pop() {
            if self.abs_avg[p.0] == 0.0 {
                continue;
            }
            let (_, sharp) = chain_sums(tree, p, carry, |q, c| self.term(q, c));
            let maximal = dyadic_maximal_local(tree, p, &self.abs_avg);
            let control: Vec<f64> = sharp.iter().zip(&maximal).map(|(a, b)| a.max(*b)).collect();
            let leaves = tree.leaf_range(p);
            let (threshold, exceptional_mass) =
                choose_threshold(tree, leaves.start, &control, 0.5 * tree.measure(p));
            let stopping = maximal_exceptional_cells(tree, p, &control, threshold);
            let head = stopping.iter().map(|&r| self.head(r)).fold(0.0, f64::max);
            let local = (threshold + head) / self.abs_avg[p.0];
            constant = constant.max(local);
            max_depth = max_depth.max(depth);
            members.push(p);
            levels.insert(
                p,
                LevelStat {
                    threshold,
                    exceptional_fraction: exceptional_mass / tree.measure(p),
                    local_constant: local,
                },
            );
            for r in stopping {
                work.push((r, self.carry(r), depth + 1));
            }
        }
        let node_count = members.len();
        DominationResult {
            sparse: SparseCollection::new(
                std::sync::Arc::new(tree.clone()),
                members,
            )
            .expect("members are tree nodes"),
            constant,
            levels,
            stats: DominationStats {
                recursion_depth: max_depth,
                node_count,
            },
        }
    }
}

/// Smallest value `λ` of the control function with `μ({m > λ}) ≤ half`.
/// Returns `λ` and `μ({m > λ})`.
fn choose_threshold(tree: &MeasureTree, first_leaf: usize, control: &[f64], half: f64) -> (f64, f64) {
    let mut order: Vec<usize> = (0..control.len()).collect();
    order.sort_by(|&a, &b| control[b].total_cmp(&control[a]));
    let mut threshold = control[order[0]];
    let mut chosen_mass = 0.0;
    let mut above = 0.0;
    let mut i = 0;
    while i < order.len() {
        let value = control[order[i]];
        if above > half {
            break;
        }
        threshold = value;
        chosen_mass = above;
        while i < order.len() && control[order[i]] == value {
            above += tree.leaf_measure(first_leaf + order[i]);
            i += 1;
        }
    }
    (threshold, chosen_mass)
}

/// Maximal cells of the subtree of `p` all of whose leaves exceed `threshold`.
fn maximal_exceptional_cells(
    tree: &MeasureTree,
    p: NodeId,
    control: &[f64],
    threshold: f64,
) -> Vec<NodeId> {
    let range = tree.subtree(p);
    let base = range.start;
    let first_leaf = tree.leaf_range(p).start;
    let mut full = vec![false; range.len()];
    for id in range.clone().rev() {
        let v = NodeId(id);
        full[id - base] = match tree.leaf_index(v) {
            Some(li) => control[li - first_leaf] > threshold,
            None => tree.children(v).iter().all(|c| full[c.0 - base]),
        };
    }
    range
        .filter(|&id| {
            id != p.0
                && full[id - base]
                && !full[tree.parent(NodeId(id)).expect("proper descendant").0 - base]
        })
        .map(NodeId)
        .collect()
}

fn prepare<'a>(
    tree: &'a MeasureTree,
    expansion: Expansion<'a>,
    f: &CellFunction,
) -> Recursion<'a> {
    Recursion {
        tree,
        expansion,
        avg: f.averages(),
        abs_avg: node_averages(tree, &f.abs().into_values()),
    }
}

fn check_support(f: &CellFunction, q0: NodeId) -> Result<()> {
    let tree = f.tree();
    tree.check(q0)?;
    let inside = tree.leaf_range(q0);
    if f.values()
        .iter()
        .enumerate()
        .any(|(i, &v)| v != 0.0 && !inside.contains(&i))
    {
        return Err(Error::InvalidArgument(format!(
            "f is not supported on node {q0}"
        )));
    }
    Ok(())
}

fn trivial(f: &CellFunction, q0: NodeId) -> DominationResult {
    let mut levels = BTreeMap::new();
    levels.insert(
        q0,
        LevelStat {
            threshold: 0.0,
            exceptional_fraction: 0.0,
            local_constant: 1.0,
        },
    );
    DominationResult {
        sparse: SparseCollection::new(f.tree().clone(), [q0]).expect("q0 checked"),
        constant: 1.0,
        levels,
        stats: DominationStats {
            recursion_depth: 1,
            node_count: 1,
        },
    }
}

fn finish(mut result: DominationResult, f: &CellFunction) -> DominationResult {
    // Rebind the collection to the caller's tree handle.
    result.sparse = SparseCollection::new(f.tree().clone(), result.sparse.members().to_vec())
        .expect("members are tree nodes");
    result
}

/// Sparse domination `1_{Q0} |T f| ≤ C 𝖲|f|` of the transform restricted to
/// the differences inside `Q0`. `f` must vanish off `Q0`.
pub fn dominate(eps: &SignSequence, f: &CellFunction, q0: NodeId) -> Result<DominationResult> {
    ensure_same_tree(eps.tree(), f.tree())?;
    check_support(f, q0)?;
    if f.restrict(q0).max_abs() == 0.0 {
        return Ok(trivial(f, q0));
    }
    let tree = f.tree();
    let rec = prepare(tree, Expansion::Transform { eps }, f);
    Ok(finish(rec.run(q0), f))
}

/// Same construction, certified against the maximal truncation `T_♯ f`.
pub fn dominate_truncation(
    eps: &SignSequence,
    f: &CellFunction,
    q0: NodeId,
) -> Result<DominationResult> {
    dominate(eps, f, q0)
}

/// Domination of the paraproduct `1_{Q0} |Π f| ≤ C 𝖲|f|`, using the maximal
/// prefix of `Σ ⟨f⟩_Q b_Q` as the control function.
pub fn dominate_paraproduct(
    b: &CarlesonFamily,
    f: &CellFunction,
    q0: NodeId,
) -> Result<DominationResult> {
    ensure_same_tree(b.tree(), f.tree())?;
    check_support(f, q0)?;
    if f.restrict(q0).max_abs() == 0.0 {
        return Ok(trivial(f, q0));
    }
    let tree = f.tree();
    let rec = prepare(tree, Expansion::Paraproduct { b }, f);
    Ok(finish(rec.run(q0), f))
}

/// Checks `lhs ≤ C 𝖲|f|` on the leaves of `q0` and reports the smallest such
/// `C`. Fails when `lhs > 0` somewhere `𝖲|f|` vanishes.
pub fn verify_domination(
    lhs: &CellFunction,
    s: &SparseCollection,
    f: &CellFunction,
    q0: NodeId,
) -> Result<VerifyReport> {
    ensure_same_tree(lhs.tree(), f.tree())?;
    ensure_same_tree(s.tree(), f.tree())?;
    let tree = f.tree();
    tree.check(q0)?;
    let rhs = sparse_apply(s, &f.abs())?;
    let mut report = VerifyReport {
        ok: true,
        c_needed: 0.0,
        worst_leaf: None,
    };
    for i in tree.leaf_range(q0) {
        let (l, r) = (lhs.values()[i], rhs.values()[i]);
        if l <= 0.0 {
            continue;
        }
        if r <= 0.0 {
            return Ok(VerifyReport {
                ok: false,
                c_needed: f64::INFINITY,
                worst_leaf: Some(tree.leaf(i)),
            });
        }
        let ratio = l / r;
        if ratio > report.c_needed {
            report.c_needed = ratio;
            report.worst_leaf = Some(tree.leaf(i));
        }
    }
    Ok(report)
}
