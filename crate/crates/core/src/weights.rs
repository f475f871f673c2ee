//! Weights, `A_p` characteristics, weighted operator norms and sharpness sweeps.

use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::function::{ensure_same_tree, node_averages, CellFunction};
use crate::operators::{LeafOperator, SignSequence};
use crate::stats::least_squares_slope;
use crate::tree::{build_tree, MeasureTree, NodeId, TreeSpec};

pub const POWER_TOL: f64 = 1e-8;
pub const POWER_MAX_ITER: usize = 10_000;
pub const DEFAULT_STARTS: usize = 32;
const LP_MAX_ITER: usize = 500;

/// A strictly positive cell function.
#[derive(Debug, Clone, PartialEq)]
pub struct Weight(CellFunction);

impl Weight {
    pub fn new(f: CellFunction) -> Result<Self> {
        if let Some((leaf, &value)) = f.values().iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::NonPositiveWeight { leaf, value });
        }
        Ok(Weight(f))
    }

    pub fn from_fn(tree: Arc<MeasureTree>, f: impl FnMut(usize) -> f64) -> Result<Self> {
        Weight::new(CellFunction::from_fn(tree, f)?)
    }

    pub fn constant(tree: Arc<MeasureTree>, c: f64) -> Result<Self> {
        Weight::new(CellFunction::constant(tree, c))
    }

    pub fn function(&self) -> &CellFunction {
        &self.0
    }

    pub fn tree(&self) -> &Arc<MeasureTree> {
        self.0.tree()
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    /// `w^{1/(1-p)}`.
    pub fn dual(&self, p: f64) -> Result<Weight> {
        check_exponent(p)?;
        let e = 1.0 / (1.0 - p);
        Weight::new(self.0.map(|v| v.powf(e)))
    }

    pub fn powf(&self, e: f64) -> Result<Weight> {
        Weight::new(self.0.map(|v| v.powf(e)))
    }

    pub fn scaled(&self, c: f64) -> Result<Weight> {
        Weight::new(self.0.scaled(c))
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApReport {
    pub p: f64,
    /// `[σ, w]_{A_p} = sup_Q ⟨σ⟩_Q^{p-1} ⟨w⟩_Q`.
    pub joint_char: f64,
    /// `[w]_{A_p}`, i.e. the joint characteristic with `σ = w^{1/(1-p)}`.
    pub w_char: f64,
    /// Node attaining `joint_char`.
    pub argmax_node: NodeId,
}

fn joint_sup(w: &Weight, sigma: &Weight, p: f64) -> (f64, NodeId) {
    let tree = w.tree();
    let aw = node_averages(tree, w.values());
    let asig = node_averages(tree, sigma.values());
    let mut best = (f64::NEG_INFINITY, tree.root());
    for v in tree.nodes() {
        let value = asig[v.0].powf(p - 1.0) * aw[v.0];
        if value > best.0 {
            best = (value, v);
        }
    }
    best
}

/// Exact supremum over all nodes, leaves included.
pub fn ap_characteristic(w: &Weight, sigma: &Weight, p: f64) -> Result<ApReport> {
    check_exponent(p)?;
    ensure_same_tree(w.tree(), sigma.tree())?;
    let (joint_char, argmax_node) = joint_sup(w, sigma, p);
    let (w_char, _) = joint_sup(w, &w.dual(p)?, p);
    Ok(ApReport {
        p,
        joint_char,
        w_char,
        argmax_node,
    })
}

/// An operator norm estimate. `value` is always a lower bound; it is the norm
/// up to the iteration tolerance when `converged` holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormEstimate {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn lp_norm(tree: &MeasureTree, v: &[f64], p: f64) -> f64 {
    v.iter()
        .enumerate()
        .map(|(i, x)| x.abs().powf(p) * tree.leaf_measure(i))
        .sum::<f64>()
        .powf(1.0 / p)
}

fn l2_norm(tree: &MeasureTree, v: &[f64]) -> f64 {
    v.iter()
        .enumerate()
        .map(|(i, x)| x * x * tree.leaf_measure(i))
        .sum::<f64>()
        .sqrt()
}

/// `g ↦ w^{1/p} T(w^{-1/p} g)` and its adjoint in `L²(μ)`, so that the norm of
/// `T` on `L^p(w)` is the norm of this map on `L^p(μ)`.
struct Conjugated<'a> {
    op: &'a dyn LeafOperator,
    up: Vec<f64>,
    down: Vec<f64>,
}

impl<'a> Conjugated<'a> {
    fn new(op: &'a dyn LeafOperator, w: &Weight, p: f64) -> Self {
        let up: Vec<f64> = w.values().iter().map(|v| v.powf(1.0 / p)).collect();
        let down = up.iter().map(|v| v.recip()).collect();
        Conjugated { op, up, down }
    }

    fn apply(&self, g: &[f64]) -> Vec<f64> {
        let inner: Vec<f64> = g.iter().zip(&self.down).map(|(x, d)| x * d).collect();
        let mut out = self.op.apply(&inner);
        out.iter_mut().zip(&self.up).for_each(|(x, u)| *x *= u);
        out
    }

    fn adjoint(&self, h: &[f64]) -> Vec<f64> {
        let inner: Vec<f64> = h.iter().zip(&self.up).map(|(x, u)| x * u).collect();
        let mut out = self.op.apply_adjoint(&inner);
        out.iter_mut().zip(&self.down).for_each(|(x, d)| *x *= d);
        out
    }
}

fn random_start(n: usize, seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Norm of `op` on `L²(w)` by power iteration on `A*A`, `A = √w T (1/√w)`.
pub fn weighted_norm_l2(op: &dyn LeafOperator, w: &Weight, seed: u64) -> Result<NormEstimate> {
    ensure_same_tree(op.tree(), w.tree())?;
    let tree = w.tree();
    let a = Conjugated::new(op, w, 2.0);
    let mut x = random_start(tree.num_leaves(), seed, 0);
    let norm = l2_norm(tree, &x);
    x.iter_mut().for_each(|v| *v /= norm);
    let mut value = 0.0f64;
    for it in 1..=POWER_MAX_ITER {
        let y = a.apply(&x);
        let current = l2_norm(tree, &y);
        if current == 0.0 {
            return Ok(NormEstimate {
                value: 0.0,
                converged: true,
                iterations: it,
            });
        }
        let z = a.adjoint(&y);
        let zn = l2_norm(tree, &z);
        let done = (current - value).abs() <= POWER_TOL * current;
        value = value.max(current);
        if done || zn == 0.0 {
            return Ok(NormEstimate {
                value,
                converged: true,
                iterations: it,
            });
        }
        x = z.into_iter().map(|v| v / zn).collect();
    }
    Ok(NormEstimate {
        value,
        converged: false,
        iterations: POWER_MAX_ITER,
    })
}

fn duality_map(v: &[f64], q: f64) -> Vec<f64> {
    v.iter().map(|x| x.signum() * x.abs().powf(q - 1.0)).collect()
}

/// Lower bound for the norm of `op` on `L^p(w)`.
///
/// Works in `g = w^{1/p} f`, where the problem is the `L^p(μ)` norm of the
/// conjugated map `B`. Each start runs the fixed-point ascent
/// `g ← φ_{p'}(B* φ_p(B g))` on the unit sphere of `L^p(μ)`, with
/// `φ_q(x) = |x|^{q-1} sgn x`; at `p = 2` this is power iteration. The best
/// ratio over all starts is returned.
pub fn weighted_norm_lp(
    op: &dyn LeafOperator,
    w: &Weight,
    p: f64,
    starts: usize,
    seed: u64,
) -> Result<NormEstimate> {
    check_exponent(p)?;
    ensure_same_tree(op.tree(), w.tree())?;
    if starts == 0 {
        return Err(Error::InvalidArgument("at least one start is required".into()));
    }
    let tree = w.tree();
    let b = Conjugated::new(op, w, p);
    let q = p / (p - 1.0);
    let n = tree.num_leaves();
    let best = (0..starts as u64)
        .into_par_iter()
        .map(|s| {
            let mut g = if s == 0 {
                vec![1.0; n]
            } else {
                random_start(n, seed, s)
            };
            let mut best = NormEstimate {
                value: 0.0,
                converged: false,
                iterations: 0,
            };
            for it in 1..=LP_MAX_ITER {
                let gn = lp_norm(tree, &g, p);
                if gn == 0.0 {
                    break;
                }
                g.iter_mut().for_each(|v| *v /= gn);
                let y = b.apply(&g);
                let ratio = lp_norm(tree, &y, p);
                let previous = best.value;
                best.iterations = it;
                if ratio > best.value {
                    best.value = ratio;
                }
                if ratio == 0.0 || (ratio - previous).abs() <= POWER_TOL * ratio {
                    best.converged = true;
                    break;
                }
                g = duality_map(&b.adjoint(&duality_map(&y, p)), q);
            }
            best
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(None::<NormEstimate>, |acc, e| match acc {
            Some(a) if a.value >= e.value => Some(a),
            _ => Some(e),
        })
        .expect("at least one start");
    Ok(best)
}

/// Dyadic power weights on `[0, 1)`: a uniform binary tree of the given depth,
/// `w = midpoint^α` on each leaf and `σ = w^{1/(1-p)}`.
pub fn power_weight_family(alphas: &[f64], depth: u32, p: f64) -> Result<Vec<(Weight, Weight)>> {
    check_exponent(p)?;
    if alphas.is_empty() {
        return Err(Error::InvalidArgument("empty alpha grid".into()));
    }
    let tree = Arc::new(build_tree(&TreeSpec::uniform(depth, 2))?);
    let n = tree.num_leaves() as f64;
    alphas
        .iter()
        .map(|&alpha| {
            let w = Weight::from_fn(tree.clone(), |k| ((k as f64 + 0.5) / n).powf(alpha))?;
            let sigma = w.dual(p)?;
            Ok((w, sigma))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpsRule {
    AllOnes,
    Alternating,
    Random,
}

impl FromStr for EpsRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all-ones" | "ones" => Ok(EpsRule::AllOnes),
            "alternating" => Ok(EpsRule::Alternating),
            "random" => Ok(EpsRule::Random),
            other => Err(Error::InvalidArgument(format!(
                "unknown eps rule `{other}` (expected all-ones, alternating or random)"
            ))),
        }
    }
}

impl EpsRule {
    /// Multipliers for `tree`; the random rule draws `±1` from `seed`.
    pub fn build(self, tree: Arc<MeasureTree>, seed: u64) -> SignSequence {
        match self {
            EpsRule::AllOnes => SignSequence::constant(tree, 1.0).expect("1 is admissible"),
            EpsRule::Alternating => SignSequence::alternating_by_level(tree),
            EpsRule::Random => SignSequence::random_signs(tree, &mut ChaCha8Rng::seed_from_u64(seed)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub depths: Vec<u32>,
    pub alphas: Vec<f64>,
    pub eps_rule: EpsRule,
    pub p: f64,
    pub seed: u64,
    pub starts: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub depth: u32,
    pub ap_char: f64,
    pub norm: f64,
    pub ratio: f64,
    pub argmax_node: NodeId,
    #[serde(skip)]
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    /// Alpha-major, depth-minor.
    pub rows: Vec<SweepRow>,
    /// Slope of `ln norm` against `ln [w]_{A_p}` over the rows whose `α` lies in
    /// the upper half of the grid.
    pub slope: Option<f64>,
    pub slopes_by_depth: Vec<(u32, Option<f64>)>,
    pub max_ratio: f64,
}

/// Alphas in the upper half of the grid, `⌈n/2⌉` of them.
pub fn top_half(alphas: &[f64]) -> Vec<f64> {
    let mut sorted = alphas.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let keep = sorted.len().div_ceil(2);
    sorted.split_off(sorted.len() - keep)
}

fn fit(rows: &[&SweepRow], keep: &[f64]) -> Option<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| keep.contains(&r.alpha) && r.norm > 0.0)
        .map(|r| (r.ap_char.ln(), r.norm.ln()))
        .unzip();
    least_squares_slope(&xs, &ys).map(|(m, _)| m)
}

/// Characteristic and norm of the transform for every `(α, depth)` cell.
pub fn sharpness_sweep(cfg: &SweepConfig) -> Result<Sweep> {
    check_exponent(cfg.p)?;
    if cfg.depths.is_empty() || cfg.alphas.is_empty() {
        return Err(Error::InvalidArgument("empty sweep grid".into()));
    }
    if let Some(a) = cfg.alphas.iter().find(|a| !a.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha {a} is not finite")));
    }
    let mut families = Vec::with_capacity(cfg.depths.len());
    for &depth in &cfg.depths {
        let family = power_weight_family(&cfg.alphas, depth, cfg.p)?;
        let eps = cfg.eps_rule.build(family[0].0.tree().clone(), cfg.seed ^ u64::from(depth));
        families.push((family, eps));
    }
    let cells: Vec<(usize, usize)> = (0..cfg.alphas.len())
        .flat_map(|a| (0..cfg.depths.len()).map(move |d| (a, d)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(a, d)| {
            let (family, eps) = &families[d];
            let (w, sigma) = &family[a];
            let report = ap_characteristic(w, sigma, cfg.p)?;
            let est = if cfg.p == 2.0 {
                weighted_norm_l2(eps, w, cfg.seed)?
            } else {
                weighted_norm_lp(eps, w, cfg.p, cfg.starts, cfg.seed)?
            };
            Ok(SweepRow {
                alpha: cfg.alphas[a],
                depth: cfg.depths[d],
                ap_char: report.joint_char,
                norm: est.value,
                ratio: est.value / report.joint_char,
                argmax_node: report.argmax_node,
                converged: est.converged,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let keep = top_half(&cfg.alphas);
    let all: Vec<&SweepRow> = rows.iter().collect();
    let slope = fit(&all, &keep);
    let slopes_by_depth = cfg
        .depths
        .iter()
        .map(|&d| {
            let sub: Vec<&SweepRow> = rows.iter().filter(|r| r.depth == d).collect();
            (d, fit(&sub, &keep))
        })
        .collect();
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(Sweep {
        rows,
        slope,
        slopes_by_depth,
        max_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{CarlesonFamily, SparseCollection};
    use nalgebra::DMatrix;

    fn binary(depth: u32) -> Arc<MeasureTree> {
        Arc::new(build_tree(&TreeSpec::uniform(depth, 2)).unwrap())
    }

    /// Dense matrix of `√w T (1/√w)` in an orthonormal basis of `L²(μ)`, i.e.
    /// conjugated by `√μ` as well.
    fn dense(op: &dyn LeafOperator, w: &Weight) -> DMatrix<f64> {
        let tree = op.tree();
        let n = tree.num_leaves();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0 / (tree.leaf_measure(j).sqrt() * w.values()[j].sqrt());
            let col = op.apply(&e);
            for i in 0..n {
                m[(i, j)] = col[i] * tree.leaf_measure(i).sqrt() * w.values()[i].sqrt();
            }
        }
        m
    }

    fn svd_norm(op: &dyn LeafOperator, w: &Weight) -> f64 {
        dense(op, w).singular_values().max()
    }

    #[test]
    fn unit_weights_have_characteristic_one() {
        let t = binary(4);
        let w = Weight::constant(t.clone(), 1.0).unwrap();
        for p in [1.5, 2.0, 3.0, 7.0] {
            let r = ap_characteristic(&w, &w, p).unwrap();
            assert_eq!(r.joint_char, 1.0);
            assert_eq!(r.w_char, 1.0);
        }
    }

    #[test]
    fn constant_weights_pass_through() {
        let t = binary(3);
        let w = Weight::constant(t.clone(), 3.0).unwrap();
        let s = Weight::constant(t, 0.5).unwrap();
        let r = ap_characteristic(&w, &s, 3.0).unwrap();
        assert!((r.joint_char - 3.0 * 0.25).abs() < 1e-15);
        assert!(ap_characteristic(&w, &s, 1.0).is_err());
    }

    #[test]
    fn power_weight_characteristic_matches_enumeration() {
        let depth = 8;
        let (w, s) = power_weight_family(&[1.0], depth, 2.0).unwrap().remove(0);
        let n = 1usize << depth;
        // Enumerate dyadic intervals [k 2^-j, (k+1) 2^-j) directly on leaf indices.
        let mut best = 0.0f64;
        for j in 0..=depth {
            let len = n >> j;
            for k in 0..(1 << j) {
                let range = k * len..(k + 1) * len;
                let aw: f64 = range.clone().map(|i| (i as f64 + 0.5) / n as f64).sum::<f64>() / len as f64;
                let asig: f64 = range.map(|i| ((i as f64 + 0.5) / n as f64).recip()).sum::<f64>() / len as f64;
                best = best.max(aw * asig);
            }
        }
        let r = ap_characteristic(&w, &s, 2.0).unwrap();
        assert!((r.joint_char - best).abs() < 1e-12 * best);
        assert!((r.w_char - best).abs() < 1e-12 * best);
    }

    #[test]
    fn characteristic_increases_with_alpha() {
        let alphas: Vec<f64> = (0..=6).map(|i| i as f64 * 0.25).collect();
        let fam = power_weight_family(&alphas, 12, 2.0).unwrap();
        let chars: Vec<f64> = fam
            .iter()
            .map(|(w, s)| ap_characteristic(w, s, 2.0).unwrap().joint_char)
            .collect();
        assert_eq!(chars[0], 1.0);
        for pair in chars.windows(2) {
            assert!(pair[1] > pair[0], "{chars:?}");
        }
    }

    #[test]
    fn characteristic_scaling() {
        let t = binary(5);
        let w = Weight::from_fn(t.clone(), |i| 1.0 + (i as f64 * 0.7).sin().abs()).unwrap();
        let s = Weight::from_fn(t.clone(), |i| 0.2 + (i as f64).cos().powi(2)).unwrap();
        let p = 2.5;
        let base = ap_characteristic(&w, &s, p).unwrap().joint_char;
        let c = 3.7f64;
        let r = ap_characteristic(&w, &s.scaled(c).unwrap(), p).unwrap().joint_char;
        assert!((r - c.powf(p - 1.0) * base).abs() <= 1e-12 * r);
        let r = ap_characteristic(&w.scaled(c).unwrap(), &s, p).unwrap().joint_char;
        assert!((r - c * base).abs() <= 1e-12 * r);
    }

    #[test]
    fn projection_has_norm_one() {
        let t = binary(6);
        let w = Weight::constant(t.clone(), 1.0).unwrap();
        let eps = SignSequence::constant(t.clone(), 1.0).unwrap();
        let est = weighted_norm_l2(&eps, &w, 1).unwrap();
        assert!(est.converged);
        assert!((est.value - 1.0).abs() < 1e-8);
        let zero = SignSequence::constant(t, 0.0).unwrap();
        assert_eq!(weighted_norm_l2(&zero, &w, 1).unwrap().value, 0.0);
    }

    #[test]
    fn single_haar_multiplier_has_norm_one() {
        let t = binary(4);
        let w = Weight::constant(t.clone(), 1.0).unwrap();
        let target = t.children(t.root())[1];
        let eps = SignSequence::from_fn(t.clone(), |v| if v == target { 1.0 } else { 0.0 }).unwrap();
        let est = weighted_norm_l2(&eps, &w, 3).unwrap();
        assert!((est.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn power_iteration_matches_dense_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for seed in 0..6 {
            let t = Arc::new(build_tree(&TreeSpec::random(5, 3, 60, seed)).unwrap());
            let w = Weight::from_fn(t.clone(), |_| rng.random_range(0.05..20.0)).unwrap();
            let eps = SignSequence::random_uniform(t.clone(), &mut rng);
            let s = SparseCollection::new(t.clone(), t.nodes().filter(|v| v.0 % 3 == 0)).unwrap();
            let b = CarlesonFamily::random(t.clone(), &mut rng, 0.7);
            for op in [&eps as &dyn LeafOperator, &s, &b] {
                let exact = svd_norm(op, &w);
                let est = weighted_norm_l2(op, &w, seed).unwrap();
                assert!(est.value <= exact * (1.0 + 1e-10));
                assert!((est.value - exact).abs() <= 1e-4 * exact, "{} vs {exact}", est.value);
            }
        }
    }

    #[test]
    fn norm_dominates_every_test_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let t = Arc::new(build_tree(&TreeSpec::random(6, 3, 150, 4)).unwrap());
        let w = Weight::from_fn(t.clone(), |_| rng.random_range(0.1..10.0)).unwrap();
        let eps = SignSequence::random_signs(t.clone(), &mut rng);
        let norm = weighted_norm_l2(&eps, &w, 0).unwrap().value;
        let wl2 = |v: &[f64]| -> f64 {
            v.iter()
                .enumerate()
                .map(|(i, x)| x * x * w.values()[i] * t.leaf_measure(i))
                .sum::<f64>()
                .sqrt()
        };
        for _ in 0..100 {
            let f: Vec<f64> = (0..t.num_leaves()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let ratio = wl2(&eps.apply(&f)) / wl2(&f);
            assert!(ratio <= norm * (1.0 + 1e-8), "{ratio} > {norm}");
        }
    }

    #[test]
    fn duality_at_p_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let t = Arc::new(build_tree(&TreeSpec::random(6, 2, 100, 5)).unwrap());
        let w = Weight::from_fn(t.clone(), |_| rng.random_range(0.1..10.0)).unwrap();
        let eps = SignSequence::random_uniform(t.clone(), &mut rng);
        let a = weighted_norm_l2(&eps, &w, 0).unwrap().value;
        let b = weighted_norm_l2(&eps, &w.powf(-1.0).unwrap(), 0).unwrap().value;
        assert!((a - b).abs() <= 1e-6 * a, "{a} vs {b}");
    }

    #[test]
    fn lp_search_agrees_with_power_iteration_at_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for seed in 0..5 {
            let t = Arc::new(build_tree(&TreeSpec::random(6, 3, 120, seed)).unwrap());
            let w = Weight::from_fn(t.clone(), |_| rng.random_range(0.1..10.0)).unwrap();
            let eps = SignSequence::random_signs(t.clone(), &mut rng);
            let exact = weighted_norm_l2(&eps, &w, seed).unwrap().value;
            let est = weighted_norm_lp(&eps, &w, 2.0, 8, seed).unwrap().value;
            assert!((est - exact).abs() <= 0.02 * exact, "{est} vs {exact}");
        }
    }

    #[test]
    fn lp_search_on_the_projection() {
        let t = binary(6);
        let w = Weight::constant(t.clone(), 1.0).unwrap();
        let eps = SignSequence::constant(t.clone(), 1.0).unwrap();
        let est = weighted_norm_lp(&eps, &w, 4.0, DEFAULT_STARTS, 7).unwrap();
        assert!(est.value > 0.0 && est.value <= 2.0, "{}", est.value);
        let zero = SignSequence::constant(t, 0.0).unwrap();
        assert_eq!(weighted_norm_lp(&zero, &w, 4.0, 4, 7).unwrap().value, 0.0);
    }

    #[test]
    fn sweep_rows_and_unweighted_column() {
        let cfg = SweepConfig {
            depths: vec![5, 6],
            alphas: vec![0.0, 0.5, 1.0],
            eps_rule: EpsRule::Alternating,
            p: 2.0,
            seed: 1,
            starts: 4,
        };
        let sweep = sharpness_sweep(&cfg).unwrap();
        assert_eq!(sweep.rows.len(), 6);
        assert_eq!((sweep.rows[0].alpha, sweep.rows[0].depth), (0.0, 5));
        assert_eq!((sweep.rows[1].alpha, sweep.rows[1].depth), (0.0, 6));
        for r in &sweep.rows[..2] {
            assert_eq!(r.ap_char, 1.0);
            assert_eq!(r.ratio, r.norm);
            assert!(r.norm <= 1.0 + 1e-8);
        }
        for d in 0..2 {
            assert!(sweep.rows[2 + d].ap_char < sweep.rows[4 + d].ap_char);
        }
        assert!(sweep.slope.is_some());
    }

    #[test]
    fn top_half_rule() {
        assert_eq!(top_half(&[0.0, 0.5, 1.0, 1.5]), vec![1.0, 1.5]);
        assert_eq!(top_half(&[0.0, 0.5, 1.0]), vec![0.5, 1.0]);
    }

    #[test]
    fn nonpositive_weights_rejected() {
        let t = binary(1);
        assert!(Weight::from_fn(t.clone(), |i| i as f64).is_err());
        assert!(Weight::from_fn(t, |_| f64::NAN).is_err());
    }
}
