//! Sparse domination of `T_♯` on the lattice over the shifted grids.
//!
//! At a cube `P` the exceptional set is `{max(M_P f, T_{♯,P} f) > λ}`. Each
//! exceptional `x` gets a stopping level `σ_x`: truncations between levels
//! above `σ_x` stay below `λ`, and so does the average above it. The box of
//! side `24 σ_x` around `x` is covered by a shifted-grid cube `Q_x ⊊ P`
//! (halving `σ_x` until it fits), so `T_{♯,P} f ≤ T_{♯,Q_x} f + λ` at `x`. `λ` is the smallest value of the scan for
//! which the maximal `Q_x` have total measure below `density · |P|`. The
//! local constant is read off directly:
//! `c_P = max_x [T_{♯,P} f(x) - max_{Q ∋ x} T_{♯,Q} f(x)]_+ / ⟨|f|⟩_P`.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::Serialize;
use sparsedom_core::stats::weak_l1_quotient;
use sparsedom_core::SparseReport;

use crate::error::{EuclidError, Result};
use crate::grid::{cover_cube, Coord, Cube, GridCube, GridIndex, ShiftedGridFamily};
use crate::kernel::DiniKernel;
use crate::lattice::{Lattice, LatticeFunction};
use crate::truncation::{cells_in, ScaleProfiles};

/// Smallest lattice resolution accepted by `dominate_euclid` per dimension.
pub fn min_resolution(d: usize) -> u32 {
    match d {
        1 => 10,
        _ => 7,
    }
}

/// `3^{-3d-3}`.
pub fn default_density(d: usize) -> f64 {
    3f64.powi(-(3 * d as i32) - 3)
}

/// Relative slack of the pointwise verification.
pub const VERIFY_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, Default)]
pub struct EuclidOptions {
    /// Top cube; covered by a grid cube if it is not one. Defaults to the
    /// lattice domain `[0,1)^d`.
    pub top: Option<Cube>,
    /// Measure budget of the stopping cubes relative to `|P|`; defaults to
    /// `3^{-3d-3}`.
    pub density: Option<f64>,
    /// Also bound `T_♯ f` outside the top cube.
    pub exterior: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CubeRecord {
    #[serde(serialize_with = "display")]
    pub cube: GridCube,
    pub grid: GridIndex,
    /// Index of the record whose stopping cube this was; `None` for the top.
    pub parent: Option<usize>,
    pub generation: usize,
    pub threshold: f64,
    /// `Σ |Q| / |P|` over the maximal stopping cubes.
    pub exceptional_fraction: f64,
    pub children: usize,
    /// Exceptional cells whose box no cube inside `P` could cover.
    pub uncovered: usize,
    pub average: f64,
    pub local_constant: f64,
}

fn display<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EuclidVerify {
    pub ok: bool,
    /// `max T_{♯,P0} f / Σ_u 𝖲_u |f|` over the cells of `P0`.
    pub c_needed: f64,
    pub worst_cell: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExteriorBound {
    /// `(n, u, Q)` with `Q ∈ 𝒟_u` covering `2^n P0`, until the domain is covered.
    pub covers: Vec<(u32, GridIndex, String)>,
    /// `max T_♯ f(x) (ℓP0 + dist(x, P0))^d / ‖f‖₁` over cells outside `P0`.
    pub decay_constant: f64,
}

#[derive(Clone, Debug)]
pub struct EuclidDomination {
    pub lattice: Lattice,
    pub top: Option<GridCube>,
    /// One collection per grid index, members in processing order.
    pub collections: BTreeMap<GridIndex, Vec<GridCube>>,
    pub constant: f64,
    pub records: Vec<CubeRecord>,
    pub sparse: BTreeMap<GridIndex, SparseReport<GridCube>>,
    pub verify: EuclidVerify,
    /// `sup_λ λ |{T_♯ f > λ}| / ‖f‖₁` for the unrestricted truncation.
    pub weak_l1: f64,
    pub exterior: Option<ExteriorBound>,
}

impl EuclidDomination {
    pub fn members(&self) -> impl Iterator<Item = &GridCube> {
        self.collections.values().flatten()
    }

    pub fn grids_used(&self) -> usize {
        self.collections.values().filter(|c| !c.is_empty()).count()
    }

    pub fn all_sparse(&self) -> bool {
        self.sparse.values().all(|r| r.valid)
    }

    pub fn worst_sparse_ratio(&self) -> f64 {
        self.sparse.values().map(|r| r.worst_ratio).fold(0.0, f64::max)
    }

    pub fn recursion_depth(&self) -> usize {
        self.records.iter().map(|r| r.generation + 1).max().unwrap_or(0)
    }
}

/// `Σ_{Q ∈ 𝒮} ⟨|f|⟩_Q 1_Q` at the cell centers.
pub fn sparse_apply_cubes<'a>(cubes: impl IntoIterator<Item = &'a GridCube>, f: &LatticeFunction) -> LatticeFunction {
    let lattice = f.lattice();
    let mut out = vec![0.0; lattice.len()];
    for q in cubes {
        let c = q.cube();
        let avg = f.abs_average(&c);
        if avg == 0.0 {
            continue;
        }
        for cell in cells_in(lattice, &c) {
            out[cell] += avg;
        }
    }
    LatticeFunction::from_vec_unchecked(lattice, out)
}

/// ½-packing of one grid's collection: at every member, the maximal members
/// strictly inside it cover at most half of it.
pub fn check_sparse_cubes(members: &[GridCube]) -> SparseReport<GridCube> {
    let cubes: Vec<Cube> = members.iter().map(|q| q.cube()).collect();
    let mut worst = 0.0f64;
    let mut witness = None;
    for (s, outer) in cubes.iter().enumerate() {
        let inside: Vec<usize> = (0..cubes.len())
            .filter(|&r| r != s && cubes[r] != *outer && outer.contains_cube(&cubes[r]))
            .collect();
        let mass: f64 = inside
            .iter()
            .filter(|&&r| {
                !inside
                    .iter()
                    .any(|&o| o != r && cubes[o] != cubes[r] && cubes[o].contains_cube(&cubes[r]))
            })
            .map(|&r| cubes[r].measure())
            .sum();
        let ratio = mass / outer.measure();
        if ratio > worst {
            worst = ratio;
            witness = Some(members[s]);
        }
    }
    let valid = worst <= 0.5 + sparsedom_core::SPARSE_SLACK;
    SparseReport {
        valid,
        worst_ratio: worst,
        witness: if valid { None } else { witness },
    }
}

struct Outcome {
    record: CubeRecord,
    children: Vec<GridCube>,
}

struct Stopping<'a> {
    profiles: &'a ScaleProfiles,
    f: &'a LatticeFunction,
    density: f64,
}

impl Stopping<'_> {
    /// Stopping level of an exceptional cell: the smallest `a` such that
    /// every truncation between levels `≥ a` is at most `λ`, raised to the
    /// largest level whose average still exceeds `λ`.
    fn sigma(&self, cell: usize, n_tr: usize, n_m: usize, lambda: f64) -> usize {
        let p = self.profiles;
        let mut level = 1;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for a in (1..=n_tr).rev() {
            let v = p.level(a, cell);
            lo = lo.min(v);
            hi = hi.max(v);
            if hi - lo > lambda {
                level = a + 1;
                break;
            }
        }
        let average = (0..n_m).rev().find(|&j| p.average(j, cell) > lambda).unwrap_or(0);
        level.max(average)
    }

    /// The grid cube covering the box of side `24 h 2^j + h` centered at the
    /// cell, shrinking `j` until the cover sits strictly inside `P`.
    fn stopping_cube(&self, p: &Cube, p_grid: &GridCube, cell: usize, mut j: usize) -> Option<GridCube> {
        let lattice = self.profiles.lattice();
        let d = lattice.dim();
        let h = lattice.h_units();
        let x = lattice.center(cell);
        loop {
            let half = 12 * (h << j) + h / 2;
            let lo: Vec<Coord> = x[..d].iter().map(|&c| c - half).collect();
            let b = Cube::new(&lo, 2 * half).expect("positive side");
            let (_, q) = cover_cube(&b);
            if q != *p_grid && p.contains_cube(&q.cube()) {
                return Some(q);
            }
            if j == 0 {
                return None;
            }
            j -= 1;
        }
    }

    fn process(&self, p_grid: GridCube) -> Option<Outcome> {
        let p = p_grid.cube();
        let lattice = self.profiles.lattice();
        let cells = cells_in(lattice, &p);
        let average = self.f.abs_average(&p);
        if average == 0.0 {
            return None;
        }
        let counts: Vec<(usize, usize)> = cells
            .iter()
            .map(|&c| (self.profiles.truncation_count(&p, c), self.profiles.average_count(&p, c)))
            .collect();
        let sharp: Vec<f64> = cells
            .iter()
            .zip(&counts)
            .map(|(&c, &(n_tr, _))| self.profiles.truncation_range(c, n_tr))
            .collect();
        if sharp.iter().all(|&v| v == 0.0) {
            return None;
        }
        let m: Vec<f64> = cells
            .iter()
            .zip(&counts)
            .zip(&sharp)
            .map(|((&c, &(_, n_m)), &t)| {
                let maximal = (0..n_m).map(|i| self.profiles.average(i, c)).fold(0.0, f64::max);
                maximal.max(t)
            })
            .collect();

        let mut order: Vec<usize> = (0..cells.len()).collect();
        order.sort_by(|&a, &b| m[b].total_cmp(&m[a]));
        let mut distinct: Vec<f64> = order.iter().map(|&i| m[i]).collect();
        distinct.dedup();

        let budget = self.density * p.measure();
        let mut cache: HashMap<(usize, usize), Option<GridCube>> = HashMap::new();
        let mut accepted = (distinct[0], Vec::new(), 0usize, 0.0);
        for &lambda in &distinct[1..] {
            let mut covers = HashSet::new();
            let mut uncovered = 0;
            for &i in order.iter().take_while(|&&i| m[i] > lambda) {
                let (n_tr, n_m) = counts[i];
                let j = self.sigma(cells[i], n_tr, n_m, lambda);
                let q = *cache
                    .entry((i, j))
                    .or_insert_with(|| self.stopping_cube(&p, &p_grid, cells[i], j));
                match q {
                    Some(q) => {
                        covers.insert(q);
                    }
                    None => uncovered += 1,
                }
            }
            let maximal = maximal_cubes(covers.into_iter().collect());
            let mass: f64 = maximal.iter().map(|q| q.cube().measure()).sum();
            if mass >= budget {
                break;
            }
            accepted = (lambda, maximal, uncovered, mass);
        }
        let (threshold, children, uncovered, mass) = accepted;

        let child_cubes: Vec<Cube> = children.iter().map(|q| q.cube()).collect();
        let center = |c: usize| lattice.center(c);
        let mut excess = 0.0f64;
        for (k, &c) in cells.iter().enumerate() {
            let x = center(c);
            let below = child_cubes
                .iter()
                .filter(|q| q.contains_point(&x[..lattice.dim()]))
                .map(|q| self.profiles.truncation_at(q, c))
                .fold(0.0, f64::max);
            excess = excess.max(sharp[k] - below);
        }
        Some(Outcome {
            record: CubeRecord {
                cube: p_grid,
                grid: p_grid.grid(),
                parent: None,
                generation: 0,
                threshold,
                exceptional_fraction: mass / p.measure(),
                children: children.len(),
                uncovered,
                average,
                local_constant: excess / average,
            },
            children,
        })
    }
}

/// Cubes not contained in another member (duplicates collapse).
fn maximal_cubes(mut cubes: Vec<GridCube>) -> Vec<GridCube> {
    cubes.sort_by_key(|q| std::cmp::Reverse(q.cube().side()));
    let mut kept: Vec<(GridCube, Cube)> = Vec::new();
    for q in cubes {
        let c = q.cube();
        if !kept.iter().any(|(_, k)| k.contains_cube(&c)) {
            kept.push((q, c));
        }
    }
    kept.sort_by(|a, b| a.0.cmp(&b.0));
    kept.into_iter().map(|(q, _)| q).collect()
}

/// Runs the stopping-time recursion from the top cube and certifies the
/// result directly.
pub fn dominate_euclid(kernel: &DiniKernel, f: &LatticeFunction, options: &EuclidOptions) -> Result<EuclidDomination> {
    let lattice = f.lattice();
    let d = lattice.dim();
    if kernel.dim() != d {
        return Err(EuclidError::InvalidArgument(format!(
            "kernel dimension {} does not match lattice dimension {d}",
            kernel.dim()
        )));
    }
    let min = min_resolution(d);
    if lattice.resolution() < min {
        return Err(EuclidError::InvalidResolution {
            d,
            k: lattice.resolution(),
            min,
            max: crate::lattice::max_resolution(d),
        });
    }
    let density = options.density.unwrap_or_else(|| default_density(d));
    if !(density > 0.0 && density <= 1.0) {
        return Err(EuclidError::InvalidArgument(format!("density {density} not in (0, 1]")));
    }
    let family = ShiftedGridFamily::new(d)?;
    let empty = || family.grids().map(|u| (u, Vec::new())).collect::<BTreeMap<_, _>>();

    let requested = options.top.unwrap_or_else(|| lattice.domain());
    let top = cover_cube(&requested).1;
    {
        let tc = top.cube();
        if let Some((cell, &value)) = f
            .values()
            .iter()
            .enumerate()
            .find(|&(c, &v)| v != 0.0 && !tc.contains_cube(&lattice.cell_cube(c)))
        {
            return Err(EuclidError::SupportOutsideTop { cell, value });
        }
    }

    if f.is_zero() {
        return Ok(EuclidDomination {
            lattice,
            top: Some(top),
            sparse: empty().into_keys().map(|u| (u, check_sparse_cubes(&[]))).collect(),
            collections: empty(),
            constant: 0.0,
            records: Vec::new(),
            verify: EuclidVerify {
                ok: true,
                c_needed: 0.0,
                worst_cell: None,
            },
            weak_l1: 0.0,
            exterior: None,
        });
    }
    let top_c = top.cube();
    let profiles = ScaleProfiles::new(kernel, f)?;
    let top_cells = cells_in(lattice, &top_c);
    if top_cells.iter().all(|&c| profiles.truncation_count(&top_c, c) < 2) {
        return Err(EuclidError::ResolutionTooCoarse);
    }

    let stopping = Stopping {
        profiles: &profiles,
        f,
        density,
    };
    let mut collections = empty();
    let mut records: Vec<CubeRecord> = Vec::new();
    let mut parent_of: HashMap<GridCube, (usize, usize)> = HashMap::new();
    let mut pending = vec![top];
    while !pending.is_empty() {
        let side = pending.iter().map(|q| q.cube().side()).max().expect("nonempty");
        let (batch, rest): (Vec<GridCube>, Vec<GridCube>) =
            pending.into_iter().partition(|q| q.cube().side() == side);
        let outcomes: Vec<Option<Outcome>> = batch.par_iter().map(|&q| stopping.process(q)).collect();
        let mut next = rest;
        for (q, outcome) in batch.into_iter().zip(outcomes) {
            let Some(Outcome { mut record, children }) = outcome else {
                continue;
            };
            if let Some(&(parent, generation)) = parent_of.get(&q) {
                record.parent = Some(parent);
                record.generation = generation;
            }
            let index = records.len();
            for &child in &children {
                parent_of.entry(child).or_insert((index, record.generation + 1));
            }
            collections.get_mut(&q.grid()).expect("all grids listed").push(q);
            records.push(record);
            next.extend(children);
        }
        pending = maximal_cubes(next);
    }
    let constant = records.iter().map(|r| r.local_constant).fold(0.0, f64::max);

    let sparse = collections
        .iter()
        .map(|(&u, members)| (u, check_sparse_cubes(members)))
        .collect();

    let bound = sparse_apply_cubes(collections.values().flatten(), f);
    let mut verify = EuclidVerify {
        ok: true,
        c_needed: 0.0,
        worst_cell: None,
    };
    for &c in &top_cells {
        let lhs = profiles.truncation_at(&top_c, c);
        if lhs == 0.0 {
            continue;
        }
        let rhs = bound.values()[c];
        let need = if rhs > 0.0 { lhs / rhs } else { f64::INFINITY };
        if need > verify.c_needed {
            verify.c_needed = need;
            verify.worst_cell = Some(c);
        }
    }
    verify.ok = verify.c_needed <= constant * (1.0 + VERIFY_SLACK);

    let global = profiles.global_truncation();
    let l1 = f.l1_norm();
    let weak_l1 = weak_l1_quotient(global.values(), &vec![lattice.cell_measure(); lattice.len()], l1);
    let exterior = options
        .exterior
        .then(|| exterior_bound(lattice, &requested, &global, l1));

    Ok(EuclidDomination {
        lattice,
        top: Some(top),
        collections,
        constant,
        records,
        sparse,
        verify,
        weak_l1,
        exterior,
    })
}

fn exterior_bound(lattice: Lattice, top: &Cube, global: &LatticeFunction, l1: f64) -> ExteriorBound {
    let d = lattice.dim();
    let domain = lattice.domain();
    let mut covers = Vec::new();
    let mut n = 1u32;
    loop {
        let big = top.dilate(1 << n).expect("dilation stays in range");
        let (u, q) = cover_cube(&big);
        covers.push((n, u, q.cube().to_string()));
        if big.contains_cube(&domain) || n >= 62 - lattice.resolution() {
            break;
        }
        n += 1;
    }
    let side = top.side_f64();
    let mut decay = 0.0f64;
    for c in 0..lattice.len() {
        let x = lattice.center(c);
        if top.contains_point(&x[..d]) {
            continue;
        }
        let dist = crate::grid::units_to_f64(top.dist_to_point(&x[..d]));
        decay = decay.max(global.values()[c] * (side + dist).powi(d as i32) / l1);
    }
    ExteriorBound {
        covers,
        decay_constant: decay,
    }
}
