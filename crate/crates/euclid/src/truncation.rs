//! Smooth truncations `T_{s,t}`, the averages `A_t`, and their adapted
//! suprema over dyadic levels.
//!
//! Level `i` means `h 2^i` with `h = 2^-k` the cell side. Truncation levels
//! start at `i = 1` (two cells) and averaging levels at `i = 0`; both stop at
//! `i = k + 1`, past which nothing changes on the unit cube.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::error::{EuclidError, Result};
use crate::grid::{Coord, Cube, MAX_DIM};
use crate::kernel::{CutoffPsi, DiniKernel};
use crate::lattice::{Lattice, LatticeFunction};

/// Values on `[-R, R]^d`, axis 0 fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Stencil {
    pub d: usize,
    pub radius: usize,
    pub values: Vec<f64>,
}

impl Stencil {
    pub fn from_fn(d: usize, radius: usize, mut f: impl FnMut(&[i64]) -> f64) -> Self {
        let w = 2 * radius + 1;
        let len = w.pow(d as u32);
        let mut values = Vec::with_capacity(len);
        let mut delta = [0i64; MAX_DIM];
        for idx in 0..len {
            let mut rest = idx;
            for a in 0..d {
                delta[a] = (rest % w) as i64 - radius as i64;
                rest /= w;
            }
            values.push(f(&delta[..d]));
        }
        Stencil { d, radius, values }
    }

    fn width(&self) -> usize {
        2 * self.radius + 1
    }
}

/// `g(x) = Σ_δ k(δ) f(x - δ)` on the lattice, with `f = 0` off the lattice.
pub fn convolve(lattice: Lattice, f: &[f64], stencil: &Stencil) -> Vec<f64> {
    assert_eq!(f.len(), lattice.len());
    assert_eq!(stencil.d, lattice.dim());
    let d = lattice.dim();
    let support = f.iter().filter(|&&v| v != 0.0).count();
    if support == 0 {
        return vec![0.0; f.len()];
    }
    let n = lattice.side_cells();
    let r = stencil.radius.min(n - 1);
    let m = 2 * n;
    let direct = support as f64 * ((2 * r + 1) as f64).powi(d as i32);
    let total = (m as f64).powi(d as i32);
    let fft = 12.0 * total * total.log2();
    if direct <= fft {
        convolve_direct(lattice, f, stencil)
    } else {
        FftConvolver::new(lattice, f).apply(stencil)
    }
}

fn convolve_direct(lattice: Lattice, f: &[f64], stencil: &Stencil) -> Vec<f64> {
    let d = lattice.dim();
    let n = lattice.side_cells() as i64;
    let r = stencil.radius as i64;
    let w = stencil.width();
    let mut out = vec![0.0; f.len()];
    'cells: for (y, &fy) in f.iter().enumerate() {
        if fy == 0.0 {
            continue;
        }
        let ym = lattice.multi_index(y);
        // Clip the stencil box to the lattice around y.
        let mut lo = [0i64; MAX_DIM];
        let mut hi = [0i64; MAX_DIM];
        for a in 0..d {
            let c = ym[a] as i64;
            lo[a] = (-r).max(-c);
            hi[a] = r.min(n - 1 - c);
        }
        let mut delta = lo;
        loop {
            let mut sidx = 0usize;
            let mut xidx = 0usize;
            for a in (0..d).rev() {
                sidx = sidx * w + (delta[a] + r) as usize;
                xidx = xidx * n as usize + (ym[a] as i64 + delta[a]) as usize;
            }
            out[xidx] += stencil.values[sidx] * fy;
            let mut a = 0;
            loop {
                if a == d {
                    continue 'cells;
                }
                delta[a] += 1;
                if delta[a] <= hi[a] {
                    break;
                }
                delta[a] = lo[a];
                a += 1;
            }
        }
    }
    out
}

/// Zero-padded `n`-dimensional FFT convolution with `f` transformed once.
pub struct FftConvolver {
    lattice: Lattice,
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    f_hat: Vec<Complex64>,
}

impl FftConvolver {
    pub fn new(lattice: Lattice, f: &[f64]) -> Self {
        let n = lattice.side_cells();
        // Radii never need to exceed n - 1, so 2n avoids wraparound.
        let m = 2 * n;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let d = lattice.dim();
        let mut f_hat = vec![Complex64::new(0.0, 0.0); m.pow(d as u32)];
        for (i, &v) in f.iter().enumerate() {
            if v != 0.0 {
                f_hat[padded_index(&lattice.multi_index(i)[..d], m)] = Complex64::new(v, 0.0);
            }
        }
        let mut conv = FftConvolver {
            lattice,
            m,
            forward,
            inverse,
            f_hat: Vec::new(),
        };
        conv.transform(&mut f_hat, false);
        conv.f_hat = f_hat;
        conv
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let d = self.lattice.dim();
        let m = self.m;
        let plan = if inverse { &self.inverse } else { &self.forward };
        // Axis 0 lines are contiguous.
        plan.process(buf);
        let mut line = vec![Complex64::new(0.0, 0.0); m];
        for a in 1..d {
            let stride = m.pow(a as u32);
            let block = stride * m;
            for start in 0..buf.len() / block {
                for offset in 0..stride {
                    let base = start * block + offset;
                    for (j, c) in line.iter_mut().enumerate() {
                        *c = buf[base + j * stride];
                    }
                    plan.process(&mut line);
                    for (j, c) in line.iter().enumerate() {
                        buf[base + j * stride] = *c;
                    }
                }
            }
        }
    }

    pub fn apply(&self, stencil: &Stencil) -> Vec<f64> {
        let d = self.lattice.dim();
        let m = self.m;
        let n = self.lattice.side_cells();
        let r = stencil.radius.min(n - 1) as i64;
        let w = stencil.width();
        let full = stencil.radius as i64;
        let mut buf = vec![Complex64::new(0.0, 0.0); self.f_hat.len()];
        let mut delta = [0i64; MAX_DIM];
        let box_len = ((2 * r + 1) as usize).pow(d as u32);
        for idx in 0..box_len {
            let mut rest = idx;
            let mut sidx = 0usize;
            let mut pidx = 0usize;
            for a in 0..d {
                delta[a] = (rest % (2 * r as usize + 1)) as i64 - r;
                rest /= 2 * r as usize + 1;
            }
            for a in (0..d).rev() {
                sidx = sidx * w + (delta[a] + full) as usize;
                pidx = pidx * m + delta[a].rem_euclid(m as i64) as usize;
            }
            buf[pidx] = Complex64::new(stencil.values[sidx], 0.0);
        }
        self.transform(&mut buf, false);
        for (b, f) in buf.iter_mut().zip(&self.f_hat) {
            *b *= f;
        }
        self.transform(&mut buf, true);
        let scale = 1.0 / (m as f64).powi(d as i32);
        (0..self.lattice.len())
            .map(|i| buf[padded_index(&self.lattice.multi_index(i)[..d], m)].re * scale)
            .collect()
    }
}

fn padded_index(multi: &[usize], m: usize) -> usize {
    multi.iter().rev().fold(0, |acc, &i| acc * m + i)
}

/// Stencil of `T_{s,t}`: `K(δh) [ψ(δh/t) - ψ(δh/s)] h^d`.
pub fn truncation_stencil(kernel: &DiniKernel, lattice: Lattice, s: f64, t: f64) -> Stencil {
    let h = lattice.h();
    let d = lattice.dim();
    let radius = ((t / h).ceil() as usize).min(lattice.side_cells() - 1);
    let hd = lattice.cell_measure();
    let mut z = [0.0; MAX_DIM];
    let mut zs = [0.0; MAX_DIM];
    let mut zt = [0.0; MAX_DIM];
    Stencil::from_fn(d, radius, |delta| {
        for a in 0..d {
            z[a] = delta[a] as f64 * h;
            zs[a] = z[a] / s;
            zt[a] = z[a] / t;
        }
        let cut = CutoffPsi.eval(&zt[..d]) - CutoffPsi.eval(&zs[..d]);
        if cut == 0.0 {
            0.0
        } else {
            kernel.eval(&z[..d]) * cut * hd
        }
    })
}

fn check_kernel(kernel: &DiniKernel, f: &LatticeFunction) -> Result<()> {
    if kernel.dim() != f.lattice().dim() {
        return Err(EuclidError::InvalidArgument(format!(
            "kernel dimension {} does not match lattice dimension {}",
            kernel.dim(),
            f.lattice().dim()
        )));
    }
    Ok(())
}

/// Midpoint-rule `T_{s,t} f` at the cell centers.
pub fn truncated_apply(kernel: &DiniKernel, f: &LatticeFunction, s: f64, t: f64) -> Result<LatticeFunction> {
    check_kernel(kernel, f)?;
    let lattice = f.lattice();
    let floor = 2.0 * lattice.h();
    if !(s.is_finite() && t.is_finite()) || s >= t {
        return Err(EuclidError::InvalidTruncation {
            s,
            t,
            reason: "need s < t".into(),
        });
    }
    if s < floor {
        return Err(EuclidError::InvalidTruncation {
            s,
            t,
            reason: format!("s below two cells ({floor})"),
        });
    }
    let stencil = truncation_stencil(kernel, lattice, s, t);
    Ok(LatticeFunction::from_vec_unchecked(lattice, convolve(lattice, f.values(), &stencil)))
}

/// The top level `k + 1`.
pub fn top_level(lattice: Lattice) -> usize {
    lattice.resolution() as usize + 1
}

/// `A_{h 2^i} |f|` for `i = 0..=k+1`. Separable, so one axis at a time.
pub fn average_levels(f: &LatticeFunction) -> Vec<Vec<f64>> {
    let lattice = f.lattice();
    let d = lattice.dim();
    let n = lattice.side_cells();
    let abs: Vec<f64> = f.values().iter().map(|v| v.abs()).collect();
    (0..=top_level(lattice))
        .map(|i| {
            let scale = (1usize << i) as f64;
            let radius = (1usize << i).min(n - 1);
            let taps: Vec<f64> = (-(radius as i64)..=radius as i64)
                .map(|delta| CutoffPsi::axis(delta as f64 / scale) / scale)
                .collect();
            let mut cur = abs.clone();
            for a in 0..d {
                cur = convolve_axis(lattice, &cur, &taps, radius, a);
            }
            cur
        })
        .collect()
}

fn convolve_axis(lattice: Lattice, f: &[f64], taps: &[f64], radius: usize, axis: usize) -> Vec<f64> {
    let n = lattice.side_cells();
    let stride = n.pow(axis as u32);
    let mut out = vec![0.0; f.len()];
    for (x, o) in out.iter_mut().enumerate() {
        let i = (x / stride) % n;
        let lo = i.saturating_sub(radius);
        let hi = (i + radius).min(n - 1);
        let mut acc = 0.0;
        for j in lo..=hi {
            let v = f[x - i * stride + j * stride];
            if v != 0.0 {
                acc += taps[i + radius - j] * v;
            }
        }
        *o = acc;
    }
    out
}

/// `V_i = T_{2h, h 2^i} f` for `i = 1..=k+1` (so `V_1 = 0`).
pub fn truncation_levels(kernel: &DiniKernel, f: &LatticeFunction) -> Result<Vec<Vec<f64>>> {
    check_kernel(kernel, f)?;
    let lattice = f.lattice();
    let h = lattice.h();
    let mut levels = vec![vec![0.0; lattice.len()]];
    if f.is_zero() {
        levels.resize(top_level(lattice), vec![0.0; lattice.len()]);
        return Ok(levels);
    }
    let mut fft: Option<FftConvolver> = None;
    for i in 2..=top_level(lattice) {
        let r = h * (1u64 << i) as f64;
        let stencil = truncation_stencil(kernel, lattice, 2.0 * h, r);
        let n = lattice.side_cells();
        let support = f.values().iter().filter(|&&v| v != 0.0).count();
        let direct = support as f64 * ((2 * stencil.radius.min(n - 1) + 1) as f64).powi(lattice.dim() as i32);
        let total = ((2 * n) as f64).powi(lattice.dim() as i32);
        let v = if direct <= 8.0 * total * total.log2() {
            convolve_direct(lattice, f.values(), &stencil)
        } else {
            fft.get_or_insert_with(|| FftConvolver::new(lattice, f.values()))
                .apply(&stencil)
        };
        levels.push(v);
    }
    Ok(levels)
}

/// `V_i` and `A_i` on the whole lattice, from which every adapted supremum is
/// read off.
#[derive(Clone, Debug)]
pub struct ScaleProfiles {
    lattice: Lattice,
    /// `v[i - 1]` is `V_i`.
    v: Vec<Vec<f64>>,
    a: Vec<Vec<f64>>,
}

impl ScaleProfiles {
    pub fn new(kernel: &DiniKernel, f: &LatticeFunction) -> Result<Self> {
        Ok(ScaleProfiles {
            lattice: f.lattice(),
            v: truncation_levels(kernel, f)?,
            a: average_levels(f),
        })
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    /// `V_i(x)` for `1 ≤ i ≤ k + 1`.
    pub fn level(&self, i: usize, cell: usize) -> f64 {
        self.v[i - 1][cell]
    }

    /// `A_{h 2^i}|f|(x)` for `0 ≤ i ≤ k + 1`.
    pub fn average(&self, i: usize, cell: usize) -> f64 {
        self.a[i][cell]
    }

    /// Number of truncation levels `i ≥ 1` with `12 h 2^i < dist(x, ∂P)`.
    pub fn truncation_count(&self, p: &Cube, cell: usize) -> usize {
        let dist = p.dist_to_boundary(&self.lattice.center(cell)[..self.lattice.dim()]);
        let h = self.lattice.h_units();
        let top = top_level(self.lattice);
        (1..=top).take_while(|&i| 12 * (h << i) < dist).count()
    }

    /// Number of averaging levels `i ≥ 0` with `h 2^i < dist(x, ∂P)`.
    pub fn average_count(&self, p: &Cube, cell: usize) -> usize {
        let dist = p.dist_to_boundary(&self.lattice.center(cell)[..self.lattice.dim()]);
        let h = self.lattice.h_units();
        let top = top_level(self.lattice);
        (0..=top).take_while(|&i| (h << i) < dist).count()
    }

    /// `max_{1 ≤ i < j ≤ n} |V_j - V_i|` at one cell.
    pub fn truncation_range(&self, cell: usize, n: usize) -> f64 {
        if n < 2 {
            return 0.0;
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 1..=n {
            let v = self.level(i, cell);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        hi - lo
    }

    pub fn truncation_at(&self, p: &Cube, cell: usize) -> f64 {
        self.truncation_range(cell, self.truncation_count(p, cell))
    }

    pub fn maximal_at(&self, p: &Cube, cell: usize) -> f64 {
        (0..self.average_count(p, cell))
            .map(|i| self.average(i, cell))
            .fold(0.0, f64::max)
    }

    pub fn adapted_truncation(&self, p: &Cube) -> LatticeFunction {
        self.map(|cell| self.truncation_at(p, cell))
    }

    pub fn adapted_maximal(&self, p: &Cube) -> LatticeFunction {
        self.map(|cell| self.maximal_at(p, cell))
    }

    /// The unrestricted maximal truncation over all levels.
    pub fn global_truncation(&self) -> LatticeFunction {
        let top = top_level(self.lattice);
        self.map(|cell| self.truncation_range(cell, top))
    }

    fn map(&self, f: impl Fn(usize) -> f64) -> LatticeFunction {
        LatticeFunction::from_vec_unchecked(self.lattice, (0..self.lattice.len()).map(f).collect())
    }
}

/// `M_P f` on the lattice; zero outside `P`.
pub fn adapted_maximal(f: &LatticeFunction, p: &Cube) -> Result<LatticeFunction> {
    check_cube(f.lattice(), p)?;
    let profiles = ScaleProfiles {
        lattice: f.lattice(),
        v: Vec::new(),
        a: average_levels(f),
    };
    Ok(profiles.adapted_maximal(p))
}

/// `T_{♯,P} f` on the lattice; zero outside `P` and where fewer than two
/// levels fit below `dist(x, ∂P)/12`.
pub fn adapted_truncation(kernel: &DiniKernel, f: &LatticeFunction, p: &Cube) -> Result<LatticeFunction> {
    check_cube(f.lattice(), p)?;
    let profiles = ScaleProfiles {
        lattice: f.lattice(),
        v: truncation_levels(kernel, f)?,
        a: Vec::new(),
    };
    Ok(profiles.adapted_truncation(p))
}

pub(crate) fn check_cube(lattice: Lattice, p: &Cube) -> Result<()> {
    if p.dim() != lattice.dim() {
        return Err(EuclidError::InvalidCube(format!(
            "cube of dimension {} on a {}-dimensional lattice",
            p.dim(),
            lattice.dim()
        )));
    }
    Ok(())
}

/// Cells whose centers lie in `p`.
pub fn cells_in(lattice: Lattice, p: &Cube) -> Vec<usize> {
    let d = lattice.dim();
    let h = lattice.h_units();
    let n = lattice.side_cells() as Coord;
    let mut ranges = [(0 as Coord, -1 as Coord); MAX_DIM];
    for a in 0..d {
        let lo = p.lo()[a];
        let hi = lo + p.side();
        // (2i + 1) h / 2 ∈ [lo, hi)
        let first = (2 * lo - h).div_euclid(2 * h) + Coord::from((2 * lo - h).rem_euclid(2 * h) != 0);
        let last = (2 * hi - h - 1).div_euclid(2 * h);
        ranges[a] = (first.max(0), last.min(n - 1));
        if ranges[a].0 > ranges[a].1 {
            return Vec::new();
        }
    }
    let mut out = vec![0usize];
    for a in (0..d).rev() {
        let (lo, hi) = ranges[a];
        out = out
            .into_iter()
            .flat_map(|base| (lo..=hi).map(move |i| base * n as usize + i as usize))
            .collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::UNIT;

    #[test]
    fn cells_in_matches_centers() {
        let l = Lattice::new(2, 4).unwrap();
        for (lo, side) in [
            ([UNIT / 5, UNIT / 3], UNIT / 4),
            ([-UNIT, -UNIT], 3 * UNIT),
            ([UNIT / 32, 0], UNIT / 16),
            ([UNIT / 32 + 1, 0], UNIT / 16),
        ] {
            let q = Cube::new(&lo, side).unwrap();
            let expected: Vec<usize> = (0..l.len()).filter(|&c| q.contains_point(&l.center(c)[..2])).collect();
            assert_eq!(cells_in(l, &q), expected);
        }
    }

    #[test]
    fn direct_and_fft_agree() {
        let l = Lattice::new(2, 5).unwrap();
        let f: Vec<f64> = (0..l.len()).map(|i| ((i * 37 % 11) as f64 - 5.0) * f64::from(i % 3 == 0)).collect();
        let s = Stencil::from_fn(2, 9, |d| (d[0] as f64 * 0.3 - d[1] as f64).sin());
        let a = convolve_direct(l, &f, &s);
        let b = FftConvolver::new(l, &f).apply(&s);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
    }

    #[test]
    fn zero_and_bad_levels() {
        let l = Lattice::new(1, 6).unwrap();
        let k = DiniKernel::hilbert();
        let zero = LatticeFunction::zeros(l);
        let out = truncated_apply(&k, &zero, 0.05, 0.2).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
        assert!(truncated_apply(&k, &zero, 0.2, 0.2).is_err());
        assert!(truncated_apply(&k, &zero, 0.3, 0.2).is_err());
        assert!(truncated_apply(&k, &zero, 1.5 / 64.0, 0.2).is_err());
    }

    #[test]
    fn constant_average_sandwich() {
        let l = Lattice::new(1, 8).unwrap();
        let f = LatticeFunction::from_fn(l, |_| 3.0).unwrap();
        let p = l.domain();
        let m = adapted_maximal(&f, &p).unwrap();
        let mid = l.side_cells() / 2;
        // Deep inside, A_t 3 approaches 3 ∫ψ = 4.5 as t grows.
        assert!((m.values()[mid] - 3.0 * CutoffPsi::mass(1)).abs() < 1e-3);
        assert!(m.values()[mid] <= 3.0 * 2.0);
        assert!(m.values()[mid] >= 3.0 * 0.5);
        // No level fits below the distance h/2 of an edge cell.
        assert_eq!(m.values()[0], 0.0);
        assert_eq!(m.values()[1], 3.0);
    }
}
