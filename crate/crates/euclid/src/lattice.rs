//! The unit cube `[0,1)^d` split into `2^k` cells per axis, and cell-constant
//! functions on it.
//!
//! Cells are numbered with axis 0 fastest. Function CSVs have header
//! `i,value`, `i,j,value` or `i,j,k,value`; cells without a row are 0.

use std::collections::HashSet;
use std::io::{Read, Write};

use crate::error::{EuclidError, Result};
use crate::grid::{Coord, Cube, MAX_DIM, SCALE_BITS};

/// Largest resolution exponent per dimension. The FFT buffers hold
/// `(2 · 2^k)^d` complex numbers.
pub fn max_resolution(d: usize) -> u32 {
    match d {
        1 => 20,
        2 => 11,
        _ => 7,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Lattice {
    d: usize,
    k: u32,
}

impl Lattice {
    pub fn new(d: usize, k: u32) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&d) {
            return Err(EuclidError::InvalidDimension(d));
        }
        let max = max_resolution(d);
        if !(1..=max).contains(&k) {
            return Err(EuclidError::InvalidResolution { d, k, min: 1, max });
        }
        Ok(Lattice { d, k })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn resolution(&self) -> u32 {
        self.k
    }

    /// Cells per axis.
    pub fn side_cells(&self) -> usize {
        1 << self.k
    }

    pub fn len(&self) -> usize {
        self.side_cells().pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell side `h = 2^-k` in coordinate units.
    pub fn h_units(&self) -> Coord {
        3 << (SCALE_BITS - self.k as i32)
    }

    pub fn h(&self) -> f64 {
        (-(self.k as f64)).exp2()
    }

    pub fn cell_measure(&self) -> f64 {
        self.h().powi(self.d as i32)
    }

    pub fn domain(&self) -> Cube {
        Cube::unit(self.d).expect("valid dimension")
    }

    pub fn multi_index(&self, cell: usize) -> [usize; MAX_DIM] {
        let n = self.side_cells();
        let mut out = [0; MAX_DIM];
        let mut rest = cell;
        for o in out.iter_mut().take(self.d) {
            *o = rest % n;
            rest /= n;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> Option<usize> {
        let n = self.side_cells();
        if multi.len() != self.d || multi.iter().any(|&i| i >= n) {
            return None;
        }
        Some(multi.iter().rev().fold(0, |acc, &i| acc * n + i))
    }

    /// Cell center in coordinate units.
    pub fn center(&self, cell: usize) -> [Coord; MAX_DIM] {
        let half = self.h_units() / 2;
        let m = self.multi_index(cell);
        let mut out = [0; MAX_DIM];
        for a in 0..self.d {
            out[a] = (2 * m[a] as Coord + 1) * half;
        }
        out
    }

    pub fn cell_cube(&self, cell: usize) -> Cube {
        let h = self.h_units();
        let m = self.multi_index(cell);
        let lo: Vec<Coord> = m[..self.d].iter().map(|&i| i as Coord * h).collect();
        Cube::new(&lo, h).expect("cells are valid cubes")
    }

    /// Fraction of each cell covered by `q`, as `(cell, fraction)` for cells
    /// that meet it. Exact per axis.
    pub fn overlaps(&self, q: &Cube) -> Vec<(usize, f64)> {
        let h = self.h_units();
        let n = self.side_cells() as Coord;
        let mut axes: Vec<Vec<(usize, f64)>> = Vec::with_capacity(self.d);
        for a in 0..self.d {
            let lo = q.lo()[a];
            let hi = lo + q.side();
            let first = lo.div_euclid(h).max(0);
            let last = (hi - 1).div_euclid(h).min(n - 1);
            let mut axis = Vec::new();
            for i in first..=last {
                let len = hi.min((i + 1) * h) - lo.max(i * h);
                if len > 0 {
                    axis.push((i as usize, len as f64 / h as f64));
                }
            }
            if axis.is_empty() {
                return Vec::new();
            }
            axes.push(axis);
        }
        let mut out = vec![(0usize, 1.0f64)];
        let side = self.side_cells();
        for a in (0..self.d).rev() {
            out = out
                .into_iter()
                .flat_map(|(idx, frac)| axes[a].iter().map(move |&(i, g)| (idx * side + i, frac * g)))
                .collect();
        }
        out
    }
}

/// A cell-constant function on a lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeFunction {
    lattice: Lattice,
    values: Vec<f64>,
}

impl LatticeFunction {
    pub fn new(lattice: Lattice, values: Vec<f64>) -> Result<Self> {
        if values.len() != lattice.len() {
            return Err(EuclidError::InvalidArgument(format!(
                "expected {} cell values, got {}",
                lattice.len(),
                values.len()
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(EuclidError::InvalidArgument(format!("non-finite value {v} in cell {i}")));
        }
        Ok(LatticeFunction { lattice, values })
    }

    pub fn zeros(lattice: Lattice) -> Self {
        LatticeFunction {
            lattice,
            values: vec![0.0; lattice.len()],
        }
    }

    pub fn from_fn(lattice: Lattice, f: impl FnMut(usize) -> f64) -> Result<Self> {
        LatticeFunction::new(lattice, (0..lattice.len()).map(f).collect())
    }

    /// `f = c` on the cells whose centers lie in `q`, 0 elsewhere.
    pub fn indicator(lattice: Lattice, q: &Cube, c: f64) -> Result<Self> {
        LatticeFunction::from_fn(lattice, |i| {
            if q.contains_point(&lattice.center(i)[..lattice.dim()]) {
                c
            } else {
                0.0
            }
        })
    }

    pub(crate) fn from_vec_unchecked(lattice: Lattice, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), lattice.len());
        LatticeFunction { lattice, values }
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn abs(&self) -> LatticeFunction {
        LatticeFunction::from_vec_unchecked(self.lattice, self.values.iter().map(|v| v.abs()).collect())
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.lattice.cell_measure()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// `⟨|f|⟩_Q` with `f = 0` off the domain.
    pub fn abs_average(&self, q: &Cube) -> f64 {
        let mass: f64 = self
            .lattice
            .overlaps(q)
            .into_iter()
            .map(|(i, frac)| self.values[i].abs() * frac)
            .sum();
        mass * self.lattice.cell_measure() / q.measure()
    }

    /// Smallest union-of-cells box containing the support, as a cube with
    /// the longest box side; `None` for the zero function.
    pub fn support_box(&self) -> Option<Cube> {
        let d = self.lattice.dim();
        let mut lo = [usize::MAX; MAX_DIM];
        let mut hi = [0usize; MAX_DIM];
        let mut any = false;
        for (i, &v) in self.values.iter().enumerate() {
            if v != 0.0 {
                any = true;
                let m = self.lattice.multi_index(i);
                for a in 0..d {
                    lo[a] = lo[a].min(m[a]);
                    hi[a] = hi[a].max(m[a] + 1);
                }
            }
        }
        if !any {
            return None;
        }
        let h = self.lattice.h_units();
        let side = (0..d).map(|a| hi[a] - lo[a]).max().expect("dim >= 1") as Coord * h;
        let corner: Vec<Coord> = lo[..d].iter().map(|&i| i as Coord * h).collect();
        Some(Cube::new(&corner, side).expect("nonempty support box"))
    }

    pub fn read_csv<R: Read>(lattice: Lattice, input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(input);
        let expected = header(lattice.dim());
        let headers = rdr.headers()?.clone();
        if headers.iter().ne(expected.iter().copied()) {
            return Err(EuclidError::InvalidArgument(format!(
                "expected header `{}`, found `{}`",
                expected.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let d = lattice.dim();
        let mut values = vec![0.0; lattice.len()];
        let mut seen = HashSet::new();
        for record in rdr.records() {
            let record = record?;
            if record.len() != d + 1 {
                return Err(EuclidError::InvalidArgument(format!(
                    "row has {} fields, expected {}",
                    record.len(),
                    d + 1
                )));
            }
            let mut multi = [0usize; MAX_DIM];
            for a in 0..d {
                multi[a] = record[a].parse().map_err(|_| {
                    EuclidError::InvalidArgument(format!("bad cell index `{}`", &record[a]))
                })?;
            }
            let cell = lattice.flat_index(&multi[..d]).ok_or_else(|| {
                EuclidError::InvalidArgument(format!(
                    "cell {:?} outside the {}-cell lattice",
                    &multi[..d],
                    lattice.side_cells()
                ))
            })?;
            let value: f64 = record[d].parse().map_err(|_| {
                EuclidError::InvalidArgument(format!("bad value `{}`", &record[d]))
            })?;
            if !value.is_finite() {
                return Err(EuclidError::InvalidArgument(format!("non-finite value {value}")));
            }
            if !seen.insert(cell) {
                return Err(EuclidError::InvalidArgument(format!("duplicate cell {:?}", &multi[..d])));
            }
            values[cell] = value;
        }
        Ok(LatticeFunction { lattice, values })
    }

    /// Writes the nonzero cells.
    pub fn write_csv<W: Write>(&self, output: W) -> Result<()> {
        let d = self.lattice.dim();
        let mut wtr = csv::Writer::from_writer(output);
        wtr.write_record(header(d))?;
        for (i, &v) in self.values.iter().enumerate() {
            if v != 0.0 {
                let m = self.lattice.multi_index(i);
                let mut row: Vec<String> = m[..d].iter().map(|x| x.to_string()).collect();
                row.push(v.to_string());
                wtr.write_record(&row)?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

fn header(d: usize) -> &'static [&'static str] {
    match d {
        1 => &["i", "value"],
        2 => &["i", "j", "value"],
        _ => &["i", "j", "k", "value"],
    }
}
