//! Exact cubes and the `3^d` shifted dyadic grids.
//!
//! Coordinates are integers in units of `1 / (3 · 2^60)`, so every cube of
//! every shifted grid at scales `2^-60 ..= 2^60` has exact corners, and so do
//! lattice cells and their centers down to `2^-59`.

use std::fmt;

use serde::Serialize;

use crate::error::{EuclidError, Result};

pub type Coord = i128;

pub const SCALE_BITS: i32 = 60;
/// Length one.
pub const UNIT: Coord = 3 << SCALE_BITS;
pub const MAX_DIM: usize = 3;
/// Finest and coarsest grid scales `j` (side `2^-j`).
pub const FINEST_SCALE: i32 = SCALE_BITS;
pub const COARSEST_SCALE: i32 = -SCALE_BITS;

pub fn units_to_f64(c: Coord) -> f64 {
    c as f64 / UNIT as f64
}

/// Nearest coordinate to a real number.
pub fn f64_to_units(x: f64) -> Result<Coord> {
    let scaled = x * UNIT as f64;
    if !scaled.is_finite() || scaled.abs() > 2f64.powi(120) {
        return Err(EuclidError::InvalidCube(format!("coordinate {x} out of range")));
    }
    Ok(scaled.round() as Coord)
}

fn check_dim(dim: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&dim) {
        Ok(())
    } else {
        Err(EuclidError::InvalidDimension(dim))
    }
}

/// Half-open axis-parallel cube `lo + [0, side)^d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cube {
    dim: u8,
    lo: [Coord; MAX_DIM],
    side: Coord,
}

impl Cube {
    pub fn new(lo: &[Coord], side: Coord) -> Result<Self> {
        check_dim(lo.len())?;
        if side <= 0 {
            return Err(EuclidError::InvalidCube(format!("side {side} must be positive")));
        }
        let mut corner = [0; MAX_DIM];
        corner[..lo.len()].copy_from_slice(lo);
        Ok(Cube {
            dim: lo.len() as u8,
            lo: corner,
            side,
        })
    }

    /// `[0, 1)^d`.
    pub fn unit(dim: usize) -> Result<Self> {
        Cube::new(&vec![0; dim], UNIT)
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn lo(&self) -> &[Coord] {
        &self.lo[..self.dim()]
    }

    pub fn side(&self) -> Coord {
        self.side
    }

    pub fn side_f64(&self) -> f64 {
        units_to_f64(self.side)
    }

    /// Lebesgue measure.
    pub fn measure(&self) -> f64 {
        self.side_f64().powi(self.dim as i32)
    }

    pub fn contains_point(&self, p: &[Coord]) -> bool {
        self.lo()
            .iter()
            .zip(p)
            .all(|(&lo, &x)| lo <= x && x < lo + self.side)
    }

    pub fn contains_cube(&self, other: &Cube) -> bool {
        self.dim == other.dim
            && self
                .lo()
                .iter()
                .zip(other.lo())
                .all(|(&a, &b)| a <= b && b + other.side <= a + self.side)
    }

    pub fn intersects(&self, other: &Cube) -> bool {
        self.lo()
            .iter()
            .zip(other.lo())
            .all(|(&a, &b)| a < b + other.side && b < a + self.side)
    }

    /// `ℓ∞` distance from an interior point to the boundary; 0 outside.
    pub fn dist_to_boundary(&self, p: &[Coord]) -> Coord {
        if !self.contains_point(p) {
            return 0;
        }
        self.lo()
            .iter()
            .zip(p)
            .map(|(&lo, &x)| (x - lo).min(lo + self.side - x))
            .min()
            .expect("dim >= 1")
    }

    /// `ℓ∞` distance from a point to the cube; 0 inside.
    pub fn dist_to_point(&self, p: &[Coord]) -> Coord {
        self.lo()
            .iter()
            .zip(p)
            .map(|(&lo, &x)| (lo - x).max(x - (lo + self.side)).max(0))
            .max()
            .expect("dim >= 1")
    }

    /// The concentric cube with `factor` times the side. Odd excess is split
    /// toward the lower corner.
    pub fn dilate(&self, factor: u32) -> Result<Cube> {
        let factor = Coord::from(factor);
        if factor == 0 {
            return Err(EuclidError::InvalidCube("dilation factor 0".into()));
        }
        let side = self
            .side
            .checked_mul(factor)
            .ok_or_else(|| EuclidError::InvalidCube("dilation overflow".into()))?;
        let shift = (side - self.side).div_euclid(2);
        let lo: Vec<Coord> = self.lo().iter().map(|&a| a - shift).collect();
        Cube::new(&lo, side)
    }
}

impl fmt::Display for Cube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, &lo) in self.lo().iter().enumerate() {
            if i > 0 {
                write!(f, " x ")?;
            }
            write!(f, "{}, {}", units_to_f64(lo), units_to_f64(lo + self.side))?;
        }
        write!(f, ")")
    }
}

/// Index `u = Σ_a s_a 3^a` of the grid with per-axis shifts `s_a ∈ {0, 1, 2}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct GridIndex(pub u16);

impl GridIndex {
    pub fn from_shifts(shifts: &[u8]) -> Result<Self> {
        check_dim(shifts.len())?;
        let mut u = 0u16;
        for &s in shifts.iter().rev() {
            if s > 2 {
                return Err(EuclidError::InvalidCube(format!("shift {s} not in 0..=2")));
            }
            u = 3 * u + u16::from(s);
        }
        Ok(GridIndex(u))
    }

    pub fn shifts(self, dim: usize) -> [u8; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        let mut u = self.0;
        for s in out.iter_mut().take(dim) {
            *s = (u % 3) as u8;
            u /= 3;
        }
        out
    }
}

impl fmt::Display for GridIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The grids `𝒟_u`, `u < 3^d`, with cubes
/// `2^-j ([0,1)^d + m + (-1)^j s / 3)`, `s` the shift vector of `u`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShiftedGridFamily {
    dim: usize,
}

impl ShiftedGridFamily {
    pub fn new(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(ShiftedGridFamily { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        3usize.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn grids(&self) -> impl Iterator<Item = GridIndex> {
        (0..self.len() as u16).map(GridIndex)
    }

    /// The cube of grid `u` at scale `j` containing `point`.
    pub fn locate(&self, grid: GridIndex, scale: i32, point: &[Coord]) -> Result<GridCube> {
        check_scale(scale)?;
        if point.len() != self.dim {
            return Err(EuclidError::InvalidDimension(point.len()));
        }
        let shifts = grid.shifts(self.dim);
        let mut m = [0i64; MAX_DIM];
        for a in 0..self.dim {
            let (step, offset) = axis_geometry(scale, shifts[a]);
            m[a] = (point[a] - offset).div_euclid(step) as i64;
        }
        Ok(GridCube {
            dim: self.dim as u8,
            shifts,
            scale,
            m,
        })
    }
}

fn check_scale(scale: i32) -> Result<()> {
    if (COARSEST_SCALE..=FINEST_SCALE).contains(&scale) {
        Ok(())
    } else {
        Err(EuclidError::InvalidCube(format!("scale {scale} out of range")))
    }
}

/// Side length and per-axis offset of grid cubes at scale `j`, in units:
/// corners sit at `side · m + (-1)^j s · side / 3`.
fn axis_geometry(scale: i32, shift: u8) -> (Coord, Coord) {
    let third: Coord = 1 << (SCALE_BITS - scale);
    let sign = if scale.rem_euclid(2) == 0 { 1 } else { -1 };
    (3 * third, sign * Coord::from(shift) * third)
}

/// A cube of one of the shifted grids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridCube {
    dim: u8,
    shifts: [u8; MAX_DIM],
    scale: i32,
    m: [i64; MAX_DIM],
}

impl GridCube {
    pub fn new(grid: GridIndex, dim: usize, scale: i32, m: &[i64]) -> Result<Self> {
        check_dim(dim)?;
        check_scale(scale)?;
        if m.len() != dim || grid.0 as usize >= 3usize.pow(dim as u32) {
            return Err(EuclidError::InvalidCube("grid index or position does not match the dimension".into()));
        }
        let mut pos = [0; MAX_DIM];
        pos[..dim].copy_from_slice(m);
        Ok(GridCube {
            dim: dim as u8,
            shifts: grid.shifts(dim),
            scale,
            m: pos,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn grid(&self) -> GridIndex {
        GridIndex::from_shifts(&self.shifts[..self.dim()]).expect("valid shifts")
    }

    pub fn scale(&self) -> i32 {
        self.scale
    }

    pub fn position(&self) -> &[i64] {
        &self.m[..self.dim()]
    }

    pub fn cube(&self) -> Cube {
        let mut lo = [0; MAX_DIM];
        let mut side = 0;
        for a in 0..self.dim() {
            let (step, offset) = axis_geometry(self.scale, self.shifts[a]);
            lo[a] = step * Coord::from(self.m[a]) + offset;
            side = step;
        }
        Cube::new(&lo[..self.dim()], side).expect("grid cubes are valid")
    }

    /// The cube of the same grid one scale up containing this one.
    pub fn parent(&self) -> Result<GridCube> {
        check_scale(self.scale - 1)?;
        let sign = if self.scale.rem_euclid(2) == 0 { 1 } else { -1 };
        let mut m = self.m;
        for a in 0..self.dim() {
            m[a] = (self.m[a] + sign * i64::from(self.shifts[a])).div_euclid(2);
        }
        Ok(GridCube {
            scale: self.scale - 1,
            m,
            ..*self
        })
    }
}

impl fmt::Display for GridCube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "grid {} scale {} {}", self.grid(), self.scale, self.cube())
    }
}

/// A grid cube `Q ⊇ P` with `ℓQ ≤ 6 ℓP`: the smallest admissible scale, then
/// the first grid in index order.
pub fn cover_cube(p: &Cube) -> (GridIndex, GridCube) {
    let family = ShiftedGridFamily::new(p.dim()).expect("cube dimension is valid");
    // Finest scale whose side is at least ℓP.
    let mut scale = FINEST_SCALE;
    while scale > COARSEST_SCALE && axis_geometry(scale, 0).0 < p.side() {
        scale -= 1;
    }
    loop {
        let (side, _) = axis_geometry(scale, 0);
        assert!(side <= 6 * p.side(), "no shifted grid cube covers {p}");
        for grid in family.grids() {
            let q = family
                .locate(grid, scale, p.lo())
                .expect("scale in range");
            if q.cube().contains_cube(p) {
                return (grid, q);
            }
        }
        assert!(scale > COARSEST_SCALE, "no shifted grid cube covers {p}");
        scale -= 1;
    }
}
