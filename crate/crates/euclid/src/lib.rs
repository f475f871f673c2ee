//! The Euclidean side at lattice scale: shifted dyadic grids with exact
//! arithmetic, Dini kernels with smooth truncations, adapted maximal
//! functions and truncations, and the stopping-time sparse domination of
//! `T_♯` over the `3^d` grids.

pub mod domination;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod lattice;
pub mod truncation;

pub use domination::{
    check_sparse_cubes, default_density, dominate_euclid, min_resolution, sparse_apply_cubes, CubeRecord,
    EuclidDomination, EuclidOptions, EuclidVerify, ExteriorBound,
};
pub use error::{EuclidError, Result};
pub use grid::{cover_cube, Coord, Cube, GridCube, GridIndex, ShiftedGridFamily, UNIT};
pub use kernel::{dini_check, CutoffPsi, DiniKernel, DiniReport, KernelKind, Modulus, SmoothnessReport};
pub use lattice::{Lattice, LatticeFunction};
pub use truncation::{
    adapted_maximal, adapted_truncation, cells_in, convolve, truncated_apply, ScaleProfiles, Stencil,
};
