//! Reproducible random instances. Instance `i` of a suite with seed `s` draws
//! from ChaCha8 seeded with `s` on stream `i`, so it can be rebuilt alone.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsedom_core::io::{write_carleson_dir, write_cell_function, write_sign_sequence};
use sparsedom_core::{build_tree, CarlesonFamily, CellFunction, MeasureTree, SignSequence, TreeSpec};
use sparsedom_euclid::{Lattice, LatticeFunction};

use crate::config::GridConfig;
use crate::error::{CliError, Result};

pub fn instance_rng(seed: u64, instance: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(instance as u64);
    rng
}

#[derive(Debug, Clone)]
pub struct MartingaleInstance {
    pub spec: TreeSpec,
    pub tree: Arc<MeasureTree>,
    pub f: CellFunction,
    pub eps: SignSequence,
    pub b: Option<CarlesonFamily>,
}

impl MartingaleInstance {
    /// Random tree, `f` with values in `(-1, 1)` and a fraction of zeros,
    /// multipliers uniform in `[-1, 1]`, and optionally a normalized Carleson
    /// family.
    pub fn generate(rng: &mut ChaCha8Rng, grid: &GridConfig, paraproduct: bool) -> Result<Self> {
        let depth = rng.random_range(1..=grid.max_depth);
        let branching = rng.random_range(2..=grid.max_branching);
        let spec = TreeSpec::random(depth, branching, grid.max_leaves, rng.random());
        let tree = Arc::new(build_tree(&spec).map_err(CliError::compute)?);
        let f = CellFunction::from_fn(tree.clone(), |_| {
            if rng.random::<f64>() < grid.zero_fraction {
                0.0
            } else {
                rng.random_range(-1.0..1.0)
            }
        })
        .map_err(CliError::compute)?;
        let eps = SignSequence::random_uniform(tree.clone(), rng);
        let b = paraproduct.then(|| CarlesonFamily::random(tree.clone(), rng, grid.carleson_density));
        Ok(MartingaleInstance { spec, tree, f, eps, b })
    }

    /// Writes `tree.toml`, `f.csv` and `eps.csv` (or the Carleson directory
    /// `b/`) to `dir`, in the formats the `dominate` subcommand reads.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
        let tree_path = dir.join("tree.toml");
        fs::write(&tree_path, self.spec.to_toml_string()).map_err(CliError::io(&tree_path))?;
        let f_path = dir.join("f.csv");
        let file = fs::File::create(&f_path).map_err(CliError::io(&f_path))?;
        write_cell_function(&self.f, file).map_err(CliError::compute)?;
        match &self.b {
            Some(b) => write_carleson_dir(b, &dir.join("b")).map_err(CliError::compute)?,
            None => {
                let eps_path = dir.join("eps.csv");
                let file = fs::File::create(&eps_path).map_err(CliError::io(&eps_path))?;
                write_sign_sequence(&self.eps, file).map_err(CliError::compute)?;
            }
        }
        Ok(())
    }
}

/// A function on `[0,1)^d` supported on a random box of cells, with values
/// uniform in `(-1, 1)` there.
pub fn lattice_instance(rng: &mut ChaCha8Rng, lattice: Lattice) -> Result<LatticeFunction> {
    let n = lattice.side_cells();
    let d = lattice.dim();
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    for a in 0..d {
        let x = rng.random_range(0..n);
        let y = rng.random_range(0..n);
        lo[a] = x.min(y);
        hi[a] = x.max(y) + 1;
    }
    LatticeFunction::from_fn(lattice, |cell| {
        let m = lattice.multi_index(cell);
        if (0..d).all(|a| (lo[a]..hi[a]).contains(&m[a])) {
            rng.random_range(-1.0..1.0)
        } else {
            0.0
        }
    })
    .map_err(CliError::compute)
}
