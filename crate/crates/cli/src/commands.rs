use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sparsedom_core::io::{read_carleson_dir, read_cell_function, read_sign_sequence, write_sparse_collection};
use sparsedom_core::{build_tree, sharpness_sweep, SignSequence, SweepConfig, TreeSpec};
use sparsedom_euclid::grid::f64_to_units;
use sparsedom_euclid::{
    Cube, DiniKernel, EuclidDomination, EuclidOptions, KernelKind, Lattice, LatticeFunction, Modulus,
};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::instances::{instance_rng, lattice_instance, MartingaleInstance};
use crate::suite::{certify_lattice, certify_martingale, run_suite, write_csv, write_report, Operator, Witness};

#[derive(Debug, Parser)]
#[command(name = "sparsedom", version, about = "Sparse domination experiments on trees and lattices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Seed for every random choice (default 0; a suite uses its configured seed).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dominate a martingale transform, its maximal truncation, or a paraproduct.
    Dominate(DominateArgs),
    /// Weighted norms of the transform against [w]_{A_p} over power weights.
    WeightsSweep(SweepArgs),
    /// Lattice domination of a Dini kernel's maximal truncation.
    EuclidDemo(EuclidArgs),
    /// Run a configured suite of random instances.
    Suite(SuiteArgs),
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Dominate(a) => &a.common,
            Command::WeightsSweep(a) => &a.common,
            Command::EuclidDemo(a) => &a.common,
            Command::Suite(a) => &a.common,
        }
    }
}

#[derive(Debug, Args)]
pub struct DominateArgs {
    #[arg(long)]
    pub tree: PathBuf,
    #[arg(long)]
    pub f: PathBuf,
    #[arg(long, required_unless_present = "paraproduct", conflicts_with = "paraproduct")]
    pub eps: Option<PathBuf>,
    /// Certify against the maximal truncation instead of the transform.
    #[arg(long, conflicts_with = "paraproduct")]
    pub truncation: bool,
    /// Directory of Carleson coefficients `b_Q`, one `<node>.csv` each.
    #[arg(long)]
    pub paraproduct: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1,1.25,1.5")]
    pub alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "8,10,12,14")]
    pub depths: Vec<u32>,
    #[arg(long, default_value = "alternating")]
    pub eps_rule: String,
    /// Random starts for the `p ≠ 2` norm search.
    #[arg(long, default_value_t = 4)]
    pub starts: usize,
    /// Output CSV file.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct EuclidArgs {
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[arg(long, default_value_t = 12)]
    pub k: u32,
    #[arg(long, default_value = "hilbert")]
    pub kernel: String,
    /// Modulus of continuity for the custom kernel: an expression in `t`, or
    /// a CSV table with header `t,omega`.
    #[arg(long)]
    pub omega: Option<String>,
    /// Lattice function; a random one is drawn from the seed when absent.
    #[arg(long)]
    pub f: Option<PathBuf>,
    /// Bound on the stopping-cube measure relative to the parent cube.
    #[arg(long)]
    pub density: Option<f64>,
    /// Lower corner of the top cube, comma separated.
    #[arg(long, value_delimiter = ',', requires = "top_side")]
    pub top_lo: Option<Vec<f64>>,
    #[arg(long, requires = "top_lo")]
    pub top_side: Option<f64>,
    /// Also report the decay of the truncation outside the top cube.
    #[arg(long)]
    pub exterior: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SuiteArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the configured output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn in_file(path: &Path) -> impl Fn(sparsedom_core::Error) -> CliError + '_ {
    move |e| CliError::Input(format!("{}: {e}", path.display()))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Dominate(a) => run_dominate(&a),
        Command::WeightsSweep(a) => run_sweep(&a),
        Command::EuclidDemo(a) => run_euclid(&a),
        Command::Suite(a) => run_configured(&a),
    }
}

#[derive(Debug, Serialize)]
struct LevelRow {
    node_id: usize,
    threshold: f64,
    exceptional_fraction: f64,
    local_constant: f64,
}

/// Reads the inputs, dominates, and writes `sparse.csv`, `levels.csv` and
/// `summary.csv`. On a failed certification the inputs go to `witness/`.
pub fn run_dominate(a: &DominateArgs) -> Result<()> {
    let spec = TreeSpec::from_toml_str(&read_text(&a.tree)?).map_err(in_file(&a.tree))?;
    let tree = Arc::new(build_tree(&spec).map_err(in_file(&a.tree))?);
    let f = read_cell_function(tree.clone(), open(&a.f)?).map_err(in_file(&a.f))?;
    let (eps, b, op) = match (&a.eps, &a.paraproduct) {
        (Some(path), None) => {
            let eps = read_sign_sequence(tree.clone(), open(path)?).map_err(in_file(path))?;
            let op = if a.truncation { Operator::Truncation } else { Operator::Transform };
            (eps, None, op)
        }
        (None, Some(dir)) => {
            let b = read_carleson_dir(tree.clone(), dir).map_err(in_file(dir))?;
            let zero = SignSequence::constant(tree.clone(), 0.0).map_err(CliError::compute)?;
            (zero, Some(b), Operator::Paraproduct)
        }
        _ => return Err(CliError::Input("give exactly one of --eps and --paraproduct".into())),
    };
    let inst = MartingaleInstance { spec, tree, f, eps, b };
    let (row, res) = certify_martingale(op, &inst, 0, a.common.seed.unwrap_or(0))?;

    fs::create_dir_all(&a.out).map_err(CliError::io(&a.out))?;
    let sparse_path = a.out.join("sparse.csv");
    let file = fs::File::create(&sparse_path).map_err(CliError::io(&sparse_path))?;
    write_sparse_collection(&res.sparse, file).map_err(CliError::compute)?;
    let levels: Vec<LevelRow> = res
        .levels
        .iter()
        .map(|(n, s)| LevelRow {
            node_id: n.0,
            threshold: s.threshold,
            exceptional_fraction: s.exceptional_fraction,
            local_constant: s.local_constant,
        })
        .collect();
    write_csv(&a.out.join("levels.csv"), &levels)?;
    write_csv(&a.out.join("summary.csv"), std::slice::from_ref(&row))?;
    if row.ok {
        return Ok(());
    }
    let wdir = a.out.join("witness");
    Witness::Martingale(inst, op).write(&wdir)?;
    Err(CliError::Certification {
        message: format!(
            "verified {} (needs C = {}), sparse ratio {}",
            row.verified, row.c_needed, row.sparse_ratio
        ),
        witnesses: vec![wdir],
    })
}

pub fn run_sweep(a: &SweepArgs) -> Result<()> {
    let eps_rule = a.eps_rule.parse().map_err(CliError::input)?;
    if !(a.p.is_finite() && a.p > 1.0) {
        return Err(CliError::Input(format!("p = {} must be a finite number above 1", a.p)));
    }
    if a.depths.iter().any(|&d| d == 0 || d > 16) {
        return Err(CliError::Input("depths must lie in 1..=16".into()));
    }
    let sweep = sharpness_sweep(&SweepConfig {
        depths: a.depths.clone(),
        alphas: a.alphas.clone(),
        eps_rule,
        p: a.p,
        seed: a.common.seed.unwrap_or(0),
        starts: a.starts.max(1),
    })
    .map_err(CliError::input)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(CliError::io(parent))?;
    }
    write_csv(&a.out, &sweep.rows)?;
    match sweep.slope {
        Some(s) => println!("slope {s:.4}, max ratio {:.4}", sweep.max_ratio),
        None => println!("slope undefined, max ratio {:.4}", sweep.max_ratio),
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct EuclidSummary {
    d: usize,
    k: u32,
    kernel: String,
    dini: f64,
    density: f64,
    constant: f64,
    c_needed: f64,
    verified: bool,
    members: usize,
    grids_used: usize,
    recursion_depth: usize,
    worst_sparse_ratio: f64,
    sparse: bool,
    weak_l1: f64,
    exterior_decay: Option<f64>,
}

#[derive(Debug, Serialize)]
struct GridSparseRow {
    grid: usize,
    shifts: String,
    members: usize,
    worst_ratio: f64,
    valid: bool,
}

fn euclid_kernel(a: &EuclidArgs) -> Result<DiniKernel> {
    let kind: KernelKind = a.kernel.parse().map_err(CliError::input)?;
    let omega = a.omega.as_deref().map(Modulus::parse).transpose().map_err(CliError::input)?;
    DiniKernel::from_kind(kind, a.d, omega).map_err(CliError::input)
}

fn euclid_options(a: &EuclidArgs) -> Result<EuclidOptions> {
    let top = match (&a.top_lo, a.top_side) {
        (Some(lo), Some(side)) => {
            if lo.len() != a.d {
                return Err(CliError::Input(format!("--top-lo needs {} coordinates", a.d)));
            }
            let lo: Vec<_> = lo.iter().map(|&x| f64_to_units(x)).collect::<std::result::Result<_, _>>().map_err(CliError::input)?;
            let side = f64_to_units(side).map_err(CliError::input)?;
            Some(Cube::new(&lo, side).map_err(CliError::input)?)
        }
        _ => None,
    };
    Ok(EuclidOptions {
        top,
        density: a.density,
        exterior: a.exterior,
    })
}

fn write_grid_collections(res: &EuclidDomination, dir: &Path) -> Result<Vec<GridSparseRow>> {
    let d = res.lattice.dim();
    let mut sparse_rows = Vec::new();
    for (u, members) in &res.collections {
        let path = dir.join(format!("S_{u}.csv"));
        let file = fs::File::create(&path).map_err(CliError::io(&path))?;
        let mut w = csv::Writer::from_writer(file);
        let mut header = vec!["scale".to_string()];
        header.extend((0..d).map(|a| format!("m{a}")));
        header.extend((0..d).map(|a| format!("lo{a}")));
        header.push("side".into());
        let csv_err = |e: csv::Error| CliError::compute(format!("{}: {e}", path.display()));
        w.write_record(&header).map_err(csv_err)?;
        for q in members {
            let cube = q.cube();
            let mut rec = vec![q.scale().to_string()];
            rec.extend(q.position().iter().map(|m| m.to_string()));
            rec.extend(cube.lo().iter().map(|&c| sparsedom_euclid::grid::units_to_f64(c).to_string()));
            rec.push(cube.side_f64().to_string());
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(CliError::io(&path))?;
        let report = &res.sparse[u];
        let shifts = u.shifts(d)[..d].iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ");
        sparse_rows.push(GridSparseRow {
            grid: usize::from(u.0),
            shifts,
            members: members.len(),
            worst_ratio: report.worst_ratio,
            valid: report.valid,
        });
    }
    Ok(sparse_rows)
}

/// Writes `S_<u>.csv` for each grid, `sparse.csv`, `records.csv`,
/// `summary.csv`, and `exterior.csv` when requested.
pub fn run_euclid(a: &EuclidArgs) -> Result<()> {
    let kernel = euclid_kernel(a)?;
    let lattice = Lattice::new(a.d, a.k).map_err(CliError::input)?;
    let options = euclid_options(a)?;
    let (f, generated) = match &a.f {
        Some(path) => (LatticeFunction::read_csv(lattice, open(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?, false),
        None => (lattice_instance(&mut instance_rng(a.common.seed.unwrap_or(0), 0), lattice)?, true),
    };
    let (row, res) = certify_lattice(&kernel, &f, &options, 0)?;

    fs::create_dir_all(&a.out).map_err(CliError::io(&a.out))?;
    if generated {
        let path = a.out.join("f.csv");
        let file = fs::File::create(&path).map_err(CliError::io(&path))?;
        f.write_csv(file).map_err(CliError::compute)?;
    }
    let sparse_rows = write_grid_collections(&res, &a.out)?;
    write_csv(&a.out.join("sparse.csv"), &sparse_rows)?;
    write_csv(&a.out.join("records.csv"), &res.records)?;
    if let Some(ext) = &res.exterior {
        #[derive(Serialize)]
        struct CoverRow<'a> {
            dilation: u32,
            grid: usize,
            cube: &'a str,
        }
        let rows: Vec<CoverRow> = ext
            .covers
            .iter()
            .map(|(n, u, q)| CoverRow {
                dilation: 1 << n,
                grid: usize::from(u.0),
                cube: q,
            })
            .collect();
        write_csv(&a.out.join("exterior.csv"), &rows)?;
    }
    let summary = EuclidSummary {
        d: a.d,
        k: a.k,
        kernel: a.kernel.clone(),
        dini: kernel.dini_value(),
        density: a.density.unwrap_or_else(|| sparsedom_euclid::default_density(a.d)),
        constant: res.constant,
        c_needed: res.verify.c_needed,
        verified: res.verify.ok,
        members: res.records.len(),
        grids_used: res.grids_used(),
        recursion_depth: res.recursion_depth(),
        worst_sparse_ratio: res.worst_sparse_ratio(),
        sparse: res.all_sparse(),
        weak_l1: res.weak_l1,
        exterior_decay: res.exterior.as_ref().map(|e| e.decay_constant),
    };
    write_csv(&a.out.join("summary.csv"), std::slice::from_ref(&summary))?;
    if row.ok {
        return Ok(());
    }
    let wdir = a.out.join("witness");
    Witness::Lattice {
        f,
        kernel: a.kernel.clone(),
        density: a.density,
    }
    .write(&wdir)?;
    Err(CliError::Certification {
        message: format!("verified {} (needs C = {}), sparse {}", row.verified, row.c_needed, row.sparse),
        witnesses: vec![wdir],
    })
}

pub fn run_configured(a: &SuiteArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::from_toml_str(&read_text(&a.config)?)?;
    if let Some(seed) = a.common.seed {
        cfg.seed = seed;
    }
    let dir = a
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .ok_or_else(|| CliError::Input("no output directory: set [output] dir or pass --out".into()))?;
    let report = run_suite(&cfg)?;
    let s = &report.summary;
    println!(
        "{}: {} instances, {} failures, max C {:?}, max weak-L1 {:?}, slope {:?}",
        s.suite, s.instances, s.failures, s.max_constant, s.max_weak_l1, s.slope
    );
    write_report(&report, &dir)
}
