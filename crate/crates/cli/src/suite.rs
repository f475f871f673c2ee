//! Suites of random instances, certified one by one.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sparsedom_core::stats::weak_l1_quotient;
use sparsedom_core::{
    check_sparse, dominate, dominate_paraproduct, dominate_truncation, maximal_truncation, paraproduct,
    sharpness_sweep, transform, verify_domination, weighted_norm_l2, CellFunction, DominationResult,
    SweepConfig, SweepRow, Weight,
};
use sparsedom_euclid::{dominate_euclid, DiniKernel, EuclidDomination, EuclidOptions, Lattice, LatticeFunction};

use crate::config::{ExperimentConfig, Suite};
use crate::error::{CliError, Result};
use crate::instances::{instance_rng, lattice_instance, MartingaleInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operator {
    Transform,
    Truncation,
    Paraproduct,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceRow {
    pub instance: usize,
    /// Leaves of the tree, or cells of the lattice.
    pub size: usize,
    /// Tree depth, or lattice resolution exponent.
    pub depth: u32,
    pub members: usize,
    pub constant: f64,
    pub c_needed: f64,
    pub verified: bool,
    pub sparse_ratio: f64,
    pub sparse: bool,
    pub weak_l1: f64,
    pub l2_constant: Option<f64>,
    pub grids_used: Option<usize>,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub suite: &'static str,
    pub seed: u64,
    pub instances: usize,
    pub failures: usize,
    pub max_constant: Option<f64>,
    pub max_c_needed: Option<f64>,
    pub max_weak_l1: Option<f64>,
    pub max_sparse_ratio: Option<f64>,
    pub max_l2_constant: Option<f64>,
    pub slope: Option<f64>,
    pub max_ratio: Option<f64>,
}

#[derive(Debug, Clone)]
pub enum Witness {
    Martingale(MartingaleInstance, Operator),
    Lattice {
        f: LatticeFunction,
        kernel: String,
        density: Option<f64>,
    },
}

impl Witness {
    /// Writes the inputs and a `replay.txt` holding the command that re-runs
    /// the failing certification.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let replay = match self {
            Witness::Martingale(inst, op) => {
                inst.write(dir)?;
                match op {
                    Operator::Transform => "sparsedom dominate --tree tree.toml --f f.csv --eps eps.csv --out .".to_string(),
                    Operator::Truncation => {
                        "sparsedom dominate --tree tree.toml --f f.csv --eps eps.csv --truncation --out .".to_string()
                    }
                    Operator::Paraproduct => {
                        "sparsedom dominate --tree tree.toml --f f.csv --paraproduct b --out .".to_string()
                    }
                }
            }
            Witness::Lattice { f, kernel, density } => {
                fs::create_dir_all(dir).map_err(CliError::io(dir))?;
                let path = dir.join("f.csv");
                let file = fs::File::create(&path).map_err(CliError::io(&path))?;
                f.write_csv(file).map_err(CliError::compute)?;
                let l = f.lattice();
                let mut cmd = format!(
                    "sparsedom euclid-demo --d {} --k {} --kernel {kernel} --f f.csv --out .",
                    l.dim(),
                    l.resolution()
                );
                if let Some(rho) = density {
                    cmd.push_str(&format!(" --density {rho}"));
                }
                cmd
            }
        };
        let path = dir.join("replay.txt");
        fs::write(&path, replay + "\n").map_err(CliError::io(&path))
    }
}

#[derive(Debug, Clone)]
pub enum Rows {
    Instances(Vec<InstanceRow>),
    Sweep(Vec<SweepRow>),
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub rows: Rows,
    pub summary: SummaryRow,
    pub failures: Vec<(usize, Witness)>,
}

impl SuiteReport {
    pub fn instance_rows(&self) -> &[InstanceRow] {
        match &self.rows {
            Rows::Instances(r) => r,
            Rows::Sweep(_) => &[],
        }
    }
}

fn finish_row(mut row: InstanceRow) -> InstanceRow {
    row.ok = row.verified && row.sparse;
    row
}

/// Dominates one martingale instance and checks the result.
pub fn certify_martingale(
    op: Operator,
    inst: &MartingaleInstance,
    index: usize,
    seed: u64,
) -> Result<(InstanceRow, DominationResult)> {
    let tree = &inst.tree;
    let root = tree.root();
    let f = &inst.f;
    let compute = CliError::compute;
    let (res, lhs, l2) = match op {
        Operator::Transform | Operator::Truncation => {
            let (res, lhs) = if op == Operator::Transform {
                (dominate(&inst.eps, f, root), transform(&inst.eps, f).map_err(compute)?.abs())
            } else {
                (dominate_truncation(&inst.eps, f, root), maximal_truncation(&inst.eps, f).map_err(compute)?)
            };
            let tf = transform(&inst.eps, f).map_err(compute)?;
            let l2 = (f.l2_norm() > 0.0).then(|| tf.l2_norm() / f.l2_norm());
            (res.map_err(compute)?, lhs, l2)
        }
        Operator::Paraproduct => {
            let b = inst
                .b
                .as_ref()
                .ok_or_else(|| CliError::Input("paraproduct instance without a Carleson family".into()))?;
            let res = dominate_paraproduct(b, f, root).map_err(compute)?;
            let lhs = paraproduct(b, f).map_err(compute)?.abs();
            let w = Weight::constant(tree.clone(), 1.0).map_err(compute)?;
            let norm = weighted_norm_l2(b, &w, seed ^ index as u64).map_err(compute)?;
            (res, lhs, Some(norm.value))
        }
    };
    let verify = verify_domination(&lhs, &res.sparse, f, root).map_err(compute)?;
    let sparse = check_sparse(&res.sparse);
    let weak_source: CellFunction = match op {
        Operator::Paraproduct => lhs,
        _ => maximal_truncation(&inst.eps, f).map_err(compute)?,
    };
    let weak_l1 = weak_l1_quotient(weak_source.values(), &tree.leaf_measures(), f.l1_norm());
    let row = finish_row(InstanceRow {
        instance: index,
        size: tree.num_leaves(),
        depth: tree.depth(),
        members: res.sparse.len(),
        constant: res.constant,
        c_needed: verify.c_needed,
        verified: verify.ok,
        sparse_ratio: sparse.worst_ratio,
        sparse: sparse.valid,
        weak_l1,
        l2_constant: l2,
        grids_used: None,
        ok: false,
    });
    Ok((row, res))
}

/// Dominates one lattice function and checks the result.
pub fn certify_lattice(
    kernel: &DiniKernel,
    f: &LatticeFunction,
    options: &EuclidOptions,
    index: usize,
) -> Result<(InstanceRow, EuclidDomination)> {
    let res = dominate_euclid(kernel, f, options).map_err(|e| match e {
        sparsedom_euclid::EuclidError::Io(_) => CliError::compute(e),
        other => CliError::input(other),
    })?;
    let row = finish_row(InstanceRow {
        instance: index,
        size: f.lattice().len(),
        depth: f.lattice().resolution(),
        members: res.records.len(),
        constant: res.constant,
        c_needed: res.verify.c_needed,
        verified: res.verify.ok,
        sparse_ratio: res.worst_sparse_ratio(),
        sparse: res.all_sparse(),
        weak_l1: res.weak_l1,
        l2_constant: None,
        grids_used: Some(res.grids_used()),
        ok: false,
    });
    Ok((row, res))
}

fn max_of(rows: &[InstanceRow], f: impl Fn(&InstanceRow) -> Option<f64>) -> Option<f64> {
    rows.iter().filter_map(f).reduce(f64::max)
}

fn summarize(cfg: &ExperimentConfig, rows: &[InstanceRow]) -> SummaryRow {
    SummaryRow {
        suite: cfg.suite.name(),
        seed: cfg.seed,
        instances: rows.len(),
        failures: rows.iter().filter(|r| !r.ok).count(),
        max_constant: max_of(rows, |r| Some(r.constant)),
        max_c_needed: max_of(rows, |r| Some(r.c_needed)),
        max_weak_l1: max_of(rows, |r| Some(r.weak_l1)),
        max_sparse_ratio: max_of(rows, |r| Some(r.sparse_ratio)),
        max_l2_constant: max_of(rows, |r| r.l2_constant),
        slope: None,
        max_ratio: None,
    }
}

/// Runs the configured suite. Rows come back in instance order whatever the
/// scheduling; failed instances carry their inputs as witnesses.
pub fn run_suite(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let g = &cfg.grid;
    let outcomes: Vec<(InstanceRow, Option<Witness>)> = match cfg.suite {
        Suite::Domination | Suite::Truncation | Suite::Paraproduct => {
            let op = match cfg.suite {
                Suite::Domination => Operator::Transform,
                Suite::Truncation => Operator::Truncation,
                _ => Operator::Paraproduct,
            };
            (0..cfg.instances)
                .into_par_iter()
                .map(|i| {
                    let mut rng = instance_rng(cfg.seed, i);
                    let inst = MartingaleInstance::generate(&mut rng, g, op == Operator::Paraproduct)?;
                    let (row, _) = certify_martingale(op, &inst, i, cfg.seed)?;
                    let witness = (!row.ok).then(|| Witness::Martingale(inst, op));
                    Ok((row, witness))
                })
                .collect::<Result<_>>()?
        }
        Suite::Euclid => {
            let kind = g.kernel.parse().map_err(CliError::input)?;
            let kernel = DiniKernel::from_kind(kind, g.dimension, None).map_err(CliError::input)?;
            let options = EuclidOptions {
                density: g.density,
                ..Default::default()
            };
            (0..cfg.instances)
                .into_par_iter()
                .map(|i| {
                    let mut rng = instance_rng(cfg.seed, i);
                    let k = g.lattice_k[i % g.lattice_k.len()];
                    let lattice = Lattice::new(g.dimension, k).map_err(CliError::input)?;
                    let f = lattice_instance(&mut rng, lattice)?;
                    let (row, _) = certify_lattice(&kernel, &f, &options, i)?;
                    let witness = (!row.ok).then(|| Witness::Lattice {
                        f,
                        kernel: g.kernel.clone(),
                        density: g.density,
                    });
                    Ok((row, witness))
                })
                .collect::<Result<_>>()?
        }
        Suite::WeightsSweep => {
            let sweep = sharpness_sweep(&SweepConfig {
                depths: g.depths.clone(),
                alphas: g.alphas.clone(),
                eps_rule: cfg.eps_rule()?,
                p: g.p,
                seed: cfg.seed,
                starts: g.starts,
            })
            .map_err(CliError::compute)?;
            let summary = SummaryRow {
                suite: cfg.suite.name(),
                seed: cfg.seed,
                instances: sweep.rows.len(),
                failures: 0,
                max_constant: None,
                max_c_needed: None,
                max_weak_l1: None,
                max_sparse_ratio: None,
                max_l2_constant: None,
                slope: sweep.slope,
                max_ratio: Some(sweep.max_ratio),
            };
            return Ok(SuiteReport {
                rows: Rows::Sweep(sweep.rows),
                summary,
                failures: Vec::new(),
            });
        }
    };
    let mut rows = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for (row, witness) in outcomes {
        if let Some(w) = witness {
            failures.push((row.instance, w));
        }
        rows.push(row);
    }
    let summary = summarize(cfg, &rows);
    Ok(SuiteReport {
        rows: Rows::Instances(rows),
        summary,
        failures,
    })
}

pub(crate) fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = fs::File::create(path).map_err(CliError::io(path))?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r).map_err(|e| CliError::compute(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(CliError::io(path))
}

/// Writes `instances.csv` (or `sweep.csv`), `summary.csv`, and one
/// `witness/<instance>` directory per failure. Returns the certification
/// error when there were failures.
pub fn write_report(report: &SuiteReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    match &report.rows {
        Rows::Instances(rows) => write_csv(&dir.join("instances.csv"), rows)?,
        Rows::Sweep(rows) => write_csv(&dir.join("sweep.csv"), rows)?,
    }
    write_csv(&dir.join("summary.csv"), std::slice::from_ref(&report.summary))?;
    if report.failures.is_empty() {
        return Ok(());
    }
    let mut witnesses: Vec<PathBuf> = Vec::new();
    for (i, w) in &report.failures {
        let wdir = dir.join("witness").join(i.to_string());
        w.write(&wdir)?;
        witnesses.push(wdir);
    }
    let list = dir.join("failures.txt");
    let mut file = fs::File::create(&list).map_err(CliError::io(&list))?;
    for (i, _) in &report.failures {
        writeln!(file, "{i}").map_err(CliError::io(&list))?;
    }
    Err(CliError::Certification {
        message: format!(
            "{} of {} instances failed",
            report.failures.len(),
            report.summary.instances
        ),
        witnesses,
    })
}
