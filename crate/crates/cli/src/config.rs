//! Experiment configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//! suite = "domination"
//! instances = 10
//!
//! [grid]
//! max_depth = 10
//!
//! [output]
//! dir = "results"
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sparsedom_core::EpsRule;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Domination,
    Truncation,
    Paraproduct,
    WeightsSweep,
    Euclid,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Domination => "domination",
            Suite::Truncation => "truncation",
            Suite::Paraproduct => "paraproduct",
            Suite::WeightsSweep => "weights-sweep",
            Suite::Euclid => "euclid",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Random trees: depth drawn from `1..=max_depth`.
    pub max_depth: u32,
    /// Random trees: branching drawn from `2..=max_branching`.
    pub max_branching: u32,
    pub max_leaves: usize,
    /// Probability that a leaf value of `f` is zero.
    pub zero_fraction: f64,
    /// Paraproduct suite: probability that a node carries a `b_Q`.
    pub carleson_density: f64,
    /// Weights sweep.
    pub depths: Vec<u32>,
    pub alphas: Vec<f64>,
    pub p: f64,
    pub eps_rule: String,
    pub starts: usize,
    /// Euclid suite: lattice resolutions, cycled over the instances.
    pub lattice_k: Vec<u32>,
    pub dimension: usize,
    pub kernel: String,
    pub density: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            max_depth: 10,
            max_branching: 4,
            max_leaves: 2000,
            zero_fraction: 0.3,
            carleson_density: 0.5,
            depths: vec![8, 10, 12, 14],
            alphas: vec![0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5],
            p: 2.0,
            eps_rule: "alternating".into(),
            starts: 4,
            lattice_k: vec![12],
            dimension: 1,
            kernel: "hilbert".into(),
            density: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub suite: Suite,
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_instances() -> usize {
    10
}

pub const MAX_INSTANCES: usize = 100_000;

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(CliError::input)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn eps_rule(&self) -> Result<EpsRule> {
        self.grid.eps_rule.parse().map_err(CliError::input)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        let bad = |m: String| Err(CliError::Input(m));
        if self.instances == 0 || self.instances > MAX_INSTANCES {
            return bad(format!("instances must lie in 1..={MAX_INSTANCES}"));
        }
        if g.max_depth == 0 || g.max_depth > 16 {
            return bad("max_depth must lie in 1..=16".into());
        }
        if !(2..=8).contains(&g.max_branching) {
            return bad("max_branching must lie in 2..=8".into());
        }
        if g.max_leaves < 2 || g.max_leaves > 1 << 16 {
            return bad("max_leaves must lie in 2..=65536".into());
        }
        if !(0.0..1.0).contains(&g.zero_fraction) {
            return bad("zero_fraction must lie in [0, 1)".into());
        }
        if !(0.0..=1.0).contains(&g.carleson_density) {
            return bad("carleson_density must lie in [0, 1]".into());
        }
        if !(g.p.is_finite() && g.p > 1.0) {
            return bad(format!("p = {} must be a finite number above 1", g.p));
        }
        if g.starts == 0 {
            return bad("starts must be positive".into());
        }
        self.eps_rule()?;
        if self.suite == Suite::WeightsSweep {
            if g.depths.is_empty() || g.alphas.is_empty() {
                return bad("weights sweep needs depths and alphas".into());
            }
            if g.depths.iter().any(|&d| d == 0 || d > 16) {
                return bad("sweep depths must lie in 1..=16".into());
            }
            if g.alphas.iter().any(|a| !a.is_finite()) {
                return bad("alphas must be finite".into());
            }
        }
        if self.suite == Suite::Euclid {
            let d = g.dimension;
            if !(1..=sparsedom_euclid::grid::MAX_DIM).contains(&d) {
                return bad(format!("dimension {d} must lie in 1..=3"));
            }
            if g.lattice_k.is_empty() {
                return bad("lattice_k is empty".into());
            }
            let (lo, hi) = (
                sparsedom_euclid::min_resolution(d),
                sparsedom_euclid::lattice::max_resolution(d),
            );
            if let Some(k) = g.lattice_k.iter().find(|&&k| k < lo || k > hi) {
                return bad(format!("lattice k = {k} outside {lo}..={hi} for d = {d}"));
            }
            let kind: sparsedom_euclid::KernelKind = g.kernel.parse().map_err(CliError::input)?;
            if kind == sparsedom_euclid::KernelKind::Custom {
                return bad("the euclid suite takes hilbert or lipschitz kernels".into());
            }
            if kind == sparsedom_euclid::KernelKind::Hilbert && d != 1 {
                return bad("the Hilbert kernel lives on the line".into());
            }
            if let Some(rho) = g.density {
                if !(rho > 0.0 && rho < 1.0) {
                    return bad(format!("density {rho} must lie in (0, 1)"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let cfg = ExperimentConfig::from_toml_str("seed = 3\nsuite = \"paraproduct\"\n").unwrap();
        assert_eq!(cfg.instances, 10);
        assert_eq!(cfg.suite, Suite::Paraproduct);
        assert_eq!(cfg.grid, GridConfig::default());
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "suite = \"domination\"",
            "seed = 1\nsuite = \"nonsense\"",
            "seed = 1\nsuite = \"domination\"\ninstances = 0",
            "seed = 1\nsuite = \"domination\"\ntypo = 3",
            "seed = 1\nsuite = \"weights-sweep\"\n[grid]\np = 1.0",
            "seed = 1\nsuite = \"weights-sweep\"\n[grid]\nalphas = []",
            "seed = 1\nsuite = \"domination\"\n[grid]\neps_rule = \"maybe\"",
            "seed = 1\nsuite = \"euclid\"\n[grid]\nlattice_k = [4]",
            "seed = 1\nsuite = \"euclid\"\n[grid]\ndimension = 2\nlattice_k = [8]",
            "seed = 1\nsuite = \"euclid\"\n[grid]\ndensity = 1.5",
        ] {
            let err = ExperimentConfig::from_toml_str(text).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}");
        }
    }
}
