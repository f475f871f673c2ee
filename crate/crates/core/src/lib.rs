//! Martingale trees with finite measures, martingale transforms and
//! paraproducts, sparse operators, and their stopping-time domination.

pub mod domination;
pub mod error;
pub mod function;
pub mod io;
pub mod operators;
pub mod stats;
pub mod tree;
pub mod weights;

pub use domination::{
    dominate, dominate_paraproduct, dominate_truncation, verify_domination, DominationResult,
    DominationStats, LevelStat, VerifyReport,
};
pub use error::{Error, Result};
pub use function::{average, conditional_expectation, martingale_difference, CellFunction};
pub use operators::*;
pub use tree::{build_tree, MeasureSpec, MeasureTree, NodeId, TreeKind, TreeSpec};
pub use weights::{
    ap_characteristic, power_weight_family, sharpness_sweep, weighted_norm_l2, weighted_norm_lp,
    ApReport, EpsRule, NormEstimate, Sweep, SweepConfig, SweepRow, Weight,
};
