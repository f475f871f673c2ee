#![no_main]
use std::sync::Arc;

use libfuzzer_sys::fuzz_target;
use sparsedom_core::io::read_sparse_collection;
use sparsedom_core::{build_tree, check_sparse, TreeSpec};

fuzz_target!(|data: &[u8]| {
    let tree = Arc::new(build_tree(&TreeSpec::uniform(4, 2)).unwrap());
    if let Ok(s) = read_sparse_collection(tree, data) {
        let report = check_sparse(&s);
        assert!(report.worst_ratio.is_finite());
    }
});
