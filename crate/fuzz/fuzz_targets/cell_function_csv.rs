#![no_main]
use std::sync::Arc;

use libfuzzer_sys::fuzz_target;
use sparsedom_core::io::{read_cell_function, write_cell_function};
use sparsedom_core::{build_tree, TreeSpec};

fuzz_target!(|data: &[u8]| {
    let tree = Arc::new(build_tree(&TreeSpec::uniform(3, 2)).unwrap());
    if let Ok(f) = read_cell_function(tree.clone(), data) {
        let mut out = Vec::new();
        write_cell_function(&f, &mut out).unwrap();
        let g = read_cell_function(tree, out.as_slice()).unwrap();
        assert_eq!(f.values(), g.values());
    }
});
