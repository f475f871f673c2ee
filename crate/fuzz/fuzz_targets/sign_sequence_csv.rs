#![no_main]
use std::sync::Arc;

use libfuzzer_sys::fuzz_target;
use sparsedom_core::io::{read_sign_sequence, write_sign_sequence};
use sparsedom_core::{build_tree, TreeSpec};

fuzz_target!(|data: &[u8]| {
    let tree = Arc::new(build_tree(&TreeSpec::uniform(3, 3)).unwrap());
    if let Ok(eps) = read_sign_sequence(tree.clone(), data) {
        let mut out = Vec::new();
        write_sign_sequence(&eps, &mut out).unwrap();
        let again = read_sign_sequence(tree, out.as_slice()).unwrap();
        assert_eq!(eps.as_slice(), again.as_slice());
    }
});
