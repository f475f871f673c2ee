#![no_main]
use libfuzzer_sys::fuzz_target;
use sparsedom_core::{build_tree, TreeSpec};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = TreeSpec::from_toml_str(text) {
        if let Ok(tree) = build_tree(&spec) {
            let again = build_tree(&TreeSpec::from_toml_str(&tree.to_spec().to_toml_string()).unwrap()).unwrap();
            assert_eq!(again.num_leaves(), tree.num_leaves());
        }
    }
});
