#![no_main]
use libfuzzer_sys::fuzz_target;
use sparsedom::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::from_toml_str(text) {
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(again.seed, cfg.seed);
        assert_eq!(again.suite, cfg.suite);
    }
});
