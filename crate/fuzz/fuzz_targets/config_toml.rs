#![no_main]

use ctm_core::CtmConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|s: &str| {
    if let Ok(cfg) = CtmConfig::from_toml_str(s) {
        let again = CtmConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(again, cfg);
    }
});
