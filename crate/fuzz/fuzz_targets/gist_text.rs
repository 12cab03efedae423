#![no_main]

use ctm_core::Gist;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|s: &str| {
    if let Ok(gist) = Gist::parse_text(s) {
        assert_eq!(Gist::parse_text(&gist.to_text()).unwrap(), gist);
        assert!(gist.encoded_len() <= 128);
    }
});
