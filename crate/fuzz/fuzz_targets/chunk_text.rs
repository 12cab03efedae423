#![no_main]

use ctm_core::Chunk;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|s: &str| {
    if let Ok(chunk) = Chunk::parse_text(s) {
        let text = chunk.to_text();
        assert_eq!(Chunk::parse_text(&text).unwrap(), chunk);
    }
});
