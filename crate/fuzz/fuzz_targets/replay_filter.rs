#![no_main]

use ctm_core::TraceFilter;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|s: &str| {
    let terms: Vec<&str> = s.split('\n').collect();
    let _ = TraceFilter::parse_terms(&terms);
});
