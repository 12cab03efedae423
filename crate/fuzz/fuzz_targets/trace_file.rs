#![no_main]

use ctm_core::Trace;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|s: &str| {
    if let Ok(trace) = Trace::parse(s) {
        let text = trace.render();
        assert_eq!(Trace::parse(&text).unwrap(), trace);
        let _ = ctm_core::machine::stream_of_consciousness(&trace);
    }
});
