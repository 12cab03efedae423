//! Runs the checked-in fuzz corpus through the same round-trip properties
//! as the fuzz targets. Every seed must parse.

use std::fs;
use std::path::PathBuf;

use ctm_core::machine::stream_of_consciousness;
use ctm_core::{Chunk, CtmConfig, Gist, Trace, TraceFilter};

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            let text = fs::read_to_string(&path).unwrap();
            (path, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn chunk_seeds_round_trip() {
    for (path, text) in seeds("chunk_text") {
        let chunk = Chunk::parse_text(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(chunk.to_text(), text);
    }
}

#[test]
fn gist_seeds_round_trip() {
    for (path, text) in seeds("gist_text") {
        let gist = Gist::parse_text(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(gist.to_text(), text);
    }
}

#[test]
fn trace_seeds_round_trip() {
    for (path, text) in seeds("trace_file") {
        let trace = Trace::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(trace.render(), text);
        let _ = stream_of_consciousness(&trace);
    }
}

#[test]
fn config_seeds_round_trip() {
    for (path, text) in seeds("config_toml") {
        let cfg = CtmConfig::from_toml_str(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(CtmConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
    }
}

#[test]
fn filter_seeds_parse() {
    for (path, text) in seeds("replay_filter") {
        let terms: Vec<&str> = text.split('\n').collect();
        TraceFilter::parse_terms(&terms).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}
