use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::Context;
use ctm_core::machine::stream_of_consciousness;
use ctm_core::{Trace, TraceFilter};

pub fn run(path: &Path, stream: bool, filter: &[String]) -> anyhow::Result<bool> {
    let filter = TraceFilter::parse_terms(filter)?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if text.trim().is_empty() {
        return Ok(true);
    }
    let trace = Trace::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
    let mut out = io::BufWriter::new(io::stdout().lock());
    if stream {
        let mut kept = Trace::new(trace.header);
        kept.events = trace.filtered(&filter).cloned().collect();
        for (_, gist) in stream_of_consciousness(&kept) {
            writeln!(out, "{}", gist.to_text())?;
        }
    } else {
        for e in trace.filtered(&filter) {
            writeln!(out, "{e}")?;
        }
    }
    out.flush()?;
    Ok(true)
}
