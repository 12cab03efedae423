use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use ctm_core::record::fmt_real;
use ctm_core::uptree::{exact_win_probabilities, monte_carlo_win_frequencies};
use ctm_core::CompetitionFunctionSpec;
use serde::Deserialize;

use crate::parse_mode;
use crate::theorem::level0;

/// Competition fixture file. Command-line flags override its fields.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Fixture {
    schema_version: u32,
    weights: Vec<f64>,
    #[serde(default)]
    arity: Option<usize>,
    #[serde(default)]
    f: Option<String>,
    #[serde(default)]
    mode: Option<String>,
}

pub fn run(
    path: &Path,
    f: Option<&str>,
    mode: Option<&str>,
    arity: Option<usize>,
    trials: u64,
    seed: u64,
) -> anyhow::Result<bool> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let fixture: Fixture = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if fixture.schema_version != 1 {
        bail!("fixture schema_version {} is not supported (expected 1)", fixture.schema_version);
    }
    let f_text = f.or(fixture.f.as_deref()).unwrap_or("intensity");
    let spec: CompetitionFunctionSpec = f_text.parse()?;
    let mode = parse_mode(mode.or(fixture.mode.as_deref()).unwrap_or("probabilistic"))?;
    let arity = arity.or(fixture.arity).unwrap_or(2);
    let chunks = level0(&fixture.weights)?;
    let oracle = exact_win_probabilities(&chunks, &spec, arity, mode)?.into_vec();
    let freq = if trials > 0 { Some(monte_carlo_win_frequencies(&chunks, &spec, arity, mode, trials, seed)?) } else { None };

    let mut table = csv::Writer::from_writer(Vec::new());
    if freq.is_some() {
        table.write_record(["leaf", "probability", "frequency"])?;
    } else {
        table.write_record(["leaf", "probability"])?;
    }
    for (i, p) in oracle.iter().enumerate().take(fixture.weights.len()) {
        let mut row = vec![i.to_string(), fmt_real(*p)];
        if let Some(fr) = &freq {
            row.push(fmt_real(fr[i]));
        }
        table.write_record(&row)?;
    }
    print!("{}", String::from_utf8(table.into_inner().context("flushing table")?)?);
    Ok(true)
}
