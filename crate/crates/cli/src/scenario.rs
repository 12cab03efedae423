use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use ctm_core::{run_config, run_scenario, CtmConfig, Error, ScenarioResult, SCENARIOS};

pub fn run(name: &str, config: Option<&Path>, out: &Path, trials: Option<u64>, seed: Option<u64>) -> anyhow::Result<bool> {
    let text = config
        .map(|p| fs::read_to_string(p).with_context(|| format!("reading {}", p.display())))
        .transpose()?;
    let result = if name == "custom" {
        let Some(text) = text else { bail!("run-scenario custom needs --config <machine.toml>") };
        if trials.is_some() {
            bail!("--trials does not apply to custom runs");
        }
        let mut cfg = CtmConfig::from_toml_str(&text)?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        run_config(cfg)?
    } else {
        let overrides = match trials {
            None => text,
            Some(t) if name == "inattentional-blindness" => Some(with_trials(text.as_deref(), t)?),
            Some(_) => bail!("--trials applies to inattentional-blindness only"),
        };
        match run_scenario(name, overrides.as_deref(), seed.unwrap_or(0)) {
            Err(Error::UnknownScenario(n)) => {
                bail!("unknown scenario {n:?}; available: {}, custom", SCENARIOS.join(", "))
            }
            r => r?,
        }
    };
    write_outputs(&result, out)?;
    print!("{}", result.report());
    Ok(result.passed())
}

fn with_trials(text: Option<&str>, trials: u64) -> anyhow::Result<String> {
    let mut table: toml::Table = match text {
        Some(t) => toml::from_str(t).map_err(|e| Error::Config(e.to_string().trim_end().to_owned()))?,
        None => toml::Table::new(),
    };
    let trials = i64::try_from(trials).context("--trials is too large")?;
    table.insert("trials".into(), toml::Value::Integer(trials));
    Ok(toml::to_string(&table)?)
}

fn write_outputs(result: &ScenarioResult, out: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let report = out.join(format!("{}.report.txt", result.name));
    fs::write(&report, result.report()).with_context(|| format!("writing {}", report.display()))?;
    eprintln!("wrote {}", report.display());
    for (label, trace) in &result.traces {
        let path = out.join(format!("{}.{label}.trace", result.name));
        fs::write(&path, trace.render()).with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}
