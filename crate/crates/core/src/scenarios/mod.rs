//! Scripted experiments: each builds machines, runs them with a control
//! (ablation) run, and checks the outcome against the oracle expectation.

mod blindsight;
mod change_blindness;
mod inattentional;
mod meditation;
mod self_model;
mod sleep;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::de::DeserializeOwned;

pub use blindsight::{run_blindsight, BlindsightParams};
pub use change_blindness::{run_change_blindness, ChangeBlindnessParams};
pub use inattentional::{run_inattentional_blindness, InattentionalParams};
pub use meditation::{run_meditation, MeditationParams};
pub use self_model::{run_self_model, SelfModelParams};
pub use sleep::{run_sleep_dream_cycle, SleepParams};

pub use crate::processors::{WorldModelEntry, WorldTag};

use crate::chunk::Chunk;
use crate::error::{Error, Result};
use crate::machine::{new_ctm, AggregationCheck, Ctm, CtmConfig, EventKind, TickReport, Trace};
use crate::record::fmt_real;
use crate::uptree::exact_win_probabilities;

pub const SCENARIOS: [&str; 6] =
    ["blindsight", "inattentional-blindness", "change-blindness", "sleep-dream", "meditation", "self-model"];

#[derive(Debug, Clone, PartialEq)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub observed: String,
    pub expected: String,
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub name: String,
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
    pub assertions: Vec<Assertion>,
    /// Traces by run label; the main run is labelled `main`.
    pub traces: Vec<(String, Trace)>,
}

impl ScenarioResult {
    fn new(name: &str, seed: u64) -> Self {
        Self { name: name.to_owned(), seed, metrics: BTreeMap::new(), assertions: Vec::new(), traces: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }

    pub fn assertion(&self, name: &str) -> Option<&Assertion> {
        self.assertions.iter().find(|a| a.name == name)
    }

    pub fn main_trace(&self) -> Option<&Trace> {
        self.traces.iter().find(|(l, _)| l == "main").map(|(_, t)| t)
    }

    fn set(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_owned(), value);
    }

    fn check(&mut self, name: &str, passed: bool, observed: impl ToString, expected: impl ToString) {
        self.assertions.push(Assertion {
            name: name.to_owned(),
            passed,
            observed: observed.to_string(),
            expected: expected.to_string(),
        });
    }

    /// Records the aggregation identity for one finished machine.
    fn check_aggregation(&mut self, label: &str, ctm: &Ctm) {
        self.record_aggregation(label, &ctm.check_aggregation());
    }

    fn record_aggregation(&mut self, label: &str, c: &AggregationCheck) {
        let worst = c.max_mood_error.max(c.max_intensity_error);
        self.check(
            &format!("aggregation_identity_{label}"),
            c.holds(AGGREGATION_TOL) && c.ticks_checked > 0,
            format!("max_rel_error={worst:e} ticks={}", c.ticks_checked),
            format!("<= {AGGREGATION_TOL:e}"),
        );
    }

    /// Human-readable tables followed by a `key=value` summary block.
    pub fn report(&self) -> String {
        let mut out = String::new();
        let status = if self.passed() { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "scenario {}  seed {}  {status}", self.name, self.seed);
        let _ = writeln!(out);
        let width = self.metrics.keys().map(String::len).max().unwrap_or(6).max(6);
        let _ = writeln!(out, "{:<width$}  value", "metric");
        for (k, v) in &self.metrics {
            let _ = writeln!(out, "{k:<width$}  {}", fmt_real(*v));
        }
        let _ = writeln!(out);
        let width = self.assertions.iter().map(|a| a.name.len()).max().unwrap_or(9).max(9);
        let _ = writeln!(out, "      {:<width$}  observed / expected", "assertion");
        for a in &self.assertions {
            let mark = if a.passed { "pass" } else { "FAIL" };
            let _ = writeln!(out, "{mark}  {:<width$}  {} / {}", a.name, a.observed, a.expected);
        }
        let failed = self.assertions.iter().filter(|a| !a.passed).count();
        let _ = writeln!(out);
        let _ = writeln!(out, "[summary]");
        let _ = writeln!(out, "scenario={}", self.name);
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "passed={}", self.passed());
        let _ = writeln!(out, "assertions={}", self.assertions.len());
        let _ = writeln!(out, "failed={failed}");
        for (k, v) in &self.metrics {
            let _ = writeln!(out, "metric.{k}={}", fmt_real(*v));
        }
        out
    }
}

/// Relative tolerance for the STM aggregation identity.
pub const AGGREGATION_TOL: f64 = 1e-9;

/// Four-sigma binomial tolerance.
pub fn binomial_tolerance(p: f64, trials: u64) -> f64 {
    4.0 * (p * (1.0 - p) / trials as f64).sqrt()
}

/// Parses scenario parameters, falling back to defaults for missing keys.
fn params<P: DeserializeOwned + Default>(text: Option<&str>) -> Result<P> {
    match text {
        None => Ok(P::default()),
        Some(t) => toml::from_str(t).map_err(|e| Error::Config(e.to_string().trim_end().to_owned())),
    }
}

/// Runs a named scenario. `overrides` is optional TOML for its parameters.
pub fn run_scenario(name: &str, overrides: Option<&str>, seed: u64) -> Result<ScenarioResult> {
    match name {
        "blindsight" => run_blindsight(&params(overrides)?, seed),
        "inattentional-blindness" => run_inattentional_blindness(&params(overrides)?, seed),
        "change-blindness" => run_change_blindness(&params(overrides)?, seed),
        "sleep-dream" => run_sleep_dream_cycle(&params(overrides)?, seed),
        "meditation" => run_meditation(&params(overrides)?, seed),
        "self-model" => run_self_model(&params(overrides)?, seed),
        _ => Err(Error::UnknownScenario(name.to_owned())),
    }
}

/// Runs a machine built from a configuration file for its whole lifetime.
/// The only assertion is the aggregation identity.
pub fn run_config(cfg: CtmConfig) -> Result<ScenarioResult> {
    let mut res = ScenarioResult::new("custom", cfg.seed);
    let ticks = cfg.lifetime;
    let (mut installs, mut broadcasts, mut gated, mut blocked) = (0u64, 0u64, 0u64, 0u64);
    let mut ctm = drive(cfg, ticks, |_, r| {
        installs += u64::from(r.installed.is_some());
        broadcasts += u64::from(r.broadcast.is_some());
        gated += r.inputs_gated as u64;
        blocked += r.commands_blocked as u64;
    })?;
    res.set("ticks", ticks as f64);
    res.set("height", f64::from(ctm.height()));
    res.set("stm_installs", installs as f64);
    res.set("broadcasts", broadcasts as f64);
    res.set("inputs_gated", gated as f64);
    res.set("commands_blocked", blocked as f64);
    res.check_aggregation("main", &ctm);
    res.traces.push(("main".into(), ctm.take_trace()));
    Ok(res)
}

/// Builds a machine and runs `ticks` ticks, handing every report to `each`.
fn drive(cfg: CtmConfig, ticks: u64, mut each: impl FnMut(&Ctm, &TickReport)) -> Result<Ctm> {
    let mut ctm = new_ctm(cfg)?;
    for _ in 0..ticks {
        let r = ctm.tick()?;
        each(&ctm, &r);
    }
    Ok(ctm)
}

/// Exact per-processor win probabilities for the submissions in `report`.
fn tick_oracle(ctm: &Ctm, report: &TickReport) -> Result<Vec<f64>> {
    let chunks: Vec<Chunk> = report
        .events
        .iter()
        .filter_map(|e| match &e.kind {
            EventKind::Submission { chunk } => Some(chunk.clone()),
            _ => None,
        })
        .collect();
    let cfg = ctm.config();
    let probs = exact_win_probabilities(&chunks, &cfg.competition, cfg.arity, cfg.mode)?;
    Ok(probs.as_slice()[..cfg.n_processors].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_scenario() {
        assert_eq!(run_scenario("gorilla", None, 0).unwrap_err(), Error::UnknownScenario("gorilla".into()));
    }

    #[test]
    fn bad_overrides_rejected() {
        assert!(matches!(run_scenario("blindsight", Some("nonsense = 1"), 0), Err(Error::Config(_))));
    }

    #[test]
    fn report_layout() {
        let mut r = ScenarioResult::new("demo", 3);
        r.set("rate", 0.25);
        r.check("rate_ok", true, 0.25, "0.25");
        let text = r.report();
        assert!(text.starts_with("scenario demo  seed 3  PASS\n"));
        assert!(text.contains("\n[summary]\nscenario=demo\nseed=3\npassed=true\nassertions=1\nfailed=0\n"));
        assert!(text.contains("metric.rate=0.250000000"));
    }

    #[test]
    fn config_run_checks_aggregation() {
        let mut cfg = CtmConfig::new(5, 2).with_processor(1, "c", crate::processors::BehaviorSpec::Constant {
            tags: vec![crate::chunk::Modality::Speech],
            payload: "hi".into(),
            weight: -2.0,
            flags: vec![],
            value: None,
        });
        cfg.lifetime = 30;
        let r = run_config(cfg).unwrap();
        assert!(r.passed(), "{}", r.report());
        assert_eq!(r.metric("stm_installs"), Some(27.0));
        assert_eq!(r.main_trace().unwrap().header.height, 3);
    }

    #[test]
    fn tolerance() {
        assert!((binomial_tolerance(0.01, 100_000) - 0.001258).abs() < 1e-6);
    }
}
