use serde::{Deserialize, Serialize};

use super::{binomial_tolerance, drive, tick_oracle, ScenarioResult};
use crate::error::Result;
use crate::machine::{CtmConfig, InputMap, SignalSpec};
use crate::processors::BehaviorSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InattentionalParams {
    /// Competitions counted in the main run.
    pub trials: u64,
    /// Competitions counted in each control run.
    pub control_trials: u64,
    pub white_players: usize,
    pub white_weight: f64,
    pub gorilla_weight: f64,
    /// Ticks kept in the written trace.
    pub trace_ticks: u64,
}

impl Default for InattentionalParams {
    fn default() -> Self {
        Self {
            trials: 100_000,
            control_trials: 10_000,
            white_players: 9,
            white_weight: 11.0,
            gorilla_weight: 1.0,
            trace_ticks: 200,
        }
    }
}

/// Every vision processor runs the same attention policy: full weight for
/// white shirts, the gorilla's weight for anything black. The gorilla is the
/// last processor.
fn config(p: &InattentionalParams, seed: u64, gorilla_weight: f64, ticks: u64) -> CtmConfig {
    let n = p.white_players + 1;
    let mut cfg = CtmConfig::new(n, 2);
    cfg.seed = seed;
    cfg.lifetime = ticks;
    cfg.memory.capacity = Some(64);
    cfg.trace.max_ticks = Some(p.trace_ticks);
    for i in 0..n {
        let (sensor, shirt) = if i < p.white_players { (format!("shirt_{i}"), 1.0) } else { ("gorilla".to_owned(), 0.0) };
        cfg.signals.push(SignalSpec::Constant { name: sensor.clone(), value: shirt });
        cfg.inputs.push(InputMap { sensor: sensor.clone(), to: vec![i] });
        cfg = cfg.with_processor(i, "vision", BehaviorSpec::AttentionFilter {
            sensor,
            attended: 1.0,
            attend_weight: p.white_weight,
            ignore_weight: gorilla_weight,
        });
    }
    cfg
}

struct Outcome {
    wins: u64,
    trials: u64,
    oracle: f64,
}

fn run_once(
    p: &InattentionalParams,
    seed: u64,
    gorilla_weight: f64,
    trials: u64,
    res: &mut ScenarioResult,
    label: &str,
) -> Result<Outcome> {
    let gorilla = p.white_players;
    let mut cfg = config(p, seed, gorilla_weight, 0);
    let h = u64::from(cfg.shape()?.height);
    let ticks = trials + h;
    cfg.lifetime = ticks;
    let mut wins = 0;
    let mut oracle = None;
    let mut oracle_err = None;
    let mut ctm = drive(cfg, ticks, |ctm, r| {
        if r.tick == 0 {
            match tick_oracle(ctm, r) {
                Ok(probs) => oracle = Some(probs[gorilla]),
                Err(e) => oracle_err = Some(e),
            }
        }
        if let Some(c) = &r.installed {
            if c.address() == gorilla {
                wins += 1;
            }
        }
    })?;
    if let Some(e) = oracle_err {
        return Err(e);
    }
    res.check_aggregation(label, &ctm);
    res.traces.push((label.to_owned(), ctm.take_trace()));
    Ok(Outcome { wins, trials, oracle: oracle.unwrap_or(f64::NAN) })
}

/// Low weight for black makes the gorilla nearly invisible: it reaches STM
/// at the rate the proportional-selection theorem predicts.
pub fn run_inattentional_blindness(p: &InattentionalParams, seed: u64) -> Result<ScenarioResult> {
    let mut res = ScenarioResult::new("inattentional-blindness", seed);
    let white_total = p.white_weight * p.white_players as f64;
    let closed = |g: f64| if g + white_total == 0.0 { 0.0 } else { g / (g + white_total) };

    let main = run_once(p, seed, p.gorilla_weight, p.trials, &mut res, "main")?;
    let rate = main.wins as f64 / main.trials as f64;
    let tol = binomial_tolerance(main.oracle, main.trials);
    res.set("gorilla_win_rate", rate);
    res.set("gorilla_oracle", main.oracle);
    res.set("gorilla_closed_form", closed(p.gorilla_weight));
    res.set("tolerance", tol);
    res.check(
        "oracle_matches_closed_form",
        (main.oracle - closed(p.gorilla_weight)).abs() <= 1e-12,
        main.oracle,
        closed(p.gorilla_weight),
    );
    res.check(
        "rate_matches_oracle",
        (rate - main.oracle).abs() <= tol,
        rate,
        format!("{} +/- {tol:.6}", main.oracle),
    );
    res.check("oracle_at_most_one_percent", main.oracle <= 0.01 + 1e-12, main.oracle, "<= 0.01");

    let zero = run_once(p, seed, 0.0, p.control_trials, &mut res, "gorilla_zero")?;
    res.set("zero_weight_win_rate", zero.wins as f64 / zero.trials as f64);
    res.check("zero_weight_never_wins", zero.wins == 0 && zero.oracle == 0.0, zero.wins, 0);

    let equal = run_once(p, seed, p.white_weight, p.control_trials, &mut res, "equal_weights")?;
    let eq_rate = equal.wins as f64 / equal.trials as f64;
    let eq_tol = binomial_tolerance(equal.oracle, equal.trials);
    let uniform = 1.0 / (p.white_players + 1) as f64;
    res.set("equal_weight_win_rate", eq_rate);
    res.set("equal_weight_oracle", equal.oracle);
    res.check("equal_weight_oracle_uniform", (equal.oracle - uniform).abs() <= 1e-12, equal.oracle, uniform);
    res.check(
        "equal_weight_rate_matches",
        (eq_rate - equal.oracle).abs() <= eq_tol,
        eq_rate,
        format!("{} +/- {eq_tol:.6}", equal.oracle),
    );
    Ok(res)
}
