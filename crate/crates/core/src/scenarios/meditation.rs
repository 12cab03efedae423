use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{drive, tick_oracle, ScenarioResult};
use crate::chunk::Modality;
use crate::error::Result;
use crate::machine::{AggregationCheck, CtmConfig, Trace};
use crate::processors::BehaviorSpec;

const MMP: usize = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeditationParams {
    pub seeds: u64,
    pub n_processors: usize,
    pub mmp_weight: f64,
    pub other_weight: f64,
    pub hush_period: u64,
    /// Factor by which each hush divides the other processors' power.
    pub c_sea: f64,
    pub session_ticks: u64,
    /// Ticks between the end of the first session and the start of the second.
    pub break_ticks: u64,
    /// Submissions per window when timing how fast the share reaches one half.
    pub window: u64,
}

impl Default for MeditationParams {
    fn default() -> Self {
        Self {
            seeds: 20,
            n_processors: 32,
            mmp_weight: 4.0,
            other_weight: 1.0,
            hush_period: 5,
            c_sea: 1.25,
            session_ticks: 300,
            break_ticks: 100,
            window: 20,
        }
    }
}

fn config(p: &MeditationParams, seed: u64, mmp_weight: f64, sessions: Vec<[u64; 2]>, ticks: u64) -> CtmConfig {
    let mut cfg = CtmConfig::new(p.n_processors, 2);
    cfg.seed = seed;
    cfg.lifetime = ticks;
    cfg.sea.c_sea = p.c_sea;
    cfg = cfg.with_processor(MMP, "mmp", BehaviorSpec::Meditator {
        weight: mmp_weight,
        hush_period: p.hush_period.max(1),
        sessions,
    });
    for i in 1..p.n_processors {
        cfg = cfg.with_processor(i, "chatter", BehaviorSpec::Constant {
            tags: vec![Modality::Speech],
            payload: format!("thought_{i}"),
            weight: p.other_weight,
            flags: vec![],
            value: None,
        });
    }
    cfg
}

struct Outcome {
    /// Whether the MMp won the competition started at each tick.
    mmp_won: Vec<Option<bool>>,
    /// Exact probability of an MMp win at each tick.
    oracle: Vec<f64>,
    others_mean_g: f64,
    /// Mean g of the other processors after each tick.
    others_g_by_tick: Vec<f64>,
    aggregation: AggregationCheck,
    trace: Option<Trace>,
}

impl Outcome {
    fn share(&self, from: u64, to: u64) -> f64 {
        let won: Vec<bool> = self.mmp_won[from as usize..to as usize].iter().flatten().copied().collect();
        won.iter().filter(|w| **w).count() as f64 / won.len().max(1) as f64
    }

    fn oracle_share(&self, from: u64, to: u64) -> f64 {
        let s = &self.oracle[from as usize..to as usize];
        s.iter().sum::<f64>() / s.len().max(1) as f64
    }

    /// Ticks from `start` until a full window of submissions reaches a
    /// half share for the MMp.
    fn ticks_to_half(&self, start: u64, end: u64, window: u64) -> Option<u64> {
        (start + window..=end).find(|&s| self.share(s - window, s) >= 0.5).map(|s| s - start)
    }
}

fn run_once(p: &MeditationParams, seed: u64, mmp_weight: f64, sessions: Vec<[u64; 2]>, ticks: u64) -> Result<Outcome> {
    let mut mmp_won = vec![None; ticks as usize];
    let mut oracle = Vec::with_capacity(ticks as usize);
    let mut oracle_err = None;
    let mut others_g_by_tick = Vec::with_capacity(ticks as usize);
    let mut ctm = drive(config(p, seed, mmp_weight, sessions, ticks), ticks, |ctm, r| {
        others_g_by_tick.push(mean(ctm.processors().iter().skip(1).map(|q| q.g())));
        if let Some(c) = &r.installed {
            mmp_won[c.t() as usize] = Some(c.address() == MMP);
        }
        match tick_oracle(ctm, r) {
            Ok(probs) => oracle.push(probs[MMP]),
            Err(e) => oracle_err = Some(e),
        }
    })?;
    if let Some(e) = oracle_err {
        return Err(e);
    }
    let others_mean_g = mean(ctm.processors().iter().skip(1).map(|q| q.g()));
    Ok(Outcome { mmp_won, oracle, others_mean_g, others_g_by_tick, aggregation: ctm.check_aggregation(), trace: Some(ctm.take_trace()) })
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    sum / n.max(1) as f64
}

/// The MMp repeatedly broadcasts `hush`; every other processor loses
/// weight-giving power, so the MMp's share of STM grows over a session and
/// grows faster in a second session. Shares are averaged over `seeds` runs.
pub fn run_meditation(p: &MeditationParams, seed: u64) -> Result<ScenarioResult> {
    let mut res = ScenarioResult::new("meditation", seed);
    let h = u64::from(CtmConfig::new(p.n_processors, 2).shape()?.height);
    let len = p.session_ticks;
    let second = len + p.break_ticks;
    let sessions = vec![[0, len], [second, second + len]];
    let ticks = second + len + h;
    let seeds: Vec<u64> = (0..p.seeds.max(1)).map(|i| seed.wrapping_add(i)).collect();
    let mut runs = seeds
        .par_iter()
        .map(|&s| run_once(p, s, p.mmp_weight, sessions.clone(), ticks))
        .collect::<Result<Vec<_>>>()?;

    let third = len / 3;
    let bounds = [0, third, 2 * third, len];
    let shares: Vec<f64> = bounds.windows(2).map(|b| mean(runs.iter().map(|o| o.share(b[0], b[1])))).collect();
    let oracles: Vec<f64> = bounds.windows(2).map(|b| mean(runs.iter().map(|o| o.oracle_share(b[0], b[1])))).collect();
    for (i, (s, o)) in shares.iter().zip(&oracles).enumerate() {
        res.set(&format!("mmp_share_third_{}", i + 1), *s);
        res.set(&format!("mmp_oracle_third_{}", i + 1), *o);
    }
    let others_g = runs.iter().map(|o| o.others_mean_g).fold(0.0, f64::max);
    res.set("seeds", runs.len() as f64);
    res.set("others_mean_g_max", others_g);
    let rising = |v: &[f64]| v.windows(2).all(|w| w[1] > w[0]);
    res.check("share_increases", rising(&shares), format!("{shares:?}"), "strictly increasing");
    res.check("oracle_share_increases", rising(&oracles), format!("{oracles:?}"), "strictly increasing");
    res.check("others_hushed", others_g < 1.0, others_g, "< 1");
    // Seed-averaged mean g of the other processors at the start of the
    // session and at the end of each third.
    let g_marks: Vec<f64> = std::iter::once(1.0)
        .chain(bounds[1..].iter().map(|&b| mean(runs.iter().map(|o| o.others_g_by_tick[b as usize - 1]))))
        .collect();
    for (i, g) in g_marks.iter().enumerate().skip(1) {
        res.set(&format!("others_mean_g_third_{i}"), *g);
    }
    let falling = g_marks.windows(2).all(|w| w[1] < w[0]);
    res.check("others_g_decreases", falling, format!("{g_marks:?}"), "strictly decreasing");

    // A session that never reaches half counts as its full length.
    let first = mean(runs.iter().map(|o| o.ticks_to_half(0, len, p.window).unwrap_or(len) as f64));
    let repeat = mean(runs.iter().map(|o| o.ticks_to_half(second, second + len, p.window).unwrap_or(len) as f64));
    res.set("session_1_mean_ticks_to_half", first);
    res.set("session_2_mean_ticks_to_half", repeat);
    res.check("practice_effect", repeat < first, format!("{first} then {repeat}"), "second session faster");

    let mut control = run_once(p, seed, 0.0, vec![[0, len]], len + h)?;
    let cs = control.share(0, len);
    let co = control.oracle_share(0, len);
    res.set("zero_weight_share", cs);
    res.set("zero_weight_oracle", co);
    res.check("zero_weight_share_matches_oracle", cs == 0.0 && co == 0.0, cs, co);
    res.check("zero_weight_others_unhushed", control.others_mean_g == 1.0, control.others_mean_g, 1);

    for (s, o) in seeds.iter().zip(&runs) {
        res.record_aggregation(&format!("seed_{s}"), &o.aggregation);
    }
    res.record_aggregation("zero_weight_mmp", &control.aggregation);
    if let Some(t) = runs[0].trace.take() {
        res.traces.push(("main".into(), t));
    }
    if let Some(t) = control.trace.take() {
        res.traces.push(("zero_weight_mmp".into(), t));
    }
    Ok(res)
}
