use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{drive, tick_oracle, ScenarioResult};
use crate::chunk::Modality;
use crate::error::Result;
use crate::machine::{AggregationCheck, CtmConfig, EventKind, InputMap, OutputMap, SignalSpec, Trace};
use crate::processors::{BehaviorSpec, SleepStage};

const SLEEP: usize = 0;
const DREAM: usize = 1;
const INNER: usize = 2;
const MOTOR: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SleepParams {
    pub ticks: u64,
    pub seeds: u64,
    pub need_threshold: u64,
    pub recovery: u64,
    pub dream_need: u64,
    pub sleep_weight: f64,
    pub dream_weight: f64,
    pub dream_creator_weight: f64,
    pub inner_weight: f64,
    pub gate_weight: f64,
    pub noise_value: f64,
    /// Ticks after falling asleep at which the loud noise sounds.
    pub noise_offset: u64,
}

impl Default for SleepParams {
    fn default() -> Self {
        Self {
            ticks: 300,
            seeds: 20,
            need_threshold: 120,
            recovery: 1,
            dream_need: 40,
            sleep_weight: 1000.0,
            dream_weight: 1.0,
            dream_creator_weight: 10.0,
            inner_weight: 10.0,
            gate_weight: 100.0,
            noise_value: 500.0,
            noise_offset: 20,
        }
    }
}

impl SleepParams {
    /// Ticks spent submitting in the deep-sleep stage, from the need counter.
    fn deep_sleep_ticks(&self) -> u64 {
        let mut need = self.need_threshold;
        let mut ticks = 1;
        loop {
            need = need.saturating_sub(self.recovery);
            if need <= self.dream_need || self.recovery == 0 {
                return ticks;
            }
            ticks += 1;
        }
    }

    fn falls_asleep_at(&self) -> u64 {
        self.need_threshold.saturating_sub(1)
    }
}

fn config(p: &SleepParams, seed: u64, with_sleep: bool, noise_at: Vec<u64>) -> Result<CtmConfig> {
    let mut cfg = CtmConfig::new(8, 2);
    let h = u64::from(cfg.shape()?.height);
    cfg.seed = seed;
    cfg.lifetime = p.ticks;
    cfg.signals = vec![
        SignalSpec::Constant { name: "light".into(), value: 1.0 },
        SignalSpec::Periodic { name: "sound".into(), values: vec![1.0, 2.0], period: 3 },
        SignalSpec::Constant { name: "touch".into(), value: 1.0 },
        SignalSpec::Pulse { name: "noise".into(), at: noise_at, value: p.noise_value, base: 0.0 },
    ];
    cfg.inputs = vec![
        InputMap { sensor: "light".into(), to: vec![DREAM, 4] },
        InputMap { sensor: "sound".into(), to: vec![5] },
        InputMap { sensor: "touch".into(), to: vec![6] },
        InputMap { sensor: "noise".into(), to: vec![SLEEP] },
    ];
    cfg.outputs = vec![OutputMap { from: MOTOR, actuator: "limbs".into() }];
    let dream_after = u32::try_from(p.deep_sleep_ticks().saturating_sub(h).max(1)).unwrap_or(u32::MAX);
    if with_sleep {
        cfg = cfg.with_processor(SLEEP, "sleep", BehaviorSpec::Sleep {
            need_threshold: p.need_threshold,
            recovery: p.recovery,
            sleep_weight: p.sleep_weight,
            dream_need: p.dream_need,
            dream_weight: p.dream_weight,
            noise_sensor: "noise".into(),
            gate_weight: p.gate_weight,
        });
    }
    let reporter = |sensor: &str, weight| BehaviorSpec::Reporter { sensor: sensor.into(), tags: vec![Modality::Tactile], weight };
    Ok(cfg
        .with_processor(DREAM, "dream_creator", BehaviorSpec::DreamCreator {
            sleep_address: SLEEP,
            dream_after,
            weight: p.dream_creator_weight,
            wake_sensor: "light".into(),
        })
        .with_processor(INNER, "inner_vision", BehaviorSpec::Inner {
            source: DREAM,
            tags: vec![Modality::Vision],
            weight: p.inner_weight,
        })
        .with_processor(MOTOR, "motor", BehaviorSpec::Motor {
            weight: 0.0,
            cues: vec![],
            react_to: Some(DREAM),
            react_actuator: Some("limbs".into()),
        })
        .with_processor(4, "light", reporter("light", 2.0))
        .with_processor(5, "sound", reporter("sound", 2.0))
        .with_processor(6, "touch", reporter("touch", 1.0)))
}

#[derive(Debug, Default)]
struct Outcome {
    stages: Vec<Option<SleepStage>>,
    asleep_installs: u64,
    asleep_nil: u64,
    asleep_nil_oracle: f64,
    dream_installs: u64,
    dream_share: u64,
    dream_share_oracle: f64,
    inputs_during_sleep: u64,
    commands_during_sleep: u64,
    commands_blocked: u64,
    aggregation: AggregationCheck,
    trace: Option<Trace>,
}

impl Outcome {
    fn ticks_in(&self, stage: SleepStage) -> usize {
        self.stages.iter().filter(|s| **s == Some(stage)).count()
    }

    /// Stages in order of first appearance, collapsing repeats.
    fn phases(&self) -> Vec<SleepStage> {
        let mut out: Vec<SleepStage> = Vec::new();
        for s in self.stages.iter().flatten() {
            if out.last() != Some(s) {
                out.push(*s);
            }
        }
        out
    }
}

fn run_once(p: &SleepParams, seed: u64, with_sleep: bool, noise_at: Vec<u64>) -> Result<Outcome> {
    let mut o = Outcome::default();
    let mut installs = Vec::new();
    let mut nil_mass = Vec::new();
    let mut dream_mass = Vec::new();
    let mut oracle_err = None;
    let mut ctm = drive(config(p, seed, with_sleep, noise_at)?, p.ticks, |ctm, r| {
        let asleep_before = r.tick > 0 && o.stages[r.tick as usize - 1].is_some_and(|s| s != SleepStage::Awake);
        o.stages.push(r.sleep_stage);
        let asleep_now = r.sleep_stage.is_some_and(|s| s != SleepStage::Awake);
        if asleep_before {
            o.inputs_during_sleep += r.inputs_delivered as u64;
        }
        if asleep_before || asleep_now {
            o.commands_during_sleep += r.commands_issued as u64;
        }
        o.commands_blocked += r.commands_blocked as u64;
        installs.push(r.installed.clone());
        match tick_oracle(ctm, r) {
            Ok(probs) => {
                let nil: f64 = r
                    .events
                    .iter()
                    .filter_map(|e| match &e.kind {
                        EventKind::Submission { chunk } if chunk.gist().is_nil() => Some(probs[chunk.address()]),
                        _ => None,
                    })
                    .sum();
                nil_mass.push(nil);
                dream_mass.push(probs[DREAM] + probs[INNER]);
            }
            Err(e) => oracle_err = Some(e),
        }
    })?;
    if let Some(e) = oracle_err {
        return Err(e);
    }
    let (mut nil_sum, mut dream_sum) = (0.0, 0.0);
    for chunk in installs.into_iter().flatten() {
        let s = chunk.t() as usize;
        match o.stages[s] {
            Some(SleepStage::Asleep) => {
                o.asleep_installs += 1;
                o.asleep_nil += u64::from(chunk.gist().is_nil());
                nil_sum += nil_mass[s];
            }
            Some(SleepStage::Dreaming) => {
                o.dream_installs += 1;
                o.dream_share += u64::from(chunk.address() == DREAM || chunk.address() == INNER);
                dream_sum += dream_mass[s];
            }
            _ => {}
        }
    }
    o.asleep_nil_oracle = nil_sum / o.asleep_installs.max(1) as f64;
    o.dream_share_oracle = dream_sum / o.dream_installs.max(1) as f64;
    o.aggregation = ctm.check_aggregation();
    o.trace = Some(ctm.take_trace());
    Ok(o)
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Awake, deep sleep with NIL in STM, a dream dominated by the dream creator
/// and inner processors, then waking; with a loud-noise wake and a run
/// without the sleep processor as controls.
pub fn run_sleep_dream_cycle(p: &SleepParams, seed: u64) -> Result<ScenarioResult> {
    let mut res = ScenarioResult::new("sleep-dream", seed);
    let seeds: Vec<u64> = (0..p.seeds.max(1)).map(|i| seed.wrapping_add(i)).collect();
    let mut runs = seeds.par_iter().map(|&s| run_once(p, s, true, vec![])).collect::<Result<Vec<_>>>()?;
    let noise_tick = p.falls_asleep_at() + p.noise_offset;
    let mut noise = run_once(p, seed, true, vec![noise_tick])?;
    let mut none = run_once(p, seed, false, vec![])?;

    // Shares pool the installs of every seed; oracle expectations are the
    // least favourable seed's.
    let pooled = |num: fn(&Outcome) -> u64, den: fn(&Outcome) -> u64| {
        ratio(runs.iter().map(num).sum(), runs.iter().map(den).sum())
    };
    let worst = |f: fn(&Outcome) -> f64| runs.iter().map(f).fold(f64::INFINITY, f64::min);
    let nil_share = pooled(|o| o.asleep_nil, |o| o.asleep_installs);
    let nil_oracle = worst(|o| o.asleep_nil_oracle);
    let dream_share = pooled(|o| o.dream_share, |o| o.dream_installs);
    let dream_oracle = worst(|o| o.dream_share_oracle);
    let inputs_asleep: u64 = runs.iter().map(|o| o.inputs_during_sleep).sum();
    let commands_asleep: u64 = runs.iter().map(|o| o.commands_during_sleep).sum();
    let blocked: u64 = runs.iter().map(|o| o.commands_blocked).sum();
    let cycle = [SleepStage::Awake, SleepStage::Asleep, SleepStage::Dreaming, SleepStage::Awake];
    let full_cycles = runs.iter().filter(|o| o.phases().starts_with(&cycle)).count();

    res.set("seeds", runs.len() as f64);
    res.set("asleep_nil_share", nil_share);
    res.set("asleep_nil_oracle_min", nil_oracle);
    res.set("dream_share", dream_share);
    res.set("dream_share_oracle_min", dream_oracle);
    res.set("asleep_ticks", runs[0].ticks_in(SleepStage::Asleep) as f64);
    res.set("dreaming_ticks", runs[0].ticks_in(SleepStage::Dreaming) as f64);
    res.set("inputs_delivered_while_asleep", inputs_asleep as f64);
    res.set("actuator_commands_while_asleep", commands_asleep as f64);
    res.set("actuator_commands_blocked", blocked as f64);

    res.check("full_cycle_every_seed", full_cycles == runs.len(), full_cycles, runs.len());
    res.check("asleep_stm_nil", nil_share >= 0.95, nil_share, ">= 0.95");
    res.check("asleep_oracle_nil", nil_oracle >= 0.95, nil_oracle, ">= 0.95");
    res.check("dream_share", dream_share >= 0.8, dream_share, ">= 0.8");
    res.check("dream_oracle_share", dream_oracle >= 0.8, dream_oracle, ">= 0.8");
    res.check("no_inputs_while_asleep", inputs_asleep == 0, inputs_asleep, 0);
    res.check("no_actuator_commands_while_asleep", commands_asleep == 0, commands_asleep, 0);

    let woke = noise.stages.get(noise_tick as usize) == Some(&Some(SleepStage::Awake))
        && noise.stages.get(noise_tick as usize - 1) == Some(&Some(SleepStage::Asleep));
    res.set("noise_tick", noise_tick as f64);
    res.set("noise_inputs_while_asleep", noise.inputs_during_sleep as f64);
    res.check("loud_noise_wakes", woke, woke, true);
    res.check("only_noise_passes_gate", noise.inputs_during_sleep == 1, noise.inputs_during_sleep, 1);

    let slept = none.ticks_in(SleepStage::Asleep) + none.ticks_in(SleepStage::Dreaming);
    res.set("no_sleep_processor_asleep_ticks", slept as f64);
    res.check("no_sleep_processor_never_sleeps", slept == 0 && none.stages.iter().all(Option::is_none), slept, 0);

    let main_trace = runs[0].trace.take();
    for (i, o) in runs.iter().enumerate() {
        res.record_aggregation(&format!("seed_{}", seeds[i]), &o.aggregation);
    }
    res.record_aggregation("loud_noise", &noise.aggregation);
    res.record_aggregation("no_sleep", &none.aggregation);
    if let Some(t) = main_trace {
        res.traces.push(("main".into(), t));
    }
    if let Some(t) = noise.trace.take() {
        res.traces.push(("loud_noise".into(), t));
    }
    if let Some(t) = none.trace.take() {
        res.traces.push(("no_sleep".into(), t));
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deep_sleep_length() {
        let p = SleepParams::default();
        assert_eq!(p.deep_sleep_ticks(), 80);
        let p = SleepParams { recovery: 3, ..Default::default() };
        // need 120, 117, ..., 42 submit deep sleep; 39 is a dream tick.
        assert_eq!(p.deep_sleep_ticks(), 27);
    }

    #[test]
    fn passes() {
        let p = SleepParams { seeds: 3, ..Default::default() };
        let r = run_sleep_dream_cycle(&p, 11).unwrap();
        assert!(r.passed(), "{}", r.report());
    }
}
