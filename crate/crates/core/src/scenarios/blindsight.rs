use serde::{Deserialize, Serialize};

use super::{drive, tick_oracle, ScenarioResult};
use crate::chunk::Modality;
use crate::error::Result;
use crate::machine::{CtmConfig, InputMap, OutputMap, SignalSpec};
use crate::processors::BehaviorSpec;

const VISION: usize = 0;
const WALK: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlindsightParams {
    pub ticks: u64,
    pub vision_weight: f64,
    pub walk_weight: f64,
    pub ambient_weight: f64,
}

impl Default for BlindsightParams {
    fn default() -> Self {
        Self { ticks: 200, vision_weight: 5.0, walk_weight: 1.0, ambient_weight: 1.0 }
    }
}

fn config(p: &BlindsightParams, seed: u64, link: bool, submit: bool) -> CtmConfig {
    let mut cfg = CtmConfig::new(4, 2);
    cfg.seed = seed;
    cfg.lifetime = p.ticks;
    cfg.signals = vec![
        SignalSpec::RandomJump { name: "obstacle".into(), initial: 0.0, choices: vec![0.0, 1.0], p: 1.0 },
        SignalSpec::Constant { name: "light".into(), value: 1.0 },
    ];
    cfg.inputs = vec![
        InputMap { sensor: "obstacle".into(), to: vec![VISION] },
        InputMap { sensor: "light".into(), to: vec![2] },
    ];
    cfg.outputs = vec![OutputMap { from: WALK, actuator: "legs".into() }];
    if link {
        cfg.initial_links = vec![[VISION, WALK]];
    }
    cfg.with_processor(
        VISION,
        "vision",
        BehaviorSpec::Vision { sensor: "obstacle".into(), weight: p.vision_weight, submit, relay_to: Some(WALK) },
    )
    .with_processor(WALK, "walk", BehaviorSpec::Walk { actuator: "legs".into(), weight: p.walk_weight, default_lane: 0.0 })
    .with_processor(2, "light", BehaviorSpec::Reporter {
        sensor: "light".into(),
        tags: vec![Modality::Vision],
        weight: p.ambient_weight,
    })
    .with_processor(3, "hum", BehaviorSpec::Constant {
        tags: vec![Modality::Speech],
        payload: "hum".into(),
        weight: p.ambient_weight,
        flags: vec![],
        value: None,
    })
}

struct Outcome {
    vision_broadcasts: u64,
    collisions: u64,
    steps: u64,
    /// Mean exact probability that Vision's chunk wins, over all ticks.
    vision_oracle_share: f64,
    broadcasts: u64,
}

fn run_once(p: &BlindsightParams, seed: u64, link: bool, submit: bool, res: &mut ScenarioResult, label: &str) -> Result<Outcome> {
    let mut obstacle = Vec::new();
    let mut out = Outcome { vision_broadcasts: 0, collisions: 0, steps: 0, vision_oracle_share: 0.0, broadcasts: 0 };
    let mut oracle_sum = 0.0;
    let mut oracle_err = None;
    let mut ctm = drive(config(p, seed, link, submit), p.ticks, |ctm, r| {
        obstacle.push(ctm.environment().value("obstacle").unwrap_or(0.0));
        if let Some(b) = &r.broadcast {
            out.broadcasts += 1;
            if b.address() == VISION {
                out.vision_broadcasts += 1;
            }
        }
        match tick_oracle(ctm, r) {
            Ok(probs) => oracle_sum += probs[VISION],
            Err(e) => oracle_err = Some(e),
        }
    })?;
    if let Some(e) = oracle_err {
        return Err(e);
    }
    out.vision_oracle_share = oracle_sum / p.ticks as f64;
    // The walker meets, at tick t, the obstacle seen at t - 1.
    for e in ctm.environment().actuator_log() {
        if e.tick == 0 {
            continue;
        }
        out.steps += 1;
        if e.command == obstacle[e.tick as usize - 1] {
            out.collisions += 1;
        }
    }
    res.check_aggregation(label, &ctm);
    res.traces.push((label.to_owned(), ctm.take_trace()));
    Ok(out)
}

/// Vision reaches Walk over a link but never enters the competition: the
/// walker avoids every obstacle while vision is never broadcast.
pub fn run_blindsight(p: &BlindsightParams, seed: u64) -> Result<ScenarioResult> {
    let mut res = ScenarioResult::new("blindsight", seed);
    let main = run_once(p, seed, true, false, &mut res, "main")?;
    let no_link = run_once(p, seed, false, false, &mut res, "no_link")?;
    let submit = run_once(p, seed, true, true, &mut res, "submission_enabled")?;

    let fetch = main.collisions == 0 && main.steps > 0;
    res.set("vision_broadcast_count", main.vision_broadcasts as f64);
    res.set("fetch_success", f64::from(u8::from(fetch)));
    res.set("collisions", main.collisions as f64);
    res.set("steps", main.steps as f64);
    res.set("vision_oracle_share", main.vision_oracle_share);
    res.set("no_link_collisions", no_link.collisions as f64);
    res.set("submission_enabled_vision_broadcasts", submit.vision_broadcasts as f64);
    res.set("submission_enabled_vision_oracle_share", submit.vision_oracle_share);

    res.check("vision_oracle_share_zero", main.vision_oracle_share == 0.0, main.vision_oracle_share, 0);
    res.check("vision_never_broadcast", main.vision_broadcasts == 0, main.vision_broadcasts, 0);
    res.check("fetch_success", fetch, format!("{} collisions in {} steps", main.collisions, main.steps), "0 collisions");
    res.check(
        "ablation_no_link_fails",
        no_link.collisions > 0,
        format!("{} collisions", no_link.collisions),
        "> 0 collisions",
    );
    res.check(
        "ablation_submission_broadcasts",
        submit.vision_broadcasts > 0,
        submit.vision_broadcasts,
        "> 0",
    );
    // Expected Vision broadcasts in the control: its mean oracle share times
    // the number of broadcasts, with a four-sigma allowance.
    let n = submit.broadcasts;
    let q = submit.vision_oracle_share;
    let expected = q * n as f64;
    let tol = 4.0 * (n as f64 * q * (1.0 - q)).sqrt() + 1.0;
    res.check(
        "ablation_submission_matches_oracle",
        (submit.vision_broadcasts as f64 - expected).abs() <= tol,
        submit.vision_broadcasts,
        format!("{expected:.1} +/- {tol:.1}"),
    );
    Ok(res)
}
