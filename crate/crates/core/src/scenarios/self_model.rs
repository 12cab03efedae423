use serde::{Deserialize, Serialize};

use super::ScenarioResult;
use crate::chunk::Modality;
use crate::error::Result;
use crate::machine::{new_ctm, CtmConfig, InputMap, OutputMap, SignalSpec};
use crate::processors::{BehaviorSpec, EntitySpec, MotorCue, WorldTag};

const MOTOR: usize = 0;
const MODEL: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelfModelParams {
    pub ticks: u64,
    pub cue_period: u64,
    pub motor_weight: f64,
    pub model_weight: f64,
    /// Trials needed before an entity is tagged.
    pub threshold: u32,
    /// Ticks after a command broadcast in which movement counts as a hit.
    pub window: u64,
    /// Per-tick probability that the ball jumps.
    pub ball_jump: f64,
}

impl Default for SelfModelParams {
    fn default() -> Self {
        Self { ticks: 200, cue_period: 8, motor_weight: 10.0, model_weight: 20.0, threshold: 5, window: 2, ball_jump: 0.1 }
    }
}

fn config(p: &SelfModelParams, seed: u64, active: bool) -> CtmConfig {
    let mut cfg = CtmConfig::new(4, 2);
    cfg.seed = seed;
    cfg.lifetime = p.ticks;
    cfg.signals = vec![
        SignalSpec::Actuated { name: "arm_pos".into(), actuator: "arm".into(), initial: 0.0 },
        SignalSpec::RandomJump {
            name: "ball_pos".into(),
            initial: 0.0,
            choices: (0..10).map(f64::from).collect(),
            p: p.ball_jump,
        },
        SignalSpec::Constant { name: "light".into(), value: 1.0 },
    ];
    cfg.inputs = vec![
        InputMap { sensor: "arm_pos".into(), to: vec![MODEL] },
        InputMap { sensor: "ball_pos".into(), to: vec![MODEL] },
        InputMap { sensor: "light".into(), to: vec![2] },
    ];
    cfg.outputs = vec![OutputMap { from: MOTOR, actuator: "arm".into() }];
    let cues = if active {
        vec![
            MotorCue { actuator: "arm".into(), period: p.cue_period, offset: 0 },
            MotorCue { actuator: "ball".into(), period: p.cue_period, offset: p.cue_period / 2 },
        ]
    } else {
        vec![]
    };
    cfg.with_processor(MOTOR, "motor", BehaviorSpec::Motor { weight: p.motor_weight, cues, react_to: None, react_actuator: None })
        .with_processor(MODEL, "world_model", BehaviorSpec::WorldModel {
            entities: vec![
                EntitySpec { name: "arm".into(), sensor: "arm_pos".into() },
                EntitySpec { name: "ball".into(), sensor: "ball_pos".into() },
            ],
            threshold: p.threshold,
            window: p.window,
            weight: p.model_weight,
        })
        .with_processor(2, "light", BehaviorSpec::Reporter { sensor: "light".into(), tags: vec![Modality::Vision], weight: 1.0 })
}

struct Outcome {
    arm: (WorldTag, bool),
    ball: (WorldTag, bool),
    arm_evidence: (u32, u32),
    ball_evidence: (u32, u32),
}

fn run_once(p: &SelfModelParams, seed: u64, active: bool, res: &mut ScenarioResult, label: &str) -> Result<Outcome> {
    let mut ctm = new_ctm(config(p, seed, active))?;
    ctm.run(p.ticks)?;
    let model = ctm.world_model().cloned().unwrap_or_default();
    let entry = |name: &str| {
        model
            .get(name)
            .map_or(((WorldTag::Unknown, false), (0, 0)), |e| ((e.tag, e.ctm_conscious), (e.evidence.hits, e.evidence.misses)))
    };
    let (arm, arm_evidence) = entry("arm");
    let (ball, ball_evidence) = entry("ball");
    res.check_aggregation(label, &ctm);
    res.traces.push((label.to_owned(), ctm.take_trace()));
    Ok(Outcome { arm, ball, arm_evidence, ball_evidence })
}

/// Motor commands move the arm but not the ball; the world model tags the
/// arm `self` and the ball `not_self` and both labels reach STM.
pub fn run_self_model(p: &SelfModelParams, seed: u64) -> Result<ScenarioResult> {
    let mut res = ScenarioResult::new("self-model", seed);
    let main = run_once(p, seed, true, &mut res, "main")?;
    let idle = run_once(p, seed, false, &mut res, "no_motor_activity")?;

    let flag = |b: bool| f64::from(u8::from(b));
    res.set("arm_hits", f64::from(main.arm_evidence.0));
    res.set("arm_misses", f64::from(main.arm_evidence.1));
    res.set("ball_hits", f64::from(main.ball_evidence.0));
    res.set("ball_misses", f64::from(main.ball_evidence.1));
    res.set("arm_ctm_conscious", flag(main.arm.1));
    res.set("ball_ctm_conscious", flag(main.ball.1));

    res.check("arm_tagged_self", main.arm.0 == WorldTag::SelfTag, main.arm.0.label(), "self");
    res.check("ball_tagged_not_self", main.ball.0 == WorldTag::NotSelf, main.ball.0.label(), "not_self");
    res.check("arm_ctm_conscious", main.arm.1, main.arm.1, true);
    res.check("ball_ctm_conscious", main.ball.1, main.ball.1, true);
    res.check("no_activity_arm_unknown", idle.arm.0 == WorldTag::Unknown, idle.arm.0.label(), "unknown");
    res.check("no_activity_ball_unknown", idle.ball.0 == WorldTag::Unknown, idle.ball.0.label(), "unknown");
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn passes_on_several_seeds() {
        for seed in 0..5 {
            let r = run_self_model(&SelfModelParams::default(), seed).unwrap();
            assert!(r.passed(), "{}", r.report());
        }
    }
}
