use serde::{Deserialize, Serialize};

use super::{drive, ScenarioResult};
use crate::chunk::Modality;
use crate::error::Result;
use crate::machine::{CtmConfig, InputMap, ScheduledValue, SignalSpec};
use crate::processors::{BehaviorSpec, RecordKind};

const SCENE: usize = 0;
const DETECTOR: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChangeBlindnessParams {
    pub ticks: u64,
    /// Tick at which the control stream's scene changes.
    pub change_tick: u64,
    pub scene_weight: f64,
    pub detector_weight: f64,
    pub detail_weight: f64,
}

impl Default for ChangeBlindnessParams {
    fn default() -> Self {
        Self { ticks: 120, change_tick: 50, scene_weight: 10.0, detector_weight: 50.0, detail_weight: 1.0 }
    }
}

enum Stream {
    /// Props are swapped every few ticks; the scene stays the same.
    PropsSwapped,
    /// Nothing changes.
    Identical,
    /// The scene itself changes at `change_tick`.
    SceneChange,
}

fn config(p: &ChangeBlindnessParams, seed: u64, stream: &Stream) -> CtmConfig {
    let mut cfg = CtmConfig::new(4, 2);
    cfg.seed = seed;
    cfg.lifetime = p.ticks;
    let scene = match stream {
        Stream::SceneChange => SignalSpec::Schedule {
            name: "scene".into(),
            initial: 1.0,
            changes: vec![ScheduledValue { tick: p.change_tick, value: 2.0 }],
        },
        _ => SignalSpec::Constant { name: "scene".into(), value: 1.0 },
    };
    let props = match stream {
        Stream::PropsSwapped => SignalSpec::Periodic { name: "props".into(), values: vec![1.0, 2.0, 3.0, 4.0, 5.0], period: 7 },
        _ => SignalSpec::Constant { name: "props".into(), value: 1.0 },
    };
    cfg.signals = vec![scene, props];
    cfg.inputs = vec![
        InputMap { sensor: "scene".into(), to: vec![SCENE] },
        InputMap { sensor: "props".into(), to: vec![2] },
    ];
    cfg.with_processor(SCENE, "scene_gist", BehaviorSpec::SceneGist { sensor: "scene".into(), weight: p.scene_weight })
        .with_processor(DETECTOR, "change_detector", BehaviorSpec::ChangeDetector { watch: SCENE, weight: p.detector_weight })
        .with_processor(2, "details", BehaviorSpec::Reporter {
            sensor: "props".into(),
            tags: vec![Modality::Vision],
            weight: p.detail_weight,
        })
}

struct Outcome {
    detections: u64,
    first_report: Option<u64>,
    distinct_scene_gists: usize,
}

fn run_once(p: &ChangeBlindnessParams, seed: u64, stream: Stream, res: &mut ScenarioResult, label: &str) -> Result<Outcome> {
    let mut detections = 0;
    let mut scene_gists = std::collections::BTreeSet::new();
    let mut ctm = drive(config(p, seed, &stream), p.ticks, |_, r| {
        if let Some(b) = &r.broadcast {
            if b.address() == DETECTOR && b.gist().payload().starts_with("change:") {
                detections += 1;
            }
            if b.address() == SCENE {
                scene_gists.insert(b.gist().to_string());
            }
        }
    })?;
    let first_report = ctm
        .processor(DETECTOR)
        .and_then(|d| {
            d.memory()
                .records()
                .find(|r| r.kind == RecordKind::Submitted && !r.chunk.gist().is_nil())
                .map(|r| r.tick)
        });
    res.check_aggregation(label, &ctm);
    res.traces.push((label.to_owned(), ctm.take_trace()));
    Ok(Outcome { detections, first_report, distinct_scene_gists: scene_gists.len() })
}

/// Frame details change but the scene-level gist does not, so the change
/// detector, which only sees broadcasts, never fires.
pub fn run_change_blindness(p: &ChangeBlindnessParams, seed: u64) -> Result<ScenarioResult> {
    let mut res = ScenarioResult::new("change-blindness", seed);
    let h = u64::from(CtmConfig::new(4, 2).shape()?.height);
    let swapped = run_once(p, seed, Stream::PropsSwapped, &mut res, "main")?;
    let identical = run_once(p, seed, Stream::Identical, &mut res, "identical_frames")?;
    let control = run_once(p, seed, Stream::SceneChange, &mut res, "scene_change")?;

    res.set("change_detected_broadcasts", swapped.detections as f64);
    res.set("scene_gists_broadcast", swapped.distinct_scene_gists as f64);
    res.set("identical_detections", identical.detections as f64);
    res.set("control_detections", control.detections as f64);
    let earliest = p.change_tick + h + 1;
    res.set("control_first_report_tick", control.first_report.map_or(-1.0, |t| t as f64));
    res.set("earliest_possible_report_tick", earliest as f64);

    res.check("stable_gist_no_detection", swapped.detections == 0, swapped.detections, 0);
    res.check("stable_gist_single_scene", swapped.distinct_scene_gists == 1, swapped.distinct_scene_gists, 1);
    res.check("identical_frames_no_detection", identical.detections == 0, identical.detections, 0);
    res.check("control_detects", control.detections >= 1, control.detections, ">= 1");
    res.check(
        "control_detection_timing",
        control.first_report.is_some_and(|t| t >= earliest),
        control.first_report.map_or("none".to_owned(), |t| t.to_string()),
        format!(">= {earliest}"),
    );
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn passes() {
        let r = run_change_blindness(&ChangeBlindnessParams::default(), 3).unwrap();
        assert!(r.passed(), "{}", r.report());
    }
}
