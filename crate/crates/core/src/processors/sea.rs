//! Sleeping Experts weight adaptation: a processor's weight-giving power is
//! multiplied by `c` when it should have been bolder and divided by `c`
//! when it should have been quieter.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Embolden,
    Hush,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Embolden => "Embolden",
            Verdict::Hush => "Hush",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feedback {
    pub verdict: Verdict,
    /// Submission tick the feedback is about.
    pub reference_tick: u64,
    pub reason: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeaParams {
    pub c_sea: f64,
    pub g_min: f64,
    pub g_max: f64,
}

impl Default for SeaParams {
    fn default() -> Self {
        Self { c_sea: 2.0, g_min: (2.0f64).powi(-20), g_max: (2.0f64).powi(20) }
    }
}

/// Applies one verdict to `g` and clamps the result.
pub fn sea_update(g: f64, feedback: &Feedback, params: &SeaParams) -> f64 {
    debug_assert!(g > 0.0);
    let next = match feedback.verdict {
        Verdict::Embolden => g * params.c_sea,
        Verdict::Hush => g / params.c_sea,
    };
    next.clamp(params.g_min, params.g_max)
}

#[derive(Debug, Clone, Default)]
struct OwnSubmission {
    value: f64,
    /// Set once the competition for this tick has been broadcast.
    outcome: Option<Outcome>,
    best_rival: Option<f64>,
    judged_loss: bool,
    judged_win: bool,
}

#[derive(Debug, Clone, Copy)]
enum Outcome {
    Won,
    Lost { winner_value: Option<f64> },
}

/// A processor's record of what its own valued submissions were worth and
/// what the broadcasts revealed. Values are ground truth supplied by the
/// processor's behavior.
#[derive(Debug, Clone, Default)]
pub struct SeaLedger {
    own: BTreeMap<u64, OwnSubmission>,
}

impl SeaLedger {
    pub fn record_submission(&mut self, tick: u64, value: f64) {
        self.own.insert(tick, OwnSubmission { value, ..Default::default() });
    }

    /// Notes the broadcast of the competition started at `start`: whether
    /// the processor won it and the winner's value. If the broadcast chunk
    /// refers back to an earlier tick, its value is a revealed rival for
    /// that tick.
    pub fn record_broadcast(
        &mut self,
        start: u64,
        won: bool,
        winner_value: Option<f64>,
        refers_to: Option<u64>,
    ) {
        if let Some(own) = self.own.get_mut(&start) {
            own.outcome = Some(if won { Outcome::Won } else { Outcome::Lost { winner_value } });
        }
        if let (Some(tick), Some(v)) = (refers_to, winner_value) {
            if !won {
                self.reveal(tick, v);
            }
        }
    }

    /// A losing chunk for `tick` turned out to be worth `value`.
    pub fn reveal(&mut self, tick: u64, value: f64) {
        if let Some(own) = self.own.get_mut(&tick) {
            own.best_rival = Some(own.best_rival.map_or(value, |b: f64| b.max(value)));
        }
    }

    /// Feedback for submissions with ticks in `window`, each verdict issued
    /// at most once per submission.
    pub fn generate_feedback(&mut self, window: std::ops::RangeInclusive<u64>) -> Vec<Feedback> {
        let mut out = Vec::new();
        for (&tick, own) in self.own.range_mut(window) {
            match own.outcome {
                Some(Outcome::Lost { winner_value: Some(wv) }) if !own.judged_loss => {
                    own.judged_loss = true;
                    if own.value > wv {
                        out.push(Feedback {
                            verdict: Verdict::Embolden,
                            reference_tick: tick,
                            reason: "lost_to_less_valuable",
                        });
                    }
                }
                Some(Outcome::Won) if !own.judged_win => {
                    if let Some(rival) = own.best_rival {
                        if own.value < rival {
                            own.judged_win = true;
                            out.push(Feedback {
                                verdict: Verdict::Hush,
                                reference_tick: tick,
                                reason: "won_over_more_valuable",
                            });
                        }
                    }
                }
                _ => {}
            }
        }
        out
    }

    /// Drops submissions older than `before`.
    pub fn forget_before(&mut self, before: u64) {
        self.own = self.own.split_off(&before);
    }
}
