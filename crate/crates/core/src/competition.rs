//! Competition functions and the coin-flip neuron.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::chunk::Competitor;
use crate::error::{Error, Result};
use crate::rng::SimRng;

/// The map from chunks to non-negative reals used in every local match.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CompetitionFunctionSpec {
    /// `intensity + c·mood` with `c` in [-1, 1]. Additive.
    IntensityPlusCMood { c: f64 },
    /// `|mood|`. Not additive.
    AbsMood,
    /// `|weight|`. Not additive, and depends on which leaf won.
    AbsWeight,
}

impl CompetitionFunctionSpec {
    pub const INTENSITY: Self = CompetitionFunctionSpec::IntensityPlusCMood { c: 0.0 };

    pub fn intensity_plus_c_mood(c: f64) -> Result<Self> {
        let spec = Self::IntensityPlusCMood { c };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::IntensityPlusCMood { c } if !(-1.0..=1.0).contains(&c) => {
                Err(Error::Config(format!("competition coefficient c = {c} is outside [-1, 1]")))
            }
            _ => Ok(()),
        }
    }

    /// Parent f-value equals the sum of the children's f-values.
    pub fn declared_additive(&self) -> bool {
        matches!(self, Self::IntensityPlusCMood { .. })
    }

    /// Whether f at an internal node depends only on subtree sums (and
    /// hence not on which leaf won below it).
    pub fn winner_independent(&self) -> bool {
        !matches!(self, Self::AbsWeight)
    }

    /// Evaluate f. For `IntensityPlusCMood` the result is non-negative
    /// because `|mood| ≤ intensity` and `|c| ≤ 1`; the `max` only absorbs
    /// rounding in the last bit.
    pub fn eval(&self, chunk: &impl Competitor) -> f64 {
        match *self {
            Self::IntensityPlusCMood { c } => (chunk.intensity() + c * chunk.mood()).max(0.0),
            Self::AbsMood => chunk.mood().abs(),
            Self::AbsWeight => chunk.weight().abs(),
        }
    }
}

pub fn eval_f(spec: &CompetitionFunctionSpec, chunk: &impl Competitor) -> f64 {
    spec.eval(chunk)
}

impl fmt::Display for CompetitionFunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::IntensityPlusCMood { c } if *c == 0.0 => f.write_str("intensity"),
            Self::IntensityPlusCMood { c } => write!(f, "intensity+{c}*mood"),
            Self::AbsMood => f.write_str("abs-mood"),
            Self::AbsWeight => f.write_str("abs-weight"),
        }
    }
}

impl FromStr for CompetitionFunctionSpec {
    type Err = Error;

    /// Accepts `intensity`, `intensity+<c>*mood`, `abs-mood`, `abs-weight`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "intensity" => Ok(Self::INTENSITY),
            "abs-mood" | "mood" => Ok(Self::AbsMood),
            "abs-weight" | "weight" => Ok(Self::AbsWeight),
            _ => {
                let c = s
                    .strip_prefix("intensity+")
                    .and_then(|r| r.strip_suffix("*mood"))
                    .and_then(|c| c.parse::<f64>().ok())
                    .ok_or_else(|| Error::Config(format!("unknown competition function {s:?}")))?;
                Self::intensity_plus_c_mood(c)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    First,
    Second,
}

/// The coin-flip neuron: `First` with probability a/(a+b), or 1/2 when
/// a = b = 0. Always takes exactly one draw.
pub fn coin_flip(a: f64, b: f64, rng: &mut SimRng) -> Result<Choice> {
    if !(a.is_finite() && b.is_finite() && a >= 0.0 && b >= 0.0) {
        return Err(Error::InvalidCoinInput(a, b));
    }
    Ok(match weighted_index(&[a, b], rng) {
        0 => Choice::First,
        _ => Choice::Second,
    })
}

/// Categorical draw with probabilities `values[i] / Σ values`, uniform when
/// the sum is zero. One draw. Inputs must be finite and non-negative.
pub(crate) fn weighted_index(values: &[f64], rng: &mut SimRng) -> usize {
    debug_assert!(!values.is_empty());
    let u = rng.unit();
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return ((u * values.len() as f64) as usize).min(values.len() - 1);
    }
    let target = u * total;
    let mut cum = 0.0;
    for (i, &v) in values.iter().enumerate() {
        cum += v;
        if target < cum {
            return i;
        }
    }
    // Rounding pushed the target to the top; take the last non-zero entry.
    values.iter().rposition(|&v| v > 0.0).unwrap_or(values.len() - 1)
}

/// Index of the largest value, ties to the lowest index.
pub(crate) fn argmax_leftmost(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
