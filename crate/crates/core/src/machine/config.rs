//! Machine configuration, read from TOML.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::chunk::Address;
use crate::competition::CompetitionFunctionSpec;
use crate::error::{Error, Result};
use crate::processors::{BehaviorSpec, SeaParams};
use crate::uptree::{Mode, Shape};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

mod competition_text {
    use super::CompetitionFunctionSpec;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(f: &CompetitionFunctionSpec, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&f.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CompetitionFunctionSpec, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn default_schema() -> u32 {
    CONFIG_SCHEMA_VERSION
}
fn default_arity() -> usize {
    2
}
fn default_tick_ms() -> f64 {
    100.0
}
fn default_lifetime() -> u64 {
    10_000
}
fn default_link_threshold() -> u32 {
    3
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeaConfig {
    #[serde(default = "SeaConfig::default_c")]
    pub c_sea: f64,
    #[serde(default = "SeaConfig::default_g_min")]
    pub g_min: f64,
    #[serde(default = "SeaConfig::default_g_max")]
    pub g_max: f64,
    /// Feedback at tick t covers own submissions in [t - window, t].
    #[serde(default = "SeaConfig::default_window")]
    pub window: u64,
}

impl SeaConfig {
    fn default_c() -> f64 {
        SeaParams::default().c_sea
    }
    fn default_g_min() -> f64 {
        SeaParams::default().g_min
    }
    fn default_g_max() -> f64 {
        SeaParams::default().g_max
    }
    fn default_window() -> u64 {
        16
    }

    pub fn params(&self) -> SeaParams {
        SeaParams { c_sea: self.c_sea, g_min: self.g_min, g_max: self.g_max }
    }
}

impl Default for SeaConfig {
    fn default() -> Self {
        Self {
            c_sea: Self::default_c(),
            g_min: Self::default_g_min(),
            g_max: Self::default_g_max(),
            window: Self::default_window(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryConfig {
    /// Records per processor. Defaults to the lifetime, clamped to [16, 1024].
    #[serde(default)]
    pub capacity: Option<usize>,
    #[serde(default = "MemoryConfig::default_recency")]
    pub recency_window: u64,
}

impl MemoryConfig {
    fn default_recency() -> u64 {
        32
    }
}

/// Which event kinds are written. Structural events (broadcasts, installs,
/// links, commands, feedback) are always kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceConfig {
    #[serde(default = "default_true")]
    pub submissions: bool,
    #[serde(default)]
    pub node_wins: bool,
    #[serde(default = "default_true")]
    pub inputs: bool,
    /// Keep events in memory for `Ctm::trace`.
    #[serde(default = "default_true")]
    pub record: bool,
    /// Stop recording at this tick; the recorded trace is then a prefix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_ticks: Option<u64>,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self { submissions: true, node_wins: false, inputs: true, record: true, max_ticks: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessorSpec {
    pub address: Address,
    #[serde(default)]
    pub specialty: String,
    pub behavior: BehaviorSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputMap {
    pub sensor: String,
    pub to: Vec<Address>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputMap {
    pub from: Address,
    pub actuator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduledValue {
    pub tick: u64,
    pub value: f64,
}

/// A named environment signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSpec {
    Constant { name: String, value: f64 },
    /// Starts at `initial`; each change takes effect at its tick.
    Schedule {
        name: String,
        initial: f64,
        #[serde(default)]
        changes: Vec<ScheduledValue>,
    },
    /// `values[(t / period) % len]`.
    Periodic { name: String, values: Vec<f64>, period: u64 },
    /// Each tick, with probability `p`, redraws uniformly from `choices`.
    RandomJump { name: String, initial: f64, choices: Vec<f64>, p: f64 },
    /// `value` at the listed ticks, `base` otherwise.
    Pulse {
        name: String,
        at: Vec<u64>,
        value: f64,
        #[serde(default)]
        base: f64,
    },
    /// Takes the last command sent to `actuator`, one tick later.
    Actuated {
        name: String,
        actuator: String,
        #[serde(default)]
        initial: f64,
    },
}

impl SignalSpec {
    pub fn name(&self) -> &str {
        match self {
            SignalSpec::Constant { name, .. }
            | SignalSpec::Schedule { name, .. }
            | SignalSpec::Periodic { name, .. }
            | SignalSpec::RandomJump { name, .. }
            | SignalSpec::Pulse { name, .. }
            | SignalSpec::Actuated { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CtmConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub n_processors: usize,
    #[serde(default = "default_arity")]
    pub arity: usize,
    #[serde(default = "default_tick_ms")]
    pub tick_ms: f64,
    #[serde(default = "default_lifetime")]
    pub lifetime: u64,
    #[serde(with = "competition_text", default = "CtmConfig::default_competition")]
    pub competition: CompetitionFunctionSpec,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_link_threshold")]
    pub link_threshold: u32,
    #[serde(default)]
    pub sea: SeaConfig,
    #[serde(default)]
    pub memory: MemoryConfig,
    #[serde(default)]
    pub trace: TraceConfig,
    /// Addresses not listed here are idle.
    #[serde(default)]
    pub processors: Vec<ProcessorSpec>,
    #[serde(default)]
    pub signals: Vec<SignalSpec>,
    #[serde(default)]
    pub inputs: Vec<InputMap>,
    #[serde(default)]
    pub outputs: Vec<OutputMap>,
    /// Links present at tick 0. Empty unless a scenario needs a pre-formed
    /// channel.
    #[serde(default)]
    pub initial_links: Vec<[Address; 2]>,
}

impl CtmConfig {
    fn default_competition() -> CompetitionFunctionSpec {
        CompetitionFunctionSpec::INTENSITY
    }

    /// All-idle machine with default settings.
    pub fn new(n_processors: usize, arity: usize) -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            n_processors,
            arity,
            tick_ms: default_tick_ms(),
            lifetime: default_lifetime(),
            competition: Self::default_competition(),
            mode: Mode::Probabilistic,
            seed: 0,
            link_threshold: default_link_threshold(),
            sea: SeaConfig::default(),
            memory: MemoryConfig::default(),
            trace: TraceConfig::default(),
            processors: Vec::new(),
            signals: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            initial_links: Vec::new(),
        }
    }

    pub fn with_processor(mut self, address: Address, specialty: &str, behavior: BehaviorSpec) -> Self {
        self.processors.push(ProcessorSpec { address, specialty: specialty.to_owned(), behavior });
        self
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_owned()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn shape(&self) -> Result<Shape> {
        Shape::for_processors(self.n_processors, self.arity)
    }

    pub fn memory_capacity(&self) -> usize {
        self.memory.capacity.unwrap_or_else(|| self.lifetime.clamp(16, 1024) as usize)
    }

    /// Checks every field and reports all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs: Vec<String> = Vec::new();
        let n = self.n_processors;
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            errs.push(format!(
                "schema_version: {} is not supported (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        match self.shape() {
            Ok(shape) if self.lifetime < shape.height as u64 => errs.push(format!(
                "lifetime: {} is shorter than the tree height {}",
                self.lifetime, shape.height
            )),
            Ok(_) => {}
            Err(e) => errs.push(format!("n_processors/arity: {e}")),
        }
        if !(self.tick_ms.is_finite() && self.tick_ms > 0.0) {
            errs.push(format!("tick_ms: {} must be positive", self.tick_ms));
        }
        if let Err(e) = self.competition.validate() {
            errs.push(format!("competition: {e}"));
        }
        if self.link_threshold == 0 {
            errs.push("link_threshold: must be at least 1".into());
        }
        let s = &self.sea;
        if !(s.c_sea.is_finite() && s.c_sea > 1.0) {
            errs.push(format!("sea.c_sea: {} must be greater than 1", s.c_sea));
        }
        if !(s.g_min > 0.0 && s.g_min <= 1.0 && s.g_max >= 1.0 && s.g_max.is_finite()) {
            errs.push(format!("sea.g_min/g_max: need 0 < g_min <= 1 <= g_max, got {} and {}", s.g_min, s.g_max));
        }
        if self.memory.capacity == Some(0) {
            errs.push("memory.capacity: must be at least 1".into());
        }

        let mut seen = BTreeSet::new();
        for (i, p) in self.processors.iter().enumerate() {
            if p.address >= n {
                errs.push(format!("processors[{i}].address: {} is out of range (n_processors = {n})", p.address));
            } else if !seen.insert(p.address) {
                errs.push(format!("processors[{i}].address: {} is listed twice", p.address));
            }
            for (field, a) in behavior_addresses(&p.behavior) {
                if a >= n {
                    errs.push(format!("processors[{i}].behavior.{field}: {a} is out of range (n_processors = {n})"));
                }
            }
            for (field, w) in behavior_weights(&p.behavior) {
                if !w.is_finite() {
                    errs.push(format!("processors[{i}].behavior.{field}: weight must be finite"));
                }
            }
        }

        let mut names = BTreeSet::new();
        for (i, sig) in self.signals.iter().enumerate() {
            let name = sig.name();
            if !valid_name(name) {
                errs.push(format!("signals[{i}].name: {name:?} must be non-empty [A-Za-z0-9_.:-]"));
            }
            if !names.insert(name) {
                errs.push(format!("signals[{i}].name: {name:?} is defined twice"));
            }
            match sig {
                SignalSpec::Periodic { values, period, .. } if values.is_empty() || *period == 0 => {
                    errs.push(format!("signals[{i}]: periodic signal needs values and a positive period"))
                }
                SignalSpec::RandomJump { choices, p, .. } if choices.is_empty() || !(0.0..=1.0).contains(p) => {
                    errs.push(format!("signals[{i}]: random_jump needs choices and p in [0, 1]"))
                }
                SignalSpec::Actuated { actuator, .. } if !valid_name(actuator) => {
                    errs.push(format!("signals[{i}].actuator: {actuator:?} must be non-empty [A-Za-z0-9_.:-]"))
                }
                _ => {}
            }
        }
        for (i, m) in self.inputs.iter().enumerate() {
            if !names.contains(m.sensor.as_str()) {
                errs.push(format!("inputs[{i}].sensor: no signal named {:?}", m.sensor));
            }
            for &a in &m.to {
                if a >= n {
                    errs.push(format!("inputs[{i}].to: {a} is out of range (n_processors = {n})"));
                }
            }
        }
        for (i, m) in self.outputs.iter().enumerate() {
            if m.from >= n {
                errs.push(format!("outputs[{i}].from: {} is out of range (n_processors = {n})", m.from));
            }
            if !valid_name(&m.actuator) {
                errs.push(format!("outputs[{i}].actuator: {:?} must be non-empty [A-Za-z0-9_.:-]", m.actuator));
            }
        }
        for (i, [a, b]) in self.initial_links.iter().enumerate() {
            if *a >= n || *b >= n {
                errs.push(format!("initial_links[{i}]: [{a}, {b}] is out of range (n_processors = {n})"));
            } else if a == b {
                errs.push(format!("initial_links[{i}]: a processor cannot link to itself"));
            }
        }

        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs.join("\n")))
        }
    }
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || "_.:-".contains(c))
}

fn behavior_addresses(b: &BehaviorSpec) -> Vec<(&'static str, Address)> {
    match b {
        BehaviorSpec::Vision { relay_to: Some(a), .. } => vec![("relay_to", *a)],
        BehaviorSpec::ChangeDetector { watch, .. } => vec![("watch", *watch)],
        BehaviorSpec::DreamCreator { sleep_address, .. } => vec![("sleep_address", *sleep_address)],
        BehaviorSpec::Inner { source, .. } => vec![("source", *source)],
        BehaviorSpec::Motor { react_to: Some(a), .. } => vec![("react_to", *a)],
        _ => vec![],
    }
}

fn behavior_weights(b: &BehaviorSpec) -> Vec<(&'static str, f64)> {
    match b {
        BehaviorSpec::Idle => vec![],
        BehaviorSpec::AttentionFilter { attend_weight, ignore_weight, .. } => {
            vec![("attend_weight", *attend_weight), ("ignore_weight", *ignore_weight)]
        }
        BehaviorSpec::Sleep { sleep_weight, dream_weight, gate_weight, .. } => vec![
            ("sleep_weight", *sleep_weight),
            ("dream_weight", *dream_weight),
            ("gate_weight", *gate_weight),
        ],
        BehaviorSpec::Constant { weight, .. }
        | BehaviorSpec::Reporter { weight, .. }
        | BehaviorSpec::Vision { weight, .. }
        | BehaviorSpec::Walk { weight, .. }
        | BehaviorSpec::SceneGist { weight, .. }
        | BehaviorSpec::ChangeDetector { weight, .. }
        | BehaviorSpec::DreamCreator { weight, .. }
        | BehaviorSpec::Inner { weight, .. }
        | BehaviorSpec::Motor { weight, .. }
        | BehaviorSpec::WorldModel { weight, .. }
        | BehaviorSpec::Meditator { weight, .. }
        | BehaviorSpec::Questioner { weight, .. }
        | BehaviorSpec::Answerer { weight, .. } => vec![("weight", *weight)],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
schema_version = 1
n_processors = 4
arity = 2
lifetime = 50
competition = "intensity"
seed = 9

[[processors]]
address = 0
specialty = "speaker"
behavior = { kind = "constant", tags = ["speech"], payload = "hi", weight = 2.0 }

[[signals]]
kind = "constant"
name = "light"
value = 1.0

[[inputs]]
sensor = "light"
to = [0, 1]
"#;

    #[test]
    fn parses_sample() {
        let cfg = CtmConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(cfg.n_processors, 4);
        assert_eq!(cfg.shape().unwrap().height, 2);
        assert_eq!(cfg.link_threshold, 3);
        assert_eq!(cfg.processors[0].specialty, "speaker");
        let again = CtmConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn unknown_address_is_reported_with_field() {
        let text = SAMPLE.replace("address = 0", "address = 7");
        let err = CtmConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("processors[0].address"), "{err}");
    }

    #[test]
    fn lifetime_shorter_than_height() {
        let text = SAMPLE.replace("lifetime = 50", "lifetime = 1");
        let err = CtmConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("lifetime"), "{err}");
    }

    #[test]
    fn reports_every_problem() {
        let text = SAMPLE.replace("to = [0, 1]", "to = [0, 9]").replace("schema_version = 1", "schema_version = 2");
        let err = CtmConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("inputs[0].to") && err.contains("schema_version"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{SAMPLE}\nbogus = 1\n");
        assert!(CtmConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn bad_competition() {
        let text = SAMPLE.replace("\"intensity\"", "\"intensity+3*mood\"");
        assert!(CtmConfig::from_toml_str(&text).is_err());
    }
}
