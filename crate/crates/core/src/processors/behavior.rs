//! Built-in processor behaviors, selected per processor in the config.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{Ctx, Proposal};
use crate::chunk::{Address, Chunk, Gist, Modality, Salience};
use crate::record::fmt_real;

/// Hooks a processor's behavior implements. Handlers run in inbox order
/// and `propose` runs last in each tick.
pub trait Behavior: Send {
    fn on_input(&mut self, _sensor: &str, _value: f64, _ctx: &mut Ctx<'_>) {}
    fn on_broadcast(&mut self, _chunk: &Chunk, _ctx: &mut Ctx<'_>) {}
    fn on_link(&mut self, _from: Address, _chunk: &Chunk, _ctx: &mut Ctx<'_>) {}
    fn propose(&mut self, ctx: &mut Ctx<'_>) -> Proposal;

    fn sleep_stage(&self) -> Option<SleepStage> {
        None
    }

    /// While asleep, inputs weaker than this are not delivered.
    fn gate_weight(&self) -> Option<f64> {
        None
    }

    fn world_model(&self) -> Option<&WorldModel> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SleepStage {
    Awake,
    Asleep,
    Dreaming,
}

impl SleepStage {
    pub fn label(self) -> &'static str {
        match self {
            SleepStage::Awake => "awake",
            SleepStage::Asleep => "asleep",
            SleepStage::Dreaming => "dreaming",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotorCue {
    pub actuator: String,
    pub period: u64,
    #[serde(default)]
    pub offset: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntitySpec {
    pub name: String,
    pub sensor: String,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BehaviorSpec {
    /// Always submits a NIL chunk of weight 0.
    Idle,
    /// The same gist and weight every tick.
    Constant {
        #[serde(default)]
        tags: Vec<Modality>,
        payload: String,
        weight: f64,
        #[serde(default)]
        flags: Vec<Salience>,
        /// Ground-truth value attached to each submission.
        #[serde(default)]
        value: Option<f64>,
    },
    /// Reports the latest reading of one sensor.
    Reporter { sensor: String, #[serde(default)] tags: Vec<Modality>, weight: f64 },
    /// Full weight for readings equal to `attended`, reduced weight otherwise.
    AttentionFilter { sensor: String, attended: f64, attend_weight: f64, ignore_weight: f64 },
    /// Sees the obstacle lane and relays it over a link to `relay_to`.
    Vision {
        sensor: String,
        weight: f64,
        #[serde(default = "default_true")]
        submit: bool,
        #[serde(default)]
        relay_to: Option<Address>,
    },
    /// Steps into the lane away from the most recent relayed obstacle.
    Walk {
        actuator: String,
        weight: f64,
        #[serde(default)]
        default_lane: f64,
    },
    /// A scene-level summary: the gist names the scene only.
    SceneGist { sensor: String, weight: f64 },
    /// Flags a change in the gists broadcast by `watch`, repeating the
    /// report until it is broadcast.
    ChangeDetector { watch: Address, weight: f64 },
    Sleep {
        need_threshold: u64,
        recovery: u64,
        sleep_weight: f64,
        dream_need: u64,
        dream_weight: f64,
        noise_sensor: String,
        gate_weight: f64,
    },
    /// Starts dreaming after `dream_after` consecutive NIL broadcasts from the
    /// sleep processor; any delivered reading of `wake_sensor` stops it.
    DreamCreator { sleep_address: Address, dream_after: u32, weight: f64, wake_sensor: String },
    /// Responds to broadcasts from `source` with inner speech or vision.
    Inner { source: Address, #[serde(default)] tags: Vec<Modality>, weight: f64 },
    Motor {
        weight: f64,
        #[serde(default)]
        cues: Vec<MotorCue>,
        /// Commands `react_actuator` whenever `react_to` is broadcast.
        #[serde(default)]
        react_to: Option<Address>,
        #[serde(default)]
        react_actuator: Option<String>,
    },
    /// Tags entities as self or not-self from motor commands and sensed
    /// movement.
    WorldModel { entities: Vec<EntitySpec>, threshold: u32, window: u64, weight: f64 },
    /// Breathes, and asks for quiet every `hush_period` ticks. Active inside
    /// the `[start, end)` sessions, or always when none are listed.
    Meditator {
        weight: f64,
        hush_period: u64,
        #[serde(default)]
        sessions: Vec<[u64; 2]>,
    },
    /// Asks about `topic` every `period` ticks; once a link to a useful
    /// answerer exists, asks over the link instead.
    Questioner { topic: String, period: u64, weight: f64 },
    Answerer { topic: String, weight: f64 },
}

impl BehaviorSpec {
    pub fn build(&self) -> Box<dyn Behavior> {
        match self.clone() {
            BehaviorSpec::Idle => Box::new(Idle),
            BehaviorSpec::Constant { tags, payload, weight, flags, value } => {
                let gist = fit_gist(&tags, &flags, &payload);
                Box::new(Constant { gist, weight, value })
            }
            BehaviorSpec::Reporter { sensor, tags, weight } => {
                Box::new(Reporter { sensor, tags, weight, last: None })
            }
            BehaviorSpec::AttentionFilter { sensor, attended, attend_weight, ignore_weight } => {
                Box::new(AttentionFilter { sensor, attended, attend_weight, ignore_weight, last: None })
            }
            BehaviorSpec::Vision { sensor, weight, submit, relay_to } => {
                Box::new(Vision { sensor, weight, submit, relay_to, lane: None })
            }
            BehaviorSpec::Walk { actuator, weight, default_lane } => {
                Box::new(Walk { actuator, weight, default_lane, seen: None })
            }
            BehaviorSpec::SceneGist { sensor, weight } => Box::new(SceneGist { sensor, weight, scene: None }),
            BehaviorSpec::ChangeDetector { watch, weight } => {
                Box::new(ChangeDetector { watch, weight, last: None, pending: None })
            }
            BehaviorSpec::Sleep {
                need_threshold,
                recovery,
                sleep_weight,
                dream_need,
                dream_weight,
                noise_sensor,
                gate_weight,
            } => Box::new(Sleep {
                need_threshold,
                recovery,
                sleep_weight,
                dream_need,
                dream_weight,
                noise_sensor,
                gate_weight,
                stage: SleepStage::Awake,
                need: 0,
            }),
            BehaviorSpec::DreamCreator { sleep_address, dream_after, weight, wake_sensor } => {
                Box::new(DreamCreator { sleep_address, dream_after, weight, wake_sensor, streak: 0, active: false })
            }
            BehaviorSpec::Inner { source, tags, weight } => Box::new(Inner { source, tags, weight, pending: None }),
            BehaviorSpec::Motor { weight, cues, react_to, react_actuator } => Box::new(Motor {
                weight,
                cues,
                react: react_to.zip(react_actuator),
                issued: 0,
            }),
            BehaviorSpec::WorldModel { entities, threshold, window, weight } => Box::new(WorldModelBehavior {
                model: WorldModel {
                    entries: entities
                        .iter()
                        .map(|e| WorldModelEntry {
                            entity: e.name.clone(),
                            tag: WorldTag::Unknown,
                            evidence: TagEvidence::default(),
                            ctm_conscious: false,
                        })
                        .collect(),
                },
                entities,
                threshold,
                window,
                weight,
                trials: VecDeque::new(),
                last_reading: BTreeMap::new(),
            }),
            BehaviorSpec::Meditator { weight, hush_period, sessions } => {
                Box::new(Meditator { weight, hush_period: hush_period.max(1), sessions })
            }
            BehaviorSpec::Questioner { topic, period, weight } => {
                Box::new(Questioner { topic, period: period.max(1), weight, source: None })
            }
            BehaviorSpec::Answerer { topic, weight } => Box::new(Answerer { topic, weight, pending: false }),
        }
    }
}

/// Builds a gist, shortening the payload until it fits the size bound.
fn fit_gist(tags: &[Modality], flags: &[Salience], payload: &str) -> Gist {
    let mut p: String = payload.to_owned();
    loop {
        match Gist::with_flags(tags.iter().copied(), p.clone(), flags.iter().copied()) {
            Ok(g) => return g,
            Err(_) if !p.is_empty() => {
                p.pop();
            }
            Err(_) => return Gist::nil(),
        }
    }
}

fn gist(tags: &[Modality], payload: &str) -> Gist {
    fit_gist(tags, &[], payload)
}

fn compact(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        fmt_real(v)
    }
}

struct Idle;

impl Behavior for Idle {
    fn propose(&mut self, _ctx: &mut Ctx<'_>) -> Proposal {
        Proposal::idle()
    }
}

struct Constant {
    gist: Gist,
    weight: f64,
    value: Option<f64>,
}

impl Behavior for Constant {
    fn propose(&mut self, _ctx: &mut Ctx<'_>) -> Proposal {
        let p = Proposal::new(self.gist.clone(), self.weight);
        match self.value {
            Some(v) => p.valued(v),
            None => p,
        }
    }
}

struct Reporter {
    sensor: String,
    tags: Vec<Modality>,
    weight: f64,
    last: Option<f64>,
}

impl Behavior for Reporter {
    fn on_input(&mut self, sensor: &str, value: f64, _ctx: &mut Ctx<'_>) {
        if sensor == self.sensor {
            self.last = Some(value);
        }
    }

    fn propose(&mut self, _ctx: &mut Ctx<'_>) -> Proposal {
        match self.last.take() {
            Some(v) => Proposal::new(gist(&self.tags, &format!("{}={}", self.sensor, compact(v))), self.weight),
            None => Proposal::idle(),
        }
    }
}

struct AttentionFilter {
    sensor: String,
    attended: f64,
    attend_weight: f64,
    ignore_weight: f64,
    last: Option<f64>,
}

impl Behavior for AttentionFilter {
    fn on_input(&mut self, sensor: &str, value: f64, _ctx: &mut Ctx<'_>) {
        if sensor == self.sensor {
            self.last = Some(value);
        }
    }

    fn propose(&mut self, _ctx: &mut Ctx<'_>) -> Proposal {
        let Some(v) = self.last else { return Proposal::idle() };
        let w = if v == self.attended { self.attend_weight } else { self.ignore_weight };
        Proposal::new(gist(&[Modality::Vision], &self.sensor), w)
    }
}

struct Vision {
    sensor: String,
    weight: f64,
    submit: bool,
    relay_to: Option<Address>,
    lane: Option<f64>,
}

impl Behavior for Vision {
    fn on_input(&mut self, sensor: &str, value: f64, _ctx: &mut Ctx<'_>) {
        if sensor == self.sensor {
            self.lane = Some(value);
        }
    }

    fn propose(&mut self, ctx: &mut Ctx<'_>) -> Proposal {
        let Some(lane) = self.lane else { return Proposal::idle() };
        let g = gist(&[Modality::Vision], &format!("obstacle:{}", compact(lane)));
        if let Some(to) = self.relay_to {
            if ctx.linked(to) {
                // Unconscious path; failure only means the link is gone.
                let _ = ctx.send_link(to, g.clone(), self.weight);
            }
        }
        if self.submit {
            Proposal::new(g, self.weight)
        } else {
            Proposal::idle()
        }
    }
}

struct Walk {
    actuator: String,
    weight: f64,
    default_lane: f64,
    /// (tick the obstacle was seen, lane)
    seen: Option<(u64, f64)>,
}

impl Walk {
    fn note(&mut self, chunk: &Chunk) {
        if let Some(lane) = chunk.gist().payload().strip_prefix("obstacle:") {
            if let Ok(lane) = lane.parse::<f64>() {
                self.seen = Some((chunk.t(), lane));
            }
        }
    }
}

impl Behavior for Walk {
    fn on_link(&mut self, _from: Address, chunk: &Chunk, _ctx: &mut Ctx<'_>) {
        self.note(chunk);
    }

    fn propose(&mut self, ctx: &mut Ctx<'_>) -> Proposal {
        let lane = match self.seen {
            Some((t, obstacle)) if t + 1 == ctx.tick => {
                if obstacle == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            _ => self.default_lane,
        };
        ctx.command(self.actuator.clone(), lane);
        Proposal::new(gist(&[Modality::Tactile], "walking"), self.weight)
    }
}

struct SceneGist {
    sensor: String,
    weight: f64,
    scene: Option<f64>,
}

impl Behavior for SceneGist {
    fn on_input(&mut self, sensor: &str, value: f64, _ctx: &mut Ctx<'_>) {
        if sensor == self.sensor {
            self.scene = Some(value);
        }
    }

    fn propose(&mut self, _ctx: &mut Ctx<'_>) -> Proposal {
        match self.scene {
            Some(s) => Proposal::new(gist(&[Modality::Vision], &format!("scene:{}", compact(s))), self.weight),
            None => Proposal::idle(),
        }
    }
}

struct ChangeDetector {
    watch: Address,
    weight: f64,
    last: Option<String>,
    pending: Option<String>,
}

impl Behavior for ChangeDetector {
    fn on_broadcast(&mut self, chunk: &Chunk, ctx: &mut Ctx<'_>) {
        if chunk.address() == ctx.address {
            // The report reached STM; stop repeating it.
            self.pending = None;
            return;
        }
        if chunk.address() != self.watch || chunk.gist().is_nil() {
            return;
        }
        let now = chunk.gist().payload().to_owned();
        if self.last.as_ref().is_some_and(|prev| *prev != now) {
            self.pending = Some(now.clone());
        }
        self.last = Some(now);
    }

    fn propose(&mut self, _ctx: &mut Ctx<'_>) -> Proposal {
        match &self.pending {
            Some(p) => {
                let g = fit_gist(&[Modality::Vision], &[Salience::Surprising], &format!("change:{p}"));
                Proposal::new(g, self.weight)
            }
            None => Proposal::idle(),
        }
    }
}

struct Sleep {
    need_threshold: u64,
    recovery: u64,
    sleep_weight: f64,
    dream_need: u64,
    dream_weight: f64,
    noise_sensor: String,
    gate_weight: f64,
    stage: SleepStage,
    need: u64,
}

impl Behavior for Sleep {
    fn on_input(&mut self, sensor: &str, value: f64, _ctx: &mut Ctx<'_>) {
        if sensor == self.noise_sensor && self.stage != SleepStage::Awake && value >= self.gate_weight {
            self.stage = SleepStage::Awake;
            self.need = 0;
        }
    }

    fn propose(&mut self, _ctx: &mut Ctx<'_>) -> Proposal {
        match self.stage {
            SleepStage::Awake => {
                self.need += 1;
                if self.need >= self.need_threshold {
                    self.stage = SleepStage::Asleep;
                }
            }
            SleepStage::Asleep => {
                self.need = self.need.saturating_sub(self.recovery);
                if self.need <= self.dream_need {
                    self.stage = SleepStage::Dreaming;
                }
            }
            SleepStage::Dreaming => {
                self.need = self.need.saturating_sub(self.recovery);
                if self.need == 0 {
                    self.stage = SleepStage::Awake;
                }
            }
        }
        match self.stage {
            SleepStage::Awake => Proposal::idle(),
            SleepStage::Asleep => Proposal::new(Gist::nil(), self.sleep_weight),
            SleepStage::Dreaming => Proposal::new(Gist::nil(), self.dream_weight),
        }
    }

    fn sleep_stage(&self) -> Option<SleepStage> {
        Some(self.stage)
    }

    fn gate_weight(&self) -> Option<f64> {
        (self.stage != SleepStage::Awake).then_some(self.gate_weight)
    }
}

struct DreamCreator {
    sleep_address: Address,
    dream_after: u32,
    weight: f64,
    wake_sensor: String,
    streak: u32,
    active: bool,
}

impl Behavior for DreamCreator {
    fn on_input(&mut self, sensor: &str, _value: f64, _ctx: &mut Ctx<'_>) {
        if sensor == self.wake_sensor {
            self.active = false;
            self.streak = 0;
        }
    }

    fn on_broadcast(&mut self, chunk: &Chunk, ctx: &mut Ctx<'_>) {
        if chunk.address() == self.sleep_address && chunk.gist().is_nil() {
            self.streak = self.streak.saturating_add(1);
            if self.streak >= self.dream_after {
                self.active = true;
            }
        } else if chunk.address() != ctx.address {
            self.streak = 0;
        }
    }

    fn propose(&mut self, ctx: &mut Ctx<'_>) -> Proposal {
        if !self.active {
            return Proposal::idle();
        }
        // Recombine remembered broadcasts from other processors.
        let pool: Vec<&str> = ctx
            .memory
            .records()
            .filter(|r| r.chunk.address() != ctx.address && !r.chunk.gist().is_nil())
            .map(|r| r.chunk.gist().payload())
            .filter(|p| !p.is_empty() && !p.starts_with("dream"))
            .collect();
        let payload = match pool.len() {
            0 => "dream:flying".to_owned(),
            n => {
                let a = pool[ctx.rng.below(n)];
                let b = pool[ctx.rng.below(n)];
                format!("dream:{a}+{b}")
            }
        };
        Proposal::new(fit_gist(&[Modality::Vision], &[Salience::Wonderful], &payload), self.weight)
    }
}

struct Inner {
    source: Address,
    tags: Vec<Modality>,
    weight: f64,
    pending: Option<String>,
}

impl Behavior for Inner {
    fn on_broadcast(&mut self, chunk: &Chunk, _ctx: &mut Ctx<'_>) {
        if chunk.address() == self.source && !chunk.gist().is_nil() {
            self.pending = Some(chunk.gist().payload().to_owned());
        }
    }

    fn propose(&mut self, _ctx: &mut Ctx<'_>) -> Proposal {
        match self.pending.take() {
            Some(p) => Proposal::new(gist(&self.tags, &format!("inner:{p}")), self.weight),
            None => Proposal::idle(),
        }
    }
}

struct Motor {
    weight: f64,
    cues: Vec<MotorCue>,
    react: Option<(Address, String)>,
    issued: u64,
}

impl Behavior for Motor {
    fn on_broadcast(&mut self, chunk: &Chunk, ctx: &mut Ctx<'_>) {
        if chunk.address() == ctx.address {
            if let Some(target) = chunk.gist().payload().strip_prefix("move:") {
                self.issued += 1;
                ctx.command(target, self.issued as f64);
            }
        } else if let Some((from, actuator)) = &self.react {
            if chunk.address() == *from && !chunk.gist().is_nil() {
                self.issued += 1;
                ctx.command(actuator.clone(), self.issued as f64);
            }
        }
    }

    fn propose(&mut self, ctx: &mut Ctx<'_>) -> Proposal {
        let cue = self
            .cues
            .iter()
            .find(|c| c.period > 0 && ctx.tick % c.period == c.offset % c.period);
        match cue {
            Some(c) => Proposal::new(gist(&[Modality::Command], &format!("move:{}", c.actuator)), self.weight),
            None => Proposal::idle(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorldTag {
    #[serde(rename = "self")]
    SelfTag,
    NotSelf,
    Unknown,
}

impl WorldTag {
    pub fn label(self) -> &'static str {
        match self {
            WorldTag::SelfTag => "self",
            WorldTag::NotSelf => "not_self",
            WorldTag::Unknown => "unknown",
        }
    }
}

/// Outcomes of motor trials for one entity: a hit is sensed movement within
/// the window after a command broadcast.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TagEvidence {
    pub hits: u32,
    pub misses: u32,
}

impl TagEvidence {
    pub fn trials(&self) -> u32 {
        self.hits + self.misses
    }

    pub fn hit_rate(&self) -> f64 {
        match self.trials() {
            0 => 0.0,
            n => self.hits as f64 / n as f64,
        }
    }

    /// Self needs `threshold` hits at a rate of at least 0.8; not-self needs
    /// `threshold` trials at a rate under 0.5.
    pub fn tag(&self, threshold: u32) -> WorldTag {
        let (h, n) = (self.hits as u64, self.trials() as u64);
        if self.hits >= threshold && 5 * h >= 4 * n {
            WorldTag::SelfTag
        } else if self.trials() >= threshold && 2 * h < n {
            WorldTag::NotSelf
        } else {
            WorldTag::Unknown
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldModelEntry {
    pub entity: String,
    pub tag: WorldTag,
    pub evidence: TagEvidence,
    /// The tag has been broadcast.
    pub ctm_conscious: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WorldModel {
    pub entries: Vec<WorldModelEntry>,
}

impl WorldModel {
    pub fn get(&self, entity: &str) -> Option<&WorldModelEntry> {
        self.entries.iter().find(|e| e.entity == entity)
    }
}

struct WorldModelBehavior {
    model: WorldModel,
    entities: Vec<EntitySpec>,
    threshold: u32,
    window: u64,
    weight: f64,
    /// Open trials: (entity index, command broadcast tick).
    trials: VecDeque<(usize, u64)>,
    last_reading: BTreeMap<String, f64>,
}

impl WorldModelBehavior {
    fn settle(&mut self, i: usize, hit: bool) {
        let e = &mut self.model.entries[i];
        if hit {
            e.evidence.hits += 1;
        } else {
            e.evidence.misses += 1;
        }
        let tag = e.evidence.tag(self.threshold);
        if tag != e.tag {
            e.tag = tag;
            e.ctm_conscious = false;
        }
    }
}

impl Behavior for WorldModelBehavior {
    fn on_input(&mut self, sensor: &str, value: f64, ctx: &mut Ctx<'_>) {
        let Some(i) = self.entities.iter().position(|e| e.sensor == sensor) else { return };
        let moved = self.last_reading.insert(sensor.to_owned(), value).is_some_and(|prev| prev != value);
        if !moved {
            return;
        }
        // A movement settles every open trial for this entity as a hit.
        let window = self.window;
        let now = ctx.tick;
        let mut hits = 0;
        self.trials.retain(|&(e, t0)| {
            let hit = e == i && now > t0 && now <= t0 + window;
            hits += hit as usize;
            !hit
        });
        for _ in 0..hits {
            self.settle(i, true);
        }
    }

    fn on_broadcast(&mut self, chunk: &Chunk, ctx: &mut Ctx<'_>) {
        let payload = chunk.gist().payload();
        if chunk.gist().has_tag(Modality::Command) {
            if let Some(target) = payload.strip_prefix("move:") {
                if let Some(i) = self.entities.iter().position(|e| e.name == target) {
                    self.trials.push_back((i, ctx.tick));
                }
            }
        } else if chunk.address() == ctx.address {
            for e in &mut self.model.entries {
                if payload == format!("{}:{}", e.tag.label(), e.entity) {
                    e.ctm_conscious = true;
                }
            }
        }
    }

    fn propose(&mut self, ctx: &mut Ctx<'_>) -> Proposal {
        let now = ctx.tick;
        let window = self.window;
        let mut expired = Vec::new();
        while let Some(&(e, t0)) = self.trials.front() {
            if now > t0 + window {
                expired.push(e);
                self.trials.pop_front();
            } else {
                break;
            }
        }
        for e in expired {
            self.settle(e, false);
        }
        let pending: Vec<&WorldModelEntry> = self
            .model
            .entries
            .iter()
            .filter(|e| e.tag != WorldTag::Unknown && !e.ctm_conscious)
            .collect();
        if pending.is_empty() {
            return Proposal::idle();
        }
        let e = pending[(now as usize) % pending.len()];
        Proposal::new(gist(&[Modality::Speech], &format!("{}:{}", e.tag.label(), e.entity)), self.weight)
    }

    fn world_model(&self) -> Option<&WorldModel> {
        Some(&self.model)
    }
}

struct Meditator {
    weight: f64,
    hush_period: u64,
    sessions: Vec<[u64; 2]>,
}

impl Behavior for Meditator {
    fn propose(&mut self, ctx: &mut Ctx<'_>) -> Proposal {
        let t = ctx.tick;
        let active = self.sessions.is_empty() || self.sessions.iter().any(|[s, e]| (*s..*e).contains(&t));
        if !active {
            Proposal::idle()
        } else if t.is_multiple_of(self.hush_period) {
            Proposal::new(gist(&[Modality::Command], "hush"), self.weight)
        } else {
            Proposal::new(gist(&[Modality::Speech], "breathe"), self.weight)
        }
    }
}

struct Questioner {
    topic: String,
    period: u64,
    weight: f64,
    source: Option<Address>,
}

impl Questioner {
    fn is_answer(&self, chunk: &Chunk) -> bool {
        chunk.gist().has_tag(Modality::Answer)
            && chunk.gist().payload().strip_prefix(self.topic.as_str()).is_some_and(|r| r.starts_with(':'))
    }
}

impl Behavior for Questioner {
    fn on_broadcast(&mut self, chunk: &Chunk, ctx: &mut Ctx<'_>) {
        if chunk.address() != ctx.address && self.is_answer(chunk) {
            ctx.acknowledge(chunk.address());
            self.source = Some(chunk.address());
        }
    }

    fn on_link(&mut self, from: Address, chunk: &Chunk, ctx: &mut Ctx<'_>) {
        if self.is_answer(chunk) {
            ctx.acknowledge(from);
        }
    }

    fn propose(&mut self, ctx: &mut Ctx<'_>) -> Proposal {
        if !ctx.tick.is_multiple_of(self.period) {
            return Proposal::idle();
        }
        let q = gist(&[Modality::Query], &self.topic);
        if let Some(to) = self.source.filter(|&s| ctx.linked(s)) {
            if ctx.send_link(to, q.clone(), self.weight).is_ok() {
                return Proposal::idle();
            }
        }
        Proposal::new(q, self.weight)
    }
}

struct Answerer {
    topic: String,
    weight: f64,
    pending: bool,
}

impl Answerer {
    fn answer(&self) -> Gist {
        gist(&[Modality::Answer], &format!("{}:answer", self.topic))
    }
}

impl Behavior for Answerer {
    fn on_broadcast(&mut self, chunk: &Chunk, ctx: &mut Ctx<'_>) {
        if chunk.address() != ctx.address
            && chunk.gist().has_tag(Modality::Query)
            && chunk.gist().payload() == self.topic
        {
            self.pending = true;
        }
    }

    fn on_link(&mut self, from: Address, chunk: &Chunk, ctx: &mut Ctx<'_>) {
        if chunk.gist().has_tag(Modality::Query) && chunk.gist().payload() == self.topic {
            let _ = ctx.send_link(from, self.answer(), self.weight);
        }
    }

    fn propose(&mut self, _ctx: &mut Ctx<'_>) -> Proposal {
        if std::mem::take(&mut self.pending) {
            Proposal::new(self.answer(), self.weight)
        } else {
            Proposal::idle()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evidence_tags() {
        let t = |hits, misses| TagEvidence { hits, misses }.tag(5);
        assert_eq!(t(5, 0), WorldTag::SelfTag);
        assert_eq!(t(4, 0), WorldTag::Unknown);
        assert_eq!(t(8, 2), WorldTag::SelfTag);
        assert_eq!(t(8, 3), WorldTag::Unknown);
        assert_eq!(t(1, 4), WorldTag::NotSelf);
        assert_eq!(t(2, 2), WorldTag::Unknown);
        assert_eq!(t(0, 4), WorldTag::Unknown);
    }

    #[test]
    fn oversized_payload_is_shortened() {
        let g = fit_gist(&[Modality::Speech], &[], &"x".repeat(500));
        assert!(g.encoded_len() <= crate::chunk::GIST_MAX_BYTES);
        assert!(g.payload().len() > 100);
    }

    #[test]
    fn compact_numbers() {
        assert_eq!(compact(3.0), "3");
        assert_eq!(compact(-1.0), "-1");
        assert_eq!(compact(0.5), "0.500000000");
    }

    #[test]
    fn specs_parse_from_toml() {
        #[derive(Deserialize)]
        struct W {
            b: BehaviorSpec,
        }
        let w: W = toml::from_str("b = { kind = \"meditator\", weight = 4.0, hush_period = 25 }").unwrap();
        assert_eq!(w.b, BehaviorSpec::Meditator { weight: 4.0, hush_period: 25, sessions: vec![] });
        assert!(toml::from_str::<W>("b = { kind = \"meditator\", weight = 1.0, hush_period = 2, x = 1 }").is_err());
    }
}

