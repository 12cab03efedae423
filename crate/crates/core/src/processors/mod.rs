//! Long-term-memory processors: submission, broadcast and link reception,
//! chunk memory, link formation and Sleeping Experts weight adaptation.

mod behavior;
mod links;
mod memory;
mod sea;

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

pub use behavior::{
    Behavior, BehaviorSpec, EntitySpec, MotorCue, SleepStage, TagEvidence, WorldModel,
    WorldModelEntry, WorldTag,
};
pub use links::{AckOutcome, LinkState};
pub use memory::{MemoryRecord, MemoryStore, RecordKind};
pub use sea::{sea_update, Feedback, SeaLedger, SeaParams, Verdict};

use crate::chunk::{make_chunk, Address, Chunk, Gist, Modality};
use crate::error::{Error, Result};
use crate::record::fmt_real;
use crate::rng::SimRng;

/// A behavior's choice of what to submit this tick, before the processor
/// applies its weight-giving power.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub gist: Gist,
    pub base_weight: f64,
    /// Ground-truth value of the information, when the behavior knows it.
    pub value: Option<f64>,
    /// Earlier submission tick this chunk is about, if any.
    pub refers_to: Option<u64>,
}

impl Proposal {
    pub fn idle() -> Self {
        Self { gist: Gist::nil(), base_weight: 0.0, value: None, refers_to: None }
    }

    pub fn new(gist: Gist, base_weight: f64) -> Self {
        Self { gist, base_weight, value: None, refers_to: None }
    }

    pub fn valued(mut self, value: f64) -> Self {
        self.value = Some(value);
        self
    }
}

/// Something delivered to a processor's inbox.
#[derive(Debug, Clone, PartialEq)]
pub enum Incoming {
    Input { sensor: String, value: f64 },
    Broadcast { chunk: Chunk, value: Option<f64>, refers_to: Option<u64> },
    Link { from: Address, chunk: Chunk, sent: u64 },
}

/// A cross-processor or environment effect, buffered until the tick barrier.
#[derive(Debug, Clone, PartialEq)]
pub enum Effect {
    LinkSend(LinkMessage),
    Acknowledge { peer: Address },
    Command { actuator: String, value: f64 },
    Feedback(Feedback),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkMessage {
    pub from: Address,
    pub to: Address,
    pub sent: u64,
    pub chunk: Chunk,
}

/// What a behavior can see and do while handling an event.
pub struct Ctx<'a> {
    pub tick: u64,
    pub address: Address,
    pub g: f64,
    pub rng: &'a mut SimRng,
    pub memory: &'a MemoryStore,
    links: &'a BTreeMap<Address, LinkState>,
    effects: &'a mut Vec<Effect>,
}

impl Ctx<'_> {
    pub fn linked(&self, peer: Address) -> bool {
        self.links.get(&peer).is_some_and(|l| l.formed)
    }

    /// Queues a chunk for `to` over a formed link; it arrives next tick.
    pub fn send_link(&mut self, to: Address, gist: Gist, base_weight: f64) -> Result<()> {
        let chunk = make_chunk(self.address, self.tick, gist, self.g * base_weight)?;
        let msg = send_via_link(self.address, self.links, to, chunk, self.tick)?;
        self.effects.push(Effect::LinkSend(msg));
        Ok(())
    }

    pub fn acknowledge(&mut self, peer: Address) {
        self.effects.push(Effect::Acknowledge { peer });
    }

    pub fn command(&mut self, actuator: impl Into<String>, value: f64) {
        self.effects.push(Effect::Command { actuator: actuator.into(), value });
    }

    pub fn feedback(&mut self, verdict: Verdict, reason: &'static str) {
        self.effects.push(Effect::Feedback(Feedback { verdict, reference_tick: self.tick, reason }));
    }
}

/// Validates and stamps a link send. Delivery happens at `tick + 1`.
pub fn send_via_link(
    from: Address,
    links: &BTreeMap<Address, LinkState>,
    to: Address,
    chunk: Chunk,
    tick: u64,
) -> Result<LinkMessage> {
    if to == from {
        return Err(Error::SelfLink(from));
    }
    if !links.get(&to).is_some_and(|l| l.formed) {
        return Err(Error::NoLink(from, to));
    }
    Ok(LinkMessage { from, to, sent: tick, chunk })
}

/// Result of one processor step: the chunk entering the competition and
/// the effects to apply at the barrier.
#[derive(Debug)]
pub struct StepOutput {
    pub chunk: Chunk,
    pub value: Option<f64>,
    pub refers_to: Option<u64>,
    pub effects: Vec<Effect>,
}

pub struct Processor {
    address: Address,
    specialty: String,
    behavior: Box<dyn Behavior>,
    g: f64,
    inbox: Vec<Incoming>,
    memory: MemoryStore,
    links: BTreeMap<Address, LinkState>,
    sea: SeaLedger,
    last_inputs: BTreeMap<String, f64>,
    rng: SimRng,
}

impl std::fmt::Debug for Processor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Processor")
            .field("address", &self.address)
            .field("specialty", &self.specialty)
            .field("g", &self.g)
            .finish_non_exhaustive()
    }
}

impl Processor {
    pub fn new(
        address: Address,
        specialty: impl Into<String>,
        behavior: Box<dyn Behavior>,
        memory: MemoryStore,
        rng: SimRng,
    ) -> Self {
        Self {
            address,
            specialty: specialty.into(),
            behavior,
            g: 1.0,
            inbox: Vec::new(),
            memory,
            links: BTreeMap::new(),
            sea: SeaLedger::default(),
            last_inputs: BTreeMap::new(),
            rng,
        }
    }

    pub fn address(&self) -> Address {
        self.address
    }

    pub fn specialty(&self) -> &str {
        &self.specialty
    }

    /// Weight-giving power.
    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn behavior(&self) -> &dyn Behavior {
        self.behavior.as_ref()
    }

    pub fn memory(&self) -> &MemoryStore {
        &self.memory
    }

    pub fn links(&self) -> &BTreeMap<Address, LinkState> {
        &self.links
    }

    pub fn link(&self, peer: Address) -> Option<&LinkState> {
        self.links.get(&peer)
    }

    pub fn inbox_len(&self) -> usize {
        self.inbox.len()
    }

    pub fn deliver(&mut self, item: Incoming) {
        self.inbox.push(item);
    }

    fn with_ctx<R>(&mut self, tick: u64, effects: &mut Vec<Effect>, f: impl FnOnce(&mut dyn Behavior, &mut Ctx<'_>) -> R) -> R {
        let mut ctx = Ctx {
            tick,
            address: self.address,
            g: self.g,
            rng: &mut self.rng,
            memory: &self.memory,
            links: &self.links,
            effects,
        };
        f(self.behavior.as_mut(), &mut ctx)
    }

    /// Turns a proposal into this tick's level-0 chunk, with weight
    /// `g · base_weight`, and remembers it.
    pub fn make_submission(&mut self, proposal: &Proposal, tick: u64) -> Result<Chunk> {
        let chunk = make_chunk(self.address, tick, proposal.gist.clone(), self.g * proposal.base_weight)?;
        self.memory.store(tick, RecordKind::Submitted, chunk.clone());
        if let Some(v) = proposal.value {
            self.sea.record_submission(tick, v);
        }
        Ok(chunk)
    }

    /// Handles the STM broadcast: stores it, updates the SEA ledger and
    /// lets the behavior react. A `command` gist reading `hush` from another
    /// processor asks every receiver to hush.
    pub fn receive_broadcast(
        &mut self,
        chunk: Chunk,
        value: Option<f64>,
        refers_to: Option<u64>,
        tick: u64,
    ) -> Vec<Effect> {
        let mut effects = Vec::new();
        self.memory.store(tick, RecordKind::BroadcastReceived, chunk.clone());
        let won = chunk.address() == self.address;
        self.sea.record_broadcast(chunk.t(), won, value, refers_to);
        if !won && chunk.gist().has_tag(Modality::Command) && chunk.gist().payload() == "hush" {
            effects.push(Effect::Feedback(Feedback {
                verdict: Verdict::Hush,
                reference_tick: chunk.t(),
                reason: "hushed_by_broadcast",
            }));
        }
        self.with_ctx(tick, &mut effects, |b, ctx| b.on_broadcast(&chunk, ctx));
        effects
    }

    pub fn receive_link(&mut self, from: Address, chunk: Chunk, tick: u64) -> Vec<Effect> {
        let mut effects = Vec::new();
        self.memory.store(tick, RecordKind::LinkReceived, chunk.clone());
        self.with_ctx(tick, &mut effects, |b, ctx| b.on_link(from, &chunk, ctx));
        effects
    }

    pub fn receive_input(&mut self, sensor: &str, value: f64, tick: u64) -> Vec<Effect> {
        let mut effects = Vec::new();
        let changed = self.last_inputs.insert(sensor.to_owned(), value) != Some(value);
        if changed {
            let payload = format!("{sensor}={}", fmt_real(value));
            if let Ok(gist) = Gist::new([Modality::Tactile], payload) {
                let chunk = Chunk::null(self.address, tick);
                let chunk = make_chunk(chunk.address(), tick, gist, 0.0).unwrap_or(chunk);
                self.memory.store(tick, RecordKind::InputReceived, chunk);
            }
        }
        self.with_ctx(tick, &mut effects, |b, ctx| b.on_input(sensor, value, ctx));
        effects
    }

    /// Processes the inbox in arrival order, then asks the behavior for this
    /// tick's submission.
    pub fn step(&mut self, tick: u64) -> Result<StepOutput> {
        let mut effects = Vec::new();
        for item in std::mem::take(&mut self.inbox) {
            let more = match item {
                Incoming::Input { sensor, value } => self.receive_input(&sensor, value, tick),
                Incoming::Broadcast { chunk, value, refers_to } => {
                    self.receive_broadcast(chunk, value, refers_to, tick)
                }
                Incoming::Link { from, chunk, .. } => self.receive_link(from, chunk, tick),
            };
            effects.extend(more);
        }
        let proposal = self.with_ctx(tick, &mut effects, |b, ctx| b.propose(ctx));
        let chunk = self.make_submission(&proposal, tick)?;
        Ok(StepOutput { chunk, value: proposal.value, refers_to: proposal.refers_to, effects })
    }

    /// Applies a verdict; `g` only ever moves by a factor of `c_sea`.
    pub fn sea_update(&mut self, feedback: &Feedback, params: &SeaParams) -> f64 {
        self.g = sea_update(self.g, feedback, params);
        self.g
    }

    pub fn generate_feedback(&mut self, window: RangeInclusive<u64>) -> Vec<Feedback> {
        self.sea.generate_feedback(window)
    }

    pub fn sea_ledger_mut(&mut self) -> &mut SeaLedger {
        &mut self.sea
    }

    pub fn prune_memory(&mut self, now: u64) -> usize {
        self.memory.prune(now)
    }

    pub fn high_level_story(&self, range: RangeInclusive<u64>) -> Vec<Gist> {
        self.memory.story(range)
    }

    fn link_mut(&mut self, peer: Address) -> &mut LinkState {
        self.links.entry(peer).or_insert_with(|| LinkState::new(peer))
    }

    /// Marks a link as formed on this side without acknowledgements.
    pub(crate) fn force_link(&mut self, peer: Address) {
        self.link_mut(peer).formed = true;
    }
}

/// `a` found `b`'s chunks useful. Once `a` has done so `threshold` times the
/// link forms on both sides; further acknowledgements strengthen it.
pub fn acknowledge_useful(
    processors: &mut [Processor],
    a: Address,
    b: Address,
    threshold: u32,
) -> Result<AckOutcome> {
    if a == b {
        return Err(Error::SelfLink(a));
    }
    let n = processors.len();
    if a >= n || b >= n {
        return Err(Error::AddressOutOfRange(a.max(b), n));
    }
    let (pa, pb) = if a < b {
        let (lo, hi) = processors.split_at_mut(b);
        (&mut lo[a], &mut hi[0])
    } else {
        let (lo, hi) = processors.split_at_mut(a);
        (&mut hi[0], &mut lo[b])
    };
    let side = pa.link_mut(b);
    if side.formed {
        side.strength += 1;
        let s = side.strength;
        pb.link_mut(a).strength = s;
        return Ok(AckOutcome::Strengthened(s));
    }
    side.usefulness_count += 1;
    if side.usefulness_count >= threshold {
        side.formed = true;
        pb.link_mut(a).formed = true;
        Ok(AckOutcome::Formed)
    } else {
        Ok(AckOutcome::Counted)
    }
}
