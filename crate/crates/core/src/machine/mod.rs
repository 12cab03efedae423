//! The clocked machine: processors, Up-Tree, STM, broadcast, links and the
//! environment, advanced one tick at a time.

mod config;
mod env;
mod trace;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub use config::{
    CtmConfig, InputMap, MemoryConfig, OutputMap, ProcessorSpec, ScheduledValue, SeaConfig, SignalSpec,
    TraceConfig, CONFIG_SCHEMA_VERSION,
};
pub use env::{ActuatorEntry, Environment};
pub use trace::{
    stream_of_consciousness, Event, EventKind, Trace, TraceFilter, TraceHeader, EVENT_KINDS,
    TRACE_SCHEMA_VERSION,
};

use crate::chunk::{Address, Chunk};
use crate::error::{Error, Result};
use crate::processors::{
    acknowledge_useful, AckOutcome, BehaviorSpec, Effect, Feedback, Incoming, LinkMessage, MemoryStore, Processor,
    SleepStage, WorldModel,
};
use crate::rng::{processor_stream, SimRng};
use crate::uptree::{build_uptree, UpTree};

/// Short-term memory: exactly one chunk, NIL until the first competition
/// completes.
#[derive(Debug, Clone, PartialEq)]
pub struct Stm {
    pub chunk: Chunk,
    pub installed_at: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoodLabel {
    Optimistic,
    Pessimistic,
    Neutral,
}

impl fmt::Display for MoodLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MoodLabel::Optimistic => "optimistic",
            MoodLabel::Pessimistic => "pessimistic",
            MoodLabel::Neutral => "neutral",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoodReading {
    pub tick: u64,
    pub mood: f64,
    pub intensity: f64,
    pub label: MoodLabel,
}

/// What happened during one tick.
#[derive(Debug, Clone, Default)]
pub struct TickReport {
    pub tick: u64,
    pub events: Vec<Event>,
    /// Chunk installed in STM this tick.
    pub installed: Option<Chunk>,
    /// Chunk every processor received this tick.
    pub broadcast: Option<Chunk>,
    /// Sleep stage in which this tick's submissions were made.
    pub sleep_stage: Option<SleepStage>,
    pub inputs_delivered: usize,
    pub inputs_gated: usize,
    pub commands_issued: usize,
    pub commands_blocked: usize,
}

/// Largest deviation between STM aggregates and the submission sums h
/// ticks earlier.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AggregationCheck {
    pub ticks_checked: u64,
    pub max_mood_error: f64,
    pub max_intensity_error: f64,
}

impl AggregationCheck {
    /// Errors are measured relative to `max(1, Σ|w|)`.
    pub fn holds(&self, tol: f64) -> bool {
        self.max_mood_error <= tol && self.max_intensity_error <= tol
    }
}

type GroundTruth = (Option<f64>, Option<u64>);

pub struct Ctm {
    config: CtmConfig,
    tree: UpTree,
    tree_rng: SimRng,
    processors: Vec<Processor>,
    env: Environment,
    stm: Stm,
    now: u64,
    pending_broadcast: Option<(Chunk, GroundTruth)>,
    pending_links: Vec<LinkMessage>,
    ground_truth: BTreeMap<(u64, Address), GroundTruth>,
    /// Per tick: (Σ weight, Σ |weight|) over this tick's submissions.
    submission_sums: Vec<(f64, f64)>,
    /// Per tick: STM (mood, intensity) after phase 5.
    stm_log: Vec<(f64, f64)>,
    outputs: BTreeSet<(Address, String)>,
    trace: Trace,
}

impl fmt::Debug for Ctm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Ctm").field("now", &self.now).field("stm", &self.stm).finish_non_exhaustive()
    }
}

/// Builds a machine at tick 0 with an empty pipeline, no links (unless the
/// config lists initial ones) and g = 1 everywhere.
pub fn new_ctm(config: CtmConfig) -> Result<Ctm> {
    config.validate()?;
    let n = config.n_processors;
    let tree = build_uptree(n, config.arity, config.competition, config.mode)?;
    let roster: BTreeMap<Address, &ProcessorSpec> = config.processors.iter().map(|p| (p.address, p)).collect();
    let capacity = config.memory_capacity();
    let processors = (0..n)
        .map(|a| {
            let (specialty, behavior) = match roster.get(&a) {
                Some(p) => (p.specialty.as_str(), p.behavior.build()),
                None => ("idle", BehaviorSpec::Idle.build()),
            };
            Processor::new(
                a,
                specialty,
                behavior,
                MemoryStore::new(capacity, config.memory.recency_window),
                SimRng::with_stream(config.seed, processor_stream(a)),
            )
        })
        .collect::<Vec<_>>();
    let mut ctm = Ctm {
        tree_rng: SimRng::new(config.seed),
        env: Environment::new(config.signals.clone(), config.seed),
        stm: Stm { chunk: Chunk::null(0, 0), installed_at: None },
        now: 0,
        pending_broadcast: None,
        pending_links: Vec::new(),
        ground_truth: BTreeMap::new(),
        submission_sums: Vec::new(),
        stm_log: Vec::new(),
        outputs: config.outputs.iter().map(|o| (o.from, o.actuator.clone())).collect(),
        trace: Trace::new(TraceHeader {
            schema_version: TRACE_SCHEMA_VERSION,
            height: tree.height(),
            n_processors: n,
            seed: config.seed,
        }),
        tree,
        processors,
        config,
    };
    for &[a, b] in &ctm.config.initial_links.clone() {
        ctm.processors[a].force_link(b);
        ctm.processors[b].force_link(a);
    }
    Ok(ctm)
}

impl Ctm {
    pub fn config(&self) -> &CtmConfig {
        &self.config
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn height(&self) -> u32 {
        self.tree.height()
    }

    pub fn stm(&self) -> &Stm {
        &self.stm
    }

    pub fn processors(&self) -> &[Processor] {
        &self.processors
    }

    pub fn processor(&self, address: Address) -> Option<&Processor> {
        self.processors.get(address)
    }

    pub fn environment(&self) -> &Environment {
        &self.env
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn take_trace(&mut self) -> Trace {
        let header = self.trace.header;
        std::mem::replace(&mut self.trace, Trace::new(header))
    }

    pub fn submission_sums(&self) -> &[(f64, f64)] {
        &self.submission_sums
    }

    pub fn sleep_stage(&self) -> Option<SleepStage> {
        self.processors.iter().find_map(|p| p.behavior().sleep_stage())
    }

    pub fn world_model(&self) -> Option<&WorldModel> {
        self.processors.iter().find_map(|p| p.behavior().world_model())
    }

    /// Strictest input gate currently imposed by a sleeping processor.
    fn gate(&self) -> Option<f64> {
        self.processors.iter().filter_map(|p| p.behavior().gate_weight()).reduce(f64::max)
    }

    /// `a` found `b`'s chunks useful; forms or strengthens their link.
    pub fn acknowledge_useful(&mut self, a: Address, b: Address) -> Result<AckOutcome> {
        acknowledge_useful(&mut self.processors, a, b, self.config.link_threshold)
    }

    /// Runs one tick through all phases.
    pub fn tick(&mut self) -> Result<TickReport> {
        let t = self.now;
        if t >= self.config.lifetime {
            return Err(Error::PastLifetime { tick: t, lifetime: self.config.lifetime });
        }
        let opts = self.config.trace.clone();
        let mut report = TickReport { tick: t, ..Default::default() };
        let mut events = Vec::new();

        // 1: sensors to inboxes, gated while asleep.
        self.env.advance(t);
        let gate = self.gate();
        for m in &self.config.inputs {
            let value = self.env.value(&m.sensor).unwrap_or(0.0);
            if gate.is_some_and(|g| value.abs() < g) {
                report.inputs_gated += m.to.len();
                continue;
            }
            for &to in &m.to {
                self.processors[to].deliver(Incoming::Input { sensor: m.sensor.clone(), value });
                report.inputs_delivered += 1;
                if opts.inputs {
                    events.push(Event {
                        tick: t,
                        kind: EventKind::InputDelivery { sensor: m.sensor.clone(), to, value },
                    });
                }
            }
        }

        // 2: last tick's broadcast, then last tick's link sends.
        if let Some((chunk, (value, refers_to))) = self.pending_broadcast.take() {
            for p in &mut self.processors {
                p.deliver(Incoming::Broadcast { chunk: chunk.clone(), value, refers_to });
            }
            events.push(Event { tick: t, kind: EventKind::Broadcast { chunk: chunk.clone() } });
            report.broadcast = Some(chunk);
        }
        for msg in std::mem::take(&mut self.pending_links) {
            self.processors[msg.to].deliver(Incoming::Link { from: msg.from, chunk: msg.chunk, sent: msg.sent });
        }

        // 3: processors step; cross-processor effects wait for the barrier.
        let mut chunks = Vec::with_capacity(self.processors.len());
        let mut cross: Vec<(Address, Address, Effect)> = Vec::new();
        let mut commands: Vec<(Address, String, f64)> = Vec::new();
        let mut feedback: Vec<(Address, Feedback)> = Vec::new();
        for p in &mut self.processors {
            let a = p.address();
            let out = p.step(t)?;
            if out.value.is_some() || out.refers_to.is_some() {
                self.ground_truth.insert((t, a), (out.value, out.refers_to));
            }
            chunks.push(out.chunk);
            for e in out.effects {
                match e {
                    Effect::LinkSend(ref m) => cross.push((a, m.to, e.clone())),
                    Effect::Acknowledge { peer } => cross.push((a, peer, e)),
                    Effect::Command { actuator, value } => commands.push((a, actuator, value)),
                    Effect::Feedback(fb) => feedback.push((a, fb)),
                }
            }
        }
        report.sleep_stage = self.sleep_stage();
        cross.sort_by_key(|&(from, to, _)| (from, to));
        for (from, to, e) in cross {
            match e {
                Effect::LinkSend(msg) => {
                    events.push(Event {
                        tick: t,
                        kind: EventKind::LinkSend { from, to, chunk: msg.chunk.clone() },
                    });
                    self.pending_links.push(msg);
                }
                Effect::Acknowledge { .. } => {
                    if let Ok(AckOutcome::Formed) = self.acknowledge_useful(from, to) {
                        let (a, b) = (from.min(to), from.max(to));
                        events.push(Event { tick: t, kind: EventKind::LinkFormed { a, b } });
                    }
                }
                _ => unreachable!("only link traffic is buffered here"),
            }
        }

        // 4: submissions enter level 0; every in-flight competition advances.
        let (sw, sa) = chunks.iter().fold((0.0, 0.0), |(w, a), c| (w + c.weight(), a + c.weight().abs()));
        self.submission_sums.push((sw, sa));
        if opts.submissions {
            events.extend(chunks.iter().map(|c| Event { tick: t, kind: EventKind::Submission { chunk: c.clone() } }));
        }
        self.tree.submit_level0(chunks, t)?;
        let mut wins = Vec::new();
        let winner = self.tree.advance_with(&mut self.tree_rng, |w| {
            if opts.node_wins {
                wins.push(w);
            }
        });
        events.extend(wins.into_iter().map(|w| Event {
            tick: t,
            kind: EventKind::NodeWin { level: w.level, node: w.node, start: w.start, winner: w.winner },
        }));

        // 5: STM install; broadcast next tick.
        if let Some(chunk) = winner {
            let truth = self.ground_truth.remove(&(chunk.t(), chunk.address())).unwrap_or((None, None));
            self.ground_truth = self.ground_truth.split_off(&(chunk.t() + 1, 0));
            self.stm = Stm { chunk: chunk.clone(), installed_at: Some(t) };
            events.push(Event { tick: t, kind: EventKind::StmInstall { chunk: chunk.clone() } });
            self.pending_broadcast = Some((chunk.clone(), truth));
            report.installed = Some(chunk);
        }
        self.stm_log.push((self.stm.chunk.mood(), self.stm.chunk.intensity()));

        // 6: actuators, blocked while asleep.
        let asleep = gate.is_some() || self.gate().is_some();
        for (from, actuator, value) in commands {
            if asleep || !self.outputs.contains(&(from, actuator.clone())) {
                report.commands_blocked += 1;
                continue;
            }
            self.env.command(t, &actuator, value);
            report.commands_issued += 1;
            events.push(Event { tick: t, kind: EventKind::ActuatorCommand { from, actuator, value } });
        }

        // 7: SEA feedback.
        let params = self.config.sea.params();
        let window = self.config.sea.window;
        let lo = t.saturating_sub(window);
        let mut by_proc: BTreeMap<Address, Vec<Feedback>> = BTreeMap::new();
        for (a, fb) in feedback {
            by_proc.entry(a).or_default().push(fb);
        }
        for p in &mut self.processors {
            let a = p.address();
            let mut fbs = by_proc.remove(&a).unwrap_or_default();
            fbs.extend(p.generate_feedback(lo..=t));
            for fb in fbs {
                let g = p.sea_update(&fb, &params);
                events.push(Event {
                    tick: t,
                    kind: EventKind::FeedbackApplied {
                        addr: a,
                        verdict: fb.verdict,
                        reference: fb.reference_tick,
                        g,
                        reason: fb.reason.to_owned(),
                    },
                });
            }
            if t >= 4 * window {
                p.sea_ledger_mut().forget_before(t - 4 * window);
            }
        }

        // 8: trace.
        if opts.record && opts.max_ticks.is_none_or(|m| t < m) {
            self.trace.events.extend(events.iter().cloned());
        }
        report.events = events;
        self.now += 1;
        Ok(report)
    }

    /// Ticks until `until` (exclusive) and returns the recorded trace.
    pub fn run(&mut self, until: u64) -> Result<&Trace> {
        if until > self.config.lifetime {
            return Err(Error::PastLifetime { tick: until, lifetime: self.config.lifetime });
        }
        while self.now < until {
            self.tick()?;
        }
        Ok(&self.trace)
    }

    /// STM mood and intensity at `tick`, labelled by the sign of the mood.
    pub fn mood_reading(&self, tick: u64) -> Result<MoodReading> {
        let h = u64::from(self.height());
        if tick < h {
            return Err(Error::NoConsciousContent { tick, height: self.height() });
        }
        let &(mood, intensity) = self
            .stm_log
            .get(tick as usize)
            .ok_or(Error::TickMismatch { expected: self.now, got: tick })?;
        let label = if mood > 0.0 {
            MoodLabel::Optimistic
        } else if mood < 0.0 {
            MoodLabel::Pessimistic
        } else {
            MoodLabel::Neutral
        };
        Ok(MoodReading { tick, mood, intensity, label })
    }

    /// Compares each STM chunk from tick h on with the sums of the
    /// submissions made h ticks earlier.
    pub fn check_aggregation(&self) -> AggregationCheck {
        let h = self.height() as usize;
        let mut check = AggregationCheck::default();
        for (t, &(mood, intensity)) in self.stm_log.iter().enumerate().skip(h) {
            let (sw, sa) = self.submission_sums[t - h];
            let scale = sa.max(1.0);
            check.ticks_checked += 1;
            check.max_mood_error = check.max_mood_error.max((mood - sw).abs() / scale);
            check.max_intensity_error = check.max_intensity_error.max((intensity - sa).abs() / scale);
        }
        check
    }
}
