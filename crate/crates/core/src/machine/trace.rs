//! The event trace and its line-oriented text form.

use std::fmt;
use std::ops::RangeInclusive;

use crate::chunk::{Address, Chunk, Gist};
use crate::error::{Error, Result};
use crate::processors::Verdict;
use crate::record::{fmt_real, parse_real, parse_uint, Record};

pub const TRACE_SCHEMA_VERSION: u32 = 1;
const MAGIC: &str = "# ctm-trace ";

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    InputDelivery { sensor: String, to: Address, value: f64 },
    Broadcast { chunk: Chunk },
    LinkSend { from: Address, to: Address, chunk: Chunk },
    LinkFormed { a: Address, b: Address },
    Submission { chunk: Chunk },
    NodeWin { level: u32, node: usize, start: u64, winner: Address },
    StmInstall { chunk: Chunk },
    ActuatorCommand { from: Address, actuator: String, value: f64 },
    FeedbackApplied { addr: Address, verdict: Verdict, reference: u64, g: f64, reason: String },
}

pub const EVENT_KINDS: [&str; 9] = [
    "InputDelivery",
    "Broadcast",
    "LinkSend",
    "LinkFormed",
    "Submission",
    "NodeWin",
    "StmInstall",
    "ActuatorCommand",
    "FeedbackApplied",
];

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::InputDelivery { .. } => "InputDelivery",
            EventKind::Broadcast { .. } => "Broadcast",
            EventKind::LinkSend { .. } => "LinkSend",
            EventKind::LinkFormed { .. } => "LinkFormed",
            EventKind::Submission { .. } => "Submission",
            EventKind::NodeWin { .. } => "NodeWin",
            EventKind::StmInstall { .. } => "StmInstall",
            EventKind::ActuatorCommand { .. } => "ActuatorCommand",
            EventKind::FeedbackApplied { .. } => "FeedbackApplied",
        }
    }

    /// Tick phase the event belongs to.
    pub fn phase(&self) -> u8 {
        match self {
            EventKind::InputDelivery { .. } => 1,
            EventKind::Broadcast { .. } => 2,
            EventKind::LinkSend { .. } | EventKind::LinkFormed { .. } => 3,
            EventKind::Submission { .. } | EventKind::NodeWin { .. } => 4,
            EventKind::StmInstall { .. } => 5,
            EventKind::ActuatorCommand { .. } => 6,
            EventKind::FeedbackApplied { .. } => 7,
        }
    }

    /// Processor addresses the event concerns.
    pub fn addresses(&self) -> Vec<Address> {
        match self {
            EventKind::InputDelivery { to, .. } => vec![*to],
            EventKind::Broadcast { chunk } | EventKind::Submission { chunk } | EventKind::StmInstall { chunk } => {
                vec![chunk.address()]
            }
            EventKind::LinkSend { from, to, .. } => vec![*from, *to],
            EventKind::LinkFormed { a, b } => vec![*a, *b],
            EventKind::NodeWin { winner, .. } => vec![*winner],
            EventKind::ActuatorCommand { from, .. } => vec![*from],
            EventKind::FeedbackApplied { addr, .. } => vec![*addr],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub tick: u64,
    pub kind: EventKind,
}

impl Event {
    pub fn phase(&self) -> u8 {
        self.kind.phase()
    }

    pub fn to_record(&self) -> Record {
        let mut r = Record::new();
        r.push("tick", self.tick.to_string())
            .push("phase", self.phase().to_string())
            .push("kind", self.kind.name());
        match &self.kind {
            EventKind::InputDelivery { sensor, to, value } => {
                r.push("sensor", sensor.clone()).push("to", to.to_string()).push("value", fmt_real(*value));
            }
            EventKind::Broadcast { chunk } | EventKind::Submission { chunk } | EventKind::StmInstall { chunk } => {
                chunk.write_fields(&mut r);
            }
            EventKind::LinkSend { from, to, chunk } => {
                r.push("from", from.to_string()).push("to", to.to_string());
                chunk.write_fields(&mut r);
            }
            EventKind::LinkFormed { a, b } => {
                r.push("a", a.to_string()).push("b", b.to_string());
            }
            EventKind::NodeWin { level, node, start, winner } => {
                r.push("level", level.to_string())
                    .push("node", node.to_string())
                    .push("start", start.to_string())
                    .push("winner", winner.to_string());
            }
            EventKind::ActuatorCommand { from, actuator, value } => {
                r.push("from", from.to_string()).push("actuator", actuator.clone()).push("value", fmt_real(*value));
            }
            EventKind::FeedbackApplied { addr, verdict, reference, g, reason } => {
                r.push("addr", addr.to_string())
                    .push("verdict", verdict.to_string())
                    .push("reference", reference.to_string())
                    .push("g", fmt_real(*g))
                    .push("reason", reason.clone());
            }
        }
        r
    }

    /// Parses one event line. Field order must be canonical.
    pub fn parse_line(text: &str, line: usize) -> Result<Self> {
        let r = Record::parse(text, line)?;
        let tick = parse_uint(r.require("tick", line)?, line, "tick")?;
        let phase = parse_uint(r.require("phase", line)?, line, "phase")?;
        let kind_name = r.require("kind", line)?;
        let addr = |key: &str| -> Result<Address> {
            let v = parse_uint(r.require(key, line)?, line, key)?;
            usize::try_from(v).map_err(|_| Error::parse(line, format!("field {key}: too large")))
        };
        let name = |key: &str| -> Result<String> {
            let v = r.require(key, line)?;
            if v.is_empty() || !v.chars().all(|c| c.is_ascii_alphanumeric() || "_.:-".contains(c)) {
                return Err(Error::parse(line, format!("field {key}: bad name {v:?}")));
            }
            Ok(v.to_owned())
        };
        let kind = match kind_name {
            "InputDelivery" => EventKind::InputDelivery {
                sensor: name("sensor")?,
                to: addr("to")?,
                value: parse_real(r.require("value", line)?, line, "value")?,
            },
            "Broadcast" => EventKind::Broadcast { chunk: Chunk::read_fields(&r, line)? },
            "Submission" => EventKind::Submission { chunk: Chunk::read_fields(&r, line)? },
            "StmInstall" => EventKind::StmInstall { chunk: Chunk::read_fields(&r, line)? },
            "LinkSend" => EventKind::LinkSend { from: addr("from")?, to: addr("to")?, chunk: Chunk::read_fields(&r, line)? },
            "LinkFormed" => EventKind::LinkFormed { a: addr("a")?, b: addr("b")? },
            "NodeWin" => EventKind::NodeWin {
                level: u32::try_from(parse_uint(r.require("level", line)?, line, "level")?)
                    .map_err(|_| Error::parse(line, "field level: too large"))?,
                node: addr("node")?,
                start: parse_uint(r.require("start", line)?, line, "start")?,
                winner: addr("winner")?,
            },
            "ActuatorCommand" => EventKind::ActuatorCommand {
                from: addr("from")?,
                actuator: name("actuator")?,
                value: parse_real(r.require("value", line)?, line, "value")?,
            },
            "FeedbackApplied" => EventKind::FeedbackApplied {
                addr: addr("addr")?,
                verdict: match r.require("verdict", line)? {
                    "Embolden" => Verdict::Embolden,
                    "Hush" => Verdict::Hush,
                    v => return Err(Error::parse(line, format!("field verdict: unknown {v:?}"))),
                },
                reference: parse_uint(r.require("reference", line)?, line, "reference")?,
                g: parse_real(r.require("g", line)?, line, "g")?,
                reason: name("reason")?,
            },
            other => return Err(Error::parse(line, format!("unknown event kind {other:?}"))),
        };
        let event = Event { tick, kind };
        if u64::from(event.phase()) != phase {
            return Err(Error::parse(line, format!("{kind_name} belongs to phase {}, not {phase}", event.phase())));
        }
        if event.to_record().render() != text {
            return Err(Error::parse(line, "fields are not in canonical form"));
        }
        Ok(event)
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_record().render())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceHeader {
    pub schema_version: u32,
    pub height: u32,
    pub n_processors: usize,
    pub seed: u64,
}

impl TraceHeader {
    fn render(&self) -> String {
        format!(
            "{MAGIC}schema_version={} height={} n_processors={} seed={}",
            self.schema_version, self.height, self.n_processors, self.seed
        )
    }

    fn parse(text: &str) -> Result<Self> {
        let rest = text
            .strip_prefix(MAGIC)
            .ok_or_else(|| Error::parse(1, "missing ctm-trace header"))?;
        let r = Record::parse(rest, 1)?;
        let version = parse_uint(r.require("schema_version", 1)?, 1, "schema_version")?;
        if version != u64::from(TRACE_SCHEMA_VERSION) {
            return Err(Error::parse(1, format!("unsupported schema_version {version}")));
        }
        let header = Self {
            schema_version: TRACE_SCHEMA_VERSION,
            height: u32::try_from(parse_uint(r.require("height", 1)?, 1, "height")?)
                .map_err(|_| Error::parse(1, "field height: too large"))?,
            n_processors: usize::try_from(parse_uint(r.require("n_processors", 1)?, 1, "n_processors")?)
                .map_err(|_| Error::parse(1, "field n_processors: too large"))?,
            seed: parse_uint(r.require("seed", 1)?, 1, "seed")?,
        };
        if header.render() != text {
            return Err(Error::parse(1, "header is not in canonical form"));
        }
        Ok(header)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub events: Vec<Event>,
}

impl Trace {
    pub fn new(header: TraceHeader) -> Self {
        Self { header, events: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn render(&self) -> String {
        let mut out = self.header.render();
        out.push('\n');
        for e in &self.events {
            out.push_str(&e.to_record().render());
            out.push('\n');
        }
        out
    }

    /// Parses a trace file. Events must be ordered by (tick, phase).
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = TraceHeader::parse(lines.next().ok_or_else(|| Error::parse(1, "empty file"))?)?;
        let mut trace = Trace::new(header);
        let mut last = (0u64, 0u8);
        for (i, line) in lines.enumerate() {
            let n = i + 2;
            let e = Event::parse_line(line, n)?;
            let key = (e.tick, e.phase());
            if key < last {
                return Err(Error::parse(n, "event out of (tick, phase) order"));
            }
            last = key;
            trace.events.push(e);
        }
        Ok(trace)
    }

    pub fn filtered<'a>(&'a self, filter: &'a TraceFilter) -> impl Iterator<Item = &'a Event> + 'a {
        self.events.iter().filter(move |e| filter.matches(e))
    }
}

/// Broadcast gists in delivery order.
pub fn stream_of_consciousness(trace: &Trace) -> Vec<(u64, Gist)> {
    trace
        .events
        .iter()
        .filter_map(|e| match &e.kind {
            EventKind::Broadcast { chunk } => Some((e.tick, chunk.gist().clone())),
            _ => None,
        })
        .collect()
}

/// Selects events by kind, phase, tick range and address. Built from
/// `key=value` terms: `kind=LinkFormed`, `phase=2`, `tick=5`, `tick=5..9`
/// (end exclusive), `tick=5..=9`, `addr=3`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceFilter {
    pub kind: Option<String>,
    pub phase: Option<u8>,
    pub ticks: Option<RangeInclusive<u64>>,
    pub addr: Option<Address>,
}

impl TraceFilter {
    pub fn parse_terms<S: AsRef<str>>(terms: &[S]) -> Result<Self> {
        let mut f = TraceFilter::default();
        for term in terms {
            let term = term.as_ref();
            let bad = |msg: String| Error::Config(format!("filter {term:?}: {msg}"));
            let (k, v) = term.split_once('=').ok_or_else(|| bad("expected key=value".into()))?;
            match k {
                "kind" => {
                    if !EVENT_KINDS.contains(&v) {
                        return Err(bad(format!("unknown kind; expected one of {}", EVENT_KINDS.join(", "))));
                    }
                    f.kind = Some(v.to_owned());
                }
                "phase" => f.phase = Some(v.parse().map_err(|_| bad("not a phase number".into()))?),
                "addr" => f.addr = Some(v.parse().map_err(|_| bad("not an address".into()))?),
                "tick" => {
                    let num = |s: &str| s.parse::<u64>().map_err(|_| bad(format!("not a tick: {s:?}")));
                    let range = if let Some((a, b)) = v.split_once("..=") {
                        num(a)?..=num(b)?
                    } else if let Some((a, b)) = v.split_once("..") {
                        let (a, b) = (num(a)?, num(b)?);
                        if b == 0 {
                            return Err(bad("empty range".into()));
                        }
                        a..=b - 1
                    } else {
                        let t = num(v)?;
                        t..=t
                    };
                    f.ticks = Some(range);
                }
                _ => return Err(bad("unknown key; expected kind, phase, tick or addr".into())),
            }
        }
        Ok(f)
    }

    pub fn matches(&self, e: &Event) -> bool {
        self.kind.as_deref().is_none_or(|k| k == e.kind.name())
            && self.phase.is_none_or(|p| p == e.phase())
            && self.ticks.as_ref().is_none_or(|r| r.contains(&e.tick))
            && self.addr.is_none_or(|a| e.kind.addresses().contains(&a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunk::{make_chunk, Modality};

    fn header() -> TraceHeader {
        TraceHeader { schema_version: 1, height: 2, n_processors: 4, seed: 7 }
    }

    fn sample() -> Trace {
        let c = make_chunk(2, 0, Gist::new([Modality::Speech], "hello world").unwrap(), -3.5).unwrap();
        let mut t = Trace::new(header());
        t.events = vec![
            Event { tick: 0, kind: EventKind::InputDelivery { sensor: "light".into(), to: 1, value: 0.25 } },
            Event { tick: 0, kind: EventKind::Submission { chunk: c.clone() } },
            Event { tick: 1, kind: EventKind::NodeWin { level: 1, node: 1, start: 0, winner: 2 } },
            Event { tick: 2, kind: EventKind::StmInstall { chunk: c.clone() } },
            Event { tick: 3, kind: EventKind::Broadcast { chunk: c.clone() } },
            Event { tick: 3, kind: EventKind::LinkSend { from: 2, to: 0, chunk: c } },
            Event { tick: 3, kind: EventKind::LinkFormed { a: 0, b: 2 } },
            Event { tick: 3, kind: EventKind::ActuatorCommand { from: 1, actuator: "legs".into(), value: 1.0 } },
            Event {
                tick: 3,
                kind: EventKind::FeedbackApplied {
                    addr: 0,
                    verdict: Verdict::Hush,
                    reference: 1,
                    g: 0.5,
                    reason: "hushed_by_broadcast".into(),
                },
            },
        ];
        t
    }

    #[test]
    fn round_trip() {
        let t = sample();
        let text = t.render();
        assert!(text.starts_with("# ctm-trace schema_version=1 height=2 n_processors=4 seed=7\n"));
        assert_eq!(Trace::parse(&text).unwrap(), t);
        assert_eq!(Trace::parse(&text).unwrap().render(), text);
    }

    #[test]
    fn broadcast_line_format() {
        let t = sample();
        let line = t.events[4].to_string();
        assert_eq!(
            line,
            "tick=3 phase=2 kind=Broadcast addr=2 t=0 w=-3.500000000 i=3.500000000 m=-3.500000000 \
             gist=speech;-;hello%20world"
        );
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let mut text = sample().render();
        text.push_str("tick=9 phase=2 kind=Nope\n");
        match Trace::parse(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 11),
            other => panic!("{other:?}"),
        }
        let bad = "# ctm-trace schema_version=1 height=2 n_processors=4 seed=7\ntick=1 phase=1 kind=Broadcast\n";
        assert!(matches!(Trace::parse(bad), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(Trace::parse("garbage\n"), Err(Error::Parse { line: 1, .. })));
        let wrong_version = "# ctm-trace schema_version=9 height=2 n_processors=4 seed=7\n";
        assert!(Trace::parse(wrong_version).is_err());
    }

    #[test]
    fn out_of_order_rejected() {
        let mut t = sample();
        t.events.swap(0, 3);
        assert!(Trace::parse(&t.render()).is_err());
    }

    #[test]
    fn non_canonical_rejected() {
        let text = sample().render().replace("value=0.250000000", "value=0.25");
        assert!(Trace::parse(&text).is_err());
    }

    #[test]
    fn filters() {
        let t = sample();
        let f = TraceFilter::parse_terms(&["kind=LinkFormed"]).unwrap();
        assert_eq!(t.filtered(&f).count(), 1);
        let f = TraceFilter::parse_terms(&["tick=0..3"]).unwrap();
        assert_eq!(t.filtered(&f).count(), 4);
        let f = TraceFilter::parse_terms(&["tick=3..=3", "addr=0"]).unwrap();
        assert_eq!(t.filtered(&f).count(), 3);
        assert!(TraceFilter::parse_terms(&["kind=Bogus"]).is_err());
        assert!(TraceFilter::parse_terms(&["color=red"]).is_err());
        assert!(TraceFilter::parse_terms(&["tick"]).is_err());
    }

    #[test]
    fn stream_projection() {
        let s = stream_of_consciousness(&sample());
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].0, 3);
        assert!(stream_of_consciousness(&Trace::new(header())).is_empty());
    }
}
