//! Chunks and gists, the unit of information on every edge of the machine.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::{fmt_real, parse_real, parse_uint, Record};

/// Processor identifier.
pub type Address = usize;

/// Largest canonical-text size of a gist, in bytes.
pub const GIST_MAX_BYTES: usize = 128;

/// Submitted weights are clamped to this magnitude.
pub const WEIGHT_LIMIT: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Speech,
    Vision,
    Tactile,
    Query,
    Answer,
    Command,
    Nil,
}

impl Modality {
    pub const ALL: [Modality; 7] = [
        Modality::Speech,
        Modality::Vision,
        Modality::Tactile,
        Modality::Query,
        Modality::Answer,
        Modality::Command,
        Modality::Nil,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Modality::Speech => "speech",
            Modality::Vision => "vision",
            Modality::Tactile => "tactile",
            Modality::Query => "query",
            Modality::Answer => "answer",
            Modality::Command => "command",
            Modality::Nil => "nil",
        }
    }

    fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.label() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Salience {
    Surprising,
    Terrible,
    Wonderful,
}

impl Salience {
    pub const ALL: [Salience; 3] = [Salience::Surprising, Salience::Terrible, Salience::Wonderful];

    pub fn label(self) -> &'static str {
        match self {
            Salience::Surprising => "surprising",
            Salience::Terrible => "terrible",
            Salience::Wonderful => "wonderful",
        }
    }

    fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.label() == s)
    }
}

/// A bounded symbolic payload: modality tags, a short text and salience
/// flags. Canonical text is `tags;flags;payload` with `-` for an empty set
/// and the payload percent-encoded.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Gist {
    tags: BTreeSet<Modality>,
    payload: String,
    flags: BTreeSet<Salience>,
}

impl Gist {
    pub fn nil() -> Self {
        Self {
            tags: BTreeSet::from([Modality::Nil]),
            payload: String::new(),
            flags: BTreeSet::new(),
        }
    }

    pub fn new(tags: impl IntoIterator<Item = Modality>, payload: impl Into<String>) -> Result<Self> {
        Self::with_flags(tags, payload, [])
    }

    pub fn with_flags(
        tags: impl IntoIterator<Item = Modality>,
        payload: impl Into<String>,
        flags: impl IntoIterator<Item = Salience>,
    ) -> Result<Self> {
        let gist = Self {
            tags: tags.into_iter().collect(),
            payload: payload.into(),
            flags: flags.into_iter().collect(),
        };
        gist.validate()?;
        Ok(gist)
    }

    fn validate(&self) -> Result<()> {
        if self.tags.contains(&Modality::Nil)
            && (self.tags.len() > 1 || !self.payload.is_empty() || !self.flags.is_empty())
        {
            return Err(Error::MalformedNilGist);
        }
        let size = self.encoded_len();
        if size > GIST_MAX_BYTES {
            return Err(Error::GistTooLarge { size, limit: GIST_MAX_BYTES });
        }
        Ok(())
    }

    pub fn is_nil(&self) -> bool {
        self.tags.contains(&Modality::Nil)
    }

    pub fn tags(&self) -> &BTreeSet<Modality> {
        &self.tags
    }

    pub fn has_tag(&self, tag: Modality) -> bool {
        self.tags.contains(&tag)
    }

    pub fn payload(&self) -> &str {
        &self.payload
    }

    pub fn flags(&self) -> &BTreeSet<Salience> {
        &self.flags
    }

    pub fn is_salient(&self) -> bool {
        !self.flags.is_empty()
    }

    /// Size of the canonical text form in bytes.
    pub fn encoded_len(&self) -> usize {
        self.to_text().len()
    }

    pub fn to_text(&self) -> String {
        let tags = join_labels(self.tags.iter().map(|t| t.label()));
        let flags = join_labels(self.flags.iter().map(|f| f.label()));
        format!("{tags};{flags};{}", escape(&self.payload))
    }

    pub fn parse_text(s: &str) -> std::result::Result<Self, String> {
        let mut parts = s.splitn(3, ';');
        let (Some(tags), Some(flags), Some(payload)) = (parts.next(), parts.next(), parts.next())
        else {
            return Err(format!("gist needs three ';'-separated parts: {s:?}"));
        };
        let tags = split_labels(tags, Modality::from_label, "modality")?;
        let flags = split_labels(flags, Salience::from_label, "salience flag")?;
        let payload = unescape(payload)?;
        let gist = Gist { tags, payload, flags };
        gist.validate().map_err(|e| e.to_string())?;
        if gist.to_text() != s {
            return Err(format!("gist is not in canonical form: {s:?}"));
        }
        Ok(gist)
    }
}

impl Default for Gist {
    fn default() -> Self {
        Self::nil()
    }
}

impl fmt::Display for Gist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn join_labels<'a>(labels: impl Iterator<Item = &'a str>) -> String {
    let joined: Vec<_> = labels.collect();
    if joined.is_empty() {
        "-".to_owned()
    } else {
        joined.join(",")
    }
}

fn split_labels<T: Ord>(
    s: &str,
    parse: impl Fn(&str) -> Option<T>,
    what: &str,
) -> std::result::Result<BTreeSet<T>, String> {
    if s == "-" {
        return Ok(BTreeSet::new());
    }
    s.split(',')
        .map(|l| parse(l).ok_or_else(|| format!("unknown {what} {l:?}")))
        .collect()
}

fn is_plain(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b"-_.:!?'()+*@#/<>".contains(&b)
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        if is_plain(b) {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

fn unescape(s: &str) -> std::result::Result<String, String> {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if b == b'%' {
            let hex = s
                .get(i + 1..i + 3)
                .ok_or_else(|| "truncated %-escape in payload".to_owned())?;
            let v = u8::from_str_radix(hex, 16).map_err(|_| format!("bad %-escape {hex:?}"))?;
            out.push(v);
            i += 3;
        } else if is_plain(b) {
            out.push(b);
            i += 1;
        } else {
            return Err(format!("unescaped byte {b:#04x} in payload"));
        }
    }
    String::from_utf8(out).map_err(|_| "payload is not UTF-8".to_owned())
}

/// Anything a competition function can be evaluated on.
pub trait Competitor {
    fn weight(&self) -> f64;
    fn intensity(&self) -> f64;
    fn mood(&self) -> f64;
}

/// The 6-tuple ⟨address, t, gist, weight, intensity, mood⟩.
#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    address: Address,
    t: u64,
    gist: Gist,
    weight: f64,
    intensity: f64,
    mood: f64,
}

/// A level-0 chunk: intensity = |weight|, mood = weight. Weight magnitude
/// is clamped to [`WEIGHT_LIMIT`].
pub fn make_chunk(address: Address, t: u64, gist: Gist, weight: f64) -> Result<Chunk> {
    if !weight.is_finite() {
        return Err(Error::NonFiniteWeight(weight));
    }
    let weight = weight.clamp(-WEIGHT_LIMIT, WEIGHT_LIMIT);
    Ok(Chunk { address, t, gist, weight, intensity: weight.abs(), mood: weight })
}

/// The chunk that moves into a node: the winner's address, tick, gist and
/// weight, with intensity and mood summed over all children.
pub fn combine_children(winner: usize, children: &[Chunk]) -> Result<Chunk> {
    let first = children.first().ok_or(Error::NoChildren)?;
    if let Some(c) = children.iter().find(|c| c.t != first.t) {
        return Err(Error::MismatchedTicks(first.t, c.t));
    }
    let w = children.get(winner).ok_or(Error::WinnerNotAChild)?;
    Ok(Chunk {
        intensity: children.iter().map(|c| c.intensity).sum(),
        mood: children.iter().map(|c| c.mood).sum(),
        ..w.clone()
    })
}

impl Chunk {
    /// A zero-weight NIL chunk, as submitted by idle and padding processors.
    pub fn null(address: Address, t: u64) -> Self {
        Chunk { address, t, gist: Gist::nil(), weight: 0.0, intensity: 0.0, mood: 0.0 }
    }

    pub fn address(&self) -> Address {
        self.address
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn gist(&self) -> &Gist {
        &self.gist
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn mood(&self) -> f64 {
        self.mood
    }

    /// Same chunk with aggregated intensity and mood replaced. Used when
    /// materializing a tree node's contents.
    pub(crate) fn with_aggregates(&self, intensity: f64, mood: f64) -> Chunk {
        Chunk { intensity, mood, ..self.clone() }
    }

    pub(crate) fn write_fields(&self, rec: &mut Record) {
        rec.push("addr", self.address.to_string())
            .push("t", self.t.to_string())
            .push("w", fmt_real(self.weight))
            .push("i", fmt_real(self.intensity))
            .push("m", fmt_real(self.mood))
            .push("gist", self.gist.to_text());
    }

    pub(crate) fn read_fields(rec: &Record, line: usize) -> Result<Self> {
        let address = parse_uint(rec.require("addr", line)?, line, "addr")? as Address;
        let t = parse_uint(rec.require("t", line)?, line, "t")?;
        let weight = parse_real(rec.require("w", line)?, line, "w")?;
        let intensity = parse_real(rec.require("i", line)?, line, "i")?;
        let mood = parse_real(rec.require("m", line)?, line, "m")?;
        let gist = Gist::parse_text(rec.require("gist", line)?).map_err(|m| Error::parse(line, m))?;
        if intensity < 0.0 {
            return Err(Error::parse(line, "negative intensity"));
        }
        if weight.abs() > WEIGHT_LIMIT {
            return Err(Error::parse(line, "weight exceeds clamp"));
        }
        Ok(Chunk { address, t, gist, weight, intensity, mood })
    }

    /// Canonical text: `addr=.. t=.. w=.. i=.. m=.. gist=..`, reals with
    /// nine fractional digits.
    pub fn to_text(&self) -> String {
        let mut rec = Record::new();
        self.write_fields(&mut rec);
        rec.render()
    }

    pub fn parse_text(s: &str) -> Result<Self> {
        let rec = Record::parse(s, 1)?;
        if rec.fields().len() != 6 {
            return Err(Error::parse(1, "chunk has exactly six fields"));
        }
        Self::read_fields(&rec, 1)
    }
}

impl Competitor for Chunk {
    fn weight(&self) -> f64 {
        Chunk::weight(self)
    }
    fn intensity(&self) -> f64 {
        Chunk::intensity(self)
    }
    fn mood(&self) -> f64 {
        Chunk::mood(self)
    }
}
