use thiserror::Error;

use crate::chunk::Address;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("weight must be finite, got {0}")]
    NonFiniteWeight(f64),
    #[error("coin-flip inputs must be finite and non-negative, got ({0}, {1})")]
    InvalidCoinInput(f64, f64),
    #[error("gist serializes to {size} bytes, limit is {limit}")]
    GistTooLarge { size: usize, limit: usize },
    #[error("the nil tag cannot be combined with other tags or a payload")]
    MalformedNilGist,
    #[error("children were submitted at different ticks ({0} vs {1})")]
    MismatchedTicks(u64, u64),
    #[error("winner is not one of the supplied children")]
    WinnerNotAChild,
    #[error("a competition needs at least one child")]
    NoChildren,
    #[error("arity must be at least 2, got {0}")]
    ArityTooSmall(usize),
    #[error("need at least one processor")]
    NoProcessors,
    #[error("leaf count {0} exceeds the limit for this operation ({1})")]
    TooManyLeaves(usize, usize),
    #[error("submission tick {got} does not match tree tick {expected}")]
    TickMismatch { expected: u64, got: u64 },
    #[error("processor {0} submitted more than once")]
    DuplicateSubmission(Address),
    #[error("processor {0} did not submit")]
    MissingSubmission(Address),
    #[error("address {0} is outside the tree (N = {1})")]
    AddressOutOfRange(Address, usize),
    #[error("level-0 slot for tick {0} is already occupied")]
    SlotOccupied(u64),
    #[error("no formed link between {0} and {1}")]
    NoLink(Address, Address),
    #[error("a processor cannot link to itself ({0})")]
    SelfLink(Address),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("tick {tick} is past the lifetime T = {lifetime}")]
    PastLifetime { tick: u64, lifetime: u64 },
    #[error("tick {tick} has no conscious content yet (h = {height})")]
    NoConsciousContent { tick: u64, height: u32 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}
