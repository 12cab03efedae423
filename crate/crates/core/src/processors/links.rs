use serde::{Deserialize, Serialize};

use crate::chunk::Address;

/// One side of a (possibly unformed) link, as seen by its owner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkState {
    pub peer: Address,
    pub usefulness_count: u32,
    pub strength: u32,
    pub formed: bool,
}

impl LinkState {
    pub fn new(peer: Address) -> Self {
        Self { peer, usefulness_count: 0, strength: 0, formed: false }
    }
}

/// What an acknowledgement did to the link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AckOutcome {
    Counted,
    Formed,
    Strengthened(u32),
}
