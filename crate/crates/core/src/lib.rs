//! A deterministic, seed-reproducible simulator of the Conscious Turing
//! Machine: chunks, the Up-Tree competition for short-term memory, global
//! broadcast, processor links and Sleeping Experts learning, together with
//! an exact win-probability oracle and scripted consciousness scenarios.

pub mod chunk;
pub mod competition;
pub mod error;
pub mod machine;
pub mod processors;
pub mod record;
pub mod rng;
pub mod scenarios;
pub mod uptree;

pub use chunk::{combine_children, make_chunk, Address, Chunk, Competitor, Gist, Modality, Salience};
pub use competition::{coin_flip, eval_f, Choice, CompetitionFunctionSpec};
pub use error::{Error, Result};
pub use machine::{new_ctm, Ctm, CtmConfig, Event, EventKind, Trace, TraceFilter};
pub use rng::SimRng;
pub use scenarios::{run_config, run_scenario, ScenarioResult, SCENARIOS};
pub use uptree::{build_uptree, Mode, UpTree};
