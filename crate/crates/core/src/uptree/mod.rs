//! The Up-Tree: a k-ary tournament that runs one local match per internal
//! node per tick, pipelined so a new competition can start every tick.
//!
//! A competition started at tick `t` sits at level 0 during tick `t`, is at
//! level `s` after the advance of tick `t + s`, and its winner leaves the
//! root during the advance of tick `t + h`.

mod latency;
mod oracle;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use latency::{latency, LatencyReport};
pub use oracle::{
    exact_win_probabilities, monte_carlo_win_frequencies, WinProbabilityVector, ORACLE_MAX_LEAVES,
};

use crate::chunk::{Address, Chunk, Competitor};
use crate::competition::{argmax_leftmost, weighted_index, CompetitionFunctionSpec};
use crate::error::{Error, Result};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Probabilistic,
    /// Local winner is the child with the largest f-value; ties go to the
    /// leftmost child.
    Deterministic,
}

/// Shape of a padded k-ary tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub arity: usize,
    pub height: u32,
    pub leaf_count: usize,
}

impl Shape {
    /// Smallest tree of the given arity with at least `n` leaves and height
    /// at least 1.
    pub fn for_processors(n: usize, arity: usize) -> Result<Self> {
        if arity < 2 {
            return Err(Error::ArityTooSmall(arity));
        }
        if n == 0 {
            return Err(Error::NoProcessors);
        }
        let mut leaf_count = arity;
        let mut height = 1;
        while leaf_count < n {
            leaf_count = leaf_count
                .checked_mul(arity)
                .ok_or_else(|| Error::Config(format!("{n} processors overflow the tree")))?;
            height += 1;
        }
        Ok(Self { arity, height, leaf_count })
    }
}

/// A node's contents: which leaf's chunk it carries, plus the subtree sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Entry {
    pub leaf: usize,
    pub intensity: f64,
    pub mood: f64,
}

struct EntryView {
    weight: f64,
    intensity: f64,
    mood: f64,
}

impl Competitor for EntryView {
    fn weight(&self) -> f64 {
        self.weight
    }
    fn intensity(&self) -> f64 {
        self.intensity
    }
    fn mood(&self) -> f64 {
        self.mood
    }
}

/// One local match result, reported for tracing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeWin {
    pub tick: u64,
    pub level: u32,
    pub node: usize,
    pub start: u64,
    pub winner: Address,
}

/// Runs the local matches for one level, in place: node `j` is written to
/// `buf[j]` from children `buf[j*k .. j*k+k]`, left to right.
#[allow(clippy::too_many_arguments)]
pub(crate) fn compete_level(
    buf: &mut Vec<Entry>,
    weights: &[f64],
    f: &CompetitionFunctionSpec,
    mode: Mode,
    arity: usize,
    rng: &mut SimRng,
    scratch: &mut Vec<f64>,
    mut on_win: impl FnMut(usize, usize),
) {
    let parents = buf.len() / arity;
    for j in 0..parents {
        let kids = &buf[j * arity..(j + 1) * arity];
        scratch.clear();
        scratch.extend(kids.iter().map(|e| {
            f.eval(&EntryView { weight: weights[e.leaf], intensity: e.intensity, mood: e.mood })
        }));
        let pick = match mode {
            Mode::Probabilistic => weighted_index(scratch, rng),
            Mode::Deterministic => argmax_leftmost(scratch),
        };
        let node = Entry {
            leaf: kids[pick].leaf,
            intensity: kids.iter().map(|e| e.intensity).sum(),
            mood: kids.iter().map(|e| e.mood).sum(),
        };
        on_win(j, node.leaf);
        buf[j] = node;
    }
    buf.truncate(parents);
}

fn entries_of(chunks: &[Chunk]) -> (Vec<Entry>, Vec<f64>) {
    let entries = chunks
        .iter()
        .enumerate()
        .map(|(leaf, c)| Entry { leaf, intensity: c.intensity(), mood: c.mood() })
        .collect();
    (entries, chunks.iter().map(|c| c.weight()).collect())
}

/// Runs a whole competition at once over padded leaves and returns the
/// winning leaf index. Uses the same local-match code as [`UpTree::advance`].
pub(crate) fn compete_once(
    leaves: &[Chunk],
    f: &CompetitionFunctionSpec,
    mode: Mode,
    arity: usize,
    rng: &mut SimRng,
) -> usize {
    let (mut buf, weights) = entries_of(leaves);
    let mut scratch = Vec::with_capacity(arity);
    while buf.len() > 1 {
        compete_level(&mut buf, &weights, f, mode, arity, rng, &mut scratch, |_, _| {});
    }
    buf[0].leaf
}

/// Pads `chunks` (indexed by address) with null chunks up to the tree size.
pub(crate) fn pad_leaves(chunks: &[Chunk], shape: &Shape) -> Vec<Chunk> {
    let t = chunks.first().map_or(0, |c| c.t());
    let mut leaves = chunks.to_vec();
    leaves.extend((chunks.len()..shape.leaf_count).map(|a| Chunk::null(a, t)));
    leaves
}

#[derive(Debug, Clone)]
pub struct UpTree {
    shape: Shape,
    n_real: usize,
    f: CompetitionFunctionSpec,
    mode: Mode,
    now: u64,
    /// Level-0 chunks of competitions still in flight, by start tick.
    leaves: BTreeMap<u64, Vec<Chunk>>,
    /// `levels[s]` holds the node entries at level `s`, by start tick.
    levels: Vec<BTreeMap<u64, Vec<Entry>>>,
}

pub fn build_uptree(
    n_processors: usize,
    arity: usize,
    f_spec: CompetitionFunctionSpec,
    mode: Mode,
) -> Result<UpTree> {
    f_spec.validate()?;
    let shape = Shape::for_processors(n_processors, arity)?;
    Ok(UpTree {
        shape,
        n_real: n_processors,
        f: f_spec,
        mode,
        now: 0,
        leaves: BTreeMap::new(),
        levels: vec![BTreeMap::new(); shape.height as usize + 1],
    })
}

impl UpTree {
    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn height(&self) -> u32 {
        self.shape.height
    }

    pub fn arity(&self) -> usize {
        self.shape.arity
    }

    pub fn leaf_count(&self) -> usize {
        self.shape.leaf_count
    }

    /// Number of padding leaves owned by null processors.
    pub fn null_leaves(&self) -> usize {
        self.shape.leaf_count - self.n_real
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn f_spec(&self) -> CompetitionFunctionSpec {
        self.f
    }

    /// The tick the next `advance` belongs to.
    pub fn now(&self) -> u64 {
        self.now
    }

    /// Occupied slots at `level` for the competition started at `start`.
    pub fn occupancy(&self, level: u32, start: u64) -> usize {
        self.levels
            .get(level as usize)
            .and_then(|l| l.get(&start))
            .map_or(0, Vec::len)
    }

    /// Competitions currently in flight.
    pub fn in_flight(&self) -> usize {
        self.leaves.len()
    }

    /// Fills level 0 for the competition starting at `tick`. Exactly one
    /// chunk per real processor, in any order; null leaves are filled here.
    pub fn submit_level0(&mut self, chunks: Vec<Chunk>, tick: u64) -> Result<()> {
        if tick != self.now {
            return Err(Error::TickMismatch { expected: self.now, got: tick });
        }
        if self.levels[0].contains_key(&tick) {
            return Err(Error::SlotOccupied(tick));
        }
        let mut slots: Vec<Option<Chunk>> = vec![None; self.n_real];
        for c in chunks {
            if c.t() != tick {
                return Err(Error::TickMismatch { expected: tick, got: c.t() });
            }
            let a = c.address();
            let slot = slots.get_mut(a).ok_or(Error::AddressOutOfRange(a, self.n_real))?;
            if slot.replace(c).is_some() {
                return Err(Error::DuplicateSubmission(a));
            }
        }
        let mut leaves = Vec::with_capacity(self.shape.leaf_count);
        for (a, s) in slots.into_iter().enumerate() {
            leaves.push(s.ok_or(Error::MissingSubmission(a))?);
        }
        leaves.extend((self.n_real..self.shape.leaf_count).map(|a| Chunk::null(a, tick)));
        let (entries, _) = entries_of(&leaves);
        self.levels[0].insert(tick, entries);
        self.leaves.insert(tick, leaves);
        Ok(())
    }

    /// Advances every in-flight competition by one level and returns the
    /// root winner if a competition completed this tick.
    pub fn advance(&mut self, rng: &mut SimRng) -> Option<Chunk> {
        self.advance_with(rng, |_| {})
    }

    /// As [`UpTree::advance`], reporting every local match.
    pub fn advance_with(&mut self, rng: &mut SimRng, mut on_win: impl FnMut(NodeWin)) -> Option<Chunk> {
        let now = self.now;
        let h = self.shape.height;
        let mut scratch = Vec::with_capacity(self.shape.arity);
        let mut winner = None;
        for s in 1..=h {
            let Some(start) = now.checked_sub(u64::from(s)) else { break };
            let Some(mut buf) = self.levels[s as usize - 1].remove(&start) else { continue };
            let leaves = &self.leaves[&start];
            let weights: Vec<f64> = leaves.iter().map(|c| c.weight()).collect();
            compete_level(
                &mut buf,
                &weights,
                &self.f,
                self.mode,
                self.shape.arity,
                rng,
                &mut scratch,
                |node, leaf| {
                    on_win(NodeWin { tick: now, level: s, node, start, winner: leaves[leaf].address() })
                },
            );
            if s == h {
                let root = buf[0];
                let leaves = self.leaves.remove(&start).expect("leaves in flight");
                winner = Some(leaves[root.leaf].with_aggregates(root.intensity, root.mood));
            } else {
                self.levels[s as usize].insert(start, buf);
            }
        }
        self.now += 1;
        winner
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunk::{make_chunk, Gist};

    fn chunks(ws: &[f64], t: u64) -> Vec<Chunk> {
        ws.iter()
            .enumerate()
            .map(|(a, &w)| make_chunk(a, t, Gist::nil(), w).unwrap())
            .collect()
    }

    #[test]
    fn shapes() {
        let t = build_uptree(4, 2, CompetitionFunctionSpec::INTENSITY, Mode::Probabilistic).unwrap();
        assert_eq!((t.height(), t.leaf_count()), (2, 4));
        let t = build_uptree(5, 2, CompetitionFunctionSpec::INTENSITY, Mode::Probabilistic).unwrap();
        assert_eq!((t.height(), t.leaf_count(), t.null_leaves()), (3, 8, 3));
        let t = build_uptree(10_000_000, 10, CompetitionFunctionSpec::INTENSITY, Mode::Probabilistic)
            .unwrap();
        assert_eq!(t.height(), 7);
        let t = build_uptree(1, 3, CompetitionFunctionSpec::INTENSITY, Mode::Probabilistic).unwrap();
        assert_eq!((t.height(), t.leaf_count()), (1, 3));
        assert_eq!(
            build_uptree(4, 1, CompetitionFunctionSpec::INTENSITY, Mode::Probabilistic).unwrap_err(),
            Error::ArityTooSmall(1)
        );
    }

    #[test]
    fn padding_rule_by_construction() {
        for n in 1..=40usize {
            for k in 2..=5usize {
                let s = Shape::for_processors(n, k).unwrap();
                assert_eq!(s.leaf_count, k.pow(s.height));
                assert!(s.leaf_count >= n);
                assert!(s.height == 1 || k.pow(s.height - 1) < n);
            }
        }
    }

    #[test]
    fn submit_errors() {
        let mut t = build_uptree(4, 2, CompetitionFunctionSpec::INTENSITY, Mode::Probabilistic).unwrap();
        let mut bad = chunks(&[1.0, 2.0, 3.0, 4.0], 0);
        bad[2] = make_chunk(2, 1, Gist::nil(), 3.0).unwrap();
        assert!(matches!(t.submit_level0(bad, 0), Err(Error::TickMismatch { .. })));
        let missing = chunks(&[1.0, 2.0, 3.0], 0);
        assert_eq!(t.submit_level0(missing, 0), Err(Error::MissingSubmission(3)));
        let mut dup = chunks(&[1.0, 2.0, 3.0, 4.0], 0);
        dup[3] = make_chunk(0, 0, Gist::nil(), 1.0).unwrap();
        assert_eq!(t.submit_level0(dup, 0), Err(Error::DuplicateSubmission(0)));
        t.submit_level0(chunks(&[1.0, 2.0, 3.0, 4.0], 0), 0).unwrap();
        assert_eq!(t.occupancy(0, 0), 4);
        assert_eq!(
            t.submit_level0(chunks(&[1.0, 2.0, 3.0, 4.0], 0), 0),
            Err(Error::SlotOccupied(0))
        );
    }

    #[test]
    fn winner_arrives_after_h_ticks() {
        let mut t = build_uptree(4, 2, CompetitionFunctionSpec::INTENSITY, Mode::Probabilistic).unwrap();
        let mut rng = SimRng::new(1);
        t.submit_level0(chunks(&[1.0, 2.0, 3.0, 4.0], 0), 0).unwrap();
        assert!(t.advance(&mut rng).is_none());
        assert_eq!(t.occupancy(0, 0), 4);
        assert!(t.advance(&mut rng).is_none());
        assert_eq!(t.occupancy(1, 0), 2);
        let w = t.advance(&mut rng).unwrap();
        assert_eq!(w.t(), 0);
        assert_eq!(w.intensity(), 10.0);
        assert_eq!(w.mood(), 10.0);
        assert_eq!(t.in_flight(), 0);
    }

    #[test]
    fn pipeline_emits_one_winner_per_tick() {
        let mut t = build_uptree(8, 2, CompetitionFunctionSpec::INTENSITY, Mode::Probabilistic).unwrap();
        let mut rng = SimRng::new(5);
        for tick in 0..50u64 {
            t.submit_level0(chunks(&[1.0, -2.0, 3.0, 0.5, 0.0, 1.0, 2.0, -1.0], tick), tick).unwrap();
            let w = t.advance(&mut rng);
            if tick < 3 {
                assert!(w.is_none());
            } else {
                let w = w.unwrap();
                assert_eq!(w.t(), tick - 3);
                assert!((w.intensity() - 10.5).abs() < 1e-9);
                assert!((w.mood() - 4.5).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn one_draw_per_node_per_tick() {
        let mut t = build_uptree(9, 3, CompetitionFunctionSpec::AbsMood, Mode::Probabilistic).unwrap();
        let mut rng = SimRng::new(5);
        t.submit_level0(chunks(&[0.0; 9], 0), 0).unwrap();
        t.advance(&mut rng);
        assert_eq!(rng.draws(), 0);
        t.advance(&mut rng);
        assert_eq!(rng.draws(), 3);
        t.advance(&mut rng);
        assert_eq!(rng.draws(), 4);
    }

    #[test]
    fn cancelling_moods_left_pair_never_wins() {
        let leaves = chunks(&[100.0, -100.0, 1.0, 2.0], 0);
        let mut rng = SimRng::new(2024);
        for _ in 0..10_000 {
            let w = compete_once(&leaves, &CompetitionFunctionSpec::AbsMood, Mode::Probabilistic, 2, &mut rng);
            assert!(w == 2 || w == 3);
        }
    }

    #[test]
    fn single_processor_always_wins() {
        let mut t = build_uptree(1, 2, CompetitionFunctionSpec::INTENSITY, Mode::Probabilistic).unwrap();
        let mut rng = SimRng::new(9);
        for tick in 0..200 {
            t.submit_level0(chunks(&[0.25], tick), tick).unwrap();
            if let Some(w) = t.advance(&mut rng) {
                assert_eq!(w.address(), 0);
            }
        }
    }

    #[test]
    fn deterministic_mode_uses_no_draws() {
        let mut t = build_uptree(4, 2, CompetitionFunctionSpec::INTENSITY, Mode::Deterministic).unwrap();
        let mut rng = SimRng::new(0);
        let mut wins = Vec::new();
        t.submit_level0(chunks(&[5.0, 4.0, 3.0, 1.0], 0), 0).unwrap();
        t.advance(&mut rng);
        t.advance(&mut rng);
        let w = t.advance_with(&mut rng, |nw| wins.push(nw)).unwrap();
        assert_eq!(rng.draws(), 0);
        assert_eq!(w.address(), 0);
        assert_eq!(wins.len(), 1);
        assert_eq!(wins[0].level, 2);
    }
}
