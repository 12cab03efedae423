//! Exact win probabilities by dynamic programming over the tree, and the
//! Monte Carlo estimator they are checked against.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{compete_once, pad_leaves, EntryView, Mode, Shape};
use crate::chunk::Chunk;
use crate::competition::CompetitionFunctionSpec;
use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Largest padded leaf count the exact oracle accepts.
pub const ORACLE_MAX_LEAVES: usize = 4096;

/// Cap on joint outcomes enumerated at a single node when f depends on the
/// winning leaf.
const MAX_JOINT_OUTCOMES: usize = 1 << 22;

/// Per-leaf probability of reaching the root, over the padded leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct WinProbabilityVector(Vec<f64>);

impl WinProbabilityVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

#[derive(Debug, Clone)]
struct NodeDist {
    /// (leaf, probability this leaf is the node's winner), leaves ascending.
    winners: Vec<(usize, f64)>,
    intensity: f64,
    mood: f64,
}

/// Exact per-leaf probability that each level-0 chunk reaches the root.
///
/// `level0` is indexed by leaf and padded with null chunks to a power of
/// `arity`. Intensity and mood at a node are subtree sums whatever the
/// winner, so for f that depends only on them each node picks child `c`
/// with probability `f_c / Σ f`. For `AbsWeight` the f-value of a child
/// depends on its winning leaf and the joint outcomes of the siblings are
/// enumerated. Deterministic mode yields a one-hot vector.
pub fn exact_win_probabilities(
    level0: &[Chunk],
    f: &CompetitionFunctionSpec,
    arity: usize,
    mode: Mode,
) -> Result<WinProbabilityVector> {
    f.validate()?;
    let shape = Shape::for_processors(level0.len(), arity)?;
    if shape.leaf_count > ORACLE_MAX_LEAVES {
        return Err(Error::TooManyLeaves(shape.leaf_count, ORACLE_MAX_LEAVES));
    }
    let leaves = pad_leaves(level0, &shape);
    let mut probs = vec![0.0; shape.leaf_count];

    if mode == Mode::Deterministic {
        // No draws are taken in deterministic mode.
        let mut rng = SimRng::new(0);
        probs[compete_once(&leaves, f, mode, arity, &mut rng)] = 1.0;
        return Ok(WinProbabilityVector(probs));
    }

    let weights: Vec<f64> = leaves.iter().map(|c| c.weight()).collect();
    let mut level: Vec<NodeDist> = leaves
        .iter()
        .enumerate()
        .map(|(leaf, c)| NodeDist { winners: vec![(leaf, 1.0)], intensity: c.intensity(), mood: c.mood() })
        .collect();

    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len() / arity);
        for kids in level.chunks(arity) {
            next.push(merge(kids, &weights, f)?);
        }
        level = next;
    }
    for (leaf, p) in &level[0].winners {
        probs[*leaf] = *p;
    }
    Ok(WinProbabilityVector(probs))
}

fn f_of(f: &CompetitionFunctionSpec, weight: f64, intensity: f64, mood: f64) -> f64 {
    f.eval(&EntryView { weight, intensity, mood })
}

fn merge(kids: &[NodeDist], weights: &[f64], f: &CompetitionFunctionSpec) -> Result<NodeDist> {
    let k = kids.len();
    let intensity = kids.iter().map(|d| d.intensity).sum();
    let mood = kids.iter().map(|d| d.mood).sum();
    let mut winners = Vec::new();

    if f.winner_independent() {
        let fv: Vec<f64> = kids.iter().map(|d| f_of(f, 0.0, d.intensity, d.mood)).collect();
        let total: f64 = fv.iter().sum();
        for (d, &fc) in kids.iter().zip(&fv) {
            let pc = if total > 0.0 { fc / total } else { 1.0 / k as f64 };
            winners.extend(d.winners.iter().map(|&(leaf, p)| (leaf, p * pc)));
        }
        return Ok(NodeDist { winners, intensity, mood });
    }

    // Distribution of each child's f-value, grouped by value.
    let fdists: Vec<Vec<(f64, f64)>> = kids
        .iter()
        .map(|d| {
            let mut by_value: BTreeMap<u64, f64> = BTreeMap::new();
            for &(leaf, p) in &d.winners {
                let v = f_of(f, weights[leaf], d.intensity, d.mood);
                *by_value.entry(v.to_bits()).or_default() += p;
            }
            by_value.into_iter().map(|(bits, p)| (f64::from_bits(bits), p)).collect()
        })
        .collect();

    for (c, d) in kids.iter().enumerate() {
        let others: Vec<&Vec<(f64, f64)>> =
            fdists.iter().enumerate().filter(|&(i, _)| i != c).map(|(_, v)| v).collect();
        let joint: usize = others.iter().map(|v| v.len()).product();
        if joint > MAX_JOINT_OUTCOMES {
            return Err(Error::TooManyLeaves(joint, MAX_JOINT_OUTCOMES));
        }
        // Distribution of the siblings' summed f-value.
        let mut sums: Vec<(f64, f64)> = vec![(0.0, 1.0)];
        for dist in &others {
            let mut next = Vec::with_capacity(sums.len() * dist.len());
            for &(s, ps) in &sums {
                for &(v, pv) in dist.iter() {
                    next.push((s + v, ps * pv));
                }
            }
            sums = next;
        }
        for &(leaf, p) in &d.winners {
            let own = f_of(f, weights[leaf], d.intensity, d.mood);
            let share: f64 = sums
                .iter()
                .map(|&(rest, pr)| {
                    let total = own + rest;
                    pr * if total > 0.0 { own / total } else { 1.0 / k as f64 }
                })
                .sum();
            winners.push((leaf, p * share));
        }
    }
    Ok(NodeDist { winners, intensity, mood })
}

/// Per-leaf win frequency over `trials` independent competitions. Trial
/// `i` draws from its own stream derived from `(seed, i)`, so the result
/// does not depend on how trials are split across threads.
pub fn monte_carlo_win_frequencies(
    level0: &[Chunk],
    f: &CompetitionFunctionSpec,
    arity: usize,
    mode: Mode,
    trials: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    f.validate()?;
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let shape = Shape::for_processors(level0.len(), arity)?;
    let leaves = pad_leaves(level0, &shape);
    const BLOCK: u64 = 2048;
    let blocks = trials.div_ceil(BLOCK);
    let counts = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut counts = vec![0u64; shape.leaf_count];
            for i in b * BLOCK..((b + 1) * BLOCK).min(trials) {
                let mut rng = SimRng::with_stream(seed, i);
                counts[compete_once(&leaves, f, mode, arity, &mut rng)] += 1;
            }
            counts
        })
        .reduce(
            || vec![0u64; shape.leaf_count],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(counts.into_iter().map(|c| c as f64 / trials as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunk::{make_chunk, Gist};

    fn chunks(ws: &[f64]) -> Vec<Chunk> {
        ws.iter()
            .enumerate()
            .map(|(a, &w)| make_chunk(a, 0, Gist::nil(), w).unwrap())
            .collect()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn proportional_example() {
        let p = exact_win_probabilities(
            &chunks(&[1.0, 2.0, 3.0, 4.0]),
            &CompetitionFunctionSpec::INTENSITY,
            2,
            Mode::Probabilistic,
        )
        .unwrap();
        assert!(close(p.as_slice(), &[0.1, 0.2, 0.3, 0.4], 1e-12), "{p:?}");
    }

    #[test]
    fn cancelling_moods_abs_mood() {
        let p = exact_win_probabilities(
            &chunks(&[100.0, -100.0, 1.0, 2.0]),
            &CompetitionFunctionSpec::AbsMood,
            2,
            Mode::Probabilistic,
        )
        .unwrap();
        assert_eq!(p.as_slice(), &[0.0, 0.0, 1.0 / 3.0, 2.0 / 3.0]);
    }

    #[test]
    fn lopsided_abs_weight() {
        let w = [10.0, 10.0, 10.0, 10.0, 10.0, 0.0, 0.0, 0.0];
        let p = exact_win_probabilities(&chunks(&w), &CompetitionFunctionSpec::AbsWeight, 2, Mode::Probabilistic)
            .unwrap();
        assert_eq!(p.as_slice(), &[0.125, 0.125, 0.125, 0.125, 0.5, 0.0, 0.0, 0.0]);
    }

    // Independent enumeration over all coin outcomes of a 4-leaf binary tree
    // with f = |weight|: each node's match only depends on the two leaves
    // that reach it.
    #[test]
    fn abs_weight_matches_enumeration() {
        let w = [3.0, -1.0, 0.0, 2.0];
        let fv = |x: f64| x.abs();
        let duel = |a: f64, b: f64| if a + b > 0.0 { a / (a + b) } else { 0.5 };
        let mut expected = [0.0; 4];
        for l in 0..2 {
            for r in 2..4 {
                let pl = if l == 0 { duel(fv(w[0]), fv(w[1])) } else { 1.0 - duel(fv(w[0]), fv(w[1])) };
                let pr = if r == 2 { duel(fv(w[2]), fv(w[3])) } else { 1.0 - duel(fv(w[2]), fv(w[3])) };
                let root = duel(fv(w[l]), fv(w[r]));
                expected[l] += pl * pr * root;
                expected[r] += pl * pr * (1.0 - root);
            }
        }
        let p = exact_win_probabilities(&chunks(&w), &CompetitionFunctionSpec::AbsWeight, 2, Mode::Probabilistic)
            .unwrap();
        assert!(close(p.as_slice(), &expected, 1e-12), "{p:?} vs {expected:?}");
    }

    #[test]
    fn all_zero_is_uniform() {
        let p = exact_win_probabilities(&chunks(&[0.0; 3]), &CompetitionFunctionSpec::INTENSITY, 3, Mode::Probabilistic)
            .unwrap();
        assert!(close(p.as_slice(), &[1.0 / 3.0; 3], 1e-15));
    }

    #[test]
    fn padding_leaves_get_nothing() {
        let p = exact_win_probabilities(&chunks(&[1.0, 1.0, 2.0]), &CompetitionFunctionSpec::INTENSITY, 2, Mode::Probabilistic)
            .unwrap();
        assert!(close(p.as_slice(), &[0.25, 0.25, 0.5, 0.0], 1e-15));
    }

    #[test]
    fn deterministic_is_one_hot() {
        let p = exact_win_probabilities(&chunks(&[5.0, 4.0, 3.0, 1.0]), &CompetitionFunctionSpec::INTENSITY, 2, Mode::Deterministic)
            .unwrap();
        assert_eq!(p.as_slice(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn too_many_leaves() {
        let big = chunks(&vec![1.0; 5000]);
        assert!(matches!(
            exact_win_probabilities(&big, &CompetitionFunctionSpec::INTENSITY, 2, Mode::Probabilistic),
            Err(Error::TooManyLeaves(8192, 4096))
        ));
    }

    #[test]
    fn monte_carlo_examples() {
        let f = monte_carlo_win_frequencies(&chunks(&[1.0, 2.0, 3.0, 4.0]), &CompetitionFunctionSpec::INTENSITY, 2, Mode::Probabilistic, 100_000, 3)
            .unwrap();
        assert!(close(&f, &[0.1, 0.2, 0.3, 0.4], 0.01), "{f:?}");
        let f = monte_carlo_win_frequencies(&chunks(&[100.0, -100.0, 1.0, 2.0]), &CompetitionFunctionSpec::AbsMood, 2, Mode::Probabilistic, 20_000, 3)
            .unwrap();
        assert_eq!((f[0], f[1]), (0.0, 0.0));
        let f = monte_carlo_win_frequencies(&chunks(&[7.0]), &CompetitionFunctionSpec::INTENSITY, 2, Mode::Probabilistic, 1000, 3)
            .unwrap();
        assert_eq!(f[0], 1.0);
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let c = chunks(&[1.0, -3.0, 2.0, 0.5, 4.0]);
        let a = monte_carlo_win_frequencies(&c, &CompetitionFunctionSpec::INTENSITY, 2, Mode::Probabilistic, 10_000, 99).unwrap();
        let b = monte_carlo_win_frequencies(&c, &CompetitionFunctionSpec::INTENSITY, 2, Mode::Probabilistic, 10_000, 99).unwrap();
        assert_eq!(a, b);
    }
}
