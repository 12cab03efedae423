use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context};
use ctm_core::record::fmt_real;
use ctm_core::uptree::{exact_win_probabilities, monte_carlo_win_frequencies, Shape};
use ctm_core::{eval_f, make_chunk, Chunk, CompetitionFunctionSpec, Gist, SimRng};

use crate::parse_mode;

/// Leaves above this count are too many for the exact oracle.
const MAX_N: usize = 4096;

pub struct Args {
    pub n: Option<usize>,
    pub arity: usize,
    pub f: String,
    pub mode: String,
    pub weights: Option<Vec<f64>>,
    pub trials: u64,
    pub expect_theorem: bool,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

pub fn level0(weights: &[f64]) -> anyhow::Result<Vec<Chunk>> {
    Ok(weights.iter().enumerate().map(|(i, &w)| make_chunk(i, 0, Gist::nil(), w)).collect::<Result<_, _>>()?)
}

/// Four-sigma binomial allowance for a frequency estimating `p`.
pub fn tolerance(p: f64, trials: u64) -> f64 {
    4.0 * (p * (1.0 - p) / trials as f64).sqrt()
}

pub fn run(a: &Args) -> anyhow::Result<bool> {
    let f: CompetitionFunctionSpec = a.f.parse()?;
    let mode = parse_mode(&a.mode)?;
    let weights = match (&a.weights, a.n) {
        (Some(w), Some(n)) if w.len() != n => bail!("--n {n} does not match {} weights", w.len()),
        (Some(w), _) => w.clone(),
        (None, n) => {
            let mut rng = SimRng::new(a.seed);
            (0..n.unwrap_or(4)).map(|_| rng.unit() * 20.0 - 10.0).collect()
        }
    };
    if weights.len() > MAX_N {
        bail!("N = {} exceeds the oracle limit {MAX_N}", weights.len());
    }
    let shape = Shape::for_processors(weights.len(), a.arity)?;
    let chunks = level0(&weights)?;
    let oracle = exact_win_probabilities(&chunks, &f, a.arity, mode)?.into_vec();
    let mc = if a.trials > 0 {
        Some(monte_carlo_win_frequencies(&chunks, &f, a.arity, mode, a.trials, a.seed)?)
    } else {
        None
    };

    let fv: Vec<f64> = chunks.iter().map(|c| eval_f(&f, c)).collect();
    let total: f64 = fv.iter().sum();
    // The theorem's prediction, with the uniform fallback when every f is 0.
    let closed = |i: usize| if total > 0.0 { fv[i] / total } else { 1.0 / shape.leaf_count as f64 };
    let additive = f.declared_additive();
    let probabilistic = mode == ctm_core::Mode::Probabilistic;
    let theorem_applies = additive && probabilistic;

    let mut table = csv::Writer::from_writer(Vec::new());
    table.write_record(["leaf", "weight", "f_value", "oracle", "closed_form", "monte_carlo", "tolerance", "deviation"])?;
    let (mut max_closed_err, mut max_dev, mut within) = (0.0f64, 0.0f64, true);
    for i in 0..weights.len() {
        let closed_col = if theorem_applies {
            max_closed_err = max_closed_err.max((oracle[i] - closed(i)).abs());
            fmt_real(closed(i))
        } else {
            String::new()
        };
        let (mc_col, tol_col, dev_col) = match &mc {
            Some(freq) => {
                let tol = tolerance(oracle[i], a.trials);
                let dev = (freq[i] - oracle[i]).abs();
                max_dev = max_dev.max(dev);
                within &= dev <= tol;
                (fmt_real(freq[i]), fmt_real(tol), fmt_real(dev))
            }
            None => Default::default(),
        };
        table.write_record([
            i.to_string(),
            fmt_real(weights[i]),
            fmt_real(fv[i]),
            fmt_real(oracle[i]),
            closed_col,
            mc_col,
            tol_col,
            dev_col,
        ])?;
    }
    let csv_bytes = table.into_inner().context("flushing table")?;
    let closed_ok = !theorem_applies || max_closed_err <= 1e-12;
    let refused = a.expect_theorem && !theorem_applies;
    let passed = closed_ok && within && !refused;

    let mut report = String::from_utf8(csv_bytes.clone())?;
    report.push('\n');
    if refused {
        let why = if additive {
            "deterministic mode picks argmax winners, so win probabilities are not proportional to f".to_owned()
        } else {
            format!("f = {} is not additive: a parent's f-value is not the sum of its children's, so win probabilities need not be proportional to f", a.f)
        };
        report.push_str(&format!("theorem does not apply: {why}\n\n"));
    }
    let summary = [
        ("command", "verify-theorem".to_owned()),
        ("n", weights.len().to_string()),
        ("arity", a.arity.to_string()),
        ("height", shape.height.to_string()),
        ("f", a.f.clone()),
        ("mode", a.mode.clone()),
        ("trials", a.trials.to_string()),
        ("seed", a.seed.to_string()),
        ("additive", additive.to_string()),
        ("theorem_applies", theorem_applies.to_string()),
        ("max_closed_form_error", if theorem_applies { fmt_real(max_closed_err) } else { "n/a".into() }),
        ("oracle_matches_closed_form", if theorem_applies { closed_ok.to_string() } else { "n/a".into() }),
        ("max_deviation", if mc.is_some() { fmt_real(max_dev) } else { "n/a".into() }),
        ("within_tolerance", if mc.is_some() { within.to_string() } else { "n/a".into() }),
        ("passed", passed.to_string()),
    ];
    report.push_str("[summary]\n");
    for (k, v) in summary {
        report.push_str(&format!("{k}={v}\n"));
    }
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join("verify-theorem.csv");
        fs::write(&path, &csv_bytes).with_context(|| format!("writing {}", path.display()))?;
        eprintln!("wrote {}", path.display());
    }
    print!("{report}");
    Ok(passed)
}
