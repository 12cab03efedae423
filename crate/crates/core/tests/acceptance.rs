//! Acceptance criteria 1 to 10. Prints one pass/fail line per criterion
//! and exits non-zero if any fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ctm_core::machine::{new_ctm, CtmConfig, EventKind, Trace};
use ctm_core::processors::{sea_update, BehaviorSpec, Feedback, RecordKind, SeaParams, Verdict};
use ctm_core::uptree::{exact_win_probabilities, latency, monte_carlo_win_frequencies};
use ctm_core::{
    build_uptree, make_chunk, run_scenario, Chunk, CompetitionFunctionSpec, Gist, Modality, Mode, ScenarioResult, SimRng,
    SCENARIOS,
};

type Check = Result<String, String>;

fn chunks(weights: &[f64]) -> Vec<Chunk> {
    weights.iter().enumerate().map(|(i, &w)| make_chunk(i, 0, Gist::nil(), w).unwrap()).collect()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:.1?}, limit {limit:?}"))
}

fn four_sigma(p: f64, trials: u64) -> f64 {
    4.0 * (p * (1.0 - p) / trials as f64).sqrt()
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let trials = 100_000;
    let mut rng = SimRng::new(1);
    let (mut worst_exact, mut worst_sigma) = (0.0f64, 0.0f64);
    for instance in 0..200u64 {
        let n = [2, 4, 8, 16][rng.below(4)];
        let w: Vec<f64> = (0..n).map(|_| rng.unit() * 20.0 - 10.0).collect();
        let c = rng.unit() * 2.0 - 1.0;
        let f = CompetitionFunctionSpec::intensity_plus_c_mood(c).map_err(|e| e.to_string())?;
        // Level 0 has intensity |w| and mood w.
        let fv: Vec<f64> = w.iter().map(|x| x.abs() + c * x).collect();
        let total: f64 = fv.iter().sum();
        let level0 = chunks(&w);
        let oracle = exact_win_probabilities(&level0, &f, 2, Mode::Probabilistic).map_err(|e| e.to_string())?;
        let mc = monte_carlo_win_frequencies(&level0, &f, 2, Mode::Probabilistic, trials, instance)
            .map_err(|e| e.to_string())?;
        for i in 0..n {
            let expected = fv[i] / total;
            let err = (oracle.as_slice()[i] - expected).abs();
            worst_exact = worst_exact.max(err);
            ensure(err <= 1e-12, || format!("instance {instance} leaf {i}: oracle {} vs {expected}", oracle.as_slice()[i]))?;
            let p = oracle.as_slice()[i];
            let dev = (mc[i] - p).abs();
            let tol = four_sigma(p, trials);
            if tol > 0.0 {
                worst_sigma = worst_sigma.max(dev / tol * 4.0);
            }
            ensure(dev <= tol, || format!("instance {instance} leaf {i}: frequency {} vs {p} (tol {tol})", mc[i]))?;
        }
    }
    within_time(start, Duration::from_secs(30))?;
    Ok(format!("max oracle error {worst_exact:.1e}, worst deviation {worst_sigma:.2} sigma, {:.1?}", start.elapsed()))
}

fn shuffle(rng: &mut SimRng, n: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        v.swap(i, rng.below(i + 1));
    }
    v
}

/// Root winner in deterministic mode, as the index of the original leaf.
fn deterministic_winner(w: &[f64], perm: &[usize]) -> Result<usize, String> {
    let permuted: Vec<f64> = perm.iter().map(|&j| w[j]).collect();
    let p = exact_win_probabilities(&chunks(&permuted), &CompetitionFunctionSpec::INTENSITY, 2, Mode::Deterministic)
        .map_err(|e| e.to_string())?;
    let pos = p.as_slice().iter().position(|&x| x == 1.0).ok_or("no certain winner")?;
    Ok(perm[pos])
}

fn criterion_2() -> Check {
    let start = Instant::now();
    let mut rng = SimRng::new(2);
    let mut checked = 0;
    for _ in 0..50 {
        let n = [2, 4, 8, 16][rng.below(4)];
        let w: Vec<f64> = (0..n).map(|_| rng.unit() * 20.0 - 10.0).collect();
        let f = CompetitionFunctionSpec::intensity_plus_c_mood(rng.unit() * 2.0 - 1.0).map_err(|e| e.to_string())?;
        let base = exact_win_probabilities(&chunks(&w), &f, 2, Mode::Probabilistic).map_err(|e| e.to_string())?;
        for _ in 0..20 {
            // Leaf k of the permuted instance holds original leaf perm[k].
            let perm = shuffle(&mut rng, n);
            let permuted: Vec<f64> = perm.iter().map(|&j| w[j]).collect();
            let p = exact_win_probabilities(&chunks(&permuted), &f, 2, Mode::Probabilistic).map_err(|e| e.to_string())?;
            for (k, &j) in perm.iter().enumerate() {
                let err = (p.as_slice()[k] - base.as_slice()[j]).abs();
                ensure(err <= 1e-12, || format!("permutation {perm:?}: leaf {j} moved {err:e}"))?;
            }
            checked += 1;
        }
    }
    // Deterministic mode: (3, 0 | 2, 2) sends leaf 2 to the root, while
    // (3, 2 | 2, 0) sends leaf 0.
    let w = [3.0, 0.0, 2.0, 2.0];
    let a = deterministic_winner(&w, &[0, 1, 2, 3])?;
    let b = deterministic_winner(&w, &[0, 2, 3, 1])?;
    ensure(a != b, || format!("hand instance: both permutations crown leaf {a}"))?;
    // And a randomly found instance.
    let mut found = None;
    for _ in 0..1000 {
        let w: Vec<f64> = (0..4).map(|_| rng.unit() * 20.0 - 10.0).collect();
        let perm = shuffle(&mut rng, 4);
        if deterministic_winner(&w, &[0, 1, 2, 3])? != deterministic_winner(&w, &perm)? {
            found = Some((w, perm));
            break;
        }
    }
    ensure(found.is_some(), || "no random 4-leaf instance changes its deterministic winner".into())?;
    within_time(start, Duration::from_secs(10))?;
    Ok(format!("{checked} permutations invariant; deterministic winner {a} becomes {b} under reordering"))
}

fn criterion_3() -> Check {
    let w = [100.0, -100.0, 1.0, 2.0];
    let f = CompetitionFunctionSpec::AbsMood;
    let p = exact_win_probabilities(&chunks(&w), &f, 2, Mode::Probabilistic).map_err(|e| e.to_string())?;
    ensure(p.as_slice() == [0.0, 0.0, 1.0 / 3.0, 2.0 / 3.0], || format!("oracle {:?}", p.as_slice()))?;
    let mut tree = build_uptree(4, 2, f, Mode::Probabilistic).map_err(|e| e.to_string())?;
    let mut rng = SimRng::new(3);
    let mut wins = [0u64; 4];
    let competitions = 10_000;
    let h = u64::from(tree.height());
    for t in 0..competitions + h {
        if t < competitions {
            let level0 = w.iter().enumerate().map(|(i, &x)| make_chunk(i, t, Gist::nil(), x).unwrap()).collect();
            tree.submit_level0(level0, t).map_err(|e| e.to_string())?;
        }
        if let Some(c) = tree.advance(&mut rng) {
            wins[c.address()] += 1;
        }
    }
    ensure(wins[0] == 0 && wins[1] == 0, || format!("loud siblings won {wins:?}"))?;
    ensure(wins.iter().sum::<u64>() == competitions, || format!("{wins:?} does not total {competitions}"))?;
    Ok(format!("oracle (0, 0, 1/3, 2/3); winners over {competitions} competitions {wins:?}"))
}

fn criterion_4() -> Check {
    let w = [10.0, 10.0, 10.0, 10.0, 10.0, 0.0, 0.0, 0.0];
    let p = exact_win_probabilities(&chunks(&w), &CompetitionFunctionSpec::AbsWeight, 2, Mode::Probabilistic)
        .map_err(|e| e.to_string())?;
    let expected = [0.125, 0.125, 0.125, 0.125, 0.5, 0.0, 0.0, 0.0];
    ensure(p.as_slice() == expected, || format!("oracle {:?}", p.as_slice()))?;
    Ok("oracle (1/8, 1/8, 1/8, 1/8, 1/2, 0, 0, 0)".into())
}

fn timing_run(h: u32) -> Result<(), String> {
    let n = 1usize << h;
    let ticks = 100u64;
    let mut cfg = CtmConfig::new(n, 2);
    cfg.lifetime = ticks;
    cfg.seed = u64::from(h);
    cfg.memory.capacity = Some(1000);
    for i in 0..n {
        cfg = cfg.with_processor(i, "speaker", BehaviorSpec::Constant {
            tags: vec![Modality::Speech],
            payload: format!("s{i}"),
            weight: (i + 1) as f64,
            flags: vec![],
            value: None,
        });
    }
    let mut ctm = new_ctm(cfg).map_err(|e| e.to_string())?;
    ensure(ctm.height() == h, || format!("height {} for N = {n}", ctm.height()))?;
    ctm.run(ticks).map_err(|e| e.to_string())?;
    let h = u64::from(h);
    let mut installs: BTreeMap<u64, Vec<&Chunk>> = BTreeMap::new();
    let mut broadcasts: BTreeMap<u64, Vec<&Chunk>> = BTreeMap::new();
    let mut submitted: BTreeMap<u64, Vec<&Chunk>> = BTreeMap::new();
    for e in &ctm.trace().events {
        match &e.kind {
            EventKind::StmInstall { chunk } => installs.entry(e.tick).or_default().push(chunk),
            EventKind::Broadcast { chunk } => broadcasts.entry(e.tick).or_default().push(chunk),
            EventKind::Submission { chunk } => submitted.entry(e.tick).or_default().push(chunk),
            _ => {}
        }
    }
    for tick in 0..ticks {
        let want_install = usize::from(tick >= h);
        let want_broadcast = usize::from(tick > h);
        let got_i = installs.get(&tick).map_or(0, Vec::len);
        let got_b = broadcasts.get(&tick).map_or(0, Vec::len);
        ensure(got_i == want_install, || format!("h={h} tick {tick}: {got_i} installs"))?;
        ensure(got_b == want_broadcast, || format!("h={h} tick {tick}: {got_b} broadcasts"))?;
    }
    for (&tick, list) in &installs {
        let c = list[0];
        ensure(c.t() + h == tick, || format!("h={h}: chunk from {} installed at {tick}", c.t()))?;
        ensure(submitted[&c.t()].iter().any(|s| s.address() == c.address() && s.gist() == c.gist()), || {
            format!("h={h}: installed chunk was not submitted at {}", c.t())
        })?;
        if tick + 1 < ticks {
            ensure(broadcasts[&(tick + 1)][0] == c, || format!("h={h}: broadcast at {} differs from STM", tick + 1))?;
        }
    }
    for p in ctm.processors() {
        let received: Vec<(u64, u64)> = p
            .memory()
            .records()
            .filter(|r| r.kind == RecordKind::BroadcastReceived)
            .map(|r| (r.tick, r.chunk.t()))
            .collect();
        let expected: Vec<(u64, u64)> = (h + 1..ticks).map(|t| (t, t - h - 1)).collect();
        ensure(received == expected, || format!("h={h}: processor {} logged {} broadcasts", p.address(), received.len()))?;
    }
    Ok(())
}

fn criterion_5() -> Check {
    for h in 1..=4 {
        timing_run(h)?;
    }
    Ok("h = 1..4: install at t+h, received by every processor at t+h+1, one broadcast per tick".into())
}

fn criterion_6() -> Check {
    let binary = latency(100.0, 1 << 23, 2).map_err(|e| e.to_string())?;
    ensure(binary.height == 23 && binary.seconds_to_stm == 2.3 && binary.seconds_to_awareness == 2.4, || {
        format!("{binary:?}")
    })?;
    let tenary = latency(100.0, 10_000_000, 10).map_err(|e| e.to_string())?;
    ensure(tenary.height == 7 && tenary.seconds_to_stm == 0.7, || format!("{tenary:?}"))?;
    Ok(format!(
        "2^23 binary: {} s / {} s; 10^7 ten-ary: {} s to STM",
        binary.seconds_to_stm, binary.seconds_to_awareness, tenary.seconds_to_stm
    ))
}

/// A machine of constant speakers with random signed weights.
fn random_machine(n: usize, seed: u64, f: CompetitionFunctionSpec) -> CtmConfig {
    let mut rng = SimRng::with_stream(seed, 99);
    let mut cfg = CtmConfig::new(n, 2);
    cfg.seed = seed;
    cfg.lifetime = 60;
    cfg.competition = f;
    for i in 0..n {
        cfg = cfg.with_processor(i, "speaker", BehaviorSpec::Constant {
            tags: vec![Modality::Speech],
            payload: format!("s{i}"),
            weight: rng.unit() * 20.0 - 10.0,
            flags: vec![],
            value: None,
        });
    }
    cfg
}

fn criterion_7(suite: &[ScenarioResult]) -> Check {
    let mut checked = 0;
    for r in suite {
        for a in r.assertions.iter().filter(|a| a.name.starts_with("aggregation_identity_")) {
            ensure(a.passed, || format!("{} {}: {}", r.name, a.name, a.observed))?;
            checked += 1;
        }
    }
    let fs = [CompetitionFunctionSpec::INTENSITY, CompetitionFunctionSpec::AbsMood, CompetitionFunctionSpec::AbsWeight];
    for seed in 0..20 {
        for f in fs {
            let mut ctm = new_ctm(random_machine(7, seed, f)).map_err(|e| e.to_string())?;
            ctm.run(60).map_err(|e| e.to_string())?;
            let c = ctm.check_aggregation();
            ensure(c.holds(1e-9) && c.ticks_checked == 57, || format!("seed {seed} {f:?}: {c:?}"))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} runs hold the identity within 1e-9"))
}

fn winners(trace: &Trace) -> Vec<(u64, usize)> {
    trace
        .events
        .iter()
        .filter_map(|e| match &e.kind {
            EventKind::StmInstall { chunk } => Some((e.tick, chunk.address())),
            _ => None,
        })
        .collect()
}

fn criterion_8(suite: &[ScenarioResult]) -> Check {
    for r in suite {
        let again = run_scenario(&r.name, None, r.seed).map_err(|e| e.to_string())?;
        ensure(again.report() == r.report(), || format!("{}: report differs on rerun", r.name))?;
        ensure(again.traces.len() == r.traces.len(), || format!("{}: trace count differs", r.name))?;
        for ((la, ta), (lb, tb)) in r.traces.iter().zip(&again.traces) {
            ensure(la == lb && ta.render() == tb.render(), || format!("{} {la}: trace differs on rerun", r.name))?;
        }
    }
    let mut a = new_ctm(random_machine(9, 1, CompetitionFunctionSpec::INTENSITY)).map_err(|e| e.to_string())?;
    let mut cfg = random_machine(9, 1, CompetitionFunctionSpec::INTENSITY);
    cfg.seed = 2;
    let mut b = new_ctm(cfg).map_err(|e| e.to_string())?;
    a.run(60).map_err(|e| e.to_string())?;
    b.run(60).map_err(|e| e.to_string())?;
    ensure(winners(a.trace()) != winners(b.trace()), || "seed change left the winner sequence unchanged".into())?;
    ensure(a.check_aggregation().holds(1e-9) && b.check_aggregation().holds(1e-9), || "identity broke".into())?;
    Ok(format!("{} scenarios byte-identical on rerun; new seed changes winners, identities hold", suite.len()))
}

fn criterion_9() -> Check {
    let params = SeaParams::default();
    let embolden = Feedback { verdict: Verdict::Embolden, reference_tick: 0, reason: "toy" };
    let mut steps_by_m = Vec::new();
    for m in 1..=6 {
        let target = 2f64.powi(m);
        let mut g = 1.0;
        let mut steps = 0;
        while !(target / 2.0..=target * 2.0).contains(&g) {
            g = sea_update(g, &embolden, &params);
            steps += 1;
            ensure(g.log2().fract() == 0.0, || format!("g = {g} is not a power of 2"))?;
        }
        ensure(steps <= m + 1, || format!("m = {m}: {steps} steps"))?;
        steps_by_m.push(steps);
    }
    let hush = Feedback { verdict: Verdict::Hush, ..embolden.clone() };
    let (mut hi, mut lo) = (1.0, 1.0);
    for _ in 0..40 {
        hi = sea_update(hi, &embolden, &params);
        lo = sea_update(lo, &hush, &params);
    }
    ensure(hi == params.g_max && lo == params.g_min, || format!("clamps give {lo} and {hi}"))?;
    ensure(hi.log2().fract() == 0.0 && lo.log2().fract() == 0.0, || "clamped g is not a power of 2".into())?;
    Ok(format!("steps for m = 1..6: {steps_by_m:?}; clamps at 2^-20 and 2^20"))
}

fn criterion_10(suite: &[ScenarioResult], took: Duration) -> Check {
    for r in suite {
        let failed: Vec<&str> = r.assertions.iter().filter(|a| !a.passed).map(|a| a.name.as_str()).collect();
        ensure(failed.is_empty(), || format!("{}: failed {failed:?}\n{}", r.name, r.report()))?;
    }
    let get = |name: &str| suite.iter().find(|r| r.name == name).ok_or(format!("{name} missing"));
    let required: [(&str, &[&str]); 6] = [
        ("blindsight", &["vision_never_broadcast", "fetch_success", "ablation_no_link_fails", "ablation_submission_broadcasts"]),
        ("inattentional-blindness", &["rate_matches_oracle", "oracle_at_most_one_percent"]),
        ("change-blindness", &["stable_gist_no_detection", "control_detects"]),
        ("sleep-dream", &["asleep_stm_nil", "dream_share", "no_actuator_commands_while_asleep", "loud_noise_wakes"]),
        ("meditation", &["share_increases", "others_g_decreases"]),
        ("self-model", &["arm_tagged_self", "ball_tagged_not_self", "no_activity_arm_unknown", "no_activity_ball_unknown"]),
    ];
    for (name, checks) in required {
        let r = get(name)?;
        for c in checks {
            ensure(r.assertion(c).is_some_and(|a| a.passed), || format!("{name}: {c} missing or failed"))?;
        }
    }
    let gorilla = get("inattentional-blindness")?;
    let oracle = gorilla.metric("gorilla_oracle").unwrap_or(f64::NAN);
    ensure((oracle - 0.01).abs() <= 1e-12, || format!("gorilla oracle {oracle} is not 0.01"))?;
    ensure(took < Duration::from_secs(120), || format!("suite took {took:.1?}"))?;
    Ok(format!(
        "{} scenarios pass in {took:.1?}; gorilla rate {:.5} vs oracle 0.01",
        suite.len(),
        gorilla.metric("gorilla_win_rate").unwrap_or(f64::NAN)
    ))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let suite: Result<Vec<ScenarioResult>, String> =
        SCENARIOS.iter().map(|name| run_scenario(name, None, 7).map_err(|e| format!("{name}: {e}"))).collect();
    let suite_time = start.elapsed();
    let suite = match suite {
        Ok(s) => s,
        Err(e) => {
            println!("scenario suite did not run: {e}");
            return ExitCode::FAILURE;
        }
    };
    let results: Vec<(u32, &str, Check)> = vec![
        (1, "proportional-selection theorem", criterion_1()),
        (2, "permutation invariance", criterion_2()),
        (3, "cancelling-mood counterexample", criterion_3()),
        (4, "lopsided counterexample", criterion_4()),
        (5, "timing skeleton", criterion_5()),
        (6, "latency arithmetic", criterion_6()),
        (7, "aggregation identities", criterion_7(&suite)),
        (8, "reproducibility", criterion_8(&suite)),
        (9, "SEA arithmetic", criterion_9()),
        (10, "scenario suite", criterion_10(&suite, suite_time)),
    ];
    let mut all = true;
    for (n, name, r) in &results {
        match r {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail}"),
            Err(why) => {
                all = false;
                println!("criterion {n:>2} FAIL  {name}: {why}");
            }
        }
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
