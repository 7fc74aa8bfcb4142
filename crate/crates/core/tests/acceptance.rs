//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs hermetically on the toy and file backends.

mod common;

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hardpref_core::analytics::{length_stats, overlap_report};
use hardpref_core::dataset::{self, load_pairs, write_pairs};
use hardpref_core::gap::{
    compute_gap_records, dpo_loss_of_gap, gradient_weight, preference_entropy, reward_gap, ComputeOptions,
};
use hardpref_core::logprob::{FileBackend, LogProbStore, ToyBackend};
use hardpref_core::pipeline::{self, Method};
use hardpref_core::selector::{self, rank_by_difficulty, select_by_ratio};
use hardpref_core::synthetic::{synthetic_pairs, toy_alphabet, toy_corpora};
use hardpref_core::{
    Error, GapCache, PreferencePair, RewardGapRecord, Scorer, SelectionConfig, SelectionResult, Variant,
};

use common::{naive_reward, peak_rss_bytes, NaiveBigram, Scripted};

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Outcome);
/// (id, chosen policy, chosen reference, rejected policy, rejected reference, expected gap_norm)
type NormCase = (&'static str, &'static [f64], &'static [f64], &'static [f64], &'static [f64], f64);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !($cond as bool) {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("A1", "reward oracle", a1_reward_oracle),
        ("A2", "gradient identity", a2_gradient_identity),
        ("A3", "extrema and limits", a3_extrema),
        ("A4", "call accounting", a4_call_accounting),
        ("A5", "selection exactness", a5_selection_exactness),
        ("A6", "determinism", a6_determinism),
        ("A7", "tie and boundary semantics", a7_ties_and_boundaries),
        ("A8", "length-normalized variant", a8_length_normalized),
        ("A9", "analytics conservation", a9_analytics),
        ("A10", "scale smoke", a10_scale),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS {id} {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {id} {name}: {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn random_text(rng: &mut ChaCha8Rng, len: usize) -> String {
    // Mostly in-alphabet, with some characters that map to the fallback.
    const EXTRA: [char; 4] = ['X', 'é', '!', '7'];
    let alphabet: Vec<char> = "abcdefghijklmnopqrstuvwxyz ".chars().collect();
    (0..len)
        .map(|_| {
            if rng.gen_bool(0.05) {
                EXTRA[rng.gen_range(0..EXTRA.len())]
            } else {
                alphabet[rng.gen_range(0..alphabet.len())]
            }
        })
        .collect()
}

fn a1_reward_oracle() -> Outcome {
    let start = Instant::now();
    let seed = 17;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut pairs = synthetic_pairs(50, seed);
    for i in 0..50 {
        let prompt_len = if i % 10 == 0 { 0 } else { rng.gen_range(1..20) };
        let prompt = random_text(&mut rng, prompt_len);
        let (len_w, len_l) = (rng.gen_range(1..80), rng.gen_range(1..80));
        let chosen = random_text(&mut rng, len_w);
        let mut rejected = random_text(&mut rng, len_l);
        while rejected == chosen {
            rejected = random_text(&mut rng, 5);
        }
        pairs.push(PreferencePair::new(format!("r{i}"), prompt, chosen, rejected));
    }

    let scorer = Scorer::new(ToyBackend::seeded(seed));
    let (policy_corpus, reference_corpus) = toy_corpora(seed);
    let alphabet = toy_alphabet();
    let policy = NaiveBigram::new(&policy_corpus, &alphabet, ToyBackend::POLICY_SMOOTHING);
    let reference = NaiveBigram::new(&reference_corpus, &alphabet, ToyBackend::REFERENCE_SMOOTHING);

    let mut worst = 0.0f64;
    for beta in [0.1, 1.0] {
        for pair in &pairs {
            let record = reward_gap(pair, &scorer, beta).map_err(|e| e.to_string())?;
            let r_w = naive_reward(
                &policy.logprobs(&pair.prompt, &pair.chosen),
                &reference.logprobs(&pair.prompt, &pair.chosen),
                beta,
            );
            let r_l = naive_reward(
                &policy.logprobs(&pair.prompt, &pair.rejected),
                &reference.logprobs(&pair.prompt, &pair.rejected),
                beta,
            );
            for (got, want, what) in [
                (record.r_w, r_w, "r_w"),
                (record.r_l, r_l, "r_l"),
                (record.gap_raw, r_w - r_l, "gap_raw"),
            ] {
                let err = (got - want).abs();
                worst = worst.max(err);
                ensure!(err <= 1e-12, "{} {what}: {got} vs oracle {want}", pair.id);
            }
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!("{} pairs x 2 betas, max abs error {worst:.2e}, {elapsed:.2?}", pairs.len()))
}

fn a2_gradient_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let betas = [0.01, 0.1, 1.0];
    let h = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..200 {
        let gap: f64 = rng.gen_range(-20.0..=20.0);
        let beta = betas[i % 3];
        let fd = (dpo_loss_of_gap(gap + h, beta) - dpo_loss_of_gap(gap - h, beta)) / (2.0 * h);
        let analytic = -gradient_weight(gap, beta);
        let rel = ((fd - analytic) / analytic).abs();
        worst = worst.max(rel);
        ensure!(rel <= 1e-6, "gap {gap}, beta {beta}: fd {fd} vs {analytic} (rel {rel:.2e})");
    }
    Ok(format!("200 samples, max relative error {worst:.2e}"))
}

fn a3_extrema() -> Outcome {
    let grid: Vec<f64> = (-10_000i32..=10_000).map(|i| i as f64 * 1e-3).collect();
    let zero = 10_000;
    let mut problems = Vec::new();
    for beta in [0.01, 0.1, 1.0] {
        for (name, f) in [
            ("gradient_weight", gradient_weight as fn(f64, f64) -> f64),
            ("preference_entropy", preference_entropy),
        ] {
            let values: Vec<f64> = grid.iter().map(|&g| f(g, beta)).collect();
            let peak = values[zero];
            let argmax = (0..values.len()).fold(0, |best, i| if values[i] > values[best] { i } else { best });
            let rivals = values.iter().enumerate().filter(|&(i, &v)| i != zero && v >= peak).count();
            if rivals > 0 {
                // Report where the maximum actually is, and whether the
                // weaker "maximal at 0 among gaps >= 0" reading holds.
                let nonneg_ok = values[zero + 1..].iter().all(|&v| v < peak);
                problems.push(format!(
                    "{name}(beta {beta}) is maximal at gap {} ({}), not at 0 ({peak}); {rivals} grid points reach f(0); max over gap >= 0 at 0: {nonneg_ok}",
                    grid[argmax], values[argmax]
                ));
            }
        }
        let h0 = preference_entropy(0.0, beta);
        if (h0 - std::f64::consts::LN_2).abs() > 1e-12 {
            problems.push(format!("entropy max {h0} != ln 2"));
        }
        let hi = gradient_weight(40.0 / beta, beta);
        let lo = gradient_weight(-40.0 / beta, beta);
        if hi > 1e-17 * beta {
            problems.push(format!("gradient_weight(beta*gap=40) = {hi}"));
        }
        if lo < beta * (1.0 - 1e-17) {
            problems.push(format!("gradient_weight(beta*gap=-40) = {lo}"));
        }
    }
    if problems.is_empty() {
        Ok("maxima at gap 0 for beta in {0.01, 0.1, 1}; H(0) = ln 2; saturation limits hold".into())
    } else {
        Err(problems.join("; "))
    }
}

fn write_dataset(dir: &Path, pairs: &[PreferencePair]) -> std::path::PathBuf {
    let path = dir.join("pairs.jsonl");
    let file = std::fs::File::create(&path).unwrap();
    write_pairs(pairs, std::io::BufWriter::new(file)).unwrap();
    path
}

fn a4_call_accounting() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = write_dataset(dir.path(), &synthetic_pairs(50, 4));
    let (pairs, manifest) = load_pairs(&input).map_err(|e| e.to_string())?;
    let scorer = Scorer::new(ToyBackend::seeded(4));
    let cache = pipeline::default_cache_path(&input);
    let cold = pipeline::score_pairs(&pairs, &manifest, &scorer, 0.1, &cache, ComputeOptions::default())
        .map_err(|e| e.to_string())?;
    ensure!(cold.calls.total_calls() == 200, "cold run made {} calls", cold.calls.total_calls());
    // A fresh scorer, as a second process would have.
    let scorer = Scorer::new(ToyBackend::seeded(4));
    let warm = pipeline::score_pairs(&pairs, &manifest, &scorer, 0.1, &cache, ComputeOptions::default())
        .map_err(|e| e.to_string())?;
    ensure!(warm.calls.total_calls() == 0, "warm run made {} calls", warm.calls.total_calls());
    ensure!(scorer.stats().total_calls() == 0, "warm scorer counted calls");
    Ok(format!("cold: {}; warm: {}", cold.calls, warm.calls))
}

fn random_cache(rng: &mut ChaCha8Rng, n: usize) -> GapCache {
    let mut cache = GapCache::new(0.1, "synthetic", "sha256:none");
    for i in 0..n {
        let r_w: f64 = rng.gen_range(-3.0..3.0);
        let r_l: f64 = rng.gen_range(-3.0..3.0);
        let record = RewardGapRecord::from_rewards(
            format!("p{i}"),
            r_w,
            r_l,
            rng.gen_range(1..200),
            rng.gen_range(1..200),
            0.1,
        )
        .unwrap();
        cache.insert(record).unwrap();
    }
    cache
}

fn a5_selection_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let n = rng.gen_range(1..=5000usize);
        // ρ = a/b exactly, so ⌈ρN⌉ has an integer oracle.
        let b = rng.gen_range(2..=1000usize);
        let a = rng.gen_range(1..b);
        let rho = a as f64 / b as f64;
        let expected = (a * n).div_ceil(b);
        let cache = random_cache(&mut rng, n);
        let ranked = rank_by_difficulty(&cache, Variant::Raw);
        let prefix = select_by_ratio(&ranked, rho);
        ensure!(prefix.count == expected, "N {n}, rho {a}/{b}: {} ids, expected {expected}", prefix.count);
        let selected =
            selector::select(&cache, &SelectionConfig::ratio(rho)).map_err(|e| e.to_string())?;
        ensure!(selected.selected_count() == expected, "select() disagrees with prefix");

        let a2 = rng.gen_range(a..b);
        let larger =
            selector::select(&cache, &SelectionConfig::ratio(a2 as f64 / b as f64)).map_err(|e| e.to_string())?;
        let larger: HashSet<&str> = larger.selected_ids.iter().map(String::as_str).collect();
        ensure!(
            selected.selected_ids.iter().all(|id| larger.contains(id.as_str())),
            "N {n}: selection at {a}/{b} not nested in {a2}/{b}"
        );
    }

    let pairs = synthetic_pairs(400, 5);
    let mut id_sets: Vec<(f64, Vec<Vec<String>>)> = Vec::new();
    for beta in [0.01, 0.1, 1.0] {
        let scorer = Scorer::new(ToyBackend::seeded(5));
        let cache = compute_gap_records(&pairs, &scorer, beta, "sum", None, ComputeOptions::default())
            .map_err(|e| e.to_string())?
            .cache;
        let mut sets = Vec::new();
        for variant in [Variant::Raw, Variant::LengthNormalized] {
            for rho in [0.05, 0.1, 0.25, 0.5] {
                let config = SelectionConfig::ratio(rho).with_beta(beta).with_variant(variant);
                let mut ids = selector::select(&cache, &config).map_err(|e| e.to_string())?.selected_ids;
                ids.sort();
                sets.push(ids);
            }
        }
        id_sets.push((beta, sets));
    }
    for (beta, sets) in &id_sets[1..] {
        ensure!(*sets == id_sets[0].1, "selected ids at beta {beta} differ from beta {}", id_sets[0].0);
    }
    Ok("50 random (N, rho) exact and nested; id sets identical across beta in {0.01, 0.1, 1}".into())
}

fn run_pipeline(dir: &Path, workers: usize) -> Result<Vec<Vec<u8>>, String> {
    let input = write_dataset(dir, &synthetic_pairs(300, 6));
    let (pairs, manifest) = load_pairs(&input).map_err(|e| e.to_string())?;
    let scorer = Scorer::new(ToyBackend::seeded(6));
    let cache_path = pipeline::default_cache_path(&input);
    let options = ComputeOptions { workers, strict: true };
    pipeline::score_pairs(&pairs, &manifest, &scorer, 0.1, &cache_path, options).map_err(|e| e.to_string())?;
    let cache = pipeline::load_cache_for(&cache_path, &manifest, 0.1, &scorer.fingerprint(), true)
        .map_err(|e| e.to_string())?;
    let output = dir.join("selected.jsonl");
    pipeline::select_to_file(
        &input,
        &pairs,
        &manifest,
        Some(&cache),
        Method::RewardGap,
        &SelectionConfig::ratio(0.1),
        &output,
    )
    .map_err(|e| e.to_string())?;
    [cache_path, output.clone(), dataset::meta_path(&output)]
        .iter()
        .map(|p| std::fs::read(p).map_err(|e| e.to_string()))
        .collect()
}

fn a6_determinism() -> Outcome {
    let mut runs = Vec::new();
    for workers in [1, 1, 4, 4] {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        runs.push((workers, run_pipeline(dir.path(), workers)?));
    }
    let reference = &runs[0].1;
    for (workers, files) in &runs[1..] {
        for (name, (a, b)) in ["cache", "selection", "metadata"].iter().zip(reference.iter().zip(files)) {
            ensure!(a == b, "{name} differs with {workers} workers");
        }
    }
    Ok(format!(
        "cache, selection and metadata identical over 4 runs (workers 1, 1, 4, 4; {} cache bytes)",
        reference[0].len()
    ))
}

fn cache_of(gaps: &[(&str, f64)]) -> GapCache {
    let mut cache = GapCache::new(1.0, "fixed", "sha256:none");
    for &(id, gap) in gaps {
        cache.insert(RewardGapRecord::from_rewards(id, gap, 0.0, 1, 1, 1.0).unwrap()).unwrap();
    }
    cache
}

fn a7_ties_and_boundaries() -> Outcome {
    let cache = cache_of(&[("a", 0.5), ("b", -0.25), ("c", 0.125), ("d", 1.0)]);
    let sel = selector::select(&cache, &SelectionConfig::threshold(0.125).with_beta(1.0)).map_err(|e| e.to_string())?;
    ensure!(sel.selected_ids == ["b", "c"], "tau = 0.125 selected {:?}", sel.selected_ids);
    ensure!(sel.tau_effective == Some(0.125), "tau_effective {:?}", sel.tau_effective);

    let cache = cache_of(&[("x", 0.3), ("a", 0.1), ("b", 0.1), ("c", 0.1), ("y", -0.2)]);
    let ranked: Vec<&str> = rank_by_difficulty(&cache, Variant::Raw).iter().map(|r| r.id).collect();
    ensure!(ranked == ["y", "a", "b", "c", "x"], "tie order {ranked:?}");
    let sel = selector::select(&cache, &SelectionConfig::ratio(0.4).with_beta(1.0)).map_err(|e| e.to_string())?;
    ensure!(sel.selected_ids == ["y", "a"], "ratio 0.4 with ties selected {:?}", sel.selected_ids);

    let line = common::pair_line("same", "p", "identical", "identical");
    match dataset::read_pairs(line.as_bytes()) {
        Err(Error::Record { line: 1, .. }) => {}
        other => return Err(format!("chosen == rejected accepted: {other:?}")),
    }
    Ok("tau on a present gap included; equal gaps in input order; chosen == rejected rejected".into())
}

fn scored_cache(scripted: &[Scripted], beta: f64) -> Result<(Vec<PreferencePair>, GapCache), String> {
    let pairs: Vec<PreferencePair> = scripted.iter().map(Scripted::pair).collect();
    let store = LogProbStore::read(common::logprob_file(scripted).as_slice()).map_err(|e| e.to_string())?;
    let scorer = Scorer::new(FileBackend::new(store));
    let cache = compute_gap_records(&pairs, &scorer, beta, "sum", None, ComputeOptions::default())
        .map_err(|e| e.to_string())?
        .cache;
    Ok((pairs, cache))
}

fn a8_length_normalized() -> Outcome {
    // beta = 0.5; every value is dyadic so the arithmetic is exact.
    let cases: [NormCase; 10] = [
        ("n1", &[-1.0], &[-2.0], &[-2.0], &[-1.0], 1.0),
        ("n2", &[-0.5, -0.5], &[-1.0, -1.0], &[-1.0], &[-1.0], 0.25),
        ("n3", &[-1.0; 4], &[-2.0; 4], &[-3.0, -1.0], &[-1.0, -1.0], 1.0),
        ("n4", &[-0.25], &[-0.25], &[-0.5; 8], &[-0.25; 8], 0.125),
        ("n5", &[-2.0, -2.0], &[-1.0, -1.0], &[-1.0], &[-1.5], -0.75),
        ("n6", &[-0.125; 8], &[-0.625; 8], &[-1.0; 4], &[-0.5; 4], 0.5),
        ("n7", &[-3.0], &[-1.0], &[-1.0, -1.0], &[-2.0, -2.0], -1.5),
        ("n8", &[-1.0; 4], &[-1.5; 4], &[-1.0; 4], &[-1.5; 4], 0.0),
        ("n9", &[-0.5; 2], &[-0.75; 2], &[-4.0], &[-4.0], 0.125),
        ("n10", &[-1.0; 8], &[-1.25; 8], &[-1.0, -2.0], &[-1.0, -1.0], 0.375),
    ];
    let scripted: Vec<Scripted> =
        cases.iter().map(|(id, cp, cr, rp, rr, _)| Scripted::new(id, cp, cr, rp, rr)).collect();
    let (_, cache) = scored_cache(&scripted, 0.5)?;
    for (id, .., expected) in &cases {
        let got = cache.get(id).ok_or(format!("{id} missing"))?.gap_norm;
        ensure!(got == *expected, "{id}: gap_norm {got}, expected {expected}");
    }

    // Long pairs: big raw gap, small per-token gap. Short pairs: the reverse.
    let mut anti = Vec::new();
    for i in 0..4 {
        anti.push(Scripted::new(&format!("long{i}"), &[-1.0; 16], &[-1.125; 16], &[-1.0; 16], &[-1.0; 16]));
        anti.push(Scripted::new(&format!("short{i}"), &[-1.0], &[-2.0], &[-1.0], &[-1.0]));
    }
    let (_, cache) = scored_cache(&anti, 0.5)?;
    let pick = |variant| -> Result<HashSet<String>, String> {
        let config = SelectionConfig::ratio(0.5).with_beta(0.5).with_variant(variant);
        Ok(selector::select(&cache, &config).map_err(|e| e.to_string())?.selected_ids.into_iter().collect())
    };
    let raw = pick(Variant::Raw)?;
    let norm = pick(Variant::LengthNormalized)?;
    ensure!(raw != norm, "raw and normalized selections coincide: {raw:?}");
    Ok(format!(
        "10 hand-computed gap_norm values exact; raw picks {} short pairs, norm picks {} long pairs",
        raw.iter().filter(|id| id.starts_with("short")).count(),
        norm.iter().filter(|id| id.starts_with("long")).count()
    ))
}

fn selection(method: &str, ids: Vec<String>, total: usize) -> SelectionResult {
    SelectionResult {
        method: method.into(),
        selected_ids: ids,
        tau_effective: None,
        total_count: total,
        dataset_checksum: "sha256:none".into(),
        config: SelectionConfig::default(),
    }
}

fn random_subset(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    let k = rng.gen_range(0..=n);
    let mut idx = sample(rng, n, k).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| format!("p{i}")).collect()
}

fn a9_analytics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for scenario in 0..20 {
        let n = rng.gen_range(20..400);
        let ours = selection("ours", random_subset(&mut rng, n), n);
        let baselines: Vec<SelectionResult> = (0..rng.gen_range(1..=5))
            .map(|j| selection(&format!("b{j}"), random_subset(&mut rng, n), n))
            .collect();
        let report = overlap_report(&ours, &baselines).map_err(|e| e.to_string())?;
        ensure!(
            report.total() == ours.selected_count(),
            "scenario {scenario}: buckets sum to {} not {}",
            report.total(),
            ours.selected_count()
        );
        let mut oracle: HashMap<usize, usize> = HashMap::new();
        for id in &ours.selected_ids {
            let others = baselines.iter().filter(|b| b.selected_ids.contains(id)).count();
            *oracle.entry(others).or_default() += 1;
        }
        for j in 0..=baselines.len() {
            let want = oracle.get(&j).copied().unwrap_or(0);
            ensure!(report.count(j) == want, "scenario {scenario}: {j} others -> {} vs {want}", report.count(j));
        }
    }

    let mut cache = GapCache::new(1.0, "fixed", "sha256:none");
    cache.insert(RewardGapRecord::from_rewards("a", 1.0, 0.0, 10, 4, 1.0).unwrap()).unwrap();
    cache.insert(RewardGapRecord::from_rewards("b", 2.0, 0.0, 20, 7, 1.0).unwrap()).unwrap();
    let full = length_stats(&cache, None, "full").map_err(|e| e.to_string())?;
    ensure!(
        (full.avg_tokens_chosen, full.avg_tokens_rejected) == (15.0, 5.5),
        "full lengths {full:?}"
    );
    let one = selection("ours", vec!["b".into()], 2);
    let sub = length_stats(&cache, Some(&one), "ours").map_err(|e| e.to_string())?;
    ensure!((sub.avg_tokens_chosen, sub.avg_tokens_rejected) == (20.0, 7.0), "subset lengths {sub:?}");

    // Hard pairs are long: tiny per-token margin over many tokens.
    let mut scripted = Vec::new();
    for i in 0..100 {
        if i % 5 == 0 {
            scripted.push(Scripted::new(&format!("h{i}"), &[-1.0; 40], &[-1.0; 40], &[-1.0; 40], &[-1.0; 40]));
        } else {
            scripted.push(Scripted::new(&format!("e{i}"), &[-1.0; 10], &[-2.0; 10], &[-2.0; 10], &[-1.0; 10]));
        }
    }
    let (_, cache) = scored_cache(&scripted, 0.1)?;
    let ours = selector::select(&cache, &SelectionConfig::ratio(0.2)).map_err(|e| e.to_string())?;
    let full = length_stats(&cache, None, "full").map_err(|e| e.to_string())?;
    let sel = length_stats(&cache, Some(&ours), "ours").map_err(|e| e.to_string())?;
    ensure!(
        sel.avg_tokens_chosen > full.avg_tokens_chosen && sel.avg_tokens_rejected > full.avg_tokens_rejected,
        "selected {sel:?} not longer than full {full:?}"
    );
    Ok(format!(
        "20 overlap scenarios match recount; hand lengths exact; selected avg {:.1}/{:.1} > full {:.1}/{:.1}",
        sel.avg_tokens_chosen, sel.avg_tokens_rejected, full.avg_tokens_chosen, full.avg_tokens_rejected
    ))
}

fn time_scoring(pairs: &[PreferencePair], seed: u64) -> Duration {
    let scorer = Scorer::new(ToyBackend::seeded(seed));
    let start = Instant::now();
    let out = compute_gap_records(pairs, &scorer, 0.1, "sum", None, ComputeOptions::default()).unwrap();
    let elapsed = start.elapsed();
    assert_eq!(out.cache.len(), pairs.len());
    elapsed
}

fn a10_scale() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let cache = random_cache(&mut rng, 1_000_000);
    let start = Instant::now();
    let ranked_select = selector::select(&cache, &SelectionConfig::ratio(0.1)).map_err(|e| e.to_string())?;
    let thresholded = selector::select(&cache, &SelectionConfig::threshold(0.0)).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure!(ranked_select.selected_count() == 100_000, "selected {}", ranked_select.selected_count());
    ensure!(thresholded.selected_count() > 0, "threshold selected nothing");
    ensure!(elapsed < Duration::from_secs(10), "rank + select of 1e6 records took {elapsed:?}");
    drop(cache);

    let seed = 10;
    let small = synthetic_pairs(10_000, seed);
    let large = synthetic_pairs(100_000, seed);
    let best = |pairs: &[PreferencePair]| (0..3).map(|_| time_scoring(pairs, seed)).min().unwrap();
    let t_small = best(&small);
    let t_large = best(&large);
    let ratio = t_large.as_secs_f64() / t_small.as_secs_f64();

    let rss = peak_rss_bytes().ok_or("peak RSS unavailable")?;
    ensure!(rss < 1 << 30, "peak resident memory {} MiB", rss >> 20);
    ensure!((8.0..=12.0).contains(&ratio), "scoring 1e5 vs 1e4 pairs: {t_large:?} / {t_small:?} = {ratio:.2}");
    Ok(format!(
        "1e6 rank+select (ratio and threshold) in {elapsed:.2?}, peak RSS {} MiB; scoring 1e4 {t_small:.2?}, 1e5 {t_large:.2?}, ratio {ratio:.2}",
        rss >> 20
    ))
}
