//! File-level workflow: score a dataset into a gap cache, select from the
//! cache into a pair file with metadata sidecar, and report on selections.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analytics::{self, Histogram, LengthStats, OverlapReport};
use crate::dataset::{self, DatasetManifest, PreferencePair, SelectionMeta};
use crate::error::{Error, Result};
use crate::gap::{compute_gap_records, ComputeOptions, GapCache, PairFailure};
use crate::logprob::{BackendSpec, FileBackend, Scorer, StatsSnapshot};
use crate::selector::{self, Mode, SelectionConfig, SelectionResult, Variant};

/// Selection strategies available from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    RewardGap,
    Random,
    Compression,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gap" | "reward_gap" => Ok(Method::RewardGap),
            "random" => Ok(Method::Random),
            "compression" | "zip" => Ok(Method::Compression),
            _ => Err(Error::Config(format!(
                "unknown method {s:?} (expected gap, random or compression)"
            ))),
        }
    }
}

/// Builds the scorer for `spec`. Precomputed files are checked for
/// completeness against `pairs` before any scoring starts; in permissive
/// mode gaps surface later as per-pair failures instead.
pub fn build_scorer(spec: &BackendSpec, pairs: &[PreferencePair], strict: bool) -> Result<Scorer> {
    match spec {
        BackendSpec::File(path) => {
            let store = crate::logprob::load_precomputed(path)?;
            if strict {
                store.check_complete(pairs.iter().map(|p| p.id.as_str()))?;
            }
            Ok(Scorer::new(FileBackend::new(store)))
        }
        other => Ok(Scorer::from_boxed(other.build()?)),
    }
}

pub fn default_cache_path(input: &Path) -> PathBuf {
    let mut s = input.as_os_str().to_os_string();
    s.push(".gaps.jsonl");
    PathBuf::from(s)
}

pub fn errors_path(cache: &Path) -> PathBuf {
    let mut s = cache.as_os_str().to_os_string();
    s.push(".errors");
    PathBuf::from(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct ScoreSummary {
    pub pairs: usize,
    pub scored: usize,
    pub reused: usize,
    pub failures: Vec<PairFailure>,
    pub calls: StatsSnapshot,
    pub cache_path: PathBuf,
}

/// Scores `pairs` into the cache at `cache_path`, reusing any compatible
/// records already there.
pub fn score_pairs(
    pairs: &[PreferencePair],
    manifest: &DatasetManifest,
    scorer: &Scorer,
    beta: f64,
    cache_path: &Path,
    options: ComputeOptions,
) -> Result<ScoreSummary> {
    let existing = if cache_path.exists() {
        Some(GapCache::load(cache_path)?)
    } else {
        None
    };
    let before = scorer.stats();
    let outcome = compute_gap_records(pairs, scorer, beta, &manifest.checksum, existing, options)?;
    outcome.cache.save(cache_path)?;
    let errors = errors_path(cache_path);
    if outcome.failures.is_empty() {
        if errors.exists() {
            std::fs::remove_file(&errors).map_err(|e| Error::io(&errors, e))?;
        }
    } else {
        write_jsonl(&errors, &outcome.failures)?;
    }
    let after = scorer.stats();
    Ok(ScoreSummary {
        pairs: pairs.len(),
        scored: outcome.scored,
        reused: outcome.reused,
        failures: outcome.failures,
        calls: diff(after, before),
        cache_path: cache_path.to_path_buf(),
    })
}

fn diff(a: StatsSnapshot, b: StatsSnapshot) -> StatsSnapshot {
    StatsSnapshot {
        policy_chosen: a.policy_chosen - b.policy_chosen,
        policy_rejected: a.policy_rejected - b.policy_rejected,
        reference_chosen: a.reference_chosen - b.reference_chosen,
        reference_rejected: a.reference_rejected - b.reference_rejected,
        total_tokens: a.total_tokens - b.total_tokens,
    }
}

/// Loads the cache for a dataset and checks it against the active
/// configuration. A cache missing pairs is only accepted when `strict` is off.
pub fn load_cache_for(
    cache_path: &Path,
    manifest: &DatasetManifest,
    beta: f64,
    backend_fingerprint: &str,
    strict: bool,
) -> Result<GapCache> {
    let cache = GapCache::load(cache_path)?;
    cache.ensure_compatible(beta, backend_fingerprint, &manifest.checksum)?;
    if strict && cache.len() != manifest.pair_count {
        return Err(Error::Consistency(format!(
            "cache holds {} of {} pairs; rerun scoring or select permissively",
            cache.len(),
            manifest.pair_count
        )));
    }
    Ok(cache)
}

/// Runs `method` and writes the selected pairs plus `<output>.meta`.
pub fn select_to_file(
    input: &Path,
    pairs: &[PreferencePair],
    manifest: &DatasetManifest,
    cache: Option<&GapCache>,
    method: Method,
    config: &SelectionConfig,
    output: &Path,
) -> Result<SelectionResult> {
    let result = match method {
        Method::RewardGap => {
            let cache = cache.ok_or_else(|| Error::Config("gap selection needs a cache".into()))?;
            selector::select(cache, config)?
        }
        Method::Random => selector::random_baseline(pairs, config, &manifest.checksum)?,
        Method::Compression => selector::compression_baseline(pairs, config, &manifest.checksum)?,
    };
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = File::create(output).map_err(|e| Error::io(output, e))?;
    dataset::write_selection(&result, dataset::open_pairs(input)?, BufWriter::new(file))?;
    dataset::write_meta(output, &SelectionMeta::from_result(&result))?;
    Ok(result)
}

/// Reads a selection file and its sidecar back into a [`SelectionResult`].
pub fn read_selection(path: &Path) -> Result<SelectionResult> {
    let meta = dataset::read_meta(path)?;
    let (pairs, _) = dataset::load_pairs(path)?;
    if pairs.len() != meta.selected_count {
        return Err(Error::Consistency(format!(
            "{} holds {} pairs but its metadata says {}",
            path.display(),
            pairs.len(),
            meta.selected_count
        )));
    }
    let mode = match (meta.rho, meta.tau) {
        (Some(rho), _) => Mode::Ratio(rho),
        (None, Some(tau)) => Mode::Threshold(tau),
        (None, None) => {
            return Err(Error::Consistency(format!(
                "{}: metadata has neither rho nor tau",
                path.display()
            )))
        }
    };
    Ok(SelectionResult {
        method: meta.method,
        selected_ids: pairs.into_iter().map(|p| p.id).collect(),
        tau_effective: meta.tau,
        total_count: meta.total_count,
        dataset_checksum: meta.input_checksum,
        config: SelectionConfig {
            beta: meta.beta,
            mode,
            variant: meta.variant.parse()?,
            ..SelectionConfig::default()
        },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StatsReport {
    pub overlap: OverlapReport,
    pub lengths: Vec<LengthStats>,
    pub histogram: Histogram,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct HistogramBin {
    lo: f64,
    hi: f64,
    count: usize,
}

/// Overlap of the first selection with the rest, length statistics and the
/// cache's gap histogram, written as line-delimited reports into `report_dir`.
pub fn stats_to_files(
    cache: &GapCache,
    selections: &[SelectionResult],
    variant: Variant,
    bins: usize,
    report_dir: &Path,
) -> Result<StatsReport> {
    let (ours, baselines) = selections
        .split_first()
        .ok_or_else(|| Error::Config("stats needs at least one selection".into()))?;
    for s in selections {
        if s.dataset_checksum != cache.dataset_checksum() {
            return Err(Error::Consistency(format!(
                "selection {:?} was drawn from dataset {}, cache is for {}",
                s.method,
                s.dataset_checksum,
                cache.dataset_checksum()
            )));
        }
    }
    let overlap = analytics::overlap_report(ours, baselines)?;

    let mut lengths = vec![analytics::length_stats(cache, None, "full")?];
    for s in selections {
        lengths.push(analytics::length_stats(cache, Some(s), s.method.clone())?);
    }
    if !baselines.is_empty() {
        let others: std::collections::HashSet<&str> = baselines
            .iter()
            .flat_map(|b| b.selected_ids.iter().map(String::as_str))
            .collect();
        let unique = SelectionResult {
            selected_ids: ours
                .selected_ids
                .iter()
                .filter(|id| !others.contains(id.as_str()))
                .cloned()
                .collect(),
            ..ours.clone()
        };
        if unique.selected_count() > 0 {
            lengths.push(analytics::length_stats(cache, Some(&unique), format!("unique to {}", ours.method))?);
        }
    }
    let histogram = analytics::gap_histogram(cache, variant, bins)?;

    std::fs::create_dir_all(report_dir).map_err(|e| Error::io(report_dir, e))?;
    let overlap_path = report_dir.join("overlap.jsonl");
    let lengths_path = report_dir.join("lengths.jsonl");
    let histogram_path = report_dir.join("histogram.jsonl");
    write_jsonl(&overlap_path, &overlap.buckets)?;
    write_jsonl(&lengths_path, &lengths)?;
    let bins_out: Vec<HistogramBin> = histogram
        .counts
        .iter()
        .enumerate()
        .map(|(i, &count)| HistogramBin {
            lo: histogram.edges[i],
            hi: histogram.edges[i + 1],
            count,
        })
        .collect();
    write_jsonl(&histogram_path, &bins_out)?;

    Ok(StatsReport {
        overlap,
        lengths,
        histogram,
        files: vec![overlap_path, lengths_path, histogram_path],
    })
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut out, row).map_err(|e| Error::io(path, e.into()))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
