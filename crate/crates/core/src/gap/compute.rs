use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{reward_gap, GapCache, RewardGapRecord};
use crate::dataset::PreferencePair;
use crate::error::{Error, Result};
use crate::logprob::Scorer;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComputeOptions {
    /// Scoring threads; 0 uses rayon's default.
    pub workers: usize,
    /// Fail the whole run if any pair fails.
    pub strict: bool,
}

impl Default for ComputeOptions {
    fn default() -> Self {
        ComputeOptions {
            workers: 1,
            strict: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairFailure {
    pub pair_id: String,
    pub error: String,
}

#[derive(Debug)]
pub struct ComputeOutcome {
    pub cache: GapCache,
    /// Empty unless running permissively.
    pub failures: Vec<PairFailure>,
    pub scored: usize,
    pub reused: usize,
}

/// Fills a gap cache for `pairs`, scoring only pairs absent from `existing`.
///
/// Scoring fans out over `options.workers` threads; the output cache is
/// assembled afterwards in dataset order, so its contents do not depend on
/// the worker count.
pub fn compute_gap_records(
    pairs: &[PreferencePair],
    scorer: &Scorer,
    beta: f64,
    dataset_checksum: &str,
    existing: Option<GapCache>,
    options: ComputeOptions,
) -> Result<ComputeOutcome> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::Config(format!("beta must be positive, got {beta}")));
    }
    let fingerprint = scorer.fingerprint();
    if let Some(cache) = &existing {
        cache.ensure_compatible(beta, &fingerprint, dataset_checksum)?;
    }

    let pending: Vec<usize> = (0..pairs.len())
        .filter(|&i| !existing.as_ref().is_some_and(|c| c.contains(&pairs[i].id)))
        .collect();

    let score = |&i: &usize| reward_gap(&pairs[i], scorer, beta);
    let results: Vec<Result<RewardGapRecord>> = if options.workers == 1 || pending.len() < 2 {
        pending.iter().map(score).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.workers)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        pool.install(|| pending.par_iter().map(score).collect())
    };

    let mut fresh = pending.iter().zip(results).peekable();
    let mut cache = GapCache::new(beta, fingerprint, dataset_checksum);
    cache.reserve(pairs.len());
    let mut failures = Vec::new();
    let mut reused = 0;
    for (i, pair) in pairs.iter().enumerate() {
        if let Some((_, result)) = fresh.next_if(|(&j, _)| j == i) {
            match result {
                Ok(record) => cache.insert(record)?,
                Err(e) => failures.push(PairFailure {
                    pair_id: pair.id.clone(),
                    error: e.to_string(),
                }),
            }
        } else if let Some(record) = existing.as_ref().and_then(|c| c.get(&pair.id)) {
            cache.insert(record.clone())?;
            reused += 1;
        }
    }

    if options.strict && !failures.is_empty() {
        return Err(Error::PairFailures {
            failures: failures.into_iter().map(|f| (f.pair_id, f.error)).collect(),
        });
    }
    Ok(ComputeOutcome {
        scored: pending.len() - failures.len(),
        cache,
        failures,
        reused,
    })
}
