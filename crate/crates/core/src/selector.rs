//! Difficulty ranking and subset selection.
//!
//! Pairs are ranked by ascending gap with ties kept in dataset order, so
//! every gap-based selection is a prefix of the ranking. Ratio selection
//! takes exactly `⌈ρ·N⌉` pairs (nearest-rank quantile); threshold selection
//! takes every pair with `gap <= τ`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use flate2::write::DeflateEncoder;
use flate2::Compression;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::PreferencePair;
use crate::error::{Error, Result};
use crate::gap::{GapCache, DEFAULT_BETA};

pub const DEFAULT_RATIO: f64 = 0.10;

pub const METHOD_REWARD_GAP: &str = "reward_gap";
pub const METHOD_RANDOM: &str = "random";
pub const METHOD_COMPRESSION: &str = "compression";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Variant {
    #[default]
    #[serde(rename = "raw")]
    Raw,
    #[serde(rename = "norm", alias = "length_normalized")]
    LengthNormalized,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Raw => "raw",
            Variant::LengthNormalized => "norm",
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Variant::Raw),
            "norm" | "normalized" | "length_normalized" => Ok(Variant::LengthNormalized),
            _ => Err(Error::Config(format!("unknown gap variant {s:?} (expected raw or norm)"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Ratio(f64),
    Threshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    ByInputOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub beta: f64,
    pub mode: Mode,
    pub variant: Variant,
    pub tie_break: TieBreak,
    /// Only used by the random baseline.
    pub seed: u64,
    /// Drop pairs with negative gap before ranking.
    pub exclude_inverted: bool,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            beta: DEFAULT_BETA,
            mode: Mode::Ratio(DEFAULT_RATIO),
            variant: Variant::Raw,
            tie_break: TieBreak::ByInputOrder,
            seed: 0,
            exclude_inverted: false,
        }
    }
}

impl SelectionConfig {
    pub fn ratio(rho: f64) -> Self {
        SelectionConfig {
            mode: Mode::Ratio(rho),
            ..Default::default()
        }
    }

    pub fn threshold(tau: f64) -> Self {
        SelectionConfig {
            mode: Mode::Threshold(tau),
            ..Default::default()
        }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn rho(&self) -> Option<f64> {
        match self.mode {
            Mode::Ratio(rho) => Some(rho),
            Mode::Threshold(_) => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::Config(format!("beta must be positive, got {}", self.beta)));
        }
        match self.mode {
            Mode::Ratio(rho) if !(rho > 0.0 && rho < 1.0) => Err(Error::Config(format!(
                "ratio must lie strictly between 0 and 1, got {rho}"
            ))),
            Mode::Threshold(tau) if !tau.is_finite() => {
                Err(Error::Config(format!("threshold must be finite, got {tau}")))
            }
            _ => Ok(()),
        }
    }

    fn require_ratio(&self) -> Result<f64> {
        self.validate()?;
        self.rho()
            .ok_or_else(|| Error::Config("baseline selection needs a ratio, not a threshold".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub method: String,
    /// Hardest first for gap selections.
    pub selected_ids: Vec<String>,
    /// Largest gap admitted; `None` for baselines and empty ratio selections.
    pub tau_effective: Option<f64>,
    pub total_count: usize,
    pub dataset_checksum: String,
    pub config: SelectionConfig,
}

impl SelectionResult {
    pub fn selected_count(&self) -> usize {
        self.selected_ids.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedPair<'a> {
    pub id: &'a str,
    pub gap: f64,
}

/// Stable ascending sort of the cache's records on the chosen gap.
pub fn rank_by_difficulty(cache: &GapCache, variant: Variant) -> Vec<RankedPair<'_>> {
    let mut ranked: Vec<RankedPair<'_>> = cache
        .records()
        .iter()
        .map(|r| RankedPair {
            id: &r.pair_id,
            gap: r.gap(variant),
        })
        .collect();
    ranked.sort_by(|a, b| a.gap.total_cmp(&b.gap));
    ranked
}

/// A selection over a ranking: its first `count` entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prefix {
    pub count: usize,
    pub tau_effective: Option<f64>,
}

/// Every pair with `gap <= tau`.
pub fn select_by_threshold(ranked: &[RankedPair<'_>], tau: f64) -> Prefix {
    Prefix {
        count: ranked.partition_point(|p| p.gap <= tau),
        tau_effective: Some(tau),
    }
}

/// The `⌈ρ·N⌉` smallest gaps.
pub fn select_by_ratio(ranked: &[RankedPair<'_>], rho: f64) -> Prefix {
    let count = ratio_count(ranked.len(), rho);
    Prefix {
        count,
        tau_effective: count.checked_sub(1).map(|k| ranked[k].gap),
    }
}

/// `⌈ρ·n⌉`, clamped to `n`. Products within 1e-9 (relative) of an integer
/// count as that integer so that e.g. `0.3 × 10` gives 3 rather than 4.
pub fn ratio_count(n: usize, rho: f64) -> usize {
    let x = rho * n as f64;
    let nearest = x.round();
    let k = if (x - nearest).abs() <= 1e-9 * x.max(1.0) {
        nearest
    } else {
        x.ceil()
    };
    (k.max(0.0) as usize).min(n)
}

/// Ranks the cache and applies `config`'s mode.
pub fn select(cache: &GapCache, config: &SelectionConfig) -> Result<SelectionResult> {
    config.validate()?;
    if cache.beta() != config.beta {
        return Err(Error::StaleCache(format!(
            "cache was computed with beta {}, selection asks for {}",
            cache.beta(),
            config.beta
        )));
    }
    let mut ranked = rank_by_difficulty(cache, config.variant);
    if config.exclude_inverted {
        ranked.retain(|p| p.gap >= 0.0);
    }
    let prefix = match config.mode {
        Mode::Ratio(rho) => select_by_ratio(&ranked, rho),
        Mode::Threshold(tau) => select_by_threshold(&ranked, tau),
    };
    Ok(SelectionResult {
        method: METHOD_REWARD_GAP.to_string(),
        selected_ids: ranked[..prefix.count].iter().map(|p| p.id.to_string()).collect(),
        tau_effective: prefix.tau_effective,
        total_count: cache.len(),
        dataset_checksum: cache.dataset_checksum().to_string(),
        config: config.clone(),
    })
}

/// Uniform sample of `⌈ρ·N⌉` pairs without replacement, listed in dataset order.
pub fn random_baseline(
    pairs: &[PreferencePair],
    config: &SelectionConfig,
    dataset_checksum: &str,
) -> Result<SelectionResult> {
    let rho = config.require_ratio()?;
    let k = ratio_count(pairs.len(), rho);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut picked = index::sample(&mut rng, pairs.len(), k).into_vec();
    picked.sort_unstable();
    Ok(SelectionResult {
        method: METHOD_RANDOM.to_string(),
        selected_ids: picked.into_iter().map(|i| pairs[i].id.clone()).collect(),
        tau_effective: None,
        total_count: pairs.len(),
        dataset_checksum: dataset_checksum.to_string(),
        config: config.clone(),
    })
}

/// Compressed size over raw size of `bytes` under DEFLATE at level 9.
pub fn compression_ratio(bytes: &[u8]) -> f64 {
    if bytes.is_empty() {
        return 1.0;
    }
    let mut encoder = DeflateEncoder::new(Vec::with_capacity(bytes.len() / 2), Compression::best());
    encoder.write_all(bytes).expect("writing to a Vec cannot fail");
    let compressed = encoder.finish().expect("writing to a Vec cannot fail");
    compressed.len() as f64 / bytes.len() as f64
}

/// Compression ratio of `prompt + chosen + rejected`.
pub fn pair_compression_ratio(pair: &PreferencePair) -> f64 {
    let mut text = Vec::with_capacity(pair.prompt.len() + pair.chosen.len() + pair.rejected.len());
    text.extend_from_slice(pair.prompt.as_bytes());
    text.extend_from_slice(pair.chosen.as_bytes());
    text.extend_from_slice(pair.rejected.as_bytes());
    compression_ratio(&text)
}

/// Single-pass compression baseline: the `⌈ρ·N⌉` least compressible pairs
/// (highest compressed/raw ratio) first, ties in dataset order.
pub fn compression_baseline(
    pairs: &[PreferencePair],
    config: &SelectionConfig,
    dataset_checksum: &str,
) -> Result<SelectionResult> {
    let rho = config.require_ratio()?;
    let ratios: Vec<f64> = pairs.par_iter().map(pair_compression_ratio).collect();
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| ratios[b].total_cmp(&ratios[a]));
    let k = ratio_count(pairs.len(), rho);
    Ok(SelectionResult {
        method: METHOD_COMPRESSION.to_string(),
        selected_ids: order[..k].iter().map(|&i| pairs[i].id.clone()).collect(),
        tau_effective: None,
        total_count: pairs.len(),
        dataset_checksum: dataset_checksum.to_string(),
        config: config.clone(),
    })
}
