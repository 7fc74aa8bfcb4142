//! Reporting over selections and caches: overlap between methods, response
//! lengths, ratio sweeps and gap histograms.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{self, PreferencePair, SelectionMeta};
use crate::error::{Error, Result};
use crate::gap::GapCache;
use crate::selector::{self, Mode, SelectionConfig, SelectionResult, Variant};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapBucket {
    pub label: String,
    /// How many other methods also selected these pairs.
    pub others: usize,
    pub count: usize,
}

/// Our selection broken down by how many baselines agree with each pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub method_names: Vec<String>,
    pub buckets: Vec<OverlapBucket>,
}

impl OverlapReport {
    pub fn total(&self) -> usize {
        self.buckets.iter().map(|b| b.count).sum()
    }

    pub fn count(&self, others: usize) -> usize {
        self.buckets
            .iter()
            .find(|b| b.others == others)
            .map_or(0, |b| b.count)
    }
}

fn bucket_label(others: usize, baselines: usize) -> String {
    match others {
        0 => "only ours".to_string(),
        j if j == baselines => "all".to_string(),
        j => format!("ours+{j}"),
    }
}

fn ensure_same_dataset(a: &SelectionResult, b: &SelectionResult) -> Result<()> {
    if a.dataset_checksum != b.dataset_checksum || a.total_count != b.total_count {
        return Err(Error::Consistency(format!(
            "selections {:?} and {:?} come from different datasets ({} vs {})",
            a.method, b.method, a.dataset_checksum, b.dataset_checksum
        )));
    }
    Ok(())
}

pub fn overlap_report(ours: &SelectionResult, baselines: &[SelectionResult]) -> Result<OverlapReport> {
    for other in baselines {
        ensure_same_dataset(ours, other)?;
    }
    let sets: Vec<HashSet<&str>> = baselines
        .iter()
        .map(|b| b.selected_ids.iter().map(String::as_str).collect())
        .collect();
    let k = baselines.len();
    let mut counts = vec![0usize; k + 1];
    for id in &ours.selected_ids {
        let agreeing = sets.iter().filter(|s| s.contains(id.as_str())).count();
        counts[agreeing] += 1;
    }
    Ok(OverlapReport {
        method_names: std::iter::once(&ours.method)
            .chain(baselines.iter().map(|b| &b.method))
            .cloned()
            .collect(),
        buckets: counts
            .into_iter()
            .enumerate()
            .map(|(others, count)| OverlapBucket {
                label: bucket_label(others, k),
                others,
                count,
            })
            .collect(),
    })
}

impl fmt::Display for OverlapReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let total = self.total().max(1) as f64;
        writeln!(f, "overlap of {} with {:?}", self.method_names[0], &self.method_names[1..])?;
        writeln!(f, "{:<12} {:>8} {:>8}", "agreement", "pairs", "share")?;
        for b in self.buckets.iter().rev() {
            writeln!(
                f,
                "{:<12} {:>8} {:>7.1}%",
                b.label,
                b.count,
                100.0 * b.count as f64 / total
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub subset_label: String,
    pub pair_count: usize,
    pub avg_tokens_chosen: f64,
    pub avg_tokens_rejected: f64,
}

/// Mean scorer token counts of chosen and rejected responses, over the
/// whole cache or over one selection.
pub fn length_stats(
    cache: &GapCache,
    selection: Option<&SelectionResult>,
    label: impl Into<String>,
) -> Result<LengthStats> {
    let label = label.into();
    let mut n = 0usize;
    let (mut sum_w, mut sum_l) = (0u64, 0u64);
    let mut add = |len_w: usize, len_l: usize| {
        n += 1;
        sum_w += len_w as u64;
        sum_l += len_l as u64;
    };
    match selection {
        None => cache.records().iter().for_each(|r| add(r.len_w, r.len_l)),
        Some(sel) => {
            for id in &sel.selected_ids {
                let r = cache.get(id).ok_or_else(|| {
                    Error::Consistency(format!("selected pair {id:?} has no cached token counts"))
                })?;
                add(r.len_w, r.len_l);
            }
        }
    }
    if n == 0 {
        return Err(Error::Degenerate(format!("no pairs in subset {label:?}")));
    }
    Ok(LengthStats {
        subset_label: label,
        pair_count: n,
        avg_tokens_chosen: sum_w as f64 / n as f64,
        avg_tokens_rejected: sum_l as f64 / n as f64,
    })
}

pub fn format_length_table(stats: &[LengthStats]) -> String {
    let mut out = format!("{:<20} {:>8} {:>12} {:>12}\n", "subset", "pairs", "avg tok (W)", "avg tok (L)");
    for s in stats {
        out.push_str(&format!(
            "{:<20} {:>8} {:>12.2} {:>12.2}\n",
            s.subset_label, s.pair_count, s.avg_tokens_chosen, s.avg_tokens_rejected
        ));
    }
    out
}

/// Equal-width histogram of gaps. When every gap is identical there is a
/// single bin of zero width holding all pairs, whatever `bins` asked for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub variant: Variant,
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

pub fn gap_histogram(cache: &GapCache, variant: Variant, bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    let gaps: Vec<f64> = cache.records().iter().map(|r| r.gap(variant)).collect();
    histogram(&gaps, bins, variant)
}

fn histogram(gaps: &[f64], bins: usize, variant: Variant) -> Result<Histogram> {
    let (min, max) = gaps
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &g| (lo.min(g), hi.max(g)));
    if gaps.is_empty() {
        return Err(Error::Degenerate("histogram of an empty cache".into()));
    }
    if min == max {
        return Ok(Histogram {
            variant,
            edges: vec![min, max],
            counts: vec![gaps.len()],
        });
    }
    let width = (max - min) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| min + width * i as f64).collect();
    edges.push(max);
    let mut counts = vec![0usize; bins];
    for &g in gaps {
        let i = (((g - min) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    Ok(Histogram {
        variant,
        edges,
        counts,
    })
}

impl fmt::Display for Histogram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let peak = self.counts.iter().copied().max().unwrap_or(0).max(1);
        writeln!(f, "gap histogram ({})", self.variant)?;
        for (i, &c) in self.counts.iter().enumerate() {
            let bar = "#".repeat((40 * c).div_ceil(peak));
            writeln!(
                f,
                "[{:>10.4}, {:>10.4}] {:>8} {}",
                self.edges[i],
                self.edges[i + 1],
                c,
                bar
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub ratio: f64,
    pub k: usize,
    pub tau_effective: Option<f64>,
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepManifest {
    pub beta: f64,
    pub variant: Variant,
    pub total_count: usize,
    pub dataset_checksum: String,
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_MANIFEST_NAME: &str = "sweep_manifest.json";

/// One ratio selection per entry of `ratios`, checked to be nested.
pub fn sweep_selections(
    cache: &GapCache,
    ratios: &[f64],
    base: &SelectionConfig,
) -> Result<Vec<SelectionResult>> {
    let mut sorted = ratios.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("sweep ratios must be distinct".into()));
    }
    let results = ratios
        .iter()
        .map(|&rho| {
            let config = SelectionConfig {
                mode: Mode::Ratio(rho),
                ..base.clone()
            };
            selector::select(cache, &config)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut by_ratio: Vec<&SelectionResult> = results.iter().collect();
    by_ratio.sort_by(|a, b| a.config.rho().unwrap().total_cmp(&b.config.rho().unwrap()));
    for w in by_ratio.windows(2) {
        let larger: HashSet<&str> = w[1].selected_ids.iter().map(String::as_str).collect();
        if let Some(id) = w[0].selected_ids.iter().find(|id| !larger.contains(id.as_str())) {
            return Err(Error::Consistency(format!(
                "pair {id:?} selected at ratio {} but not at {}",
                w[0].config.rho().unwrap(),
                w[1].config.rho().unwrap()
            )));
        }
    }
    Ok(results)
}

pub fn sweep_output_name(ratio: f64) -> String {
    format!("select_rho{ratio}.jsonl")
}

/// Writes one selection file (plus sidecar) per ratio into `out_dir`, and
/// a manifest summarizing them.
pub fn sweep(
    cache: &GapCache,
    pairs: &[PreferencePair],
    ratios: &[f64],
    base: &SelectionConfig,
    out_dir: &Path,
) -> Result<SweepManifest> {
    let results = sweep_selections(cache, ratios, base)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut rows = Vec::with_capacity(results.len());
    for result in &results {
        let ratio = result.config.rho().expect("sweep selections use ratios");
        let output = out_dir.join(sweep_output_name(ratio));
        let file = File::create(&output).map_err(|e| Error::io(&output, e))?;
        dataset::write_selection(result, pairs.iter().cloned().map(Ok), BufWriter::new(file))?;
        dataset::write_meta(&output, &SelectionMeta::from_result(result))?;
        rows.push(SweepRow {
            ratio,
            k: result.selected_count(),
            tau_effective: result.tau_effective,
            output,
        });
    }
    let manifest = SweepManifest {
        beta: base.beta,
        variant: base.variant,
        total_count: cache.len(),
        dataset_checksum: cache.dataset_checksum().to_string(),
        rows,
    };
    let path = out_dir.join(SWEEP_MANIFEST_NAME);
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::io(&path, e.into()))?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
