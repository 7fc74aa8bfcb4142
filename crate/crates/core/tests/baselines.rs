use std::collections::HashSet;
use std::io::Write;

use flate2::write::DeflateEncoder;
use flate2::Compression;

use hardpref_core::selector::{compression_baseline, random_baseline};
use hardpref_core::synthetic::synthetic_pairs;
use hardpref_core::{PreferencePair, SelectionConfig};

fn config(rho: f64, seed: u64) -> SelectionConfig {
    SelectionConfig {
        seed,
        ..SelectionConfig::ratio(rho)
    }
}

#[test]
fn random_overlap_is_hypergeometric() {
    let pairs = synthetic_pairs(1000, 1);
    let rho = 0.2;
    let k: f64 = 200.0;
    let n: f64 = 1000.0;
    // Overlap of two independent k-subsets of n items.
    let mean = k * k / n;
    let var = k * (k / n) * ((n - k) / n) * ((n - k) / (n - 1.0));
    let sd = var.sqrt();

    let a = random_baseline(&pairs, &config(rho, 11), "s").unwrap();
    for seed in 12..32 {
        let b = random_baseline(&pairs, &config(rho, seed), "s").unwrap();
        assert_ne!(a.selected_ids, b.selected_ids);
        let a_ids: HashSet<&String> = a.selected_ids.iter().collect();
        let overlap = b.selected_ids.iter().filter(|id| a_ids.contains(id)).count() as f64;
        assert!(
            (overlap - mean).abs() <= 3.0 * sd,
            "seed {seed}: overlap {overlap}, expected {mean} ± {}",
            3.0 * sd
        );
    }
}

#[test]
fn random_is_reproducible_and_saturates() {
    let pairs = synthetic_pairs(10, 2);
    let a = random_baseline(&pairs, &config(0.5, 3), "s").unwrap();
    let b = random_baseline(&pairs, &config(0.5, 3), "s").unwrap();
    assert_eq!(a, b);
    let all = random_baseline(&pairs, &config(0.95, 3), "s").unwrap();
    assert_eq!(all.selected_count(), 10);
}

fn deflate_ratio(pair: &PreferencePair) -> f64 {
    let raw = format!("{}{}{}", pair.prompt, pair.chosen, pair.rejected);
    let mut enc = DeflateEncoder::new(Vec::new(), Compression::new(9));
    enc.write_all(raw.as_bytes()).unwrap();
    enc.finish().unwrap().len() as f64 / raw.len() as f64
}

#[test]
fn compression_ranking_matches_recomputed_ratios() {
    let pairs = synthetic_pairs(100, 4);
    let result = compression_baseline(&pairs, &config(0.3, 0), "s").unwrap();
    let mut expected: Vec<(f64, usize)> = pairs.iter().map(deflate_ratio).zip(0..).collect();
    // Least compressible first; stable on ties.
    expected.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let expected: Vec<&str> = expected[..30].iter().map(|&(_, i)| pairs[i].id.as_str()).collect();
    assert_eq!(result.selected_ids, expected);
}

#[test]
fn random_text_beats_repetition() {
    let pairs = vec![
        PreferencePair::new("rep", "", "a".repeat(300), "a".repeat(299)),
        PreferencePair::new("noise", "", "qzj xkv wmbp ytr lunc ohdg efsi", "plk qw zmx nrb vjct yhso gudi"),
    ];
    let result = compression_baseline(&pairs, &config(0.5, 0), "s").unwrap();
    assert_eq!(result.selected_ids, ["noise"]);
}
