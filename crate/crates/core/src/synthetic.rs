//! Seeded synthetic text and preference pairs for the toy backend, demos and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::PreferencePair;
use crate::logprob::FALLBACK_CHAR;

const LETTERS: &str = "abcdefghijklmnopqrstuvwxyz ";
const CORPUS_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;
const PAIRS_SEED_SALT: u64 = 0xd1b5_4a32_d192_ed03;

/// Lowercase letters, space and [`FALLBACK_CHAR`].
pub fn toy_alphabet() -> Vec<char> {
    LETTERS.chars().chain([FALLBACK_CHAR]).collect()
}

/// A random first-order Markov source over lowercase letters and space.
#[derive(Debug, Clone)]
pub struct TextChain {
    symbols: Vec<char>,
    cumulative: Vec<Vec<f64>>,
}

impl TextChain {
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let symbols: Vec<char> = LETTERS.chars().collect();
        let cumulative = (0..symbols.len())
            .map(|_| {
                // Fourth powers make each row peaked on a few successors.
                let weights: Vec<f64> = (0..symbols.len())
                    .map(|_| rng.gen::<f64>().powi(4))
                    .collect();
                let total: f64 = weights.iter().sum();
                let mut acc = 0.0;
                weights
                    .iter()
                    .map(|w| {
                        acc += w / total;
                        acc
                    })
                    .collect()
            })
            .collect();
        TextChain {
            symbols,
            cumulative,
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R, len: usize) -> String {
        let mut out = String::with_capacity(len);
        let mut state = rng.gen_range(0..self.symbols.len());
        for _ in 0..len {
            let u: f64 = rng.gen();
            let row = &self.cumulative[state];
            state = row.partition_point(|&c| c < u).min(row.len() - 1);
            out.push(self.symbols[state]);
        }
        out
    }
}

/// The "preferred" and "other" sources for a seed.
pub fn chains(seed: u64) -> (TextChain, TextChain) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let preferred = TextChain::random(&mut rng);
    let other = TextChain::random(&mut rng);
    (preferred, other)
}

/// Policy corpus drawn from the preferred source; reference corpus drawn
/// half from each.
pub fn toy_corpora(seed: u64) -> (String, String) {
    let (preferred, other) = chains(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ CORPUS_SEED_SALT);
    let policy = preferred.sample(&mut rng, 20_000);
    let mut reference = preferred.sample(&mut rng, 10_000);
    reference.push_str(&other.sample(&mut rng, 10_000));
    (policy, reference)
}

/// `n` pairs whose chosen response usually comes from the preferred source
/// and whose rejected response usually does not.
pub fn synthetic_pairs(n: usize, seed: u64) -> Vec<PreferencePair> {
    let (preferred, other) = chains(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ PAIRS_SEED_SALT);
    let width = n.max(1).to_string().len();
    (0..n)
        .map(|i| {
            let prompt_len = rng.gen_range(4..16);
            let prompt = preferred.sample(&mut rng, prompt_len);
            let source = |rng: &mut ChaCha8Rng, likely: &TextChain, unlikely: &TextChain| {
                let len = rng.gen_range(8..64);
                if rng.gen_bool(0.8) {
                    likely.sample(rng, len)
                } else {
                    unlikely.sample(rng, len)
                }
            };
            let chosen = source(&mut rng, &preferred, &other);
            let mut rejected = source(&mut rng, &other, &preferred);
            while rejected == chosen {
                rejected = source(&mut rng, &other, &preferred);
            }
            PreferencePair::new(format!("p{i:0width$}"), prompt, chosen, rejected)
        })
        .collect()
}
