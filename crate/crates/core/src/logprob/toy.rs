use std::collections::HashMap;

use sha2::{Digest, Sha256};

use super::{LogProbSource, ModelRole, ScoreRequest};
use crate::error::{Error, Result};
use crate::synthetic;

/// Characters outside a model's alphabet map to this symbol when the
/// alphabet contains it.
pub const FALLBACK_CHAR: char = '\u{FFFD}';

/// Character-level bigram model with additive smoothing.
///
/// `P(next | prev) = (count(prev, next) + α) / (count(prev, ·) + α·V)`.
/// The first response character is conditioned on the last prompt character;
/// with an empty prompt it is conditioned on a start context that is never
/// trained and is therefore uniform.
#[derive(Debug, Clone)]
pub struct ToyLm {
    symbols: Vec<char>,
    index: HashMap<char, usize>,
    fallback: Option<usize>,
    smoothing: f64,
    // (V + 1) rows of V entries; the last row is the start context.
    log_table: Vec<f64>,
    digest: String,
}

impl ToyLm {
    /// Trains over the alphabet of characters present in `corpus`.
    pub fn train(corpus: &str, smoothing: f64) -> Result<Self> {
        let mut alphabet: Vec<char> = corpus.chars().collect();
        alphabet.sort_unstable();
        alphabet.dedup();
        Self::train_with_alphabet(corpus, &alphabet, smoothing)
    }

    pub fn train_with_alphabet(corpus: &str, alphabet: &[char], smoothing: f64) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Config("toy model corpus is empty".into()));
        }
        if !(smoothing.is_finite() && smoothing > 0.0) {
            return Err(Error::Config(format!(
                "toy model smoothing must be positive, got {smoothing}"
            )));
        }
        let mut symbols = alphabet.to_vec();
        symbols.sort_unstable();
        symbols.dedup();
        if symbols.is_empty() {
            return Err(Error::Config("toy model alphabet is empty".into()));
        }
        let index: HashMap<char, usize> =
            symbols.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let fallback = index.get(&FALLBACK_CHAR).copied();
        let v = symbols.len();

        let mut counts = vec![0u64; (v + 1) * v];
        let mut prev: Option<usize> = None;
        for ch in corpus.chars() {
            let cur = match index.get(&ch).copied().or(fallback) {
                Some(i) => i,
                None => {
                    return Err(Error::Config(format!(
                        "corpus character {ch:?} is outside the model alphabet"
                    )))
                }
            };
            if let Some(p) = prev {
                counts[p * v + cur] += 1;
            }
            prev = Some(cur);
        }

        let mut log_table = vec![0.0; (v + 1) * v];
        for row in 0..=v {
            let cells = &counts[row * v..(row + 1) * v];
            let total: u64 = cells.iter().sum();
            let denom = total as f64 + smoothing * v as f64;
            for (j, &c) in cells.iter().enumerate() {
                log_table[row * v + j] = ((c as f64 + smoothing) / denom).ln();
            }
        }

        let mut hasher = Sha256::new();
        hasher.update(b"toy-bigram-v1\0");
        hasher.update(symbols.iter().collect::<String>().as_bytes());
        hasher.update(b"\0");
        hasher.update(smoothing.to_bits().to_le_bytes());
        hasher.update(corpus.as_bytes());
        let digest = hex::encode(&hasher.finalize()[..12]);

        Ok(ToyLm {
            symbols,
            index,
            fallback,
            smoothing,
            log_table,
            digest,
        })
    }

    pub fn alphabet(&self) -> &[char] {
        &self.symbols
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    fn symbol(&self, ch: char) -> Option<usize> {
        self.index.get(&ch).copied().or(self.fallback)
    }

    fn row(&self, context: Option<char>) -> usize {
        context
            .and_then(|c| self.symbol(c))
            .unwrap_or(self.symbols.len())
    }

    /// `P(next | context)`; `None` context is the start context.
    pub fn prob(&self, context: Option<char>, next: char) -> Option<f64> {
        self.log_prob(context, next).map(f64::exp)
    }

    pub fn log_prob(&self, context: Option<char>, next: char) -> Option<f64> {
        let j = self.symbol(next)?;
        let v = self.symbols.len();
        Some(self.log_table[self.row(context) * v + j])
    }

    /// One log-probability per response character, conditioned on the
    /// prompt's final character.
    pub fn score(&self, prompt: &str, response: &str) -> Result<Vec<f64>> {
        let v = self.symbols.len();
        let mut row = self.row(prompt.chars().next_back());
        let mut out = Vec::with_capacity(response.len());
        for ch in response.chars() {
            let j = self.symbol(ch).ok_or_else(|| {
                Error::Degenerate(format!("character {ch:?} is outside the toy model alphabet"))
            })?;
            out.push(self.log_table[row * v + j]);
            row = j;
        }
        Ok(out)
    }
}

/// A policy/reference pair of toy models.
#[derive(Debug, Clone)]
pub struct ToyBackend {
    pub policy: ToyLm,
    pub reference: ToyLm,
}

impl ToyBackend {
    pub const POLICY_SMOOTHING: f64 = 0.5;
    pub const REFERENCE_SMOOTHING: f64 = 1.0;

    pub fn new(policy: ToyLm, reference: ToyLm) -> Self {
        ToyBackend { policy, reference }
    }

    /// Trains both roles over the synthetic alphabet (plus the fallback
    /// symbol) from two user corpora.
    pub fn from_corpora(policy_corpus: &str, reference_corpus: &str) -> Result<Self> {
        let alphabet = synthetic::toy_alphabet();
        Ok(ToyBackend {
            policy: ToyLm::train_with_alphabet(policy_corpus, &alphabet, Self::POLICY_SMOOTHING)?,
            reference: ToyLm::train_with_alphabet(
                reference_corpus,
                &alphabet,
                Self::REFERENCE_SMOOTHING,
            )?,
        })
    }

    /// Models trained on corpora drawn from the seed's synthetic text
    /// sources. The policy sees only the "preferred" source; the reference
    /// sees both, so pairs from [`synthetic::synthetic_pairs`] with the same
    /// seed get mostly positive gaps with a tail of hard and inverted ones.
    pub fn seeded(seed: u64) -> Self {
        let (policy_corpus, reference_corpus) = synthetic::toy_corpora(seed);
        Self::from_corpora(&policy_corpus, &reference_corpus)
            .expect("synthetic corpora are nonempty and in-alphabet")
    }

    fn model(&self, role: ModelRole) -> &ToyLm {
        match role {
            ModelRole::Policy => &self.policy,
            ModelRole::Reference => &self.reference,
        }
    }
}

impl LogProbSource for ToyBackend {
    fn score_response(&self, request: &ScoreRequest<'_>, role: ModelRole) -> Result<Vec<f64>> {
        self.model(role).score(request.prompt, request.response)
    }

    fn fingerprint(&self) -> String {
        format!("toy:{}:{}", self.policy.digest, self.reference.digest)
    }
}
