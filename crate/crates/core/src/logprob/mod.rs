//! Per-token response log-probabilities under a policy/reference model pair.
//!
//! Backends implement [`LogProbSource`]; the [`Scorer`] wrapper validates
//! their output and keeps exact call accounting. Tokenization belongs to the
//! backend and is never redone here.

mod file;
mod remote;
mod toy;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use file::{load_precomputed, write_logprob_records, FileBackend, LogProbRecord, LogProbStore};
pub use remote::RemoteBackend;
pub use toy::{ToyBackend, ToyLm, FALLBACK_CHAR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Chosen,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelRole {
    Policy,
    Reference,
}

impl Side {
    pub const ALL: [Side; 2] = [Side::Chosen, Side::Rejected];

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Chosen => "chosen",
            Side::Rejected => "rejected",
        }
    }
}

impl ModelRole {
    pub const ALL: [ModelRole; 2] = [ModelRole::Policy, ModelRole::Reference];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelRole::Policy => "policy",
            ModelRole::Reference => "reference",
        }
    }
}

/// Log-probabilities of one response's tokens under one model role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogProbs {
    pub pair_id: String,
    pub side: Side,
    pub model_role: ModelRole,
    logprobs: Vec<f64>,
}

impl TokenLogProbs {
    /// Fails unless there is at least one token and every value is a finite
    /// log-probability (`<= 0`).
    pub fn new(
        pair_id: impl Into<String>,
        side: Side,
        model_role: ModelRole,
        logprobs: Vec<f64>,
    ) -> Result<Self> {
        let pair_id = pair_id.into();
        let key = key_string(&pair_id, side, model_role);
        check_logprobs(&logprobs).map_err(|msg| match msg {
            LogProbIssue::Empty => Error::Degenerate(format!("{key}: response has zero tokens")),
            LogProbIssue::NonFinite(i) => Error::NonFinite(format!("{key} token {i}")),
            LogProbIssue::Positive(i, v) => {
                Error::Degenerate(format!("{key} token {i}: log-probability {v} > 0"))
            }
        })?;
        Ok(TokenLogProbs {
            pair_id,
            side,
            model_role,
            logprobs,
        })
    }

    pub fn logprobs(&self) -> &[f64] {
        &self.logprobs
    }

    pub fn token_count(&self) -> usize {
        self.logprobs.len()
    }

    pub fn into_logprobs(self) -> Vec<f64> {
        self.logprobs
    }
}

pub(crate) enum LogProbIssue {
    Empty,
    NonFinite(usize),
    Positive(usize, f64),
}

pub(crate) fn check_logprobs(values: &[f64]) -> std::result::Result<(), LogProbIssue> {
    if values.is_empty() {
        return Err(LogProbIssue::Empty);
    }
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(LogProbIssue::NonFinite(i));
        }
        if v > 0.0 {
            return Err(LogProbIssue::Positive(i, v));
        }
    }
    Ok(())
}

pub(crate) fn key_string(pair_id: &str, side: Side, role: ModelRole) -> String {
    format!("({pair_id}, {}, {})", side.as_str(), role.as_str())
}

/// Everything a backend may need to score one response.
#[derive(Debug, Clone, Copy)]
pub struct ScoreRequest<'a> {
    pub pair_id: &'a str,
    pub side: Side,
    pub prompt: &'a str,
    pub response: &'a str,
}

/// A provider of per-token log-probabilities for both model roles.
///
/// Implementations must be deterministic for a fixed configuration and safe
/// to call from several threads at once.
pub trait LogProbSource: Send + Sync {
    fn score_response(&self, request: &ScoreRequest<'_>, role: ModelRole) -> Result<Vec<f64>>;

    /// Identifies the configuration; gap caches are only reused when it matches.
    fn fingerprint(&self) -> String;
}

impl<T: LogProbSource + ?Sized> LogProbSource for Box<T> {
    fn score_response(&self, request: &ScoreRequest<'_>, role: ModelRole) -> Result<Vec<f64>> {
        (**self).score_response(request, role)
    }

    fn fingerprint(&self) -> String {
        (**self).fingerprint()
    }
}

/// Atomic call counters, one per (role, side).
#[derive(Debug, Default)]
pub struct ScorerStats {
    calls: [[AtomicU64; 2]; 2],
    total_tokens: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StatsSnapshot {
    pub policy_chosen: u64,
    pub policy_rejected: u64,
    pub reference_chosen: u64,
    pub reference_rejected: u64,
    pub total_tokens: u64,
}

impl StatsSnapshot {
    pub fn total_calls(&self) -> u64 {
        self.policy_chosen + self.policy_rejected + self.reference_chosen + self.reference_rejected
    }

    pub fn calls(&self, role: ModelRole, side: Side) -> u64 {
        match (role, side) {
            (ModelRole::Policy, Side::Chosen) => self.policy_chosen,
            (ModelRole::Policy, Side::Rejected) => self.policy_rejected,
            (ModelRole::Reference, Side::Chosen) => self.reference_chosen,
            (ModelRole::Reference, Side::Rejected) => self.reference_rejected,
        }
    }
}

impl fmt::Display for StatsSnapshot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} scorer calls (policy/chosen {}, policy/rejected {}, reference/chosen {}, reference/rejected {}), {} tokens",
            self.total_calls(),
            self.policy_chosen,
            self.policy_rejected,
            self.reference_chosen,
            self.reference_rejected,
            self.total_tokens
        )
    }
}

impl ScorerStats {
    fn record(&self, role: ModelRole, side: Side) {
        self.calls[role as usize][side as usize].fetch_add(1, Ordering::Relaxed);
    }

    fn add_tokens(&self, n: usize) {
        self.total_tokens.fetch_add(n as u64, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> StatsSnapshot {
        let get = |r: ModelRole, s: Side| self.calls[r as usize][s as usize].load(Ordering::Relaxed);
        StatsSnapshot {
            policy_chosen: get(ModelRole::Policy, Side::Chosen),
            policy_rejected: get(ModelRole::Policy, Side::Rejected),
            reference_chosen: get(ModelRole::Reference, Side::Chosen),
            reference_rejected: get(ModelRole::Reference, Side::Rejected),
            total_tokens: self.total_tokens.load(Ordering::Relaxed),
        }
    }
}

/// A backend plus call accounting and output validation.
pub struct Scorer {
    backend: Box<dyn LogProbSource>,
    stats: ScorerStats,
}

impl Scorer {
    pub fn new(backend: impl LogProbSource + 'static) -> Self {
        Scorer {
            backend: Box::new(backend),
            stats: ScorerStats::default(),
        }
    }

    pub fn from_boxed(backend: Box<dyn LogProbSource>) -> Self {
        Scorer {
            backend,
            stats: ScorerStats::default(),
        }
    }

    pub fn score_response(
        &self,
        request: &ScoreRequest<'_>,
        role: ModelRole,
    ) -> Result<TokenLogProbs> {
        if request.response.is_empty() {
            return Err(Error::Degenerate(format!(
                "{}: empty response",
                key_string(request.pair_id, request.side, role)
            )));
        }
        self.stats.record(role, request.side);
        let values = self.backend.score_response(request, role)?;
        let scored = TokenLogProbs::new(request.pair_id, request.side, role, values)?;
        self.stats.add_tokens(scored.token_count());
        Ok(scored)
    }

    pub fn stats(&self) -> StatsSnapshot {
        self.stats.snapshot()
    }

    pub fn fingerprint(&self) -> String {
        self.backend.fingerprint()
    }
}

/// Textual backend selector: `toy`, `toy:<seed>`, `toy:<policy corpus>,<reference corpus>`,
/// `file:<path>` or `remote:<policy url>,<reference url>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum BackendSpec {
    Toy { seed: u64 },
    ToyCorpora { policy: PathBuf, reference: PathBuf },
    File(PathBuf),
    Remote { policy: String, reference: String },
}

impl FromStr for BackendSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = match s.split_once(':') {
            Some((k, r)) => (k, Some(r)),
            None => (s, None),
        };
        let bad = || Error::Config(format!("unrecognised backend {s:?}"));
        match (kind, rest) {
            ("toy", None) => Ok(BackendSpec::Toy { seed: 0 }),
            ("toy", Some(rest)) => {
                if let Ok(seed) = rest.parse() {
                    Ok(BackendSpec::Toy { seed })
                } else {
                    let (p, r) = rest.split_once(',').ok_or_else(bad)?;
                    Ok(BackendSpec::ToyCorpora {
                        policy: p.into(),
                        reference: r.into(),
                    })
                }
            }
            ("file", Some(path)) if !path.is_empty() => Ok(BackendSpec::File(path.into())),
            ("remote", Some(rest)) => {
                let (p, r) = rest.split_once(',').ok_or_else(bad)?;
                Ok(BackendSpec::Remote {
                    policy: p.to_string(),
                    reference: r.to_string(),
                })
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Toy { seed: 0 } => write!(f, "toy"),
            BackendSpec::Toy { seed } => write!(f, "toy:{seed}"),
            BackendSpec::ToyCorpora { policy, reference } => {
                write!(f, "toy:{},{}", policy.display(), reference.display())
            }
            BackendSpec::File(p) => write!(f, "file:{}", p.display()),
            BackendSpec::Remote { policy, reference } => write!(f, "remote:{policy},{reference}"),
        }
    }
}

impl BackendSpec {
    pub fn build(&self) -> Result<Box<dyn LogProbSource>> {
        Ok(match self {
            BackendSpec::Toy { seed } => Box::new(ToyBackend::seeded(*seed)),
            BackendSpec::ToyCorpora { policy, reference } => {
                let read = |p: &PathBuf| {
                    std::fs::read_to_string(p).map_err(|e| {
                        Error::SourceUnavailable(format!("{}: {e}", p.display()))
                    })
                };
                Box::new(ToyBackend::from_corpora(&read(policy)?, &read(reference)?)?)
            }
            BackendSpec::File(path) => Box::new(FileBackend::new(load_precomputed(path)?)),
            BackendSpec::Remote { policy, reference } => {
                Box::new(RemoteBackend::new(policy.clone(), reference.clone())?)
            }
        })
    }
}
