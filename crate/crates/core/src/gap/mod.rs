//! Implicit rewards, reward gaps and the scalar functions of the DPO loss
//! that tie a pair's gap to its training signal.
//!
//! For a response `y` to prompt `x` the implicit reward is
//! `β · Σ_t [log π_policy(y_t | x, y_<t) − log π_ref(y_t | x, y_<t)]`, and a
//! pair's difficulty is the signed gap `r(chosen) − r(rejected)`. Smaller
//! gaps mean harder pairs.

mod cache;
mod compute;

use serde::{Deserialize, Serialize};

use crate::dataset::PreferencePair;
use crate::error::{Error, Result};
use crate::logprob::{ModelRole, ScoreRequest, Scorer, Side, TokenLogProbs};
use crate::selector::Variant;

pub use cache::{CacheHeader, GapCache};
pub use compute::{compute_gap_records, ComputeOptions, ComputeOutcome, PairFailure};

pub const DEFAULT_BETA: f64 = 0.1;

/// Cached difficulty of one pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardGapRecord {
    pub pair_id: String,
    pub r_w: f64,
    pub r_l: f64,
    pub gap_raw: f64,
    pub gap_norm: f64,
    pub len_w: usize,
    pub len_l: usize,
    pub beta: f64,
}

impl RewardGapRecord {
    /// Builds a record from the two implicit rewards, deriving both gaps.
    pub fn from_rewards(
        pair_id: impl Into<String>,
        r_w: f64,
        r_l: f64,
        len_w: usize,
        len_l: usize,
        beta: f64,
    ) -> Result<Self> {
        let pair_id = pair_id.into();
        if len_w == 0 || len_l == 0 {
            return Err(Error::Degenerate(format!("pair {pair_id:?}: zero-length response")));
        }
        let mut record = RewardGapRecord {
            pair_id,
            r_w,
            r_l,
            gap_raw: r_w - r_l,
            gap_norm: 0.0,
            len_w,
            len_l,
            beta,
        };
        record.gap_norm = normalized_gap(&record);
        if !(record.gap_raw.is_finite() && record.gap_norm.is_finite()) {
            return Err(Error::NonFinite(format!("reward gap of {:?}", record.pair_id)));
        }
        Ok(record)
    }

    pub fn gap(&self, variant: Variant) -> f64 {
        match variant {
            Variant::Raw => self.gap_raw,
            Variant::LengthNormalized => self.gap_norm,
        }
    }

    /// Whether the stored gaps are exactly what the rewards and lengths give.
    pub fn is_consistent(&self) -> bool {
        self.len_w >= 1
            && self.len_l >= 1
            && self.gap_raw == self.r_w - self.r_l
            && self.gap_norm == normalized_gap(self)
    }
}

/// `β · Σ_t (policy[t] − reference[t])` over one response's tokens.
pub fn implicit_reward(policy: &TokenLogProbs, reference: &TokenLogProbs, beta: f64) -> Result<f64> {
    if policy.pair_id != reference.pair_id || policy.side != reference.side {
        return Err(Error::Alignment(format!(
            "policy scores ({}, {}) paired with reference scores ({}, {})",
            policy.pair_id,
            policy.side.as_str(),
            reference.pair_id,
            reference.side.as_str()
        )));
    }
    if policy.token_count() != reference.token_count() {
        return Err(Error::Alignment(format!(
            "({}, {}): policy has {} tokens, reference has {}",
            policy.pair_id,
            policy.side.as_str(),
            policy.token_count(),
            reference.token_count()
        )));
    }
    let mut log_ratio = 0.0;
    for (p, r) in policy.logprobs().iter().zip(reference.logprobs()) {
        log_ratio += p - r;
    }
    let reward = beta * log_ratio;
    if !reward.is_finite() {
        return Err(Error::NonFinite(format!(
            "implicit reward of ({}, {})",
            policy.pair_id,
            policy.side.as_str()
        )));
    }
    Ok(reward)
}

/// Scores both responses under both roles (four scorer calls) and returns
/// the pair's gap record.
pub fn reward_gap(pair: &PreferencePair, scorer: &Scorer, beta: f64) -> Result<RewardGapRecord> {
    let reward = |side: Side, response: &str| -> Result<(f64, usize)> {
        let request = ScoreRequest {
            pair_id: &pair.id,
            side,
            prompt: &pair.prompt,
            response,
        };
        let policy = scorer.score_response(&request, ModelRole::Policy)?;
        let reference = scorer.score_response(&request, ModelRole::Reference)?;
        Ok((implicit_reward(&policy, &reference, beta)?, policy.token_count()))
    };
    let (r_w, len_w) = reward(Side::Chosen, &pair.chosen)?;
    let (r_l, len_l) = reward(Side::Rejected, &pair.rejected)?;
    RewardGapRecord::from_rewards(pair.id.clone(), r_w, r_l, len_w, len_l, beta)
}

/// Per-token gap: `r_w / |y_w| − r_l / |y_l|`.
pub fn normalized_gap(record: &RewardGapRecord) -> f64 {
    record.r_w / record.len_w as f64 - record.r_l / record.len_l as f64
}

/// Logistic sigmoid, evaluated without overflow for any finite input.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Single-pair DPO loss as a function of the gap: `−ln σ(β·gap)`.
pub fn dpo_loss_of_gap(gap: f64, beta: f64) -> f64 {
    softplus(-beta * gap)
}

/// Magnitude of the gap-dependent factor in the DPO gradient,
/// `β · σ(−β·gap)`. Equals `−d/dgap` of [`dpo_loss_of_gap`].
pub fn gradient_weight(gap: f64, beta: f64) -> f64 {
    beta * sigmoid(-beta * gap)
}

/// Entropy of the preference probability `p = σ(β·gap)`, in nats.
///
/// Returns 0 once either `p` or `1 − p` rounds to 1.
pub fn preference_entropy(gap: f64, beta: f64) -> f64 {
    let z = beta * gap;
    let p = sigmoid(z);
    let q = sigmoid(-z);
    if p == 1.0 || q == 1.0 {
        return 0.0;
    }
    // −p ln p − q ln q with ln p = −softplus(−z) and ln q = −softplus(z).
    p * softplus(-z) + q * softplus(z)
}
