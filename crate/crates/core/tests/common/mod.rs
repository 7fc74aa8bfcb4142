//! Test-only oracles, written independently of the library's scoring path.
#![allow(dead_code)]

use std::collections::HashMap;
use std::io::Write;

use hardpref_core::logprob::{write_logprob_records, LogProbRecord, ModelRole, Side};
use hardpref_core::PreferencePair;

/// Bigram probabilities recounted from a corpus with a plain window scan.
pub struct NaiveBigram {
    alphabet: Vec<char>,
    fallback: Option<char>,
    alpha: f64,
    pair_counts: HashMap<(char, char), f64>,
    context_counts: HashMap<char, f64>,
}

impl NaiveBigram {
    pub fn new(corpus: &str, alphabet: &[char], alpha: f64) -> Self {
        let fallback = alphabet.iter().copied().find(|&c| c == '\u{FFFD}');
        let map = |c: char| if alphabet.contains(&c) { c } else { fallback.unwrap() };
        let chars: Vec<char> = corpus.chars().map(map).collect();
        let mut pair_counts = HashMap::new();
        let mut context_counts = HashMap::new();
        for w in chars.windows(2) {
            *pair_counts.entry((w[0], w[1])).or_insert(0.0) += 1.0;
            *context_counts.entry(w[0]).or_insert(0.0) += 1.0;
        }
        NaiveBigram {
            alphabet: alphabet.to_vec(),
            fallback,
            alpha,
            pair_counts,
            context_counts,
        }
    }

    fn map(&self, c: char) -> char {
        if self.alphabet.contains(&c) {
            c
        } else {
            self.fallback.expect("char outside alphabet")
        }
    }

    pub fn prob(&self, context: Option<char>, next: char) -> f64 {
        let v = self.alphabet.len() as f64;
        match context {
            None => 1.0 / v,
            Some(ctx) => {
                let ctx = self.map(ctx);
                let next = self.map(next);
                let c = self.pair_counts.get(&(ctx, next)).copied().unwrap_or(0.0);
                let n = self.context_counts.get(&ctx).copied().unwrap_or(0.0);
                (c + self.alpha) / (n + self.alpha * v)
            }
        }
    }

    pub fn logprobs(&self, prompt: &str, response: &str) -> Vec<f64> {
        let mut context = prompt.chars().last();
        let mut out = Vec::new();
        for ch in response.chars() {
            out.push(self.prob(context, ch).ln());
            context = Some(ch);
        }
        out
    }
}

/// `β · Σ_t (policy_t − reference_t)` as an explicit loop.
pub fn naive_reward(policy: &[f64], reference: &[f64], beta: f64) -> f64 {
    assert_eq!(policy.len(), reference.len());
    let mut total = 0.0;
    for t in 0..policy.len() {
        total += beta * (policy[t] - reference[t]);
    }
    total
}

pub fn pair_line(id: &str, prompt: &str, chosen: &str, rejected: &str) -> String {
    format!(
        "{{\"id\":{},\"prompt\":{},\"chosen\":{},\"rejected\":{}}}\n",
        json(id),
        json(prompt),
        json(chosen),
        json(rejected)
    )
}

fn json(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// A pair plus the logprobs each (side, role) should receive from a file backend.
pub struct Scripted {
    pub id: String,
    pub chosen_policy: Vec<f64>,
    pub chosen_reference: Vec<f64>,
    pub rejected_policy: Vec<f64>,
    pub rejected_reference: Vec<f64>,
}

impl Scripted {
    pub fn new(id: &str, cp: &[f64], cr: &[f64], rp: &[f64], rr: &[f64]) -> Self {
        Scripted {
            id: id.into(),
            chosen_policy: cp.to_vec(),
            chosen_reference: cr.to_vec(),
            rejected_policy: rp.to_vec(),
            rejected_reference: rr.to_vec(),
        }
    }

    pub fn pair(&self) -> PreferencePair {
        PreferencePair::new(
            self.id.clone(),
            format!("prompt {}", self.id),
            format!("chosen {}", self.id),
            format!("rejected {}", self.id),
        )
    }

    pub fn records(&self) -> Vec<LogProbRecord> {
        let rec = |side, role, lp: &Vec<f64>| LogProbRecord {
            pair_id: self.id.clone(),
            side,
            model_role: role,
            logprobs: lp.clone(),
        };
        vec![
            rec(Side::Chosen, ModelRole::Policy, &self.chosen_policy),
            rec(Side::Chosen, ModelRole::Reference, &self.chosen_reference),
            rec(Side::Rejected, ModelRole::Policy, &self.rejected_policy),
            rec(Side::Rejected, ModelRole::Reference, &self.rejected_reference),
        ]
    }
}

/// Writes the logprob file for `scripted` and returns its bytes.
pub fn logprob_file(scripted: &[Scripted]) -> Vec<u8> {
    let records: Vec<LogProbRecord> = scripted.iter().flat_map(Scripted::records).collect();
    let mut buf = Vec::new();
    write_logprob_records(&records, &mut buf).unwrap();
    buf.flush().unwrap();
    buf
}

/// Peak resident set size of this process in bytes (Linux only).
pub fn peak_rss_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}
