use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{check_logprobs, key_string, LogProbIssue, LogProbSource, ModelRole, ScoreRequest, Side};
use crate::error::{Error, Result};

/// One line of a precomputed logprob file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogProbRecord {
    pub pair_id: String,
    pub side: Side,
    pub model_role: ModelRole,
    pub logprobs: Vec<f64>,
}

type Slots = [Option<Vec<f64>>; 4];

fn slot(side: Side, role: ModelRole) -> usize {
    side as usize * 2 + role as usize
}

/// Precomputed logprobs indexed by (pair id, side, role). Immutable once loaded.
#[derive(Debug, Clone, Default)]
pub struct LogProbStore {
    records: HashMap<String, Slots>,
    count: usize,
    digest: String,
}

pub fn load_precomputed(path: &Path) -> Result<LogProbStore> {
    let file = File::open(path)
        .map_err(|e| Error::SourceUnavailable(format!("{}: {e}", path.display())))?;
    LogProbStore::read(BufReader::new(file))
}

/// Writes records in the logprob file format. `serde_json` emits the
/// shortest decimal that reads back to the same `f64`.
pub fn write_logprob_records<'a, W: Write>(
    records: impl IntoIterator<Item = &'a LogProbRecord>,
    mut dest: W,
) -> Result<usize> {
    let io = |e: std::io::Error| Error::io("<logprob output>", e);
    let mut n = 0;
    for record in records {
        serde_json::to_writer(&mut dest, record).map_err(|e| io(e.into()))?;
        dest.write_all(b"\n").map_err(io)?;
        n += 1;
    }
    dest.flush().map_err(io)?;
    Ok(n)
}

impl LogProbStore {
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut records: HashMap<String, Slots> = HashMap::new();
        let mut count = 0;
        let mut hasher = Sha256::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| Error::Record {
                line: line_no,
                message: e.to_string(),
            })?;
            hasher.update(line.as_bytes());
            hasher.update(b"\n");
            if line.trim().is_empty() {
                continue;
            }
            let record: LogProbRecord = serde_json::from_str(&line).map_err(|e| Error::Record {
                line: line_no,
                message: e.to_string(),
            })?;
            if let Err(issue) = check_logprobs(&record.logprobs) {
                let message = match issue {
                    LogProbIssue::Empty => "empty logprobs".to_string(),
                    LogProbIssue::NonFinite(t) => format!("non-finite logprob at token {t}"),
                    LogProbIssue::Positive(t, v) => format!("logprob {v} > 0 at token {t}"),
                };
                return Err(Error::Record {
                    line: line_no,
                    message,
                });
            }
            let cell = &mut records.entry(record.pair_id.clone()).or_default()
                [slot(record.side, record.model_role)];
            if cell.is_some() {
                return Err(Error::DuplicateKey(key_string(
                    &record.pair_id,
                    record.side,
                    record.model_role,
                )));
            }
            *cell = Some(record.logprobs);
            count += 1;
        }
        Ok(LogProbStore {
            records,
            count,
            digest: hex::encode(&hasher.finalize()[..12]),
        })
    }

    pub fn get(&self, pair_id: &str, side: Side, role: ModelRole) -> Option<&[f64]> {
        self.records.get(pair_id)?[slot(side, role)].as_deref()
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Lists every (pair, side, role) key the dataset needs but the store lacks.
    pub fn missing_keys<'a>(&self, pair_ids: impl IntoIterator<Item = &'a str>) -> Vec<String> {
        let mut missing = Vec::new();
        for id in pair_ids {
            for side in Side::ALL {
                for role in ModelRole::ALL {
                    if self.get(id, side, role).is_none() {
                        missing.push(key_string(id, side, role));
                    }
                }
            }
        }
        missing
    }

    pub fn check_complete<'a>(&self, pair_ids: impl IntoIterator<Item = &'a str>) -> Result<()> {
        let missing = self.missing_keys(pair_ids);
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Incomplete { missing })
        }
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }
}

/// Serves logprobs from a [`LogProbStore`].
#[derive(Debug, Clone)]
pub struct FileBackend {
    store: LogProbStore,
}

impl FileBackend {
    pub fn new(store: LogProbStore) -> Self {
        FileBackend { store }
    }

    pub fn store(&self) -> &LogProbStore {
        &self.store
    }
}

impl LogProbSource for FileBackend {
    fn score_response(&self, request: &ScoreRequest<'_>, role: ModelRole) -> Result<Vec<f64>> {
        self.store
            .get(request.pair_id, request.side, role)
            .map(<[f64]>::to_vec)
            .ok_or_else(|| Error::Incomplete {
                missing: vec![key_string(request.pair_id, request.side, role)],
            })
    }

    fn fingerprint(&self) -> String {
        format!("file:{}", self.store.digest)
    }
}
