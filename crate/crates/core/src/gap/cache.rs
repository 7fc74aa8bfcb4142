use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RewardGapRecord;
use crate::error::{Error, Result};

/// First line of a cache file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheHeader {
    pub beta: f64,
    pub backend_fingerprint: String,
    pub dataset_checksum: String,
}

/// Gap records for one (dataset, scorer, β) combination, in dataset order.
#[derive(Debug, Clone, PartialEq)]
pub struct GapCache {
    header: CacheHeader,
    records: Vec<RewardGapRecord>,
    index: HashMap<String, usize>,
}

impl GapCache {
    pub fn new(beta: f64, backend_fingerprint: impl Into<String>, dataset_checksum: impl Into<String>) -> Self {
        GapCache {
            header: CacheHeader {
                beta,
                backend_fingerprint: backend_fingerprint.into(),
                dataset_checksum: dataset_checksum.into(),
            },
            records: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn header(&self) -> &CacheHeader {
        &self.header
    }

    pub fn beta(&self) -> f64 {
        self.header.beta
    }

    pub fn backend_fingerprint(&self) -> &str {
        &self.header.backend_fingerprint
    }

    pub fn dataset_checksum(&self) -> &str {
        &self.header.dataset_checksum
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, pair_id: &str) -> Option<&RewardGapRecord> {
        self.index.get(pair_id).map(|&i| &self.records[i])
    }

    pub fn contains(&self, pair_id: &str) -> bool {
        self.index.contains_key(pair_id)
    }

    /// Records in insertion (dataset) order.
    pub fn records(&self) -> &[RewardGapRecord] {
        &self.records
    }

    /// Position of a pair in insertion order.
    pub fn position(&self, pair_id: &str) -> Option<usize> {
        self.index.get(pair_id).copied()
    }

    pub fn insert(&mut self, record: RewardGapRecord) -> Result<()> {
        if record.beta != self.header.beta {
            return Err(Error::Consistency(format!(
                "record {:?} has beta {} but the cache holds beta {}",
                record.pair_id, record.beta, self.header.beta
            )));
        }
        match self.index.entry(record.pair_id.clone()) {
            Entry::Occupied(_) => Err(Error::Consistency(format!(
                "cache already holds a record for {:?}",
                record.pair_id
            ))),
            Entry::Vacant(slot) => {
                slot.insert(self.records.len());
                self.records.push(record);
                Ok(())
            }
        }
    }

    pub fn reserve(&mut self, additional: usize) {
        self.records.reserve(additional);
        self.index.reserve(additional);
    }

    /// Rejects a cache built for a different β, scorer or dataset.
    pub fn ensure_compatible(&self, beta: f64, backend_fingerprint: &str, dataset_checksum: &str) -> Result<()> {
        let h = &self.header;
        if h.beta != beta {
            return Err(Error::StaleCache(format!("cache beta {} != configured beta {beta}", h.beta)));
        }
        if h.backend_fingerprint != backend_fingerprint {
            return Err(Error::StaleCache(format!(
                "cache was scored by {:?}, active backend is {backend_fingerprint:?}",
                h.backend_fingerprint
            )));
        }
        if h.dataset_checksum != dataset_checksum {
            return Err(Error::StaleCache(format!(
                "cache belongs to dataset {}, input is {dataset_checksum}",
                h.dataset_checksum
            )));
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, mut dest: W) -> Result<()> {
        let io = |e: std::io::Error| Error::io("<gap cache>", e);
        serde_json::to_writer(&mut dest, &self.header).map_err(|e| io(e.into()))?;
        dest.write_all(b"\n").map_err(io)?;
        for record in &self.records {
            serde_json::to_writer(&mut dest, record).map_err(|e| io(e.into()))?;
            dest.write_all(b"\n").map_err(io)?;
        }
        dest.flush().map_err(io)
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let record_err = |line: usize, message: String| Error::Record { line, message };
        let header: CacheHeader = match lines.next() {
            Some((_, line)) => {
                let line = line.map_err(|e| record_err(1, e.to_string()))?;
                serde_json::from_str(&line).map_err(|e| record_err(1, format!("cache header: {e}")))?
            }
            None => return Err(record_err(1, "empty cache file".into())),
        };
        let mut cache = GapCache {
            header,
            records: Vec::new(),
            index: HashMap::new(),
        };
        for (i, line) in lines {
            let line_no = i + 1;
            let line = line.map_err(|e| record_err(line_no, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: RewardGapRecord =
                serde_json::from_str(&line).map_err(|e| record_err(line_no, e.to_string()))?;
            if !record.is_consistent() {
                return Err(record_err(
                    line_no,
                    format!("record {:?} has gaps inconsistent with its rewards", record.pair_id),
                ));
            }
            cache
                .insert(record)
                .map_err(|e| record_err(line_no, e.to_string()))?;
        }
        Ok(cache)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        let file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        self.write(BufWriter::new(file))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(file))
    }
}
