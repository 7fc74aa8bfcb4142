//! Line-delimited preference datasets.
//!
//! Each input line is one JSON object with string fields `id`, `prompt`,
//! `chosen` and `rejected`. Any other fields are carried through untouched
//! so that selections keep provenance columns. Parsing is streaming: only the
//! current line and the set of ids seen so far are held in memory.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::selector::SelectionResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub id: String,
    pub prompt: String,
    pub chosen: String,
    pub rejected: String,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl PreferencePair {
    pub fn new(
        id: impl Into<String>,
        prompt: impl Into<String>,
        chosen: impl Into<String>,
        rejected: impl Into<String>,
    ) -> Self {
        PreferencePair {
            id: id.into(),
            prompt: prompt.into(),
            chosen: chosen.into(),
            rejected: rejected.into(),
            extra: Map::new(),
        }
    }

    /// Checks the per-record invariants. Uniqueness is a dataset-level
    /// property and is checked by [`PairReader`].
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.chosen.is_empty() {
            return Err(format!("pair {:?}: empty chosen response", self.id));
        }
        if self.rejected.is_empty() {
            return Err(format!("pair {:?}: empty rejected response", self.id));
        }
        if self.chosen == self.rejected {
            return Err(format!(
                "pair {:?}: chosen and rejected responses are identical",
                self.id
            ));
        }
        Ok(())
    }

    /// The same pair with the two responses exchanged.
    pub fn swapped(&self) -> Self {
        PreferencePair {
            chosen: self.rejected.clone(),
            rejected: self.chosen.clone(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub pair_count: usize,
    pub source_path: Option<PathBuf>,
    /// `sha256:<hex>` over the raw input bytes.
    pub checksum: String,
}

/// Streaming parser over a line-delimited pair file.
///
/// Yields pairs in file order. Blank lines are skipped but still hashed.
/// Once the iterator is exhausted, [`PairReader::manifest`] describes what
/// was read.
pub struct PairReader<R> {
    reader: R,
    buf: Vec<u8>,
    line: usize,
    hasher: Sha256,
    // 128-bit digest of each id seen -> its line; fixed size whatever the id length.
    seen: HashMap<[u64; 2], usize>,
    count: usize,
    source_path: Option<PathBuf>,
    checksum: Option<String>,
}

pub fn parse_pairs<R: BufRead>(reader: R) -> PairReader<R> {
    PairReader {
        reader,
        buf: Vec::with_capacity(4096),
        line: 0,
        hasher: Sha256::new(),
        seen: HashMap::new(),
        count: 0,
        source_path: None,
        checksum: None,
    }
}

pub fn open_pairs(path: &Path) -> Result<PairReader<BufReader<File>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = parse_pairs(BufReader::with_capacity(1 << 16, file));
    reader.source_path = Some(path.to_path_buf());
    Ok(reader)
}

/// Reads a whole dataset, stopping at the first error.
pub fn read_pairs<R: BufRead>(reader: R) -> Result<(Vec<PreferencePair>, DatasetManifest)> {
    collect(parse_pairs(reader))
}

pub fn load_pairs(path: &Path) -> Result<(Vec<PreferencePair>, DatasetManifest)> {
    collect(open_pairs(path)?)
}

fn collect<R: BufRead>(
    mut reader: PairReader<R>,
) -> Result<(Vec<PreferencePair>, DatasetManifest)> {
    let mut pairs = Vec::new();
    for pair in reader.by_ref() {
        pairs.push(pair?);
    }
    let manifest = reader.manifest().expect("reader exhausted");
    Ok((pairs, manifest))
}

/// Computes only the manifest of a dataset file, validating every record.
pub fn scan_manifest(path: &Path) -> Result<DatasetManifest> {
    let mut reader = open_pairs(path)?;
    for pair in reader.by_ref() {
        pair?;
    }
    Ok(reader.manifest().expect("reader exhausted"))
}

impl<R: BufRead> PairReader<R> {
    pub fn with_source_path(mut self, path: impl Into<PathBuf>) -> Self {
        self.source_path = Some(path.into());
        self
    }

    /// Available once the stream has been read to the end.
    pub fn manifest(&self) -> Option<DatasetManifest> {
        self.checksum.as_ref().map(|checksum| DatasetManifest {
            pair_count: self.count,
            source_path: self.source_path.clone(),
            checksum: checksum.clone(),
        })
    }

    fn parse_line(&mut self) -> Result<PreferencePair> {
        let text = std::str::from_utf8(&self.buf).map_err(|e| Error::Record {
            line: self.line,
            message: format!("invalid UTF-8: {e}"),
        })?;
        let pair: PreferencePair = serde_json::from_str(text).map_err(|e| Error::Record {
            line: self.line,
            message: e.to_string(),
        })?;
        pair.validate().map_err(|message| Error::Record {
            line: self.line,
            message,
        })?;
        match self.seen.entry(id_key(&pair.id)) {
            Entry::Occupied(first) => Err(Error::DuplicateId {
                id: pair.id,
                first_line: *first.get(),
                line: self.line,
            }),
            Entry::Vacant(slot) => {
                slot.insert(self.line);
                Ok(pair)
            }
        }
    }
}

fn id_key(id: &str) -> [u64; 2] {
    let digest = Sha256::digest(id.as_bytes());
    let word = |i: usize| u64::from_le_bytes(digest[i..i + 8].try_into().expect("8 bytes"));
    [word(0), word(8)]
}

impl<R: BufRead> Iterator for PairReader<R> {
    type Item = Result<PreferencePair>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.checksum.is_some() {
            return None;
        }
        loop {
            self.buf.clear();
            let n = match self.reader.read_until(b'\n', &mut self.buf) {
                Ok(n) => n,
                Err(e) => {
                    let path = self.source_path.clone().unwrap_or_else(|| "<stream>".into());
                    self.checksum = Some(String::new());
                    return Some(Err(Error::io(path, e)));
                }
            };
            if n == 0 {
                let digest = std::mem::take(&mut self.hasher).finalize();
                self.checksum = Some(format!("sha256:{}", hex::encode(digest)));
                return None;
            }
            self.hasher.update(&self.buf);
            self.line += 1;
            if self.buf.iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            let parsed = self.parse_line();
            if parsed.is_ok() {
                self.count += 1;
            }
            return Some(parsed);
        }
    }
}

/// Writes pairs in the input record format, one per line.
pub fn write_pairs<'a, W: Write>(
    pairs: impl IntoIterator<Item = &'a PreferencePair>,
    mut dest: W,
) -> Result<usize> {
    let mut n = 0;
    for pair in pairs {
        serde_json::to_writer(&mut dest, pair).map_err(|e| sink_error(e.into()))?;
        dest.write_all(b"\n").map_err(sink_error)?;
        n += 1;
    }
    dest.flush().map_err(sink_error)?;
    Ok(n)
}

/// Emits the pairs named by `result`, in the result's order (hardest first).
///
/// `pairs` may be a streaming reader; only the selected pairs are buffered.
pub fn write_selection<W: Write>(
    result: &SelectionResult,
    pairs: impl IntoIterator<Item = Result<PreferencePair>>,
    dest: W,
) -> Result<usize> {
    let wanted: HashMap<&str, usize> = result
        .selected_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut slots: Vec<Option<PreferencePair>> = vec![None; result.selected_ids.len()];
    for pair in pairs {
        let pair = pair?;
        if let Some(&slot) = wanted.get(pair.id.as_str()) {
            slots[slot] = Some(pair);
        }
    }
    let mut ordered = Vec::with_capacity(slots.len());
    for (slot, id) in slots.into_iter().zip(&result.selected_ids) {
        match slot {
            Some(pair) => ordered.push(pair),
            None => {
                return Err(Error::Consistency(format!(
                    "selected id {id:?} is not present in the dataset"
                )))
            }
        }
    }
    write_pairs(&ordered, dest)
}

/// Contents of the `<output>.meta` sidecar written next to every selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionMeta {
    pub method: String,
    pub tau: Option<f64>,
    pub rho: Option<f64>,
    pub beta: f64,
    pub variant: String,
    pub selected_count: usize,
    pub total_count: usize,
    pub input_checksum: String,
}

impl SelectionMeta {
    pub fn from_result(result: &SelectionResult) -> Self {
        SelectionMeta {
            method: result.method.clone(),
            tau: result.tau_effective,
            rho: result.config.rho(),
            beta: result.config.beta,
            variant: result.config.variant.as_str().to_string(),
            selected_count: result.selected_count(),
            total_count: result.total_count,
            input_checksum: result.dataset_checksum.clone(),
        }
    }
}

pub fn meta_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_os_string();
    s.push(".meta");
    PathBuf::from(s)
}

pub fn write_meta(output: &Path, meta: &SelectionMeta) -> Result<()> {
    let path = meta_path(output);
    let mut text = serde_json::to_string(meta).map_err(|e| Error::io(&path, e.into()))?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn read_meta(output: &Path) -> Result<SelectionMeta> {
    let path = meta_path(output);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(text.trim()).map_err(|e| Error::Record {
        line: 1,
        message: format!("{}: {e}", path.display()),
    })
}

fn sink_error(e: std::io::Error) -> Error {
    Error::io("<output>", e)
}
