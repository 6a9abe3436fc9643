//! Sentence/corpus embedding data model and the EMBA binary archive.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "EMBA" | version u32 = 1 | dim u32 | sentence_count u32 | metadata_len u32 | metadata (UTF-8 JSON)
//! per sentence:
//!     token_count u32
//!     token_count x (str_len u16 | UTF-8 bytes)
//!     token_count x dim f32, token-major
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EMBA";
pub const FORMAT_VERSION: u32 = 1;

const HEADER_LEN: usize = 4 + 4 * 4;

/// Centering scheme recorded in archive metadata by the centering module.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum CenteringTag {
    Dimension,
    Sentence,
    Corpus {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        batch_size: Option<usize>,
        seed: u64,
    },
}

/// Provenance and transformation tags stored as the JSON blob after the header.
///
/// Keys this crate does not know about are kept in `extra` so that metadata
/// written by other tools survives a read/write cycle.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ArchiveMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    centering: Option<CenteringTag>,
    #[serde(default, skip_serializing_if = "is_false")]
    normalized: bool,
    /// Transformations in the order they were applied, e.g. `["center:corpus", "normalize"]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pipeline: Vec<String>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl ArchiveMetadata {
    pub fn new(model: impl Into<String>, layer: u32) -> Self {
        Self {
            model: Some(model.into()),
            layer: Some(layer),
            ..Self::default()
        }
    }

    pub fn centering(&self) -> Option<CenteringTag> {
        self.centering
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn pipeline(&self) -> &[String] {
        &self.pipeline
    }

    pub(crate) fn record_centering(&mut self, tag: CenteringTag) {
        self.centering = Some(tag);
        // Centering moves vectors off the unit sphere.
        self.normalized = false;
        let step = match tag {
            CenteringTag::Dimension => "center:dimension".to_string(),
            CenteringTag::Sentence => "center:sentence".to_string(),
            CenteringTag::Corpus {
                batch_size: None, ..
            } => "center:corpus".to_string(),
            CenteringTag::Corpus {
                batch_size: Some(k),
                ..
            } => format!("center:corpus(batch={k})"),
        };
        self.pipeline.push(step);
    }

    pub(crate) fn record_normalization(&mut self) {
        self.normalized = true;
        self.pipeline.push("normalize".to_string());
    }
}

/// Word vectors of one sentence, stored token-major (`len()` rows of `dim()` floats).
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceMatrix {
    id: usize,
    tokens: Vec<String>,
    dim: usize,
    values: Vec<f32>,
}

impl SentenceMatrix {
    pub fn new(tokens: Vec<String>, dim: usize, values: Vec<f32>) -> Result<Self> {
        let matrix = Self {
            id: 0,
            tokens,
            dim,
            values,
        };
        matrix.validate()?;
        Ok(matrix)
    }

    /// Builds a sentence from explicit rows; tokens are named `w0`, `w1`, ...
    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut values = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::Validation(format!(
                    "row {i} has {} entries, expected {dim}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        let tokens = (0..rows.len()).map(|i| format!("w{i}")).collect();
        Self::new(tokens, dim, values)
    }

    fn validate(&self) -> Result<()> {
        if self.tokens.is_empty() {
            return Err(Error::Validation("sentence has no tokens".into()));
        }
        if self.dim == 0 {
            return Err(Error::Validation("dimension must be positive".into()));
        }
        if self.values.len() != self.tokens.len() * self.dim {
            return Err(Error::Validation(format!(
                "{} tokens x dim {} needs {} values, got {}",
                self.tokens.len(),
                self.dim,
                self.tokens.len() * self.dim,
                self.values.len()
            )));
        }
        if let Some(tok) = self.tokens.iter().find(|t| t.len() > u16::MAX as usize) {
            return Err(Error::Validation(format!(
                "token of {} bytes exceeds the 65535-byte limit",
                tok.len()
            )));
        }
        if let Some(pos) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite entry at token {}, coordinate {}",
                pos / self.dim,
                pos % self.dim
            )));
        }
        Ok(())
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Number of words `L`.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub(crate) fn rows_mut(&mut self) -> impl Iterator<Item = &mut [f32]> {
        self.values.chunks_exact_mut(self.dim)
    }

    /// Mean of the word vectors, accumulated in f64.
    pub fn mean_vector(&self) -> Vec<f64> {
        let mut mean = vec![0.0f64; self.dim];
        for row in self.rows() {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v as f64;
            }
        }
        let n = self.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        mean
    }
}

/// A corpus of sentences sharing one embedding dimension, produced from one model layer.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingArchive {
    dim: usize,
    sentences: Vec<SentenceMatrix>,
    metadata: ArchiveMetadata,
}

impl EmbeddingArchive {
    /// Sentence ids are reassigned to their position in `sentences`.
    pub fn new(
        dim: usize,
        sentences: Vec<SentenceMatrix>,
        metadata: ArchiveMetadata,
    ) -> Result<Self> {
        let mut archive = Self {
            dim,
            sentences,
            metadata,
        };
        for (i, s) in archive.sentences.iter_mut().enumerate() {
            s.id = i;
        }
        archive.validate()?;
        Ok(archive)
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Validation("dimension must be positive".into()));
        }
        if self.sentences.is_empty() {
            return Err(Error::Validation("archive holds no sentences".into()));
        }
        if self.sentences.len() > u32::MAX as usize {
            return Err(Error::Precondition("too many sentences for a u32 count".into()));
        }
        for (i, s) in self.sentences.iter().enumerate() {
            if s.dim != self.dim {
                return Err(Error::Precondition(format!(
                    "sentence {i} has dimension {}, archive dimension is {}",
                    s.dim, self.dim
                )));
            }
            s.validate()?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of sentences `M`.
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn sentences(&self) -> &[SentenceMatrix] {
        &self.sentences
    }

    pub fn sentence(&self, index: usize) -> Result<&SentenceMatrix> {
        self.sentences.get(index).ok_or(Error::IndexOutOfRange {
            index,
            len: self.sentences.len(),
        })
    }

    pub fn metadata(&self) -> &ArchiveMetadata {
        &self.metadata
    }

    /// Total number of word vectors across all sentences.
    pub fn word_count(&self) -> usize {
        self.sentences.iter().map(SentenceMatrix::len).sum()
    }

    pub(crate) fn sentences_mut(&mut self) -> &mut [SentenceMatrix] {
        &mut self.sentences
    }

    pub(crate) fn metadata_mut(&mut self) -> &mut ArchiveMetadata {
        &mut self.metadata
    }

    fn metadata_bytes(&self) -> Result<Vec<u8>> {
        serde_json::to_vec(&self.metadata)
            .map_err(|e| Error::Format(format!("cannot serialize metadata: {e}")))
    }

    /// Exact size in bytes of the encoded archive.
    pub fn encoded_len(&self) -> Result<usize> {
        let meta = self.metadata_bytes()?.len();
        let body: usize = self
            .sentences
            .iter()
            .map(|s| 4 + s.tokens.iter().map(|t| 2 + t.len()).sum::<usize>() + 4 * s.values.len())
            .sum();
        Ok(HEADER_LEN + meta + body)
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let meta = self.metadata_bytes()?;
        let meta_len = u32::try_from(meta.len())
            .map_err(|_| Error::Precondition("metadata exceeds 4 GiB".into()))?;
        let mut out = Vec::with_capacity(self.encoded_len()?);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.sentences.len() as u32).to_le_bytes());
        out.extend_from_slice(&meta_len.to_le_bytes());
        out.extend_from_slice(&meta);
        for s in &self.sentences {
            let count = u32::try_from(s.len())
                .map_err(|_| Error::Precondition("sentence too long for a u32 count".into()))?;
            out.extend_from_slice(&count.to_le_bytes());
            for tok in &s.tokens {
                out.extend_from_slice(&(tok.len() as u16).to_le_bytes());
                out.extend_from_slice(tok.as_bytes());
            }
            for v in &s.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic = cur.take(4, "magic")?;
        if magic != MAGIC {
            return Err(Error::Format(format!("bad magic bytes {magic:?}")));
        }
        let version = cur.u32("version")?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let dim = cur.u32("dim")? as usize;
        let count = cur.u32("sentence_count")? as usize;
        let meta_len = cur.u32("metadata_len")? as usize;
        let meta = cur.take(meta_len, "metadata")?;
        let metadata: ArchiveMetadata = if meta.is_empty() {
            ArchiveMetadata::default()
        } else {
            serde_json::from_slice(meta)
                .map_err(|e| Error::Format(format!("invalid metadata JSON: {e}")))?
        };
        if dim == 0 {
            return Err(Error::Validation("dimension must be positive".into()));
        }

        let mut sentences = Vec::with_capacity(count.min(1 << 16));
        for i in 0..count {
            let n_tokens = cur.u32("token_count")? as usize;
            let mut tokens = Vec::with_capacity(n_tokens.min(1 << 16));
            for t in 0..n_tokens {
                let len = cur.u16("token length")? as usize;
                let raw = cur.take(len, "token bytes")?;
                let tok = std::str::from_utf8(raw).map_err(|_| {
                    Error::Format(format!("token {t} of sentence {i} is not valid UTF-8"))
                })?;
                tokens.push(tok.to_string());
            }
            let n_values = n_tokens
                .checked_mul(dim)
                .ok_or_else(|| Error::Corruption("token_count x dim overflows".into()))?;
            let raw = cur.take(
                n_values
                    .checked_mul(4)
                    .ok_or_else(|| Error::Corruption("vector payload overflows".into()))?,
                "vector payload",
            )?;
            let values = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            let sentence = SentenceMatrix {
                id: i,
                tokens,
                dim,
                values,
            };
            sentence
                .validate()
                .map_err(|e| Error::Validation(format!("sentence {i}: {e}")))?;
            sentences.push(sentence);
        }
        if cur.pos != bytes.len() {
            return Err(Error::Corruption(format!(
                "{} trailing bytes after the last sentence",
                bytes.len() - cur.pos
            )));
        }
        Self::new(dim, sentences, metadata)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let slice = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(slice)
            }
            None if self.pos < 4 => Err(Error::Format(format!("file too short to hold {what}"))),
            None => Err(Error::Corruption(format!(
                "truncated while reading {what} at byte {}",
                self.pos
            ))),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }
}

pub fn read_archive(path: impl AsRef<Path>) -> Result<EmbeddingArchive> {
    let bytes = fs::read(path)?;
    EmbeddingArchive::decode(&bytes)
}

pub fn write_archive(archive: &EmbeddingArchive, path: impl AsRef<Path>) -> Result<()> {
    let bytes = archive.encode()?;
    fs::write(path, bytes)?;
    Ok(())
}

pub const PAIRS_HEADER: &str = "pair_id\thyp_index\tref_index\thuman_score";

/// A hypothesis/reference sentence pair with its human rating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPair {
    pub pair_id: String,
    pub hyp_index: usize,
    pub ref_index: usize,
    pub human_score: f64,
}

/// Parses the pairs TSV. When `archive_len` is given, indices are range-checked against it.
pub fn parse_pairs(text: &str, archive_len: Option<usize>) -> Result<Vec<EvalPair>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end_matches('\r') == PAIRS_HEADER => {}
        Some((_, header)) => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header {PAIRS_HEADER:?}, found {header:?}"),
            })
        }
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "missing header".into(),
            })
        }
    }

    let mut pairs = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(parse_err(format!("expected 4 fields, found {}", fields.len())));
        }
        let index = |s: &str, name: &str| -> Result<usize> {
            let v: usize = s
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("{name} {s:?} is not a non-negative integer")))?;
            match archive_len {
                Some(len) if v >= len => Err(Error::Parse {
                    line: line_no,
                    message: format!("{name} {v} out of range for archive of {len} sentences"),
                }),
                _ => Ok(v),
            }
        };
        let hyp_index = index(fields[1], "hyp_index")?;
        let ref_index = index(fields[2], "ref_index")?;
        let human_score: f64 = fields[3]
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("human_score {:?} is not numeric", fields[3])))?;
        if !human_score.is_finite() {
            return Err(parse_err("human_score is not finite".into()));
        }
        pairs.push(EvalPair {
            pair_id: fields[0].to_string(),
            hyp_index,
            ref_index,
            human_score,
        });
    }
    Ok(pairs)
}

pub fn read_pairs(path: impl AsRef<Path>, archive_len: Option<usize>) -> Result<Vec<EvalPair>> {
    let text = fs::read_to_string(path)?;
    parse_pairs(&text, archive_len)
}

pub fn write_pairs(pairs: &[EvalPair], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from(PAIRS_HEADER);
    out.push('\n');
    for p in pairs {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            p.pair_id, p.hyp_index, p.ref_index, p.human_score
        ));
    }
    fs::write(path, out)?;
    Ok(())
}
