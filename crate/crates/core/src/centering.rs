//! Word-vector centering schemes and unit-norm normalization.
//!
//! Every transform returns a new archive with its metadata tags updated; these
//! are the only operations that modify vectors of an [`EmbeddingArchive`].

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::archive::{CenteringTag, EmbeddingArchive, SentenceMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum CenteringMode {
    None,
    Dimension,
    Sentence,
    /// Corpus-mean centering; with `batch_size` set, batch-mean centering over
    /// seeded random groups of that many sentences.
    Corpus { batch_size: Option<usize> },
}

impl CenteringMode {
    pub fn validate(&self) -> Result<()> {
        match self {
            CenteringMode::Corpus {
                batch_size: Some(k),
            } if *k < 2 => Err(Error::Config(format!("batch size must be at least 2, got {k}"))),
            _ => Ok(()),
        }
    }
}

/// Applies `mode`, then unit-normalizes when `normalize` is set.
pub fn apply(
    archive: &EmbeddingArchive,
    mode: CenteringMode,
    normalize: bool,
    seed: u64,
) -> Result<EmbeddingArchive> {
    mode.validate()?;
    let centered = match mode {
        CenteringMode::None => archive.clone(),
        CenteringMode::Dimension => center_dimension(archive),
        CenteringMode::Sentence => center_sentence(archive),
        CenteringMode::Corpus { batch_size } => center_corpus(archive, batch_size, seed)?,
    };
    if normalize {
        normalize_words(&centered)
    } else {
        Ok(centered)
    }
}

fn subtract(row: &mut [f32], mean: &[f64]) {
    for (v, &m) in row.iter_mut().zip(mean) {
        *v = (*v as f64 - m) as f32;
    }
}

/// Subtracts from each word vector the mean of its own coordinates.
pub fn center_dimension(archive: &EmbeddingArchive) -> EmbeddingArchive {
    let mut out = archive.clone();
    for sentence in out.sentences_mut() {
        for row in sentence.rows_mut() {
            let mean = row.iter().map(|&v| v as f64).sum::<f64>() / row.len() as f64;
            row.iter_mut().for_each(|v| *v = (*v as f64 - mean) as f32);
        }
    }
    out.metadata_mut().record_centering(CenteringTag::Dimension);
    out
}

/// Subtracts from each word vector the mean word vector of its sentence.
pub fn center_sentence(archive: &EmbeddingArchive) -> EmbeddingArchive {
    let mut out = archive.clone();
    for sentence in out.sentences_mut() {
        let mean = sentence.mean_vector();
        sentence.rows_mut().for_each(|row| subtract(row, &mean));
    }
    out.metadata_mut().record_centering(CenteringTag::Sentence);
    out
}

fn word_mean<'a>(sentences: impl Iterator<Item = &'a SentenceMatrix>, dim: usize) -> Vec<f64> {
    let mut sum = vec![0.0f64; dim];
    let mut count = 0usize;
    for s in sentences {
        for row in s.rows() {
            for (acc, &v) in sum.iter_mut().zip(row) {
                *acc += v as f64;
            }
        }
        count += s.len();
    }
    sum.iter_mut().for_each(|v| *v /= count as f64);
    sum
}

/// Subtracts the mean word vector of the whole corpus, or of each batch when
/// `batch_size` is given.
///
/// Batches are formed by shuffling sentence indices with `seed` and cutting
/// the result into consecutive chunks of at most `batch_size` sentences.
pub fn center_corpus(
    archive: &EmbeddingArchive,
    batch_size: Option<usize>,
    seed: u64,
) -> Result<EmbeddingArchive> {
    CenteringMode::Corpus { batch_size }.validate()?;
    let mut out = archive.clone();
    let dim = archive.dim();
    let m = archive.len();

    let groups: Vec<Vec<usize>> = match batch_size {
        Some(k) if k < m => {
            let mut order: Vec<usize> = (0..m).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            order
                .chunks(k)
                .map(|chunk| {
                    let mut group = chunk.to_vec();
                    // Sum in archive order so a single batch matches whole-corpus centering bit for bit.
                    group.sort_unstable();
                    group
                })
                .collect()
        }
        _ => vec![(0..m).collect()],
    };

    for group in &groups {
        let mean = word_mean(group.iter().map(|&i| &archive.sentences()[i]), dim);
        for &i in group {
            out.sentences_mut()[i]
                .rows_mut()
                .for_each(|row| subtract(row, &mean));
        }
    }
    out.metadata_mut()
        .record_centering(CenteringTag::Corpus { batch_size, seed });
    Ok(out)
}

/// Scales every word vector to unit Euclidean norm.
pub fn normalize_words(archive: &EmbeddingArchive) -> Result<EmbeddingArchive> {
    let mut out = archive.clone();
    for (si, sentence) in out.sentences_mut().iter_mut().enumerate() {
        for (ti, row) in sentence.rows_mut().enumerate() {
            let norm = row.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::DegenerateVector {
                    sentence: si,
                    token: ti,
                });
            }
            row.iter_mut().for_each(|v| *v = (*v as f64 / norm) as f32);
        }
    }
    out.metadata_mut().record_normalization();
    Ok(out)
}
