//! Baseline, self and intra-sentence cosine similarity of word vectors, and
//! the layer-trend checks built on them.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::archive::EmbeddingArchive;
use crate::error::{Error, Result};

pub const DEFAULT_SAMPLES: usize = 100_000;

// Each statistic draws from its own ChaCha stream of the run seed.
const BASELINE_STREAM: u64 = 1;
const SELF_STREAM: u64 = 2;
const INTRA_STREAM: u64 = 3;

type WordRef = (usize, usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextualityProfile {
    pub layer: Option<u32>,
    /// Mean cosine of two random words from different sentences.
    pub baseline_sim: f64,
    /// Mean cosine of the same token string in two different sentences.
    pub self_sim: Option<f64>,
    /// Mean cosine of two distinct words of the same sentence.
    pub intra_sim: Option<f64>,
    pub baseline_samples: usize,
    pub self_samples: usize,
    pub intra_samples: usize,
}

fn cosine(archive: &EmbeddingArchive, a: WordRef, b: WordRef) -> Result<f64> {
    let u = archive.sentences()[a.0].row(a.1);
    let v = archive.sentences()[b.0].row(b.1);
    let (mut dot, mut nu, mut nv) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in u.iter().zip(v) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        nu += x * x;
        nv += y * y;
    }
    for (norm, (sentence, token)) in [(nu, a), (nv, b)] {
        if norm == 0.0 {
            return Err(Error::DegenerateVector { sentence, token });
        }
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn all_words(archive: &EmbeddingArchive) -> Vec<WordRef> {
    archive
        .sentences()
        .iter()
        .enumerate()
        .flat_map(|(s, sent)| (0..sent.len()).map(move |t| (s, t)))
        .collect()
}

fn baseline(archive: &EmbeddingArchive, n: usize, seed: u64) -> Result<f64> {
    let words = all_words(archive);
    let mut rng = stream(seed, BASELINE_STREAM);
    let mut sum = 0.0;
    for _ in 0..n {
        let a = words[rng.random_range(0..words.len())];
        let b = loop {
            let b = words[rng.random_range(0..words.len())];
            if b.0 != a.0 {
                break b;
            }
        };
        sum += cosine(archive, a, b)?;
    }
    Ok(sum / n as f64)
}

fn self_similarity(archive: &EmbeddingArchive, n: usize, seed: u64) -> Result<Option<f64>> {
    let mut by_token: BTreeMap<&str, Vec<WordRef>> = BTreeMap::new();
    for (s, sent) in archive.sentences().iter().enumerate() {
        for (t, tok) in sent.tokens().iter().enumerate() {
            by_token.entry(tok.as_str()).or_default().push((s, t));
        }
    }
    // Tokens that occur in at least two different sentences.
    let groups: Vec<Vec<WordRef>> = by_token
        .into_values()
        .filter(|occ| occ.iter().any(|w| w.0 != occ[0].0))
        .collect();
    if groups.is_empty() {
        return Ok(None);
    }
    let occurrences: Vec<(usize, WordRef)> = groups
        .iter()
        .enumerate()
        .flat_map(|(g, occ)| occ.iter().map(move |&w| (g, w)))
        .collect();

    let mut rng = stream(seed, SELF_STREAM);
    let mut sum = 0.0;
    for _ in 0..n {
        let (g, a) = occurrences[rng.random_range(0..occurrences.len())];
        let group = &groups[g];
        let b = loop {
            let b = group[rng.random_range(0..group.len())];
            if b.0 != a.0 {
                break b;
            }
        };
        sum += cosine(archive, a, b)?;
    }
    Ok(Some(sum / n as f64))
}

fn intra_similarity(archive: &EmbeddingArchive, n: usize, seed: u64) -> Result<Option<f64>> {
    let words: Vec<WordRef> = all_words(archive)
        .into_iter()
        .filter(|&(s, _)| archive.sentences()[s].len() >= 2)
        .collect();
    if words.is_empty() {
        return Ok(None);
    }
    let mut rng = stream(seed, INTRA_STREAM);
    let mut sum = 0.0;
    for _ in 0..n {
        let (s, t) = words[rng.random_range(0..words.len())];
        let len = archive.sentences()[s].len();
        let mut other = rng.random_range(0..len - 1);
        if other >= t {
            other += 1;
        }
        sum += cosine(archive, (s, t), (s, other))?;
    }
    Ok(Some(sum / n as f64))
}

/// Measures the three similarity statistics with `n_samples` seeded draws
/// each (with replacement). Statistics that cannot be measured on this
/// archive are reported as `None`.
pub fn contextuality(
    archive: &EmbeddingArchive,
    n_samples: usize,
    seed: u64,
) -> Result<ContextualityProfile> {
    if archive.len() < 2 {
        return Err(Error::Precondition(
            "contextuality needs at least two sentences".into(),
        ));
    }
    if n_samples == 0 {
        return Err(Error::Precondition("n_samples must be positive".into()));
    }
    let baseline_sim = baseline(archive, n_samples, seed)?;
    let self_sim = self_similarity(archive, n_samples, seed)?;
    let intra_sim = intra_similarity(archive, n_samples, seed)?;
    Ok(ContextualityProfile {
        layer: archive.metadata().layer,
        baseline_sim,
        self_samples: if self_sim.is_some() { n_samples } else { 0 },
        intra_samples: if intra_sim.is_some() { n_samples } else { 0 },
        self_sim,
        intra_sim,
        baseline_samples: n_samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropertyThresholds {
    /// Largest allowed `|baseline_sim|` at every layer.
    pub baseline: f64,
    /// Tolerated step against the expected trend between consecutive layers.
    pub slack: f64,
}

impl Default for PropertyThresholds {
    fn default() -> Self {
        Self {
            baseline: 0.1,
            slack: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyVerdict {
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub zero_baseline: PropertyVerdict,
    pub decreasing_self_similarity: PropertyVerdict,
    pub increasing_intra_similarity: PropertyVerdict,
}

impl PropertyReport {
    pub fn all_pass(&self) -> bool {
        self.zero_baseline.pass
            && self.decreasing_self_similarity.pass
            && self.increasing_intra_similarity.pass
    }
}

fn trend_verdict(
    series: &[(Option<u32>, Option<f64>)],
    slack: f64,
    increasing: bool,
    name: &str,
) -> PropertyVerdict {
    let mut values = Vec::with_capacity(series.len());
    for (layer, v) in series {
        match v {
            Some(v) => values.push((*layer, *v)),
            None => {
                return PropertyVerdict {
                    pass: false,
                    detail: format!("{name} not measurable at layer {layer:?}"),
                }
            }
        }
    }
    for w in values.windows(2) {
        let ((l0, v0), (l1, v1)) = (w[0], w[1]);
        let violated = if increasing {
            v1 < v0 - slack
        } else {
            v1 > v0 + slack
        };
        if violated {
            return PropertyVerdict {
                pass: false,
                detail: format!("{name} moves from {v0:.4} (layer {l0:?}) to {v1:.4} (layer {l1:?})"),
            };
        }
    }
    let first = values.first().map(|v| v.1).unwrap_or(f64::NAN);
    let last = values.last().map(|v| v.1).unwrap_or(f64::NAN);
    PropertyVerdict {
        pass: true,
        detail: format!("{name} {first:.4} -> {last:.4}"),
    }
}

/// Checks the three layer-wise properties of well-contextualized vectors:
/// near-zero baseline similarity, non-increasing self-similarity and
/// non-decreasing intra-sentence similarity. Profiles are ordered by layer
/// (profiles without a layer keep their position after the tagged ones).
pub fn property_check(
    profiles: &[ContextualityProfile],
    thresholds: PropertyThresholds,
) -> Result<PropertyReport> {
    if profiles.len() < 2 {
        return Err(Error::Precondition(
            "property checks need profiles from at least two layers".into(),
        ));
    }
    let mut ordered: Vec<&ContextualityProfile> = profiles.iter().collect();
    ordered.sort_by_key(|p| (p.layer.is_none(), p.layer));

    let worst = ordered
        .iter()
        .map(|p| (p.layer, p.baseline_sim))
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .expect("non-empty");
    let zero_baseline = PropertyVerdict {
        pass: worst.1.abs() <= thresholds.baseline,
        detail: format!(
            "max |baseline| = {:.4} at layer {:?} (threshold {})",
            worst.1.abs(),
            worst.0,
            thresholds.baseline
        ),
    };

    let self_series: Vec<_> = ordered.iter().map(|p| (p.layer, p.self_sim)).collect();
    let intra_series: Vec<_> = ordered.iter().map(|p| (p.layer, p.intra_sim)).collect();
    Ok(PropertyReport {
        zero_baseline,
        decreasing_self_similarity: trend_verdict(
            &self_series,
            thresholds.slack,
            false,
            "self similarity",
        ),
        increasing_intra_similarity: trend_verdict(
            &intra_series,
            thresholds.slack,
            true,
            "intra similarity",
        ),
    })
}
