//! Sentence similarity metrics of the form `Sim = C(X1, X2) / sqrt(C(X1, X1) C(X2, X2))`.
//!
//! Each metric is defined by its cross term `C`. Recall-direction cores
//! compare every word of the first sentence against the second; precision
//! variants swap the arguments and F1 variants take the harmonic mean of the
//! two normalized directions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::archive::{EmbeddingArchive, SentenceMatrix};
use crate::error::{Error, Result};
use crate::ot::{exact_wmd, plan_objective, sinkhorn, sinkhorn_converged, SimilarityMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Sbert,
    Cka,
    Moverscore,
    BertscoreRecall,
    BertscorePrecision,
    BertscoreF1,
    Twmd,
    Trwmd,
    TwmdPrecision,
    TrwmdPrecision,
    TwmdF1,
    TrwmdF1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Core {
    Sbert,
    Cka,
    Mover,
    Bertscore,
    Twmd,
    Trwmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Recall,
    Precision,
    F1,
}

impl Metric {
    pub const ALL: [Metric; 12] = [
        Metric::Sbert,
        Metric::Cka,
        Metric::Moverscore,
        Metric::BertscoreRecall,
        Metric::BertscorePrecision,
        Metric::BertscoreF1,
        Metric::Twmd,
        Metric::Trwmd,
        Metric::TwmdPrecision,
        Metric::TrwmdPrecision,
        Metric::TwmdF1,
        Metric::TrwmdF1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Sbert => "sbert",
            Metric::Cka => "cka",
            Metric::Moverscore => "moverscore",
            Metric::BertscoreRecall => "bertscore_recall",
            Metric::BertscorePrecision => "bertscore_precision",
            Metric::BertscoreF1 => "bertscore_f1",
            Metric::Twmd => "twmd",
            Metric::Trwmd => "trwmd",
            Metric::TwmdPrecision => "twmd_precision",
            Metric::TrwmdPrecision => "trwmd_precision",
            Metric::TwmdF1 => "twmd_f1",
            Metric::TrwmdF1 => "trwmd_f1",
        }
    }

    fn core(self) -> Core {
        match self {
            Metric::Sbert => Core::Sbert,
            Metric::Cka => Core::Cka,
            Metric::Moverscore => Core::Mover,
            Metric::BertscoreRecall | Metric::BertscorePrecision | Metric::BertscoreF1 => {
                Core::Bertscore
            }
            Metric::Twmd | Metric::TwmdPrecision | Metric::TwmdF1 => Core::Twmd,
            Metric::Trwmd | Metric::TrwmdPrecision | Metric::TrwmdF1 => Core::Trwmd,
        }
    }

    fn direction(self) -> Direction {
        match self {
            Metric::BertscorePrecision | Metric::TwmdPrecision | Metric::TrwmdPrecision => {
                Direction::Precision
            }
            Metric::BertscoreF1 | Metric::TwmdF1 | Metric::TrwmdF1 => Direction::F1,
            _ => Direction::Recall,
        }
    }

    pub fn is_tempered(self) -> bool {
        matches!(self.core(), Core::Twmd | Core::Trwmd)
    }

    pub fn uses_sinkhorn(self) -> bool {
        self.core() == Core::Twmd
    }

    /// Metrics whose definition assumes unit-norm word vectors.
    pub fn requires_unit_vectors(self) -> bool {
        matches!(self.core(), Core::Bertscore | Core::Twmd | Core::Trwmd)
    }

    /// Temperature tuned for this metric, with or without batch-mean centering.
    pub fn default_temperature(self, batch_centered: bool) -> Option<f64> {
        let f1 = self.direction() == Direction::F1;
        match (self.core(), batch_centered, f1) {
            (Core::Twmd, false, false) | (Core::Trwmd, false, false) => Some(0.02),
            (Core::Twmd, true, false) => Some(0.10),
            (Core::Trwmd, true, false) => Some(0.15),
            (Core::Twmd, false, true) | (Core::Trwmd, false, true) => Some(0.01),
            (Core::Twmd, true, true) => Some(0.08),
            (Core::Trwmd, true, true) => Some(0.06),
            _ => None,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown metric {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub metric: Metric,
    pub temperature: Option<f64>,
    pub sinkhorn_iters: usize,
    pub normalize: bool,
    pub include_entropy: bool,
}

impl MetricConfig {
    /// Defaults for uncentered vectors: normalization on, one Sinkhorn iteration.
    pub fn new(metric: Metric) -> Self {
        Self {
            metric,
            temperature: metric.default_temperature(false),
            sinkhorn_iters: 1,
            normalize: true,
            include_entropy: false,
        }
    }

    /// Defaults tuned for batch-mean-centered vectors.
    pub fn batch_centered(metric: Metric) -> Self {
        Self {
            temperature: metric.default_temperature(true),
            ..Self::new(metric)
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = Some(temperature);
        self
    }

    pub fn with_iters(mut self, iters: usize) -> Self {
        self.sinkhorn_iters = iters;
        self
    }

    pub fn with_normalize(mut self, normalize: bool) -> Self {
        self.normalize = normalize;
        self
    }

    pub fn with_entropy(mut self, include_entropy: bool) -> Self {
        self.include_entropy = include_entropy;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.metric;
        match (m.is_tempered(), self.temperature) {
            (true, None) => return Err(Error::Config(format!("{m} requires a temperature"))),
            (true, Some(t)) if !(t > 0.0) || !t.is_finite() => {
                return Err(Error::Config(format!("temperature must be positive, got {t}")))
            }
            (false, Some(_)) => {
                return Err(Error::Config(format!("{m} does not take a temperature")))
            }
            _ => {}
        }
        if self.sinkhorn_iters == 0 {
            return Err(Error::Config("sinkhorn_iters must be at least 1".into()));
        }
        if !m.uses_sinkhorn() && self.sinkhorn_iters != 1 {
            return Err(Error::Config(format!("{m} does not run Sinkhorn iterations")));
        }
        if self.include_entropy && !m.uses_sinkhorn() {
            return Err(Error::Config(format!("include_entropy applies to twmd metrics, not {m}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScore {
    pub value: f64,
    /// `(C(X1, X2), C(X1, X1), C(X2, X2))` for single-direction normalized metrics.
    pub components: Option<(f64, f64, f64)>,
}

/// `c12 / sqrt(c11 * c22)`.
pub fn normalized_sim(c12: f64, c11: f64, c22: f64) -> Result<f64> {
    if !(c11 > 0.0) || !(c22 > 0.0) {
        return Err(Error::Normalization(format!(
            "self-similarity terms must be positive, got {c11} and {c22}"
        )));
    }
    Ok(c12 / (c11 * c22).sqrt())
}

/// Harmonic mean of precision and recall; 0 when both sum to 0.
pub fn harmonic_f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn check_dims(x1: &SentenceMatrix, x2: &SentenceMatrix) -> Result<()> {
    if x1.dim() != x2.dim() {
        return Err(Error::DimensionMismatch {
            left: x1.dim(),
            right: x2.dim(),
        });
    }
    Ok(())
}

/// Inner product of the two mean-pooled sentence vectors.
pub fn sbert_c(x1: &SentenceMatrix, x2: &SentenceMatrix) -> Result<f64> {
    check_dims(x1, x2)?;
    let (m1, m2) = (x1.mean_vector(), x2.mean_vector());
    Ok(m1.iter().zip(&m2).map(|(a, b)| a * b).sum())
}

/// Sum of squared word-pair inner products, `Tr(X1 X1^T X2 X2^T)`.
pub fn cka_c(x1: &SentenceMatrix, x2: &SentenceMatrix) -> Result<f64> {
    let s = SimilarityMatrix::from_sentences(x1, x2)?;
    Ok(s.values().iter().map(|v| v * v).sum())
}

/// Exact word mover's similarity.
pub fn moverscore_c(x1: &SentenceMatrix, x2: &SentenceMatrix) -> Result<f64> {
    let s = SimilarityMatrix::from_sentences(x1, x2)?;
    Ok(exact_wmd(&s).value)
}

/// Mean over words of `x1` of the best inner product against `x2`.
pub fn bertscore_recall_c(x1: &SentenceMatrix, x2: &SentenceMatrix) -> Result<f64> {
    let s = SimilarityMatrix::from_sentences(x1, x2)?;
    let total: f64 = s
        .values()
        .rows()
        .into_iter()
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .sum();
    Ok(total / s.rows() as f64)
}

pub fn bertscore_precision_c(x1: &SentenceMatrix, x2: &SentenceMatrix) -> Result<f64> {
    bertscore_recall_c(x2, x1)
}

pub fn bertscore_f1_c(x1: &SentenceMatrix, x2: &SentenceMatrix) -> Result<f64> {
    Ok(harmonic_f1(
        bertscore_precision_c(x1, x2)?,
        bertscore_recall_c(x1, x2)?,
    ))
}

/// Tempered WMD after a fixed number of Sinkhorn iterations.
pub fn twmd_c(
    x1: &SentenceMatrix,
    x2: &SentenceMatrix,
    temperature: f64,
    iters: usize,
    include_entropy: bool,
) -> Result<f64> {
    let s = SimilarityMatrix::from_sentences(x1, x2)?;
    let plan = sinkhorn(&s, temperature, iters)?;
    plan_objective(&plan, &s, temperature, include_entropy)
}

/// Tempered WMD with Sinkhorn run to marginal tolerance `tol`.
pub fn twmd_converged_c(
    x1: &SentenceMatrix,
    x2: &SentenceMatrix,
    temperature: f64,
    tol: f64,
    max_iters: usize,
    include_entropy: bool,
) -> Result<f64> {
    let s = SimilarityMatrix::from_sentences(x1, x2)?;
    let out = sinkhorn_converged(&s, temperature, tol, max_iters)?;
    plan_objective(&out.plan, &s, temperature, include_entropy)
}

/// Closed-form tempered relaxed WMD: `(T / L1) * sum_i logsumexp_j(S[i, j] / T)`.
pub fn trwmd_c(x1: &SentenceMatrix, x2: &SentenceMatrix, temperature: f64) -> Result<f64> {
    let s = SimilarityMatrix::from_sentences(x1, x2)?;
    trwmd_from_similarity(&s, temperature)
}

pub(crate) fn trwmd_from_similarity(s: &SimilarityMatrix, temperature: f64) -> Result<f64> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::Precondition(format!(
            "temperature must be positive and finite, got {temperature}"
        )));
    }
    let mut total = 0.0;
    for row in s.values().rows() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tail: f64 = row.iter().map(|v| ((v - max) / temperature).exp()).sum();
        // T * lse(S/T) = max + T * log(sum exp((S - max) / T))
        total += max + temperature * tail.ln();
    }
    Ok(total / s.rows() as f64)
}

fn cross_term(
    core: Core,
    x1: &SentenceMatrix,
    x2: &SentenceMatrix,
    config: &MetricConfig,
) -> Result<f64> {
    let temperature = || {
        config
            .temperature
            .ok_or_else(|| Error::Config(format!("{} requires a temperature", config.metric)))
    };
    match core {
        Core::Sbert => sbert_c(x1, x2),
        Core::Cka => cka_c(x1, x2),
        Core::Mover => moverscore_c(x1, x2),
        Core::Bertscore => bertscore_recall_c(x1, x2),
        Core::Twmd => twmd_c(
            x1,
            x2,
            temperature()?,
            config.sinkhorn_iters,
            config.include_entropy,
        ),
        Core::Trwmd => trwmd_c(x1, x2, temperature()?),
    }
}

fn directed(
    core: Core,
    x1: &SentenceMatrix,
    x2: &SentenceMatrix,
    config: &MetricConfig,
) -> Result<SimilarityScore> {
    let c12 = cross_term(core, x1, x2, config)?;
    if !config.normalize {
        return Ok(SimilarityScore {
            value: c12,
            components: None,
        });
    }
    let c11 = cross_term(core, x1, x1, config)?;
    let c22 = cross_term(core, x2, x2, config)?;
    Ok(SimilarityScore {
        value: normalized_sim(c12, c11, c22)?,
        components: Some((c12, c11, c22)),
    })
}

/// Scores a sentence pair without checking archive tags.
pub fn score_sentences(
    x1: &SentenceMatrix,
    x2: &SentenceMatrix,
    config: &MetricConfig,
) -> Result<SimilarityScore> {
    config.validate()?;
    check_dims(x1, x2)?;
    let core = config.metric.core();
    match config.metric.direction() {
        Direction::Recall => directed(core, x1, x2, config),
        Direction::Precision => directed(core, x2, x1, config),
        Direction::F1 => {
            let recall = directed(core, x1, x2, config)?.value;
            let precision = directed(core, x2, x1, config)?.value;
            Ok(SimilarityScore {
                value: harmonic_f1(precision, recall),
                components: None,
            })
        }
    }
}

/// Scores archive sentences `hyp_index` (X1) against `ref_index` (X2).
pub fn score(
    archive: &EmbeddingArchive,
    hyp_index: usize,
    ref_index: usize,
    config: &MetricConfig,
) -> Result<SimilarityScore> {
    config.validate()?;
    if config.metric.requires_unit_vectors() && !archive.metadata().is_normalized() {
        return Err(Error::Config(format!(
            "{} expects unit-normalized word vectors; normalize the archive first",
            config.metric
        )));
    }
    let x1 = archive.sentence(hyp_index)?;
    let x2 = archive.sentence(ref_index)?;
    score_sentences(x1, x2, config)
}
