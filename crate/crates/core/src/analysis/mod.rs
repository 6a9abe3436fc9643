//! Metric evaluation against human ratings and embedding-geometry diagnostics.

mod contextuality;
mod correlation;

pub use contextuality::{
    contextuality, property_check, ContextualityProfile, PropertyReport, PropertyThresholds,
    PropertyVerdict, DEFAULT_SAMPLES,
};
pub use correlation::{average_ranks, kendall, pearson, spearman, CorrelationReport};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::archive::{EmbeddingArchive, EvalPair};
use crate::error::{Error, Result};
use crate::metrics::{score, Metric, MetricConfig};

/// Scores every pair in order. The first failing pair (in input order) aborts the run.
pub fn score_pairs(
    archive: &EmbeddingArchive,
    pairs: &[EvalPair],
    config: &MetricConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    let results: Vec<Result<f64>> = pairs
        .par_iter()
        .map(|p| {
            score(archive, p.hyp_index, p.ref_index, config)
                .map(|s| s.value)
                .map_err(|e| Error::Pair {
                    pair_id: p.pair_id.clone(),
                    source: Box::new(e),
                })
        })
        .collect();
    results.into_iter().collect()
}

/// Correlates metric scores with the pairs' human ratings.
pub fn correlate(
    archive: &EmbeddingArchive,
    pairs: &[EvalPair],
    config: &MetricConfig,
) -> Result<CorrelationReport> {
    if pairs.len() < 2 {
        return Err(Error::Precondition(format!(
            "correlation needs at least 2 pairs, got {}",
            pairs.len()
        )));
    }
    let scores = score_pairs(archive, pairs, config)?;
    let human: Vec<f64> = pairs.iter().map(|p| p.human_score).collect();
    CorrelationReport::compute(&scores, &human)
}

/// Dataset-size-weighted mean of Pearson coefficients.
pub fn pooled_correlation(entries: &[(CorrelationReport, usize)]) -> Result<f64> {
    if entries.is_empty() {
        return Err(Error::Precondition("no reports to pool".into()));
    }
    if let Some((_, n)) = entries.iter().find(|(_, n)| *n == 0) {
        return Err(Error::Precondition(format!("dataset size must be positive, got {n}")));
    }
    let total: usize = entries.iter().map(|(_, n)| n).sum();
    let weighted: f64 = entries.iter().map(|(r, n)| r.pearson * *n as f64).sum();
    Ok(weighted / total as f64)
}

/// One scored dataset: an archive and the pairs that index into it.
#[derive(Debug, Clone, Copy)]
pub struct EvalSet<'a> {
    pub archive: &'a EmbeddingArchive,
    pub pairs: &'a [EvalPair],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub temperature: f64,
    /// One report per dataset, in input order.
    pub reports: Vec<CorrelationReport>,
    pub pooled_pearson: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureSweep {
    pub metric: Metric,
    pub entries: Vec<SweepEntry>,
    pub best_temperature: f64,
}

/// Evaluates a tempered metric at each temperature in `grid` over one or more
/// datasets, pooling Pearson by dataset size and selecting the best temperature
/// (first one on ties).
pub fn temperature_sweep(
    datasets: &[EvalSet<'_>],
    base: &MetricConfig,
    grid: &[f64],
) -> Result<TemperatureSweep> {
    if !base.metric.is_tempered() {
        return Err(Error::Config(format!("{} has no temperature to sweep", base.metric)));
    }
    if grid.is_empty() {
        return Err(Error::Precondition("temperature grid is empty".into()));
    }
    if datasets.is_empty() {
        return Err(Error::Precondition("no datasets to sweep".into()));
    }
    let mut entries = Vec::with_capacity(grid.len());
    for &t in grid {
        let config = base.with_temperature(t);
        let reports = datasets
            .iter()
            .map(|d| correlate(d.archive, d.pairs, &config))
            .collect::<Result<Vec<_>>>()?;
        let pooled = pooled_correlation(
            &reports
                .iter()
                .zip(datasets)
                .map(|(r, d)| (*r, d.pairs.len()))
                .collect::<Vec<_>>(),
        )?;
        entries.push(SweepEntry {
            temperature: t,
            reports,
            pooled_pearson: pooled,
        });
    }
    let best_temperature = argmax_temperature(entries.iter().map(|e| (e.temperature, e.pooled_pearson)));
    Ok(TemperatureSweep {
        metric: base.metric,
        entries,
        best_temperature,
    })
}

fn argmax_temperature(candidates: impl Iterator<Item = (f64, f64)>) -> f64 {
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for (t, r) in candidates {
        if r > best.1 {
            best = (t, r);
        }
    }
    best.0
}

/// Averages pooled Pearson across sweeps of different backbones run on the
/// same grid, and returns the temperature with the highest average.
pub fn model_averaged_temperature(sweeps: &[TemperatureSweep]) -> Result<f64> {
    let first = sweeps
        .first()
        .ok_or_else(|| Error::Precondition("no sweeps to average".into()))?;
    let grid: Vec<f64> = first.entries.iter().map(|e| e.temperature).collect();
    for s in sweeps {
        let other: Vec<f64> = s.entries.iter().map(|e| e.temperature).collect();
        if other != grid {
            return Err(Error::Precondition("sweeps use different temperature grids".into()));
        }
    }
    let averaged = grid.iter().enumerate().map(|(k, &t)| {
        let mean = sweeps.iter().map(|s| s.entries[k].pooled_pearson).sum::<f64>()
            / sweeps.len() as f64;
        (t, mean)
    });
    Ok(argmax_temperature(averaged))
}
