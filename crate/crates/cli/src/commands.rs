use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use twmd_core::analysis::{
    contextuality, correlate, property_check, score_pairs, temperature_sweep, ContextualityProfile,
    CorrelationReport, EvalSet, PropertyReport, PropertyThresholds,
};
use twmd_core::archive::{parse_pairs, CenteringTag};
use twmd_core::centering;
use twmd_core::{CenteringMode, EmbeddingArchive, EvalPair, MetricConfig};

use crate::args::{
    CenterArgs, CenterMode, ContextualityArgs, MetricArgs, ScoreArgs, SweepArgs,
};
use crate::error::{CliError, Result};
use crate::manifest::{digest, InputDigest, RunManifest};

/// What a command produced: the output bytes and the manifest describing the run.
pub struct Output {
    pub bytes: Vec<u8>,
    pub manifest: RunManifest,
}

struct Loaded<T> {
    value: T,
    digest: InputDigest,
}

fn read_input(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::Input {
        path: path.to_path_buf(),
        source: e.into(),
    })
}

fn load_archive(path: &Path) -> Result<Loaded<EmbeddingArchive>> {
    let bytes = read_input(path)?;
    let value = EmbeddingArchive::decode(&bytes).map_err(|source| CliError::Input {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(Loaded {
        value,
        digest: InputDigest {
            path: path.to_path_buf(),
            sha256: digest(&bytes),
        },
    })
}

fn load_pairs(path: &Path, archive_len: usize) -> Result<Loaded<Vec<EvalPair>>> {
    let bytes = read_input(path)?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| CliError::Input {
        path: path.to_path_buf(),
        source: twmd_core::Error::Format(format!("pairs file is not UTF-8: {e}")),
    })?;
    let value = parse_pairs(&text, Some(archive_len)).map_err(|source| CliError::Input {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(Loaded {
        value,
        digest: InputDigest {
            path: path.to_path_buf(),
            sha256: digest(&bytes),
        },
    })
}

fn to_json<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("plain data serializes")
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
    text.push('\n');
    text.into_bytes()
}

fn is_batch_centered(archive: &EmbeddingArchive) -> bool {
    matches!(
        archive.metadata().centering(),
        Some(CenteringTag::Corpus {
            batch_size: Some(_),
            ..
        })
    )
}

/// Resolves flags into a metric configuration. Without `--temperature`, the
/// default for batch-centered archives differs from the uncentered one.
fn metric_config(args: &MetricArgs, archive: &EmbeddingArchive) -> MetricConfig {
    let base = if is_batch_centered(archive) {
        MetricConfig::batch_centered(args.metric)
    } else {
        MetricConfig::new(args.metric)
    };
    let base = match args.temperature {
        Some(t) => base.with_temperature(t),
        None => base,
    };
    base.with_iters(args.iters)
        .with_normalize(!args.no_normalize)
        .with_entropy(args.include_entropy)
}

pub fn center(args: &CenterArgs) -> Result<Output> {
    let input = load_archive(&args.input)?;
    let mode = match args.center {
        CenterMode::None => CenteringMode::None,
        CenterMode::Dimension => CenteringMode::Dimension,
        CenterMode::Sentence => CenteringMode::Sentence,
        CenterMode::Corpus => CenteringMode::Corpus {
            batch_size: args.batch_size,
        },
    };
    if args.batch_size.is_some() && args.center != CenterMode::Corpus {
        return Err(CliError::Usage("--batch-size applies to --center corpus only".into()));
    }
    let out = centering::apply(&input.value, mode, args.normalize, args.seed)?;
    Ok(Output {
        bytes: out.encode()?,
        manifest: RunManifest::new("center", to_json(args), vec![input.digest], Some(args.seed)),
    })
}

fn scored(args: &ScoreArgs) -> Result<(Vec<EvalPair>, MetricConfig, EmbeddingArchive, Vec<InputDigest>)> {
    let archive = load_archive(&args.archive)?;
    let pairs = load_pairs(&args.pairs, archive.value.len())?;
    let config = metric_config(&args.metric, &archive.value);
    config.validate()?;
    Ok((pairs.value, config, archive.value, vec![archive.digest, pairs.digest]))
}

pub fn score(args: &ScoreArgs) -> Result<Output> {
    let (pairs, config, archive, inputs) = scored(args)?;
    let scores = score_pairs(&archive, &pairs, &config)?;
    let mut tsv = String::from("pair_id\tscore\n");
    for (pair, s) in pairs.iter().zip(&scores) {
        writeln!(tsv, "{}\t{}", pair.pair_id, s).expect("writing to a String");
    }
    let config_json = json!({ "args": to_json(args), "metric_config": to_json(&config) });
    Ok(Output {
        bytes: tsv.into_bytes(),
        manifest: RunManifest::new("score", config_json, inputs, None),
    })
}

pub fn correlate_cmd(args: &ScoreArgs) -> Result<Output> {
    let (pairs, config, archive, inputs) = scored(args)?;
    let report: CorrelationReport = correlate(&archive, &pairs, &config)?;
    let config_json = json!({ "args": to_json(args), "metric_config": to_json(&config) });
    Ok(Output {
        bytes: json_bytes(&report),
        manifest: RunManifest::new("correlate", config_json, inputs, None),
    })
}

#[derive(Serialize)]
struct SweepRow<'a> {
    temperature: f64,
    pooled_pearson: f64,
    best: bool,
    reports: &'a [CorrelationReport],
}

pub fn sweep(args: &SweepArgs) -> Result<Output> {
    if args.archive.len() != args.pairs.len() {
        return Err(CliError::Usage(format!(
            "{} --archive but {} --pairs given; pass one pairs file per archive",
            args.archive.len(),
            args.pairs.len()
        )));
    }
    let mut archives = Vec::with_capacity(args.archive.len());
    let mut pair_sets = Vec::with_capacity(args.pairs.len());
    let mut inputs = Vec::new();
    for (a, p) in args.archive.iter().zip(&args.pairs) {
        let archive = load_archive(a)?;
        let pairs = load_pairs(p, archive.value.len())?;
        inputs.push(archive.digest);
        inputs.push(pairs.digest);
        archives.push(archive.value);
        pair_sets.push(pairs.value);
    }
    let datasets: Vec<EvalSet<'_>> = archives
        .iter()
        .zip(&pair_sets)
        .map(|(archive, pairs)| EvalSet { archive, pairs })
        .collect();
    let mut base = MetricConfig::new(args.metric)
        .with_iters(args.iters)
        .with_normalize(!args.no_normalize)
        .with_entropy(args.include_entropy);
    if let Some(&first) = args.grid.first() {
        base = base.with_temperature(first);
    }
    let result = temperature_sweep(&datasets, &base, &args.grid)?;
    // Mark only the first entry at the selected temperature as best.
    let best_index = result
        .entries
        .iter()
        .position(|e| e.temperature == result.best_temperature);
    let rows: Vec<SweepRow<'_>> = result
        .entries
        .iter()
        .enumerate()
        .map(|(k, e)| SweepRow {
            temperature: e.temperature,
            pooled_pearson: e.pooled_pearson,
            best: Some(k) == best_index,
            reports: &e.reports,
        })
        .collect();
    Ok(Output {
        bytes: json_bytes(&rows),
        manifest: RunManifest::new("sweep", to_json(args), inputs, None),
    })
}

#[derive(Serialize)]
struct ContextualityReport {
    layers: Vec<ContextualityProfile>,
    /// Absent when fewer than two layers were measured.
    properties: Option<PropertyReport>,
}

pub fn contextuality_cmd(args: &ContextualityArgs) -> Result<Output> {
    let mut layers = Vec::with_capacity(args.archive.len());
    let mut inputs = Vec::with_capacity(args.archive.len());
    for (position, path) in args.archive.iter().enumerate() {
        let archive = load_archive(path)?;
        let mut profile = contextuality(&archive.value, args.samples, args.seed).map_err(|source| {
            CliError::Input {
                path: path.clone(),
                source,
            }
        })?;
        // Archives without a layer tag are identified by their position on the command line.
        profile.layer.get_or_insert(position as u32);
        layers.push(profile);
        inputs.push(archive.digest);
    }
    let properties = if layers.len() >= 2 {
        let thresholds = PropertyThresholds {
            baseline: args.baseline_threshold,
            slack: args.slack,
        };
        Some(property_check(&layers, thresholds)?)
    } else {
        None
    };
    Ok(Output {
        bytes: json_bytes(&ContextualityReport { layers, properties }),
        manifest: RunManifest::new("contextuality", to_json(args), inputs, Some(args.seed)),
    })
}

pub fn write_output(out: &Path, output: &Output) -> Result<()> {
    std::fs::write(out, &output.bytes).map_err(|source| CliError::Output {
        path: PathBuf::from(out),
        source,
    })?;
    output.manifest.write_next_to(out)
}
