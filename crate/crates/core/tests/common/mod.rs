//! Independent reference computations and random fixtures shared by the
//! integration tests. Nothing here calls into the solvers under test.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twmd_core::{ArchiveMetadata, EmbeddingArchive, SentenceMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random `rows x cols` matrix with entries uniform in `[-1, 1]`.
pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect()
}

pub fn random_unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f32> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            return v.iter().map(|x| (x / norm) as f32).collect();
        }
    }
}

pub fn random_unit_sentence(rng: &mut ChaCha8Rng, len: usize, dim: usize) -> SentenceMatrix {
    let rows: Vec<Vec<f32>> = (0..len).map(|_| random_unit_vector(rng, dim)).collect();
    SentenceMatrix::from_rows(&rows).unwrap()
}

/// Sentence with entries uniform in `[-scale, scale]`, shifted by `offset`
/// in every coordinate (so centering has something to remove).
pub fn random_sentence(
    rng: &mut ChaCha8Rng,
    len: usize,
    dim: usize,
    offset: f32,
    vocab: usize,
) -> SentenceMatrix {
    let values: Vec<f32> = (0..len * dim)
        .map(|_| offset + rng.random_range(-1.0f32..1.0))
        .collect();
    let tokens = (0..len)
        .map(|_| format!("t{}", rng.random_range(0..vocab)))
        .collect();
    SentenceMatrix::new(tokens, dim, values).unwrap()
}

pub fn random_archive(
    rng: &mut ChaCha8Rng,
    sentences: usize,
    max_len: usize,
    dim: usize,
) -> EmbeddingArchive {
    let offset = rng.random_range(-2.0f32..2.0);
    let list = (0..sentences)
        .map(|_| {
            let len = rng.random_range(1..=max_len);
            random_sentence(rng, len, dim, offset, 20)
        })
        .collect();
    EmbeddingArchive::new(dim, list, ArchiveMetadata::new("random", 0)).unwrap()
}

pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| *x as f64 * *y as f64).sum()
}

pub fn similarity(x1: &SentenceMatrix, x2: &SentenceMatrix) -> Vec<Vec<f64>> {
    x1.rows()
        .map(|a| x2.rows().map(|b| dot(a, b)).collect())
        .collect()
}

/// Maximum of `sum pi * S` over the transportation polytope with row sums
/// `1/m` and column sums `1/n`, found by enumerating every basic solution:
/// each basis is a spanning tree of the bipartite row/column graph with
/// `m + n - 1` cells, whose flows are fixed by peeling leaves.
pub fn brute_force_transport(s: &[Vec<f64>]) -> f64 {
    let (m, n) = (s.len(), s[0].len());
    let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let k = m + n - 1;
    let mut best = f64::NEG_INFINITY;
    let mut chosen = Vec::with_capacity(k);
    subsets(&cells, k, 0, &mut chosen, &mut |basis| {
        if let Some(flows) = tree_flows(basis, m, n) {
            if flows.iter().all(|&f| f >= -1e-12) {
                let value: f64 = basis
                    .iter()
                    .zip(&flows)
                    .map(|(&(i, j), f)| f * s[i][j])
                    .sum();
                best = best.max(value);
            }
        }
    });
    best
}

fn subsets<T: Copy, F: FnMut(&[T])>(
    items: &[T],
    k: usize,
    start: usize,
    chosen: &mut Vec<T>,
    visit: &mut F,
) {
    if chosen.len() == k {
        visit(chosen);
        return;
    }
    let needed = k - chosen.len();
    for idx in start..=items.len().saturating_sub(needed) {
        chosen.push(items[idx]);
        subsets(items, k, idx + 1, chosen, visit);
        chosen.pop();
    }
}

/// Solves the marginal equations restricted to `basis`; `None` when the
/// cells do not form a spanning tree (some node never becomes a leaf).
fn tree_flows(basis: &[(usize, usize)], m: usize, n: usize) -> Option<Vec<f64>> {
    // Nodes 0..m are rows, m..m+n are columns.
    let mut residual: Vec<f64> = (0..m)
        .map(|_| 1.0 / m as f64)
        .chain((0..n).map(|_| 1.0 / n as f64))
        .collect();
    let mut degree = vec![0usize; m + n];
    for &(i, j) in basis {
        degree[i] += 1;
        degree[m + j] += 1;
    }
    let mut flows = vec![f64::NAN; basis.len()];
    let mut solved = vec![false; basis.len()];
    for _ in 0..basis.len() {
        let mut progress = false;
        for (e, &(i, j)) in basis.iter().enumerate() {
            if solved[e] {
                continue;
            }
            let (r, c) = (i, m + j);
            let leaf = if degree[r] == 1 {
                r
            } else if degree[c] == 1 {
                c
            } else {
                continue;
            };
            let f = residual[leaf];
            flows[e] = f;
            solved[e] = true;
            residual[r] -= f;
            residual[c] -= f;
            degree[r] -= 1;
            degree[c] -= 1;
            progress = true;
            break;
        }
        if !progress {
            return None;
        }
    }
    // A spanning tree leaves every residual at zero; a forest with a cycle elsewhere does not.
    if residual.iter().any(|r| r.abs() > 1e-9) {
        return None;
    }
    Some(flows)
}

/// Optimum of the transport problem with only the row constraint: every
/// assignment of each row to one column is a vertex, so enumerate them all.
pub fn brute_force_relaxed(s: &[Vec<f64>]) -> f64 {
    let (m, n) = (s.len(), s[0].len());
    let mut best = f64::NEG_INFINITY;
    let mut choice = vec![0usize; m];
    loop {
        let value: f64 = choice.iter().enumerate().map(|(i, &j)| s[i][j]).sum::<f64>() / m as f64;
        best = best.max(value);
        let mut pos = 0;
        loop {
            if pos == m {
                return best;
            }
            choice[pos] += 1;
            if choice[pos] < n {
                break;
            }
            choice[pos] = 0;
            pos += 1;
        }
    }
}

/// Kendall tau-b by direct pair counting.
pub fn naive_kendall_tau_b(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let (mut concordant, mut discordant, mut tie_x, mut tie_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                tie_x += 1;
            } else if dy == 0.0 {
                tie_y += 1;
            } else if (dx > 0.0) == (dy > 0.0) {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let nc = (concordant + discordant + tie_x) as f64;
    let nd = (concordant + discordant + tie_y) as f64;
    (concordant - discordant) as f64 / (nc * nd).sqrt()
}

/// Mean over all words of the archive, coordinate by coordinate.
pub fn grand_mean(archive: &EmbeddingArchive) -> Vec<f64> {
    let mut sum = vec![0.0; archive.dim()];
    for s in archive.sentences() {
        for row in s.rows() {
            sum.iter_mut().zip(row).for_each(|(a, v)| *a += *v as f64);
        }
    }
    let count = archive.word_count() as f64;
    sum.iter().map(|v| v / count).collect()
}

pub fn max_abs_diff(a: &EmbeddingArchive, b: &EmbeddingArchive) -> f64 {
    a.sentences()
        .iter()
        .zip(b.sentences())
        .flat_map(|(x, y)| x.values().iter().zip(y.values()))
        .map(|(p, q)| (*p as f64 - *q as f64).abs())
        .fold(0.0, f64::max)
}

/// Unit-vector sentence with a random length in `1..=max_len`.
pub fn random_length_sentence(rng: &mut ChaCha8Rng, max_len: usize, dim: usize) -> SentenceMatrix {
    let len = rng.random_range(1..=max_len);
    random_unit_sentence(rng, len, dim)
}
