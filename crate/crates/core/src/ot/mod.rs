//! Optimal-transport kernels over a word-similarity matrix.
//!
//! All problems here are posed as maximization of transported similarity
//! between two uniform word distributions (mass `1/L1` per row, `1/L2` per
//! column).

mod exact;
mod sinkhorn;

pub use exact::{exact_wmd, ExactSolution};
pub use sinkhorn::{
    sinkhorn, sinkhorn_converged, SinkhornOutcome, DEFAULT_MAX_ITERS, DEFAULT_TOL,
};

use ndarray::{Array2, Axis};

use crate::archive::SentenceMatrix;
use crate::error::{Error, Result};

/// Pairwise inner products `S[i, j] = <x1_i, x2_j>` between the words of two sentences.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    values: Array2<f64>,
}

impl SimilarityMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::Precondition("similarity matrix must be non-empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("similarity matrix has non-finite entries".into()));
        }
        Ok(Self { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map(Vec::len).unwrap_or(0);
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let values = Array2::from_shape_vec((rows.len(), ncols), flat)
            .map_err(|e| Error::Precondition(format!("ragged similarity rows: {e}")))?;
        Self::new(values)
    }

    pub fn from_sentences(x1: &SentenceMatrix, x2: &SentenceMatrix) -> Result<Self> {
        if x1.dim() != x2.dim() {
            return Err(Error::DimensionMismatch {
                left: x1.dim(),
                right: x2.dim(),
            });
        }
        let values = Array2::from_shape_fn((x1.len(), x2.len()), |(i, j)| {
            x1.row(i)
                .iter()
                .zip(x2.row(j))
                .map(|(&a, &b)| a as f64 * b as f64)
                .sum()
        });
        Self::new(values)
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn transpose(&self) -> Self {
        Self {
            values: self.values.t().to_owned(),
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Nonnegative `L1 x L2` matrix of transported mass.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    mass: Array2<f64>,
}

impl TransportPlan {
    pub fn new(mass: Array2<f64>) -> Result<Self> {
        if mass.iter().any(|&m| !(m >= 0.0) || !m.is_finite()) {
            return Err(Error::Validation("transport mass must be finite and nonnegative".into()));
        }
        Ok(Self { mass })
    }

    pub fn uniform(rows: usize, cols: usize) -> Self {
        Self {
            mass: Array2::from_elem((rows, cols), 1.0 / (rows * cols) as f64),
        }
    }

    pub fn mass(&self) -> &Array2<f64> {
        &self.mass
    }

    pub fn shape(&self) -> (usize, usize) {
        self.mass.dim()
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.mass.sum_axis(Axis(1)).to_vec()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        self.mass.sum_axis(Axis(0)).to_vec()
    }

    /// Largest deviation of a row sum from `1/L1`.
    pub fn row_violation(&self) -> f64 {
        let target = 1.0 / self.mass.nrows() as f64;
        max_deviation(&self.row_sums(), target)
    }

    /// Largest deviation of a column sum from `1/L2`.
    pub fn col_violation(&self) -> f64 {
        let target = 1.0 / self.mass.ncols() as f64;
        max_deviation(&self.col_sums(), target)
    }

    pub fn entropy(&self) -> f64 {
        -self
            .mass
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum::<f64>()
    }
}

fn max_deviation(sums: &[f64], target: f64) -> f64 {
    sums.iter()
        .map(|s| (s - target).abs())
        .fold(0.0, f64::max)
}

/// Transport objective `sum(pi * S)`, minus `T * sum(pi log pi)` when `include_entropy` is set.
pub fn plan_objective(
    plan: &TransportPlan,
    s: &SimilarityMatrix,
    temperature: f64,
    include_entropy: bool,
) -> Result<f64> {
    if plan.shape() != (s.rows(), s.cols()) {
        return Err(Error::Precondition(format!(
            "plan shape {:?} does not match similarity shape {:?}",
            plan.shape(),
            (s.rows(), s.cols())
        )));
    }
    let transport: f64 = plan
        .mass
        .iter()
        .zip(s.values.iter())
        .map(|(p, v)| p * v)
        .sum();
    if include_entropy && temperature != 0.0 {
        Ok(transport + temperature * plan.entropy())
    } else {
        Ok(transport)
    }
}
