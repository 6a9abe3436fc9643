//! Sinkhorn matrix scaling for the entropy-regularized transport problem.
//!
//! The iteration starts from `pi0 ∝ exp(S / T)` and alternates a column
//! normalization (`xi = pi / (L2 * colsum)`) with a row normalization
//! (`pi = xi / (L1 * rowsum)`). It runs in the log domain: the plan is kept as
//! `log pi[i, j] = K[i, j] + a[i] + b[j]` with `K = (S - max S) / T`, so small
//! temperatures never underflow a whole row.

use ndarray::Array2;

use super::{SimilarityMatrix, TransportPlan};
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITERS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornOutcome {
    pub plan: TransportPlan,
    pub iterations: usize,
    pub converged: bool,
    /// `max_j |sum_i pi[i, j] - 1/L2|` of the returned plan.
    pub col_violation: f64,
}

struct LogPlan {
    rows: usize,
    cols: usize,
    /// Row-major `log pi`.
    log_mass: Vec<f64>,
    scratch: Vec<f64>,
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

impl LogPlan {
    fn new(s: &SimilarityMatrix, temperature: f64) -> Result<Self> {
        if !(temperature > 0.0) || !temperature.is_finite() {
            return Err(Error::Precondition(format!(
                "temperature must be positive and finite, got {temperature}"
            )));
        }
        let (rows, cols) = (s.rows(), s.cols());
        let shift = s.max();
        let log_mass: Vec<f64> = s.values().iter().map(|v| (v - shift) / temperature).collect();
        if log_mass.iter().any(|k| !k.is_finite()) {
            return Err(Error::NumericalDegeneracy(format!(
                "similarity / temperature is not representable at T = {temperature}"
            )));
        }
        Ok(Self {
            rows,
            cols,
            log_mass,
            scratch: Vec::with_capacity(rows.max(cols)),
        })
    }

    fn normalize_columns(&mut self) {
        let target = -(self.cols as f64).ln();
        self.scratch.clear();
        for j in 0..self.cols {
            let column = (0..self.rows).map(|i| self.log_mass[i * self.cols + j]);
            self.scratch.push(target - log_sum_exp(column));
        }
        for row in self.log_mass.chunks_exact_mut(self.cols) {
            row.iter_mut().zip(&self.scratch).for_each(|(v, d)| *v += d);
        }
    }

    fn normalize_rows(&mut self) {
        let target = -(self.rows as f64).ln();
        for row in self.log_mass.chunks_exact_mut(self.cols) {
            let shift = target - log_sum_exp(row.iter().copied());
            row.iter_mut().for_each(|v| *v += shift);
        }
    }

    fn step(&mut self) -> Result<()> {
        self.normalize_columns();
        self.normalize_rows();
        if self.log_mass.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
            return Err(Error::NumericalDegeneracy(
                "Sinkhorn scaling produced non-finite mass".into(),
            ));
        }
        Ok(())
    }

    fn col_violation(&self) -> f64 {
        let target = 1.0 / self.cols as f64;
        let mut sums = vec![0.0; self.cols];
        for row in self.log_mass.chunks_exact(self.cols) {
            sums.iter_mut().zip(row).for_each(|(s, v)| *s += v.exp());
        }
        sums.iter().map(|s| (s - target).abs()).fold(0.0, f64::max)
    }

    fn plan(&self) -> TransportPlan {
        let mass = Array2::from_shape_fn((self.rows, self.cols), |(i, j)| {
            self.log_mass[i * self.cols + j].exp()
        });
        TransportPlan { mass }
    }
}

/// Runs exactly `iters` Sinkhorn iterations. The last step is a row
/// normalization, so row sums equal `1/L1`.
pub fn sinkhorn(s: &SimilarityMatrix, temperature: f64, iters: usize) -> Result<TransportPlan> {
    if iters == 0 {
        return Err(Error::Precondition("Sinkhorn needs at least one iteration".into()));
    }
    let mut scaling = LogPlan::new(s, temperature)?;
    for _ in 0..iters {
        scaling.step()?;
    }
    Ok(scaling.plan())
}

/// Iterates until the column marginals are within `tol` of `1/L2`, or `max_iters` is reached.
pub fn sinkhorn_converged(
    s: &SimilarityMatrix,
    temperature: f64,
    tol: f64,
    max_iters: usize,
) -> Result<SinkhornOutcome> {
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!("tolerance must be positive, got {tol}")));
    }
    if max_iters == 0 {
        return Err(Error::Precondition("max_iters must be at least 1".into()));
    }
    let mut scaling = LogPlan::new(s, temperature)?;
    let mut violation = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iters {
        scaling.step()?;
        iterations += 1;
        violation = scaling.col_violation();
        if violation <= tol {
            break;
        }
    }
    Ok(SinkhornOutcome {
        plan: scaling.plan(),
        iterations,
        converged: violation <= tol,
        col_violation: violation,
    })
}
