//! Volterra series projected onto a discrete Laguerre basis.
//!
//! The input is passed through a bank of `K` Laguerre filters. Every monomial
//! up to degree `P` in the filter outputs becomes a regressor, and the
//! coefficients follow from linear least squares.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::signal::SignalTrace;

/// Singular values below `RANK_TOL * sigma_max` are treated as zero.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaguerreConfig {
    /// Number of Laguerre stages `K`.
    pub num_basis: usize,
    /// Filter pole `lambda`.
    pub pole: f64,
    /// Highest monomial degree `P`.
    pub max_order: usize,
    /// Count each multiset of stage indices once instead of every ordering.
    pub symmetric_kernels: bool,
}

impl Default for LaguerreConfig {
    fn default() -> Self {
        Self { num_basis: 5, pole: 0.994, max_order: 3, symmetric_kernels: true }
    }
}

impl LaguerreConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pole.is_nan() || self.pole.abs() >= 1.0 {
            return Err(invalid(format!("Laguerre pole must satisfy |pole| < 1, got {}", self.pole)));
        }
        if self.num_basis == 0 || self.max_order == 0 {
            return Err(invalid("Laguerre basis count and order must be at least 1"));
        }
        Ok(())
    }

    /// Stage-index combinations, one per regressor, ordered by degree.
    pub fn terms(&self) -> Vec<Vec<usize>> {
        let k = self.num_basis;
        (1..=self.max_order)
            .flat_map(|d| -> Vec<Vec<usize>> {
                if self.symmetric_kernels {
                    (0..k).combinations_with_replacement(d).collect()
                } else {
                    (0..d).map(|_| 0..k).multi_cartesian_product().collect()
                }
            })
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.terms().len()
    }
}

/// Runs `x` through the Laguerre bank. Returns `K` sequences, each as long
/// as `x`, with zero initial conditions.
pub fn laguerre_bank(x: &SignalTrace, cfg: &LaguerreConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let lambda = cfg.pole;
    let gain = (1.0 - lambda * lambda).sqrt();
    let mut stages = Vec::with_capacity(cfg.num_basis);
    let mut first = Vec::with_capacity(x.len());
    let mut prev = 0.0;
    for &v in &x.samples {
        prev = lambda * prev + gain * v;
        first.push(prev);
    }
    stages.push(first);
    for _ in 1..cfg.num_basis {
        let input = stages.last().expect("first stage present");
        // y[n] = lambda y[n-1] + x[n-1] - lambda x[n]
        let mut out = Vec::with_capacity(input.len());
        let (mut y_prev, mut x_prev) = (0.0, 0.0);
        for &xn in input {
            y_prev = lambda * y_prev + x_prev - lambda * xn;
            x_prev = xn;
            out.push(y_prev);
        }
        stages.push(out);
    }
    Ok(stages)
}

fn regressors(x: &SignalTrace, cfg: &LaguerreConfig) -> Result<DMatrix<f64>> {
    let bank = laguerre_bank(x, cfg)?;
    let terms = cfg.terms();
    Ok(DMatrix::from_fn(x.len(), terms.len(), |n, j| terms[j].iter().map(|&k| bank[k][n]).product()))
}

/// Least-squares Volterra-Laguerre fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolterraFit {
    pub config: LaguerreConfig,
    pub coefficients: Vec<f64>,
    pub parameter_count: usize,
    /// Numerical rank of the regressor matrix.
    pub rank: usize,
    /// Set when the regressors are rank deficient and the minimum-norm
    /// solution was returned.
    pub rank_deficient: bool,
    /// Sum of squared residuals on the training data.
    pub residual_sse: f64,
}

pub fn fit_volterra_laguerre(x: &SignalTrace, y: &SignalTrace, cfg: &LaguerreConfig) -> Result<VolterraFit> {
    cfg.validate()?;
    if x.len() != y.len() {
        return Err(invalid(format!("input has {} samples, target {}", x.len(), y.len())));
    }
    let count = cfg.parameter_count();
    if x.len() < count {
        return Err(invalid(format!("{} samples cannot determine {count} coefficients", x.len())));
    }
    let phi = regressors(x, cfg)?;
    let target = DVector::from_column_slice(&y.samples);
    let svd = phi.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let eps = if sigma_max > 0.0 { RANK_TOL * sigma_max } else { 0.0 };
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let theta = if rank == 0 {
        DVector::zeros(count)
    } else {
        svd.solve(&target, eps).map_err(|e| invalid(format!("least squares failed: {e}")))?
    };
    let residual_sse = (&phi * &theta - &target).norm_squared();
    Ok(VolterraFit {
        config: *cfg,
        coefficients: theta.as_slice().to_vec(),
        parameter_count: count,
        rank,
        rank_deficient: rank < count,
        residual_sse,
    })
}

/// Evaluates a fitted Volterra-Laguerre model on `x`.
pub fn volterra_predict(coeffs: &[f64], x: &SignalTrace, cfg: &LaguerreConfig) -> Result<SignalTrace> {
    let count = cfg.parameter_count();
    if coeffs.len() != count {
        return Err(invalid(format!("{} coefficients for {count} regressors", coeffs.len())));
    }
    let phi = regressors(x, cfg)?;
    let y = phi * DVector::from_column_slice(coeffs);
    SignalTrace::new(x.sample_rate, x.start_time, y.as_slice().to_vec())
}
