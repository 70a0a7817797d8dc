//! Finite-difference check of the first gradient step.
//!
//! On the first iteration the context and recursion memories are zero, so
//! the analytic steps must equal `-eta dE/dW` exactly. For the wavelet network
//! the normalization denominator is frozen at its forward-pass value, which is
//! how the gradient treats it.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::elman::{
    benn_forward, benn_grad_step, benn_output, ewnn_forward, ewnn_grad_step, ewnn_output, half_squared_error,
    ElmanState, LearningRates, ModelKind, WaveletParams,
};
use crate::error::Result;

const STEP: f64 = 1e-6;
const RATE: f64 = 0.05;

/// `|analytic - numeric| / |numeric|` in the Frobenius norm, per weight matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    pub w1: f64,
    pub w2: f64,
}

fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| scale * rng.random_range(-1.0..1.0))
}

fn central_step(
    s: &ElmanState,
    pick: fn(&mut ElmanState) -> &mut DMatrix<f64>,
    error: &dyn Fn(&ElmanState) -> Result<f64>,
) -> Result<DMatrix<f64>> {
    let (rows, cols) = pick(&mut s.clone()).shape();
    let mut out = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let mut plus = s.clone();
            pick(&mut plus)[(r, c)] += STEP;
            let mut minus = s.clone();
            pick(&mut minus)[(r, c)] -= STEP;
            out[(r, c)] = -RATE * (error(&plus)? - error(&minus)?) / (2.0 * STEP);
        }
    }
    Ok(out)
}

fn gap(analytic: DMatrix<f64>, numeric: &DMatrix<f64>) -> f64 {
    (analytic - numeric).norm() / numeric.norm()
}

/// Builds a seeded random `inputs x hidden x outputs` network, takes one
/// analytic step and compares it with finite differences.
pub fn first_step_gap(model: ModelKind, inputs: usize, hidden: usize, outputs: usize, seed: u64) -> Result<GapReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s0 = ElmanState::zeros(inputs, hidden, outputs, 0.001);
    s0.w1 = random_matrix(hidden, outputs, 1.0, &mut rng);
    s0.w2 = random_matrix(inputs, hidden, 0.5, &mut rng);
    s0.w3 = random_matrix(hidden, hidden, 1.0, &mut rng);
    let u = DVector::from_fn(inputs, |_, _| rng.random_range(-1.0..1.0));
    let y_d = DVector::from_fn(outputs, |_, _| rng.random_range(-1.0..1.0));
    let rates = LearningRates::uniform(RATE);
    let mut s = s0.clone();

    let (fd1, fd2) = match model {
        ModelKind::Benn => {
            let err = |s: &ElmanState| Ok(half_squared_error(&y_d, &benn_output(s, &u)?));
            let fd = (central_step(&s0, |s| &mut s.w1, &err)?, central_step(&s0, |s| &mut s.w2, &err)?);
            let pass = benn_forward(&mut s, &u)?;
            benn_grad_step(&mut s, &pass, &u, &y_d, &rates)?;
            fd
        }
        ModelKind::Ewnn | ModelKind::EwnnAb => {
            let mut wp = WaveletParams::random(hidden, model == ModelKind::EwnnAb, &mut rng);
            let frozen = wp.clone();
            let pass = ewnn_forward(&mut s, &wp, &u)?;
            let norm = pass.norm;
            let err = |s: &ElmanState| Ok(half_squared_error(&y_d, &ewnn_output(s, &frozen, &u, Some(norm))?));
            let fd = (central_step(&s0, |s| &mut s.w1, &err)?, central_step(&s0, |s| &mut s.w2, &err)?);
            ewnn_grad_step(&mut s, &mut wp, &pass, &u, &y_d, &rates)?;
            fd
        }
    };
    Ok(GapReport { w1: gap(&s.w1 - &s0.w1, &fd1), w2: gap(&s.w2 - &s0.w2, &fd2) })
}
