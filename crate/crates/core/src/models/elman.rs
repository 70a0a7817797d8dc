//! Elman networks with sigmoid (BENN) or Morlet-wavelet (EWNN) hidden layers.
//!
//! Shapes follow the usual layout: `w1` is hidden x output, `w2` input x hidden,
//! `w3` context x hidden. The forward pass is
//!
//! ```text
//! h = w2^T u + w3^T x_c
//! H = f(h)              (BENN)
//! H = psi(z), z = normalize((h - b) / a)   (EWNN)
//! y = w1^T H
//! x_c <- alpha H
//! ```
//!
//! Gradients use the diagonal recursion for the context path: only the
//! self-connection `w3[i][i]` carries the previous partial forward, so the
//! recursion memories are plain per-weight accumulators rather than a full
//! backpropagation through time.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::activation::{max_abs, morlet, morlet_deriv, sigmoid};
use crate::error::{invalid, Error, Result};

/// Smallest allowed |a_i| when the scale factors are trained.
pub const MIN_SCALE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct ElmanState {
    /// Hidden to output, `L x M`.
    pub w1: DMatrix<f64>,
    /// Input to hidden, `N x L`.
    pub w2: DMatrix<f64>,
    /// Context to hidden, `L x L`.
    pub w3: DMatrix<f64>,
    /// Context activations, `alpha * H` of the previous pass.
    pub context: DVector<f64>,
    /// `dH_i / dw2[j][i]` carried between iterations.
    pub dh_dw2: DMatrix<f64>,
    /// `dH_i / dw3[k][i]` carried between iterations.
    pub dh_dw3: DMatrix<f64>,
    /// Context self-loop coefficient.
    pub alpha: f64,
}

impl ElmanState {
    /// All weights, context and memories zero.
    pub fn zeros(inputs: usize, hidden: usize, outputs: usize, alpha: f64) -> Self {
        Self {
            w1: DMatrix::zeros(hidden, outputs),
            w2: DMatrix::zeros(inputs, hidden),
            w3: DMatrix::zeros(hidden, hidden),
            context: DVector::zeros(hidden),
            dh_dw2: DMatrix::zeros(inputs, hidden),
            dh_dw3: DMatrix::zeros(hidden, hidden),
            alpha,
        }
    }

    pub fn inputs(&self) -> usize {
        self.w2.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.w3.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.w1.ncols()
    }

    /// Trainable weight count.
    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.w2.len() + self.w3.len()
    }

    fn check_input(&self, u: &DVector<f64>) -> Result<()> {
        if u.len() != self.inputs() {
            return Err(invalid(format!("input has {} entries, network expects {}", u.len(), self.inputs())));
        }
        Ok(())
    }

    fn check_target(&self, y_d: &DVector<f64>) -> Result<()> {
        if y_d.len() != self.outputs() {
            return Err(invalid(format!("target has {} entries, network expects {}", y_d.len(), self.outputs())));
        }
        Ok(())
    }

    fn pre_activation(&self, u: &DVector<f64>) -> DVector<f64> {
        self.w2.tr_mul(u) + self.w3.tr_mul(&self.context)
    }

    fn is_finite(&self) -> bool {
        [&self.w1, &self.w2, &self.w3, &self.dh_dw2, &self.dh_dw3].iter().all(|m| m.iter().all(|v| v.is_finite()))
    }
}

/// Per-neuron wavelet scale (`a`) and translation (`b`) factors.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletParams {
    pub a: DVector<f64>,
    pub b: DVector<f64>,
    pub update_enabled: bool,
    dh_da: DVector<f64>,
    dh_db: DVector<f64>,
}

impl WaveletParams {
    pub fn new(a: DVector<f64>, b: DVector<f64>, update_enabled: bool) -> Result<Self> {
        if a.len() != b.len() {
            return Err(invalid("scale and translation vectors differ in length"));
        }
        if !update_enabled && a.iter().any(|&v| v != 1.0) {
            return Err(invalid("frozen wavelet parameters require a = 1"));
        }
        let n = a.len();
        let mut wp = Self { a, b, update_enabled, dh_da: DVector::zeros(n), dh_db: DVector::zeros(n) };
        if update_enabled {
            wp.clamp_scale();
        }
        Ok(wp)
    }

    /// `a = 1`, `b` drawn from the standard normal.
    pub fn random<R: Rng + ?Sized>(hidden: usize, update_enabled: bool, rng: &mut R) -> Self {
        let b = DVector::from_iterator(hidden, (0..hidden).map(|_| rng.sample::<f64, _>(StandardNormal)));
        Self::new(DVector::from_element(hidden, 1.0), b, update_enabled).expect("consistent lengths")
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    fn clamp_scale(&mut self) {
        for a in self.a.iter_mut() {
            if a.abs() < MIN_SCALE {
                *a = if *a < 0.0 { -MIN_SCALE } else { MIN_SCALE };
            }
        }
    }
}

/// Quantities from one forward pass reused by the gradient step.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    pub y: DVector<f64>,
    /// Hidden activations `H(p)`.
    pub hidden: DVector<f64>,
    /// Context `x_c(p)` the pass was computed with.
    pub context_in: DVector<f64>,
    /// `dH_i / dh_i` as used by the weight recursions.
    pub slope: DVector<f64>,
    /// Normalized wavelet arguments (EWNN only).
    pub z: Option<DVector<f64>>,
    /// Normalization denominator `max |z'|` (1 for BENN or a zero `z'`).
    pub norm: f64,
}

/// Sigmoid Elman forward pass; updates the context for the next call.
pub fn benn_forward(state: &mut ElmanState, u: &DVector<f64>) -> Result<ForwardPass> {
    state.check_input(u)?;
    let h = state.pre_activation(u);
    let hidden = h.map(sigmoid);
    let slope = hidden.map(|f| f * (1.0 - f));
    Ok(finish_forward(state, hidden, slope, None, 1.0))
}

/// Wavelet Elman forward pass; updates the context for the next call.
///
/// `z' = (h - b) / a` is scaled by its largest magnitude before the Morlet
/// activation. The returned slope is `psi'(z) / max|z'|`: the normalization
/// denominator is held constant and the `1/a` factor is taken as 1.
pub fn ewnn_forward(state: &mut ElmanState, wp: &WaveletParams, u: &DVector<f64>) -> Result<ForwardPass> {
    state.check_input(u)?;
    if wp.len() != state.hidden() {
        return Err(invalid(format!("{} wavelet parameters for {} hidden neurons", wp.len(), state.hidden())));
    }
    let (z, norm) = wavelet_arguments(state, wp, u, None);
    let hidden = z.map(morlet);
    let slope = z.map(|z| morlet_deriv(z) / norm);
    Ok(finish_forward(state, hidden, slope, Some(z), norm))
}

fn wavelet_arguments(
    state: &ElmanState,
    wp: &WaveletParams,
    u: &DVector<f64>,
    frozen_norm: Option<f64>,
) -> (DVector<f64>, f64) {
    let h = state.pre_activation(u);
    let raw = DVector::from_iterator(h.len(), h.iter().zip(wp.a.iter().zip(&wp.b)).map(|(h, (a, b))| (h - b) / a));
    let norm = frozen_norm.unwrap_or_else(|| {
        let scale = max_abs(raw.as_slice());
        if scale > 0.0 {
            scale
        } else {
            1.0
        }
    });
    (raw / norm, norm)
}

/// Sigmoid network output without touching the context.
pub fn benn_output(state: &ElmanState, u: &DVector<f64>) -> Result<DVector<f64>> {
    state.check_input(u)?;
    Ok(state.w1.tr_mul(&state.pre_activation(u).map(sigmoid)))
}

/// Wavelet network output without touching the context. A `frozen_norm`
/// replaces the normalization denominator, which is how the gradient sees it.
pub fn ewnn_output(
    state: &ElmanState,
    wp: &WaveletParams,
    u: &DVector<f64>,
    frozen_norm: Option<f64>,
) -> Result<DVector<f64>> {
    state.check_input(u)?;
    if wp.len() != state.hidden() {
        return Err(invalid(format!("{} wavelet parameters for {} hidden neurons", wp.len(), state.hidden())));
    }
    let (z, _) = wavelet_arguments(state, wp, u, frozen_norm);
    Ok(state.w1.tr_mul(&z.map(morlet)))
}

fn finish_forward(
    state: &mut ElmanState,
    hidden: DVector<f64>,
    slope: DVector<f64>,
    z: Option<DVector<f64>>,
    norm: f64,
) -> ForwardPass {
    let y = state.w1.tr_mul(&hidden);
    let context_in = std::mem::replace(&mut state.context, &hidden * state.alpha);
    ForwardPass { y, hidden, context_in, slope, z, norm }
}

/// Learning rates for `w1, w2, w3, a, b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningRates {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub scale: f64,
    pub translation: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self { w1: 0.01, w2: 0.01, w3: 0.01, scale: 0.01, translation: 0.01 }
    }
}

impl LearningRates {
    pub fn uniform(eta: f64) -> Self {
        Self { w1: eta, w2: eta, w3: eta, scale: eta, translation: eta }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.w1, self.w2, self.w3, self.scale, self.translation];
        if all.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(invalid(format!("learning rates must be non-negative: {self:?}")));
        }
        Ok(())
    }
}

/// `1/2 |y_d - y|^2`.
pub fn half_squared_error(y_d: &DVector<f64>, y: &DVector<f64>) -> f64 {
    0.5 * (y_d - y).norm_squared()
}

/// Output error `delta_o` and back-projected hidden error `delta_h` for the
/// current weights.
fn output_errors(state: &ElmanState, pass: &ForwardPass, y_d: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let delta_o = y_d - &pass.y;
    let delta_h = &state.w1 * &delta_o;
    (delta_o, delta_h)
}

/// Advances the recursion memories and applies the three weight updates.
fn update_weights(
    state: &mut ElmanState,
    pass: &ForwardPass,
    u: &DVector<f64>,
    delta_o: &DVector<f64>,
    delta_h: &DVector<f64>,
    rates: &LearningRates,
) {
    let alpha = state.alpha;
    for i in 0..state.hidden() {
        let self_loop = alpha * state.w3[(i, i)];
        let slope = pass.slope[i];
        let mut col2 = state.dh_dw2.column_mut(i);
        for (m, uj) in col2.iter_mut().zip(u.iter()) {
            *m = slope * (uj + self_loop * *m);
        }
        let mut col3 = state.dh_dw3.column_mut(i);
        for (m, xk) in col3.iter_mut().zip(pass.context_in.iter()) {
            *m = slope * (xk + self_loop * *m);
        }
    }
    state.w1.ger(rates.w1, &pass.hidden, delta_o, 1.0);
    for (i, dh) in delta_h.iter().enumerate() {
        let step2 = rates.w2 * dh;
        state.w2.column_mut(i).axpy(step2, &state.dh_dw2.column(i), 1.0);
        let step3 = rates.w3 * dh;
        state.w3.column_mut(i).axpy(step3, &state.dh_dw3.column(i), 1.0);
    }
}

/// One gradient-descent step for the sigmoid network. Returns `E(p)` of the
/// pass, i.e. measured before the update.
pub fn benn_grad_step(
    state: &mut ElmanState,
    pass: &ForwardPass,
    u: &DVector<f64>,
    y_d: &DVector<f64>,
    rates: &LearningRates,
) -> Result<f64> {
    state.check_input(u)?;
    state.check_target(y_d)?;
    let (delta_o, delta_h) = output_errors(state, pass, y_d);
    let error = 0.5 * delta_o.norm_squared();
    update_weights(state, pass, u, &delta_o, &delta_h, rates);
    if !state.is_finite() {
        return Err(Error::NonFiniteGradient);
    }
    Ok(error)
}

/// One gradient-descent step for the wavelet network. When
/// `wp.update_enabled`, the scale and translation factors are updated too and
/// `|a|` is clamped to [`MIN_SCALE`].
pub fn ewnn_grad_step(
    state: &mut ElmanState,
    wp: &mut WaveletParams,
    pass: &ForwardPass,
    u: &DVector<f64>,
    y_d: &DVector<f64>,
    rates: &LearningRates,
) -> Result<f64> {
    state.check_input(u)?;
    state.check_target(y_d)?;
    let z = pass.z.as_ref().ok_or_else(|| invalid("forward pass carries no wavelet arguments"))?;
    let (delta_o, delta_h) = output_errors(state, pass, y_d);
    let error = 0.5 * delta_o.norm_squared();

    if wp.update_enabled {
        let alpha = state.alpha;
        for i in 0..wp.len() {
            let psi = morlet_deriv(z[i]);
            let self_loop = alpha * state.w3[(i, i)];
            let a = wp.a[i];
            wp.dh_da[i] = psi * (-z[i] / a + self_loop * wp.dh_da[i]);
            wp.dh_db[i] = psi * (-1.0 / (a * pass.norm) + self_loop * wp.dh_db[i]);
        }
        wp.a.zip_apply(&delta_h.component_mul(&wp.dh_da), |a, g| *a += rates.scale * g);
        wp.b.zip_apply(&delta_h.component_mul(&wp.dh_db), |b, g| *b += rates.translation * g);
        wp.clamp_scale();
        if wp.a.iter().chain(wp.b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient);
        }
    }

    update_weights(state, pass, u, &delta_o, &delta_h, rates);
    if !state.is_finite() {
        return Err(Error::NonFiniteGradient);
    }
    Ok(error)
}

/// Which hidden layer a network uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Sigmoid hidden layer.
    Benn,
    /// Morlet hidden layer with frozen `a`, `b`.
    Ewnn,
    /// Morlet hidden layer with trained `a`, `b`.
    EwnnAb,
}

impl ModelKind {
    pub fn is_wavelet(self) -> bool {
        !matches!(self, ModelKind::Benn)
    }
}

/// JSON form of a trained network. Matrices are stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSnapshot {
    pub kind: ModelKind,
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
    pub alpha: f64,
    pub seed: u64,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub w3: Vec<f64>,
    pub a: Option<Vec<f64>>,
    pub b: Option<Vec<f64>>,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

fn from_row_major(rows: usize, cols: usize, data: &[f64], name: &str) -> Result<DMatrix<f64>> {
    if data.len() != rows * cols {
        return Err(invalid(format!("{name} has {} entries, expected {rows}x{cols}", data.len())));
    }
    Ok(DMatrix::from_row_slice(rows, cols, data))
}

impl ModelSnapshot {
    pub fn capture(kind: ModelKind, state: &ElmanState, wavelet: Option<&WaveletParams>, seed: u64) -> Self {
        Self {
            kind,
            inputs: state.inputs(),
            hidden: state.hidden(),
            outputs: state.outputs(),
            alpha: state.alpha,
            seed,
            w1: row_major(&state.w1),
            w2: row_major(&state.w2),
            w3: row_major(&state.w3),
            a: wavelet.map(|wp| wp.a.as_slice().to_vec()),
            b: wavelet.map(|wp| wp.b.as_slice().to_vec()),
        }
    }

    /// Rebuilds the weights with zero context and zero recursion memories.
    pub fn restore(&self) -> Result<(ElmanState, Option<WaveletParams>)> {
        let mut state = ElmanState::zeros(self.inputs, self.hidden, self.outputs, self.alpha);
        state.w1 = from_row_major(self.hidden, self.outputs, &self.w1, "w1")?;
        state.w2 = from_row_major(self.inputs, self.hidden, &self.w2, "w2")?;
        state.w3 = from_row_major(self.hidden, self.hidden, &self.w3, "w3")?;
        let wavelet = match (&self.a, &self.b) {
            (Some(a), Some(b)) => Some(WaveletParams::new(
                DVector::from_column_slice(a),
                DVector::from_column_slice(b),
                self.kind == ModelKind::EwnnAb,
            )?),
            (None, None) => None,
            _ => return Err(invalid("snapshot has only one of a, b")),
        };
        if self.kind.is_wavelet() != wavelet.is_some() {
            return Err(invalid("snapshot kind and wavelet parameters disagree"));
        }
        if wavelet.as_ref().is_some_and(|wp| wp.len() != self.hidden) {
            return Err(invalid("wavelet parameter length differs from hidden count"));
        }
        Ok((state, wavelet))
    }
}
