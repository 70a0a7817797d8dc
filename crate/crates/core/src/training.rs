//! Full-batch training of the Elman networks.
//!
//! The whole input trace is the network input (`N` samples) and the whole
//! output trace the target (`M` samples). Each iteration runs one forward
//! pass, records `E(p)`, stops if it is below the threshold or the iteration
//! budget is spent, and otherwise applies one gradient step.

use std::io::Write;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::models::elman::{
    benn_forward, benn_grad_step, benn_output, ewnn_forward, ewnn_grad_step, ewnn_output, ElmanState, LearningRates,
    ModelKind, ModelSnapshot, WaveletParams,
};
use crate::signal::{fmt_f64, SignalTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelKind,
    /// Hidden neuron count `L`.
    pub hidden_count: usize,
    pub max_iterations: usize,
    /// Training stops once `E(p)` drops below this.
    pub sse_threshold: f64,
    /// Context self-loop coefficient.
    pub alpha: f64,
    pub rates: LearningRates,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Ewnn,
            hidden_count: 30,
            max_iterations: 100,
            sse_threshold: 1e-3,
            alpha: 1e-3,
            rates: LearningRates::default(),
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_count == 0 || self.max_iterations == 0 {
            return Err(invalid("hidden_count and max_iterations must be at least 1"));
        }
        if !(self.sse_threshold > 0.0 && self.sse_threshold.is_finite()) {
            return Err(invalid(format!("sse_threshold must be positive, got {}", self.sse_threshold)));
        }
        if !self.alpha.is_finite() {
            return Err(invalid("alpha must be finite"));
        }
        self.rates.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    ThresholdMet,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    /// `E(p)` for `p = 1..=iterations_used`.
    pub sse_curve: Vec<f64>,
    pub iterations_used: usize,
    pub stop_reason: StopReason,
    pub final_model: ModelSnapshot,
    /// Largest `|y_d - y|` of the last evaluated model.
    pub max_time_error: f64,
    /// Output of the last evaluated model.
    #[serde(skip)]
    pub final_output: Vec<f64>,
    pub config_echo: TrainConfig,
}

impl TrainingRecord {
    pub fn final_sse(&self) -> f64 {
        *self.sse_curve.last().expect("at least one iteration")
    }

    /// Writes `iteration,sse` rows, iterations counted from 1.
    pub fn write_sse_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iteration,sse")?;
        for (p, e) in self.sse_curve.iter().enumerate() {
            writeln!(w, "{},{}", p + 1, fmt_f64(*e))?;
        }
        Ok(())
    }
}

/// `1/2 sum (y_d - y)^2`.
pub fn sse(y_d: &[f64], y: &[f64]) -> Result<f64> {
    if y_d.len() != y.len() {
        return Err(invalid(format!("lengths differ: {} vs {}", y_d.len(), y.len())));
    }
    Ok(0.5 * y_d.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
}

/// Network plus its optional wavelet parameters.
struct Network {
    kind: ModelKind,
    state: ElmanState,
    wavelet: Option<WaveletParams>,
}

impl Network {
    fn new(cfg: &TrainConfig, n: usize, m: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let wavelet = cfg
            .model
            .is_wavelet()
            .then(|| WaveletParams::random(cfg.hidden_count, cfg.model == ModelKind::EwnnAb, &mut rng));
        Self { kind: cfg.model, state: ElmanState::zeros(n, cfg.hidden_count, m, cfg.alpha), wavelet }
    }
}

/// Trains one network on `input -> output`.
pub fn train(input: &SignalTrace, output: &SignalTrace, cfg: &TrainConfig) -> Result<TrainingRecord> {
    cfg.validate()?;
    if input.len() != output.len() {
        return Err(invalid(format!("input has {} samples, output {}", input.len(), output.len())));
    }
    let u = DVector::from_column_slice(&input.samples);
    let y_d = DVector::from_column_slice(&output.samples);
    let mut net = Network::new(cfg, u.len(), y_d.len());
    let mut curve = Vec::with_capacity(cfg.max_iterations);

    for p in 1..=cfg.max_iterations {
        let pass = match &net.wavelet {
            Some(wp) => ewnn_forward(&mut net.state, wp, &u)?,
            None => benn_forward(&mut net.state, &u)?,
        };
        let e = 0.5 * (&y_d - &pass.y).norm_squared();
        if !e.is_finite() {
            return Err(Error::Diverged { iteration: p });
        }
        curve.push(e);
        let stop = if e < cfg.sse_threshold {
            Some(StopReason::ThresholdMet)
        } else if p >= cfg.max_iterations {
            Some(StopReason::MaxIterations)
        } else {
            None
        };
        if let Some(stop_reason) = stop {
            let max_time_error = y_d.iter().zip(pass.y.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            return Ok(TrainingRecord {
                iterations_used: p,
                sse_curve: curve,
                stop_reason,
                final_model: ModelSnapshot::capture(net.kind, &net.state, net.wavelet.as_ref(), cfg.seed),
                max_time_error,
                final_output: pass.y.as_slice().to_vec(),
                config_echo: cfg.clone(),
            });
        }
        let step = match &mut net.wavelet {
            Some(wp) => ewnn_grad_step(&mut net.state, wp, &pass, &u, &y_d, &cfg.rates),
            None => benn_grad_step(&mut net.state, &pass, &u, &y_d, &cfg.rates),
        };
        step.map_err(|e| match e {
            Error::NonFiniteGradient => Error::Diverged { iteration: p },
            other => other,
        })?;
    }
    unreachable!("loop returns at the iteration budget")
}

/// Output of a saved network on `input`, evaluated with zero context.
pub fn predict(snapshot: &ModelSnapshot, input: &SignalTrace) -> Result<SignalTrace> {
    let (state, wavelet) = snapshot.restore()?;
    let u = DVector::from_column_slice(&input.samples);
    let y = match &wavelet {
        Some(wp) => ewnn_output(&state, wp, &u, None)?,
        None => benn_output(&state, &u)?,
    };
    SignalTrace::new(input.sample_rate, input.start_time, y.as_slice().to_vec())
}

/// Result of one sweep entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub hidden_count: usize,
    pub record: Option<TrainingRecord>,
    pub error: Option<String>,
}

/// Independent runs for each hidden count with otherwise identical settings.
pub fn sweep_hidden(
    input: &SignalTrace,
    output: &SignalTrace,
    base: &TrainConfig,
    hidden_counts: &[usize],
) -> Result<Vec<SweepEntry>> {
    if hidden_counts.is_empty() {
        return Err(invalid("hidden sweep needs at least one value"));
    }
    Ok(hidden_counts
        .iter()
        .map(|&hidden_count| {
            let cfg = TrainConfig { hidden_count, ..base.clone() };
            match train(input, output, &cfg) {
                Ok(record) => SweepEntry { hidden_count, record: Some(record), error: None },
                Err(e) => SweepEntry { hidden_count, record: None, error: Some(e.to_string()) },
            }
        })
        .collect())
}

/// Wavelet runs with scale/translation updates enabled and disabled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbComparison {
    pub updates_on: TrainingRecord,
    pub updates_off: TrainingRecord,
}

pub fn compare_ab_updates(input: &SignalTrace, output: &SignalTrace, cfg: &TrainConfig) -> Result<AbComparison> {
    let on = TrainConfig { model: ModelKind::EwnnAb, ..cfg.clone() };
    let off = TrainConfig { model: ModelKind::Ewnn, ..cfg.clone() };
    Ok(AbComparison { updates_on: train(input, output, &on)?, updates_off: train(input, output, &off)? })
}

/// First iteration (1-based) whose error is at or below `level`.
pub fn iterations_to(curve: &[f64], level: f64) -> Option<usize> {
    curve.iter().position(|&e| e <= level).map(|i| i + 1)
}

/// Mean `|E(p+1) - E(p)|` over iterations after `skip`.
pub fn mean_abs_first_difference(curve: &[f64], skip: usize) -> Option<f64> {
    let tail = curve.get(skip..)?;
    if tail.len() < 2 {
        return None;
    }
    Some(tail.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (tail.len() - 1) as f64)
}
