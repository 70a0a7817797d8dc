//! Experiment commands behind the `ewnn-cdpa` binary.
//!
//! Every command reads one TOML file with dotted section keys
//! (`circuit.input_freq = 3700`, `train.hidden_count = 30`, ...), validates
//! it completely, computes everything in memory and only then writes its
//! outputs together with a `config.json` echo of the resolved settings.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cdpa_sim::{simulate, CircuitConfig, CircuitTraces};
use crate::error::{invalid, Error, Result};
use crate::models::volterra::{fit_volterra_laguerre, volterra_predict, LaguerreConfig, VolterraFit};
use crate::models::ModelKind;
use crate::signal::{fmt_f64, SignalTrace};
use crate::spectrum::{dft_db, frequency_grid, measure_imd, sweep_asymmetry, AsymmetryPoint, ImdReport};
use crate::training::{compare_ab_updates, sweep_hidden, train, SweepEntry, TrainConfig, TrainingRecord};

/// Ranges for the sweep and comparison commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub hidden_counts: Vec<usize>,
    pub freq_start: f64,
    pub freq_stop: f64,
    pub freq_step: f64,
    /// Iteration budget of both networks in `compare`.
    pub compare_iterations: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            hidden_counts: (10..=110).step_by(10).collect(),
            freq_start: 1900.0,
            freq_stop: 4300.0,
            freq_step: 100.0,
            compare_iterations: 40,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_counts.is_empty() {
            return Err(Error::Config("sweep.hidden_counts is empty".into()));
        }
        let ok = self.freq_start > 0.0 && self.freq_stop >= self.freq_start && self.freq_step > 0.0;
        if !ok || !self.freq_stop.is_finite() {
            return Err(Error::Config(format!(
                "invalid frequency sweep {}..{} step {}",
                self.freq_start, self.freq_stop, self.freq_step
            )));
        }
        if self.compare_iterations == 0 {
            return Err(Error::Config("sweep.compare_iterations must be at least 1".into()));
        }
        Ok(())
    }

    pub fn frequencies(&self) -> Vec<f64> {
        frequency_grid(self.freq_start, self.freq_stop, self.freq_step)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub circuit: CircuitConfig,
    pub train: TrainConfig,
    pub laguerre: LaguerreConfig,
    pub sweep: SweepConfig,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            circuit: CircuitConfig::default(),
            train: TrainConfig::default(),
            laguerre: LaguerreConfig::default(),
            sweep: SweepConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let as_config = |e: Error| match e {
            Error::InvalidArgument(m) => Error::Config(m),
            other => other,
        };
        self.circuit.validate().map_err(as_config)?;
        self.train.validate().map_err(as_config)?;
        self.laguerre.validate().map_err(as_config)?;
        self.sweep.validate()
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, mut cfg: ExperimentConfig) -> ExperimentConfig {
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.train.seed = seed;
        }
        cfg
    }
}

/// Model selector of the `train` command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainTarget {
    Network(ModelKind),
    Volterra,
}

impl std::str::FromStr for TrainTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "benn" => TrainTarget::Network(ModelKind::Benn),
            "ewnn" => TrainTarget::Network(ModelKind::Ewnn),
            "ewnn-ab" => TrainTarget::Network(ModelKind::EwnnAb),
            "volterra" => TrainTarget::Volterra,
            other => return Err(Error::Config(format!("unknown model `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Hidden,
    Frequency,
    AbUpdates,
}

impl std::str::FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "hidden" => SweepKind::Hidden,
            "frequency" => SweepKind::Frequency,
            "ab-updates" => SweepKind::AbUpdates,
            other => return Err(Error::Config(format!("unknown sweep kind `{other}`"))),
        })
    }
}

/// Process exit status for a command result.
pub fn exit_code(result: &Result<()>) -> i32 {
    match result {
        Ok(()) => 0,
        Err(Error::Diverged { .. } | Error::SimulationDiverged { .. } | Error::NonFiniteGradient) => 3,
        Err(_) => 2,
    }
}

/// Files produced by a command, written in one go once everything succeeded.
#[derive(Default)]
struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    fn add(&mut self, name: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    fn json<T: Serialize>(&mut self, name: impl Into<PathBuf>, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    fn csv(&mut self, name: impl Into<PathBuf>, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
        let mut bytes = Vec::new();
        f(&mut bytes)?;
        self.add(name, bytes);
        Ok(())
    }

    fn write(self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut written = Vec::with_capacity(self.files.len());
        for (name, bytes) in self.files {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            let mut w = BufWriter::new(fs::File::create(&path)?);
            w.write_all(&bytes)?;
            w.flush()?;
            written.push(path);
        }
        Ok(written)
    }
}

fn with_echo(cfg: &ExperimentConfig) -> Result<Outputs> {
    let mut out = Outputs::default();
    out.json("config.json", cfg)?;
    Ok(out)
}

/// Input/output traces plus the output spectrum and its marked components.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let traces = simulate(&cfg.circuit)?;
    let spec = dft_db(&traces.output)?;
    let imd = measure_imd(&spec, cfg.circuit.input_freq, cfg.circuit.ripple_freq)?;
    let mut out = with_echo(cfg)?;
    out.csv("traces.csv", |w| traces.write_csv(w))?;
    out.csv("spectrum.csv", |w| spec.write_csv(w))?;
    out.json("imd.json", &imd)?;
    out.write(&cfg.output_dir)
}

fn model_tag(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Benn => "benn",
        ModelKind::Ewnn => "ewnn",
        ModelKind::EwnnAb => "ewnn-ab",
    }
}

/// JSON form of a training run; the weights live in a separate file.
#[derive(Serialize)]
struct RecordEntry<'a> {
    model_file: String,
    sse_curve: &'a [f64],
    iterations_used: usize,
    stop_reason: crate::training::StopReason,
    max_time_error: f64,
    config_echo: &'a TrainConfig,
}

fn add_record(out: &mut Outputs, prefix: &str, record: &TrainingRecord) -> Result<()> {
    let model_file = format!("{prefix}_model.json");
    out.json(
        format!("{prefix}_record.json"),
        &RecordEntry {
            model_file: model_file.clone(),
            sse_curve: &record.sse_curve,
            iterations_used: record.iterations_used,
            stop_reason: record.stop_reason,
            max_time_error: record.max_time_error,
            config_echo: &record.config_echo,
        },
    )?;
    out.json(model_file, &record.final_model)?;
    out.csv(format!("{prefix}_sse.csv"), |w| record.write_sse_csv(w))
}

fn write_reconstruction(w: &mut Vec<u8>, measured: &SignalTrace, model: &[f64]) -> std::io::Result<()> {
    writeln!(w, "time_s,measured_v,model_v")?;
    for (n, (m, y)) in measured.samples.iter().zip(model).enumerate() {
        writeln!(w, "{},{},{}", fmt_f64(measured.time_at(n)), fmt_f64(*m), fmt_f64(*y))?;
    }
    Ok(())
}

/// Trains one model on freshly simulated data.
pub fn cmd_train(cfg: &ExperimentConfig, target: TrainTarget) -> Result<Vec<PathBuf>> {
    let traces = simulate(&cfg.circuit)?;
    let mut out = with_echo(cfg)?;
    match target {
        TrainTarget::Network(model) => {
            let tc = TrainConfig { model, ..cfg.train.clone() };
            let record = train(&traces.input, &traces.output, &tc)?;
            add_record(&mut out, model_tag(model), &record)?;
            out.csv(format!("{}_output.csv", model_tag(model)), |w| {
                write_reconstruction(w, &traces.output, &record.final_output)
            })?;
        }
        TrainTarget::Volterra => {
            let fit = fit_volterra_laguerre(&traces.input, &traces.output, &cfg.laguerre)?;
            let pred = volterra_predict(&fit.coefficients, &traces.input, &cfg.laguerre)?;
            out.json("volterra_fit.json", &fit)?;
            out.csv("volterra_output.csv", |w| write_reconstruction(w, &traces.output, &pred.samples))?;
        }
    }
    out.write(&cfg.output_dir)
}

/// Level of one marked component in the measured and modelled spectra.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumError {
    pub freq: f64,
    pub measured_db: f64,
    pub model_db: f64,
    /// `|model_db - measured_db|`
    pub error_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub name: String,
    /// `1/2 sum (y_d - y)^2` on the training data.
    pub sse: Option<f64>,
    pub max_time_error: Option<f64>,
    pub spectrum_errors: Vec<SpectrumError>,
    pub parameter_count: usize,
    /// Training iterations, absent for the least-squares model.
    pub iterations: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub measured: ImdReport,
    pub models: Vec<ModelComparison>,
}

impl ComparisonReport {
    pub fn model(&self, name: &str) -> Option<&ModelComparison> {
        self.models.iter().find(|m| m.name == name)
    }
}

fn compare_entry(
    name: &str,
    parameter_count: usize,
    iterations: Option<usize>,
    result: Result<Vec<f64>>,
    traces: &CircuitTraces,
    measured: &ImdReport,
    cfg: &CircuitConfig,
) -> ModelComparison {
    let evaluated = result.and_then(|y| {
        let trace = SignalTrace::new(traces.output.sample_rate, traces.output.start_time, y)?;
        let imd = measure_imd(&dft_db(&trace)?, cfg.input_freq, cfg.ripple_freq)?;
        Ok((trace, imd))
    });
    match evaluated {
        Ok((trace, imd)) => {
            let diff: Vec<f64> = traces.output.samples.iter().zip(&trace.samples).map(|(a, b)| a - b).collect();
            let spectrum_errors = measured
                .components()
                .iter()
                .zip(imd.components())
                .map(|(m, y)| SpectrumError {
                    freq: m.freq,
                    measured_db: m.level_db,
                    model_db: y.level_db,
                    error_db: (y.level_db - m.level_db).abs(),
                })
                .collect();
            ModelComparison {
                name: name.into(),
                sse: Some(0.5 * diff.iter().map(|d| d * d).sum::<f64>()),
                max_time_error: Some(diff.iter().fold(0.0, |m, d| f64::max(m, d.abs()))),
                spectrum_errors,
                parameter_count,
                iterations,
                error: None,
            }
        }
        Err(e) => ModelComparison {
            name: name.into(),
            sse: None,
            max_time_error: None,
            spectrum_errors: Vec::new(),
            parameter_count,
            iterations,
            error: Some(e.to_string()),
        },
    }
}

/// Trains both networks with the comparison budget, fits the Volterra model
/// and evaluates all three against the simulated output.
/// Everything `compare` computes before writing.
pub struct Comparison {
    pub report: ComparisonReport,
    /// Model name and its output on the training input.
    pub reconstructions: Vec<(String, Vec<f64>)>,
    pub traces: CircuitTraces,
}

pub fn compare_models(cfg: &ExperimentConfig) -> Result<Comparison> {
    let traces = simulate(&cfg.circuit)?;
    let measured = measure_imd(&dft_db(&traces.output)?, cfg.circuit.input_freq, cfg.circuit.ripple_freq)?;
    let (n, m) = (traces.input.len(), traces.output.len());
    let mut models = Vec::new();
    let mut outputs = Vec::new();

    for kind in [ModelKind::Benn, ModelKind::Ewnn] {
        let tc = TrainConfig { model: kind, max_iterations: cfg.sweep.compare_iterations, ..cfg.train.clone() };
        let l = tc.hidden_count;
        let count = n * l + l * l + l * m;
        let run = train(&traces.input, &traces.output, &tc);
        let iterations = run.as_ref().ok().map(|r| r.iterations_used);
        let y = run.map(|r| r.final_output);
        if let Ok(y) = &y {
            outputs.push((model_tag(kind).to_string(), y.clone()));
        }
        models.push(compare_entry(model_tag(kind), count, iterations, y, &traces, &measured, &cfg.circuit));
    }

    let fit: Result<VolterraFit> = fit_volterra_laguerre(&traces.input, &traces.output, &cfg.laguerre);
    let y = fit.and_then(|f| volterra_predict(&f.coefficients, &traces.input, &cfg.laguerre)).map(|t| t.samples);
    if let Ok(y) = &y {
        outputs.push(("volterra".to_string(), y.clone()));
    }
    models.push(compare_entry("volterra", cfg.laguerre.parameter_count(), None, y, &traces, &measured, &cfg.circuit));

    Ok(Comparison { report: ComparisonReport { measured, models }, reconstructions: outputs, traces })
}

pub fn cmd_compare(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let Comparison { report, reconstructions: outputs, traces } = compare_models(cfg)?;
    if report.models.iter().all(|m| m.error.is_some()) {
        let reasons: Vec<_> = report.models.iter().filter_map(|m| m.error.clone()).collect();
        return Err(invalid(format!("every model failed: {}", reasons.join("; "))));
    }
    let mut out = with_echo(cfg)?;
    out.json("comparison.json", &report)?;
    for (name, y) in &outputs {
        out.csv(format!("{name}_reconstructed.csv"), |w| write_reconstruction(w, &traces.output, y))?;
    }
    out.write(&cfg.output_dir)
}

#[derive(Serialize)]
struct HiddenSummary {
    model: ModelKind,
    hidden_count: usize,
    iterations_used: Option<usize>,
    final_sse: Option<f64>,
    curve_file: Option<String>,
    error: Option<String>,
}

/// Plot-ready data for one of the sweeps.
pub fn cmd_sweep(cfg: &ExperimentConfig, kind: SweepKind) -> Result<Vec<PathBuf>> {
    let mut out = with_echo(cfg)?;
    match kind {
        SweepKind::Hidden => {
            let traces = simulate(&cfg.circuit)?;
            let entries = sweep_hidden(&traces.input, &traces.output, &cfg.train, &cfg.sweep.hidden_counts)?;
            if entries.iter().all(|e| e.record.is_none()) {
                return Err(all_failed(entries.iter().filter_map(|e| e.error.clone())));
            }
            let tag = model_tag(cfg.train.model);
            let mut summary = Vec::new();
            for SweepEntry { hidden_count, record, error } in &entries {
                let curve_file = record.as_ref().map(|_| format!("hidden/{tag}_L{hidden_count}_sse.csv"));
                if let (Some(r), Some(file)) = (record, &curve_file) {
                    out.csv(file, |w| r.write_sse_csv(w))?;
                }
                summary.push(HiddenSummary {
                    model: cfg.train.model,
                    hidden_count: *hidden_count,
                    iterations_used: record.as_ref().map(|r| r.iterations_used),
                    final_sse: record.as_ref().map(TrainingRecord::final_sse),
                    curve_file,
                    error: error.clone(),
                });
            }
            out.json("hidden_sweep.json", &summary)?;
        }
        SweepKind::Frequency => {
            let points = sweep_asymmetry(&cfg.circuit, &cfg.sweep.frequencies());
            if points.iter().all(|p| p.report.is_none()) {
                return Err(all_failed(points.iter().filter_map(|p| p.error.clone())));
            }
            out.csv("asymmetry.csv", |w| write_asymmetry(w, &points, cfg.circuit.ripple_freq))?;
            out.json("asymmetry.json", &points)?;
        }
        SweepKind::AbUpdates => {
            let traces = simulate(&cfg.circuit)?;
            let cmp = compare_ab_updates(&traces.input, &traces.output, &cfg.train)?;
            add_record(&mut out, "ab_on", &cmp.updates_on)?;
            add_record(&mut out, "ab_off", &cmp.updates_off)?;
        }
    }
    out.write(&cfg.output_dir)
}

fn all_failed(reasons: impl Iterator<Item = String>) -> Error {
    invalid(format!("every sweep point failed: {}", reasons.collect::<Vec<_>>().join("; ")))
}

fn write_asymmetry(w: &mut Vec<u8>, points: &[AsymmetryPoint], ripple: f64) -> std::io::Result<()> {
    writeln!(w, "input_freq_hz,spacing_hz,psimd2_asym_db,psimd3_asym_db")?;
    for p in points {
        let (a2, a3) = match &p.report {
            Some(r) => (fmt_f64(r.psimd2_asym), fmt_f64(r.psimd3_asym)),
            None => ("nan".into(), "nan".into()),
        };
        writeln!(w, "{},{},{a2},{a3}", fmt_f64(p.input_freq), fmt_f64(p.input_freq - 2.0 * ripple))?;
    }
    Ok(())
}
