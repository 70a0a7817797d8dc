//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ewnn_cdpa::cdpa_sim::{simulate, CircuitConfig, CircuitTraces};
use ewnn_cdpa::cli::{self, compare_models, ExperimentConfig, SweepKind, TrainTarget};
use ewnn_cdpa::models::gradcheck::first_step_gap;
use ewnn_cdpa::models::volterra::{laguerre_bank, LaguerreConfig};
use ewnn_cdpa::models::{morlet, morlet_deriv, normalize_hidden, ModelKind};
use ewnn_cdpa::spectrum::{dft, dft_db, frequency_grid, imd_frequencies, measure_imd, spearman, sweep_asymmetry};
use ewnn_cdpa::training::{
    compare_ab_updates, iterations_to, mean_abs_first_difference, sweep_hidden, train, TrainConfig,
};
use ewnn_cdpa::SignalTrace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Command<'a> = (&'a str, Box<dyn Fn() -> ewnn_cdpa::Result<Vec<std::path::PathBuf>> + 'a>);
type Criterion<'a> = (&'a str, Box<dyn Fn() -> Outcome + 'a>);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, started: Instant, detail: String) -> Outcome {
    let took = started.elapsed();
    check(took < limit, format!("{detail}; {:.2} s (limit {} s)", took.as_secs_f64(), limit.as_secs()))
}

fn dataset() -> CircuitTraces {
    simulate(&CircuitConfig::default()).expect("default circuit simulates")
}

fn gradient_correctness() -> Outcome {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for model in [ModelKind::Benn, ModelKind::Ewnn] {
        let g = first_step_gap(model, 8, 3, 8, 42).map_err(|e| e.to_string())?;
        worst = worst.max(g.w1).max(g.w2);
        parts.push(format!("{model:?} dW1 {:.1e} dW2 {:.1e}", g.w1, g.w2));
    }
    check(worst < 1e-4, parts.join(", "))?;
    within(Duration::from_secs(1), started, parts.join(", "))
}

fn convergence_ordering(data: &CircuitTraces) -> Outcome {
    let started = Instant::now();
    let run = |model| {
        train(&data.input, &data.output, &TrainConfig { model, ..TrainConfig::default() }).map_err(|e| e.to_string())
    };
    let (benn, ewnn) = (run(ModelKind::Benn)?, run(ModelKind::Ewnn)?);
    let ratio = ewnn.iterations_used as f64 / benn.iterations_used as f64;
    let detail = format!(
        "EWNN {} ({:?}) vs BENN {} ({:?}), ratio {ratio:.2} (need < 1 and <= 0.6)",
        ewnn.iterations_used, ewnn.stop_reason, benn.iterations_used, benn.stop_reason
    );
    check(ewnn.final_sse() < 1e-3 && ewnn.iterations_used < benn.iterations_used && ratio <= 0.6, detail.clone())?;
    within(Duration::from_secs(60), started, detail)
}

/// Counts rises in a sequence where `None` (level never reached) ranks last.
fn violations(seq: &[Option<usize>]) -> usize {
    let key = |v: &Option<usize>| v.unwrap_or(usize::MAX);
    seq.windows(2).filter(|w| key(&w[1]) > key(&w[0])).count()
}

fn hidden_trend(data: &CircuitTraces) -> Outcome {
    let started = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;
    for (model, counts) in [
        (ModelKind::Benn, (10..=110).step_by(10).collect::<Vec<_>>()),
        (ModelKind::Ewnn, (10..=60).step_by(5).collect()),
    ] {
        let cfg = TrainConfig { model, ..TrainConfig::default() };
        let entries = sweep_hidden(&data.input, &data.output, &cfg, &counts).map_err(|e| e.to_string())?;
        let iters: Vec<Option<usize>> =
            entries.iter().map(|e| e.record.as_ref().and_then(|r| iterations_to(&r.sse_curve, 0.1))).collect();
        let v = violations(&iters);
        ok &= v <= 1 && entries.iter().all(|e| e.record.is_some());
        let shown: Vec<String> = iters.iter().map(|i| i.map_or("-".into(), |i| i.to_string())).collect();
        parts.push(format!("{model:?} [{}] {v} violation(s)", shown.join(",")));
    }
    check(ok, parts.join("; "))?;
    within(Duration::from_secs(300), started, parts.join("; "))
}

fn accuracy_ordering() -> Outcome {
    let report = compare_models(&ExperimentConfig::default()).map_err(|e| e.to_string())?.report;
    let get = |name: &str| {
        let m = report.model(name).ok_or(format!("{name} missing"))?;
        match (m.sse, m.max_time_error) {
            (Some(s), Some(e)) => Ok((s, e)),
            _ => Err(format!("{name} failed: {:?}", m.error)),
        }
    };
    let (ewnn, volterra) = (get("ewnn")?, get("volterra")?);
    check(
        ewnn.0 < volterra.0 && ewnn.1 < volterra.1,
        format!(
            "SSE EWNN {:.3e} vs Volterra {:.3e}; max error {:.3e} V vs {:.3e} V",
            ewnn.0, volterra.0, ewnn.1, volterra.1
        ),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn imd_structure(data: &CircuitTraces) -> Outcome {
    let cfg = CircuitConfig::default();
    let spec = dft_db(&data.output).map_err(|e| e.to_string())?;
    let db = &spec.magnitudes_db;
    let mut parts = Vec::new();
    let mut ok = true;
    for f in imd_frequencies(cfg.input_freq, cfg.ripple_freq) {
        let k = (f / spec.bin_width).round() as usize;
        // bins below 1 are clipped off so the ripple tone is judged against AC bins only
        let around: Vec<f64> = (k.saturating_sub(5).max(1)..=k + 5).filter(|&j| j != k).map(|j| db[j]).collect();
        let median = median(around);
        let peak = db[k] > db[k - 1] && db[k] > db[k + 1];
        ok &= peak && db[k] - median >= 10.0;
        parts.push(format!("{f:.0}:{:+.1}", db[k] - median));
    }
    let fundamental = (cfg.input_freq / spec.bin_width).round() as usize;
    let largest = (1..db.len()).max_by(|&a, &b| db[a].total_cmp(&db[b])).unwrap();
    let imd = measure_imd(&spec, cfg.input_freq, cfg.ripple_freq).map_err(|e| e.to_string())?;
    ok &= largest == fundamental && imd.psimd2_asym > 0.1 && imd.psimd3_asym > 0.1;
    check(
        ok,
        format!(
            "dB over neighbour median {}; largest bin {} Hz; asym2 {:.3} dB, asym3 {:.3} dB",
            parts.join(" "),
            spec.frequency(largest),
            imd.psimd2_asym,
            imd.psimd3_asym
        ),
    )
}

fn asymmetry_trend() -> Outcome {
    let cfg = CircuitConfig::default();
    let points = sweep_asymmetry(&cfg, &frequency_grid(1900.0, 4300.0, 100.0));
    let mut spacing = Vec::new();
    let mut asym = Vec::new();
    for p in &points {
        let r = p.report.as_ref().ok_or(format!("{} Hz failed: {:?}", p.input_freq, p.error))?;
        spacing.push(p.input_freq - 2.0 * cfg.ripple_freq);
        asym.push(r.psimd3_asym);
    }
    let rho = spearman(&spacing, &asym).map_err(|e| e.to_string())?;
    check(rho > 0.0, format!("Spearman {rho:.3} over {} points", points.len()))
}

fn fluctuation(data: &CircuitTraces) -> Outcome {
    let cmp = compare_ab_updates(&data.input, &data.output, &TrainConfig::default()).map_err(|e| e.to_string())?;
    let on = mean_abs_first_difference(&cmp.updates_on.sse_curve, 5).ok_or("updates-on curve too short")?;
    let off = mean_abs_first_difference(&cmp.updates_off.sse_curve, 5).ok_or("updates-off curve too short")?;
    check(on > off, format!("mean |dE| after iteration 5: on {on:.3}, off {off:.3}"))
}

fn numerical_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut parts = Vec::new();

    let h = 1e-5;
    let fd_gap = (0..1000)
        .map(|_| {
            let z: f64 = rng.random_range(-6.0..6.0);
            (morlet_deriv(z) - (morlet(z + h) - morlet(z - h)) / (2.0 * h)).abs()
        })
        .fold(0.0, f64::max);
    parts.push(format!("morlet FD {fd_gap:.1e}"));

    let norm_ok = (0..200).all(|_| {
        let v: Vec<f64> = (0..rng.random_range(1..40)).map(|_| rng.random_range(-1e3..1e3)).collect();
        normalize_hidden(&v).iter().fold(0.0f64, |m, x| m.max(x.abs())) == 1.0
    });
    parts.push(format!("normalize max-abs 1: {norm_ok}"));

    let lag = LaguerreConfig::default();
    let mut impulse = vec![0.0; 100_000];
    impulse[0] = 1.0;
    let bank = laguerre_bank(&SignalTrace::new(1e5, 0.0, impulse).unwrap(), &lag).map_err(|e| e.to_string())?;
    let mut ortho = 0.0f64;
    for j in 0..lag.num_basis {
        for k in 0..lag.num_basis {
            let dot: f64 = bank[j].iter().zip(&bank[k]).map(|(a, b)| a * b).sum();
            ortho = ortho.max((dot - if j == k { 1.0 } else { 0.0 }).abs());
        }
    }
    parts.push(format!("Laguerre {ortho:.1e}"));

    let mut parseval = 0.0f64;
    for _ in 0..20 {
        let x: Vec<f64> = (0..rng.random_range(2..2000)).map(|_| rng.random_range(-10.0..10.0)).collect();
        let time: f64 = x.iter().map(|v| v * v).sum();
        let freq: f64 = dft(&x).iter().map(|c| c.norm_sqr()).sum::<f64>() / x.len() as f64;
        parseval = parseval.max((time - freq).abs() / time);
    }
    parts.push(format!("Parseval {parseval:.1e}"));

    let coarse = CircuitConfig::default();
    let fine = CircuitConfig { internal_step: coarse.internal_step / 2.0, ..coarse.clone() };
    let (a, b) = (simulate(&coarse).map_err(|e| e.to_string())?, simulate(&fine).map_err(|e| e.to_string())?);
    let halving = a.output.samples.iter().zip(&b.output.samples).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    parts.push(format!("step halving {halving:.1e} V"));

    check(fd_gap < 1e-6 && norm_ok && ortho < 1e-3 && parseval < 1e-10 && halving < 1e-3, parts.join(", "))
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = ExperimentConfig { output_dir: tmp.path().join("run"), ..ExperimentConfig::default() };
    let commands: Vec<Command> = vec![
        ("simulate", Box::new(|| cli::cmd_simulate(&cfg))),
        ("train benn", Box::new(|| cli::cmd_train(&cfg, TrainTarget::Network(ModelKind::Benn)))),
        ("train ewnn", Box::new(|| cli::cmd_train(&cfg, TrainTarget::Network(ModelKind::Ewnn)))),
        ("train ewnn-ab", Box::new(|| cli::cmd_train(&cfg, TrainTarget::Network(ModelKind::EwnnAb)))),
        ("train volterra", Box::new(|| cli::cmd_train(&cfg, TrainTarget::Volterra))),
        ("compare", Box::new(|| cli::cmd_compare(&cfg))),
        ("sweep hidden", Box::new(|| cli::cmd_sweep(&cfg, SweepKind::Hidden))),
        ("sweep frequency", Box::new(|| cli::cmd_sweep(&cfg, SweepKind::Frequency))),
        ("sweep ab-updates", Box::new(|| cli::cmd_sweep(&cfg, SweepKind::AbUpdates))),
    ];
    let mut files = 0;
    for (name, cmd) in &commands {
        let _ = fs::remove_dir_all(&cfg.output_dir);
        cmd().map_err(|e| format!("{name}: {e}"))?;
        let first = snapshot(&cfg.output_dir);
        fs::remove_dir_all(&cfg.output_dir).map_err(|e| e.to_string())?;
        cmd().map_err(|e| format!("{name}: {e}"))?;
        if snapshot(&cfg.output_dir) != first {
            return Err(format!("{name} output differs between runs"));
        }
        files += first.len();
    }
    Ok(format!("{} commands, {files} files byte-identical on rerun", commands.len()))
}

fn main() -> ExitCode {
    let data = dataset();
    let criteria: Vec<Criterion> = vec![
        ("1 gradient correctness", Box::new(gradient_correctness)),
        ("2 convergence ordering", Box::new(|| convergence_ordering(&data))),
        ("3 hidden-size trend", Box::new(|| hidden_trend(&data))),
        ("4 model-accuracy ordering", Box::new(accuracy_ordering)),
        ("5 PS-IMD structure", Box::new(|| imd_structure(&data))),
        ("6 asymmetry trend", Box::new(asymmetry_trend)),
        ("7 fluctuation property", Box::new(|| fluctuation(&data))),
        ("8 numerical identities", Box::new(numerical_identities)),
        ("9 determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        match run() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
