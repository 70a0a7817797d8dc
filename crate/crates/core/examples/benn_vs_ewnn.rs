//! Trains the sigmoid and wavelet Elman networks on the same simulated data
//! and prints their error curves.

use ewnn_cdpa::cdpa_sim::{simulate, CircuitConfig};
use ewnn_cdpa::models::ModelKind;
use ewnn_cdpa::training::{train, TrainConfig};

fn main() -> ewnn_cdpa::Result<()> {
    let traces = simulate(&CircuitConfig::default())?;
    for model in [ModelKind::Benn, ModelKind::Ewnn] {
        let cfg = TrainConfig { model, ..TrainConfig::default() };
        let record = train(&traces.input, &traces.output, &cfg)?;
        println!(
            "{model:?}: {} iterations ({:?}), final SSE {:.3e}, max error {:.3e} V",
            record.iterations_used,
            record.stop_reason,
            record.final_sse(),
            record.max_time_error
        );
        let shown: Vec<String> = record.sse_curve.iter().step_by(5).map(|e| format!("{e:.2e}")).collect();
        println!("  every 5th SSE: {}", shown.join(" "));
    }
    Ok(())
}
