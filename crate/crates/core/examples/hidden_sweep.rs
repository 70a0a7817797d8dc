//! Iterations needed to reach SSE = 0.1 as the hidden layer grows.

use ewnn_cdpa::cdpa_sim::{simulate, CircuitConfig};
use ewnn_cdpa::models::ModelKind;
use ewnn_cdpa::training::{iterations_to, sweep_hidden, TrainConfig};

fn main() -> ewnn_cdpa::Result<()> {
    let traces = simulate(&CircuitConfig::default())?;
    let sweeps = [
        (ModelKind::Benn, (10..=110).step_by(10).collect::<Vec<_>>()),
        (ModelKind::Ewnn, (10..=60).step_by(5).collect()),
    ];
    for (model, counts) in sweeps {
        let cfg = TrainConfig { model, ..TrainConfig::default() };
        println!("{model:?}");
        for entry in sweep_hidden(&traces.input, &traces.output, &cfg, &counts)? {
            match (&entry.record, &entry.error) {
                (Some(r), _) => println!(
                    "  L = {:>3}: SSE 0.1 after {:>4}, stopped after {:>3}",
                    entry.hidden_count,
                    iterations_to(&r.sse_curve, 0.1).map_or("-".into(), |p| p.to_string()),
                    r.iterations_used
                ),
                (None, Some(e)) => println!("  L = {:>3}: failed: {e}", entry.hidden_count),
                (None, None) => unreachable!(),
            }
        }
    }
    Ok(())
}
