//! Error curves of the wavelet network with the scale and translation
//! factors trained versus frozen.

use ewnn_cdpa::cdpa_sim::{simulate, CircuitConfig};
use ewnn_cdpa::training::{compare_ab_updates, mean_abs_first_difference, TrainConfig};

fn main() -> ewnn_cdpa::Result<()> {
    let traces = simulate(&CircuitConfig::default())?;
    let cmp = compare_ab_updates(&traces.input, &traces.output, &TrainConfig::default())?;
    for (label, r) in [("updates on ", &cmp.updates_on), ("updates off", &cmp.updates_off)] {
        let jitter = mean_abs_first_difference(&r.sse_curve, 5).unwrap_or(0.0);
        println!("{label}: {:>3} iterations, mean |dE| after iteration 5 = {jitter:.3}", r.iterations_used);
    }
    println!("{:>4} {:>12} {:>12}", "p", "on", "off");
    let rows = cmp.updates_on.sse_curve.len().max(cmp.updates_off.sse_curve.len());
    for p in (0..rows).step_by(4) {
        let cell = |c: &[f64]| c.get(p).map_or("".into(), |e| format!("{e:.4e}"));
        println!("{:>4} {:>12} {:>12}", p + 1, cell(&cmp.updates_on.sse_curve), cell(&cmp.updates_off.sse_curve));
    }
    Ok(())
}
