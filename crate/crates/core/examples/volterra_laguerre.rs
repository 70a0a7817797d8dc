//! Fits the Volterra-Laguerre baseline and reports its residual.

use ewnn_cdpa::cdpa_sim::{simulate, CircuitConfig};
use ewnn_cdpa::models::volterra::{fit_volterra_laguerre, volterra_predict, LaguerreConfig};

fn main() -> ewnn_cdpa::Result<()> {
    let traces = simulate(&CircuitConfig::default())?;
    for cfg in [
        LaguerreConfig::default(),
        LaguerreConfig { max_order: 2, ..LaguerreConfig::default() },
        LaguerreConfig { num_basis: 8, ..LaguerreConfig::default() },
    ] {
        let fit = fit_volterra_laguerre(&traces.input, &traces.output, &cfg)?;
        let pred = volterra_predict(&fit.coefficients, &traces.input, &cfg)?;
        let max_err = pred.samples.iter().zip(&traces.output.samples).map(|(p, y)| (p - y).abs()).fold(0.0, f64::max);
        println!(
            "K = {}, P = {}: {} parameters (rank {}{}), residual SSE {:.4}, max error {:.4} V",
            cfg.num_basis,
            cfg.max_order,
            fit.parameter_count,
            fit.rank,
            if fit.rank_deficient { ", rank deficient" } else { "" },
            fit.residual_sse,
            max_err
        );
    }
    Ok(())
}
