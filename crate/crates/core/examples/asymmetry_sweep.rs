//! Sideband asymmetry versus input frequency, 1.9-4.3 kHz.

use ewnn_cdpa::cdpa_sim::CircuitConfig;
use ewnn_cdpa::spectrum::{frequency_grid, spearman, sweep_asymmetry};

fn main() -> ewnn_cdpa::Result<()> {
    let cfg = CircuitConfig::default();
    let points = sweep_asymmetry(&cfg, &frequency_grid(1900.0, 4300.0, 100.0));
    let (mut spacing, mut asym3) = (Vec::new(), Vec::new());
    println!("{:>8} {:>10} {:>10}", "f5 (Hz)", "IMD2 (dB)", "IMD3 (dB)");
    for p in &points {
        match &p.report {
            Some(r) => {
                println!("{:>8.0} {:>10.3} {:>10.3}", p.input_freq, r.psimd2_asym, r.psimd3_asym);
                spacing.push(p.input_freq - 2.0 * cfg.ripple_freq);
                asym3.push(r.psimd3_asym);
            }
            None => println!("{:>8.0} failed: {}", p.input_freq, p.error.as_deref().unwrap_or("?")),
        }
    }
    println!("Spearman(spacing, IMD3 asymmetry) = {:.3}", spearman(&spacing, &asym3)?);
    Ok(())
}
