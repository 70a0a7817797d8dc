//! Runs the three-model comparison and prints the table.

use ewnn_cdpa::cli::{compare_models, ExperimentConfig};

fn main() -> ewnn_cdpa::Result<()> {
    let report = compare_models(&ExperimentConfig::default())?.report;
    println!("{:<9} {:>12} {:>12} {:>7} {:>6}", "model", "SSE", "max err (V)", "params", "iters");
    for m in &report.models {
        if let Some(e) = &m.error {
            println!("{:<9} failed: {e}", m.name);
            continue;
        }
        println!(
            "{:<9} {:>12.4e} {:>12.4e} {:>7} {:>6}",
            m.name,
            m.sse.unwrap_or(f64::NAN),
            m.max_time_error.unwrap_or(f64::NAN),
            m.parameter_count,
            m.iterations.map_or("-".into(), |i| i.to_string())
        );
    }
    println!();
    print!("{:<9}", "Hz");
    for c in report.measured.components() {
        print!(" {:>8.0}", c.freq);
    }
    println!();
    print!("{:<9}", "measured");
    for c in report.measured.components() {
        print!(" {:>8.2}", c.level_db);
    }
    println!();
    for m in &report.models {
        print!("{:<9}", format!("{} err", m.name));
        for s in &m.spectrum_errors {
            print!(" {:>8.3}", s.error_db);
        }
        println!();
    }
    Ok(())
}
