//! Simulates the half-bridge amplifier with default settings and writes the
//! 10-20 ms window as CSV.
//!
//! ```text
//! cargo run --release --example simulate_amplifier [out.csv]
//! ```

use std::fs::File;
use std::io::BufWriter;

use ewnn_cdpa::cdpa_sim::{simulate, CircuitConfig};

fn main() -> ewnn_cdpa::Result<()> {
    let cfg = CircuitConfig::default();
    let traces = simulate(&cfg)?;
    println!(
        "{} samples at {} Hz starting at {} s",
        traces.output.len(),
        traces.output.sample_rate,
        traces.output.start_time
    );
    println!("peak input {:.3} V, peak output {:.3} V", traces.input.max_abs(), traces.output.max_abs());
    for n in (0..traces.output.len()).step_by(100) {
        println!(
            "t = {:.5} s  in = {:+.4} V  out = {:+.4} V",
            traces.output.time_at(n),
            traces.input.samples[n],
            traces.output.samples[n]
        );
    }
    if let Some(path) = std::env::args().nth(1) {
        traces.write_csv(BufWriter::new(File::create(&path)?))?;
        println!("wrote {path}");
    }
    Ok(())
}
