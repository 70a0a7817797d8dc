//! Raw-DFT dB spectra and PS-IMD readout.
//!
//! Levels are `20 log10 |X[k]|` of the unscaled rectangular-window transform,
//! so an on-bin sinusoid of amplitude `A` over `N` samples reads
//! `20 log10(A N / 2)`.

use std::io::Write;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::cdpa_sim::{simulate, CircuitConfig};
use crate::error::{invalid, Result};
use crate::signal::{fmt_f64, SignalTrace};

/// Level assigned to bins whose magnitude underflows it.
pub const FLOOR_DB: f64 = -200.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub bin_width: f64,
    /// Bins `0..=N/2`.
    pub magnitudes_db: Vec<f64>,
    pub num_samples: usize,
}

impl SpectrumReport {
    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_width
    }

    pub fn nyquist(&self) -> f64 {
        self.frequency(self.num_samples / 2)
    }

    /// Level of the bin nearest to `freq`.
    pub fn level_at(&self, freq: f64) -> Result<f64> {
        if freq.is_nan() || freq < 0.0 || freq > self.nyquist() + 0.5 * self.bin_width {
            return Err(invalid(format!("{freq} Hz is outside 0..{} Hz", self.nyquist())));
        }
        let bin = (freq / self.bin_width).round() as usize;
        Ok(self.magnitudes_db[bin.min(self.magnitudes_db.len() - 1)])
    }

    /// Writes `freq_hz,mag_db` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "freq_hz,mag_db")?;
        for (k, db) in self.magnitudes_db.iter().enumerate() {
            writeln!(w, "{},{}", fmt_f64(self.frequency(k)), fmt_f64(*db))?;
        }
        Ok(())
    }
}

/// Full two-sided transform, unscaled.
pub fn dft(samples: &[f64]) -> Vec<Complex<f64>> {
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

pub fn magnitude_db(mag: f64) -> f64 {
    if mag > 0.0 {
        (20.0 * mag.log10()).max(FLOOR_DB)
    } else {
        FLOOR_DB
    }
}

pub fn dft_db(trace: &SignalTrace) -> Result<SpectrumReport> {
    if trace.samples.is_empty() {
        return Err(invalid("cannot transform an empty trace"));
    }
    let n = trace.samples.len();
    let spectrum = dft(&trace.samples);
    Ok(SpectrumReport {
        bin_width: trace.sample_rate / n as f64,
        magnitudes_db: spectrum[..=n / 2].iter().map(|c| magnitude_db(c.norm())).collect(),
        num_samples: n,
    })
}

/// One marked spectral component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub freq: f64,
    pub level_db: f64,
}

/// The seven marked components and the sideband asymmetries.
///
/// `f1` ripple, `f2 = 2 f1`, `f3 = f5 - 2 f1`, `f4 = f5 - f1`, `f5` input,
/// `f6 = f5 + f1`, `f7 = f5 + 2 f1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImdReport {
    pub f1: Component,
    pub f2: Component,
    pub f3: Component,
    pub f4: Component,
    pub f5: Component,
    pub f6: Component,
    pub f7: Component,
    /// `|level(f4) - level(f6)|`
    pub psimd2_asym: f64,
    /// `|level(f3) - level(f7)|`
    pub psimd3_asym: f64,
}

impl ImdReport {
    pub fn components(&self) -> [Component; 7] {
        [self.f1, self.f2, self.f3, self.f4, self.f5, self.f6, self.f7]
    }
}

/// Target frequencies `[f1, ..., f7]` for an input/ripple pair.
pub fn imd_frequencies(input_freq: f64, ripple_freq: f64) -> [f64; 7] {
    [
        ripple_freq,
        2.0 * ripple_freq,
        input_freq - 2.0 * ripple_freq,
        input_freq - ripple_freq,
        input_freq,
        input_freq + ripple_freq,
        input_freq + 2.0 * ripple_freq,
    ]
}

pub fn measure_imd(spec: &SpectrumReport, input_freq: f64, ripple_freq: f64) -> Result<ImdReport> {
    let freqs = imd_frequencies(input_freq, ripple_freq);
    let mut c = [Component { freq: 0.0, level_db: 0.0 }; 7];
    for (slot, &freq) in c.iter_mut().zip(&freqs) {
        *slot = Component { freq, level_db: spec.level_at(freq)? };
    }
    Ok(ImdReport {
        f1: c[0],
        f2: c[1],
        f3: c[2],
        f4: c[3],
        f5: c[4],
        f6: c[5],
        f7: c[6],
        psimd2_asym: (c[3].level_db - c[5].level_db).abs(),
        psimd3_asym: (c[2].level_db - c[6].level_db).abs(),
    })
}

/// One point of an input-frequency sweep. Exactly one of `report`/`error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymmetryPoint {
    pub input_freq: f64,
    pub report: Option<ImdReport>,
    pub error: Option<String>,
}

/// Simulates and measures each input frequency independently.
pub fn sweep_asymmetry(cfg: &CircuitConfig, freqs: &[f64]) -> Vec<AsymmetryPoint> {
    freqs
        .iter()
        .map(|&input_freq| {
            let point = CircuitConfig { input_freq, ..cfg.clone() };
            let result = simulate(&point)
                .and_then(|traces| dft_db(&traces.output))
                .and_then(|spec| measure_imd(&spec, input_freq, cfg.ripple_freq));
            match result {
                Ok(report) => AsymmetryPoint { input_freq, report: Some(report), error: None },
                Err(e) => AsymmetryPoint { input_freq, report: None, error: Some(e.to_string()) },
            }
        })
        .collect()
}

/// `start, start + step, ...` up to and including `stop`.
pub fn frequency_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(invalid("spearman needs two equal-length series of at least 2 points"));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    Ok(cov / (vx * vy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn trace(samples: Vec<f64>) -> SignalTrace {
        SignalTrace::new(100_000.0, 0.0, samples).unwrap()
    }

    fn tone(amp: f64, freq: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / 1e5).sin()).collect()
    }

    #[test]
    fn on_bin_sinusoid_level() {
        let spec = dft_db(&trace(tone(7.5, 3700.0, 1000))).unwrap();
        assert_eq!(spec.magnitudes_db.len(), 501);
        assert_eq!(spec.bin_width, 100.0);
        let expected = 20.0 * (7.5_f64 * 500.0).log10();
        assert!((spec.magnitudes_db[37] - expected).abs() < 1e-9);
        assert!((expected - 71.48).abs() < 0.01);
    }

    #[test]
    fn constant_trace() {
        let spec = dft_db(&trace(vec![1.0; 1000])).unwrap();
        assert!((spec.magnitudes_db[0] - 60.0).abs() < 1e-9);
        assert!(spec.magnitudes_db[1..].iter().all(|&db| db == FLOOR_DB));
    }

    #[test]
    fn zero_trace_is_floor() {
        let spec = dft_db(&trace(vec![0.0; 64])).unwrap();
        assert!(spec.magnitudes_db.iter().all(|&db| db == FLOOR_DB));
    }

    #[test]
    fn imd_targets() {
        let f = imd_frequencies(3700.0, 400.0);
        assert_eq!(f, [400.0, 800.0, 2900.0, 3300.0, 3700.0, 4100.0, 4500.0]);
    }

    #[test]
    fn symmetric_sidebands_have_no_asymmetry() {
        let mut x = tone(5.0, 3700.0, 1000);
        for f in [3300.0, 4100.0] {
            x.iter_mut().zip(tone(0.1, f, 1000)).for_each(|(a, b)| *a += b);
        }
        for f in [2900.0, 4500.0] {
            x.iter_mut().zip(tone(0.02, f, 1000)).for_each(|(a, b)| *a += b);
        }
        let r = measure_imd(&dft_db(&trace(x)).unwrap(), 3700.0, 400.0).unwrap();
        assert!(r.psimd2_asym < 1e-9);
        assert!(r.psimd3_asym < 1e-9);
    }

    #[test]
    fn target_beyond_nyquist_rejected() {
        let spec = dft_db(&trace(vec![1.0; 1000])).unwrap();
        assert!(measure_imd(&spec, 49_500.0, 400.0).is_err());
        assert!(measure_imd(&spec, 500.0, 400.0).is_err());
    }

    #[test]
    fn grid_counts() {
        assert_eq!(frequency_grid(1900.0, 4300.0, 100.0).len(), 25);
        assert_eq!(frequency_grid(3700.0, 3700.0, 100.0), vec![3700.0]);
    }

    #[test]
    fn spearman_basics() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&x, &[10.0, 20.0, 30.0, 40.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&x, &[4.0, 3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        // ties get average ranks
        assert_eq!(ranks(&[1.0, 5.0, 5.0, 2.0]), vec![1.0, 3.5, 3.5, 2.0]);
    }

    #[test]
    fn spectrum_csv_header() {
        let spec = dft_db(&trace(vec![1.0; 4])).unwrap();
        let mut buf = Vec::new();
        spec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("freq_hz,mag_db\n"));
        assert_eq!(text.lines().count(), 4);
    }

    proptest! {
        #[test]
        fn parseval(samples in prop::collection::vec(-10.0f64..10.0, 1..600)) {
            let time: f64 = samples.iter().map(|x| x * x).sum();
            let freq: f64 = dft(&samples).iter().map(|c| c.norm_sqr()).sum::<f64>() / samples.len() as f64;
            prop_assert!((time - freq).abs() <= 1e-10 * time.max(1e-300));
        }

        #[test]
        fn scaling_by_ten_adds_twenty_db(samples in prop::collection::vec(-5.0f64..5.0, 8..400)) {
            let base = dft_db(&trace(samples.clone())).unwrap();
            let loud = dft_db(&trace(samples.iter().map(|x| 10.0 * x).collect())).unwrap();
            for (a, b) in base.magnitudes_db.iter().zip(&loud.magnitudes_db) {
                if *a > FLOOR_DB + 40.0 {
                    prop_assert!((b - a - 20.0).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn imd_frequency_identities(f5 in 1000.0f64..20000.0, f1 in 10.0f64..400.0) {
            let f = imd_frequencies(f5, f1);
            prop_assert_eq!(f[1], 2.0 * f1);
            prop_assert_eq!(f[2], f5 - 2.0 * f1);
            prop_assert_eq!(f[3], f5 - f1);
            prop_assert_eq!(f[5], f5 + f1);
            prop_assert_eq!(f[6], f5 + 2.0 * f1);
        }
    }
}
