//! Half-bridge Class-D amplifier with a rippled supply.
//!
//! A natural-sampling comparator drives the bridge between the two supply
//! rails; the bridge node feeds a series inductor into a capacitor shunted by
//! the load resistor. The LC state is advanced with classical fourth-order
//! Runge-Kutta at a fixed internal step. Whenever the comparator changes state
//! inside a step, the crossing instant is located by bisection and the step is
//! split there, so the switching edges are not quantized to the step grid.
//!
//! Two effects beyond the ideal switch/LC network are modeled because an ideal
//! network driven by an open-loop modulator is linear in the supply and cannot
//! produce the second ripple harmonic or the `f_in ± 2 f_ripple` products:
//!
//! * the triangle carrier amplitude follows the positive rail
//!   ([`CircuitConfig::carrier_supply_tracking`]),
//! * the filter inductor softly saturates,
//!   `L(i) = L0 / (1 + (i / I_sat)^2)` ([`CircuitConfig::inductor_saturation_current`]).
//!
//! Setting both to zero together with [`RippleRails::Both`] recovers the ideal
//! circuit.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::signal::{fmt_f64, SignalTrace};

/// Which supply rails carry the ripple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RippleRails {
    /// `+V_dd(t)` and a clean `-V_dd`.
    #[default]
    Positive,
    /// `+V_dd(t)` and `-V_dd(t)`.
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CircuitConfig {
    /// Nominal rail magnitude `V_dd` in volts.
    pub supply_voltage: f64,
    /// Relative ripple amplitude.
    pub ripple_fraction: f64,
    pub ripple_freq: f64,
    pub carrier_freq: f64,
    pub carrier_amp: f64,
    pub input_amp: f64,
    pub input_freq: f64,
    pub filter_inductance: f64,
    pub filter_capacitance: f64,
    pub load_resistance: f64,
    /// Integration step in seconds.
    pub internal_step: f64,
    /// Output sample rate; must be an integer fraction of `1 / internal_step`.
    pub sample_rate: f64,
    pub window_start: f64,
    pub window_end: f64,
    pub ripple_rails: RippleRails,
    /// Fraction of the positive-rail deviation that scales the carrier
    /// amplitude. 0 = fixed carrier, 1 = carrier proportional to the rail.
    pub carrier_supply_tracking: f64,
    /// Inductor saturation current in amperes; 0 disables saturation.
    pub inductor_saturation_current: f64,
}

impl Default for CircuitConfig {
    fn default() -> Self {
        Self {
            supply_voltage: 10.0,
            ripple_fraction: 0.05,
            ripple_freq: 400.0,
            carrier_freq: 58_000.0,
            carrier_amp: 4.0,
            input_amp: 3.0,
            input_freq: 3700.0,
            filter_inductance: 56e-6,
            filter_capacitance: 4.7e-6,
            load_resistance: 8.0,
            internal_step: 1e-7,
            sample_rate: 100_000.0,
            window_start: 0.010,
            window_end: 0.020,
            ripple_rails: RippleRails::Positive,
            carrier_supply_tracking: 1.0,
            inductor_saturation_current: 2.0,
        }
    }
}

impl CircuitConfig {
    /// The ideal circuit: both rails rippled, fixed carrier, linear inductor.
    pub fn ideal() -> Self {
        Self {
            ripple_rails: RippleRails::Both,
            carrier_supply_tracking: 0.0,
            inductor_saturation_current: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("supply_voltage", self.supply_voltage),
            ("carrier_freq", self.carrier_freq),
            ("carrier_amp", self.carrier_amp),
            ("filter_inductance", self.filter_inductance),
            ("filter_capacitance", self.filter_capacitance),
            ("load_resistance", self.load_resistance),
            ("internal_step", self.internal_step),
            ("sample_rate", self.sample_rate),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("circuit.{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("ripple_fraction", self.ripple_fraction),
            ("ripple_freq", self.ripple_freq),
            ("input_amp", self.input_amp),
            ("input_freq", self.input_freq),
            ("window_start", self.window_start),
            ("carrier_supply_tracking", self.carrier_supply_tracking),
            ("inductor_saturation_current", self.inductor_saturation_current),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("circuit.{name} must be non-negative, got {v}")));
            }
        }
        if self.ripple_fraction >= 1.0 {
            return Err(invalid("circuit.ripple_fraction must be below 1"));
        }
        if self.internal_step > 1.0 / (20.0 * self.carrier_freq) * (1.0 + 1e-12) {
            return Err(invalid(format!(
                "circuit.internal_step {} does not resolve a {} Hz carrier (max {})",
                self.internal_step,
                self.carrier_freq,
                1.0 / (20.0 * self.carrier_freq)
            )));
        }
        let ratio = 1.0 / (self.sample_rate * self.internal_step);
        if ratio < 1.0 - 1e-9 || (ratio - ratio.round()).abs() > 1e-6 * ratio {
            return Err(invalid(format!(
                "circuit.sample_rate {} is not an integer fraction of the integration rate",
                self.sample_rate
            )));
        }
        if self.window_end.is_nan() || self.window_end <= self.window_start {
            return Err(invalid("circuit.window_end must exceed circuit.window_start"));
        }
        if self.input_amp >= self.carrier_amp {
            return Err(invalid(format!(
                "circuit.input_amp {} over-modulates a {} V carrier",
                self.input_amp, self.carrier_amp
            )));
        }
        Ok(())
    }

    /// Integration steps per output sample.
    pub fn decimation(&self) -> usize {
        (1.0 / (self.sample_rate * self.internal_step)).round() as usize
    }

    /// Number of samples in the recorded window.
    pub fn sample_count(&self) -> usize {
        ((self.window_end - self.window_start) * self.sample_rate).round() as usize
    }

    fn positive_rail(&self, t: f64) -> f64 {
        supply_voltage(t, self)
    }

    fn negative_rail(&self, t: f64) -> f64 {
        match self.ripple_rails {
            RippleRails::Positive => -self.supply_voltage,
            RippleRails::Both => -supply_voltage(t, self),
        }
    }

    fn carrier(&self, t: f64) -> f64 {
        let deviation = self.positive_rail(t) / self.supply_voltage - 1.0;
        let amp = self.carrier_amp * (1.0 + self.carrier_supply_tracking * deviation);
        triangle_unchecked(t, self.carrier_freq, amp)
    }

    fn input(&self, t: f64) -> f64 {
        self.input_amp * (2.0 * PI * self.input_freq * t).sin()
    }

    /// Comparator margin; the bridge is HIGH when this is strictly positive.
    fn margin(&self, t: f64) -> f64 {
        self.input(t) - self.carrier(t)
    }
}

/// Symmetric triangle wave: `-amp` at `t = 0`, `+amp` at half period.
pub fn triangle_carrier(t: f64, freq: f64, amp: f64) -> Result<f64> {
    if freq.is_nan() || freq <= 0.0 || amp.is_nan() || amp <= 0.0 {
        return Err(invalid(format!(
            "triangle carrier needs positive frequency and amplitude, got {freq} Hz / {amp} V"
        )));
    }
    Ok(triangle_unchecked(t, freq, amp))
}

fn triangle_unchecked(t: f64, freq: f64, amp: f64) -> f64 {
    let phase = (t * freq).rem_euclid(1.0);
    if phase < 0.5 {
        -amp + 4.0 * amp * phase
    } else {
        3.0 * amp - 4.0 * amp * phase
    }
}

/// Bridge switch position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchState {
    High,
    Low,
}

/// Comparator: HIGH only when the input strictly exceeds the carrier.
pub fn pwm_state(input_v: f64, carrier_v: f64) -> SwitchState {
    if input_v > carrier_v {
        SwitchState::High
    } else {
        SwitchState::Low
    }
}

/// `V_dd (1 + r sin(2 pi f_r t))`.
pub fn supply_voltage(t: f64, cfg: &CircuitConfig) -> f64 {
    cfg.supply_voltage * (1.0 + cfg.ripple_fraction * (2.0 * PI * cfg.ripple_freq * t).sin())
}

/// Stimulus and response over the recorded window.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitTraces {
    pub input: SignalTrace,
    pub output: SignalTrace,
}

impl CircuitTraces {
    /// Writes `time_s,input_v,output_v` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time_s,input_v,output_v")?;
        for (n, (x, y)) in self.input.samples.iter().zip(&self.output.samples).enumerate() {
            writeln!(w, "{},{},{}", fmt_f64(self.input.time_at(n)), fmt_f64(*x), fmt_f64(*y))?;
        }
        Ok(())
    }
}

/// Inductor current (A) and capacitor voltage (V).
#[derive(Debug, Clone, Copy)]
struct FilterState {
    current: f64,
    voltage: f64,
}

impl FilterState {
    fn offset(self, d: FilterState, h: f64) -> Self {
        Self { current: self.current + h * d.current, voltage: self.voltage + h * d.voltage }
    }

    fn is_finite(self) -> bool {
        self.current.is_finite() && self.voltage.is_finite()
    }
}

struct Filter<'a> {
    cfg: &'a CircuitConfig,
}

impl Filter<'_> {
    fn derivative(&self, t: f64, s: FilterState, sw: SwitchState) -> FilterState {
        let cfg = self.cfg;
        let bridge = match sw {
            SwitchState::High => cfg.positive_rail(t),
            SwitchState::Low => cfg.negative_rail(t),
        };
        let inductance = if cfg.inductor_saturation_current > 0.0 {
            let x = s.current / cfg.inductor_saturation_current;
            cfg.filter_inductance / (1.0 + x * x)
        } else {
            cfg.filter_inductance
        };
        FilterState {
            current: (bridge - s.voltage) / inductance,
            voltage: (s.current - s.voltage / cfg.load_resistance) / cfg.filter_capacitance,
        }
    }

    fn rk4(&self, t: f64, s: FilterState, h: f64, sw: SwitchState) -> FilterState {
        let k1 = self.derivative(t, s, sw);
        let k2 = self.derivative(t + 0.5 * h, s.offset(k1, 0.5 * h), sw);
        let k3 = self.derivative(t + 0.5 * h, s.offset(k2, 0.5 * h), sw);
        let k4 = self.derivative(t + h, s.offset(k3, h), sw);
        FilterState {
            current: s.current + h / 6.0 * (k1.current + 2.0 * k2.current + 2.0 * k3.current + k4.current),
            voltage: s.voltage + h / 6.0 * (k1.voltage + 2.0 * k2.voltage + 2.0 * k3.voltage + k4.voltage),
        }
    }
}

fn switch_at(cfg: &CircuitConfig, t: f64) -> SwitchState {
    let m = cfg.margin(t);
    if m > 0.0 {
        SwitchState::High
    } else {
        SwitchState::Low
    }
}

/// Bisects for the comparator transition inside `[a, b]`, given the state at `a`.
fn locate_edge(cfg: &CircuitConfig, mut a: f64, mut b: f64, before: SwitchState) -> f64 {
    for _ in 0..60 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if switch_at(cfg, mid) == before {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Runs the circuit from rest at `t = 0` and records both traces over the window.
///
/// The step size must keep at most one comparator transition per step, which
/// `internal_step <= 1 / (20 f_carrier)` guarantees for any non-over-modulated
/// input.
pub fn simulate(cfg: &CircuitConfig) -> Result<CircuitTraces> {
    cfg.validate()?;
    let dt = cfg.internal_step;
    let decimation = cfg.decimation() as u64;
    let count = cfg.sample_count();
    let first = (cfg.window_start / dt).round() as u64;
    let last = first + (count as u64 - 1) * decimation;

    let filter = Filter { cfg };
    let mut state = FilterState { current: 0.0, voltage: 0.0 };
    let mut sw = switch_at(cfg, 0.0);
    let mut input = Vec::with_capacity(count);
    let mut output = Vec::with_capacity(count);

    let mut k: u64 = 0;
    loop {
        let t = k as f64 * dt;
        if k >= first && (k - first).is_multiple_of(decimation) {
            input.push(cfg.input(t));
            output.push(state.voltage);
            if k == last {
                break;
            }
        }
        let t_next = (k + 1) as f64 * dt;
        let next_sw = switch_at(cfg, t_next);
        state = if next_sw == sw {
            filter.rk4(t, state, t_next - t, sw)
        } else {
            let edge = locate_edge(cfg, t, t_next, sw);
            let mid_state = filter.rk4(t, state, edge - t, sw);
            filter.rk4(edge, mid_state, t_next - edge, next_sw)
        };
        sw = next_sw;
        k += 1;
        if !state.is_finite() {
            return Err(Error::SimulationDiverged { step: k });
        }
    }

    let start = first as f64 * dt;
    Ok(CircuitTraces {
        input: SignalTrace::new(cfg.sample_rate, start, input)?,
        output: SignalTrace::new(cfg.sample_rate, start, output)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FC: f64 = 58_000.0;

    #[test]
    fn carrier_phase_convention() {
        assert_eq!(triangle_carrier(0.0, FC, 4.0).unwrap(), -4.0);
        assert!((triangle_carrier(1.0 / (2.0 * FC), FC, 4.0).unwrap() - 4.0).abs() < 1e-9);
        assert!(triangle_carrier(1.0 / (4.0 * FC), FC, 4.0).unwrap().abs() < 1e-9);
        assert!(triangle_carrier(0.0, 0.0, 4.0).is_err());
        assert!(triangle_carrier(0.0, FC, -1.0).is_err());
    }

    #[test]
    fn comparator_tie_is_low() {
        assert_eq!(pwm_state(3.0, 2.0), SwitchState::High);
        assert_eq!(pwm_state(-1.0, 0.0), SwitchState::Low);
        assert_eq!(pwm_state(0.0, 0.0), SwitchState::Low);
    }

    #[test]
    fn supply_ripple() {
        let mut cfg = CircuitConfig::default();
        assert_eq!(supply_voltage(0.0, &cfg), 10.0);
        let peak = 1.0 / (4.0 * cfg.ripple_freq);
        assert!((supply_voltage(peak, &cfg) - 10.5).abs() < 1e-12);
        cfg.ripple_fraction = 0.0;
        assert_eq!(supply_voltage(0.123, &cfg), 10.0);
    }

    #[test]
    fn duty_cycle_follows_input_level() {
        let dt = 1e-7;
        let steps_per_period = (1.0 / (FC * dt)).round() as usize;
        let periods = 20;
        for u in [-3.5, -1.0, 0.0, 0.7, 2.9] {
            let high = (0..steps_per_period * periods)
                .filter(|&k| {
                    let c = triangle_carrier(k as f64 * dt, FC, 4.0).unwrap();
                    pwm_state(u, c) == SwitchState::High
                })
                .count();
            let fraction = high as f64 / (steps_per_period * periods) as f64;
            let expected = (u + 4.0) / 8.0;
            assert!((fraction - expected).abs() <= 2.0 * dt * FC, "u={u}: {fraction} vs {expected}");
        }
    }

    #[test]
    fn config_validation() {
        assert!(CircuitConfig::default().validate().is_ok());
        let bad = [
            CircuitConfig { internal_step: 1e-6, ..Default::default() },
            CircuitConfig { sample_rate: 30_000.0, ..Default::default() },
            CircuitConfig { window_end: 0.005, ..Default::default() },
            CircuitConfig { input_amp: 4.5, ..Default::default() },
            CircuitConfig { load_resistance: 0.0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::InvalidArgument(_))), "{cfg:?}");
        }
    }

    #[test]
    fn window_length_and_timing() {
        let traces = simulate(&CircuitConfig::default()).unwrap();
        assert_eq!(traces.input.len(), 1000);
        assert_eq!(traces.output.len(), 1000);
        assert!((traces.input.start_time - 0.01).abs() < 1e-15);
        assert!((traces.output.time_at(999) - 0.01999).abs() < 1e-12);
    }

    #[test]
    fn output_bounded_by_supply() {
        for cfg in [CircuitConfig::default(), CircuitConfig::ideal()] {
            let traces = simulate(&cfg).unwrap();
            let bound = cfg.supply_voltage * (1.0 + cfg.ripple_fraction);
            assert!(traces.output.max_abs() <= bound);
        }
    }

    #[test]
    fn deterministic() {
        let cfg = CircuitConfig { window_end: 0.0105, ..Default::default() };
        let a = simulate(&cfg).unwrap();
        let b = simulate(&cfg).unwrap();
        let bits = |t: &SignalTrace| t.samples.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.output), bits(&b.output));
    }

    #[test]
    fn step_halving_converges() {
        let coarse = CircuitConfig { window_end: 0.012, ..Default::default() };
        let fine = CircuitConfig { internal_step: coarse.internal_step / 2.0, ..coarse.clone() };
        let (a, b) = (simulate(&coarse).unwrap(), simulate(&fine).unwrap());
        assert_eq!(a.output.len(), b.output.len());
        let gap = a.output.samples.iter().zip(&b.output.samples).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(gap < 1e-3, "max difference {gap} V");
    }

    #[test]
    fn csv_layout() {
        let cfg = CircuitConfig { window_start: 0.001, window_end: 0.00105, ..Default::default() };
        let traces = simulate(&cfg).unwrap();
        let mut buf = Vec::new();
        traces.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "time_s,input_v,output_v");
        assert_eq!(lines.len(), 6);
        let fields: Vec<f64> = lines[1].split(',').map(|f| f.parse().unwrap()).collect();
        assert_eq!(fields[0], 0.001);
        assert_eq!(fields[2].to_bits(), traces.output.samples[0].to_bits());
    }
}
