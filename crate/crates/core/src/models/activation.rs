//! Hidden-layer transfer functions.

/// Morlet modulation frequency.
const MORLET_OMEGA: f64 = 1.75;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `f'(x) = f(x) (1 - f(x))`.
pub fn sigmoid_deriv(x: f64) -> f64 {
    let f = sigmoid(x);
    f * (1.0 - f)
}

/// `cos(1.75 z) exp(-z^2 / 2)`.
pub fn morlet(z: f64) -> f64 {
    (MORLET_OMEGA * z).cos() * (-0.5 * z * z).exp()
}

pub fn morlet_deriv(z: f64) -> f64 {
    let (s, c) = (MORLET_OMEGA * z).sin_cos();
    (-MORLET_OMEGA * s - z * c) * (-0.5 * z * z).exp()
}

/// Largest absolute entry, or 0 for an empty/zero vector.
pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Divides by the largest absolute entry; a zero vector is returned as is.
pub fn normalize_hidden(v: &[f64]) -> Vec<f64> {
    let scale = max_abs(v);
    if scale == 0.0 {
        return v.to_vec();
    }
    v.iter().map(|x| x / scale).collect()
}
