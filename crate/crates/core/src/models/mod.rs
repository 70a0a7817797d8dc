//! Behavioral models of the amplifier: Elman networks and a
//! Volterra-Laguerre estimator.

pub mod activation;
pub mod elman;
pub mod gradcheck;
pub mod volterra;

pub use activation::{morlet, morlet_deriv, normalize_hidden, sigmoid, sigmoid_deriv};
pub use elman::{
    benn_forward, benn_grad_step, benn_output, ewnn_forward, ewnn_grad_step, ewnn_output, half_squared_error,
    ElmanState, ForwardPass, LearningRates, ModelKind, ModelSnapshot, WaveletParams,
};
pub use volterra::{fit_volterra_laguerre, laguerre_bank, volterra_predict, LaguerreConfig, VolterraFit};
