//! CZ gate between two three-level transmons coupled through a damped
//! resonator, and the average-gate-fidelity sweep against the resonator
//! quality factor.
//!
//! The model is two truncated transmon ladders exchanging excitations with a
//! truncated cavity, with the cavity as the only loss channel
//! (`kappa = omega_r / Q_i`). The CZ resonance puts `|11>` degenerate with
//! `|02>`; one full period of their mediated oscillation returns the
//! population with a geometric pi phase.
//!
//! All frequencies in [`DeviceParams`] are angular (rad/s). The JSON
//! interchange format ([`DeviceParamsFile`]) uses linear Hz instead and is
//! converted on load.

mod channel;
mod coupling;
mod evolve;
mod integrate;
mod ops;
mod sweep;

pub use channel::{
    avg_gate_fidelity, avg_gate_fidelity_haar_mc, channel_tomography, phase_correct,
    QuantumChannel,
};
pub use coupling::{cz_detuning, estimate_g_eff, gate_time};
pub use evolve::{build_hamiltonian, evolve};
pub use sweep::{
    calibrate_gate_time, crossing_q, is_monotone_nonincreasing, q_sweep, write_sweep_csv,
    FidelityPoint, GateCalibration, SweepPoint, SweepResult,
};

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;

pub(crate) type C64 = Complex64;

pub const TWO_PI: f64 = std::f64::consts::TAU;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid device parameters: {0}")]
    InvalidParams(String),
    #[error("integrator failed at t = {t:.3e} s: {reason}")]
    Integrator { t: f64, reason: String },
    #[error(
        "could not identify the |11;0> / |02;0> branches: best overlap with the \
         target pair subspace was {overlap:.3}"
    )]
    ManifoldIdentification { overlap: f64 },
    #[error("propagated operator basis lost Hermiticity (deviation {deviation:.3e})")]
    HermiticityLoss { deviation: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Device parameters for the two-transmon, one-resonator model. Angular
/// frequencies throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    /// Resonator frequency, rad/s.
    pub omega_r: f64,
    /// 0 -> 1 transition frequency of each qubit, rad/s.
    pub omega01: [f64; 2],
    /// Anharmonicity of each qubit, rad/s (negative for transmons).
    pub eta: [f64; 2],
    /// Qubit-resonator coupling of each qubit, rad/s.
    pub g: [f64; 2],
    /// Transmon levels kept per qubit (>= 3 so |02> exists).
    pub q_levels: usize,
    /// Resonator levels kept (>= 2).
    pub r_levels: usize,
    /// Photon leakage rate of the resonator, rad/s.
    pub kappa: f64,
    /// Internal quality factor when the loss was specified that way.
    pub q_i: Option<f64>,
    /// Effective qubit-qubit coupling, rad/s, when externally provided.
    pub g_eff: Option<f64>,
    /// Gate time in seconds, when externally provided.
    pub t_gate: Option<f64>,
}

impl DeviceParams {
    /// Reference operating point: a 5.6 / 5.8 GHz transmon pair with
    /// -200 MHz anharmonicity on the CZ resonance, coupled at 81.2 MHz to a
    /// lossless 6 GHz resonator.
    pub fn reference_cz() -> Self {
        DeviceParams {
            omega_r: TWO_PI * 6.0e9,
            omega01: [TWO_PI * 5.6e9, TWO_PI * 5.8e9],
            eta: [-TWO_PI * 2.0e8, -TWO_PI * 2.0e8],
            g: [TWO_PI * 8.12e7, TWO_PI * 8.12e7],
            q_levels: 3,
            r_levels: 5,
            kappa: 0.0,
            q_i: None,
            g_eff: None,
            t_gate: None,
        }
    }

    /// Same device with the loss set from an internal quality factor.
    pub fn with_quality_factor(mut self, q_i: f64) -> Self {
        self.kappa = if q_i.is_infinite() { 0.0 } else { self.omega_r / q_i };
        self.q_i = q_i.is_finite().then_some(q_i);
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.q_levels < 3 {
            return Err(SimError::InvalidParams(format!(
                "q_levels must be >= 3, got {}",
                self.q_levels
            )));
        }
        if self.r_levels < 2 {
            return Err(SimError::InvalidParams(format!(
                "r_levels must be >= 2, got {}",
                self.r_levels
            )));
        }
        if !(self.omega_r.is_finite() && self.omega_r > 0.0) {
            return Err(SimError::InvalidParams(format!(
                "omega_r must be positive and finite, got {}",
                self.omega_r
            )));
        }
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(SimError::InvalidParams(format!(
                "kappa must be nonnegative, got {}",
                self.kappa
            )));
        }
        if let Some(q) = self.q_i {
            let product = self.kappa * q;
            if (product - self.omega_r).abs() > 1e-6 * self.omega_r {
                return Err(SimError::InvalidParams(format!(
                    "kappa * Q_i = {product:.6e} is inconsistent with omega_r = {:.6e}",
                    self.omega_r
                )));
            }
        }
        for (name, pair) in [("omega01", &self.omega01), ("eta", &self.eta), ("g", &self.g)] {
            if pair.iter().any(|x| !x.is_finite()) {
                return Err(SimError::InvalidParams(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    /// Hilbert-space dimension of the full product basis.
    pub fn dim(&self) -> usize {
        self.q_levels * self.q_levels * self.r_levels
    }
}

/// On-disk parameter format: linear Hz (and plain seconds), converted to the
/// angular-frequency [`DeviceParams`] on load. Unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceParamsFile {
    pub omega_r_hz: f64,
    pub omega01_hz: [f64; 2],
    pub eta_hz: [f64; 2],
    pub g_hz: [f64; 2],
    #[serde(default = "default_q_levels")]
    pub q_levels: usize,
    #[serde(default = "default_r_levels")]
    pub r_levels: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_i: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_rad_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_eff_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_gate_s: Option<f64>,
}

fn default_q_levels() -> usize {
    3
}

fn default_r_levels() -> usize {
    5
}

impl DeviceParamsFile {
    pub fn into_params(self) -> Result<DeviceParams, SimError> {
        let omega_r = TWO_PI * self.omega_r_hz;
        let kappa = match (self.kappa_rad_s, self.q_i) {
            (Some(k), _) => k,
            (None, Some(q)) => omega_r / q,
            (None, None) => 0.0,
        };
        let params = DeviceParams {
            omega_r,
            omega01: self.omega01_hz.map(|f| TWO_PI * f),
            eta: self.eta_hz.map(|f| TWO_PI * f),
            g: self.g_hz.map(|f| TWO_PI * f),
            q_levels: self.q_levels,
            r_levels: self.r_levels,
            kappa,
            q_i: self.q_i,
            g_eff: self.g_eff_hz.map(|f| TWO_PI * f),
            t_gate: self.t_gate_s,
        };
        params.validate()?;
        Ok(params)
    }
}

/// Density operator on the full product space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOp {
    pub dim: usize,
    pub matrix: Array2<C64>,
}

impl DensityOp {
    /// Pure state `|index><index|`.
    pub fn pure(dim: usize, index: usize) -> Self {
        assert!(index < dim);
        let mut matrix = Array2::<C64>::zeros((dim, dim));
        matrix[(index, index)] = C64::new(1.0, 0.0);
        DensityOp { dim, matrix }
    }

    /// Validating constructor: Hermitian within 1e-10 and unit trace within
    /// 1e-8.
    pub fn from_matrix(matrix: Array2<C64>) -> Result<Self, SimError> {
        let dim = matrix.nrows();
        if matrix.ncols() != dim {
            return Err(SimError::DimensionMismatch {
                expected: dim,
                got: matrix.ncols(),
            });
        }
        let dev = linalg::hermiticity_deviation(&matrix);
        if dev > 1e-10 {
            return Err(SimError::HermiticityLoss { deviation: dev });
        }
        let op = DensityOp { dim, matrix };
        if (op.trace() - 1.0).abs() > 1e-8 {
            return Err(SimError::InvalidParams(format!(
                "density operator trace {} is not 1",
                op.trace()
            )));
        }
        Ok(op)
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.matrix[(i, i)].re).sum()
    }

    /// `tr(rho^2)`, equal to the squared Frobenius norm for Hermitian input.
    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn population(&self, index: usize) -> f64 {
        self.matrix[(index, index)].re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::hermitian_eigenvalues(&self.matrix)
            .map(|v| v[0])
            .unwrap_or(f64::NAN)
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        linalg::hermiticity_deviation(&self.matrix)
    }
}
