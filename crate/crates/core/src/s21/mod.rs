//! Complex S21 trace analysis: notch-resonator fitting and the crosstalk
//! spectrum of a line crossing a resonator.
//!
//! The transmission model is the standard notch-port form
//! `S21(f) = a e^{i alpha} e^{-2 pi i f tau}
//!   [1 - (Q_l / |Q_c|) e^{i phi} / (1 + 2 i Q_l (f / f_r - 1))]`
//! with loaded quality factor `Q_l`, coupling magnitude `|Q_c|`, impedance
//! mismatch angle `phi`, cable delay `tau`, and scale `a e^{i alpha}`. The
//! internal quality factor follows from
//! `1 / Q_l = 1 / Q_i + cos(phi) / |Q_c|`.

mod crosstalk;
mod fit;

pub use crosstalk::{crosstalk_spectrum, CrosstalkResult};
pub use fit::fit_resonance;

use std::io::{BufRead, BufReader, Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub(crate) type C64 = Complex64;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("invalid fit parameters: {0}")]
    InvalidFit(String),
    #[error("no resonance dip found (depth {depth:.3e} below the detection threshold {threshold:.3e})")]
    NoDipFound { depth: f64, threshold: f64 },
    #[error("fit did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("baseline normalization failed: wing median {wing_median:.3} is below 0.5")]
    BaselineNormalization { wing_median: f64 },
    #[error("trace parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("applied power must be positive, got {0} W")]
    NonPositivePower(f64),
}

/// A complex transmission trace on a strictly increasing frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct S21Trace {
    pub freq: Vec<f64>,
    pub s21: Vec<C64>,
    /// Applied readout power in dBm, when known.
    pub power_dbm: Option<f64>,
}

impl S21Trace {
    pub fn new(freq: Vec<f64>, s21: Vec<C64>, power_dbm: Option<f64>) -> Result<Self, FitError> {
        if freq.len() != s21.len() {
            return Err(FitError::InvalidTrace(format!(
                "frequency and S21 lengths differ: {} vs {}",
                freq.len(),
                s21.len()
            )));
        }
        if freq.len() < 16 {
            return Err(FitError::InvalidTrace(format!(
                "need at least 16 points, got {}",
                freq.len()
            )));
        }
        if freq.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(FitError::InvalidTrace(
                "frequencies must be strictly increasing".into(),
            ));
        }
        Ok(S21Trace {
            freq,
            s21,
            power_dbm,
        })
    }

    pub fn len(&self) -> usize {
        self.freq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq.is_empty()
    }

    pub fn span(&self) -> f64 {
        self.freq[self.len() - 1] - self.freq[0]
    }
}

/// Extracted notch-model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorFit {
    /// Resonance frequency, Hz.
    pub f_r: f64,
    /// Loaded quality factor.
    #[serde(rename = "Q_l")]
    pub q_l: f64,
    /// Coupling quality factor magnitude.
    #[serde(rename = "Q_c_mag")]
    pub q_c_mag: f64,
    /// Impedance mismatch angle, rad.
    pub phi: f64,
    /// Internal quality factor.
    #[serde(rename = "Q_i")]
    pub q_i: f64,
    /// Cable delay, seconds.
    pub tau: f64,
    /// Amplitude scale.
    pub a: f64,
    /// Global phase, rad.
    pub alpha: f64,
    /// RMS of the complex fit residual.
    pub residual: f64,
}

impl ResonatorFit {
    /// A bare model parameter set (no fit residual) for synthesis.
    pub fn ideal(f_r: f64, q_i: f64, q_c_mag: f64, phi: f64) -> Self {
        let q_l = 1.0 / (1.0 / q_i + phi.cos() / q_c_mag);
        ResonatorFit {
            f_r,
            q_l,
            q_c_mag,
            phi,
            q_i,
            tau: 0.0,
            a: 1.0,
            alpha: 0.0,
            residual: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), FitError> {
        if !(self.f_r > 0.0) {
            return Err(FitError::InvalidFit(format!(
                "f_r must be positive, got {}",
                self.f_r
            )));
        }
        for (name, v) in [
            ("Q_l", self.q_l),
            ("Q_c_mag", self.q_c_mag),
            ("phi", self.phi),
            ("tau", self.tau),
            ("a", self.a),
            ("alpha", self.alpha),
        ] {
            if !v.is_finite() {
                return Err(FitError::InvalidFit(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    /// `1/Q_l - 1/Q_i - cos(phi)/|Q_c|`, zero when the stored parameters are
    /// self-consistent.
    pub fn quality_identity_residual(&self) -> f64 {
        1.0 / self.q_l - 1.0 / self.q_i - self.phi.cos() / self.q_c_mag
    }
}

/// Notch-port transmission at frequency `f`.
pub fn model_s21(f: f64, fit: &ResonatorFit) -> Result<C64, FitError> {
    fit.validate()?;
    Ok(model_value(f, fit))
}

pub(crate) fn model_value(f: f64, fit: &ResonatorFit) -> C64 {
    let delta = f / fit.f_r - 1.0;
    let denom = C64::new(1.0, 2.0 * fit.q_l * delta);
    let notch = C64::new(1.0, 0.0)
        - (fit.q_l / fit.q_c_mag) * C64::new(0.0, fit.phi).exp() / denom;
    fit.a * C64::new(0.0, fit.alpha - std::f64::consts::TAU * f * fit.tau).exp() * notch
}

/// Steady-state average photon number of a notch resonator driven with
/// `power_w` watts on the feed line:
/// `<n> = 2 Q_l^2 P / (|Q_c| hbar omega_r^2)`.
///
/// Factor-of-two conventions differ across the literature; outputs should
/// carry [`PHOTON_NUMBER_CONVENTION`].
pub fn avg_photon_number(fit: &ResonatorFit, power_w: f64) -> Result<f64, FitError> {
    fit.validate()?;
    if power_w < 0.0 {
        return Err(FitError::NonPositivePower(power_w));
    }
    const HBAR: f64 = 1.054_571_817e-34;
    let omega_r = std::f64::consts::TAU * fit.f_r;
    Ok(2.0 * fit.q_l * fit.q_l * power_w / (fit.q_c_mag * HBAR * omega_r * omega_r))
}

/// Convention tag for [`avg_photon_number`] outputs.
pub const PHOTON_NUMBER_CONVENTION: &str =
    "steady-state notch: <n> = 2 Q_l^2 P / (|Q_c| hbar omega_r^2)";

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

const TRACE_HEADER: &str = "frequency_hz,s21_re,s21_im";

/// Read a trace from CSV with header `frequency_hz,s21_re,s21_im`.
/// Parse failures carry 1-based line numbers.
pub fn read_trace_csv<R: Read>(reader: R, power_dbm: Option<f64>) -> Result<S21Trace, FitError> {
    let buf = BufReader::new(reader);
    let mut freq = Vec::new();
    let mut s21 = Vec::new();
    for (idx, line) in buf.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| FitError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let trimmed = line.trim_start_matches('\u{feff}').trim();
        if idx == 0 {
            if trimmed != TRACE_HEADER {
                return Err(FitError::Parse {
                    line: line_no,
                    message: format!("expected header `{TRACE_HEADER}`, got `{trimmed}`"),
                });
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 3 {
            return Err(FitError::Parse {
                line: line_no,
                message: format!("expected 3 comma-separated fields, got {}", fields.len()),
            });
        }
        let parse = |s: &str, what: &str| -> Result<f64, FitError> {
            s.trim().parse::<f64>().map_err(|e| FitError::Parse {
                line: line_no,
                message: format!("bad {what} `{}`: {e}", s.trim()),
            })
        };
        let f = parse(fields[0], "frequency_hz")?;
        let re = parse(fields[1], "s21_re")?;
        let im = parse(fields[2], "s21_im")?;
        freq.push(f);
        s21.push(C64::new(re, im));
    }
    S21Trace::new(freq, s21, power_dbm)
}

/// Write a trace in the CSV format accepted by [`read_trace_csv`].
pub fn write_trace_csv<W: Write>(mut w: W, trace: &S21Trace) -> std::io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for (f, z) in trace.freq.iter().zip(&trace.s21) {
        writeln!(w, "{f},{},{}", z.re, z.im)?;
    }
    Ok(())
}

/// Synthetic trace generation for fixtures and validation studies.
pub mod synthetic {
    use super::{C64, ResonatorFit, S21Trace};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Sample the notch model on `n` evenly spaced points.
    pub fn sample_model(fit: &ResonatorFit, f_lo: f64, f_hi: f64, n: usize) -> S21Trace {
        let freq: Vec<f64> = (0..n)
            .map(|k| f_lo + (f_hi - f_lo) * k as f64 / (n - 1) as f64)
            .collect();
        let s21 = freq.iter().map(|&f| super::model_value(f, fit)).collect();
        S21Trace {
            freq,
            s21,
            power_dbm: None,
        }
    }

    /// Sample the model over `halfwidths` linewidths either side of
    /// resonance.
    pub fn sample_around_resonance(fit: &ResonatorFit, halfwidths: f64, n: usize) -> S21Trace {
        let linewidth = fit.f_r / fit.q_l;
        sample_model(
            fit,
            fit.f_r - halfwidths * linewidth,
            fit.f_r + halfwidths * linewidth,
            n,
        )
    }

    /// Additive complex Gaussian noise at the given SNR in dB, referenced to
    /// the off-resonant amplitude `fit.a`; total noise power splits evenly
    /// between the quadratures.
    pub fn add_complex_noise(trace: &mut S21Trace, reference_amplitude: f64, snr_db: f64, seed: u64) {
        let sigma = reference_amplitude * 10f64.powf(-snr_db / 20.0);
        let per_quadrature = sigma / std::f64::consts::SQRT_2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gauss = || {
            let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        };
        for z in &mut trace.s21 {
            *z += C64::new(per_quadrature * gauss(), per_quadrature * gauss());
        }
    }
}
