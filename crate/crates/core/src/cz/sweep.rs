//! Gate-time calibration and the infidelity-versus-quality-factor sweep.

use std::io::Write;

use serde::Serialize;

use super::channel::{avg_gate_fidelity, channel_tomography, phase_correct, QuantumChannel};
use super::coupling::{estimate_g_eff, gate_time};
use super::{DeviceParams, SimError};
use crate::parallel;

/// One fidelity measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FidelityPoint {
    #[serde(rename = "Q_i")]
    pub q_i: f64,
    pub avg_fidelity: f64,
    pub infidelity: f64,
    pub phase_corrected: bool,
}

/// One sweep row carrying both the raw and the phase-corrected result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub q_factor: f64,
    pub kappa_rad_s: f64,
    pub infidelity_raw: f64,
    pub infidelity_corrected: f64,
    pub theta1: f64,
    pub theta2: f64,
}

impl SweepPoint {
    pub fn fidelity_points(&self) -> (FidelityPoint, FidelityPoint) {
        (
            FidelityPoint {
                q_i: self.q_factor,
                avg_fidelity: 1.0 - self.infidelity_raw,
                infidelity: self.infidelity_raw,
                phase_corrected: false,
            },
            FidelityPoint {
                q_i: self.q_factor,
                avg_fidelity: 1.0 - self.infidelity_corrected,
                infidelity: self.infidelity_corrected,
                phase_corrected: true,
            },
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GateCalibration {
    /// Measured effective coupling, rad/s.
    pub g_eff_rad_s: f64,
    /// Closed-form gate time from the measured coupling, seconds.
    pub t_nominal_s: f64,
    /// Calibrated gate time (maximum phase-corrected fidelity at Q = 1e6).
    pub t_gate_s: f64,
    /// Phase-corrected fidelity reached at the calibration point.
    pub fidelity: f64,
}

/// Measure `g_eff`, then maximize the phase-corrected fidelity at `Q = 1e6`
/// over gate times within 10% of `pi / (sqrt(2) g_eff)`.
pub fn calibrate_gate_time(params: &DeviceParams) -> Result<GateCalibration, SimError> {
    params.validate()?;
    let g_eff = estimate_g_eff(params)?;
    let t_nominal = gate_time(g_eff)?;
    let cal_params = params.clone().with_quality_factor(1.0e6);
    let cz = QuantumChannel::cz();
    let fidelity_at = |t: f64| -> Result<f64, SimError> {
        let ch = channel_tomography(&cal_params, t)?;
        let (corrected, _) = phase_correct(&ch);
        avg_gate_fidelity(&corrected, &cz)
    };

    // The fidelity-versus-time surface can carry several revival lobes in
    // the window; scan coarsely first, then refine the best bracket.
    let coarse = 21usize;
    let t_at = |k: usize| t_nominal * (0.9 + 0.2 * k as f64 / (coarse - 1) as f64);
    let scan = parallel::map_indexed(coarse, |k| fidelity_at(t_at(k)));
    let mut best_k = 0;
    let mut best_f = f64::NEG_INFINITY;
    for (k, f) in scan.into_iter().enumerate() {
        let f = f?;
        if f > best_f {
            best_f = f;
            best_k = k;
        }
    }
    let (mut lo, mut hi) = (
        t_at(best_k.saturating_sub(1)),
        t_at((best_k + 1).min(coarse - 1)),
    );
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = fidelity_at(x1)?;
    let mut f2 = fidelity_at(x2)?;
    for _ in 0..14 {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = fidelity_at(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = fidelity_at(x2)?;
        }
    }
    let (t_gate, fidelity) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    let (t_gate, fidelity) = if best_f > fidelity {
        (t_at(best_k), best_f)
    } else {
        (t_gate, fidelity)
    };
    Ok(GateCalibration {
        g_eff_rad_s: g_eff,
        t_nominal_s: t_nominal,
        t_gate_s: t_gate,
        fidelity,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub g_eff_rad_s: f64,
    pub t_gate_s: f64,
    pub points: Vec<SweepPoint>,
}

/// Sweep the resonator quality factor: for each `Q`, run full tomography at
/// the calibrated gate time, phase-correct, and record both infidelities.
/// Points are independent and run in parallel.
///
/// A `t_gate` preset in `params` skips calibration; `g_eff` is still
/// measured and reported. `Q = inf` is allowed and means a lossless
/// resonator.
pub fn q_sweep(params: &DeviceParams, q_values: &[f64]) -> Result<SweepResult, SimError> {
    params.validate()?;
    if let Some(&bad) = q_values.iter().find(|&&q| !(q > 0.0)) {
        return Err(SimError::InvalidParams(format!(
            "quality factors must be positive, got {bad}"
        )));
    }
    let (g_eff, t_gate) = match params.t_gate {
        Some(t) => (estimate_g_eff(params)?, t),
        None => {
            let cal = calibrate_gate_time(params)?;
            (cal.g_eff_rad_s, cal.t_gate_s)
        }
    };
    let cz = QuantumChannel::cz();
    let results = parallel::map_slice(q_values, |&q| -> Result<SweepPoint, SimError> {
        let point_params = params.clone().with_quality_factor(q);
        let ch = channel_tomography(&point_params, t_gate)?;
        let raw = avg_gate_fidelity(&ch, &cz)?;
        let (corrected, theta) = phase_correct(&ch);
        let fixed = avg_gate_fidelity(&corrected, &cz)?;
        Ok(SweepPoint {
            q_factor: q,
            kappa_rad_s: point_params.kappa,
            infidelity_raw: 1.0 - raw,
            infidelity_corrected: 1.0 - fixed,
            theta1: theta.0,
            theta2: theta.1,
        })
    });
    let points = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(SweepResult {
        g_eff_rad_s: g_eff,
        t_gate_s: t_gate,
        points,
    })
}

/// Write the sweep as CSV with the stable column set.
pub fn write_sweep_csv<W: Write>(mut w: W, sweep: &SweepResult) -> std::io::Result<()> {
    writeln!(
        w,
        "q_factor,kappa_rad_s,infidelity_raw,infidelity_corrected,theta1,theta2"
    )?;
    for p in &sweep.points {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            p.q_factor,
            p.kappa_rad_s,
            p.infidelity_raw,
            p.infidelity_corrected,
            p.theta1,
            p.theta2
        )?;
    }
    Ok(())
}

/// Quality factor at which the corrected infidelity crosses `threshold`,
/// log-log interpolated between bracketing sweep points. `None` when the
/// curve never crosses.
pub fn crossing_q(points: &[SweepPoint], threshold: f64) -> Option<f64> {
    let mut sorted: Vec<&SweepPoint> = points.iter().filter(|p| p.q_factor.is_finite()).collect();
    sorted.sort_by(|a, b| a.q_factor.partial_cmp(&b.q_factor).unwrap());
    for pair in sorted.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (ia, ib) = (a.infidelity_corrected, b.infidelity_corrected);
        if (ia - threshold) == 0.0 {
            return Some(a.q_factor);
        }
        if (ia > threshold) && (ib <= threshold) {
            if ia <= 0.0 || ib <= 0.0 {
                return Some(b.q_factor);
            }
            let (la, lb) = (ia.ln(), ib.ln());
            let (qa, qb) = (a.q_factor.ln(), b.q_factor.ln());
            let t = (threshold.ln() - la) / (lb - la);
            return Some((qa + t * (qb - qa)).exp());
        }
    }
    None
}

/// Monotonicity diagnostic: corrected infidelity never increases with `Q`
/// beyond `slack`.
pub fn is_monotone_nonincreasing(points: &[SweepPoint], slack: f64) -> bool {
    let mut sorted: Vec<&SweepPoint> = points.iter().collect();
    sorted.sort_by(|a, b| a.q_factor.partial_cmp(&b.q_factor).unwrap());
    sorted
        .windows(2)
        .all(|p| p[1].infidelity_corrected <= p[0].infidelity_corrected + slack)
}
