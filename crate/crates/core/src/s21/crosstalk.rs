//! Crosstalk spectrum of a feed line crossing a resonator:
//! `20 log10(1 - |S21|)` after baseline normalization.

use serde::Serialize;

use super::{FitError, S21Trace};

/// Clamp floor for the log argument: -160 dB.
const FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrosstalkResult {
    /// `20 log10(max(1 - |S21|, 1e-8))` per point, after normalizing the
    /// baseline to 1; never positive.
    pub crosstalk_db: Vec<f64>,
    pub max_db: f64,
    pub f_at_max: f64,
    /// Full width at 3 dB below the maximum; artifact definition for the
    /// otherwise unspecified "crosstalk bandwidth". `None` when the lobe is
    /// clipped by the trace edges.
    pub crosstalk_bandwidth_3db_hz: Option<f64>,
}

/// Compute the crosstalk spectrum. The baseline is the median |S21| of the
/// outer 10% of points and must be at least 0.5 (the trace is expected to be
/// normalized or nearly so).
pub fn crosstalk_spectrum(trace: &S21Trace) -> Result<CrosstalkResult, FitError> {
    let n = trace.len();
    let wing_count = (n / 10).max(2);
    let mut wing_mags: Vec<f64> = (0..wing_count / 2 + wing_count % 2)
        .chain((n - wing_count / 2)..n)
        .map(|i| trace.s21[i].norm())
        .collect();
    wing_mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = wing_mags.len() / 2;
    let baseline = if wing_mags.len() % 2 == 1 {
        wing_mags[mid]
    } else {
        0.5 * (wing_mags[mid - 1] + wing_mags[mid])
    };
    if baseline < 0.5 {
        return Err(FitError::BaselineNormalization {
            wing_median: baseline,
        });
    }

    let crosstalk_db: Vec<f64> = trace
        .s21
        .iter()
        .map(|z| 20.0 * (1.0 - z.norm() / baseline).max(FLOOR).log10())
        .collect();
    let (arg_max, &max_db) = crosstalk_db
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .expect("trace is nonempty");
    let f_at_max = trace.freq[arg_max];

    let crosstalk_bandwidth_3db_hz =
        bandwidth_at(&trace.freq, &crosstalk_db, arg_max, max_db - 3.0);

    Ok(CrosstalkResult {
        crosstalk_db,
        max_db,
        f_at_max,
        crosstalk_bandwidth_3db_hz,
    })
}

/// Width of the lobe around `peak` above `level`, edges linearly
/// interpolated; `None` when the lobe runs off the trace.
fn bandwidth_at(freq: &[f64], db: &[f64], peak: usize, level: f64) -> Option<f64> {
    let n = db.len();
    let mut lo = None;
    for i in (0..peak).rev() {
        if db[i] < level {
            let t = (level - db[i]) / (db[i + 1] - db[i]);
            lo = Some(freq[i] + t * (freq[i + 1] - freq[i]));
            break;
        }
    }
    let mut hi = None;
    for i in (peak + 1)..n {
        if db[i] < level {
            let t = (level - db[i - 1]) / (db[i] - db[i - 1]);
            hi = Some(freq[i - 1] + t * (freq[i] - freq[i - 1]));
            break;
        }
    }
    match (lo, hi) {
        (Some(a), Some(b)) => Some(b - a),
        _ => None,
    }
}
