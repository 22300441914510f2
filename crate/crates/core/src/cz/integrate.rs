//! Adaptive Dormand-Prince 5(4) integration on flat complex state vectors.

use super::{C64, SimError};

const STAGES: usize = 7;

const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

/// Difference between the 5th- and embedded 4th-order weights.
const E: [f64; STAGES] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

pub(crate) struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            rtol: 1e-9,
            atol: 1e-11,
            max_steps: 50_000_000,
        }
    }
}

/// Integrate `dy/dt = f(y)` (autonomous) from 0 to `t_end` in place.
///
/// Standard embedded error control with a weighted RMS norm and FSAL reuse
/// of the last stage.
pub(crate) fn integrate_adaptive<F>(
    mut f: F,
    y: &mut [C64],
    t_end: f64,
    opts: &IntegratorOptions,
) -> Result<(), SimError>
where
    F: FnMut(&[C64], &mut [C64]),
{
    if t_end == 0.0 {
        return Ok(());
    }
    let n = y.len();
    let mut k: Vec<Vec<C64>> = (0..STAGES).map(|_| vec![C64::new(0.0, 0.0); n]).collect();
    let mut y_stage = vec![C64::new(0.0, 0.0); n];
    let mut y_new = vec![C64::new(0.0, 0.0); n];

    f(y, &mut k[0]);

    // Initial step from the ratio of solution and derivative scales.
    let scale = |yv: &[C64]| -> f64 {
        yv.iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
            .max(1e-300)
    };
    let d0 = scale(y);
    let d1 = scale(&k[0]);
    let mut h = (0.01 * d0 / d1).min(t_end);
    if !h.is_finite() || h <= 0.0 {
        h = t_end * 1e-6;
    }

    let mut t = 0.0;
    let mut steps = 0usize;
    while t < t_end {
        if steps >= opts.max_steps {
            return Err(SimError::Integrator {
                t,
                reason: format!("exceeded {} steps", opts.max_steps),
            });
        }
        steps += 1;
        h = h.min(t_end - t);
        if h <= t_end * 1e-15 {
            return Err(SimError::Integrator {
                t,
                reason: "step size underflow".into(),
            });
        }

        for s in 1..STAGES {
            for (i, ys) in y_stage.iter_mut().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s - 1][j];
                    if a != 0.0 {
                        acc += a * kj[i];
                    }
                }
                *ys = y[i] + h * acc;
            }
            if s == STAGES - 1 {
                // Stage 7 is evaluated at the 5th-order solution (FSAL).
                y_new.copy_from_slice(&y_stage);
            }
            let (before, from_s) = k.split_at_mut(s);
            let _ = before;
            f(&y_stage, &mut from_s[0]);
        }

        // Weighted RMS error norm.
        let mut err_sq = 0.0;
        for i in 0..n {
            let mut e = C64::new(0.0, 0.0);
            for (j, kj) in k.iter().enumerate() {
                if E[j] != 0.0 {
                    e += E[j] * kj[i];
                }
            }
            let sc = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
            err_sq += (h * e.norm() / sc).powi(2);
        }
        let err = (err_sq / n as f64).sqrt();

        if err <= 1.0 {
            t += h;
            y.copy_from_slice(&y_new);
            k.swap(0, STAGES - 1);
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
    }
    Ok(())
}
