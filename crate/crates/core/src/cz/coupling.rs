//! CZ resonance condition, effective qubit-qubit coupling, and gate time.

use ndarray::Array2;

use super::ops::{hamiltonian, BasisMap};
use super::{C64, DeviceParams, SimError};
use crate::linalg::hermitian_eigen;

/// Detuning of the CZ resonance: `omega_1^01 - (omega_2^01 + eta_2)`.
/// Zero means `|11>` is degenerate with `|02>`.
pub fn cz_detuning(params: &DeviceParams) -> f64 {
    params.omega01[0] - (params.omega01[1] + params.eta[1])
}

/// Gate time for one full period of the mediated `|11> <-> |02>` oscillation:
/// `t = pi / (sqrt(2) g_eff)`.
pub fn gate_time(g_eff: f64) -> Result<f64, SimError> {
    if !(g_eff > 0.0) {
        return Err(SimError::InvalidParams(format!(
            "g_eff must be positive, got {g_eff}"
        )));
    }
    Ok(std::f64::consts::PI / (std::f64::consts::SQRT_2 * g_eff))
}

/// Gap between the two dressed eigenstates carrying the `|11;0>` / `|02;0>`
/// pair, for qubit 1 detuned by `delta` from nominal. Errors if the dressed
/// branches can no longer be identified (combined overlap with the bare pair
/// below 0.5).
fn branch_gap(
    h2: &Array2<C64>,
    n1_occ: &[f64],
    i11: usize,
    i02: usize,
    delta: f64,
) -> Result<f64, SimError> {
    let dim = h2.nrows();
    let mut h = h2.clone();
    for i in 0..dim {
        h[(i, i)] += C64::new(delta * n1_occ[i], 0.0);
    }
    let eig = hermitian_eigen(&h).ok_or(SimError::Integrator {
        t: 0.0,
        reason: "eigensolver failed to converge".into(),
    })?;
    // Rank eigenvectors by their weight on span{|11;0>, |02;0>}.
    let mut weights: Vec<(f64, usize)> = (0..dim)
        .map(|col| {
            let w = eig.vectors[(i11, col)].norm_sqr() + eig.vectors[(i02, col)].norm_sqr();
            (w, col)
        })
        .collect();
    weights.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let (w_best, col_a) = weights[0];
    let (w_next, col_b) = weights[1];
    if w_best < 0.5 || w_next < 0.5 {
        return Err(SimError::ManifoldIdentification {
            overlap: w_best.min(w_next),
        });
    }
    Ok((eig.values[col_a] - eig.values[col_b]).abs())
}

/// Effective qubit-qubit coupling from the two-excitation manifold:
/// the minimum gap between the dressed `|11;0>` and `|02;0>` branches over a
/// local sweep of qubit 1, divided by `2 sqrt(2)`.
pub fn estimate_g_eff(params: &DeviceParams) -> Result<f64, SimError> {
    params.validate()?;
    // Two-excitation manifold only (the pair lives there and the coupling
    // conserves excitation number).
    let capped = BasisMap::excitation_capped(params.q_levels, params.r_levels, 2);
    let keep: Vec<usize> = capped
        .excitations()
        .iter()
        .enumerate()
        .filter(|&(_, &n)| n == 2)
        .map(|(i, _)| i)
        .collect();
    let h_full = hamiltonian(params, &capped).to_dense();
    let dim = keep.len();
    let mut h2 = Array2::<C64>::zeros((dim, dim));
    for (a, &i) in keep.iter().enumerate() {
        for (b, &j) in keep.iter().enumerate() {
            h2[(a, b)] = h_full[(i, j)];
        }
    }
    let n1_occ: Vec<f64> = keep
        .iter()
        .map(|&i| capped.states[i].0 as f64)
        .collect();
    let find = |state: (usize, usize, usize)| {
        let idx = capped.lookup(state).expect("state in capped basis");
        keep.iter().position(|&i| i == idx).expect("state in manifold")
    };
    let i11 = find((1, 1, 0));
    let i02 = find((0, 2, 0));

    let gap0 = branch_gap(&h2, &n1_occ, i11, i02, 0.0)?;
    if gap0 == 0.0 {
        return Ok(0.0);
    }
    // The avoided crossing sits within the dispersive-shift scale of the
    // nominal point; a window of a few nominal gaps always brackets it.
    let window = (4.0 * gap0).clamp(super::TWO_PI * 1.0e6, super::TWO_PI * 2.0e8);
    let (mut lo, mut hi) = (-window, window);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = branch_gap(&h2, &n1_occ, i11, i02, x1)?;
    let mut f2 = branch_gap(&h2, &n1_occ, i11, i02, x2)?;
    for _ in 0..80 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = branch_gap(&h2, &n1_occ, i11, i02, x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = branch_gap(&h2, &n1_occ, i11, i02, x2)?;
        }
    }
    let min_gap = f1.min(f2).min(gap0);
    Ok(min_gap / (2.0 * std::f64::consts::SQRT_2))
}
