//! Lindblad evolution `drho/dt = -i [H, rho] + kappa (a rho a^dag
//! - {a^dag a, rho} / 2)` with a single cavity loss channel.
//!
//! The total excitation number `N = a^dag a + b1^dag b1 + b2^dag b2` commutes
//! with the Hamiltonian, and conjugating by `exp(i w N t)` leaves the
//! dissipator invariant (it maps `a` to `a e^{-iwt}`, which cancels in every
//! dissipator term). Integrating with `H - w N` and undoing the diagonal
//! phases at the output time is therefore an exact change of variables, not
//! an approximation; it removes the GHz carrier and leaves the integrator
//! only the detuning-scale dynamics. `w` is chosen to minimize the spread of
//! the shifted diagonal.

use ndarray::Array2;

use super::integrate::{integrate_adaptive, IntegratorOptions};
use super::ops::{annihilation, hamiltonian, photon_number_diag, BasisMap, SparseMat};
use super::{C64, DensityOp, DeviceParams, SimError};

pub(crate) struct LindbladModel {
    pub basis: BasisMap,
    h_shifted: SparseMat,
    frame_shift: f64,
    excitations: Vec<usize>,
    a_op: SparseMat,
    adag_op: SparseMat,
    photon_diag: Vec<f64>,
    kappa: f64,
}

/// Frame frequency minimizing the spread of `diag(H) - w * N`; the spread is
/// a convex piecewise-linear function of `w`, so ternary search converges.
fn optimal_frame_shift(diag: &[f64], excitations: &[usize]) -> f64 {
    let spread = |w: f64| -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (d, &n) in diag.iter().zip(excitations) {
            let v = d - w * n as f64;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        hi - lo
    };
    let max_abs = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let (mut lo, mut hi) = (-max_abs, max_abs);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if spread(m1) <= spread(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    (lo + hi) / 2.0
}

impl LindbladModel {
    pub fn new(params: &DeviceParams, basis: BasisMap) -> Self {
        let h = hamiltonian(params, &basis);
        let excitations = basis.excitations();
        let diag: Vec<f64> = {
            let dense = h.to_dense();
            (0..basis.dim()).map(|i| dense[(i, i)].re).collect()
        };
        let frame_shift = optimal_frame_shift(&diag, &excitations);
        Self::with_frame_shift(params, basis, frame_shift)
    }

    pub fn with_frame_shift(params: &DeviceParams, basis: BasisMap, frame_shift: f64) -> Self {
        let mut h_shifted = hamiltonian(params, &basis);
        let excitations = basis.excitations();
        let delta: Vec<f64> = excitations
            .iter()
            .map(|&n| -frame_shift * n as f64)
            .collect();
        h_shifted.add_to_diagonal(&delta);
        let a_op = annihilation(&basis);
        let adag_op = a_op.adjoint();
        let photon_diag = photon_number_diag(&basis);
        LindbladModel {
            excitations,
            h_shifted,
            frame_shift,
            a_op,
            adag_op,
            photon_diag,
            kappa: params.kappa,
            basis,
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn rhs(&self, rho: &[C64], out: &mut [C64], t1: &mut [C64], t2: &mut [C64]) {
        let n = self.dim();
        // -i (H rho - rho H)
        self.h_shifted.apply_left(rho, t1);
        self.h_shifted.apply_right(rho, t2);
        for i in 0..n * n {
            out[i] = -C64::i() * (t1[i] - t2[i]);
        }
        if self.kappa > 0.0 {
            // kappa (a rho a^dag - (N_r rho + rho N_r) / 2)
            self.a_op.apply_left(rho, t1);
            self.adag_op.apply_right(t1, t2);
            for i in 0..n {
                for j in 0..n {
                    let idx = i * n + j;
                    let decay = 0.5 * (self.photon_diag[i] + self.photon_diag[j]);
                    out[idx] += self.kappa * (t2[idx] - decay * rho[idx]);
                }
            }
        }
    }

    /// Propagate a flat density matrix to time `t`, returning the lab-frame
    /// result.
    pub fn propagate(
        &self,
        rho0: &[C64],
        t: f64,
        opts: &IntegratorOptions,
    ) -> Result<Vec<C64>, SimError> {
        if t < 0.0 {
            return Err(SimError::InvalidParams(format!(
                "evolution time must be nonnegative, got {t}"
            )));
        }
        let n = self.dim();
        assert_eq!(rho0.len(), n * n);
        let mut rho = rho0.to_vec();
        if t == 0.0 {
            return Ok(rho);
        }
        let mut t1 = vec![C64::new(0.0, 0.0); n * n];
        let mut t2 = vec![C64::new(0.0, 0.0); n * n];
        integrate_adaptive(
            |y, dy| self.rhs(y, dy, &mut t1, &mut t2),
            &mut rho,
            t,
            opts,
        )?;
        // Undo the frame rotation: rho_lab[i, j] = rho[i, j] e^{-i w (N_i - N_j) t}.
        if self.frame_shift != 0.0 {
            for i in 0..n {
                for j in 0..n {
                    let dn = self.excitations[i] as f64 - self.excitations[j] as f64;
                    if dn != 0.0 {
                        rho[i * n + j] *= C64::new(0.0, -self.frame_shift * dn * t).exp();
                    }
                }
            }
        }
        Ok(rho)
    }
}

/// Dense Hamiltonian of the full product basis, Hermitian by construction.
pub fn build_hamiltonian(params: &DeviceParams) -> Result<Array2<C64>, SimError> {
    params.validate()?;
    let basis = BasisMap::full(params.q_levels, params.r_levels);
    Ok(hamiltonian(params, &basis).to_dense())
}

/// Integrate the master equation on the full product space and return the
/// lab-frame state at time `t`.
pub fn evolve(params: &DeviceParams, rho0: &DensityOp, t: f64) -> Result<DensityOp, SimError> {
    params.validate()?;
    let dim = params.dim();
    if rho0.dim != dim {
        return Err(SimError::DimensionMismatch {
            expected: dim,
            got: rho0.dim,
        });
    }
    let basis = BasisMap::full(params.q_levels, params.r_levels);
    let model = LindbladModel::new(params, basis);
    let flat: Vec<C64> = rho0.matrix.iter().copied().collect();
    let out = model.propagate(&flat, t, &IntegratorOptions::default())?;
    let matrix = Array2::from_shape_vec((dim, dim), out).expect("square output");
    Ok(DensityOp { dim, matrix })
}

#[cfg(test)]
mod tests {
    use super::super::ops::BasisMap;
    use super::*;
    use crate::linalg::hermiticity_deviation;

    fn comp_index(params: &DeviceParams, n1: usize, n2: usize, nr: usize) -> usize {
        (n1 * params.q_levels + n2) * params.r_levels + nr
    }

    #[test]
    fn frame_shift_reduces_diagonal_spread() {
        let params = DeviceParams::reference_cz();
        let basis = BasisMap::full(3, 5);
        let h = hamiltonian(&params, &basis).to_dense();
        let diag: Vec<f64> = (0..basis.dim()).map(|i| h[(i, i)].re).collect();
        let exc = basis.excitations();
        let w = optimal_frame_shift(&diag, &exc);
        let spread = |w: f64| {
            let vals: Vec<f64> = diag
                .iter()
                .zip(&exc)
                .map(|(d, &n)| d - w * n as f64)
                .collect();
            vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - vals.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        assert!(spread(w) < 0.1 * spread(0.0));
    }

    #[test]
    fn frame_shift_is_exact_change_of_variables() {
        // Same short evolution with and without the shift.
        let mut params = DeviceParams::reference_cz().with_quality_factor(1.0e3);
        params.r_levels = 3;
        let basis = || BasisMap::excitation_capped(params.q_levels, params.r_levels, 2);
        let shifted = LindbladModel::new(&params, basis());
        let unshifted = LindbladModel::with_frame_shift(&params, basis(), 0.0);

        let n = shifted.dim();
        let mut rho0 = vec![C64::new(0.0, 0.0); n * n];
        // Mixed superposition support across excitation sectors.
        let idx = [0usize, 1, 2, n - 1];
        for &i in &idx {
            for &j in &idx {
                rho0[i * n + j] = C64::new(0.25, 0.0);
            }
        }
        let t = 0.3e-9;
        let opts = IntegratorOptions::default();
        let a = shifted.propagate(&rho0, t, &opts).unwrap();
        let b = unshifted.propagate(&rho0, t, &opts).unwrap();
        let max_dev = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0f64, f64::max);
        assert!(max_dev < 1e-7, "frame mismatch {max_dev}");
    }

    #[test]
    fn unitary_evolution_preserves_purity_and_trace() {
        let params = DeviceParams::reference_cz();
        let dim = params.dim();
        let rho0 = DensityOp::pure(dim, comp_index(&params, 1, 1, 0));
        let rho = evolve(&params, &rho0, 5.0e-9).unwrap();
        assert!((rho.trace() - 1.0).abs() < 1e-8);
        assert!((rho.purity() - 1.0).abs() < 1e-8);
        assert!(rho.hermiticity_deviation() < 1e-8);
        assert!(rho.min_eigenvalue() > -1e-8);
    }

    #[test]
    fn damped_cavity_decays_exponentially() {
        let mut params = DeviceParams::reference_cz();
        params.g = [0.0, 0.0];
        params.kappa = 2.0e8;
        let dim = params.dim();
        let one_photon = comp_index(&params, 0, 0, 1);
        let rho0 = DensityOp::pure(dim, one_photon);
        for t in [1.0e-9, 5.0e-9, 12.0e-9] {
            let rho = evolve(&params, &rho0, t).unwrap();
            let expect = (-params.kappa * t).exp();
            assert!(
                (rho.population(one_photon) - expect).abs() < 1e-8,
                "t={t}: {} vs {expect}",
                rho.population(one_photon)
            );
            assert!((rho.trace() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn vacuum_stays_put_under_loss() {
        let params = DeviceParams::reference_cz().with_quality_factor(1.0e3);
        let dim = params.dim();
        let vac = comp_index(&params, 0, 0, 0);
        let rho = evolve(&params, &DensityOp::pure(dim, vac), 20.0e-9).unwrap();
        assert!(rho.population(vac) >= 0.99);
    }

    #[test]
    fn lossy_evolution_is_trace_preserving_and_physical() {
        for q in [1.0e2, 1.0e4] {
            let params = DeviceParams::reference_cz().with_quality_factor(q);
            let dim = params.dim();
            let rho0 = DensityOp::pure(dim, comp_index(&params, 1, 1, 0));
            let rho = evolve(&params, &rho0, 8.0e-9).unwrap();
            assert!((rho.trace() - 1.0).abs() < 1e-8, "q={q}");
            assert!(rho.hermiticity_deviation() < 1e-8);
            assert!(rho.min_eigenvalue() > -1e-8);
        }
    }

    #[test]
    fn capped_basis_evolution_matches_full_space() {
        let params = DeviceParams::reference_cz().with_quality_factor(5.0e2);
        let full_basis = BasisMap::full(params.q_levels, params.r_levels);
        let capped_basis = BasisMap::excitation_capped(params.q_levels, params.r_levels, 2);
        let full = LindbladModel::new(&params, full_basis.clone());
        let capped = LindbladModel::new(&params, capped_basis.clone());

        // Equal mixture of |11;0> and a |10;0>+|01;0> coherence.
        let build = |basis: &BasisMap| {
            let n = basis.dim();
            let mut rho = vec![C64::new(0.0, 0.0); n * n];
            let i11 = basis.computational_index(1, 1);
            let i10 = basis.computational_index(1, 0);
            let i01 = basis.computational_index(0, 1);
            rho[i11 * n + i11] = C64::new(0.5, 0.0);
            rho[i10 * n + i10] = C64::new(0.25, 0.0);
            rho[i01 * n + i01] = C64::new(0.25, 0.0);
            rho[i10 * n + i01] = C64::new(0.2, 0.05);
            rho[i01 * n + i10] = C64::new(0.2, -0.05);
            rho
        };
        let t = 3.0e-9;
        let opts = IntegratorOptions::default();
        let out_full = full.propagate(&build(&full_basis), t, &opts).unwrap();
        let out_capped = capped.propagate(&build(&capped_basis), t, &opts).unwrap();

        let nf = full_basis.dim();
        let nc = capped_basis.dim();
        let mut max_dev = 0.0f64;
        for (ci, &si) in capped_basis.states.iter().enumerate() {
            let fi = full_basis.lookup(si).unwrap();
            for (cj, &sj) in capped_basis.states.iter().enumerate() {
                let fj = full_basis.lookup(sj).unwrap();
                let dev = (out_full[fi * nf + fj] - out_capped[ci * nc + cj]).norm();
                max_dev = max_dev.max(dev);
            }
        }
        assert!(max_dev < 1e-8, "capped basis deviates by {max_dev}");
    }

    #[test]
    fn evolve_rejects_negative_time_and_wrong_dims() {
        let params = DeviceParams::reference_cz();
        let rho0 = DensityOp::pure(4, 0);
        assert!(matches!(
            evolve(&params, &rho0, 1.0e-9),
            Err(SimError::DimensionMismatch { .. })
        ));
        let rho0 = DensityOp::pure(params.dim(), 0);
        assert!(evolve(&params, &rho0, -1.0).is_err());
    }

    #[test]
    fn build_hamiltonian_is_hermitian() {
        let h = build_hamiltonian(&DeviceParams::reference_cz()).unwrap();
        assert_eq!(hermiticity_deviation(&h), 0.0);
        assert_eq!(h.nrows(), 45);
    }
}
