//! Product-basis bookkeeping and sparse operators for the two-transmon,
//! one-resonator model.
//!
//! Basis states are `(n1, n2, nr)` occupation triples. The coupling
//! `g_i (a^dag b_i + a b_i^dag)` conserves the total excitation number and
//! the cavity collapse operator only lowers it, so any state supported on
//! excitation number <= n_max evolves exactly inside that cap. Process
//! tomography of the computational subspace (max two excitations) therefore
//! runs on the 10-state capped basis with no approximation beyond the stated
//! level truncations.

use std::collections::HashMap;

use ndarray::Array2;

use super::{C64, DeviceParams};

/// An ordered set of occupation triples with reverse lookup.
#[derive(Debug, Clone)]
pub(crate) struct BasisMap {
    pub states: Vec<(usize, usize, usize)>,
    index: HashMap<(usize, usize, usize), usize>,
}

impl BasisMap {
    fn from_states(states: Vec<(usize, usize, usize)>) -> Self {
        let index = states
            .iter()
            .enumerate()
            .map(|(i, &s)| (s, i))
            .collect();
        BasisMap { states, index }
    }

    /// Full product basis in row-major `(n1, n2, nr)` order.
    pub fn full(q_levels: usize, r_levels: usize) -> Self {
        let mut states = Vec::with_capacity(q_levels * q_levels * r_levels);
        for n1 in 0..q_levels {
            for n2 in 0..q_levels {
                for nr in 0..r_levels {
                    states.push((n1, n2, nr));
                }
            }
        }
        Self::from_states(states)
    }

    /// States with total excitation number `n1 + n2 + nr <= cap`, in full
    /// basis order.
    pub fn excitation_capped(q_levels: usize, r_levels: usize, cap: usize) -> Self {
        let mut states = Vec::new();
        for n1 in 0..q_levels {
            for n2 in 0..q_levels {
                for nr in 0..r_levels {
                    if n1 + n2 + nr <= cap {
                        states.push((n1, n2, nr));
                    }
                }
            }
        }
        Self::from_states(states)
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn lookup(&self, state: (usize, usize, usize)) -> Option<usize> {
        self.index.get(&state).copied()
    }

    pub fn excitations(&self) -> Vec<usize> {
        self.states.iter().map(|&(a, b, c)| a + b + c).collect()
    }

    /// Index of the computational state `|b1 b2; 0>` for `b1, b2 in {0, 1}`.
    pub fn computational_index(&self, b1: usize, b2: usize) -> usize {
        self.lookup((b1, b2, 0))
            .expect("computational states exist in every basis with q_levels >= 2")
    }
}

/// Row-compressed sparse matrix over a [`BasisMap`].
#[derive(Debug, Clone)]
pub(crate) struct SparseMat {
    pub dim: usize,
    rows: Vec<Vec<(usize, C64)>>,
}

impl SparseMat {
    pub fn from_triplets(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, C64)>) -> Self {
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); dim];
        for (r, c, v) in triplets {
            rows[r].push((c, v));
        }
        for row in &mut rows {
            row.sort_by_key(|&(c, _)| c);
            let mut merged: Vec<(usize, C64)> = Vec::with_capacity(row.len());
            for &(c, v) in row.iter() {
                match merged.last_mut() {
                    Some((lc, lv)) if *lc == c => *lv += v,
                    _ => merged.push((c, v)),
                }
            }
            merged.retain(|&(_, v)| v.norm_sqr() > 0.0);
            *row = merged;
        }
        SparseMat { dim, rows }
    }

    pub fn adjoint(&self) -> SparseMat {
        let mut triplets = Vec::new();
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                triplets.push((c, r, v.conj()));
            }
        }
        SparseMat::from_triplets(self.dim, triplets)
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let mut out = Array2::<C64>::zeros((self.dim, self.dim));
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                out[(r, c)] = v;
            }
        }
        out
    }

    pub fn add_to_diagonal(&mut self, delta: &[f64]) {
        for (r, row) in self.rows.iter_mut().enumerate() {
            match row.iter_mut().find(|(c, _)| *c == r) {
                Some((_, v)) => *v += C64::new(delta[r], 0.0),
                None => {
                    row.push((r, C64::new(delta[r], 0.0)));
                    row.sort_by_key(|&(c, _)| c);
                }
            }
        }
    }

    /// `out = A * X` for a dense row-major `n x n` matrix `X`.
    pub fn apply_left(&self, x: &[C64], out: &mut [C64]) {
        let n = self.dim;
        out.fill(C64::new(0.0, 0.0));
        for (r, row) in self.rows.iter().enumerate() {
            let out_row = &mut out[r * n..(r + 1) * n];
            for &(k, v) in row {
                let x_row = &x[k * n..(k + 1) * n];
                for (o, xv) in out_row.iter_mut().zip(x_row) {
                    *o += v * xv;
                }
            }
        }
    }

    /// `out = X * A` for a dense row-major `n x n` matrix `X`.
    pub fn apply_right(&self, x: &[C64], out: &mut [C64]) {
        let n = self.dim;
        out.fill(C64::new(0.0, 0.0));
        for (c, row) in self.rows.iter().enumerate() {
            for &(k, v) in row {
                // A[c, k] contributes X[., c] to out[., k].
                for i in 0..n {
                    out[i * n + k] += x[i * n + c] * v;
                }
            }
        }
    }
}

/// Hamiltonian over `basis` (angular frequencies, hbar = 1):
/// `omega_r a^dag a + sum_i [omega_i b_i^dag b_i + eta_i/2 n_i (n_i - 1)
///  + g_i (a^dag b_i + a b_i^dag)]`.
///
/// Hermitian by construction: both hop directions are emitted explicitly.
pub(crate) fn hamiltonian(params: &DeviceParams, basis: &BasisMap) -> SparseMat {
    let mut triplets = Vec::new();
    for (idx, &(n1, n2, nr)) in basis.states.iter().enumerate() {
        let qubit = |n: usize, i: usize| {
            params.omega01[i] * n as f64 + params.eta[i] / 2.0 * (n * n.saturating_sub(1)) as f64
        };
        let diag = params.omega_r * nr as f64 + qubit(n1, 0) + qubit(n2, 1);
        triplets.push((idx, idx, C64::new(diag, 0.0)));

        // a^dag b_i on |n1, n2, nr>, plus the conjugate hop.
        for (i, (ni, target)) in [
            (n1, (n1.wrapping_sub(1), n2, nr + 1)),
            (n2, (n1, n2.wrapping_sub(1), nr + 1)),
        ]
        .into_iter()
        .enumerate()
        {
            if ni == 0 {
                continue;
            }
            if let Some(to) = basis.lookup(target) {
                let amp = params.g[i] * ((ni as f64) * (nr as f64 + 1.0)).sqrt();
                triplets.push((to, idx, C64::new(amp, 0.0)));
                triplets.push((idx, to, C64::new(amp, 0.0)));
            }
        }
    }
    SparseMat::from_triplets(basis.dim(), triplets)
}

/// Cavity annihilation operator over `basis`.
pub(crate) fn annihilation(basis: &BasisMap) -> SparseMat {
    let mut triplets = Vec::new();
    for (idx, &(n1, n2, nr)) in basis.states.iter().enumerate() {
        if nr == 0 {
            continue;
        }
        if let Some(to) = basis.lookup((n1, n2, nr - 1)) {
            triplets.push((to, idx, C64::new((nr as f64).sqrt(), 0.0)));
        }
    }
    SparseMat::from_triplets(basis.dim(), triplets)
}

/// Diagonal of `a^dag a` over `basis`.
pub(crate) fn photon_number_diag(basis: &BasisMap) -> Vec<f64> {
    basis.states.iter().map(|&(_, _, nr)| nr as f64).collect()
}

/// Embed a two-qubit operator (4x4, basis `|b1 b2>`) into the system basis
/// with the resonator in vacuum. Returns a flat row-major matrix.
pub(crate) fn embed_computational(op4: &Array2<C64>, basis: &BasisMap) -> Vec<C64> {
    let n = basis.dim();
    let mut out = vec![C64::new(0.0, 0.0); n * n];
    for row in 0..4 {
        let i = basis.computational_index(row / 2, row % 2);
        for col in 0..4 {
            let j = basis.computational_index(col / 2, col % 2);
            out[i * n + j] = op4[(row, col)];
        }
    }
    out
}

/// Project a system operator back onto the computational subspace with the
/// resonator in vacuum.
pub(crate) fn project_computational(flat: &[C64], basis: &BasisMap) -> Array2<C64> {
    let n = basis.dim();
    let mut out = Array2::<C64>::zeros((4, 4));
    for row in 0..4 {
        let i = basis.computational_index(row / 2, row % 2);
        for col in 0..4 {
            let j = basis.computational_index(col / 2, col % 2);
            out[(row, col)] = flat[i * n + j];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermiticity_deviation;

    #[test]
    fn full_basis_dimensions() {
        let basis = BasisMap::full(3, 5);
        assert_eq!(basis.dim(), 45);
        assert_eq!(basis.lookup((0, 0, 0)), Some(0));
        assert_eq!(basis.lookup((2, 2, 4)), Some(44));
        assert_eq!(basis.lookup((3, 0, 0)), None);
    }

    #[test]
    fn capped_basis_has_ten_states_for_two_excitations() {
        let basis = BasisMap::excitation_capped(3, 5, 2);
        assert_eq!(basis.dim(), 10);
        assert!(basis.excitations().iter().all(|&n| n <= 2));
        // All four computational states present.
        for (b1, b2) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            basis.computational_index(b1, b2);
        }
    }

    #[test]
    fn hamiltonian_is_hermitian_and_counts_match() {
        let params = DeviceParams::reference_cz();
        let basis = BasisMap::full(params.q_levels, params.r_levels);
        let h = hamiltonian(&params, &basis).to_dense();
        assert_eq!(hermiticity_deviation(&h), 0.0);
        // Vacuum is an exact zero-energy eigenstate.
        for j in 0..basis.dim() {
            assert_eq!(h[(0, j)], C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn no_direct_qubit_qubit_coupling() {
        let params = DeviceParams::reference_cz();
        let basis = BasisMap::full(params.q_levels, params.r_levels);
        let h = hamiltonian(&params, &basis).to_dense();
        let i11 = basis.lookup((1, 1, 0)).unwrap();
        let i02 = basis.lookup((0, 2, 0)).unwrap();
        assert_eq!(h[(i11, i02)], C64::new(0.0, 0.0));
    }

    #[test]
    fn zero_coupling_gives_diagonal_hamiltonian() {
        let mut params = DeviceParams::reference_cz();
        params.g = [0.0, 0.0];
        let basis = BasisMap::full(params.q_levels, params.r_levels);
        let h = hamiltonian(&params, &basis).to_dense();
        for i in 0..basis.dim() {
            for j in 0..basis.dim() {
                if i != j {
                    assert_eq!(h[(i, j)], C64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn sparse_matrix_products_match_dense() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let params = DeviceParams::reference_cz();
        let basis = BasisMap::excitation_capped(3, 5, 2);
        let h = hamiltonian(&params, &basis);
        let n = basis.dim();
        let x: Vec<C64> = (0..n * n)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let dense = h.to_dense();

        let mut left = vec![C64::new(0.0, 0.0); n * n];
        h.apply_left(&x, &mut left);
        let mut right = vec![C64::new(0.0, 0.0); n * n];
        h.apply_right(&x, &mut right);
        for i in 0..n {
            for j in 0..n {
                let mut expect_l = C64::new(0.0, 0.0);
                let mut expect_r = C64::new(0.0, 0.0);
                for k in 0..n {
                    expect_l += dense[(i, k)] * x[k * n + j];
                    expect_r += x[i * n + k] * dense[(k, j)];
                }
                assert!((left[i * n + j] - expect_l).norm() < 1e-12);
                assert!((right[i * n + j] - expect_r).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn annihilation_lowers_photon_number() {
        let basis = BasisMap::full(3, 5);
        let a = annihilation(&basis).to_dense();
        let from = basis.lookup((0, 0, 3)).unwrap();
        let to = basis.lookup((0, 0, 2)).unwrap();
        assert!((a[(to, from)] - C64::new(3f64.sqrt(), 0.0)).norm() < 1e-15);
        // a annihilates the vacuum column.
        for i in 0..basis.dim() {
            assert_eq!(a[(i, 0)], C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn embed_project_roundtrip() {
        let basis = BasisMap::excitation_capped(3, 5, 2);
        let mut op = Array2::<C64>::zeros((4, 4));
        for i in 0..4 {
            for j in 0..4 {
                op[(i, j)] = C64::new(i as f64, j as f64);
            }
        }
        let flat = embed_computational(&op, &basis);
        let back = project_computational(&flat, &basis);
        assert_eq!(back, op);
    }
}
