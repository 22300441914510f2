//! Small dense linear-algebra routines for complex Hermitian matrices.
//!
//! Dimensions in this crate stay tiny (a 45-dim product space at most), so a
//! cyclic Jacobi eigensolver is simpler and more predictable than pulling in
//! a LAPACK binding.

use ndarray::Array2;
use num_complex::Complex64;

type C64 = Complex64;

/// Eigendecomposition of a Hermitian matrix: `a = v * diag(values) * v^H`,
/// eigenvalues ascending, eigenvectors in the columns of `v`.
pub(crate) struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: Array2<C64>,
}

/// Cyclic complex Jacobi iteration. Panics if `a` is not square; returns
/// `None` if the off-diagonal norm fails to converge (does not happen for
/// Hermitian input within the sweep budget).
pub(crate) fn hermitian_eigen(a: &Array2<C64>) -> Option<HermitianEigen> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    let mut m = a.clone();
    let mut v = Array2::<C64>::eye(n);

    let scale: f64 = m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1e-300);
    let tol = 1e-14 * scale;

    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= tol {
            let mut pairs: Vec<(f64, usize)> =
                (0..n).map(|i| (m[(i, i)].re, i)).collect();
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let values: Vec<f64> = pairs.iter().map(|&(val, _)| val).collect();
            let mut vectors = Array2::<C64>::zeros((n, n));
            for (col, &(_, src)) in pairs.iter().enumerate() {
                for row in 0..n {
                    vectors[(row, col)] = v[(row, src)];
                }
            }
            return Some(HermitianEigen { values, vectors });
        }

        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.norm() <= tol / (n as f64) {
                    continue;
                }
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                // Unitary 2x2 rotation zeroing the (p, q) element:
                // columns p' = c*p - s*conj(phase)*q, q' = s*phase*p + c*q.
                let phase = apq / apq.norm();
                let tau = (aqq - app) / (2.0 * apq.norm());
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * phase.conj() * mkq;
                    m[(k, q)] = s * phase * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * phase * mqk;
                    m[(q, k)] = s * phase.conj() * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * phase.conj() * vkq;
                    v[(k, q)] = s * phase * vkp + c * vkq;
                }
            }
        }
    }
    None
}

/// Eigenvalues only, ascending.
pub(crate) fn hermitian_eigenvalues(a: &Array2<C64>) -> Option<Vec<f64>> {
    hermitian_eigen(a).map(|e| e.values)
}

/// Kronecker product of two dense complex matrices.
pub(crate) fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::<C64>::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// `tr(a * b)`.
pub(crate) fn trace_product(a: &Array2<C64>, b: &Array2<C64>) -> C64 {
    let n = a.nrows();
    let mut sum = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            sum += a[(i, j)] * b[(j, i)];
        }
    }
    sum
}

/// Conjugate transpose.
pub(crate) fn adjoint(a: &Array2<C64>) -> Array2<C64> {
    let (r, c) = a.dim();
    let mut out = Array2::<C64>::zeros((c, r));
    for i in 0..r {
        for j in 0..c {
            out[(j, i)] = a[(i, j)].conj();
        }
    }
    out
}

/// Largest absolute deviation from Hermiticity, `max |a - a^H|`.
pub(crate) fn hermiticity_deviation(a: &Array2<C64>) -> f64 {
    let n = a.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    dev
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> Array2<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = Array2::<C64>::zeros((n, n));
        for i in 0..n {
            a[(i, i)] = C64::new(rng.gen_range(-1.0..1.0), 0.0);
            for j in (i + 1)..n {
                let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                a[(i, j)] = z;
                a[(j, i)] = z.conj();
            }
        }
        a
    }

    #[test]
    fn known_2x2_eigenvalues() {
        // Pauli X: eigenvalues -1, +1.
        let x = array![
            [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
            [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]
        ];
        let vals = hermitian_eigenvalues(&x).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-12);
        assert!((vals[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_residual_is_small() {
        for (n, seed) in [(6, 1u64), (16, 2), (45, 3)] {
            let a = random_hermitian(n, seed);
            let eig = hermitian_eigen(&a).unwrap();
            // || a v - v diag(lambda) ||_max
            let mut max_res: f64 = 0.0;
            for col in 0..n {
                for row in 0..n {
                    let mut av = C64::new(0.0, 0.0);
                    for k in 0..n {
                        av += a[(row, k)] * eig.vectors[(k, col)];
                    }
                    let res = (av - eig.values[col] * eig.vectors[(row, col)]).norm();
                    max_res = max_res.max(res);
                }
            }
            assert!(max_res < 1e-10, "n={n} residual={max_res}");
            // Orthonormal columns.
            for i in 0..n {
                for j in 0..n {
                    let mut dot = C64::new(0.0, 0.0);
                    for k in 0..n {
                        dot += eig.vectors[(k, i)].conj() * eig.vectors[(k, j)];
                    }
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((dot.norm() - expect).abs() < 1e-10);
                }
            }
            // Ascending order.
            for w in eig.values.windows(2) {
                assert!(w[0] <= w[1] + 1e-12);
            }
        }
    }

    #[test]
    fn kron_dimensions_and_values() {
        let a = array![[C64::new(1.0, 0.0), C64::new(2.0, 0.0)]];
        let b = array![[C64::new(0.0, 1.0)], [C64::new(3.0, 0.0)]];
        let k = kron(&a, &b);
        assert_eq!(k.dim(), (2, 2));
        assert_eq!(k[(0, 0)], C64::new(0.0, 1.0));
        assert_eq!(k[(1, 1)], C64::new(6.0, 0.0));
    }
}
