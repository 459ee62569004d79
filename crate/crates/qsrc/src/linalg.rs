//! Dense complex-matrix kernel.
//!
//! Everything downstream works with [`ComplexMatrix`] (an alias for
//! `nalgebra::DMatrix<Complex64>`). This module owns the numerically
//! sensitive primitives: Hermitian eigendecomposition, spectral matrix
//! functions, SVD, Kronecker products, partial traces and the trace norm
//! ‖A‖ = Tr√(A†A), which for Hermitian input is the sum of the absolute
//! values of the eigenvalues.
//!
//! Dimensions are expected to stay in the dense regime (≤ ~4096); there
//! are no sparse or structured paths.

use crate::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;

pub type ComplexMatrix = DMatrix<Complex64>;

/// Centralized numeric tolerances. All validation in the crate goes
/// through one instance of this record; [`Tolerances::default`] holds the
/// documented defaults.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Relative Frobenius deviation ‖M − M†‖_F / max(1, ‖M‖_F) allowed
    /// before a matrix is rejected as non-Hermitian.
    pub hermiticity: f64,
    /// Eigenvalues in [psd_floor, 0) are treated as round-off and clipped
    /// to 0; anything below is a genuine negativity error.
    pub psd_floor: f64,
    /// Allowed deviation of Tr ρ from 1.
    pub trace_one: f64,
    /// Allowed deviation of a pure-state norm from 1.
    pub unit_norm: f64,
    /// Allowed deviation of Σ Vᵢ†Vᵢ from the identity.
    pub kraus_completeness: f64,
    /// Eigenvalue cutoff deciding membership in a state's support.
    pub support_cutoff: f64,
    /// Weight outside a support that still counts as "contained".
    pub support_leak: f64,
    /// Slack granted when checking inequalities.
    pub bound_slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            hermiticity: 1e-9,
            psd_floor: -1e-10,
            trace_one: 1e-9,
            unit_norm: 1e-9,
            kraus_completeness: 1e-8,
            support_cutoff: 1e-10,
            support_leak: 1e-8,
            bound_slack: 1e-9,
        }
    }
}

/// Spectral decomposition of a Hermitian matrix: real eigenvalues sorted
/// descending, orthonormal eigenvector columns in matching order.
#[derive(Debug, Clone)]
pub struct HermitianSpectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl HermitianSpectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Number of eigenvalues above `cutoff`.
    pub fn rank(&self, cutoff: f64) -> usize {
        self.eigenvalues.iter().filter(|&&l| l > cutoff).count()
    }

    /// Σ λ_k v_k v_k†.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.dim();
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, &l) in self.eigenvalues.iter().enumerate() {
            let v = self.eigenvectors.column(k);
            out += (&v * v.adjoint()).scale(l);
        }
        out
    }

    /// Spectral function f applied to the eigenvalues: Σ f(λ_k) v_k v_k†.
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.dim();
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, &l) in self.eigenvalues.iter().enumerate() {
            let v = self.eigenvectors.column(k);
            out += (&v * v.adjoint()).scale(f(l));
        }
        out
    }
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn frobenius_norm(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn check_finite(m: &ComplexMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

fn check_square(m: &ComplexMatrix) -> Result<()> {
    if m.nrows() == m.ncols() {
        Ok(())
    } else {
        Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        })
    }
}

/// Relative Hermiticity deviation ‖M − M†‖_F / max(1, ‖M‖_F).
pub fn hermiticity_deviation(m: &ComplexMatrix) -> f64 {
    let diff = m - m.adjoint();
    frobenius_norm(&diff) / frobenius_norm(m).max(1.0)
}

/// Eigendecomposition of a Hermitian matrix.
///
/// The input must be square and Hermitian within the configured relative
/// tolerance; it is then symmetrized as (M + M†)/2 before the solve.
/// Eigenvalues come back sorted descending with eigenvector columns in
/// the same order.
pub fn eig_hermitian(m: &ComplexMatrix) -> Result<HermitianSpectrum> {
    eig_hermitian_with(m, &Tolerances::default())
}

pub fn eig_hermitian_with(m: &ComplexMatrix, tol: &Tolerances) -> Result<HermitianSpectrum> {
    check_square(m)?;
    check_finite(m)?;
    let deviation = hermiticity_deviation(m);
    if deviation > tol.hermiticity {
        return Err(Error::NotHermitian { deviation });
    }
    // symmetrize only inputs already within tolerance
    let h = (m + m.adjoint()).scale(0.5);
    let eig = h.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigenvectors = ComplexMatrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        eigenvectors.set_column(new, &eig.eigenvectors.column(old));
    }
    Ok(HermitianSpectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// Trace norm ‖A‖ = Tr√(A†A).
///
/// With `hermitian` set the input is validated as Hermitian and the norm
/// is computed as Σ|λ_k|; otherwise it is the sum of singular values.
pub fn trace_norm(a: &ComplexMatrix, hermitian: bool) -> Result<f64> {
    check_square(a)?;
    if hermitian {
        let spec = eig_hermitian(a)?;
        Ok(spec.eigenvalues.iter().map(|l| l.abs()).sum())
    } else {
        check_finite(a)?;
        let (_, s, _) = svd(a)?;
        Ok(s.iter().sum())
    }
}

/// Principal square root of a positive semidefinite matrix.
///
/// Eigenvalues in [psd_floor, 0) are clipped to 0; more negative input is
/// rejected rather than silently repaired.
pub fn matrix_sqrt_psd(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    matrix_sqrt_psd_with(m, &Tolerances::default())
}

pub fn matrix_sqrt_psd_with(m: &ComplexMatrix, tol: &Tolerances) -> Result<ComplexMatrix> {
    let spec = eig_hermitian_with(m, tol)?;
    if let Some(&l) = spec
        .eigenvalues
        .iter()
        .find(|&&l| l < tol.psd_floor)
    {
        return Err(Error::NegativeEigenvalue { value: l });
    }
    Ok(spec.map_eigenvalues(|l| l.max(0.0).sqrt()))
}

/// Kronecker product A ⊗ B.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Partial trace of an operator on a tensor-product space.
///
/// `dims` lists the factor dimensions (first factor most significant in
/// the index), `keep` the subsystems to retain. Tracing out nothing is
/// the identity; the full trace is preserved.
pub fn partial_trace(m: &ComplexMatrix, dims: &[usize], keep: &[usize]) -> Result<ComplexMatrix> {
    check_square(m)?;
    let total: usize = dims.iter().product();
    if total != m.nrows() || dims.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            actual: total,
        });
    }
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if keep.iter().any(|&i| i >= dims.len()) {
        return Err(Error::InvalidParameter(format!(
            "keep index out of range for {} factors",
            dims.len()
        )));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
    let keep_dim: usize = keep.iter().map(|&i| dims[i]).product();
    let traced_dim: usize = traced.iter().map(|&i| dims[i]).product();

    // strides of each factor in the full index (row-major over factors)
    let mut strides = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let unpack = |mut x: usize, subsys: &[usize]| -> usize {
        // compose a full-space index from a packed index over `subsys`
        let mut full = 0usize;
        for &f in subsys.iter().rev() {
            full += (x % dims[f]) * strides[f];
            x /= dims[f];
        }
        full
    };

    let mut out = ComplexMatrix::zeros(keep_dim, keep_dim);
    for i in 0..keep_dim {
        let base_i = unpack(i, &keep);
        for j in 0..keep_dim {
            let base_j = unpack(j, &keep);
            let mut acc = Complex64::new(0.0, 0.0);
            for t in 0..traced_dim {
                let off = unpack(t, &traced);
                acc += m[(base_i + off, base_j + off)];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

/// Singular value decomposition A = U · diag(s) · V†, singular values
/// sorted descending.
pub fn svd(a: &ComplexMatrix) -> Result<(ComplexMatrix, Vec<f64>, ComplexMatrix)> {
    check_finite(a)?;
    let decomp = a.clone().svd(true, true);
    let u = decomp.u.expect("svd requested U");
    let v_t = decomp.v_t.expect("svd requested V^H");
    let s = decomp.singular_values;
    let k = s.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| s[y].partial_cmp(&s[x]).unwrap());
    let singular: Vec<f64> = order.iter().map(|&i| s[i]).collect();
    let mut u_sorted = ComplexMatrix::zeros(u.nrows(), k);
    let mut v_sorted = ComplexMatrix::zeros(v_t.ncols(), k);
    let v = v_t.adjoint();
    for (new, &old) in order.iter().enumerate() {
        u_sorted.set_column(new, &u.column(old));
        v_sorted.set_column(new, &v.column(old));
    }
    Ok((u_sorted, singular, v_sorted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    pub(crate) fn random_matrix(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        ComplexMatrix::from_fn(n, n, |_, _| {
            c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        })
    }

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        let g = random_matrix(n, rng);
        (&g + g.adjoint()).scale(0.5)
    }

    fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        let g = random_matrix(n, rng);
        let (u, _, _) = svd(&g).unwrap();
        u
    }

    #[test]
    fn eig_diagonal() {
        let m = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            c(1.0, 0.0),
            c(0.0, 0.0),
        ]));
        let spec = eig_hermitian(&m).unwrap();
        assert!((spec.eigenvalues[0] - 1.0).abs() < 1e-12);
        assert!(spec.eigenvalues[1].abs() < 1e-12);
        assert!((spec.eigenvectors.column(0)[0].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eig_plus_projector() {
        // (X + I)/2 projects onto |+>
        let m = ComplexMatrix::from_row_slice(
            2,
            2,
            &[c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0)],
        );
        let spec = eig_hermitian(&m).unwrap();
        assert!((spec.eigenvalues[0] - 1.0).abs() < 1e-12);
        assert!(spec.eigenvalues[1].abs() < 1e-12);
    }

    #[test]
    fn eig_reconstructs_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_hermitian(8, &mut rng);
        let spec = eig_hermitian(&m).unwrap();
        let err = frobenius_norm(&(spec.reconstruct() - &m));
        assert!(err < 1e-9 * 8.0, "reconstruction error {err}");
        // orthonormality
        let gram = spec.eigenvectors.adjoint() * &spec.eigenvectors;
        assert!(frobenius_norm(&(gram - identity(8))) < 1e-9);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = ComplexMatrix::from_row_slice(
            2,
            2,
            &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        );
        assert!(matches!(
            eig_hermitian(&m),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn eig_rejects_non_square() {
        let m = ComplexMatrix::zeros(2, 3);
        assert!(matches!(eig_hermitian(&m), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn trace_norm_examples() {
        let m = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            c(0.5, 0.0),
            c(-0.5, 0.0),
        ]));
        assert!((trace_norm(&m, true).unwrap() - 1.0).abs() < 1e-12);

        let zero = ComplexMatrix::zeros(3, 3);
        assert!(trace_norm(&zero, true).unwrap().abs() < 1e-12);

        // |0><0| - |+><+| has eigenvalues ±1/√2
        let diff = ComplexMatrix::from_row_slice(
            2,
            2,
            &[c(0.5, 0.0), c(-0.5, 0.0), c(-0.5, 0.0), c(-0.5, 0.0)],
        );
        assert!((trace_norm(&diff, true).unwrap() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn trace_norm_is_a_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let a = random_hermitian(3, &mut rng);
            let b = random_hermitian(3, &mut rng);
            let na = trace_norm(&a, true).unwrap();
            let nb = trace_norm(&b, true).unwrap();
            let nab = trace_norm(&(&a + &b), true).unwrap();
            assert!(na >= 0.0);
            assert!(nab <= na + nb + 1e-10);
        }
        let zero = ComplexMatrix::zeros(4, 4);
        assert!(trace_norm(&zero, true).unwrap() < 1e-10);
    }

    #[test]
    fn trace_norm_unitarily_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let a = random_hermitian(4, &mut rng);
            let u = random_unitary(4, &mut rng);
            let rotated = &u * &a * u.adjoint();
            let d = (trace_norm(&a, true).unwrap() - trace_norm(&rotated, true).unwrap()).abs();
            assert!(d < 1e-9, "unitary invariance violated by {d}");
        }
    }

    #[test]
    fn trace_norm_invariant_under_pure_append() {
        // ‖A ⊗ P‖ = ‖A‖ for a pure projector P
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let a = random_hermitian(3, &mut rng);
            let mut v = nalgebra::DVector::from_fn(2, |_, _| {
                c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            });
            v /= c(v.norm(), 0.0);
            let p = &v * v.adjoint();
            let ap = kron(&a, &p);
            let d = (trace_norm(&ap, true).unwrap() - trace_norm(&a, true).unwrap()).abs();
            assert!(d < 1e-9);
        }
    }

    #[test]
    fn sqrt_psd_examples() {
        let id = identity(3);
        assert!(frobenius_norm(&(matrix_sqrt_psd(&id).unwrap() - &id)) < 1e-12);

        let m = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            c(4.0, 0.0),
            c(1.0, 0.0),
        ]));
        let r = matrix_sqrt_psd(&m).unwrap();
        assert!((r[(0, 0)].re - 2.0).abs() < 1e-12);
        assert!((r[(1, 1)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sqrt_psd_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let g = random_matrix(5, &mut rng);
        let psd = &g * g.adjoint();
        let r = matrix_sqrt_psd(&psd).unwrap();
        assert!(frobenius_norm(&(&r * &r - &psd)) < 1e-8);
    }

    #[test]
    fn sqrt_psd_rejects_negative() {
        let m = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            c(1.0, 0.0),
            c(-1e-6, 0.0),
        ]));
        assert!(matches!(
            matrix_sqrt_psd(&m),
            Err(Error::NegativeEigenvalue { .. })
        ));
    }

    #[test]
    fn kron_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let a = random_matrix(3, &mut rng);
        let one = identity(1);
        assert!(frobenius_norm(&(kron(&a, &one) - &a)) < 1e-15);

        let p0 = ComplexMatrix::from_row_slice(
            2,
            2,
            &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        );
        let p1 = ComplexMatrix::from_row_slice(
            2,
            2,
            &[c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        );
        let k = kron(&p0, &p1);
        assert!((k[(1, 1)].re - 1.0).abs() < 1e-15);
        assert!((k.trace().re - 1.0).abs() < 1e-15);

        let b = random_matrix(2, &mut rng);
        let tk = kron(&a, &b).trace();
        let tt = a.trace() * b.trace();
        assert!((tk - tt).norm() < 1e-12);
    }

    #[test]
    fn kron_eigenvalues_multiply() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let g1 = random_matrix(2, &mut rng);
        let g2 = random_matrix(3, &mut rng);
        let r1 = &g1 * g1.adjoint();
        let r2 = &g2 * g2.adjoint();
        let e1 = eig_hermitian(&r1).unwrap().eigenvalues;
        let e2 = eig_hermitian(&r2).unwrap().eigenvalues;
        let mut products: Vec<f64> = e1
            .iter()
            .flat_map(|a| e2.iter().map(move |b| a * b))
            .collect();
        let mut joint = eig_hermitian(&kron(&r1, &r2)).unwrap().eigenvalues;
        products.sort_by(|a, b| b.partial_cmp(a).unwrap());
        joint.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (p, j) in products.iter().zip(joint.iter()) {
            assert!((p - j).abs() < 1e-9);
        }
    }

    #[test]
    fn partial_trace_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let g = random_matrix(3, &mut rng);
        let rho = {
            let m = &g * g.adjoint();
            let t = m.trace().re;
            m.scale(1.0 / t)
        };
        let mut v = nalgebra::DVector::from_fn(2, |_, _| {
            c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        v /= c(v.norm(), 0.0);
        let p = &v * v.adjoint();

        // Tr_{H'}(ρ ⊗ P) = ρ
        let joint = kron(&rho, &p);
        let back = partial_trace(&joint, &[3, 2], &[0]).unwrap();
        assert!(frobenius_norm(&(back - &rho)) < 1e-12);

        // keep all = identity
        let all = partial_trace(&joint, &[3, 2], &[0, 1]).unwrap();
        assert!(frobenius_norm(&(all - &joint)) < 1e-15);

        // trace preserved
        let t = partial_trace(&joint, &[3, 2], &[1]).unwrap().trace().re;
        assert!((t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn partial_trace_contracts_trace_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..20 {
            let a = random_hermitian(6, &mut rng);
            let reduced = partial_trace(&a, &[2, 3], &[0]).unwrap();
            let na = trace_norm(&a, true).unwrap();
            let nr = trace_norm(&reduced, true).unwrap();
            assert!(nr <= na + 1e-10);
        }
    }

    #[test]
    fn partial_trace_dimension_mismatch() {
        let m = identity(6);
        assert!(partial_trace(&m, &[2, 2], &[0]).is_err());
    }

    #[test]
    fn svd_examples() {
        let id = identity(3);
        let (_, s, _) = svd(&id).unwrap();
        assert!(s.iter().all(|x| (x - 1.0).abs() < 1e-12));

        let m = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            c(3.0, 0.0),
            c(-2.0, 0.0),
        ]));
        let (_, s, _) = svd(&m).unwrap();
        assert!((s[0] - 3.0).abs() < 1e-12 && (s[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn svd_recomposes_and_matches_trace_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let a = random_matrix(5, &mut rng);
        let (u, s, v) = svd(&a).unwrap();
        let sigma = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(
            s.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>(),
        ));
        let back = &u * sigma * v.adjoint();
        assert!(frobenius_norm(&(back - &a)) < 1e-8);

        // cross-check the two trace-norm routes on a Hermitian input
        let h = (&a + a.adjoint()).scale(0.5);
        let n1 = trace_norm(&h, true).unwrap();
        let n2 = trace_norm(&h, false).unwrap();
        assert!((n1 - n2).abs() < 1e-9);
    }
}
