//! Quantum states, ensembles, block sequences and purifications.
//!
//! A source emits member `i` of an [`Ensemble`] with probability pᵢ; a
//! block of N emissions is described by a [`BlockSequence`] and its
//! product state ρ_{i₁} ⊗ … ⊗ ρ_{i_N}, which can stay implicit (a factor
//! list) or be materialized densely up to a configurable cap.
//!
//! Purifications follow the canonical form Σ_k √λ_k |u_k⟩⊗|k⟩ over the
//! rank support; [`optimal_purification_pair`] aligns a second
//! purification so the squared overlap attains the Uhlmann fidelity.

use crate::linalg::{self, ComplexMatrix, HermitianSpectrum, Tolerances};
use crate::{Error, Result};
use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;

/// Hermitian, positive-semidefinite, unit-trace operator.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    dim: usize,
    mat: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, positivity (eigenvalues ≥ psd_floor) and
    /// unit trace before wrapping the matrix.
    pub fn new(mat: ComplexMatrix) -> Result<Self> {
        Self::new_with(mat, &Tolerances::default())
    }

    pub fn new_with(mat: ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        let spec = linalg::eig_hermitian_with(&mat, tol)?;
        if let Some(&l) = spec.eigenvalues.iter().find(|&&l| l < tol.psd_floor) {
            return Err(Error::NegativeEigenvalue { value: l });
        }
        let trace = mat.trace().re;
        if (trace - 1.0).abs() > tol.trace_one {
            return Err(Error::InvalidState(format!(
                "trace {trace} is not 1 within tolerance"
            )));
        }
        Ok(DensityMatrix {
            dim: mat.nrows(),
            mat,
        })
    }

    /// Wraps a matrix that is valid by construction (channel outputs,
    /// convex mixtures of valid states). Debug builds still verify.
    pub(crate) fn from_valid(mat: ComplexMatrix) -> Self {
        debug_assert!((mat.trace().re - 1.0).abs() < 1e-7, "trace drifted");
        debug_assert!(linalg::hermiticity_deviation(&mat) < 1e-7);
        DensityMatrix {
            dim: mat.nrows(),
            mat,
        }
    }

    pub fn pure(psi: &PureState) -> Self {
        DensityMatrix::from_valid(psi.projector())
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix::from_valid(linalg::identity(dim).scale(1.0 / dim as f64))
    }

    /// Qubit state from a Bloch vector: ρ = ½(I + xX + yY + zZ), |v| ≤ 1.
    pub fn from_bloch(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if norm > 1.0 + 1e-9 {
            return Err(Error::InvalidState(format!(
                "Bloch vector has length {norm} > 1"
            )));
        }
        let c = Complex64::new;
        let mat = ComplexMatrix::from_row_slice(
            2,
            2,
            &[
                c(0.5 * (1.0 + z), 0.0),
                c(0.5 * x, -0.5 * y),
                c(0.5 * x, 0.5 * y),
                c(0.5 * (1.0 - z), 0.0),
            ],
        );
        DensityMatrix::new(mat)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    pub fn eig(&self) -> Result<HermitianSpectrum> {
        linalg::eig_hermitian(&self.mat)
    }

    /// Rank by the support cutoff (eigenvalues above 1e-10 by default).
    pub fn rank(&self) -> Result<usize> {
        let tol = Tolerances::default();
        Ok(self.eig()?.rank(tol.support_cutoff))
    }

    /// True when the largest eigenvalue is 1 within the support cutoff.
    pub fn is_pure(&self) -> Result<bool> {
        let spec = self.eig()?;
        Ok(spec.eigenvalues[0] >= 1.0 - Tolerances::default().support_cutoff * 10.0)
    }
}

/// Unit vector in C^dim.
#[derive(Debug, Clone)]
pub struct PureState {
    dim: usize,
    amplitudes: DVector<Complex64>,
}

impl PureState {
    pub fn new(amplitudes: DVector<Complex64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > Tolerances::default().unit_norm {
            return Err(Error::InvalidState(format!(
                "pure state norm {norm} is not 1 within tolerance"
            )));
        }
        Ok(PureState {
            dim: amplitudes.len(),
            amplitudes,
        })
    }

    /// Computational basis state |k⟩.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[k] = Complex64::new(1.0, 0.0);
        PureState {
            dim,
            amplitudes: v,
        }
    }

    /// |+⟩-style uniform real superposition.
    pub fn uniform(dim: usize) -> Self {
        let a = 1.0 / (dim as f64).sqrt();
        PureState {
            dim,
            amplitudes: DVector::from_element(dim, Complex64::new(a, 0.0)),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn projector(&self) -> ComplexMatrix {
        &self.amplitudes * self.amplitudes.adjoint()
    }

    pub fn overlap(&self, other: &PureState) -> Complex64 {
        self.amplitudes.dotc(&other.amplitudes)
    }
}

/// Probability-weighted list of states of equal dimension.
#[derive(Debug, Clone)]
pub struct Ensemble {
    probs: Vec<f64>,
    states: Vec<DensityMatrix>,
}

impl Ensemble {
    pub fn new(probs: Vec<f64>, states: Vec<DensityMatrix>) -> Result<Self> {
        if probs.is_empty() || probs.len() != states.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} probabilities for {} states",
                probs.len(),
                states.len()
            )));
        }
        if probs.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidDistribution(
                "negative probability".to_string(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > Tolerances::default().trace_one {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {sum}"
            )));
        }
        let dim = states[0].dim();
        if states.iter().any(|s| s.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: states.iter().map(|s| s.dim()).find(|&d| d != dim).unwrap(),
            });
        }
        Ok(Ensemble { probs, states })
    }

    /// Convenience constructor from pure states.
    pub fn of_pure_states(probs: Vec<f64>, states: Vec<PureState>) -> Result<Self> {
        let states = states.iter().map(DensityMatrix::pure).collect();
        Ensemble::new(probs, states)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn state(&self, i: usize) -> &DensityMatrix {
        &self.states[i]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &DensityMatrix)> {
        self.probs.iter().cloned().zip(self.states.iter())
    }
}

/// Indices of ensemble members emitted in one block of length N.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSequence(pub Vec<usize>);

impl BlockSequence {
    pub fn new(indices: Vec<usize>, ensemble: &Ensemble) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= ensemble.len()) {
            return Err(Error::InvalidParameter(format!(
                "sequence index {bad} out of range for {} members",
                ensemble.len()
            )));
        }
        Ok(BlockSequence(indices))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// ∏ p_{iⱼ}.
    pub fn probability(&self, ensemble: &Ensemble) -> f64 {
        self.0.iter().map(|&i| ensemble.prob(i)).product()
    }
}

/// Block product state, either dense or as a lazy factor list.
#[derive(Debug, Clone)]
pub enum BlockState {
    Dense(DensityMatrix),
    Product(Vec<DensityMatrix>),
}

impl BlockState {
    pub fn dim(&self) -> usize {
        match self {
            BlockState::Dense(d) => d.dim(),
            BlockState::Product(fs) => fs.iter().map(|f| f.dim()).product(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            BlockState::Dense(d) => d.matrix().trace().re,
            BlockState::Product(fs) => fs.iter().map(|f| f.matrix().trace().re).product(),
        }
    }

    pub fn factors(&self) -> Option<&[DensityMatrix]> {
        match self {
            BlockState::Product(fs) => Some(fs),
            BlockState::Dense(_) => None,
        }
    }

    /// Dense form, materializing the Kronecker chain if needed.
    pub fn to_dense(&self, dense_cap: usize) -> Result<DensityMatrix> {
        match self {
            BlockState::Dense(d) => Ok(d.clone()),
            BlockState::Product(fs) => {
                let dim = self.dim();
                if dim > dense_cap {
                    return Err(Error::CapExceeded {
                        what: "dense block state",
                        needed: dim,
                        cap: dense_cap,
                    });
                }
                let mut m = linalg::identity(1);
                for f in fs {
                    m = linalg::kron(&m, f.matrix());
                }
                Ok(DensityMatrix::from_valid(m))
            }
        }
    }
}

/// Σ pᵢ ρᵢ.
pub fn ensemble_average(e: &Ensemble) -> DensityMatrix {
    let dim = e.dim();
    let mut m = ComplexMatrix::zeros(dim, dim);
    for (p, rho) in e.iter() {
        m += rho.matrix().scale(p);
    }
    DensityMatrix::from_valid(m)
}

/// ρ_{i₁} ⊗ … ⊗ ρ_{i_N}, dense when `materialize` is set (subject to
/// `dense_cap`), otherwise an implicit factor list.
pub fn block_state(
    e: &Ensemble,
    seq: &BlockSequence,
    materialize: bool,
    dense_cap: usize,
) -> Result<BlockState> {
    if seq.is_empty() {
        return Err(Error::InvalidParameter("empty block sequence".to_string()));
    }
    if let Some(&bad) = seq.0.iter().find(|&&i| i >= e.len()) {
        return Err(Error::InvalidParameter(format!(
            "sequence index {bad} out of range"
        )));
    }
    let factors: Vec<DensityMatrix> = seq.0.iter().map(|&i| e.state(i).clone()).collect();
    let block = BlockState::Product(factors);
    if materialize {
        Ok(BlockState::Dense(block.to_dense(dense_cap)?))
    } else {
        Ok(block)
    }
}

/// Canonical purification Σ_k √λ_k |u_k⟩ ⊗ |k⟩ with a minimal ancilla of
/// dimension rank(ρ). The output lives on C^{dim·rank} with the ancilla
/// index fastest, so `partial_trace(.., &[dim, rank], &[0])` recovers ρ.
pub fn purify(rho: &DensityMatrix) -> Result<PureState> {
    let rank = rho.rank()?.max(1);
    purify_to(rho, rank)
}

/// Canonical purification with an explicit ancilla dimension ≥ rank(ρ);
/// extra ancilla directions carry zero amplitude.
pub fn purify_to(rho: &DensityMatrix, ancilla_dim: usize) -> Result<PureState> {
    let spec = rho.eig()?;
    let cutoff = Tolerances::default().support_cutoff;
    let rank = spec.rank(cutoff).max(1);
    if ancilla_dim < rank {
        return Err(Error::InvalidParameter(format!(
            "ancilla dim {ancilla_dim} below rank {rank}"
        )));
    }
    let d = rho.dim();
    let mut amp = DVector::zeros(d * ancilla_dim);
    for k in 0..rank {
        let w = spec.eigenvalues[k].max(0.0).sqrt();
        for q in 0..d {
            amp[q * ancilla_dim + k] = spec.eigenvectors[(q, k)] * w;
        }
    }
    // renormalize round-off in the retained spectrum
    let n = amp.norm();
    amp /= Complex64::new(n, 0.0);
    PureState::new(amp)
}

/// Joint purifications (ψ₁, ψ₂) of (ρ₁, ρ₂) on a shared ancilla of
/// dimension max(rank₁, rank₂) whose squared overlap attains the Uhlmann
/// fidelity F(ρ₁, ρ₂).
///
/// ψ₁ is the canonical purification; ψ₂ is rotated on the ancilla side by
/// the polar unitary of A₂†A₁ (the compressed form of √ρ₂√ρ₁), obtained
/// from an SVD.
pub fn optimal_purification_pair(
    rho1: &DensityMatrix,
    rho2: &DensityMatrix,
) -> Result<(PureState, PureState)> {
    if rho1.dim() != rho2.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho1.dim(),
            actual: rho2.dim(),
        });
    }
    let d = rho1.dim();
    let cutoff = Tolerances::default().support_cutoff;
    let s1 = rho1.eig()?;
    let s2 = rho2.eig()?;
    let a = s1.rank(cutoff).max(s2.rank(cutoff)).max(1);

    // A_i = U_i √Λ_i restricted to the support, zero-padded to `a` columns
    let factor = |spec: &HermitianSpectrum| -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(d, a);
        for k in 0..a.min(d) {
            let l = spec.eigenvalues[k].max(0.0);
            if l <= cutoff {
                continue;
            }
            let w = l.sqrt();
            for q in 0..d {
                m[(q, k)] = spec.eigenvectors[(q, k)] * w;
            }
        }
        m
    };
    let a1 = factor(&s1);
    let a2 = factor(&s2);

    // align: W = U V† from the SVD of B = A₂†A₁ maximizes Re Tr(B†W)
    let b = a2.adjoint() * &a1;
    let (u, _, v) = linalg::svd(&b)?;
    let w = &u * v.adjoint();
    let a2_aligned = &a2 * w;

    let vec_of = |m: &ComplexMatrix| -> Result<PureState> {
        let mut amp = DVector::zeros(d * a);
        for q in 0..d {
            for k in 0..a {
                amp[q * a + k] = m[(q, k)];
            }
        }
        let n = amp.norm();
        amp /= Complex64::new(n, 0.0);
        PureState::new(amp)
    };
    Ok((vec_of(&a1)?, vec_of(&a2_aligned)?))
}

/// Draw an i.i.d. block of length N from the source.
pub fn sample_sequence<R: Rng>(e: &Ensemble, n: usize, rng: &mut R) -> BlockSequence {
    let mut cdf = Vec::with_capacity(e.len());
    let mut acc = 0.0;
    for &p in e.probs() {
        acc += p;
        cdf.push(acc);
    }
    let draw = |x: f64| -> usize {
        cdf.iter()
            .position(|&c| x < c)
            .unwrap_or(e.len() - 1)
    };
    BlockSequence((0..n).map(|_| draw(rng.gen::<f64>())).collect())
}

/// Random mixed state of the given rank: GG†/Tr with Gaussian G.
pub fn random_density<R: Rng>(dim: usize, rank: usize, rng: &mut R) -> DensityMatrix {
    let g = ComplexMatrix::from_fn(dim, rank.max(1).min(dim), |_, _| {
        Complex64::new(gauss(rng), gauss(rng))
    });
    let m = &g * g.adjoint();
    let t = m.trace().re;
    DensityMatrix::from_valid(m.scale(1.0 / t))
}

/// Random pure state with Gaussian amplitudes.
pub fn random_pure<R: Rng>(dim: usize, rng: &mut R) -> PureState {
    let mut v = DVector::from_fn(dim, |_, _| Complex64::new(gauss(rng), gauss(rng)));
    let n = v.norm();
    v /= Complex64::new(n, 0.0);
    PureState::new(v).expect("normalized")
}

// Box-Muller; keeps the rand_distr dependency out of the library.
pub(crate) fn gauss<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals;
    use crate::linalg::frobenius_norm;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ket0() -> PureState {
        PureState::basis(2, 0)
    }

    fn ket_plus() -> PureState {
        PureState::uniform(2)
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(linalg::identity(2)).is_err()); // trace 2
        let ok = DensityMatrix::new(linalg::identity(2).scale(0.5)).unwrap();
        assert_eq!(ok.dim(), 2);
        assert!(DensityMatrix::from_bloch(0.0, 0.0, 1.5).is_err());
        let plus = DensityMatrix::from_bloch(1.0, 0.0, 0.0).unwrap();
        assert!((plus.matrix()[(0, 1)].re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ensemble_validation() {
        let s = vec![DensityMatrix::maximally_mixed(2)];
        assert!(Ensemble::new(vec![0.9], s.clone()).is_err());
        assert!(Ensemble::new(vec![1.0], s).is_ok());
        assert!(Ensemble::new(vec![], vec![]).is_err());
    }

    #[test]
    fn average_examples() {
        let single = Ensemble::new(vec![1.0], vec![DensityMatrix::maximally_mixed(3)]).unwrap();
        let avg = ensemble_average(&single);
        assert!(frobenius_norm(&(avg.matrix() - single.state(0).matrix())) < 1e-15);

        let e = Ensemble::of_pure_states(
            vec![0.5, 0.5],
            vec![PureState::basis(2, 0), PureState::basis(2, 1)],
        )
        .unwrap();
        let avg = ensemble_average(&e);
        assert!(frobenius_norm(&(avg.matrix() - linalg::identity(2).scale(0.5))) < 1e-15);

        // {(1/2,|0>),(1/2,|+>)} -> [[3/4,1/4],[1/4,1/4]]
        let e = Ensemble::of_pure_states(vec![0.5, 0.5], vec![ket0(), ket_plus()]).unwrap();
        let avg = ensemble_average(&e);
        assert!((avg.matrix()[(0, 0)].re - 0.75).abs() < 1e-12);
        assert!((avg.matrix()[(0, 1)].re - 0.25).abs() < 1e-12);
        assert!((avg.matrix()[(1, 1)].re - 0.25).abs() < 1e-12);
    }

    #[test]
    fn block_state_basics() {
        let e = Ensemble::of_pure_states(vec![0.5, 0.5], vec![ket0(), ket_plus()]).unwrap();
        let seq = BlockSequence::new(vec![0], &e).unwrap();
        let b = block_state(&e, &seq, true, 64).unwrap();
        let d = b.to_dense(64).unwrap();
        assert!(frobenius_norm(&(d.matrix() - e.state(0).matrix())) < 1e-15);

        let seq3 = BlockSequence::new(vec![0, 1, 1], &e).unwrap();
        let b3 = block_state(&e, &seq3, false, 64).unwrap();
        assert!((b3.trace() - 1.0).abs() < 1e-12);
        assert!(block_state(&e, &seq3, true, 4).is_err()); // cap

        // additivity of entropy across factors at N = 3
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mixed = Ensemble::new(
            vec![0.6, 0.4],
            vec![random_density(2, 2, &mut rng), random_density(2, 2, &mut rng)],
        )
        .unwrap();
        let seq = BlockSequence::new(vec![0, 1, 0], &mixed).unwrap();
        let dense = block_state(&mixed, &seq, true, 64)
            .unwrap()
            .to_dense(64)
            .unwrap();
        let joint = functionals::von_neumann_entropy(&dense);
        let sum: f64 = seq
            .0
            .iter()
            .map(|&i| functionals::von_neumann_entropy(mixed.state(i)))
            .sum();
        assert!((joint - sum).abs() < 1e-9);
    }

    #[test]
    fn purify_round_trips() {
        // pure input: trivial ancilla
        let p = DensityMatrix::pure(&ket_plus());
        let psi = purify(&p).unwrap();
        assert_eq!(psi.dim(), 2);

        // I/2: maximally entangled pair
        let mm = DensityMatrix::maximally_mixed(2);
        let psi = purify(&mm).unwrap();
        assert_eq!(psi.dim(), 4);
        let back = linalg::partial_trace(&psi.projector(), &[2, 2], &[0]).unwrap();
        assert!(frobenius_norm(&(back - mm.matrix())) < 1e-12);

        // random rank-2 qutrit state round-trips
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let rho = random_density(3, 2, &mut rng);
            let r = rho.rank().unwrap();
            let psi = purify(&rho).unwrap();
            let back = linalg::partial_trace(&psi.projector(), &[3, r], &[0]).unwrap();
            assert!(frobenius_norm(&(back - rho.matrix())) < 1e-9);
        }
    }

    #[test]
    fn purify_round_trip_sweep_dims_2_to_4() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..200 {
            let dim = 2 + trial % 3;
            let rank = 1 + trial % dim;
            let rho = random_density(dim, rank, &mut rng);
            let r = rho.rank().unwrap();
            let psi = purify(&rho).unwrap();
            let back = linalg::partial_trace(&psi.projector(), &[dim, r], &[0]).unwrap();
            assert!(frobenius_norm(&(back - rho.matrix())) < 1e-9);
        }
    }

    #[test]
    fn optimal_pair_attains_fidelity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // identical states: overlap 1
        let rho = random_density(2, 2, &mut rng);
        let (p1, p2) = optimal_purification_pair(&rho, &rho).unwrap();
        assert!((p1.overlap(&p2).norm_sqr() - 1.0).abs() < 1e-9);

        // disjoint supports: overlap 0
        let d1 = DensityMatrix::new(
            ComplexMatrix::from_partial_diagonal(
                4,
                4,
                &[
                    Complex64::new(0.7, 0.0),
                    Complex64::new(0.3, 0.0),
                ],
            ),
        )
        .unwrap();
        let mut m = ComplexMatrix::zeros(4, 4);
        m[(2, 2)] = Complex64::new(0.4, 0.0);
        m[(3, 3)] = Complex64::new(0.6, 0.0);
        let d2 = DensityMatrix::new(m).unwrap();
        let (p1, p2) = optimal_purification_pair(&d1, &d2).unwrap();
        assert!(p1.overlap(&p2).norm_sqr() < 1e-12);

        // random qubit pairs: overlap matches fidelity, never exceeds it,
        // and both purifications trace back to their sources
        for _ in 0..100 {
            let r1 = random_density(2, 2, &mut rng);
            let r2 = random_density(2, 2, &mut rng);
            let f = functionals::fidelity(&r1, &r2).unwrap();
            let (p1, p2) = optimal_purification_pair(&r1, &r2).unwrap();
            let ov = p1.overlap(&p2).norm_sqr();
            assert!((ov - f).abs() < 1e-7, "overlap {ov} vs fidelity {f}");
            assert!(ov <= f + 1e-7);
            let a = p1.dim() / 2;
            let b1 = linalg::partial_trace(&p1.projector(), &[2, a], &[0]).unwrap();
            let b2 = linalg::partial_trace(&p2.projector(), &[2, a], &[0]).unwrap();
            assert!(frobenius_norm(&(b1 - r1.matrix())) < 1e-8);
            assert!(frobenius_norm(&(b2 - r2.matrix())) < 1e-8);
        }
    }

    #[test]
    fn sampling_behaviour() {
        let e = Ensemble::new(vec![1.0], vec![DensityMatrix::maximally_mixed(2)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = sample_sequence(&e, 8, &mut rng);
        assert_eq!(s.0, vec![0; 8]);

        let e = Ensemble::of_pure_states(
            vec![0.3, 0.7],
            vec![PureState::basis(2, 0), PureState::basis(2, 1)],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let s = sample_sequence(&e, n, &mut rng);
        let ones = s.0.iter().filter(|&&i| i == 1).count() as f64;
        let sigma = (0.3f64 * 0.7 * n as f64).sqrt();
        assert!(
            (ones - 0.7 * n as f64).abs() < 3.0 * sigma,
            "empirical frequency outside 3 sigma"
        );

        // determinism
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(
            sample_sequence(&e, 50, &mut r1).0,
            sample_sequence(&e, 50, &mut r2).0
        );
    }
}
