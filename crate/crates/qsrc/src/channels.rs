//! Quantum operations in Kraus form and via unitary dilation.
//!
//! A [`KrausChannel`] is a trace-preserving completely positive map
//! Λ(ρ) = Σᵢ Vᵢ ρ Vᵢ† with Σᵢ Vᵢ†Vᵢ = I; input and output dimensions may
//! differ. [`dilate`] produces the equivalent picture
//! Λ(ρ) = Tr_{H′} U(ρ⊗P)U† with a pure ancilla P and a unitary U, built
//! by stacking the Kraus operators into an isometry and completing its
//! columns deterministically.

use crate::linalg::{self, ComplexMatrix, Tolerances};
use crate::states::{DensityMatrix, Ensemble, PureState};
use crate::{Error, Result};
use num_complex::Complex64;
use rand::Rng;

/// Trace-preserving completely positive map in Kraus form.
#[derive(Debug, Clone)]
pub struct KrausChannel {
    din: usize,
    dout: usize,
    operators: Vec<ComplexMatrix>,
}

impl KrausChannel {
    /// Validates that the operators share a dout×din shape and satisfy
    /// Σ Vᵢ†Vᵢ = I within the completeness tolerance.
    pub fn new(operators: Vec<ComplexMatrix>) -> Result<Self> {
        if operators.is_empty() {
            return Err(Error::InvalidChannel("empty Kraus list".to_string()));
        }
        let dout = operators[0].nrows();
        let din = operators[0].ncols();
        if operators
            .iter()
            .any(|v| v.nrows() != dout || v.ncols() != din)
        {
            return Err(Error::InvalidChannel(
                "Kraus operators have mixed shapes".to_string(),
            ));
        }
        let mut sum = ComplexMatrix::zeros(din, din);
        for v in &operators {
            sum += v.adjoint() * v;
        }
        let deviation = linalg::frobenius_norm(&(sum - linalg::identity(din)));
        if deviation > Tolerances::default().kraus_completeness * (din as f64).sqrt().max(1.0) {
            return Err(Error::InvalidChannel(format!(
                "sum V†V deviates from identity by {deviation:.3e}"
            )));
        }
        Ok(KrausChannel {
            din,
            dout,
            operators,
        })
    }

    pub fn identity(dim: usize) -> Self {
        KrausChannel {
            din: dim,
            dout: dim,
            operators: vec![linalg::identity(dim)],
        }
    }

    /// Single-unitary channel ρ ↦ UρU†.
    pub fn unitary(u: ComplexMatrix) -> Result<Self> {
        KrausChannel::new(vec![u])
    }

    /// Fully depolarizing qubit channel from the four Pauli flips.
    pub fn depolarizing_qubit() -> Self {
        let c = Complex64::new;
        let h = 0.5;
        let ops = vec![
            ComplexMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(h, 0.0)]),
            ComplexMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(h, 0.0), c(h, 0.0), c(0.0, 0.0)]),
            ComplexMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -h), c(0.0, h), c(0.0, 0.0)]),
            ComplexMatrix::from_row_slice(2, 2, &[c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-h, 0.0)]),
        ];
        KrausChannel::new(ops).expect("Pauli set is complete")
    }

    pub fn din(&self) -> usize {
        self.din
    }

    pub fn dout(&self) -> usize {
        self.dout
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.operators
    }
}

/// Λ(ρ) = Σᵢ Vᵢ ρ Vᵢ†.
pub fn apply(ch: &KrausChannel, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if rho.dim() != ch.din {
        return Err(Error::DimensionMismatch {
            expected: ch.din,
            actual: rho.dim(),
        });
    }
    let mut out = ComplexMatrix::zeros(ch.dout, ch.dout);
    for v in &ch.operators {
        out += v * rho.matrix() * v.adjoint();
    }
    Ok(DensityMatrix::from_valid(out))
}

/// Unitary-dilation picture of a channel: Λ(ρ) = Tr_{env} U(ρ⊗P)U†.
///
/// The joint input space is H_in ⊗ H_anc with `P = |0⟩⟨0|` on the
/// ancilla; the joint output space factors as H_out ⊗ H_env and the env
/// factor is the one traced out.
#[derive(Debug, Clone)]
pub struct Dilation {
    pub din: usize,
    pub dout: usize,
    /// Pure ancilla state appended to the input.
    pub ancilla_state: PureState,
    /// Unitary on the joint space (dim din·anc = dout·env).
    pub unitary: ComplexMatrix,
    /// Dimension of the traced-out environment factor.
    pub env_dim: usize,
}

/// Builds a unitary dilation of the channel.
///
/// The Kraus list is zero-padded until dout·k is a multiple of din, the
/// padded operators are stacked into an isometry on H_out ⊗ H_env, and
/// the remaining columns are completed by orthonormalizing the standard
/// basis in index order.
pub fn dilate(ch: &KrausChannel) -> Result<Dilation> {
    let din = ch.din;
    let dout = ch.dout;
    let mut k = ch.operators.len();
    while (dout * k) % din != 0 {
        k += 1;
    }
    let env = k;
    let anc = dout * k / din;
    let joint = din * anc;

    let mut u = ComplexMatrix::zeros(joint, joint);
    // columns for |φ_j⟩ ⊗ |0⟩: U maps them to Σ_i (V_i |φ_j⟩) ⊗ |i⟩
    for j in 0..din {
        for (i, v) in ch.operators.iter().enumerate() {
            for o in 0..dout {
                u[(o * env + i, j * anc)] = v[(o, j)];
            }
        }
    }
    // deterministic completion: orthonormalize the standard basis remainder
    let mut filled: Vec<usize> = (0..din).map(|j| j * anc).collect();
    let free: Vec<usize> = (0..joint).filter(|c| c % anc != 0).collect();
    let mut next_free = 0;
    for t in 0..joint {
        if next_free >= free.len() {
            break;
        }
        let mut cand = nalgebra::DVector::<Complex64>::zeros(joint);
        cand[t] = Complex64::new(1.0, 0.0);
        for &col in &filled {
            let existing = u.column(col);
            let ov = existing.dotc(&cand);
            cand -= existing * ov;
        }
        let norm = cand.norm();
        if norm > 1e-8 {
            cand /= Complex64::new(norm, 0.0);
            let col = free[next_free];
            u.set_column(col, &cand);
            filled.push(col);
            next_free += 1;
        }
    }
    if next_free < free.len() {
        return Err(Error::InvalidChannel(
            "failed to complete dilation unitary".to_string(),
        ));
    }
    debug_assert!(
        linalg::frobenius_norm(&(u.adjoint() * &u - linalg::identity(joint))) < 1e-8 * joint as f64
    );
    Ok(Dilation {
        din,
        dout,
        ancilla_state: PureState::basis(anc, 0),
        unitary: u,
        env_dim: env,
    })
}

/// Tr_{env} U(ρ⊗P)U†. Agrees with the Kraus application of the channel
/// the dilation was built from.
pub fn apply_via_dilation(dil: &Dilation, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if rho.dim() != dil.din {
        return Err(Error::DimensionMismatch {
            expected: dil.din,
            actual: rho.dim(),
        });
    }
    let p = dil.ancilla_state.projector();
    let joint = linalg::kron(rho.matrix(), &p);
    let evolved = &dil.unitary * joint * dil.unitary.adjoint();
    let reduced = linalg::partial_trace(&evolved, &[dil.dout, dil.env_dim], &[0])?;
    Ok(DensityMatrix::from_valid(reduced))
}

/// Random channel: a Gaussian dout·k × din matrix orthonormalized into an
/// isometry, partitioned into k Kraus blocks. Deterministic under a fixed
/// seed.
pub fn random_channel<R: Rng>(din: usize, dout: usize, k: usize, rng: &mut R) -> Result<KrausChannel> {
    if k == 0 || dout * k < din {
        return Err(Error::InvalidParameter(format!(
            "need dout*k >= din for an isometry, got {dout}x{k} < {din}"
        )));
    }
    let rows = dout * k;
    let g = ComplexMatrix::from_fn(rows, din, |_, _| {
        Complex64::new(crate::states::gauss(rng), crate::states::gauss(rng))
    });
    // modified Gram-Schmidt on the columns
    let mut w = g;
    for j in 0..din {
        for i in 0..j {
            let prev = w.column(i).clone_owned();
            let ov = prev.dotc(&w.column(j));
            let update = prev * ov;
            let mut col = w.column_mut(j);
            col -= update;
        }
        let norm = w.column(j).norm();
        if norm < 1e-12 {
            return Err(Error::InvalidChannel(
                "Gaussian draw was rank deficient".to_string(),
            ));
        }
        w.column_mut(j).scale_mut(1.0 / norm);
    }
    let operators: Vec<ComplexMatrix> = (0..k)
        .map(|i| w.rows(i * dout, dout).clone_owned())
        .collect();
    KrausChannel::new(operators)
}

/// Composition `after ∘ before`: the Kraus list of all pairwise products.
pub fn compose(after: &KrausChannel, before: &KrausChannel) -> Result<KrausChannel> {
    if before.dout != after.din {
        return Err(Error::DimensionMismatch {
            expected: after.din,
            actual: before.dout,
        });
    }
    let mut operators = Vec::with_capacity(after.operators.len() * before.operators.len());
    for a in &after.operators {
        for b in &before.operators {
            operators.push(a * b);
        }
    }
    KrausChannel::new(operators)
}

/// Maps every member of the ensemble, keeping the probabilities.
pub fn apply_to_ensemble(ch: &KrausChannel, e: &Ensemble) -> Result<Ensemble> {
    let states = e
        .states()
        .iter()
        .map(|s| apply(ch, s))
        .collect::<Result<Vec<_>>>()?;
    Ensemble::new(e.probs().to_vec(), states)
}
