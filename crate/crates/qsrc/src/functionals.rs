//! Scalar information quantities and inequality reports.
//!
//! Entropic quantities are in bits throughout; the only exception is
//! [`eta`], which is η(x) = −x ln x in nats because the bounds that use
//! it mix bases on purpose: both [`lemma_bound`] and the rate bound in
//! [`theorem_bound_check`] combine a log₂-dimension term with the
//! natural-log η term, and they are implemented verbatim in that mixed
//! form.
//!
//! Relative entropy returns `f64::INFINITY` as a distinguished sentinel
//! when supp(ρ) ⊄ supp(σ); that is a value, not an error.

use crate::linalg::{self, Tolerances};
use crate::states::{ensemble_average, DensityMatrix, Ensemble};
use crate::{Error, Result};

const LN_2: f64 = std::f64::consts::LN_2;

/// One inequality instance: `satisfied ⇔ lhs ≤ rhs + slack tolerance`.
/// The orientation (what lhs/rhs mean) is documented per bound.
#[derive(Debug, Clone, Copy)]
pub struct BoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    pub slack: f64,
}

impl BoundReport {
    pub fn check(lhs: f64, rhs: f64) -> Self {
        let tol = Tolerances::default().bound_slack;
        BoundReport {
            lhs,
            rhs,
            satisfied: lhs <= rhs + tol,
            slack: rhs - lhs,
        }
    }
}

/// Shannon entropy −Σ pᵢ log₂ pᵢ of a probability distribution.
pub fn shannon_entropy(p: &[f64]) -> Result<f64> {
    if p.is_empty() || p.iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidDistribution(
            "entries must be nonnegative and nonempty".to_string(),
        ));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > Tolerances::default().trace_one {
        return Err(Error::InvalidDistribution(format!("sums to {sum}")));
    }
    Ok(p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.log2())
        .sum())
}

/// Von Neumann entropy −Tr ρ log₂ ρ over the clipped spectrum.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    let spec = rho.eig().expect("valid density matrix");
    spec.eigenvalues
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| -l * l.log2())
        .sum()
}

/// Binary entropy H(x) = −x log₂ x − (1−x) log₂(1−x), H(0) = H(1) = 0.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidParameter(format!("H({x}) out of [0,1]")));
    }
    let term = |t: f64| if t > 0.0 { -t * t.log2() } else { 0.0 };
    Ok(term(x) + term(1.0 - x))
}

/// η(x) = −x ln x with η(0) = 0. Natural log, not base 2.
pub fn eta(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidParameter(format!("eta({x}) out of [0,1]")));
    }
    Ok(if x > 0.0 { -x * x.ln() } else { 0.0 })
}

/// Relative entropy S(ρ|σ) = Tr(ρ log₂ ρ − ρ log₂ σ), computed spectrally
/// on the supports. Returns `f64::INFINITY` when an eigenvector of ρ with
/// eigenvalue above the support cutoff leaks more than the tolerated
/// weight outside supp(σ).
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            actual: sigma.dim(),
        });
    }
    let tol = Tolerances::default();
    let rs = rho.eig()?;
    let ss = sigma.eig()?;
    let support: Vec<usize> = (0..ss.dim())
        .filter(|&k| ss.eigenvalues[k] > tol.support_cutoff)
        .collect();

    let mut tr_rho_log_rho = 0.0;
    let mut tr_rho_log_sigma = 0.0;
    for k in 0..rs.dim() {
        let l = rs.eigenvalues[k];
        if l <= tol.support_cutoff {
            continue;
        }
        tr_rho_log_rho += l * l.log2();
        let v = rs.eigenvectors.column(k);
        let mut inside = 0.0;
        for &mu in &support {
            let w = ss.eigenvectors.column(mu);
            let ov = w.dotc(&v).norm_sqr();
            inside += ov;
            tr_rho_log_sigma += l * ov * ss.eigenvalues[mu].log2();
        }
        if 1.0 - inside > tol.support_leak {
            return Ok(f64::INFINITY);
        }
    }
    Ok(tr_rho_log_rho - tr_rho_log_sigma)
}

/// Holevo information χ(E) = S(Σpᵢρᵢ) − Σpᵢ S(ρᵢ) in bits.
///
/// Mathematically nonnegative; round-off down to −1e-9 clamps to 0 and
/// anything lower panics as an implementation bug.
pub fn holevo_information(e: &Ensemble) -> f64 {
    let avg = ensemble_average(e);
    let chi = von_neumann_entropy(&avg)
        - e.iter()
            .map(|(p, rho)| p * von_neumann_entropy(rho))
            .sum::<f64>();
    assert!(
        chi >= -1e-9,
        "Holevo information {chi} below round-off tolerance"
    );
    chi.max(0.0)
}

/// Holevo information as the mean relative entropy Σpᵢ S(ρᵢ|ρ̄) between
/// the components and the average state. Cross-implementation oracle for
/// [`holevo_information`]; the two agree within 1e-8.
pub fn holevo_via_relative_entropy(e: &Ensemble) -> Result<f64> {
    let avg = ensemble_average(e);
    let mut acc = 0.0;
    for (p, rho) in e.iter() {
        if p == 0.0 {
            continue;
        }
        let s = relative_entropy(rho, &avg)?;
        // supp(ρᵢ) ⊆ supp(ρ̄) whenever pᵢ > 0, so the sentinel is unreachable
        assert!(
            s.is_finite(),
            "component support escaped the ensemble average"
        );
        acc += p * s;
    }
    Ok(acc)
}

/// Trace-norm distortion D(ρ,σ) = ‖ρ−σ‖ ∈ [0, 2].
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            actual: sigma.dim(),
        });
    }
    let d = linalg::trace_norm(&(rho.matrix() - sigma.matrix()), true)?;
    Ok(d.clamp(0.0, 2.0))
}

/// Uhlmann fidelity F(ρ₁,ρ₂) = (Tr√(√ρ₁ ρ₂ √ρ₁))² ∈ [0, 1].
pub fn fidelity(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<f64> {
    if rho1.dim() != rho2.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho1.dim(),
            actual: rho2.dim(),
        });
    }
    let r1 = linalg::matrix_sqrt_psd(rho1.matrix())?;
    let inner = &r1 * rho2.matrix() * &r1;
    let spec = linalg::eig_hermitian(&inner)?;
    // the square root amplifies round-off near zero, so clip relative to
    // the top eigenvalue before summing
    let cutoff = 1e-13 * spec.eigenvalues[0].max(0.0);
    let tr: f64 = spec
        .eigenvalues
        .iter()
        .filter(|&&l| l > cutoff)
        .map(|&l| l.sqrt())
        .sum();
    Ok((tr * tr).clamp(0.0, 1.0))
}

/// Fannes-type estimate: |S(ρ)−S(σ)| ≤ ‖ρ−σ‖·log₂(dim) + η(‖ρ−σ‖),
/// applicable for ‖ρ−σ‖ ≤ ½ (returns `None` outside that range).
/// lhs is the entropy difference, rhs the estimate.
pub fn fannes_bound_check(
    rho: &DensityMatrix,
    sigma: &DensityMatrix,
) -> Result<Option<BoundReport>> {
    let t = trace_distance(rho, sigma)?;
    if t > 0.5 {
        return Ok(None);
    }
    let lhs = (von_neumann_entropy(rho) - von_neumann_entropy(sigma)).abs();
    let rhs = t * (rho.dim() as f64).log2() + eta(t)?;
    Ok(Some(BoundReport::check(lhs, rhs)))
}

/// 2[ε·N·log₂ d + η(ε)] for 0 ≤ ε ≤ ½ — the bound on the Holevo-information
/// difference of two block ensembles at mean distortion ε. Mixed bases by
/// construction: log₂ on the dimension term, natural log inside η.
pub fn lemma_bound(epsilon: f64, n: usize, d: usize) -> Result<f64> {
    if !(0.0..=0.5).contains(&epsilon) {
        return Err(Error::InvalidParameter(format!(
            "epsilon {epsilon} outside [0, 1/2]"
        )));
    }
    Ok(2.0 * (epsilon * n as f64 * (d as f64).log2() + eta(epsilon)?))
}

/// Rate lower bound: checks
/// `log_dim_encoded ≥ N·χ − 2[D̄·N·log₂ d + η(D̄)]`.
///
/// lhs is the right-hand bound, rhs the achieved log-dimension, so
/// `satisfied` keeps the report invariant lhs ≤ rhs. Not applicable
/// (returns `None`) when D̄ > ½, where the underlying estimate is out of
/// range.
pub fn theorem_bound_check(
    holevo_per_msg: f64,
    avg_distortion: f64,
    n: usize,
    d: usize,
    log_dim_encoded: f64,
) -> Option<BoundReport> {
    if avg_distortion > 0.5 {
        return None;
    }
    let dd = avg_distortion.max(0.0);
    let correction = 2.0 * (dd * n as f64 * (d as f64).log2() + eta(dd).expect("in range"));
    let lhs = n as f64 * holevo_per_msg - correction;
    Some(BoundReport::check(lhs, log_dim_encoded))
}

/// Entropy of a binary ensemble of pure states with squared overlap
/// `overlap_sq`: H[½(1 + √((p₁−p₂)² + 4p₁p₂·overlap_sq))].
pub fn purified_pair_entropy(p1: f64, p2: f64, overlap_sq: f64) -> Result<f64> {
    if (p1 + p2 - 1.0).abs() > Tolerances::default().trace_one || p1 < 0.0 || p2 < 0.0 {
        return Err(Error::InvalidDistribution(format!(
            "(p1, p2) = ({p1}, {p2})"
        )));
    }
    if !(0.0..=1.0 + 1e-9).contains(&overlap_sq) {
        return Err(Error::InvalidParameter(format!(
            "overlap {overlap_sq} outside [0,1]"
        )));
    }
    let c2 = overlap_sq.clamp(0.0, 1.0);
    let root = ((p1 - p2).powi(2) + 4.0 * p1 * p2 * c2).sqrt();
    binary_entropy((0.5 * (1.0 + root)).clamp(0.0, 1.0))
}

/// Minimal entropy of a purified binary ensemble,
/// S_min = H[½(1 + √((p₁−p₂)² + 4p₁p₂·F(ρ₁,ρ₂)))] — the upper bound on
/// the effective information of a binary source.
pub fn smin_binary(
    p1: f64,
    p2: f64,
    rho1: &DensityMatrix,
    rho2: &DensityMatrix,
) -> Result<f64> {
    let f = fidelity(rho1, rho2)?;
    purified_pair_entropy(p1, p2, f)
}
