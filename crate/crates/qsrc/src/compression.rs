//! Typical-subspace compression protocols and their bound harness.
//!
//! The blind protocol projects N-fold blocks onto the span of the K
//! largest product eigenvalues of ρ̄^⊗N (ρ̄ the source average), sending
//! failures to a fixed in-subspace junk state, and the receiver embeds
//! the result back isometrically. The non-blind protocol first replaces
//! each signal state by a purification (pairwise-optimal for binary
//! sources), runs the same subspace coding on the purified product, and
//! lets the receiver trace out the ancillas.
//!
//! Retained sets are found combinatorially over the single-copy
//! spectrum: product eigenvalues are constant on type classes (multisets
//! of eigenvalue indices), so classes are enumerated best-first and only
//! the boundary class is split, in lexicographic multi-index order. The
//! d^N-dimensional block matrix is never materialized for this.
//!
//! Every protocol run is summarized in a [`ProtocolRecord`] whose rate
//! accounting follows `rate · N = log₂(retained size)` exactly, and is
//! checked against the lower bound
//! `log dim ≥ N·χ − 2[D̄·N·log₂d + η(D̄)]` whenever D̄ ≤ ½.

use crate::channels::KrausChannel;
use crate::functionals::{self, BoundReport};
use crate::linalg::{self, ComplexMatrix, HermitianSpectrum};
use crate::states::{
    ensemble_average, optimal_purification_pair, purify_to, sample_sequence, BlockState,
    DensityMatrix, Ensemble, PureState,
};
use crate::{Error, Result};
use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

/// Hard ceiling on the number of retained multi-indices.
pub const RETAINED_CAP: usize = 1 << 20;
/// Sequence count up to which averages are enumerated exactly.
pub const EXACT_BUDGET: usize = 4096;

pub type MultiIndex = Vec<u16>;

/// Retained eigen-multi-index set of the product spectrum of ρ^⊗N.
///
/// `retained` is ordered by descending product eigenvalue with ties in
/// lexicographic order, so `retained[0]` is the junk index: the retained
/// multi-index of maximal product eigenvalue.
#[derive(Debug, Clone)]
pub struct TypicalSubspace {
    pub n: usize,
    pub base: HermitianSpectrum,
    pub retained: Vec<MultiIndex>,
    pub retained_weight: f64,
    pub junk: MultiIndex,
}

impl TypicalSubspace {
    pub fn retained_len(&self) -> usize {
        self.retained.len()
    }

    /// log₂ of the retained subspace dimension.
    pub fn log_dim(&self) -> f64 {
        (self.retained.len() as f64).log2()
    }

    pub fn base_dim(&self) -> usize {
        self.base.dim()
    }
}

// ---------------------------------------------------------------------
// type-class enumeration
// ---------------------------------------------------------------------

/// Lexicographic multiset permutations, starting from the sorted
/// arrangement.
struct ClassMembers {
    current: Option<MultiIndex>,
}

impl ClassMembers {
    fn new(counts: &[u32]) -> Self {
        let mut arrangement = Vec::new();
        for (i, &c) in counts.iter().enumerate() {
            arrangement.extend(std::iter::repeat(i as u16).take(c as usize));
        }
        ClassMembers {
            current: Some(arrangement),
        }
    }

    fn peek(&self) -> Option<&MultiIndex> {
        self.current.as_ref()
    }

    fn advance(&mut self) {
        if let Some(a) = &mut self.current {
            if !next_multiset_permutation(a) {
                self.current = None;
            }
        }
    }
}

fn next_multiset_permutation(a: &mut [u16]) -> bool {
    let n = a.len();
    if n <= 1 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && a[i - 1] >= a[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while a[j] <= a[i - 1] {
        j -= 1;
    }
    a.swap(i - 1, j);
    a[i..].reverse();
    true
}

/// Members of a type class: N!/(∏ cᵢ!), saturated at `cap`.
fn class_count_capped(counts: &[u32], cap: u64) -> u64 {
    let mut total: u64 = 1;
    let mut n_left: u64 = counts.iter().map(|&c| c as u64).sum();
    for &c in counts {
        if c == 0 {
            continue;
        }
        let c = c as u64;
        let mut b: u64 = 1;
        for i in 1..=c {
            // C(n_left - c + i, i) stays exact at every step
            b = match b.checked_mul(n_left - c + i) {
                Some(v) => v / i,
                None => return cap,
            };
            if b >= cap {
                return cap;
            }
        }
        total = match total.checked_mul(b) {
            Some(v) => v,
            None => return cap,
        };
        if total >= cap {
            return cap;
        }
        n_left -= c;
    }
    total
}

fn class_product(counts: &[u32], eigenvalues: &[f64]) -> f64 {
    let mut p = 1.0;
    for (i, &c) in counts.iter().enumerate() {
        if c > 0 {
            p *= eigenvalues[i].max(0.0).powi(c as i32);
        }
    }
    p
}

fn class_log_key(counts: &[u32], log_vals: &[f64]) -> f64 {
    let mut l = 0.0;
    for (i, &c) in counts.iter().enumerate() {
        if c > 0 {
            if log_vals[i] == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            l += c as f64 * log_vals[i];
        }
    }
    l
}

#[derive(PartialEq)]
struct HeapClass {
    key: f64,
    counts: Vec<u32>,
}

impl Eq for HeapClass {}

impl Ord for HeapClass {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // max-heap on key; ties resolved by counts for determinism
        self.key
            .partial_cmp(&other.key)
            .unwrap()
            .then_with(|| other.counts.cmp(&self.counts))
    }
}

impl PartialOrd for HeapClass {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Best-first stream of type classes in non-increasing product order.
///
/// Classes are composition vectors over the descending single-copy
/// spectrum; neighbours move one unit of multiplicity to the next
/// smaller eigenvalue, which only decreases the product.
struct ClassStream {
    log_vals: Vec<f64>,
    heap: BinaryHeap<HeapClass>,
    visited: HashSet<Vec<u32>>,
}

impl ClassStream {
    fn new(eigenvalues: &[f64], n: usize) -> Self {
        let log_vals: Vec<f64> = eigenvalues
            .iter()
            .map(|&l| if l > 0.0 { l.ln() } else { f64::NEG_INFINITY })
            .collect();
        let mut start = vec![0u32; eigenvalues.len()];
        start[0] = n as u32;
        let key = class_log_key(&start, &log_vals);
        let mut heap = BinaryHeap::new();
        let mut visited = HashSet::new();
        visited.insert(start.clone());
        heap.push(HeapClass { key, counts: start });
        ClassStream {
            log_vals,
            heap,
            visited,
        }
    }

    fn pop(&mut self) -> Option<(f64, Vec<u32>)> {
        let top = self.heap.pop()?;
        let counts = top.counts;
        for i in 0..counts.len().saturating_sub(1) {
            if counts[i] > 0 {
                let mut next = counts.clone();
                next[i] -= 1;
                next[i + 1] += 1;
                if self.visited.insert(next.clone()) {
                    let key = class_log_key(&next, &self.log_vals);
                    self.heap.push(HeapClass { key, counts: next });
                }
            }
        }
        Some((top.key, counts))
    }

    /// Pops the next group of classes with (numerically) equal product.
    fn pop_tie_group(&mut self) -> Option<Vec<(f64, Vec<u32>)>> {
        let first = self.pop()?;
        let key = first.0;
        let mut group = vec![first];
        loop {
            match self.heap.peek() {
                Some(top) if keys_tie(top.key, key) => {
                    let nxt = self.pop().unwrap();
                    group.push(nxt);
                }
                _ => break,
            }
        }
        Some(group)
    }
}

fn keys_tie(a: f64, b: f64) -> bool {
    if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
        return true;
    }
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

/// Merges the members of tied classes in lexicographic order, emitting at
/// most `take` of them along with their per-class products.
fn merge_group_lex(
    group: &[(f64, Vec<u32>)],
    eigenvalues: &[f64],
    take: usize,
    out: &mut Vec<MultiIndex>,
    weight: &mut f64,
) {
    let products: Vec<f64> = group
        .iter()
        .map(|(_, c)| class_product(c, eigenvalues))
        .collect();
    let mut iters: Vec<ClassMembers> = group.iter().map(|(_, c)| ClassMembers::new(c)).collect();
    let mut heap: BinaryHeap<Reverse<(MultiIndex, usize)>> = BinaryHeap::new();
    for (idx, it) in iters.iter().enumerate() {
        if let Some(m) = it.peek() {
            heap.push(Reverse((m.clone(), idx)));
        }
    }
    let mut emitted = 0;
    while emitted < take {
        let Some(Reverse((m, idx))) = heap.pop() else {
            break;
        };
        out.push(m);
        *weight += products[idx];
        emitted += 1;
        iters[idx].advance();
        if let Some(next) = iters[idx].peek() {
            heap.push(Reverse((next.clone(), idx)));
        }
    }
}

/// Retains the K largest product eigenvalues of ρ^⊗N, ties broken in
/// lexicographic multi-index order.
pub fn product_spectrum_topk(rho: &DensityMatrix, n: usize, k: usize) -> Result<TypicalSubspace> {
    if n == 0 {
        return Err(Error::InvalidParameter("block length 0".to_string()));
    }
    let base = rho.eig()?;
    let d = base.dim();
    let total = (d as u128).checked_pow(n as u32);
    if k == 0 || total.map(|t| (k as u128) > t).unwrap_or(false) {
        return Err(Error::InvalidParameter(format!(
            "K = {k} outside 1..=dim^N"
        )));
    }
    if k > RETAINED_CAP {
        return Err(Error::CapExceeded {
            what: "retained set",
            needed: k,
            cap: RETAINED_CAP,
        });
    }

    let mut stream = ClassStream::new(&base.eigenvalues, n);
    let mut retained: Vec<MultiIndex> = Vec::with_capacity(k);
    let mut weight = 0.0;
    while retained.len() < k {
        let Some(group) = stream.pop_tie_group() else {
            break;
        };
        let remaining = k - retained.len();
        merge_group_lex(&group, &base.eigenvalues, remaining, &mut retained, &mut weight);
    }
    let junk = retained[0].clone();
    Ok(TypicalSubspace {
        n,
        base,
        retained,
        retained_weight: weight.min(1.0 + 1e-9),
        junk,
    })
}

/// δ-typical window: retains multi-indices whose product eigenvalue λ
/// satisfies 2^{−N(S+δ)} ≤ λ ≤ 2^{−N(S−δ)}, S the von Neumann entropy of
/// ρ. Whole type classes only; falls back to top-1 when the window is
/// empty.
pub fn product_spectrum_delta(
    rho: &DensityMatrix,
    n: usize,
    delta: f64,
) -> Result<TypicalSubspace> {
    if n == 0 {
        return Err(Error::InvalidParameter("block length 0".to_string()));
    }
    if delta <= 0.0 {
        return Err(Error::InvalidParameter(format!("delta {delta} must be > 0")));
    }
    let s = functionals::von_neumann_entropy(rho);
    let lo = (-(n as f64) * (s + delta)).exp2();
    let hi = (-(n as f64) * (s - delta)).exp2();
    let base = rho.eig()?;

    let mut stream = ClassStream::new(&base.eigenvalues, n);
    let mut retained: Vec<MultiIndex> = Vec::new();
    let mut weight = 0.0;
    while let Some(group) = stream.pop_tie_group() {
        let product = class_product(&group[0].1, &base.eigenvalues);
        if product < lo * (1.0 - 1e-12) {
            break; // stream is non-increasing, nothing further qualifies
        }
        if product > hi * (1.0 + 1e-12) {
            continue;
        }
        let size: u64 = group
            .iter()
            .map(|(_, c)| class_count_capped(c, RETAINED_CAP as u64 + 1))
            .sum();
        if retained.len() as u64 + size > RETAINED_CAP as u64 {
            return Err(Error::CapExceeded {
                what: "retained set",
                needed: (retained.len() as u64 + size) as usize,
                cap: RETAINED_CAP,
            });
        }
        merge_group_lex(
            &group,
            &base.eigenvalues,
            size as usize,
            &mut retained,
            &mut weight,
        );
    }
    if retained.is_empty() {
        return product_spectrum_topk(rho, n, 1);
    }
    let junk = retained[0].clone();
    Ok(TypicalSubspace {
        n,
        base,
        retained,
        retained_weight: weight.min(1.0 + 1e-9),
        junk,
    })
}

// ---------------------------------------------------------------------
// captured weight and the SJ codec
// ---------------------------------------------------------------------

/// ⟨e_a|ρ|e_a⟩ for every eigenvector of the base spectrum.
fn site_diag_table(base: &HermitianSpectrum, rho: &DensityMatrix) -> Vec<f64> {
    (0..base.dim())
        .map(|a| {
            let v = base.eigenvectors.column(a);
            let w = rho.matrix() * v;
            v.dotc(&w).re
        })
        .collect()
}

/// ⟨e_a|ψ⟩ for every eigenvector of the base spectrum.
fn site_overlap_table(base: &HermitianSpectrum, psi: &PureState) -> Vec<Complex64> {
    (0..base.dim())
        .map(|a| base.eigenvectors.column(a).dotc(psi.amplitudes()))
        .collect()
}

/// V† ρ V: the factor state in the eigenbasis of the base spectrum.
fn site_matrix(base: &HermitianSpectrum, rho: &DensityMatrix) -> ComplexMatrix {
    base.eigenvectors.adjoint() * rho.matrix() * &base.eigenvectors
}

/// Tr(Π ρ_block) for a mixed product block (or a dense block state),
/// evaluated without materializing the projector.
pub fn captured_weight(ts: &TypicalSubspace, block: &BlockState) -> Result<f64> {
    match block {
        BlockState::Product(factors) => {
            if factors.len() != ts.n {
                return Err(Error::DimensionMismatch {
                    expected: ts.n,
                    actual: factors.len(),
                });
            }
            if factors.iter().any(|f| f.dim() != ts.base_dim()) {
                return Err(Error::DimensionMismatch {
                    expected: ts.base_dim(),
                    actual: factors.iter().map(|f| f.dim()).find(|&d| d != ts.base_dim()).unwrap(),
                });
            }
            let tables: Vec<Vec<f64>> = factors
                .iter()
                .map(|f| site_diag_table(&ts.base, f))
                .collect();
            Ok(ts
                .retained
                .iter()
                .map(|m| {
                    m.iter()
                        .enumerate()
                        .map(|(j, &a)| tables[j][a as usize])
                        .product::<f64>()
                })
                .sum())
        }
        BlockState::Dense(rho) => {
            let dim = ts.base_dim().pow(ts.n as u32);
            if rho.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: rho.dim(),
                });
            }
            let mut w = 0.0;
            for m in &ts.retained {
                let e = product_basis_vector(&ts.base, m);
                let re = rho.matrix() * &e;
                w += e.dotc(&re).re;
            }
            Ok(w)
        }
    }
}

/// Tr(Π |Ψ⟩⟨Ψ|) for a pure product block.
pub fn captured_weight_pure(ts: &TypicalSubspace, factors: &[PureState]) -> Result<f64> {
    if factors.len() != ts.n {
        return Err(Error::DimensionMismatch {
            expected: ts.n,
            actual: factors.len(),
        });
    }
    let tables: Vec<Vec<Complex64>> = factors
        .iter()
        .map(|f| site_overlap_table(&ts.base, f))
        .collect();
    Ok(ts
        .retained
        .iter()
        .map(|m| {
            m.iter()
                .enumerate()
                .map(|(j, &a)| tables[j][a as usize].norm_sqr())
                .product::<f64>()
        })
        .sum())
}

/// Dense product eigenvector E_m = ⊗_j e_{m_j}.
fn product_basis_vector(base: &HermitianSpectrum, m: &[u16]) -> DVector<Complex64> {
    let mut v = DVector::from_element(1, Complex64::new(1.0, 0.0));
    for &a in m {
        let col = base.eigenvectors.column(a as usize).clone_owned();
        let mut next = DVector::zeros(v.len() * col.len());
        for (i, &x) in v.iter().enumerate() {
            for (q, &y) in col.iter().enumerate() {
                next[i * col.len() + q] = x * y;
            }
        }
        v = next;
    }
    v
}

/// ΠρΠ + (1 − Tr Πρ)·|e_junk⟩⟨e_junk| in retained-basis coordinates.
pub fn sj_encode(
    ts: &TypicalSubspace,
    block: &BlockState,
    dense_cap: usize,
) -> Result<DensityMatrix> {
    let k = ts.retained.len();
    if k > dense_cap {
        return Err(Error::CapExceeded {
            what: "encoded state",
            needed: k,
            cap: dense_cap,
        });
    }
    let mut enc = ComplexMatrix::zeros(k, k);
    match block {
        BlockState::Product(factors) => {
            if factors.len() != ts.n {
                return Err(Error::DimensionMismatch {
                    expected: ts.n,
                    actual: factors.len(),
                });
            }
            let mats: Vec<ComplexMatrix> = factors
                .iter()
                .map(|f| site_matrix(&ts.base, f))
                .collect();
            for (r, mr) in ts.retained.iter().enumerate() {
                for (c, mc) in ts.retained.iter().enumerate().skip(r) {
                    let mut val = Complex64::new(1.0, 0.0);
                    for j in 0..ts.n {
                        val *= mats[j][(mr[j] as usize, mc[j] as usize)];
                    }
                    enc[(r, c)] = val;
                    if c != r {
                        enc[(c, r)] = val.conj();
                    }
                }
            }
        }
        BlockState::Dense(rho) => {
            let basis: Vec<DVector<Complex64>> = ts
                .retained
                .iter()
                .map(|m| product_basis_vector(&ts.base, m))
                .collect();
            for r in 0..k {
                let tmp = rho.matrix() * &basis[r];
                for c in 0..k {
                    enc[(c, r)] = basis[c].dotc(&tmp);
                }
            }
        }
    }
    let captured = enc.trace().re;
    enc[(0, 0)] += Complex64::new((1.0 - captured).max(0.0), 0.0);
    Ok(DensityMatrix::from_valid(enc))
}

/// Encoded state embedded back into the block space, kept in retained
/// coordinates until densification is requested.
#[derive(Debug, Clone)]
pub struct DecodedBlock<'a> {
    pub ts: &'a TypicalSubspace,
    pub coeffs: ComplexMatrix,
}

impl DecodedBlock<'_> {
    pub fn trace(&self) -> f64 {
        self.coeffs.trace().re
    }

    /// Conceptual dimension dim^N of the embedding space.
    pub fn block_dim(&self) -> usize {
        self.ts.base_dim().pow(self.ts.n as u32)
    }

    /// Materializes Σ enc[m,m'] |E_m⟩⟨E_m'| densely.
    pub fn to_dense(&self, dense_cap: usize) -> Result<DensityMatrix> {
        let dim = self.block_dim();
        if dim > dense_cap {
            return Err(Error::CapExceeded {
                what: "decoded block state",
                needed: dim,
                cap: dense_cap,
            });
        }
        let k = self.ts.retained.len();
        let mut b = ComplexMatrix::zeros(dim, k);
        for (c, m) in self.ts.retained.iter().enumerate() {
            b.set_column(c, &product_basis_vector(&self.ts.base, m));
        }
        Ok(DensityMatrix::from_valid(&b * &self.coeffs * b.adjoint()))
    }
}

/// Isometric embedding of the retained-basis representation into the
/// block space. Trace preserving.
pub fn sj_decode<'a>(ts: &'a TypicalSubspace, encoded: &DensityMatrix) -> Result<DecodedBlock<'a>> {
    if encoded.dim() != ts.retained.len() {
        return Err(Error::DimensionMismatch {
            expected: ts.retained.len(),
            actual: encoded.dim(),
        });
    }
    Ok(DecodedBlock {
        ts,
        coeffs: encoded.matrix().clone(),
    })
}

/// The SJ encoding map ρ ↦ ΠρΠ + Tr((I−Π)ρ)|e_junk⟩⟨e_junk| materialized
/// as an explicit Kraus channel from the block space into retained
/// coordinates. Intended for small N; exercises that the encoder is a
/// valid quantum operation.
pub fn sj_encoder_channel(ts: &TypicalSubspace, dense_cap: usize) -> Result<KrausChannel> {
    let dim = ts.base_dim().pow(ts.n as u32);
    if dim > dense_cap {
        return Err(Error::CapExceeded {
            what: "encoder channel",
            needed: dim,
            cap: dense_cap,
        });
    }
    let k = ts.retained.len();
    let mut b = ComplexMatrix::zeros(dim, k);
    for (c, m) in ts.retained.iter().enumerate() {
        b.set_column(c, &product_basis_vector(&ts.base, m));
    }
    let mut ops = vec![b.adjoint()]; // Π followed by the basis change
    // complement basis vectors funnel into the junk state
    let mut collected: Vec<DVector<Complex64>> = (0..k).map(|c| b.column(c).clone_owned()).collect();
    for t in 0..dim {
        let mut cand = DVector::<Complex64>::zeros(dim);
        cand[t] = Complex64::new(1.0, 0.0);
        for g in &collected {
            let ov = g.dotc(&cand);
            cand -= g * ov;
        }
        let norm = cand.norm();
        if norm > 1e-8 {
            cand /= Complex64::new(norm, 0.0);
            let mut op = ComplexMatrix::zeros(k, dim);
            // junk sits at retained position 0
            for col in 0..dim {
                op[(0, col)] = cand[col].conj();
            }
            ops.push(op);
            collected.push(cand);
        }
    }
    KrausChannel::new(ops)
}

/// Exact ‖|Ψ⟩⟨Ψ| − decode(encode(Ψ))‖ for a pure product block, from the
/// Gram matrix of {Ψ, ΠΨ, e_junk} — no dense block matrices.
pub fn pure_block_distortion(ts: &TypicalSubspace, factors: &[PureState]) -> Result<f64> {
    if factors.len() != ts.n {
        return Err(Error::DimensionMismatch {
            expected: ts.n,
            actual: factors.len(),
        });
    }
    let tables: Vec<Vec<Complex64>> = factors
        .iter()
        .map(|f| site_overlap_table(&ts.base, f))
        .collect();
    let (w, c_junk) = capture_and_junk(ts, &tables, |j, a| tables[j][a]);
    Ok(gram_distortion(w, c_junk))
}

/// Captured weight w = Σ_{m∈R} |c_m|² and the junk coefficient
/// c_junk = ⟨E_junk|Ψ⟩ from per-site overlap lookups.
fn capture_and_junk(
    ts: &TypicalSubspace,
    tables: &[Vec<Complex64>],
    lookup: impl Fn(usize, usize) -> Complex64,
) -> (f64, Complex64) {
    let _ = tables;
    let w: f64 = ts
        .retained
        .iter()
        .map(|m| {
            m.iter()
                .enumerate()
                .map(|(j, &a)| lookup(j, a as usize).norm_sqr())
                .product::<f64>()
        })
        .sum();
    let mut c_junk = Complex64::new(1.0, 0.0);
    for (j, &a) in ts.junk.iter().enumerate() {
        c_junk *= lookup(j, a as usize);
    }
    (w, c_junk)
}

/// Trace norm of Δ = |Ψ⟩⟨Ψ| − |φ⟩⟨φ| − (1−w)|e⟩⟨e| on span{Ψ, φ, e},
/// where φ = ΠΨ, w = ⟨Ψ|Π|Ψ⟩ and c = ⟨e|Ψ⟩. Eigenvalues come from the
/// 3×3 problem G^{1/2} M G^{1/2} with the Gram matrix G of the span.
fn gram_distortion(w: f64, c_junk: Complex64) -> f64 {
    let w = w.clamp(0.0, 1.0);
    let c = Complex64::new;
    let cj = c_junk;
    let g = ComplexMatrix::from_row_slice(
        3,
        3,
        &[
            c(1.0, 0.0),
            c(w, 0.0),
            cj.conj(),
            c(w, 0.0),
            c(w, 0.0),
            cj.conj(),
            cj,
            cj,
            c(1.0, 0.0),
        ],
    );
    let m = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![
        c(1.0, 0.0),
        c(-1.0, 0.0),
        c(-(1.0 - w), 0.0),
    ]));
    let gs = linalg::eig_hermitian(&g).expect("gram matrix is Hermitian");
    // near-zero Gram eigenvalues are round-off from linearly dependent
    // span vectors; the square root would amplify them
    let cutoff = 1e-13 * gs.eigenvalues[0].max(0.0);
    let g_half = gs.map_eigenvalues(|l| if l > cutoff { l.sqrt() } else { 0.0 });
    let core = &g_half * m * &g_half;
    let spec = linalg::eig_hermitian(&core).expect("core is Hermitian");
    spec.eigenvalues
        .iter()
        .map(|l| l.abs())
        .sum::<f64>()
        .clamp(0.0, 2.0)
}

// ---------------------------------------------------------------------
// protocol runners
// ---------------------------------------------------------------------

/// Retained-set construction mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SubspaceMode {
    /// Top-K with K = ⌈2^{N·rate}⌉; rate is the independent variable.
    TopK,
    /// δ-typical eigenvalue window.
    Delta(f64),
}

/// How the distortion average is estimated.
#[derive(Debug, Clone, Copy)]
pub enum Estimation {
    Exact,
    MonteCarlo { seed: u64, samples: usize },
    /// Exact when |E|^N fits the exact budget, Monte Carlo otherwise.
    Auto { seed: u64, samples: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimationUsed {
    Exact,
    MonteCarlo { seed: u64, samples: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolKind {
    BlindSj,
    ComposedPurified,
}

impl std::fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProtocolKind::BlindSj => write!(f, "blind_sj"),
            ProtocolKind::ComposedPurified => write!(f, "composed"),
        }
    }
}

/// One protocol execution.
#[derive(Debug, Clone)]
pub struct ProtocolRecord {
    pub kind: ProtocolKind,
    /// Block length (N messages for blind coding, k for composed).
    pub n: usize,
    /// Source dimension per message.
    pub d: usize,
    /// Qubits per message: log_dim_encoded / n.
    pub rate: f64,
    pub log_dim_encoded: f64,
    /// Average trace-norm distortion D̄ between source and output blocks.
    pub avg_distortion: f64,
    /// For the composed protocol: D̄ at the purified level, which upper
    /// bounds `avg_distortion`.
    pub purified_distortion: Option<f64>,
    pub n_sequences: usize,
    pub estimation: EstimationUsed,
    /// Standard error of a Monte Carlo estimate.
    pub mc_std_err: Option<f64>,
    /// Rate bound check versus the source Holevo information; `None`
    /// when D̄ > ½.
    pub bound: Option<BoundReport>,
}

fn top_k_from_rate(n: usize, rate: f64, dim: usize) -> Result<usize> {
    if !(0.0..=64.0).contains(&rate) || !rate.is_finite() {
        return Err(Error::InvalidParameter(format!("rate {rate} out of range")));
    }
    let max_rate = (dim as f64).log2();
    if rate > max_rate + 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "rate {rate} exceeds log2(dim) = {max_rate}"
        )));
    }
    let k_f = (n as f64 * rate).exp2().ceil();
    let total = (dim as u128).checked_pow(n as u32);
    let mut k = if k_f >= RETAINED_CAP as f64 * 2.0 {
        usize::MAX
    } else {
        k_f as usize
    };
    if let Some(t) = total {
        if (k as u128) > t {
            k = t as usize; // rate at the top of the range: full space
        }
    }
    if k > RETAINED_CAP {
        return Err(Error::CapExceeded {
            what: "retained set",
            needed: k,
            cap: RETAINED_CAP,
        });
    }
    Ok(k.max(1))
}

/// Per-sequence evaluation plan: (weight, sequence) pairs.
fn sequence_plan(
    e: &Ensemble,
    n: usize,
    est: Estimation,
) -> Result<(Vec<(f64, Vec<usize>)>, EstimationUsed)> {
    let members = e.len();
    let total = (members as u128).checked_pow(n as u32);
    let exact_possible = total.map(|t| t <= EXACT_BUDGET as u128).unwrap_or(false);
    let resolved = match est {
        Estimation::Exact => {
            if !exact_possible {
                return Err(Error::CapExceeded {
                    what: "exact sequence enumeration",
                    needed: total.map(|t| t.min(usize::MAX as u128) as usize).unwrap_or(usize::MAX),
                    cap: EXACT_BUDGET,
                });
            }
            EstimationUsed::Exact
        }
        Estimation::MonteCarlo { seed, samples } => EstimationUsed::MonteCarlo { seed, samples },
        Estimation::Auto { seed, samples } => {
            if exact_possible {
                EstimationUsed::Exact
            } else {
                EstimationUsed::MonteCarlo { seed, samples }
            }
        }
    };
    let plan = match resolved {
        EstimationUsed::Exact => {
            let total = total.unwrap() as usize;
            let mut plan = Vec::with_capacity(total);
            let mut seq = vec![0usize; n];
            loop {
                let w: f64 = seq.iter().map(|&i| e.prob(i)).product();
                plan.push((w, seq.clone()));
                // mixed-radix increment, last position fastest
                let mut pos = n;
                loop {
                    if pos == 0 {
                        break;
                    }
                    pos -= 1;
                    seq[pos] += 1;
                    if seq[pos] < members {
                        break;
                    }
                    seq[pos] = 0;
                }
                if seq.iter().all(|&x| x == 0) {
                    break;
                }
            }
            plan
        }
        EstimationUsed::MonteCarlo { seed, samples } => {
            if samples == 0 {
                return Err(Error::InvalidParameter("0 Monte Carlo samples".to_string()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = 1.0 / samples as f64;
            (0..samples)
                .map(|_| (w, sample_sequence(e, n, &mut rng).0))
                .collect()
        }
    };
    Ok((plan, resolved))
}

fn weighted_average(
    plan: &[(f64, Vec<usize>)],
    used: EstimationUsed,
    values: &[f64],
) -> (f64, Option<f64>) {
    let mean: f64 = plan
        .iter()
        .zip(values)
        .map(|((w, _), &v)| w * v)
        .sum();
    let se = match used {
        EstimationUsed::Exact => None,
        EstimationUsed::MonteCarlo { samples, .. } => {
            let m = samples as f64;
            let var: f64 =
                values.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0).max(1.0);
            Some((var / m).sqrt())
        }
    };
    (mean, se)
}

/// Blind Schumacher–Jozsa protocol on N-fold blocks at the given rate.
///
/// Pure-state sources use the rank-≤3 Gram path for per-sequence
/// distortion; mixed sources go through dense encode/decode and are
/// gated by `dense_cap` on dim^N.
pub fn run_blind_sj(
    e: &Ensemble,
    n: usize,
    rate: f64,
    mode: SubspaceMode,
    est: Estimation,
    dense_cap: usize,
) -> Result<ProtocolRecord> {
    if n == 0 {
        return Err(Error::InvalidParameter("block length 0".to_string()));
    }
    let d = e.dim();
    let avg = ensemble_average(e);
    let ts = match mode {
        SubspaceMode::TopK => {
            let k = top_k_from_rate(n, rate, d)?;
            product_spectrum_topk(&avg, n, k)?
        }
        SubspaceMode::Delta(delta) => product_spectrum_delta(&avg, n, delta)?,
    };
    let log_dim = ts.log_dim();

    // pure-state fast path when every member is pure
    let mut pure_members: Option<Vec<PureState>> = Some(Vec::new());
    for s in e.states() {
        let spec = s.eig()?;
        if spec.eigenvalues[0] >= 1.0 - 1e-9 {
            if let Some(v) = pure_members.as_mut() {
                let col = spec.eigenvectors.column(0).clone_owned();
                v.push(PureState::new(col.normalize())?);
            }
        } else {
            pure_members = None;
            break;
        }
    }

    let (plan, used) = sequence_plan(e, n, est)?;
    let distortions: Vec<f64> = match &pure_members {
        Some(psis) => {
            let tables: Vec<Vec<Complex64>> = psis
                .iter()
                .map(|p| site_overlap_table(&ts.base, p))
                .collect();
            plan.par_iter()
                .map(|(_, seq)| {
                    let (w, cj) = capture_and_junk(&ts, &tables, |j, a| tables[seq[j]][a]);
                    gram_distortion(w, cj)
                })
                .collect()
        }
        None => {
            let dim = d
                .checked_pow(n as u32)
                .ok_or(Error::CapExceeded {
                    what: "dense block space",
                    needed: usize::MAX,
                    cap: dense_cap,
                })?;
            if dim > dense_cap {
                return Err(Error::CapExceeded {
                    what: "dense block space",
                    needed: dim,
                    cap: dense_cap,
                });
            }
            plan.par_iter()
                .map(|(_, seq)| -> Result<f64> {
                    let factors: Vec<DensityMatrix> =
                        seq.iter().map(|&i| e.state(i).clone()).collect();
                    let block = BlockState::Product(factors);
                    let enc = sj_encode(&ts, &block, dense_cap)?;
                    let dec = sj_decode(&ts, &enc)?.to_dense(dense_cap)?;
                    functionals::trace_distance(&block.to_dense(dense_cap)?, &dec)
                })
                .collect::<Result<Vec<f64>>>()?
        }
    };
    let (d_bar, se) = weighted_average(&plan, used, &distortions);
    let chi = functionals::holevo_information(e);
    Ok(ProtocolRecord {
        kind: ProtocolKind::BlindSj,
        n,
        d,
        rate: log_dim / n as f64,
        log_dim_encoded: log_dim,
        avg_distortion: d_bar,
        purified_distortion: None,
        n_sequences: plan.len(),
        estimation: used,
        mc_std_err: se,
        bound: functionals::theorem_bound_check(chi, d_bar, n, d, log_dim),
    })
}

/// Composed non-blind protocol: purify each message, run the SJ stage on
/// the k-fold purified product (pure-block fast path), then trace out the
/// ancillas on the receiver side.
///
/// `avg_distortion` is measured between original mixed blocks and the
/// final traced states; the purified-level distortion is recorded
/// alongside and upper-bounds it. The traced distortion is computed
/// densely when d^k fits `dense_cap`; for binary ensembles with disjoint
/// supports and non-degenerate probabilities the two levels coincide
/// exactly (orthogonal purifications make every sequence either fully
/// captured or fully missed, with the junk block disjoint from any missed
/// block), which keeps large k feasible.
pub fn run_composed(
    e: &Ensemble,
    k: usize,
    rate: f64,
    est: Estimation,
    dense_cap: usize,
) -> Result<ProtocolRecord> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".to_string()));
    }
    let d = e.dim();

    // aligned purifications on a shared ancilla
    let psis: Vec<PureState> = if e.len() == 2 {
        let (a, b) = optimal_purification_pair(e.state(0), e.state(1))?;
        vec![a, b]
    } else {
        let ranks: Vec<usize> = e
            .states()
            .iter()
            .map(|s| s.rank())
            .collect::<Result<Vec<_>>>()?;
        let a = ranks.into_iter().max().unwrap().max(1);
        e.states()
            .iter()
            .map(|s| purify_to(s, a))
            .collect::<Result<Vec<_>>>()?
    };
    let anc = psis[0].dim() / d;
    let purified = Ensemble::of_pure_states(e.probs().to_vec(), psis.clone())?;
    let rho_tilde = ensemble_average(&purified);

    let kk = top_k_from_rate(k, rate, rho_tilde.dim())?;
    let ts = product_spectrum_topk(&rho_tilde, k, kk)?;
    let log_dim = ts.log_dim();

    let tables: Vec<Vec<Complex64>> = psis
        .iter()
        .map(|p| site_overlap_table(&ts.base, p))
        .collect();

    // structural shortcut: orthogonal purifications with a non-degenerate
    // purified spectrum make traced and purified distortion equal
    let disjoint_shortcut = e.len() == 2
        && functionals::fidelity(e.state(0), e.state(1))? < 1e-10
        && (e.prob(0) - e.prob(1)).abs() > 1e-9;
    let dense_ok = d
        .checked_pow(k as u32)
        .map(|dk| {
            dk <= dense_cap
                && anc
                    .checked_pow(k as u32)
                    .map(|ak| dk.saturating_mul(ak) <= (1 << 22))
                    .unwrap_or(false)
        })
        .unwrap_or(false);
    if !dense_ok && !disjoint_shortcut {
        return Err(Error::CapExceeded {
            what: "composed traced states",
            needed: d.checked_pow(k as u32).unwrap_or(usize::MAX),
            cap: dense_cap,
        });
    }

    // reshaped eigenvectors W_mu (d x anc) for the dense traced route
    let reshapes: Vec<ComplexMatrix> = (0..ts.base_dim())
        .map(|mu| {
            let col = ts.base.eigenvectors.column(mu);
            ComplexMatrix::from_fn(d, anc, |q, al| col[q * anc + al])
        })
        .collect();

    let (plan, used) = sequence_plan(e, k, est)?;
    let pairs: Vec<(f64, f64)> = plan
        .par_iter()
        .map(|(_, seq)| -> Result<(f64, f64)> {
            let (w, cj) = capture_and_junk(&ts, &tables, |j, a| tables[seq[j]][a]);
            let pure_d = gram_distortion(w, cj);
            let traced_d = if dense_ok {
                traced_distortion_dense(&ts, e, seq, &tables, &reshapes, w)?
            } else {
                pure_d // disjoint shortcut: proven equal
            };
            debug_assert!(traced_d <= pure_d + 1e-8);
            Ok((traced_d, pure_d))
        })
        .collect::<Result<Vec<_>>>()?;
    let traced: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let pure_level: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (d_bar, se) = weighted_average(&plan, used, &traced);
    let (d_pure, _) = weighted_average(&plan, used, &pure_level);

    let chi = functionals::holevo_information(e);
    Ok(ProtocolRecord {
        kind: ProtocolKind::ComposedPurified,
        n: k,
        d,
        rate: log_dim / k as f64,
        log_dim_encoded: log_dim,
        avg_distortion: d_bar,
        purified_distortion: Some(d_pure),
        n_sequences: plan.len(),
        estimation: used,
        mc_std_err: se,
        bound: functionals::theorem_bound_check(chi, d_bar, k, d, log_dim),
    })
}

/// ‖ρ_block − Tr_anc(decode(encode(Ψ)))‖ computed densely on the d^k
/// space: the Q-side reshape of φ = ΠΨ gives Tr_anc|φ⟩⟨φ| = G_φ G_φ†.
fn traced_distortion_dense(
    ts: &TypicalSubspace,
    e: &Ensemble,
    seq: &[usize],
    tables: &[Vec<Complex64>],
    reshapes: &[ComplexMatrix],
    w: f64,
) -> Result<f64> {
    let k = seq.len();
    let d = e.dim();
    let anc = reshapes[0].ncols();
    let dk = d.pow(k as u32);
    let ak = anc.pow(k as u32);

    // G_phi[qvec, avec] = sum over retained m of c_m prod_j W_{m_j}[q_j, a_j]
    let mut g_phi = ComplexMatrix::zeros(dk, ak);
    for m in &ts.retained {
        let mut c_m = Complex64::new(1.0, 0.0);
        for (j, &a) in m.iter().enumerate() {
            c_m *= tables[seq[j]][a as usize];
        }
        if c_m.norm_sqr() < 1e-30 {
            continue;
        }
        let mut term = ComplexMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        for &a in m {
            term = linalg::kron(&term, &reshapes[a as usize]);
        }
        g_phi += term.scale_complex(c_m);
    }
    let mut sigma_q = &g_phi * g_phi.adjoint();

    // traced junk block
    let mut junk_q = ComplexMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
    for &a in &ts.junk {
        let wj = &reshapes[a as usize];
        junk_q = linalg::kron(&junk_q, &(wj * wj.adjoint()));
    }
    sigma_q += junk_q.scale((1.0 - w).max(0.0));

    let mut rho_block = ComplexMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
    for &i in seq {
        rho_block = linalg::kron(&rho_block, e.state(i).matrix());
    }
    let dist = linalg::trace_norm(&(rho_block - sigma_q), true)?;
    Ok(dist.clamp(0.0, 2.0))
}

trait ScaleComplex {
    fn scale_complex(&self, c: Complex64) -> Self;
}

impl ScaleComplex for ComplexMatrix {
    fn scale_complex(&self, c: Complex64) -> Self {
        self.map(|z| z * c)
    }
}

/// Re-checks the rate bound of a record against the ensemble it was
/// produced from. `None` when D̄ > ½.
pub fn verify_record(rec: &ProtocolRecord, e: &Ensemble) -> Result<Option<BoundReport>> {
    if rec.d != e.dim() {
        return Err(Error::InvalidParameter(format!(
            "record was produced from a dim-{} source, ensemble has dim {}",
            rec.d,
            e.dim()
        )));
    }
    let chi = functionals::holevo_information(e);
    Ok(functionals::theorem_bound_check(
        chi,
        rec.avg_distortion,
        rec.n,
        rec.d,
        rec.log_dim_encoded,
    ))
}
