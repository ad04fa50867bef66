//! Complex operator algebra on the truncated qubit ⊗ qubit ⊗ cavity space.
//!
//! Operators carry either a dense matrix or a coordinate list of nonzeros; the
//! two representations are constructed exactly and agree elementwise. Lifted
//! single-subsystem operators are extremely sparse, which is what makes the
//! integrator hot path cheap, so everything that ends up inside the master
//! equation is kept in sparse form.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::{Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// The three subsystems, in tensor order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    QubitA,
    QubitB,
    Cavity,
}

/// Fixed factorization of the Hilbert space: qubit A ⊗ qubit B ⊗ cavity.
///
/// Qubit A is the slowest index and the cavity the fastest, so the basis state
/// |a, b, n⟩ lives at index `(2a + b)·N_cav + n`. Qubit index 0 is |g⟩, index 1
/// is |e⟩; cavity index n is the Fock state |n⟩.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpaceLayout {
    n_cav: usize,
}

impl SpaceLayout {
    pub fn new(n_cav: usize) -> Result<Self> {
        if n_cav < 2 {
            return Err(Error::InvalidParameter(format!(
                "cavity truncation N_cav = {n_cav} must be at least 2"
            )));
        }
        Ok(Self { n_cav })
    }

    pub fn n_cav(&self) -> usize {
        self.n_cav
    }

    pub fn dim(&self) -> usize {
        4 * self.n_cav
    }

    pub fn slot_dim(&self, slot: Slot) -> usize {
        match slot {
            Slot::QubitA | Slot::QubitB => 2,
            Slot::Cavity => self.n_cav,
        }
    }

    /// Index of the basis state |a, b, n⟩.
    pub fn basis_index(&self, a: usize, b: usize, n: usize) -> usize {
        debug_assert!(a < 2 && b < 2 && n < self.n_cav);
        (2 * a + b) * self.n_cav + n
    }

    pub fn subsystem_dims(&self) -> [usize; 3] {
        [2, 2, self.n_cav]
    }
}

#[derive(Clone, Debug)]
enum Repr {
    Dense(Array2<C64>),
    Sparse(Vec<(usize, usize, C64)>),
}

/// A complex square operator in dense or sparse (coordinate-list) form.
#[derive(Clone, Debug)]
pub struct Operator {
    dim: usize,
    repr: Repr,
}

impl Operator {
    pub fn dense(matrix: Array2<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "operator matrix must be square, got {}×{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { dim: matrix.nrows(), repr: Repr::Dense(matrix) })
    }

    /// Build a sparse operator from coordinates. Entries are sorted row-major,
    /// duplicates summed, exact zeros dropped.
    pub fn sparse(dim: usize, entries: Vec<(usize, usize, C64)>) -> Result<Self> {
        let mut entries = entries;
        for &(i, j, _) in &entries {
            if i >= dim || j >= dim {
                return Err(Error::DimensionMismatch(format!(
                    "sparse entry ({i}, {j}) out of bounds for dim {dim}"
                )));
            }
        }
        entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut merged: Vec<(usize, usize, C64)> = Vec::with_capacity(entries.len());
        for (i, j, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        merged.retain(|&(_, _, v)| v != ZERO);
        Ok(Self { dim, repr: Repr::Sparse(merged) })
    }

    pub fn identity(dim: usize) -> Self {
        let entries = (0..dim).map(|i| (i, i, ONE)).collect();
        Self { dim, repr: Repr::Sparse(entries) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.repr, Repr::Sparse(_))
    }

    pub fn nnz(&self) -> usize {
        match &self.repr {
            Repr::Dense(m) => m.iter().filter(|&&v| v != ZERO).count(),
            Repr::Sparse(e) => e.len(),
        }
    }

    pub fn to_dense(&self) -> Array2<C64> {
        match &self.repr {
            Repr::Dense(m) => m.clone(),
            Repr::Sparse(entries) => {
                let mut m = Array2::zeros((self.dim, self.dim));
                for &(i, j, v) in entries {
                    m[[i, j]] += v;
                }
                m
            }
        }
    }

    /// Coordinate list of nonzeros, regardless of representation.
    pub fn coords(&self) -> Vec<(usize, usize, C64)> {
        match &self.repr {
            Repr::Sparse(entries) => entries.clone(),
            Repr::Dense(m) => m
                .indexed_iter()
                .filter(|(_, &v)| v != ZERO)
                .map(|((i, j), &v)| (i, j, v))
                .collect(),
        }
    }

    pub fn dagger(&self) -> Self {
        match &self.repr {
            Repr::Dense(m) => {
                Self { dim: self.dim, repr: Repr::Dense(m.t().mapv(|v| v.conj())) }
            }
            Repr::Sparse(entries) => {
                let swapped = entries.iter().map(|&(i, j, v)| (j, i, v.conj())).collect();
                Self::sparse(self.dim, swapped).expect("dagger preserves bounds")
            }
        }
    }

    pub fn scale(&self, factor: C64) -> Self {
        match &self.repr {
            Repr::Dense(m) => Self { dim: self.dim, repr: Repr::Dense(m.mapv(|v| v * factor)) },
            Repr::Sparse(entries) => {
                let scaled = entries.iter().map(|&(i, j, v)| (i, j, v * factor)).collect();
                Self::sparse(self.dim, scaled).expect("scale preserves bounds")
            }
        }
    }

    /// Sum of two operators. Sparse when both operands are sparse.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!(
                "cannot add operators of dims {} and {}",
                self.dim, other.dim
            )));
        }
        match (&self.repr, &other.repr) {
            (Repr::Sparse(a), Repr::Sparse(b)) => {
                let mut entries = a.clone();
                entries.extend_from_slice(b);
                Self::sparse(self.dim, entries)
            }
            _ => Self::dense(self.to_dense() + other.to_dense()),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Matrix product. Sparse when both operands are sparse.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply operators of dims {} and {}",
                self.dim, other.dim
            )));
        }
        match (&self.repr, &other.repr) {
            (Repr::Sparse(a), Repr::Sparse(b)) => {
                // b sorted row-major: find the row range of b for each a-entry's column.
                let mut entries = Vec::new();
                for &(i, k, va) in a {
                    let start = b.partition_point(|&(r, _, _)| r < k);
                    for &(r, j, vb) in &b[start..] {
                        if r != k {
                            break;
                        }
                        entries.push((i, j, va * vb));
                    }
                }
                Self::sparse(self.dim, entries)
            }
            _ => Self::dense(self.to_dense().dot(&other.to_dense())),
        }
    }

    /// Kronecker product, `self` acting on the slower (left) factor.
    pub fn kron(&self, other: &Self) -> Self {
        let dim = self.dim * other.dim;
        match (&self.repr, &other.repr) {
            (Repr::Sparse(a), Repr::Sparse(b)) => {
                let mut entries = Vec::with_capacity(a.len() * b.len());
                for &(i1, j1, v1) in a {
                    for &(i2, j2, v2) in b {
                        entries.push((i1 * other.dim + i2, j1 * other.dim + j2, v1 * v2));
                    }
                }
                Self::sparse(dim, entries).expect("kron preserves bounds")
            }
            _ => {
                let a = self.to_dense();
                let b = other.to_dense();
                let mut m = Array2::zeros((dim, dim));
                for ((i1, j1), &v1) in a.indexed_iter() {
                    if v1 == ZERO {
                        continue;
                    }
                    for ((i2, j2), &v2) in b.indexed_iter() {
                        m[[i1 * other.dim + i2, j1 * other.dim + j2]] = v1 * v2;
                    }
                }
                Self { dim, repr: Repr::Dense(m) }
            }
        }
    }

    /// Apply to a state vector.
    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        if psi.dim() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "operator dim {} vs state dim {}",
                self.dim,
                psi.dim()
            )));
        }
        let mut out = Array1::zeros(self.dim);
        match &self.repr {
            Repr::Dense(m) => out = m.dot(&psi.amplitudes),
            Repr::Sparse(entries) => {
                for &(i, j, v) in entries {
                    out[i] += v * psi.amplitudes[j];
                }
            }
        }
        Ok(StateVector { amplitudes: out })
    }

    /// tr(O ρ).
    pub fn expectation(&self, rho: &Array2<C64>) -> Result<C64> {
        if rho.nrows() != self.dim || rho.ncols() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "operator dim {} vs state dim {}×{}",
                self.dim,
                rho.nrows(),
                rho.ncols()
            )));
        }
        let value = match &self.repr {
            Repr::Dense(m) => m.indexed_iter().map(|((i, j), &v)| v * rho[[j, i]]).sum(),
            Repr::Sparse(entries) => entries.iter().map(|&(i, j, v)| v * rho[[j, i]]).sum(),
        };
        Ok(value)
    }

    /// tr(O ρ) for Hermitian O, reported as a real number.
    ///
    /// A non-negligible imaginary part means either O is not Hermitian or ρ is
    /// corrupted, and is reported as an error rather than silently discarded.
    pub fn expectation_hermitian(&self, rho: &Array2<C64>) -> Result<f64> {
        let value = self.expectation(rho)?;
        if value.im.abs() >= 1e-10 {
            return Err(Error::NonRealExpectation { imag: value.im });
        }
        Ok(value.re)
    }

    /// Largest elementwise |difference| against another operator.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let a = self.to_dense();
        let b = other.to_dense();
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    /// max |O - O†| over all elements.
    pub fn hermiticity_deviation(&self) -> f64 {
        self.max_abs_diff(&self.dagger())
    }

    /// Freeze into the integrator-friendly form.
    pub fn to_sparse_op(&self) -> SparseOp {
        SparseOp { dim: self.dim, entries: self.coords() }
    }
}

/// Pauli and ladder operators on a single qubit, basis (|g⟩, |e⟩).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
    Plus,
    Minus,
}

/// 2×2 qubit operator with σz|e⟩ = +|e⟩ (excited state higher for H = ω σz/2)
/// and σ+ = |e⟩⟨g|.
pub fn pauli(kind: Pauli) -> Operator {
    let i = C64::i();
    let entries = match kind {
        Pauli::Z => vec![(0, 0, -ONE), (1, 1, ONE)],
        Pauli::Plus => vec![(1, 0, ONE)],
        Pauli::Minus => vec![(0, 1, ONE)],
        Pauli::X => vec![(0, 1, ONE), (1, 0, ONE)],
        // σy = -i σ+ + i σ-
        Pauli::Y => vec![(1, 0, -i), (0, 1, i)],
    };
    Operator::sparse(2, entries).expect("pauli entries in bounds")
}

/// Cavity annihilation operator: a|n⟩ = √n |n-1⟩ on the truncated Fock space.
pub fn annihilation(n_cav: usize) -> Result<Operator> {
    if n_cav < 2 {
        return Err(Error::InvalidParameter(format!(
            "annihilation operator needs N_cav ≥ 2, got {n_cav}"
        )));
    }
    let entries = (1..n_cav).map(|n| (n - 1, n, C64::new((n as f64).sqrt(), 0.0))).collect();
    Operator::sparse(n_cav, entries)
}

/// Photon-number operator diag(0, 1, …, N-1), constructed exactly rather than
/// as a†a (which rounds (√n)² away from n).
pub fn number(n_cav: usize) -> Result<Operator> {
    if n_cav < 2 {
        return Err(Error::InvalidParameter(format!(
            "number operator needs N_cav ≥ 2, got {n_cav}"
        )));
    }
    let entries = (1..n_cav).map(|n| (n, n, C64::new(n as f64, 0.0))).collect();
    Operator::sparse(n_cav, entries)
}

/// Embed a single-subsystem operator into the full space, identity elsewhere.
pub fn lift(op: &Operator, slot: Slot, layout: SpaceLayout) -> Result<Operator> {
    let slot_dim = layout.slot_dim(slot);
    if op.dim() != slot_dim {
        return Err(Error::DimensionMismatch(format!(
            "operator dim {} does not match {:?} dim {}",
            op.dim(),
            slot,
            slot_dim
        )));
    }
    let n = layout.n_cav;
    let coords = op.coords();
    let mut entries = Vec::new();
    match slot {
        Slot::QubitA => {
            for &(i, j, v) in &coords {
                for b in 0..2 {
                    for f in 0..n {
                        entries.push((layout.basis_index(i, b, f), layout.basis_index(j, b, f), v));
                    }
                }
            }
        }
        Slot::QubitB => {
            for &(i, j, v) in &coords {
                for a in 0..2 {
                    for f in 0..n {
                        entries.push((layout.basis_index(a, i, f), layout.basis_index(a, j, f), v));
                    }
                }
            }
        }
        Slot::Cavity => {
            for &(i, j, v) in &coords {
                for a in 0..2 {
                    for b in 0..2 {
                        entries.push((layout.basis_index(a, b, i), layout.basis_index(a, b, j), v));
                    }
                }
            }
        }
    }
    Operator::sparse(layout.dim(), entries)
}

/// Partial trace over an arbitrary factorization.
///
/// `dims` are the subsystem dimensions in tensor order, `keep` the (sorted,
/// distinct) indices of the subsystems to retain.
pub fn partial_trace(rho: &Array2<C64>, dims: &[usize], keep: &[usize]) -> Result<Array2<C64>> {
    let total: usize = dims.iter().product();
    if rho.nrows() != total || rho.ncols() != total {
        return Err(Error::DimensionMismatch(format!(
            "state dim {}×{} does not match subsystem dims {:?}",
            rho.nrows(),
            rho.ncols(),
            dims
        )));
    }
    if keep.windows(2).any(|w| w[0] >= w[1]) || keep.iter().any(|&k| k >= dims.len()) {
        return Err(Error::InvalidParameter(format!(
            "keep set {keep:?} must be sorted, distinct and within {} subsystems",
            dims.len()
        )));
    }
    let kept_dim: usize = keep.iter().map(|&k| dims[k]).product();
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep.contains(k)).collect();
    let traced_dim: usize = traced.iter().map(|&k| dims[k]).product();

    // Split a flat index into per-subsystem indices (slowest first).
    let split = |mut idx: usize| -> Vec<usize> {
        let mut parts = vec![0; dims.len()];
        for k in (0..dims.len()).rev() {
            parts[k] = idx % dims[k];
            idx /= dims[k];
        }
        parts
    };
    let fuse = |parts: &[usize], subset: &[usize]| -> usize {
        subset.iter().fold(0, |acc, &k| acc * dims[k] + parts[k])
    };

    let mut out = Array2::zeros((kept_dim, kept_dim));
    for i in 0..total {
        let pi = split(i);
        for j in 0..total {
            let pj = split(j);
            if traced.iter().any(|&k| pi[k] != pj[k]) {
                continue;
            }
            out[[fuse(&pi, keep), fuse(&pj, keep)]] += rho[[i, j]];
        }
    }
    debug_assert!(traced_dim * kept_dim == total);
    Ok(out)
}

/// A pure state on some Hilbert space.
#[derive(Clone, Debug)]
pub struct StateVector {
    amplitudes: Array1<C64>,
}

impl StateVector {
    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Self {
        Self { amplitudes: Array1::from_vec(amplitudes) }
    }

    /// Basis state |index⟩.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::DimensionMismatch(format!(
                "basis index {index} out of bounds for dim {dim}"
            )));
        }
        let mut amplitudes = Array1::zeros(dim);
        amplitudes[index] = ONE;
        Ok(Self { amplitudes })
    }

    /// Truncated coherent state |α⟩, renormalized on the truncated space.
    pub fn coherent(n_cav: usize, alpha: C64) -> Result<Self> {
        if n_cav < 2 {
            return Err(Error::InvalidParameter(format!(
                "coherent state needs N_cav ≥ 2, got {n_cav}"
            )));
        }
        let mut amplitudes = Array1::zeros(n_cav);
        let mut term = ONE; // αⁿ/√(n!)
        amplitudes[0] = term;
        for n in 1..n_cav {
            term *= alpha / C64::new((n as f64).sqrt(), 0.0);
            amplitudes[n] = term;
        }
        let norm = amplitudes.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        amplitudes.mapv_inplace(|v| v / norm);
        Ok(Self { amplitudes })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &Array1<C64> {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &Self) -> C64 {
        self.amplitudes.iter().zip(other.amplitudes.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    /// |self⟩ ⊗ |other⟩, `self` on the slower factor.
    pub fn kron(&self, other: &Self) -> Self {
        let mut amplitudes = Array1::zeros(self.dim() * other.dim());
        for (i, a) in self.amplitudes.iter().enumerate() {
            for (j, b) in other.amplitudes.iter().enumerate() {
                amplitudes[i * other.dim() + j] = a * b;
            }
        }
        Self { amplitudes }
    }

    /// Density matrix |ψ⟩⟨ψ|.
    pub fn density(&self) -> Array2<C64> {
        let d = self.dim();
        let mut rho = Array2::zeros((d, d));
        for (i, a) in self.amplitudes.iter().enumerate() {
            for (j, b) in self.amplitudes.iter().enumerate() {
                rho[[i, j]] = a * b.conj();
            }
        }
        rho
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Coordinate-list operator frozen for the integrator hot path.
///
/// Entries are sorted row-major; the accumulation kernels below are the only
/// places the solver spends meaningful time.
#[derive(Clone, Debug)]
pub struct SparseOp {
    dim: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl SparseOp {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn dagger(&self) -> Self {
        let mut entries: Vec<(usize, usize, C64)> =
            self.entries.iter().map(|&(i, j, v)| (j, i, v.conj())).collect();
        entries.sort_by_key(|&(i, j, _)| (i, j));
        Self { dim: self.dim, entries }
    }

    /// out += coeff · S · rho
    pub fn acc_left_mul(&self, coeff: C64, rho: &Array2<C64>, out: &mut Array2<C64>) {
        let d = self.dim;
        let r = rho.as_slice().expect("rho contiguous");
        let o = out.as_slice_mut().expect("out contiguous");
        for &(i, j, v) in &self.entries {
            let w = coeff * v;
            let src = &r[j * d..(j + 1) * d];
            let dst = &mut o[i * d..(i + 1) * d];
            for k in 0..d {
                dst[k] += w * src[k];
            }
        }
    }

    /// out += coeff · rho · S
    pub fn acc_right_mul(&self, coeff: C64, rho: &Array2<C64>, out: &mut Array2<C64>) {
        let d = self.dim;
        let r = rho.as_slice().expect("rho contiguous");
        let o = out.as_slice_mut().expect("out contiguous");
        for row in 0..d {
            let src = &r[row * d..(row + 1) * d];
            let dst = &mut o[row * d..(row + 1) * d];
            for &(i, j, v) in &self.entries {
                dst[j] += coeff * v * src[i];
            }
        }
    }

    /// tr(S ρ).
    pub fn expectation(&self, rho: &Array2<C64>) -> C64 {
        self.entries.iter().map(|&(i, j, v)| v * rho[[j, i]]).sum()
    }

    /// tr(S ρ) for Hermitian S, checked to be real.
    pub fn expectation_hermitian(&self, rho: &Array2<C64>) -> Result<f64> {
        let value = self.expectation(rho);
        if value.im.abs() >= 1e-10 {
            return Err(Error::NonRealExpectation { imag: value.im });
        }
        Ok(value.re)
    }
}
