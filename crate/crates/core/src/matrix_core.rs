//! Dense complex matrices, double-kets and Choi operators.
//!
//! Everything downstream works at `d <= 16`, so matrices are row-major
//! `Vec<Complex64>` with straightforward O(n^3) algebra. Hermitian
//! eigenproblems are solved by embedding `H = A + iB` into the real
//! symmetric `[[A, -B], [B, A]]` and running nalgebra's symmetric solver;
//! unitary eigendecompositions reduce to two nested Hermitian ones.
//!
//! Vectorization convention, used identically by every module: for an
//! operator `A` the double-ket is `|A>> = sum_{i,j} A_{i,j} |j>|i>`, i.e.
//! `|A>> = (I x A) |I>>` with the *column* (input) index on the first
//! tensor factor. Choi operators live on `H_in x H_out` in that ordering
//! and act as `rho -> Tr_in[(rho^T x I) C]`.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

pub const ZERO: C64 = Complex::new(0.0, 0.0);
pub const ONE: C64 = Complex::new(1.0, 0.0);
pub const I: C64 = Complex::new(0.0, 1.0);

/// Wrap an angle into the branch `(-pi, pi]`.
pub fn wrap_angle(t: f64) -> f64 {
    let mut x = t % TAU;
    if x <= -PI {
        x += TAU;
    } else if x > PI {
        x -= TAU;
    }
    x
}

// ---------------------------------------------------------------------------
// CMatrix
// ---------------------------------------------------------------------------

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "CMatrixSerde", into = "CMatrixSerde")]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

/// Serialized form: complex entries as `[re, im]` pairs, row-major.
#[derive(Serialize, Deserialize)]
struct CMatrixSerde {
    rows: usize,
    cols: usize,
    entries: Vec<[f64; 2]>,
}

impl From<CMatrixSerde> for CMatrix {
    fn from(s: CMatrixSerde) -> Self {
        assert_eq!(s.entries.len(), s.rows * s.cols, "entry count mismatch");
        CMatrix {
            rows: s.rows,
            cols: s.cols,
            data: s.entries.iter().map(|&[re, im]| C64::new(re, im)).collect(),
        }
    }
}

impl From<CMatrix> for CMatrixSerde {
    fn from(m: CMatrix) -> Self {
        CMatrixSerde {
            rows: m.rows,
            cols: m.cols,
            entries: m.data.iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        CMatrix { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d, d);
        for k in 0..d {
            m[(k, k)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let r = rows.len();
        assert!(r > 0, "no rows");
        let c = rows[0].len();
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        CMatrix { rows: r, cols: c, data: rows.concat() }
    }

    pub fn diag(entries: &[C64]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (k, &z) in entries.iter().enumerate() {
            m[(k, k)] = z;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> Vec<C64> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn col(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn dagger(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn trace(&self) -> C64 {
        assert!(self.is_square(), "trace of a non-square matrix");
        (0..self.rows).map(|k| self[(k, k)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Operator (spectral) norm: largest singular value.
    pub fn op_norm(&self) -> f64 {
        let gram = &self.dagger() * self;
        let (eigs, _) = hermitian_eigen(&gram);
        eigs.iter().fold(0.0f64, |a, &x| a.max(x.max(0.0))).sqrt()
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        // i(A - A†) is Hermitian, so its operator norm equals ||A - A†||.
        let skew = (self - &self.dagger()).scale(I);
        let (eigs, _) = hermitian_eigen(&skew);
        eigs.iter().all(|x| x.abs() <= tol)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let defect = &(&self.dagger() * self) - &CMatrix::identity(self.rows);
        let (eigs, _) = hermitian_eigen(&defect);
        eigs.iter().all(|x| x.abs() <= tol)
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.is_hermitian(tol) && {
            let herm = (self + &self.dagger()).scale(C64::new(0.5, 0.0));
            let (eigs, _) = hermitian_eigen(&herm);
            eigs.iter().all(|&x| x >= -tol)
        }
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        assert!(i < self.rows && j < self.cols, "index ({i},{j}) out of bounds");
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.shape(), rhs.shape(), "add shape mismatch");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.shape(), rhs.shape(), "sub shape mismatch");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, rhs.rows, "mul dimension mismatch");
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Constants and vector helpers
// ---------------------------------------------------------------------------

pub fn pauli_x() -> CMatrix {
    CMatrix::from_rows(&[vec![ZERO, ONE], vec![ONE, ZERO]])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_rows(&[vec![ZERO, -I], vec![I, ZERO]])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_rows(&[vec![ONE, ZERO], vec![ZERO, -ONE]])
}

pub fn hadamard() -> CMatrix {
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    CMatrix::from_rows(&[vec![h, h], vec![h, -h]])
}

pub fn basis_state(d: usize, k: usize) -> Vec<C64> {
    assert!(k < d, "basis index out of range");
    let mut v = vec![ZERO; d];
    v[k] = ONE;
    v
}

/// Conjugate-linear in the first argument: `<u|v>`.
pub fn inner(u: &[C64], v: &[C64]) -> C64 {
    assert_eq!(u.len(), v.len(), "inner dimension mismatch");
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalize(v: &[C64]) -> Vec<C64> {
    let n = norm(v);
    assert!(n > 0.0, "cannot normalize the zero vector");
    v.iter().map(|z| z / n).collect()
}

pub fn conj_vec(v: &[C64]) -> Vec<C64> {
    v.iter().map(|z| z.conj()).collect()
}

/// Outer product `|u><v|`.
pub fn outer(u: &[C64], v: &[C64]) -> CMatrix {
    CMatrix::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj())
}

pub fn projector(v: &[C64]) -> CMatrix {
    outer(v, v)
}

pub fn kron_vec(u: &[C64], v: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(u.len() * v.len());
    for a in u {
        for b in v {
            out.push(a * b);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Kronecker product and partial trace
// ---------------------------------------------------------------------------

/// Kronecker product with the first factor's index slowest, matching the
/// double-ket basis ordering.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Factor of a bipartite space `H_a (x) H_b` to trace out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    A,
    B,
}

/// Partial trace of an operator on `H_a (x) H_b` (dims `da`, `db`) over the
/// named factor; the result acts on the other factor and keeps the trace.
pub fn partial_trace(m: &CMatrix, da: usize, db: usize, which: Factor) -> CMatrix {
    assert!(m.is_square(), "partial trace of a non-square matrix");
    assert_eq!(m.rows(), da * db, "declared factor dimensions do not match");
    match which {
        Factor::B => CMatrix::from_fn(da, da, |a, a2| {
            (0..db).map(|b| m[(a * db + b, a2 * db + b)]).sum()
        }),
        Factor::A => CMatrix::from_fn(db, db, |b, b2| {
            (0..da).map(|a| m[(a * db + b, a * db + b2)]).sum()
        }),
    }
}

// ---------------------------------------------------------------------------
// Hermitian and unitary eigendecompositions
// ---------------------------------------------------------------------------

/// Eigendecomposition of a Hermitian matrix. Returns eigenvalues in
/// ascending order with a matching orthonormal set of eigenvectors.
///
/// `H = A + iB` is embedded into the real symmetric `[[A, -B], [B, A]]`,
/// whose spectrum is that of `H` doubled; each complex eigenvector is
/// recovered as `p + iq` from a real one `(p; q)`, with a Gram-Schmidt pass
/// inside degenerate clusters to keep exactly half of the doubled basis.
pub fn hermitian_eigen(h: &CMatrix) -> (Vec<f64>, Vec<Vec<C64>>) {
    assert!(h.is_square(), "eigendecomposition of a non-square matrix");
    let d = h.rows();
    let embed = nalgebra::DMatrix::<f64>::from_fn(2 * d, 2 * d, |r, c| {
        let (i, j) = (r % d, c % d);
        match (r / d, c / d) {
            (0, 0) | (1, 1) => h[(i, j)].re,
            (0, 1) => -h[(i, j)].im,
            _ => h[(i, j)].im,
        }
    });
    let se = nalgebra::SymmetricEigen::new(embed);

    let mut order: Vec<usize> = (0..2 * d).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap());

    let scale = se.eigenvalues.iter().fold(1.0f64, |m, &x| m.max(x.abs()));
    let cluster_tol = 1e-9 * scale;

    let mut values = Vec::with_capacity(d);
    let mut vectors: Vec<Vec<C64>> = Vec::with_capacity(d);
    let mut start = 0;
    while start < 2 * d {
        let mut end = start + 1;
        while end < 2 * d
            && se.eigenvalues[order[end]] - se.eigenvalues[order[end - 1]] <= cluster_tol
        {
            end += 1;
        }
        // The real multiplicity of every Hermitian eigenvalue is even; an odd
        // cluster can only arise from an unlucky tolerance split, so extend.
        if (end - start) % 2 == 1 && end < 2 * d {
            end += 1;
        }
        let keep = (end - start) / 2;
        let mut kept: Vec<Vec<C64>> = Vec::with_capacity(keep);
        for &idx in &order[start..end] {
            if kept.len() == keep {
                break;
            }
            let col = se.eigenvectors.column(idx);
            let mut v: Vec<C64> = (0..d).map(|i| C64::new(col[i], col[d + i])).collect();
            for u in &kept {
                let c = inner(u, &v);
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= c * ui;
                }
            }
            let n = norm(&v);
            if n > 1e-8 {
                kept.push(v.iter().map(|z| z / n).collect());
            }
        }
        assert_eq!(kept.len(), keep, "eigenvector extraction lost a direction");
        let mean = order[start..end]
            .iter()
            .map(|&i| se.eigenvalues[i])
            .sum::<f64>()
            / (end - start) as f64;
        for v in kept {
            values.push(mean);
            vectors.push(v);
        }
        start = end;
    }
    (values, vectors)
}

/// Eigendecomposition of a unitary matrix. Returns eigenphases in the
/// branch `(-pi, pi]` with orthonormal eigenvectors.
///
/// For unitary `S` the Hermitian parts `H1 = (S + S†)/2` and
/// `H2 = (S - S†)/(2i)` commute; eigenspaces of `H1` (the cosine of the
/// phase) are split by diagonalizing the compressed `H2` (the sine), which
/// separates conjugate phase pairs.
pub fn unitary_eigen(s: &CMatrix) -> (Vec<f64>, Vec<Vec<C64>>) {
    assert!(s.is_square(), "eigendecomposition of a non-square matrix");
    let d = s.rows();
    let sdag = s.dagger();
    let h1 = (s + &sdag).scale(C64::new(0.5, 0.0));
    let h2 = (s - &sdag).scale(C64::new(0.0, -0.5));
    let (cvals, cvecs) = hermitian_eigen(&h1);

    let mut phases = Vec::with_capacity(d);
    let mut vectors = Vec::with_capacity(d);
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && cvals[end] - cvals[start] <= 1e-9 {
            end += 1;
        }
        let m = end - start;
        let group: Vec<Vec<C64>> = if m == 1 {
            vec![cvecs[start].clone()]
        } else {
            // Compress H2 onto the cluster and rediagonalize.
            let basis = &cvecs[start..end];
            let h2im: Vec<Vec<C64>> = basis.iter().map(|v| h2.matvec(v)).collect();
            let h2c = CMatrix::from_fn(m, m, |i, j| inner(&basis[i], &h2im[j]));
            let (_, w) = hermitian_eigen(&h2c);
            w.iter()
                .map(|wv| {
                    let mut out = vec![ZERO; d];
                    for (k, b) in basis.iter().enumerate() {
                        for (oi, bi) in out.iter_mut().zip(b) {
                            *oi += wv[k] * bi;
                        }
                    }
                    normalize(&out)
                })
                .collect()
        };
        for v in group {
            let lambda = inner(&v, &s.matvec(&v));
            phases.push(lambda.arg());
            vectors.push(v);
        }
        start = end;
    }
    (phases, vectors)
}

fn sqrt_psd(m: &CMatrix) -> CMatrix {
    let (eigs, vecs) = hermitian_eigen(m);
    let d = m.rows();
    let mut out = CMatrix::zeros(d, d);
    for (lam, v) in eigs.iter().zip(&vecs) {
        let s = lam.max(0.0).sqrt();
        if s > 0.0 {
            out = &out + &projector(v).scale(C64::new(s, 0.0));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// State fidelity
// ---------------------------------------------------------------------------

/// Fidelity `F(rho, sigma) = (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`.
/// Equals `|<phi|psi>|^2` for pure states.
pub fn state_fidelity(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    if rho.shape() != sigma.shape() || !rho.is_square() {
        return Err(Error::Dimension(format!(
            "state_fidelity on shapes {:?} and {:?}",
            rho.shape(),
            sigma.shape()
        )));
    }
    for m in [rho, sigma] {
        let herm = (m + &m.dagger()).scale(C64::new(0.5, 0.0));
        let (eigs, _) = hermitian_eigen(&herm);
        let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -1e-8 {
            return Err(Error::NotPsd { min_eig: min });
        }
    }
    let r = sqrt_psd(rho);
    let inner_m = &(&r * sigma) * &r;
    let herm = (&inner_m + &inner_m.dagger()).scale(C64::new(0.5, 0.0));
    let (eigs, _) = hermitian_eigen(&herm);
    let root_sum: f64 = eigs.iter().map(|x| x.max(0.0).sqrt()).sum();
    Ok((root_sum * root_sum).clamp(0.0, 1.0 + 1e-9).min(1.0))
}

/// Fidelity against a pure target: `<psi| rho |psi>`.
pub fn fidelity_to_pure(psi: &[C64], rho: &CMatrix) -> f64 {
    inner(psi, &rho.matvec(psi)).re
}

// ---------------------------------------------------------------------------
// Random sampling
// ---------------------------------------------------------------------------

fn standard_complex(rng: &mut impl Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im)
}

/// Haar-random pure state from a normalized complex-Gaussian vector.
pub fn haar_state_with_rng(d: usize, rng: &mut impl Rng) -> Vec<C64> {
    assert!(d >= 1);
    loop {
        let v: Vec<C64> = (0..d).map(|_| standard_complex(rng)).collect();
        if norm(&v) > 1e-6 {
            return normalize(&v);
        }
    }
}

/// Deterministic Haar-random state for a given seed.
pub fn haar_random_state(d: usize, seed: u64) -> Vec<C64> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    haar_state_with_rng(d, &mut rng)
}

/// Matrix with iid standard-complex-Gaussian entries.
pub fn ginibre(d: usize, rng: &mut impl Rng) -> CMatrix {
    CMatrix::from_fn(d, d, |_, _| standard_complex(rng))
}

/// Haar-random unitary: Gram-Schmidt QR of a Ginibre matrix. The residual
/// norms play the role of the R diagonal and are real positive, which is
/// exactly the phase convention that makes Q Haar-distributed.
pub fn haar_unitary(d: usize, rng: &mut impl Rng) -> CMatrix {
    let g = ginibre(d, rng);
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(d);
    for j in 0..d {
        let mut v = g.col(j);
        for u in &cols {
            let c = inner(u, &v);
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= c * ui;
            }
        }
        let n = norm(&v);
        assert!(n > 1e-12, "Ginibre column collapse");
        cols.push(v.iter().map(|z| z / n).collect());
    }
    CMatrix::from_fn(d, d, |i, j| cols[j][i])
}

/// Random PSD matrix scaled to operator norm <= `cap`.
pub fn random_psd_capped(d: usize, cap: f64, rng: &mut impl Rng) -> CMatrix {
    let g = ginibre(d, rng);
    let p = &g.dagger() * &g;
    let (eigs, _) = hermitian_eigen(&p);
    let top = eigs.iter().fold(0.0f64, |a, &x| a.max(x));
    let s = if top > 0.0 { cap * rng.gen::<f64>() / top } else { 0.0 };
    p.scale(C64::new(s, 0.0))
}

// ---------------------------------------------------------------------------
// DoubleKet
// ---------------------------------------------------------------------------

/// Vectorization `|A>> = sum_{i,j} A_{i,j} |j>|i>` of an operator `A`
/// mapping a `d_in`- to a `d_out`-dimensional space.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleKet {
    op: CMatrix,
}

impl DoubleKet {
    pub fn new(op: CMatrix) -> Self {
        DoubleKet { op }
    }

    pub fn operator(&self) -> &CMatrix {
        &self.op
    }

    pub fn dim_in(&self) -> usize {
        self.op.cols()
    }

    pub fn dim_out(&self) -> usize {
        self.op.rows()
    }

    /// Flat vector on `H_in (x) H_out`: component `(j, i) = A_{i,j}` at
    /// index `j * d_out + i`.
    pub fn vec(&self) -> Vec<C64> {
        let (r, c) = self.op.shape();
        let mut v = Vec::with_capacity(r * c);
        for j in 0..c {
            for i in 0..r {
                v.push(self.op[(i, j)]);
            }
        }
        v
    }

    /// Inverse of [`DoubleKet::vec`]; exact round trip.
    pub fn from_vec(v: &[C64], d_in: usize, d_out: usize) -> Self {
        assert_eq!(v.len(), d_in * d_out, "double-ket length mismatch");
        DoubleKet {
            op: CMatrix::from_fn(d_out, d_in, |i, j| v[j * d_out + i]),
        }
    }
}

/// Convenience: the double-ket vector of an operator.
pub fn dket(op: &CMatrix) -> Vec<C64> {
    DoubleKet::new(op.clone()).vec()
}

// ---------------------------------------------------------------------------
// ChoiOperator
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChoiKind {
    /// Trace preserving: `Tr_out C = I`.
    Channel,
    /// Trace non-increasing: `Tr_out C <= I`.
    Operation,
}

/// Positive operator on `H_in (x) H_out` representing a completely positive
/// map via `rho -> Tr_in[(rho^T x I) C]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiOperator {
    pub matrix: CMatrix,
    pub d_in: usize,
    pub d_out: usize,
    pub kind: ChoiKind,
}

impl ChoiOperator {
    pub fn new(matrix: CMatrix, d_in: usize, d_out: usize, kind: ChoiKind) -> Self {
        assert_eq!(matrix.rows(), d_in * d_out, "Choi dimension mismatch");
        assert!(matrix.is_square());
        ChoiOperator { matrix, d_in, d_out, kind }
    }

    /// `C = sum_k |K_k>><<K_k|`; kind inferred from `sum K†K`.
    pub fn from_kraus(kraus: &[CMatrix]) -> Self {
        assert!(!kraus.is_empty(), "empty Kraus set");
        let (d_out, d_in) = kraus[0].shape();
        let mut c = CMatrix::zeros(d_in * d_out, d_in * d_out);
        let mut complete = CMatrix::zeros(d_in, d_in);
        for k in kraus {
            assert_eq!(k.shape(), (d_out, d_in), "inconsistent Kraus shapes");
            let v = dket(k);
            c = &c + &outer(&v, &v);
            complete = &complete + &(&k.dagger() * k);
        }
        let defect = (&complete - &CMatrix::identity(d_in)).frobenius_norm();
        let kind = if defect <= 1e-10 { ChoiKind::Channel } else { ChoiKind::Operation };
        ChoiOperator { matrix: c, d_in, d_out, kind }
    }

    pub fn of_unitary(u: &CMatrix) -> Self {
        assert!(u.is_square());
        Self::from_kraus(std::slice::from_ref(u))
    }

    /// Fully depolarizing channel `rho -> I/d`: Choi `I_{d^2} / d`.
    pub fn depolarizing(d: usize) -> Self {
        ChoiOperator {
            matrix: CMatrix::identity(d * d).scale(C64::new(1.0 / d as f64, 0.0)),
            d_in: d,
            d_out: d,
            kind: ChoiKind::Channel,
        }
    }

    /// Convex mixture of two Choi operators on the same spaces.
    pub fn mix(&self, other: &ChoiOperator, weight_other: f64) -> Self {
        assert_eq!((self.d_in, self.d_out), (other.d_in, other.d_out));
        let w = weight_other.clamp(0.0, 1.0);
        ChoiOperator {
            matrix: &self.matrix.scale(C64::new(1.0 - w, 0.0))
                + &other.matrix.scale(C64::new(w, 0.0)),
            d_in: self.d_in,
            d_out: self.d_out,
            kind: if self.kind == ChoiKind::Channel && other.kind == ChoiKind::Channel {
                ChoiKind::Channel
            } else {
                ChoiKind::Operation
            },
        }
    }

    /// Structural validity: PSD and the partial-trace condition of `kind`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let herm = (&self.matrix + &self.matrix.dagger()).scale(C64::new(0.5, 0.0));
        let (eigs, _) = hermitian_eigen(&herm);
        let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -tol {
            return Err(Error::NotPsd { min_eig: min });
        }
        let reduced = partial_trace(&self.matrix, self.d_in, self.d_out, Factor::B);
        let slack = &CMatrix::identity(self.d_in) - &reduced;
        match self.kind {
            ChoiKind::Channel => {
                if slack.frobenius_norm() > tol * (self.d_in as f64) {
                    return Err(Error::Dimension(format!(
                        "partial trace deviates from identity by {:.3e}",
                        slack.frobenius_norm()
                    )));
                }
            }
            ChoiKind::Operation => {
                let (eigs, _) = hermitian_eigen(&slack);
                let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
                if min < -tol {
                    return Err(Error::NotPsd { min_eig: min });
                }
            }
        }
        Ok(())
    }

    /// Apply the map: `Tr_in[(rho^T x I) C]`. Linear in `rho`.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        assert_eq!(rho.shape(), (self.d_in, self.d_in), "apply_choi input dimension");
        let (din, dout) = (self.d_in, self.d_out);
        CMatrix::from_fn(dout, dout, |o, o2| {
            let mut acc = ZERO;
            for j in 0..din {
                for k in 0..din {
                    acc += rho[(k, j)] * self.matrix[(k * dout + o, j * dout + o2)];
                }
            }
            acc
        })
    }

    /// Composition `second ∘ self` as a Choi operator.
    pub fn compose(&self, second: &ChoiOperator) -> ChoiOperator {
        assert_eq!(self.d_out, second.d_in, "compose dimension mismatch");
        let (da, db, dc) = (self.d_in, self.d_out, second.d_out);
        let mut out = CMatrix::zeros(da * dc, da * dc);
        for a in 0..da {
            for a2 in 0..da {
                // Apply the second map to the output block <a|..|a2>.
                let block = CMatrix::from_fn(db, db, |b, b2| {
                    self.matrix[(a * db + b, a2 * db + b2)]
                });
                let mapped = CMatrix::from_fn(dc, dc, |c, c2| {
                    let mut acc = ZERO;
                    for j in 0..db {
                        for k in 0..db {
                            acc += block[(k, j)] * second.matrix[(k * dc + c, j * dc + c2)];
                        }
                    }
                    acc
                });
                for c in 0..dc {
                    for c2 in 0..dc {
                        out[(a * dc + c, a2 * dc + c2)] = mapped[(c, c2)];
                    }
                }
            }
        }
        let kind = if self.kind == ChoiKind::Channel && second.kind == ChoiKind::Channel {
            ChoiKind::Channel
        } else {
            ChoiKind::Operation
        };
        ChoiOperator { matrix: out, d_in: da, d_out: dc, kind }
    }

    /// Process fidelity `<<U| C |U>> / d^2` against a unitary target, for a
    /// Choi normalized to trace `d`.
    pub fn process_fidelity_to(&self, u: &CMatrix) -> f64 {
        assert_eq!(u.shape(), (self.d_out, self.d_in), "target shape mismatch");
        let v = dket(u);
        let mv = self.matrix.matvec(&v);
        let d = self.d_in as f64;
        (inner(&v, &mv).re / (d * d)).max(0.0)
    }
}

// ---------------------------------------------------------------------------
