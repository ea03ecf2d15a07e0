//! Reduction of an arbitrary pair of d-dimensional unitaries to the diagonal
//! normal form
//!
//! ```text
//! U_0 = e^{i a}|0><0| + sum_k e^{i b_k}|k><k| + e^{-i a}|d-1><d-1|,   U_1 = conj(U_0)
//! ```
//!
//! where `4 a` is the length of the smallest unit-circle arc containing all
//! eigenvalues of `U_1† U_0` and the interior phases `b_k` lie in `[-a, a]`.
//! Everything downstream (storage states, closed forms, circuits) consumes
//! only `(d, n, alpha, betas)`; the conjugation data `(V, W, phase)` is kept
//! so the reduction itself stays checkable.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::matrix_core::{unitary_eigen, wrap_angle, C64, CMatrix, ZERO};

/// Degeneracy threshold: below this `alpha` the two unitaries coincide and
/// the discrimination content of the pair is empty.
pub const DEGENERATE_ALPHA: f64 = 1e-12;

/// A pair of unitaries in diagonal normal form.
///
/// Invariants (tested, not assumed): `alpha` in `[0, pi/4)`, each interior
/// phase in `[-alpha, alpha]`, and `reconstruct(i)` reproduces the canonical
/// `U_i` from the original pair through `(V, W, global_phase)`.
#[derive(Debug, Clone)]
pub struct CanonicalPair {
    d: usize,
    n: u32,
    alpha: f64,
    betas: Vec<f64>,
    v: CMatrix,
    w: CMatrix,
    global_phase: f64,
    u0_orig: CMatrix,
    u1_orig: CMatrix,
}

/// Outcome of canonicalization. A pair whose phase spread reaches `pi` over
/// `n` uses admits error-free discrimination of the storage states, so the
/// retrieval problem trivializes; the reduced data is still carried along
/// because limit formulas remain evaluable at the boundary.
#[derive(Debug, Clone)]
pub enum Canonicalized {
    Pair(CanonicalPair),
    PerfectlyDistinguishable(CanonicalPair),
}

impl Canonicalized {
    /// The reduced pair, whichever side of the boundary it is on.
    pub fn into_pair(self) -> CanonicalPair {
        match self {
            Canonicalized::Pair(p) | Canonicalized::PerfectlyDistinguishable(p) => p,
        }
    }

    pub fn pair(&self) -> &CanonicalPair {
        match self {
            Canonicalized::Pair(p) | Canonicalized::PerfectlyDistinguishable(p) => p,
        }
    }

    pub fn is_perfectly_distinguishable(&self) -> bool {
        matches!(self, Canonicalized::PerfectlyDistinguishable(_))
    }
}

impl CanonicalPair {
    /// Reduce `(u0, u1)` with `n` uses to normal form.
    ///
    /// The spread is found by the largest-gap method: sort the eigenphases of
    /// `U_1 U_0†` circularly; the smallest covering arc is the complement of
    /// the largest gap (ties broken at the lowest starting index). Then
    /// `alpha = arc/4`, `V = U_0† T P†` and `W = P diag(w_j) T†` where `T`
    /// diagonalizes `U_1 U_0†`, `P` is the basis permutation placing the
    /// extremal phases on `|0>` and `|d-1>`, and the diagonal `w_j` is the
    /// square-root branch fixed by the centering condition.
    pub fn canonicalize(u0: &CMatrix, u1: &CMatrix, n: u32) -> Result<Canonicalized> {
        if u0.shape() != u1.shape() || !u0.is_square() || u0.rows() < 2 {
            return Err(Error::Dimension(format!(
                "canonicalize needs equal square dimensions >= 2, got {:?} and {:?}",
                u0.shape(),
                u1.shape()
            )));
        }
        if n == 0 {
            return Err(Error::Dimension("number of uses must be >= 1".into()));
        }
        for u in [u0, u1] {
            let defect = (&(&u.dagger() * u) - &CMatrix::identity(u.rows())).frobenius_norm();
            if defect > 1e-9 {
                return Err(Error::NotUnitary { residual: defect });
            }
        }
        let d = u0.rows();

        // Eigendecomposition of S = U_1 U_0†. Its phase spread equals that of
        // U_1† U_0 (the spectra are mirror images), and the canonical forms
        // drop out of its eigenbasis directly.
        let s = u1 * &u0.dagger();
        let (thetas, tvecs) = unitary_eigen(&s);

        // Smallest covering arc by largest circular gap.
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| thetas[a].partial_cmp(&thetas[b]).unwrap());
        let sorted: Vec<f64> = order.iter().map(|&i| thetas[i]).collect();
        let mut best_gap = f64::NEG_INFINITY;
        let mut gap_after = 0usize; // gap between sorted[k] and its successor
        for k in 0..d {
            let next = if k + 1 == d { sorted[0] + TAU } else { sorted[k + 1] };
            let gap = next - sorted[k];
            if gap > best_gap + 1e-15 {
                best_gap = gap;
                gap_after = k;
            }
        }
        let arc = TAU - best_gap;
        let alpha = (arc / 4.0).max(0.0);
        let theta_start = sorted[(gap_after + 1) % d];

        // Canonical eigenphase for each eigenvalue: the offset into the arc,
        // measured wrap-safely, mapped onto [-alpha, alpha] descending.
        let delta: Vec<f64> = thetas
            .iter()
            .map(|&t| {
                let off = {
                    let mut x = (t - theta_start) % TAU;
                    if x < -1e-12 {
                        x += TAU;
                    }
                    x.clamp(0.0, arc.max(0.0))
                };
                alpha - off / 2.0
            })
            .collect();

        // Permutation: descending canonical phase, so |0> carries +alpha and
        // |d-1> carries -alpha; ties broken by original eigenvector index.
        let mut perm: Vec<usize> = (0..d).collect();
        perm.sort_by(|&a, &b| delta[b].partial_cmp(&delta[a]).unwrap().then(a.cmp(&b)));

        let phi_c = wrap_angle(theta_start + 2.0 * alpha);
        let global_phase = phi_c / 2.0;

        // T with permuted columns; W's diagonal entries are the square-root
        // branch of (U_1 U_0†)^{-1/2} that satisfies the centering exactly:
        // w_j = e^{i(delta_j - phase)}.
        let t_perm = CMatrix::from_fn(d, d, |i, j| tvecs[perm[j]][i]);
        let w_diag: Vec<C64> = perm
            .iter()
            .map(|&j| Complex::from_polar(1.0, delta[j] - global_phase))
            .collect();
        let w = &CMatrix::diag(&w_diag) * &t_perm.dagger();
        let v = &u0.dagger() * &t_perm;

        let betas: Vec<f64> = (1..d.saturating_sub(1)).map(|k| delta[perm[k]]).collect();

        let pair = CanonicalPair {
            d,
            n,
            alpha,
            betas,
            v,
            w,
            global_phase,
            u0_orig: u0.clone(),
            u1_orig: u1.clone(),
        };
        if 4.0 * n as f64 * alpha >= PI {
            Ok(Canonicalized::PerfectlyDistinguishable(pair))
        } else {
            Ok(Canonicalized::Pair(pair))
        }
    }

    /// Directly build a canonical pair from `(d, n, alpha, betas)` without a
    /// source pair (the conjugation is trivial). Accepts the closed boundary
    /// `4 n alpha = pi`, where the protocols still apply with unit success.
    pub fn from_angles(d: usize, n: u32, alpha: f64, betas: &[f64]) -> Result<Self> {
        if d < 2 {
            return Err(Error::Dimension("dimension must be >= 2".into()));
        }
        if betas.len() != d - 2 {
            return Err(Error::Dimension(format!(
                "expected {} interior phases, got {}",
                d - 2,
                betas.len()
            )));
        }
        if n == 0 {
            return Err(Error::Dimension("number of uses must be >= 1".into()));
        }
        if !(0.0..=PI / (4.0 * n as f64)).contains(&alpha) {
            return Err(Error::AlphaOutOfRange { alpha, n });
        }
        if betas.iter().any(|b| b.abs() > alpha + 1e-12) {
            return Err(Error::Dimension(
                "interior phases must lie within [-alpha, alpha]".into(),
            ));
        }
        let pair = CanonicalPair {
            d,
            n,
            alpha,
            betas: betas.to_vec(),
            v: CMatrix::identity(d),
            w: CMatrix::identity(d),
            global_phase: 0.0,
            u0_orig: CMatrix::diag(&canonical_diag(d, alpha, betas, 0)),
            u1_orig: CMatrix::diag(&canonical_diag(d, alpha, betas, 1)),
        };
        Ok(pair)
    }

    /// Qubit shorthand: `from_angles(2, n, alpha, [])`.
    pub fn qubit(n: u32, alpha: f64) -> Result<Self> {
        Self::from_angles(2, n, alpha, &[])
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn uses(&self) -> u32 {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn conjugation_v(&self) -> &CMatrix {
        &self.v
    }

    pub fn conjugation_w(&self) -> &CMatrix {
        &self.w
    }

    pub fn global_phase(&self) -> f64 {
        self.global_phase
    }

    /// The pair carries no discrimination content (`alpha ~ 0`).
    pub fn is_degenerate(&self) -> bool {
        self.alpha < DEGENERATE_ALPHA
    }

    /// Full diagonal phase list of the canonical `U_which`.
    pub fn phases(&self, which: usize) -> Vec<f64> {
        assert!(which < 2);
        let sign = if which == 0 { 1.0 } else { -1.0 };
        let mut out = Vec::with_capacity(self.d);
        out.push(sign * self.alpha);
        for b in &self.betas {
            out.push(sign * b);
        }
        out.push(-sign * self.alpha);
        out
    }

    pub fn canonical_u(&self, which: usize) -> CMatrix {
        assert!(which < 2);
        CMatrix::diag(&canonical_diag(self.d, self.alpha, &self.betas, which))
    }

    /// Rebuild canonical `U_which` from the original pair via the stored
    /// conjugation: `e^{±i phase} W U_which V` (with the sign `+` for
    /// `which = 0`, `-` for `which = 1`; a pair of phases can only be
    /// centered by counter-rotating its members).
    pub fn reconstruct(&self, which: usize) -> CMatrix {
        assert!(which < 2);
        let orig = if which == 0 { &self.u0_orig } else { &self.u1_orig };
        let sign = if which == 0 { 1.0 } else { -1.0 };
        (&(&self.w * orig) * &self.v).scale(Complex::from_polar(1.0, sign * self.global_phase))
    }

    /// The storage input `|+> = (|0> + |d-1>)/sqrt(2)`.
    pub fn plus_state(&self) -> Vec<C64> {
        let mut v = vec![ZERO; self.d];
        v[0] = C64::new(FRAC_1_SQRT_2, 0.0);
        v[self.d - 1] = C64::new(FRAC_1_SQRT_2, 0.0);
        v
    }

    /// Storage state after `uses` applications: `U_which^uses |+>` =
    /// `(e^{±i uses·alpha}|0> + e^{∓i uses·alpha}|d-1>)/sqrt(2)`.
    pub fn storage_state_with_uses(&self, uses: u32, which: usize) -> Vec<C64> {
        assert!(which < 2);
        let sign = if which == 0 { 1.0 } else { -1.0 };
        let phase = sign * uses as f64 * self.alpha;
        let mut v = vec![ZERO; self.d];
        v[0] = Complex::from_polar(FRAC_1_SQRT_2, phase);
        v[self.d - 1] = Complex::from_polar(FRAC_1_SQRT_2, -phase);
        v
    }

    /// Storage state for this pair's own `n`.
    pub fn storage_state(&self, which: usize) -> Vec<C64> {
        self.storage_state_with_uses(self.n, which)
    }
}

fn canonical_diag(d: usize, alpha: f64, betas: &[f64], which: usize) -> Vec<C64> {
    let sign = if which == 0 { 1.0 } else { -1.0 };
    let mut entries = Vec::with_capacity(d);
    entries.push(Complex::from_polar(1.0, sign * alpha));
    for &b in betas {
        entries.push(Complex::from_polar(1.0, sign * b));
    }
    entries.push(Complex::from_polar(1.0, -sign * alpha));
    entries
}
