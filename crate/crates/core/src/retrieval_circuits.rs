//! Constructive retrieval protocols, simulated as explicit linear maps.
//!
//! Three constructions live here: the probabilistic qubit circuit (a
//! controlled-X into a `3x2` gate `M`, success heralded by the first two
//! outcomes), the deterministic measure-and-prepare protocol (measure the
//! storage qubit, prepare one of two fixed unitaries), and the qudit
//! isometry that lifts the heralded scheme to carrier dimension `d` at
//! unchanged success probability. Every simulation contracts the actual
//! circuit; closed forms from [`crate::analytics`] enter only as gate
//! coefficients, never as a shortcut past the contraction, so the closed
//! forms stay available as independent test oracles.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::analytics::{classify_regime, lambdas, success_probability, Regime};
use crate::canonical_pair::CanonicalPair;
use crate::error::{Error, Result};
use crate::matrix_core::{
    basis_state, inner, kron, pauli_x, pauli_z, projector, C64, CMatrix, ChoiOperator, ONE, ZERO,
};
use crate::verification_oracle::ReducedProblem;

// ---------------------------------------------------------------------------
// The qutrit gate M
// ---------------------------------------------------------------------------

/// The `3x2` gate `M = |a_1><+| + |a_2><-|` that converts stored phase
/// information into a heralded retrieval. Rows are measurement outcomes:
/// 0 and 1 herald success, 2 flags failure.
#[derive(Debug, Clone)]
pub struct QutritIsometryM {
    matrix: CMatrix,
    regime: Regime,
    a1: [f64; 3],
    a2: [f64; 3],
}

impl QutritIsometryM {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Coefficient branch actually used; only ever the small- or large-angle
    /// variant (the seam is folded into the large branch).
    pub fn regime(&self) -> Regime {
        self.regime
    }

    /// Image of `|+>`.
    pub fn a1(&self) -> [f64; 3] {
        self.a1
    }

    /// Image of `|->`.
    pub fn a2(&self) -> [f64; 3] {
        self.a2
    }

    /// `||M†M - I_2||_F`.
    pub fn isometry_residual(&self) -> f64 {
        (&(&self.matrix.dagger() * &self.matrix) - &CMatrix::identity(2)).frobenius_norm()
    }
}

/// Build the retrieval gate for `(n, alpha)`, choosing the coefficient
/// branch by the position of `alpha` relative to the seam.
///
/// Errors with [`Error::AlphaOutOfRange`] unless `0 < 4n·alpha <= pi`.
pub fn build_isometry_m(n: u32, alpha: f64) -> Result<QutritIsometryM> {
    let regime = match classify_regime(n, alpha) {
        Regime::Degenerate => return Err(Error::AlphaOutOfRange { alpha, n }),
        Regime::SmallAlpha => Regime::SmallAlpha,
        // The seam belongs to the closed large-angle interval.
        Regime::Boundary | Regime::LargeAlpha => Regime::LargeAlpha,
    };
    let nf = n as f64;
    let (c, s) = (alpha.cos(), alpha.sin());
    let (cn, sn) = ((nf * alpha).cos(), (nf * alpha).sin());
    let (ct, st) = ((2.0 * alpha).cos(), (2.0 * alpha).sin());
    let ctn = (2.0 * nf * alpha).cos();
    let (a1, a2) = if regime == Regime::LargeAlpha {
        let (la, lb) = lambdas(n, alpha)?;
        // nu_± = cos2na·sin2a·(1 ± sin2a)/(1 ± cos2na); clamped because both
        // cross zero with cos2na at the top of the range.
        let nu_p = (ctn * st * (1.0 + st) / (1.0 + ctn)).max(0.0);
        let nu_m = (ctn * st * (1.0 - st) / (1.0 - ctn)).max(0.0);
        (
            [la.sqrt() * c / cn, lb.sqrt() * s / cn, nu_p.sqrt()],
            [la.sqrt() * s / sn, -(lb.sqrt() * c / sn), -nu_m.sqrt()],
        )
    } else {
        // Small angles: no middle component, a + b = 1 in closed form.
        let a = (1.0 + ct) * (1.0 - ctn) / (2.0 * (1.0 - ct * ctn));
        let b = (1.0 - ct) * (1.0 + ctn) / (2.0 * (1.0 - ct * ctn));
        ([a.sqrt(), 0.0, b.sqrt()], [b.sqrt(), 0.0, -a.sqrt()])
    };
    let matrix = CMatrix::from_fn(3, 2, |i, j| {
        let x = if j == 0 { a1[i] + a2[i] } else { a1[i] - a2[i] };
        C64::new(x * FRAC_1_SQRT_2, 0.0)
    });
    Ok(QutritIsometryM { matrix, regime, a1, a2 })
}

// ---------------------------------------------------------------------------
// The heralded qubit instrument
// ---------------------------------------------------------------------------

/// Outcome classes of the heralded instrument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchLabel {
    /// Outcome 0: retrieval succeeded, no correction needed.
    #[serde(rename = "success_0")]
    Success0,
    /// Outcome 1 after its `sigma_z` correction.
    #[serde(rename = "success_1_corrected")]
    Success1Corrected,
    /// Outcome 2: the attempt failed. The failure *probability* is still
    /// independent of the input state.
    #[serde(rename = "fail")]
    Fail,
}

impl BranchLabel {
    pub fn tag(self) -> &'static str {
        match self {
            BranchLabel::Success0 => "success_0",
            BranchLabel::Success1Corrected => "success_1_corrected",
            BranchLabel::Fail => "fail",
        }
    }

    pub fn is_success(self) -> bool {
        !matches!(self, BranchLabel::Fail)
    }
}

impl fmt::Display for BranchLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// One outcome of the instrument: a label and its Kraus operator on the
/// input qubit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KrausBranch {
    pub label: BranchLabel,
    pub kraus: CMatrix,
}

impl KrausBranch {
    /// `Tr K†K / d`: the outcome probability on a maximally mixed input —
    /// and on every input whenever `K†K` is proportional to the identity,
    /// which holds for all branches produced here.
    pub fn weight(&self) -> f64 {
        (&self.kraus.dagger() * &self.kraus).trace().re / self.kraus.cols() as f64
    }
}

/// Result of running the heralded circuit on the storage state of one pair
/// member: three Kraus branches plus the run metadata. Serializes to JSON
/// with complex entries as `[re, im]` pairs, row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetrievalInstrument {
    pub branches: Vec<KrausBranch>,
    pub n: u32,
    pub alpha: f64,
    /// Which member of the pair was stored (0 or 1).
    pub which: usize,
    pub regime: Regime,
}

impl RetrievalInstrument {
    /// `||sum_K K†K - I||_F`; zero for a complete instrument.
    pub fn completeness_residual(&self) -> f64 {
        assert!(!self.branches.is_empty(), "instrument has no branches");
        let d = self.branches[0].kraus.cols();
        let mut acc = CMatrix::zeros(d, d);
        for b in &self.branches {
            acc = &acc + &(&b.kraus.dagger() * &b.kraus);
        }
        (&acc - &CMatrix::identity(d)).frobenius_norm()
    }

    /// Total weight of the success branches (input-independent here).
    pub fn success_probability(&self) -> f64 {
        self.branches.iter().filter(|b| b.label.is_success()).map(KrausBranch::weight).sum()
    }

    pub fn branch(&self, label: BranchLabel) -> Option<&KrausBranch> {
        self.branches.iter().find(|b| b.label == label)
    }

    pub fn dump_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instrument serializes")
    }
}

/// Run the heralded circuit on `|psi_{n,which}> (x) input`: the input qubit
/// controls an X on the storage qubit, the gate `M` maps the storage qubit
/// into the outcome qutrit, and outcome 1 receives a `sigma_z` correction.
/// Success phases are canonicalized so `Tr(K† U_which)` is real nonnegative.
pub fn simulate_qubit_retrieval(pair: &CanonicalPair, which: usize) -> Result<RetrievalInstrument> {
    if pair.dim() != 2 {
        return Err(Error::Dimension(format!(
            "qubit retrieval circuit needs d = 2, got d = {}",
            pair.dim()
        )));
    }
    assert!(which < 2, "which selects a pair member");
    let (n, alpha) = (pair.uses(), pair.alpha());
    let gate = build_isometry_m(n, alpha)?;
    // Joint order: storage (x) input; the input qubit is the control.
    let p0 = projector(&basis_state(2, 0));
    let p1 = projector(&basis_state(2, 1));
    let cx = &kron(&CMatrix::identity(2), &p0) + &kron(&pauli_x(), &p1);
    let staged = &kron(gate.matrix(), &CMatrix::identity(2)) * &cx;
    let psi = pair.storage_state(which);
    // Embed the input qubit: |j> -> |psi> (x) |j>.
    let embed = CMatrix::from_fn(4, 2, |r, j| if r % 2 == j { psi[r / 2] } else { ZERO });
    let contracted = &staged * &embed; // 6x2, outcome-major rows
    let target = pair.canonical_u(which);
    let labels = [BranchLabel::Success0, BranchLabel::Success1Corrected, BranchLabel::Fail];
    let mut branches = Vec::with_capacity(3);
    for (outcome, label) in labels.into_iter().enumerate() {
        let mut k = CMatrix::from_fn(2, 2, |i, j| contracted[(outcome * 2 + i, j)]);
        if label == BranchLabel::Success1Corrected {
            k = &pauli_z() * &k;
        }
        if label.is_success() {
            k = align_phase(&k, &target);
        }
        branches.push(KrausBranch { label, kraus: k });
    }
    Ok(RetrievalInstrument { branches, n, alpha, which, regime: gate.regime() })
}

/// Rotate `K` by a global phase so `Tr(K† target)` lands on the nonnegative
/// real axis; (near-)zero operators pass through unchanged.
fn align_phase(k: &CMatrix, target: &CMatrix) -> CMatrix {
    let tr = (&target.dagger() * k).trace();
    if tr.norm() < 1e-12 {
        return k.clone();
    }
    k.scale((tr / tr.norm()).conj())
}

/// Normalize the success branches of an instrument into the conditional
/// retrieval channel. The success weight of this construction is
/// input-independent, so conditioning is a plain rescale by `1/sqrt(p)`.
pub fn retrieved_channel_on_success(instr: &RetrievalInstrument) -> Result<ChoiOperator> {
    let p = instr.success_probability();
    if p < 1e-14 {
        return Err(Error::ZeroSuccessProbability);
    }
    let scale = C64::new(1.0 / p.sqrt(), 0.0);
    let kraus: Vec<CMatrix> = instr
        .branches
        .iter()
        .filter(|b| b.label.is_success())
        .map(|b| b.kraus.scale(scale))
        .collect();
    Ok(ChoiOperator::from_kraus(&kraus))
}

// ---------------------------------------------------------------------------
// Deterministic measure-and-prepare retrieval
// ---------------------------------------------------------------------------

/// Measure-and-prepare retrieval: project the storage qubit onto
/// `(|+> ± i|->)/sqrt(2)` and prepare `a·I ± i b·sigma_z`, with `(a, b)` the
/// minimum-error discrimination optimum of the reduced two-state problem.
/// Returns the effective Choi operators for stored member 0 and 1 and the
/// achieved entanglement fidelity (averaged over the two members).
pub fn simulate_deterministic_retrieval(
    pair: &CanonicalPair,
) -> Result<(ChoiOperator, ChoiOperator, f64)> {
    if pair.dim() != 2 {
        return Err(Error::Dimension(format!(
            "measure-and-prepare protocol needs d = 2, got d = {}",
            pair.dim()
        )));
    }
    let (n, alpha) = (pair.uses(), pair.alpha());
    let [a, b] = ReducedProblem::new(n, alpha).helstrom_vector();
    let id = CMatrix::identity(2);
    let sz = pauli_z();
    let choi_up = ChoiOperator::of_unitary(&(&id.scale(C64::new(a, 0.0)) + &sz.scale(C64::new(0.0, b))));
    let choi_down =
        ChoiOperator::of_unitary(&(&id.scale(C64::new(a, 0.0)) - &sz.scale(C64::new(0.0, b))));
    // Ket |up> = (|+> + i|->)/sqrt(2) = ((1+i)|0> + (1-i)|1>)/2.
    let up = [C64::new(0.5, 0.5), C64::new(0.5, -0.5)];
    let mut out = Vec::with_capacity(2);
    let mut fid = 0.0;
    for which in 0..2 {
        let psi = pair.storage_state(which);
        let p_up = inner(&up, &psi).norm_sqr();
        let x = choi_up.mix(&choi_down, 1.0 - p_up);
        fid += 0.5 * x.process_fidelity_to(&pair.canonical_u(which));
        out.push(x);
    }
    let x1 = out.pop().expect("two members");
    let x0 = out.pop().expect("two members");
    Ok((x0, x1, fid))
}

// ---------------------------------------------------------------------------
// Qudit isometry
// ---------------------------------------------------------------------------

/// Explicit `(4d) x (2d)` isometry realizing heralded retrieval in carrier
/// dimension `d`. Domain: the level register `C^d` tensor the storage qubit
/// (the span of `|0>, |d-1>`), columns `k·2 + a`. Range: `C^d` tensor a
/// two-level success register tensor the success/fail flag, rows
/// `k·4 + m·2 + f` with `f = 0` flagging success.
#[derive(Debug, Clone)]
pub struct QuditIsometryG {
    d: usize,
    n: u32,
    alpha: f64,
    regime: Regime,
    p_succ: f64,
    x: C64,
    y_diag: Vec<C64>,
    betas: Vec<[f64; 2]>,
    matrix: CMatrix,
}

impl QuditIsometryG {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn uses(&self) -> u32 {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    /// Closed-form success probability the construction targets.
    pub fn success_probability(&self) -> f64 {
        self.p_succ
    }

    /// Overlap of the two success states.
    pub fn x(&self) -> C64 {
        self.x
    }

    /// Per-level overlaps of the two failure states.
    pub fn y_diag(&self) -> &[C64] {
        &self.y_diag
    }

    /// Eigenphase table: `betas()[k] = [beta_{k,0}, beta_{k,1}]`.
    pub fn betas(&self) -> &[[f64; 2]] {
        &self.betas
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `||G†G - I_{2d}||_F`.
    pub fn isometry_residual(&self) -> f64 {
        (&(&self.matrix.dagger() * &self.matrix) - &CMatrix::identity(2 * self.d)).frobenius_norm()
    }

    /// Worst per-level residual of the overlap constraint
    /// `cos2na = P·zeta_k·x + (1-P)·y_{k,k}` with `zeta_k = e^{-2i beta_{k,0}}`.
    pub fn overlap_constraint_residual(&self) -> f64 {
        let ctn = (2.0 * self.n as f64 * self.alpha).cos();
        let mut worst = 0.0f64;
        for k in 0..self.d {
            let zeta = C64::from_polar(1.0, self.betas[k][1] - self.betas[k][0]);
            let rhs = zeta * self.x * self.p_succ + self.y_diag[k] * (1.0 - self.p_succ);
            worst = worst.max((C64::new(ctn, 0.0) - rhs).norm());
        }
        worst
    }

    /// Success-branch Kraus operators for stored member `which`, read off
    /// the assembled matrix by contracting the storage slot with the stored
    /// state and keeping the flag-0 rows.
    pub fn success_kraus(&self, which: usize) -> Vec<CMatrix> {
        assert!(which < 2, "which selects a pair member");
        let na = self.n as f64 * self.alpha;
        let sign = if which == 0 { 1.0 } else { -1.0 };
        let psi = [
            C64::from_polar(FRAC_1_SQRT_2, sign * na),
            C64::from_polar(FRAC_1_SQRT_2, -sign * na),
        ];
        (0..2)
            .map(|m| {
                CMatrix::from_fn(self.d, self.d, |kp, k| {
                    let row = kp * 4 + m * 2;
                    self.matrix[(row, k * 2)] * psi[0] + self.matrix[(row, k * 2 + 1)] * psi[1]
                })
            })
            .collect()
    }

    /// Success weight extracted from the assembled matrix (not the stored
    /// closed form): `sum_m Tr K_m†K_m / d`.
    pub fn extracted_success_probability(&self, which: usize) -> f64 {
        self.success_kraus(which)
            .iter()
            .map(|k| (&k.dagger() * k).trace().re / self.d as f64)
            .sum()
    }

    /// Conditional retrieval channel for stored member `which`.
    pub fn success_channel(&self, which: usize) -> Result<ChoiOperator> {
        let kraus = self.success_kraus(which);
        let p: f64 =
            kraus.iter().map(|k| (&k.dagger() * k).trace().re / self.d as f64).sum();
        if p < 1e-14 {
            return Err(Error::ZeroSuccessProbability);
        }
        let scale = C64::new(1.0 / p.sqrt(), 0.0);
        let scaled: Vec<CMatrix> = kraus.iter().map(|k| k.scale(scale)).collect();
        Ok(ChoiOperator::from_kraus(&scaled))
    }
}

fn check_overlap(name: String, z: C64) -> Result<()> {
    if z.norm() > 1.0 + 1e-12 {
        return Err(Error::GramInfeasible { name, magnitude: z.norm() });
    }
    Ok(())
}

/// Assemble the qudit isometry for a canonical pair. The overlap targets
/// `x` and `y_{k,k}` come from the regime's closed form; a magnitude above
/// one would mean a transcription bug, not bad input, and errors with
/// [`Error::GramInfeasible`].
pub fn build_qudit_isometry(pair: &CanonicalPair) -> Result<QuditIsometryG> {
    let (d, n, alpha) = (pair.dim(), pair.uses(), pair.alpha());
    let (p_succ, regime) = match success_probability(n, alpha)? {
        (_, Regime::Degenerate) => return Err(Error::AlphaOutOfRange { alpha, n }),
        (p, Regime::SmallAlpha) => (p, Regime::SmallAlpha),
        (p, _) => (p, Regime::LargeAlpha),
    };
    let (ct, st) = ((2.0 * alpha).cos(), (2.0 * alpha).sin());
    let ctn = (2.0 * n as f64 * alpha).cos();
    // Eigenphase table: U_i |k> = e^{i beta_{k,i}} |k>, beta_{k,1} = -beta_{k,0}.
    let betas: Vec<[f64; 2]> = pair.phases(0).iter().map(|&b| [b, -b]).collect();
    let x = if regime == Regime::LargeAlpha {
        C64::new(ctn * ct / (1.0 - ctn * st), 0.0)
    } else {
        ONE
    };
    check_overlap("x".into(), x)?;
    let mut y_diag = Vec::with_capacity(d);
    for (k, beta) in betas.iter().enumerate() {
        let zeta = C64::from_polar(1.0, beta[1] - beta[0]);
        let y = if regime == Regime::LargeAlpha {
            (ONE - zeta * ct) / st
        } else {
            (C64::new(ctn, 0.0) - zeta * p_succ) / (1.0 - p_succ)
        };
        check_overlap(format!("y[{k}]"), y)?;
        y_diag.push(y);
    }
    // Two-component Gram embeddings: first component carries the overlap,
    // second is real nonnegative.
    let embed2 = |overlap: C64| -> [[C64; 2]; 2] {
        let second = (1.0 - overlap.norm_sqr()).max(0.0).sqrt();
        [[ONE, ZERO], [overlap, C64::new(second, 0.0)]]
    };
    let phi = embed2(x);
    let sp = p_succ.sqrt();
    let sf = (1.0 - p_succ).max(0.0).sqrt();
    // Storage states on span{|0>, |d-1>} as the input frame; the frame is
    // invertible away from alpha = 0 (det = i sin2na).
    let na = n as f64 * alpha;
    let b_in = [
        [C64::from_polar(FRAC_1_SQRT_2, na), C64::from_polar(FRAC_1_SQRT_2, -na)],
        [C64::from_polar(FRAC_1_SQRT_2, -na), C64::from_polar(FRAC_1_SQRT_2, na)],
    ];
    let det = b_in[0][0] * b_in[1][1] - b_in[0][1] * b_in[1][0];
    let inv = [
        [b_in[1][1] / det, -b_in[0][1] / det],
        [-b_in[1][0] / det, b_in[0][0] / det],
    ];
    let mut matrix = CMatrix::zeros(4 * d, 2 * d);
    for (k, beta) in betas.iter().enumerate() {
        let eta = embed2(y_diag[k]);
        // Image of |k>|psi_{n,i}>: rows (m, f) within the level-k block.
        let mut b_out = [[ZERO; 2]; 4];
        for i in 0..2 {
            let ph = C64::from_polar(sp, beta[i]);
            for m in 0..2 {
                b_out[m * 2][i] = ph * phi[i][m];
                b_out[m * 2 + 1][i] = eta[i][m] * sf;
            }
        }
        // Level block G_k = B_out · B_in^{-1}.
        for r in 0..4 {
            for a in 0..2 {
                matrix[(k * 4 + r, k * 2 + a)] =
                    b_out[r][0] * inv[0][a] + b_out[r][1] * inv[1][a];
            }
        }
    }
    Ok(QuditIsometryG { d, n, alpha, regime, p_succ, x, y_diag, betas, matrix })
}

// ---------------------------------------------------------------------------
