//! Wave-plate synthesis for the heralded retrieval measurement in a
//! polarization interferometer.
//!
//! The target device realizes the qubit-to-qutrit gate `M` of
//! [`crate::retrieval_circuits`] on a polarization qubit: a half-wave plate
//! `W(B, pi)` and a quarter-wave plate split the input, a beam displacer
//! routes H into an upper arm and V into a lower arm, the upper arm passes a
//! polarization flip while the lower arm passes `W(Gamma, pi)`, a second
//! displacer merges the lower-arm H component back into the upper arm, and a
//! final quarter-/half-wave pair (`W(Delta, pi)`) acts on the upper arm.
//! Three detectors watch the surviving modes; the physical input always
//! enters through a Hadamard, so the plate product `C` must equal the gate in
//! the Hadamard frame, where its two columns are exactly the amplitude rows
//! `a1` and `a2`.
//!
//! [`compile_angles`] solves for the three plate axes in closed form; the
//! residual `|C - K|_F` is roundoff-sized everywhere in range, including the
//! top of the range where the fail row of `K` vanishes.  [`compile_usd`]
//! instead configures the same hardware as an unambiguous discriminator for
//! a conjugate phase pair.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, PI};

use serde::{Deserialize, Serialize};

use crate::analytics::Regime;
use crate::error::{Error, Result};
use crate::matrix_core::{hadamard, outer, pauli_x, CMatrix, C64, ONE, ZERO};
use crate::retrieval_circuits::build_isometry_m;

// ---------------------------------------------------------------------------
// Wave plates and fixed optical elements
// ---------------------------------------------------------------------------

/// Ideal wave plate with its slow axis at `axis_angle` from horizontal and
/// retardance `retardance`.
///
/// Jones matrix: `W(x, y) = |L_x><L_x| + e^{-iy} |L_{x+pi/2}><L_{x+pi/2}|`
/// with `L_x = (cos x, sin x)`; always unitary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavePlate {
    pub axis_angle: f64,
    pub retardance: f64,
}

impl WavePlate {
    /// Half-wave plate (`y = pi`) at axis `x`.
    pub fn half(x: f64) -> Self {
        Self { axis_angle: x, retardance: PI }
    }

    /// Quarter-wave plate (`y = pi/2`) at axis `x`.
    pub fn quarter(x: f64) -> Self {
        Self { axis_angle: x, retardance: FRAC_PI_2 }
    }

    /// 2x2 Jones matrix of the plate.
    pub fn jones(self) -> CMatrix {
        let (x, y) = (self.axis_angle, self.retardance);
        let slow = [C64::new(x.cos(), 0.0), C64::new(x.sin(), 0.0)];
        let fast = [C64::new(-x.sin(), 0.0), C64::new(x.cos(), 0.0)];
        &outer(&slow, &slow) + &outer(&fast, &fast).scale(C64::from_polar(1.0, -y))
    }
}

/// First beam displacer: H stays in the upper arm, V drops to the lower arm.
/// Maps the 2-dim polarization input onto the 4 arm/polarization modes
/// (upper-H, upper-V, lower-H, lower-V).
fn displacer_split() -> CMatrix {
    let mut d = CMatrix::zeros(4, 2);
    d[(0, 0)] = ONE;
    d[(3, 1)] = ONE;
    d
}

/// Second beam displacer: lower-arm H joins the upper arm, both V modes stay
/// put, and the (empty) upper-H input is discarded.  Maps the 4 arm modes
/// onto the 3 detector modes (upper-H, upper-V, lower-V) = (D0, D1, D2).
fn displacer_merge() -> CMatrix {
    let mut d = CMatrix::zeros(3, 4);
    d[(0, 2)] = ONE;
    d[(1, 1)] = ONE;
    d[(2, 3)] = ONE;
    d
}

/// Embed a 2x2 Jones matrix on the upper pair of the 3 detector modes.
fn on_upper_arm(w: &CMatrix) -> CMatrix {
    CMatrix::from_fn(3, 3, |i, j| match (i, j) {
        (2, 2) => ONE,
        (2, _) | (_, 2) => ZERO,
        _ => w[(i, j)],
    })
}

/// Full 3x2 transfer matrix of the plate arrangement: final half/quarter pair
/// on the upper arm, merge displacer, per-arm middle stage (polarization flip
/// up, `W(Gamma, pi)` down), split displacer, then the input quarter/half
/// pair.  The second quarter-wave plate sits at axis 0 for the gate modes and
/// at `pi/4` for unambiguous discrimination.
fn plate_product(b: f64, gamma: f64, delta: f64, second_qwp_axis: f64) -> CMatrix {
    let pre = &WavePlate::quarter(0.0).jones() * &WavePlate::half(b).jones();
    let lower = WavePlate::half(gamma).jones();
    let mid = CMatrix::from_fn(4, 4, |i, j| match (i / 2, j / 2) {
        (0, 0) => pauli_x()[(i, j)],
        (1, 1) => lower[(i - 2, j - 2)],
        _ => ZERO,
    });
    let post = &on_upper_arm(&WavePlate::half(delta).jones())
        * &on_upper_arm(&WavePlate::quarter(second_qwp_axis).jones());
    let staged = &(&displacer_merge() * &mid) * &displacer_split();
    &(&post * &staged) * &pre
}

// ---------------------------------------------------------------------------
// Compilation record
// ---------------------------------------------------------------------------

/// Which target the plate angles were solved for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompilationMode {
    /// Gate `M` in the single-success regime (`alpha < chi_n`).
    IsometrySmall,
    /// Gate `M` in the two-success regime (`alpha >= chi_n`).
    IsometryLarge,
    /// Unambiguous discrimination of a conjugate phase pair.
    Usd,
}

impl CompilationMode {
    /// Stable lowercase tag used in CSV/JSON output.
    pub fn tag(self) -> &'static str {
        match self {
            CompilationMode::IsometrySmall => "isometry_small",
            CompilationMode::IsometryLarge => "isometry_large",
            CompilationMode::Usd => "usd",
        }
    }
}

impl std::fmt::Display for CompilationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Compiled plate angles together with the target and achieved transfer
/// matrices.
///
/// `c_matrix = e^{i global_phase} * plate_product(B, Gamma, Delta)`: the
/// overall optical phase of the block is unobservable, so it is fixed by
/// rotating `Tr(K† C)` onto the nonnegative real axis.  The solved axes are
/// principal-branch values in `(-pi/2, pi/2]`; they are deliberately not
/// reduced further, because flipping a single plate's Jones sign is only a
/// global phase for the plates every path crosses, not for the per-arm ones.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PovmCompilation {
    pub n: u32,
    pub alpha: f64,
    pub mode: CompilationMode,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "Gamma")]
    pub gamma: f64,
    #[serde(rename = "Delta")]
    pub delta: f64,
    pub global_phase: f64,
    pub k_matrix: CMatrix,
    pub c_matrix: CMatrix,
    pub residual_norm: f64,
}

impl PovmCompilation {
    /// Rebuild the raw plate product from the stored angles (with the
    /// mode-appropriate second quarter-wave axis) and re-apply the stored
    /// phase; equals `c_matrix` to roundoff.
    pub fn rebuild_product(&self) -> CMatrix {
        let axis = match self.mode {
            CompilationMode::Usd => FRAC_PI_4,
            _ => 0.0,
        };
        plate_product(self.b, self.gamma, self.delta, axis)
            .scale(C64::from_polar(1.0, self.global_phase))
    }

    /// Worst deviation of `C† C` from the identity (column orthonormality).
    pub fn orthonormality_residual(&self) -> f64 {
        let gram = &self.c_matrix.dagger() * &self.c_matrix;
        (&gram - &CMatrix::identity(2)).frobenius_norm()
    }

    /// Angle-table CSV row: `n,alpha,regime,B,Gamma,Delta,residual_norm`
    /// (radians to 12 decimals, residual in scientific notation).
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.12},{},{:.12},{:.12},{:.12},{:.3e}",
            self.n,
            self.alpha,
            self.mode.tag(),
            self.b,
            self.gamma,
            self.delta,
            self.residual_norm
        )
    }
}

// ---------------------------------------------------------------------------
// Angle synthesis
// ---------------------------------------------------------------------------

/// Solve the three half-wave axes so the plate product matches the real
/// frame `[a1 | a2]` up to a global phase.
///
/// Write `u = (cos 2B, sin 2B)` and `w = (sin 2B, -cos 2B)`.  Stripping the
/// common `-i` contributed by the two quarter-wave plates, the product is a
/// real 3x2 matrix whose bottom row is `-cos(2 Gamma) w` and whose upper 2x2
/// block is a proper rotation by `2 Delta - pi/2` of the stacked rows
/// `(u; sin(2 Gamma) w)`.  Reading the bottom row of the target fixes `w`
/// and `cos 2 Gamma`; since `u` is a unit vector orthogonal to the bottom
/// row, `K_upper u` recovers the rotation column `(sin 2 Delta,
/// -cos 2 Delta)` exactly, and `K_upper w` then yields `sin 2 Gamma`.  Every
/// real 3x2 frame is reachable, so there is no branch clamping and no
/// residual beyond roundoff.
fn solve_plate_angles(a1: [f64; 3], a2: [f64; 3]) -> (f64, f64, f64) {
    let k3 = [a1[2], a2[2]];
    let r3 = k3[0].hypot(k3[1]);
    let ku = [[a1[0], a2[0]], [a1[1], a2[1]]];
    let (two_b, two_d, s2g, c2g);
    if r3 > 1e-9 {
        let w = [-k3[0] / r3, -k3[1] / r3];
        two_b = w[0].atan2(-w[1]);
        let u = [two_b.cos(), two_b.sin()];
        let ru = [ku[0][0] * u[0] + ku[0][1] * u[1], ku[1][0] * u[0] + ku[1][1] * u[1]];
        two_d = ru[0].atan2(-ru[1]);
        let rw = [ku[0][0] * w[0] + ku[0][1] * w[1], ku[1][0] * w[0] + ku[1][1] * w[1]];
        s2g = rw[0] * two_d.cos() + rw[1] * two_d.sin();
        c2g = r3;
    } else {
        // Vanishing fail row: the upper block is orthogonal, its determinant
        // sign dictates `sin 2 Gamma = -det`, and the split axis is free.
        let det = ku[0][0] * ku[1][1] - ku[0][1] * ku[1][0];
        s2g = -det.signum();
        c2g = 0.0;
        two_b = 0.0;
        two_d = ku[0][0].atan2(-ku[1][0]);
    }
    let two_g = s2g.atan2(c2g);
    (0.5 * two_b, 0.5 * two_g, 0.5 * two_d)
}

/// Rotate `raw` by the phase that makes `Tr(K† raw)` real nonnegative.
/// Returns the rotated matrix and the applied phase.
fn align_to_target(raw: CMatrix, k: &CMatrix) -> (CMatrix, f64) {
    let tr = (&k.dagger() * &raw).trace();
    if tr.norm() < 1e-12 {
        return (raw, 0.0);
    }
    let phase = -tr.arg();
    (raw.scale(C64::from_polar(1.0, phase)), phase)
}

/// Compile `(n, alpha)` into wave-plate angles realizing the retrieval gate
/// (in the Hadamard frame) on the three-detector block.
///
/// Requires `0 < alpha <= pi/(4n)`; the regime picks the target frame and
/// the reported mode.  The returned residual is `|C - K|_F`.
pub fn compile_angles(n: u32, alpha: f64) -> Result<PovmCompilation> {
    let gate = build_isometry_m(n, alpha)?;
    let (a1, a2) = (gate.a1(), gate.a2());
    let k = CMatrix::from_fn(3, 2, |i, j| {
        C64::new(if j == 0 { a1[i] } else { a2[i] }, 0.0)
    });
    let (b, gamma, delta) = solve_plate_angles(a1, a2);
    let raw = plate_product(b, gamma, delta, 0.0);
    let (c, global_phase) = align_to_target(raw, &k);
    let residual_norm = (&c - &k).frobenius_norm();
    let mode = match gate.regime() {
        Regime::SmallAlpha => CompilationMode::IsometrySmall,
        _ => CompilationMode::IsometryLarge,
    };
    Ok(PovmCompilation {
        n,
        alpha,
        mode,
        b,
        gamma,
        delta,
        global_phase,
        k_matrix: k,
        c_matrix: c,
        residual_norm,
    })
}

/// Configure the block as an unambiguous discriminator for the conjugate
/// pair `(|0> + e^{+-2i alpha}|1>)/sqrt(2)` (equivalently the one-use
/// storage states at `alpha`; pass `n * alpha` for the n-use pair).
///
/// Plate settings: `B = pi/4`, `Gamma = arcsin(tan|alpha|)/2`,
/// `Delta = -pi/8`, quarter-wave axes `0` and `pi/4`.  Detector D0 fires
/// only for the `-` member, D1 only for the `+` member, and D2 collects the
/// inconclusive weight; each conclusive rate is `(1 - cos 2 alpha)/2` per
/// member, the optimum for equal priors.
pub fn compile_usd(alpha: f64) -> Result<PovmCompilation> {
    if alpha.is_nan() || alpha.abs() >= FRAC_PI_4 {
        return Err(Error::UsdDomain { alpha });
    }
    let b = FRAC_PI_4;
    let gamma = 0.5 * alpha.abs().tan().asin();
    let delta = -FRAC_PI_8;
    let c = plate_product(b, gamma, delta, FRAC_PI_4);
    Ok(PovmCompilation {
        n: 1,
        alpha,
        mode: CompilationMode::Usd,
        b,
        gamma,
        delta,
        global_phase: 0.0,
        k_matrix: c.clone(),
        c_matrix: c,
        residual_norm: 0.0,
    })
}

/// Transition angle separating the two gate regimes on the optical side:
/// the root of `cos(2n a) cos(2a - pi/4) = sqrt(2)/2` in `(0, pi/(4n))`.
/// Coincides with the seam angle [`crate::analytics::chi_n`], since
/// `cos 2a + sin 2a = sqrt(2) cos(2a - pi/4)`.
pub fn transition_alpha(n: u32) -> f64 {
    assert!(n >= 1, "transition angle needs n >= 1");
    let nf = n as f64;
    let g = |a: f64| (2.0 * nf * a).cos() * (2.0 * a - FRAC_PI_4).cos() - FRAC_1_SQRT_2;
    // a = 0 is a trivial root; g rises before crossing down once in range.
    let mut lo = 1e-6;
    let mut hi = FRAC_PI_4 / nf;
    debug_assert!(g(lo) > 0.0 && g(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Detector distribution over `(D0, D1, D2)` when `input` (a 2-dim state)
/// enters the compiled block through its Hadamard pre-gate.
pub fn simulate_optical_block(comp: &PovmCompilation, input: &[C64; 2]) -> [f64; 3] {
    let rotated = hadamard().matvec(input);
    let out = comp.c_matrix.matvec(&rotated);
    [out[0].norm_sqr(), out[1].norm_sqr(), out[2].norm_sqr()]
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
