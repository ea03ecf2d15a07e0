//! Crate-wide error type. Dimension bugs inside hot loops are programmer
//! errors and panic via `assert!`; everything a caller can trigger with bad
//! input surfaces as an `Error`.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("operator is not unitary (defect {residual:.3e})")]
    NotUnitary { residual: f64 },

    #[error("operator is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NotPsd { min_eig: f64 },

    #[error("alpha = {alpha} outside the admissible range (0, pi/(4n)] for n = {n}")]
    AlphaOutOfRange { alpha: f64, n: u32 },

    #[error("pair is perfectly distinguishable: 4 n alpha = {spread} >= pi")]
    PerfectlyDistinguishable { spread: f64 },

    #[error("infeasible overlap embedding: |{name}| = {magnitude} exceeds 1")]
    GramInfeasible { name: String, magnitude: f64 },

    #[error("success probability is zero; no conditional channel exists")]
    ZeroSuccessProbability,

    #[error("unambiguous-discrimination compilation needs |alpha| < pi/4, got {alpha}")]
    UsdDomain { alpha: f64 },

    #[error("tomogram invalid: {0}")]
    Tomogram(String),
}

pub type Result<T> = std::result::Result<T, Error>;
