//! Numerical laboratory for storage and retrieval (SAR) of one of two known
//! unitary channels chosen with equal prior.
//!
//! The library covers the full pipeline:
//!
//! * [`matrix_core`] — small dense complex linear algebra, double-kets and
//!   Choi operators (everything here is `d <= 16`, so plain `Vec`-backed
//!   matrices are both simple and fast);
//! * [`canonical_pair`] — reduction of an arbitrary unitary pair to the
//!   diagonal normal form `U_0 = diag(e^{i a}, e^{i b_k}, e^{-i a})`,
//!   `U_1 = conj(U_0)`, exposing the discrimination angle `alpha`;
//! * [`analytics`] — closed-form figures of merit: deterministic retrieval
//!   fidelity, probabilistic success probability with its two regimes,
//!   asymptotics, group-protocol baselines and the program-state
//!   reparameterization `beta = 2 n alpha`;
//! * [`retrieval_circuits`] — exact simulation of the constructive protocols:
//!   the qubit retrieval instrument (storage CNOT, qubit-to-qutrit isometry,
//!   feed-forward), the measure-and-prepare deterministic protocol, and the
//!   qudit retrieval isometry;
//! * [`verification_oracle`] — independent brute-force optimizers for the
//!   underlying discrimination problems, the block-diagonal structure checks,
//!   and Monte-Carlo validation of the average-fidelity identity;
//! * [`optics_compiler`] — wave-plate angle synthesis for the three-outcome
//!   measurement block in Jones calculus, plus an unambiguous-discrimination
//!   mode;
//! * [`experiment_harness`] — shot-noise simulation of the tomographic
//!   experiment with pluggable noise (depolarized CNOT, measurement
//!   misalignment, storage phase error) and bootstrap interval estimators.
//!
//! Sweeps and sample batteries are data-parallel via `rayon` when the
//! `parallel` feature (default) is enabled; disabling it swaps in sequential
//! loops with bit-identical results.

pub mod analytics;
pub mod canonical_pair;
pub mod error;
pub mod experiment_harness;
pub mod matrix_core;
pub mod optics_compiler;
pub mod par;
pub mod retrieval_circuits;
pub mod verification_oracle;

pub use error::{Error, Result};
pub use matrix_core::{C64, CMatrix, ChoiOperator, DoubleKet};
