//! Continuous-variable teleportation and dense coding on truncated Fock spaces.
//!
//! Teleportation with the standard protocol (joint `x − x`, `p + p`
//! measurement, classical message, displacement correction) acts on the input
//! state as a random-displacement channel
//!
//! ```text
//! L(ρ) = ∫∫ dx dp  P(x, p) D(x, p) ρ D†(x, p),
//! P(x, p) = ⟨Ψ(x, p)| W |Ψ(x, p)⟩,   |Ψ(x, p)⟩ = (1 ⊗ D(x, p)) |Φ⟩,
//! ```
//!
//! where `W` is the shared resource state and `|Φ⟩ = (2π)^{-1/2} Σ_n |n, n⟩` the
//! ideal EPR vector. For a two-mode squeezed vacuum `P` is a Gaussian with
//! variance `n̄ = e^{−2r}` per quadrature and the channel is a thermalizing
//! channel. The same `P` is the noise kernel of dense coding.
//!
//! The crate computes the channel ([`channel`]), an independent simulation of
//! the measurement protocol ([`protocol`]), a Gaussian moment fast path
//! ([`gaussian`]) and dense coding ([`dense_coding`]), all on the truncated
//! Fock substrate in [`fock`]. [`verify`] runs the cross-checks between them.
//!
//! Conventions (ħ = 1, `α = (x + ip)/√2`, index `a·n_max + b`) are documented on
//! [`fock`].

pub mod channel;
pub mod cli;
pub mod dense_coding;
pub mod epr;
mod error;
pub mod fock;
pub mod gaussian;
pub mod grid;
pub mod protocol;
pub mod sampling;
mod summation;
pub mod verify;

pub use error::{Error, Result};
pub use fock::{DensityMatrix, FockDim, Mode, PhasePoint, TwoModeState};
