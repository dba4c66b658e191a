//! Truncated Fock-space substrate.
//!
//! Conventions used throughout the crate:
//!
//! * ħ = 1 and `[x̂, p̂] = i`, so each vacuum quadrature has variance 1/2.
//! * `â = (x̂ + i p̂)/√2`, and a phase point `(x, p)` labels the displacement
//!   `D̂(x, p) = exp[i(p x̂ − x p̂)] = exp(α â† − α* â)` with `α = (x + i p)/√2`.
//! * Two-mode operators act on `|a⟩⊗|b⟩`, flattened to row index `a·n_max + b`.
//!   A pure two-mode vector is stored as an `n_max × n_max` amplitude matrix
//!   `M[a, b]`, which is exactly the row-major reshape of that flat vector.

mod measures;
mod operators;
mod state;
mod two_mode;

pub use measures::{fidelity, hermitian_eigen, psd_sqrt, trace_distance};
pub use operators::{
    annihilation, creation, displacement, displacement_alpha, displacement_diagonal, ln_factorial, momentum, number,
    position,
};
pub use state::{DensityMatrix, MatrixJson, DEFAULT_LEAKAGE_WARN};
pub use two_mode::{Mode, TwoModeJson, TwoModeState};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Default number of retained Fock levels per mode.
pub const DEFAULT_N_MAX: usize = 40;

/// Number of retained Fock levels `|0⟩ … |n_max − 1⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct FockDim(usize);

impl FockDim {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 2 {
            return Err(Error::InvalidDimension(n_max));
        }
        Ok(Self(n_max))
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0
    }

    /// Dimension of the two-mode product space.
    #[inline]
    pub fn two_mode(self) -> usize {
        self.0 * self.0
    }

    pub(crate) fn check(self, found: usize) -> Result<()> {
        if found != self.0 {
            return Err(Error::DimensionMismatch {
                expected: self.0,
                found,
            });
        }
        Ok(())
    }
}

impl Default for FockDim {
    fn default() -> Self {
        Self(DEFAULT_N_MAX)
    }
}

impl TryFrom<usize> for FockDim {
    type Error = Error;
    fn try_from(value: usize) -> Result<Self> {
        Self::new(value)
    }
}

impl From<FockDim> for usize {
    fn from(d: FockDim) -> usize {
        d.0
    }
}

/// A point `(x, p)` in phase space: a measurement outcome or a displacement label.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: f64,
    pub p: f64,
}

impl PhasePoint {
    pub const ORIGIN: PhasePoint = PhasePoint { x: 0.0, p: 0.0 };

    pub fn new(x: f64, p: f64) -> Result<Self> {
        if !x.is_finite() || !p.is_finite() {
            return Err(Error::OutOfRange(format!(
                "phase point ({x}, {p}) is not finite"
            )));
        }
        Ok(Self { x, p })
    }

    /// `α = (x + i p)/√2`.
    #[inline]
    pub fn alpha(self) -> Complex64 {
        Complex64::new(self.x, self.p) / std::f64::consts::SQRT_2
    }

    #[inline]
    pub fn from_alpha(alpha: Complex64) -> Self {
        Self {
            x: alpha.re * std::f64::consts::SQRT_2,
            p: alpha.im * std::f64::consts::SQRT_2,
        }
    }

    #[inline]
    pub fn norm_sqr(self) -> f64 {
        self.x * self.x + self.p * self.p
    }
}

impl std::ops::Add for PhasePoint {
    type Output = PhasePoint;
    fn add(self, o: PhasePoint) -> PhasePoint {
        PhasePoint {
            x: self.x + o.x,
            p: self.p + o.p,
        }
    }
}

impl std::ops::Sub for PhasePoint {
    type Output = PhasePoint;
    fn sub(self, o: PhasePoint) -> PhasePoint {
        PhasePoint {
            x: self.x - o.x,
            p: self.p - o.p,
        }
    }
}

impl std::ops::Neg for PhasePoint {
    type Output = PhasePoint;
    fn neg(self) -> PhasePoint {
        PhasePoint {
            x: -self.x,
            p: -self.p,
        }
    }
}
