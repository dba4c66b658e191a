//! Single-mode Gaussian moments: closed-form channel action and
//! coherent-vs-Gaussian fidelity. Covariance convention: vacuum = I/2.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fock::{momentum, position, CMatrix, DensityMatrix, FockDim};
use crate::{Error, Result};

const VALIDITY_TOLERANCE: f64 = 1e-12;
const COHERENT_TOLERANCE: f64 = 1e-9;

/// First and second quadrature moments `(⟨x̂⟩, ⟨p̂⟩)` and the symmetrized
/// covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianState {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

impl GaussianState {
    /// Validated constructor: `cov` symmetric, positive definite, and
    /// `det cov ≥ 1/4` (the single-mode uncertainty bound).
    pub fn new(mean: [f64; 2], cov: [[f64; 2]; 2]) -> Result<Self> {
        let s = Self { mean, cov };
        s.validate()?;
        Ok(s)
    }

    pub fn vacuum() -> Self {
        Self::thermal(0.0)
    }

    pub fn coherent(alpha: Complex64) -> Self {
        Self {
            mean: [alpha.re * std::f64::consts::SQRT_2, alpha.im * std::f64::consts::SQRT_2],
            cov: [[0.5, 0.0], [0.0, 0.5]],
        }
    }

    pub fn thermal(nbar: f64) -> Self {
        let v = nbar + 0.5;
        Self {
            mean: [0.0, 0.0],
            cov: [[v, 0.0], [0.0, v]],
        }
    }

    /// Squeezed vacuum with `cov = diag(e^{−2s}, e^{2s})/2`.
    pub fn squeezed(s: f64) -> Self {
        Self {
            mean: [0.0, 0.0],
            cov: [[0.5 * (-2.0 * s).exp(), 0.0], [0.0, 0.5 * (2.0 * s).exp()]],
        }
    }

    pub fn det(&self) -> f64 {
        self.cov[0][0] * self.cov[1][1] - self.cov[0][1] * self.cov[1][0]
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.cov;
        if self.mean.iter().chain(c.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite Gaussian moments".into()));
        }
        if (c[0][1] - c[1][0]).abs() > VALIDITY_TOLERANCE * (1.0 + c[0][1].abs()) {
            return Err(Error::OutOfRange("covariance is not symmetric".into()));
        }
        if c[0][0] <= 0.0 || c[1][1] <= 0.0 || self.det() < 0.25 - VALIDITY_TOLERANCE {
            return Err(Error::OutOfRange(format!(
                "covariance violates the uncertainty bound (det = {})",
                self.det()
            )));
        }
        Ok(())
    }

    fn is_coherent(&self) -> bool {
        (self.cov[0][0] - 0.5).abs() < COHERENT_TOLERANCE
            && (self.cov[1][1] - 0.5).abs() < COHERENT_TOLERANCE
            && self.cov[0][1].abs() < COHERENT_TOLERANCE
            && self.cov[1][0].abs() < COHERENT_TOLERANCE
    }
}

/// Mean unchanged, `cov → cov + n̄·I`.
pub fn apply_gaussian_channel(s: &GaussianState, nbar: f64) -> Result<GaussianState> {
    s.validate()?;
    if !(nbar >= 0.0) || !nbar.is_finite() {
        return Err(Error::OutOfRange(format!("n̄ = {nbar} must be ≥ 0")));
    }
    let mut out = *s;
    out.cov[0][0] += nbar;
    out.cov[1][1] += nbar;
    Ok(out)
}

/// `F = exp(−½ dᵀ(V_a + V_b)⁻¹ d) / √det(V_a + V_b)` for coherent `a`.
pub fn gaussian_fidelity(a: &GaussianState, b: &GaussianState) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    if !a.is_coherent() {
        return Err(Error::OutOfRange(
            "first argument must have coherent covariance I/2".into(),
        ));
    }
    let s = [
        [a.cov[0][0] + b.cov[0][0], a.cov[0][1] + b.cov[0][1]],
        [a.cov[1][0] + b.cov[1][0], a.cov[1][1] + b.cov[1][1]],
    ];
    let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    let d = [a.mean[0] - b.mean[0], a.mean[1] - b.mean[1]];
    let quad = (s[1][1] * d[0] * d[0] - (s[0][1] + s[1][0]) * d[0] * d[1] + s[0][0] * d[1] * d[1]) / det;
    Ok((-0.5 * quad).exp() / det.sqrt())
}

/// Quadrature moments of a Fock-space state, normalized by its trace.
///
/// Operators act in one extra level so that `x̂²` and `p̂²` are exact on the
/// retained subspace.
pub fn fock_to_gaussian_moments(rho: &DensityMatrix) -> GaussianState {
    let n = rho.dim().get();
    let big = FockDim::new(n + 1).expect("n + 1 ≥ 2");
    let mut m = CMatrix::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(rho.matrix());
    let tr = rho.trace();
    let x = position(big);
    let p = momentum(big);
    let ev = |op: &CMatrix| (&m * op).trace().re / tr;
    let mx = ev(&x);
    let mp = ev(&p);
    let xx = ev(&(&x * &x)) - mx * mx;
    let pp = ev(&(&p * &p)) - mp * mp;
    let xp = 0.5 * ev(&(&x * &p + &p * &x)) - mx * mp;
    GaussianState {
        mean: [mx, mp],
        cov: [[xx, xp], [xp, pp]],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::PhasePoint;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() < tol
    }

    #[test]
    fn channel_adds_noise_to_both_quadratures() {
        let v = GaussianState::vacuum();
        assert_eq!(apply_gaussian_channel(&v, 0.0).unwrap(), v);
        let t = apply_gaussian_channel(&v, 1.0).unwrap();
        assert_eq!(t.cov, [[1.5, 0.0], [0.0, 1.5]]);
        assert_eq!(t, GaussianState::thermal(1.0));
        let sq = GaussianState::squeezed(0.4);
        let out = apply_gaussian_channel(&sq, 0.3).unwrap();
        assert!(close(out.cov[0][0], 0.5 * (-0.8f64).exp() + 0.3, 1e-15));
        assert!(close(out.cov[1][1], 0.5 * 0.8f64.exp() + 0.3, 1e-15));
        assert!(apply_gaussian_channel(&v, -0.1).is_err());
    }

    #[test]
    fn squeezed_states_are_valid() {
        assert!(GaussianState::squeezed(1.0).validate().is_ok());
        assert!(GaussianState::new([0.0, 0.0], [[0.4, 0.0], [0.0, 0.4]]).is_err());
        assert!(GaussianState::new([0.0, 0.0], [[0.5, 0.1], [0.0, 0.5]]).is_err());
    }

    #[test]
    fn fidelity_closed_forms() {
        let a = GaussianState::coherent(Complex64::new(0.3, -0.7));
        assert!(close(gaussian_fidelity(&a, &a).unwrap(), 1.0, 1e-15));
        for nbar in [0.1, 0.5, 2.0] {
            let b = apply_gaussian_channel(&a, nbar).unwrap();
            assert!(close(gaussian_fidelity(&a, &b).unwrap(), 1.0 / (1.0 + nbar), 1e-14));
        }
        let mut b = a;
        b.mean = [a.mean[0] + 0.4, a.mean[1] - 0.2];
        assert!(close(gaussian_fidelity(&a, &b).unwrap(), (-(0.16f64 + 0.04) / 2.0).exp(), 1e-14));
        assert!(gaussian_fidelity(&GaussianState::thermal(0.2), &a).is_err());
    }

    #[test]
    fn bridge_convention() {
        let d = FockDim::new(40).unwrap();
        let v = fock_to_gaussian_moments(&DensityMatrix::vacuum(d));
        assert!(v.mean.iter().all(|m| m.abs() < 1e-15));
        assert!(close(v.cov[0][0], 0.5, 1e-15) && close(v.cov[1][1], 0.5, 1e-15));
        let alpha = Complex64::new(0.6, -0.4);
        let c = fock_to_gaussian_moments(&DensityMatrix::coherent(alpha, d).unwrap());
        let pt = PhasePoint::from_alpha(alpha);
        assert!(close(c.mean[0], pt.x, 1e-10) && close(c.mean[1], pt.p, 1e-10));
        assert!(close(c.cov[0][1], 0.0, 1e-10));
        let t = fock_to_gaussian_moments(&DensityMatrix::thermal(0.8, d).unwrap());
        assert!(close(t.cov[0][0], 1.3, 1e-10) && close(t.cov[1][1], 1.3, 1e-10));
    }

    #[test]
    fn bridge_sees_squeezing() {
        // Squeezed vacuum from exp(s(â² − â†²)/2), computed in a larger space.
        let s = 0.3;
        let big = FockDim::new(120).unwrap();
        let a = crate::fock::annihilation(big);
        let gen = (&a * &a - a.adjoint() * a.adjoint()) * Complex64::new(0.5 * s, 0.0);
        let u = gen.exp();
        let n = 40;
        let ket = u.column(0).rows(0, n).into_owned();
        let rho = DensityMatrix::from_ket(FockDim::new(n).unwrap(), ket).unwrap();
        let g = fock_to_gaussian_moments(&rho);
        let want = GaussianState::squeezed(s);
        assert!(close(g.cov[0][0], want.cov[0][0], 1e-9), "{:?}", g.cov);
        assert!(close(g.cov[1][1], want.cov[1][1], 1e-9));
    }
}
