//! EPR measurement machinery.
//!
//! The improper vectors `|Φ⟩ = (2π)^{-1/2} Σ_n |n, n⟩` and
//!
//! ```text
//! |Φ(x, p)⟩ = (D(x, p) ⊗ 1) |Φ⟩ e^{−ipx/2} = (1 ⊗ D(−x, p)) |Φ⟩ e^{−ipx/2}
//! |Ψ(x, p)⟩ = (1 ⊗ D(x, p)) |Φ⟩            = |Φ(−x, p)⟩ e^{−ipx/2}
//! ```
//!
//! are never stored; they only enter through overlaps with normalizable
//! two-mode states, which are exact in the truncated basis. In amplitude form
//! `⟨Φ(x, p)|M⟩⟩ = e^{ipx/2} (2π)^{-1/2} Σ_{ab} conj(D[a, b]) M[a, b]` and
//! `⟨Ψ(x, p)|M⟩⟩ = (2π)^{-1/2} Σ_{ab} conj(D[b, a]) M[a, b]`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fock::{
    displacement, displacement_diagonal, momentum, position, CMatrix, DensityMatrix, FockDim,
    Mode, PhasePoint, TwoModeState,
};
use crate::{Error, Result};

const NEGATIVE_TOLERANCE: f64 = 1e-10;

/// `1/√(2π)`, the (equal) Schmidt coefficient of the EPR vector.
pub fn epr_coefficient() -> f64 {
    (2.0 * PI).sqrt().recip()
}

/// The unnormalizable EPR vector restricted to `dim` levels.
#[derive(Debug, Clone, Copy)]
pub struct EprVector {
    pub dim: FockDim,
}

impl EprVector {
    pub fn new(dim: FockDim) -> Self {
        Self { dim }
    }

    pub fn schmidt(&self) -> Vec<f64> {
        vec![epr_coefficient(); self.dim.get()]
    }

    /// Partial trace of `|Φ⟩⟨Φ|` over the other mode: `diag(c_n²) = (1/2π)·1`.
    /// The Schmidt form is symmetric, so `keep` does not change the result.
    pub fn reduced(&self, _keep: Mode) -> CMatrix {
        let c = self.schmidt();
        CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            c.len(),
            c.iter().map(|v| Complex64::new(v * v, 0.0)),
        ))
    }
}

/// Two-mode squeezed vacuum `exp[r(a†b† − ab)]|0,0⟩ = Σ tanhⁿr / cosh r |n,n⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TmsvState {
    pub r: f64,
    pub dim: FockDim,
}

/// Leakage above which [`tmsv`] logs a warning.
pub const TMSV_LEAKAGE_WARN: f64 = 1e-8;

impl TmsvState {
    pub fn new(r: f64, dim: FockDim) -> Result<Self> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::OutOfRange(format!("squeezing r = {r} must be ≥ 0")));
        }
        Ok(Self { r, dim })
    }

    pub fn schmidt(&self) -> Vec<f64> {
        let t = self.r.tanh();
        let c0 = 1.0 / self.r.cosh();
        let mut c = Vec::with_capacity(self.dim.get());
        let mut v = c0;
        for _ in 0..self.dim.get() {
            c.push(v);
            v *= t;
        }
        c
    }

    /// Weight beyond the cutoff, `tanh^{2 n_max} r`.
    pub fn leakage(&self) -> f64 {
        self.r.tanh().powi(2 * self.dim.get() as i32)
    }

    /// Kernel variance per quadrature, `e^{−2r}`.
    pub fn nbar(&self) -> f64 {
        (-2.0 * self.r).exp()
    }

    /// Mean photon number of either reduced mode, `sinh² r`.
    pub fn reduced_nbar(&self) -> f64 {
        self.r.sinh().powi(2)
    }

    pub fn state(&self) -> TwoModeState {
        let leak = self.leakage();
        if leak > TMSV_LEAKAGE_WARN {
            log::warn!(
                "TMSV r = {} at n_max = {}: truncation leakage {leak:.3e}",
                self.r,
                self.dim.get()
            );
        }
        TwoModeState::from_schmidt(self.dim, self.schmidt())
            .expect("TMSV Schmidt vector is nonzero")
    }
}

pub fn tmsv(r: f64, dim: FockDim) -> Result<TwoModeState> {
    Ok(TmsvState::new(r, dim)?.state())
}

/// `⟨Φ(x, p)|M⟩⟩` for one amplitude matrix, phase included.
fn phi_overlap_amplitudes(m: &CMatrix, pt: PhasePoint, d: &CMatrix) -> Complex64 {
    let s: Complex64 = d.iter().zip(m.iter()).map(|(a, b)| a.conj() * b).sum();
    s * Complex64::from_polar(epr_coefficient(), 0.5 * pt.p * pt.x)
}

/// `⟨Ψ(x, p)|M⟩⟩` for one amplitude matrix.
fn psi_overlap_amplitudes(m: &CMatrix, d: &CMatrix) -> Complex64 {
    // conj(D[b, a]) · M[a, b] = conj(Dᵀ)[a, b] · M[a, b]
    let dt = d.transpose();
    let s: Complex64 = dt.iter().zip(m.iter()).map(|(a, b)| a.conj() * b).sum();
    s * epr_coefficient()
}

fn schmidt_diagonal_sum(c: &[f64], pt: PhasePoint) -> f64 {
    let diag = displacement_diagonal(0.5 * pt.norm_sqr(), c.len());
    c.iter().zip(&diag).map(|(c, d)| c * d).sum::<f64>() * epr_coefficient()
}

fn single_component(state: &TwoModeState) -> Result<CMatrix> {
    if !state.is_pure() {
        return Err(Error::NotPure { purity: f64::NAN });
    }
    let mut comps = state.components()?;
    let (w, m) = comps.remove(0);
    Ok(m * Complex64::new(w.sqrt(), 0.0))
}

/// `⟨Φ(x, p)|ψ⟩` for a pure two-mode state.
///
/// In Schmidt form the sum collapses to `e^{ipx/2}(2π)^{-1/2} Σ c_n ⟨n|D(x,p)|n⟩`
/// (the diagonal is real). Other pure states use the full amplitude sum.
pub fn epr_overlap(state: &TwoModeState, pt: PhasePoint) -> Result<Complex64> {
    if let Some(c) = state.schmidt() {
        let s = schmidt_diagonal_sum(c, pt);
        return Ok(Complex64::from_polar(s, 0.5 * pt.p * pt.x));
    }
    let m = single_component(state)?;
    Ok(phi_overlap_amplitudes(&m, pt, &displacement(pt, state.dim())))
}

/// `⟨Ψ(x, p)|ψ⟩` for a pure two-mode state.
pub fn psi_overlap(state: &TwoModeState, pt: PhasePoint) -> Result<Complex64> {
    if let Some(c) = state.schmidt() {
        return Ok(Complex64::new(schmidt_diagonal_sum(c, pt), 0.0));
    }
    let m = single_component(state)?;
    Ok(psi_overlap_amplitudes(&m, &displacement(pt, state.dim())))
}

/// The kernel `P(x, p) = ⟨Ψ(x, p)|W|Ψ(x, p)⟩`.
pub fn kernel_value(w: &TwoModeState, pt: PhasePoint) -> Result<f64> {
    KernelEvaluator::new(w)?.value(pt)
}

/// Kernel of a fixed resource, with its decomposition computed once so that
/// grid sweeps cost `O(n_max²)` per point and component.
#[derive(Debug, Clone)]
pub struct KernelEvaluator {
    dim: FockDim,
    schmidt: Option<Vec<f64>>,
    components: Vec<(f64, CMatrix)>,
}

impl KernelEvaluator {
    pub fn new(w: &TwoModeState) -> Result<Self> {
        let schmidt = w.schmidt().map(|c| c.to_vec());
        let components = if schmidt.is_some() {
            Vec::new()
        } else {
            w.components()?
        };
        Ok(Self {
            dim: w.dim(),
            schmidt,
            components,
        })
    }

    pub fn value(&self, pt: PhasePoint) -> Result<f64> {
        if let Some(c) = &self.schmidt {
            let s = schmidt_diagonal_sum(c, pt);
            return Ok(s * s);
        }
        let d = displacement(pt, self.dim);
        let v: f64 = self
            .components
            .iter()
            .map(|(wt, m)| wt * psi_overlap_amplitudes(m, &d).norm_sqr())
            .sum();
        check_nonnegative(v, pt)
    }
}

/// Same kernel through the `|Φ⟩` vectors: `F_W(−x, p; −x, p)`.
pub fn kernel_value_via_phi(w: &TwoModeState, pt: PhasePoint) -> Result<f64> {
    let flipped = PhasePoint { x: -pt.x, p: pt.p };
    Ok(f_w_element(w, flipped, flipped)?.re)
}

/// Dense quadratic form `Ψ† W Ψ` against the full `n_max² × n_max²` matrix.
/// `O(n_max⁴)` per point; the reference the faster paths are checked against.
pub fn kernel_value_dense(w: &TwoModeState, pt: PhasePoint) -> Result<f64> {
    let n = w.dim().get();
    let d = displacement(pt, w.dim());
    // Ψ[a·n + b] = D[b, a] / √2π
    let psi = nalgebra::DVector::from_fn(n * n, |k, _| d[(k % n, k / n)] * epr_coefficient());
    let v = (psi.adjoint() * w.matrix() * &psi)[(0, 0)];
    check_nonnegative(v.re, pt)
}

fn check_nonnegative(v: f64, pt: PhasePoint) -> Result<f64> {
    if v < -NEGATIVE_TOLERANCE {
        return Err(Error::Numerical(format!(
            "kernel value {v:.3e} < 0 at ({}, {})",
            pt.x, pt.p
        )));
    }
    Ok(v.max(0.0))
}

/// `F_W(x, u; y, v) = ⟨Φ(x, u)|W|Φ(y, v)⟩`.
pub fn f_w_element(w: &TwoModeState, left: PhasePoint, right: PhasePoint) -> Result<Complex64> {
    let dim = w.dim();
    if let Some(c) = w.schmidt() {
        let a = Complex64::from_polar(schmidt_diagonal_sum(c, left), 0.5 * left.p * left.x);
        let b = Complex64::from_polar(schmidt_diagonal_sum(c, right), 0.5 * right.p * right.x);
        return Ok(a * b.conj());
    }
    let dl = displacement(left, dim);
    let dr = displacement(right, dim);
    Ok(w
        .components()?
        .iter()
        .map(|(wt, m)| {
            phi_overlap_amplitudes(m, left, &dl) * phi_overlap_amplitudes(m, right, &dr).conj() * wt
        })
        .sum())
}

/// `F_W` through the dense matrix: `Φ_left† W Φ_right`.
pub fn f_w_element_dense(
    w: &TwoModeState,
    left: PhasePoint,
    right: PhasePoint,
) -> Result<Complex64> {
    let n = w.dim().get();
    let phi = |pt: PhasePoint| {
        let d = displacement(pt, w.dim());
        let ph = Complex64::from_polar(epr_coefficient(), -0.5 * pt.p * pt.x);
        nalgebra::DVector::from_fn(n * n, |k, _| d[(k / n, k % n)] * ph)
    };
    let l = phi(left);
    let r = phi(right);
    Ok((l.adjoint() * w.matrix() * r)[(0, 0)])
}

/// Quadrature moments of the EPR observables `x_A − x_B` and `p_A + p_B`.
///
/// The kernel is the distribution of `(x_B − x_A, p_A + p_B)`, so its mean is
/// `(−mean_x_diff, mean_p_sum)` and its second moments equal the ones here.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EprMoments {
    pub mean_x_diff: f64,
    pub mean_p_sum: f64,
    pub second_x_diff: f64,
    pub second_p_sum: f64,
}

impl EprMoments {
    pub fn var_x_diff(&self) -> f64 {
        self.second_x_diff - self.mean_x_diff.powi(2)
    }

    pub fn var_p_sum(&self) -> f64 {
        self.second_p_sum - self.mean_p_sum.powi(2)
    }

    /// Kernel mean `(x, p)`.
    pub fn kernel_mean(&self) -> PhasePoint {
        PhasePoint {
            x: -self.mean_x_diff,
            p: self.mean_p_sum,
        }
    }
}

/// Exact moments, computed with quadrature operators one level larger than
/// the state so the truncated ladder never clips them. Normalized by `Tr W`.
pub fn epr_moments(w: &TwoModeState) -> Result<EprMoments> {
    let n = w.dim().get();
    let big = FockDim::new(n + 1)?;
    let x = position(big);
    let p = momentum(big);
    let mut acc = [0.0f64; 4];
    let mut total = 0.0;
    for (wt, m) in w.components()? {
        let mut e = CMatrix::zeros(n + 1, n + 1);
        e.view_mut((0, 0), (n, n)).copy_from(&m);
        // (O ⊗ 1)ψ ↔ O M, (1 ⊗ O)ψ ↔ M Oᵀ
        let xd = &x * &e - &e * x.transpose();
        let ps = &p * &e + &e * p.transpose();
        let inner = |a: &CMatrix, b: &CMatrix| -> Complex64 {
            a.iter().zip(b.iter()).map(|(u, v)| u.conj() * v).sum()
        };
        acc[0] += wt * inner(&e, &xd).re;
        acc[1] += wt * inner(&e, &ps).re;
        acc[2] += wt * xd.norm_squared();
        acc[3] += wt * ps.norm_squared();
        total += wt;
    }
    Ok(EprMoments {
        mean_x_diff: acc[0] / total,
        mean_p_sum: acc[1] / total,
        second_x_diff: acc[2] / total,
        second_p_sum: acc[3] / total,
    })
}

/// Reduced single-mode state of `W`.
pub fn reduced_state(w: &TwoModeState, keep: Mode) -> DensityMatrix {
    w.partial_trace(keep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PhaseGrid;

    fn dim(n: usize) -> FockDim {
        FockDim::new(n).unwrap()
    }

    fn gaussian(nbar: f64, pt: PhasePoint) -> f64 {
        (-pt.norm_sqr() / (2.0 * nbar)).exp() / (2.0 * PI * nbar)
    }

    #[test]
    fn vacuum_overlap_at_origin() {
        let w = tmsv(0.0, dim(10)).unwrap();
        let v = epr_overlap(&w, PhasePoint::ORIGIN).unwrap();
        assert!((v - Complex64::new(epr_coefficient(), 0.0)).norm() < 1e-15);
        assert!((kernel_value(&w, PhasePoint::ORIGIN).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn tmsv_schmidt_ratio_and_reduced_state() {
        let s = TmsvState::new(0.5, dim(40)).unwrap();
        let c = s.schmidt();
        assert!((c[1] / c[0] - 0.46211715726000974).abs() < 1e-14);
        let red = s.state().partial_trace(Mode::A);
        let th = DensityMatrix::thermal(s.reduced_nbar(), dim(40)).unwrap();
        assert!(crate::fock::trace_distance(&red, &th).unwrap() < 1e-12);
        assert!(TmsvState::new(-0.1, dim(4)).is_err());
        let zero = tmsv(0.0, dim(4)).unwrap();
        assert_eq!(zero.schmidt().unwrap(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn laguerre_generating_function() {
        // Σ tⁿ ⟨n|D(α)|n⟩ = exp(−|α|²(1+t)/(2(1−t))) / (1−t)
        let (t, a2) = (0.3f64, 0.49f64);
        let diag = displacement_diagonal(a2, 60);
        let series: f64 = diag.iter().enumerate().map(|(n, d)| t.powi(n as i32) * d).sum();
        let closed = (-a2 * (1.0 + t) / (2.0 * (1.0 - t))).exp() / (1.0 - t);
        assert!((series - closed).abs() < 1e-14, "{series} vs {closed}");
    }

    #[test]
    fn tmsv_kernel_is_gaussian() {
        let w = tmsv(0.5, dim(40)).unwrap();
        let nbar = (-1.0f64).exp();
        for &(x, p) in &[(0.0, 0.0), (0.3, -0.2), (1.0, 0.5), (-0.7, 1.1)] {
            let pt = PhasePoint { x, p };
            let k = kernel_value(&w, pt).unwrap();
            assert!((k - gaussian(nbar, pt)).abs() < 1e-12);
            assert!((epr_overlap(&w, pt).unwrap().norm_sqr() - k).abs() < 1e-14);
        }
    }

    #[test]
    fn fast_paths_match_dense_quadratic_form() {
        let d = dim(8);
        let w = tmsv(0.5, d).unwrap();
        let a = PhasePoint { x: 0.3, p: 0.1 };
        let b = PhasePoint { x: -0.2, p: 0.4 };
        let fast = f_w_element(&w, a, b).unwrap();
        let dense = f_w_element_dense(&w, a, b).unwrap();
        assert!((fast - dense).norm() < 1e-14, "{fast} vs {dense}");
        assert!((f_w_element(&w, b, a).unwrap() - fast.conj()).norm() < 1e-15);
        for pt in [a, b] {
            assert!((kernel_value(&w, pt).unwrap() - kernel_value_dense(&w, pt).unwrap()).abs() < 1e-14);
        }
    }

    fn asymmetric_resource(d: FockDim) -> TwoModeState {
        let shift = displacement(PhasePoint { x: 0.6, p: -0.3 }, d);
        tmsv(0.4, d).unwrap().map_local(None, Some(&shift)).unwrap()
    }

    #[test]
    fn shifted_resource_shifts_kernel() {
        let d = dim(40);
        let w = asymmetric_resource(d);
        let nbar = (-0.8f64).exp();
        let centre = PhasePoint { x: 0.6, p: -0.3 };
        for &(x, p) in &[(0.0, 0.0), (0.6, -0.3), (1.0, 0.2)] {
            let pt = PhasePoint { x, p };
            let k = kernel_value(&w, pt).unwrap();
            assert!((k - gaussian(nbar, pt - centre)).abs() < 1e-10, "at {pt:?}");
        }
    }

    #[test]
    fn psi_and_phi_routes_agree_after_sign_map() {
        let d = dim(10);
        let w = asymmetric_resource(d);
        let mixed = TwoModeState::mixture(&[(0.5, w.clone()), (0.5, tmsv(0.9, d).unwrap())]).unwrap();
        for state in [&w, &mixed] {
            for &(x, p) in &[(0.2, 0.1), (-0.5, 0.7), (1.1, -0.4)] {
                let pt = PhasePoint { x, p };
                let a = kernel_value(state, pt).unwrap();
                let b = kernel_value_via_phi(state, pt).unwrap();
                let c = kernel_value_dense(state, pt).unwrap();
                assert!((a - b).abs() < 1e-14 && (a - c).abs() < 1e-13);
            }
        }
        let pt = PhasePoint { x: 0.4, p: -0.9 };
        let psi = psi_overlap(&w, pt).unwrap();
        let phi = epr_overlap(&w, PhasePoint { x: -pt.x, p: pt.p }).unwrap();
        assert!((psi.norm() - phi.norm()).abs() < 1e-14);
    }

    #[test]
    fn f_w_diagonal_is_kernel_at_mirrored_x() {
        let d = dim(12);
        let w = asymmetric_resource(d);
        let pt = PhasePoint { x: 0.5, p: 0.2 };
        let diag = f_w_element(&w, pt, pt).unwrap();
        assert!(diag.im.abs() < 1e-15);
        let mirrored = kernel_value(&w, PhasePoint { x: -0.5, p: 0.2 }).unwrap();
        assert!((diag.re - mirrored).abs() < 1e-14);
        let sym = tmsv(0.5, d).unwrap();
        assert!((f_w_element(&sym, pt, pt).unwrap().re - kernel_value(&sym, pt).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn kernel_integrates_to_one() {
        let d = dim(40);
        for r in [0.0, 0.5, 1.0] {
            let w = tmsv(r, d).unwrap();
            let g = PhaseGrid::with_default_rule((-2.0 * r).exp(), 0.0, 0.0);
            let (_, total) = g.refine_until_stable(|pt| kernel_value(&w, pt).unwrap());
            assert!((total - 1.0).abs() < 1e-4, "r = {r}: {total}");
        }
    }

    #[test]
    fn epr_variances_follow_squeezing() {
        let d = dim(40);
        for r in [0.0, 0.3, 0.8, 1.0] {
            let m = epr_moments(&tmsv(r, d).unwrap()).unwrap();
            let want = (-2.0 * r).exp();
            assert!((m.var_x_diff() - want).abs() < 1e-6, "r={r}");
            assert!((m.var_p_sum() - want).abs() < 1e-6);
        }
    }

    #[test]
    fn epr_reduced_operator_is_flat() {
        let e = EprVector::new(dim(7));
        let red = e.reduced(Mode::B);
        assert!((red[(3, 3)].re - 1.0 / (2.0 * PI)).abs() < 1e-16);
        assert_eq!(red[(2, 3)], Complex64::new(0.0, 0.0));
    }
}
