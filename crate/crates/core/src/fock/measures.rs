use nalgebra::linalg::SymmetricEigen;
use num_complex::Complex64;

use super::{CMatrix, DensityMatrix};
use crate::{Error, Result};

/// Eigenvalues below this are treated as exact zeros when taking square roots.
const SQRT_FLOOR: f64 = 1e-12;
const NEGATIVE_TOLERANCE: f64 = 1e-10;

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let herm = (m + m.adjoint()).unscale(2.0);
    let eig = SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), order.len(), |i, j| {
        eig.eigenvectors[(i, order[j])]
    });
    (values, vectors)
}

/// Principal square root of a positive semidefinite Hermitian matrix.
pub fn psd_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let (values, vectors) = hermitian_eigen(m);
    let min = values.first().copied().unwrap_or(0.0);
    if min < -NEGATIVE_TOLERANCE {
        return Err(Error::NotPositive {
            min_eigenvalue: min,
        });
    }
    let mut scaled = vectors.clone();
    for (j, &v) in values.iter().enumerate() {
        let s = if v > SQRT_FLOOR { v.sqrt() } else { 0.0 };
        scaled.column_mut(j).scale_mut(s);
    }
    Ok(scaled * vectors.adjoint())
}

/// Uhlmann fidelity `(Tr √(√a b √a))²`, squared convention so that
/// `F(|ψ⟩⟨ψ|, σ) = ⟨ψ|σ|ψ⟩`.
///
/// A pure `a` short-circuits to the overlap; [`uhlmann_fidelity`] is the
/// general route.
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    a.dim().check(b.dim().get())?;
    if let Some(psi) = a.ket() {
        let v = psi.adjoint() * b.matrix() * psi;
        let norm = psi.norm_squared();
        return Ok((v[(0, 0)].re / norm).clamp(0.0, 1.0));
    }
    uhlmann_fidelity(a, b)
}

/// General route: `Tr √(√a b √a)` is the nuclear norm of `√a √b`, taken
/// from singular values so near-zero eigenvalues are not square-rooted twice.
pub fn uhlmann_fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    a.dim().check(b.dim().get())?;
    let sa = psd_sqrt(a.matrix())?;
    let sb = psd_sqrt(b.matrix())?;
    let root: f64 = (sa * sb).singular_values().iter().sum();
    Ok((root * root).clamp(0.0, 1.0))
}

/// `½ Σ |λ_k(a − b)|`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    a.dim().check(b.dim().get())?;
    Ok(trace_norm_half(&(a.matrix() - b.matrix())))
}

pub(crate) fn trace_norm_half(diff: &CMatrix) -> f64 {
    let (values, _) = hermitian_eigen(diff);
    0.5 * values.iter().map(|v| v.abs()).sum::<f64>()
}

pub(crate) fn max_hermitian_defect(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            let d: Complex64 = m[(i, j)] - m[(j, i)].conj();
            worst = worst.max(d.norm());
        }
    }
    worst
}
