use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::measures::{hermitian_eigen, max_hermitian_defect};
use super::{displacement, number, CMatrix, CVector, FockDim, PhasePoint};
use crate::{Error, Result};

/// Truncation leakage above which constructors log a warning.
pub const DEFAULT_LEAKAGE_WARN: f64 = 1e-8;

const HERMITIAN_TOLERANCE: f64 = 1e-12;
const NEGATIVE_TOLERANCE: f64 = 1e-10;
const PURITY_TOLERANCE: f64 = 1e-8;

/// A single-mode state on a truncated Fock basis.
///
/// `leakage` is the weight the ideal (untruncated) state places on levels
/// `≥ n_max`. Most constructors keep the truncated amplitudes as they are, so
/// `trace = 1 − leakage`; [`DensityMatrix::thermal`] renormalizes and only
/// reports the deficit.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    dim: FockDim,
    data: CMatrix,
    leakage: f64,
    ket: Option<CVector>,
}

impl DensityMatrix {
    /// Wraps a Hermitian matrix. Positivity is not checked here, see
    /// [`DensityMatrix::check_positive`].
    pub fn from_matrix(dim: FockDim, data: CMatrix) -> Result<Self> {
        dim.check(data.nrows())?;
        dim.check(data.ncols())?;
        let defect = max_hermitian_defect(&data);
        if defect > HERMITIAN_TOLERANCE {
            return Err(Error::Numerical(format!(
                "matrix is not Hermitian (max defect {defect:.3e})"
            )));
        }
        let leakage = (1.0 - trace_of(&data)).max(0.0);
        Ok(Self {
            dim,
            data,
            leakage,
            ket: None,
        })
    }

    /// Hermitian part of `data`, for accumulators whose rounding breaks exact
    /// symmetry.
    pub(crate) fn from_accumulated(dim: FockDim, data: CMatrix) -> Self {
        let data = (&data + data.adjoint()).unscale(2.0);
        let leakage = (1.0 - trace_of(&data)).max(0.0);
        Self {
            dim,
            data,
            leakage,
            ket: None,
        }
    }

    /// `|ψ⟩⟨ψ|` exactly as given; `leakage = 1 − ⟨ψ|ψ⟩`.
    pub fn from_ket(dim: FockDim, ket: CVector) -> Result<Self> {
        dim.check(ket.len())?;
        let norm = ket.norm_squared();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::DegenerateInput("zero-norm ket".into()));
        }
        let data = &ket * ket.adjoint();
        Ok(Self {
            dim,
            data,
            leakage: (1.0 - norm).max(0.0),
            ket: Some(ket),
        })
    }

    pub fn vacuum(dim: FockDim) -> Self {
        Self::fock(0, dim).expect("level 0 exists for every FockDim")
    }

    pub fn fock(n: usize, dim: FockDim) -> Result<Self> {
        if n >= dim.get() {
            return Err(Error::OutOfRange(format!(
                "Fock level {n} not below n_max = {}",
                dim.get()
            )));
        }
        let mut ket = CVector::zeros(dim.get());
        ket[n] = Complex64::new(1.0, 0.0);
        Self::from_ket(dim, ket)
    }

    /// `|α⟩ = e^{−|α|²/2} Σ αⁿ/√n! |n⟩`, truncated, not renormalized.
    pub fn coherent(alpha: Complex64, dim: FockDim) -> Result<Self> {
        if !alpha.re.is_finite() || !alpha.im.is_finite() {
            return Err(Error::OutOfRange(format!("non-finite amplitude {alpha}")));
        }
        let n = dim.get();
        if alpha.norm_sqr() > n as f64 / 4.0 {
            log::warn!(
                "coherent amplitude |α|² = {:.3} exceeds n_max/4 = {:.2}",
                alpha.norm_sqr(),
                n as f64 / 4.0
            );
        }
        let ket = coherent_ket(alpha, n);
        let state = Self::from_ket(dim, ket)?;
        warn_leakage("coherent state", state.leakage);
        Ok(state)
    }

    /// `N(|α⟩ + e^{iφ}|−α⟩)`; `φ = 0` is the even cat, `φ = π` the odd one.
    pub fn cat(alpha: Complex64, phase: f64, dim: FockDim) -> Result<Self> {
        let ideal_norm = 2.0 + 2.0 * phase.cos() * (-2.0 * alpha.norm_sqr()).exp();
        if ideal_norm < 1e-10 {
            return Err(Error::DegenerateInput(format!(
                "cat state with α = {alpha}, φ = {phase} has vanishing norm"
            )));
        }
        let n = dim.get();
        let rel = Complex64::from_polar(1.0, phase);
        let ket = (coherent_ket(alpha, n) + coherent_ket(-alpha, n) * rel)
            .unscale(ideal_norm.sqrt());
        let state = Self::from_ket(dim, ket)?;
        warn_leakage("cat state", state.leakage);
        Ok(state)
    }

    /// Thermal state with weights `n̄ⁿ/(1+n̄)^{n+1}`, renormalized over the
    /// retained levels; the lost tail `(n̄/(1+n̄))^{n_max}` is kept as leakage.
    pub fn thermal(nbar: f64, dim: FockDim) -> Result<Self> {
        if !(nbar >= 0.0) || !nbar.is_finite() {
            return Err(Error::OutOfRange(format!("thermal n̄ = {nbar} must be ≥ 0")));
        }
        let n = dim.get();
        let ratio = nbar / (1.0 + nbar);
        let mut weights: Vec<f64> = (0..n)
            .map(|k| ratio.powi(k as i32) / (1.0 + nbar))
            .collect();
        let kept: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= kept;
        }
        let data = CMatrix::from_diagonal(&DVector::from_iterator(
            n,
            weights.iter().map(|&w| Complex64::new(w, 0.0)),
        ));
        let leakage = ratio.powi(n as i32);
        warn_leakage("thermal state", leakage);
        let ket = if nbar == 0.0 {
            let mut v = CVector::zeros(n);
            v[0] = Complex64::new(1.0, 0.0);
            Some(v)
        } else {
            None
        };
        Ok(Self {
            dim,
            data,
            leakage,
            ket,
        })
    }

    #[inline]
    pub fn dim(&self) -> FockDim {
        self.dim
    }

    #[inline]
    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    /// Stored ket when the state was built as a pure state.
    pub fn ket(&self) -> Option<&CVector> {
        self.ket.as_ref()
    }

    pub fn leakage(&self) -> f64 {
        self.leakage
    }

    pub fn trace(&self) -> f64 {
        trace_of(&self.data)
    }

    pub fn trace_deficit(&self) -> f64 {
        1.0 - self.trace()
    }

    pub fn purity(&self) -> f64 {
        let t = self.trace();
        let sq: f64 = self.data.iter().map(|z| z.norm_sqr()).sum();
        sq / (t * t)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.data).0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn check_positive(&self) -> Result<()> {
        let min = self.min_eigenvalue();
        if min < -NEGATIVE_TOLERANCE {
            return Err(Error::NotPositive {
                min_eigenvalue: min,
            });
        }
        Ok(())
    }

    /// Normalized ket of a pure state: the stored one, or the top eigenvector.
    pub fn pure_ket(&self) -> Result<CVector> {
        if let Some(k) = &self.ket {
            return Ok(k.unscale(k.norm()));
        }
        let purity = self.purity();
        if purity < 1.0 - PURITY_TOLERANCE {
            return Err(Error::NotPure { purity });
        }
        let (_, vecs) = hermitian_eigen(&self.data);
        Ok(vecs.column(vecs.ncols() - 1).into_owned())
    }

    /// `ρ = Σ μ_k |r_k⟩⟨r_k|` with negligible components dropped. Vectors are
    /// unit norm; weights carry the trace.
    pub fn spectral(&self) -> Result<Vec<(f64, CVector)>> {
        if let Some(k) = &self.ket {
            let w = k.norm_squared();
            return Ok(vec![(w, k.unscale(w.sqrt()))]);
        }
        let (values, vecs) = hermitian_eigen(&self.data);
        if let Some(&min) = values.first() {
            if min < -NEGATIVE_TOLERANCE {
                return Err(Error::NotPositive {
                    min_eigenvalue: min,
                });
            }
        }
        let cutoff = 1e-15 * values.last().copied().unwrap_or(0.0).max(0.0);
        Ok(values
            .iter()
            .enumerate()
            .rev()
            .filter(|(_, &v)| v > cutoff)
            .map(|(j, &v)| (v, vecs.column(j).into_owned()))
            .collect())
    }

    pub fn expect(&self, op: &CMatrix) -> Complex64 {
        (&self.data * op).trace()
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.expect(&number(self.dim)).re
    }

    /// `D̂ ρ D̂†`.
    pub fn displaced(&self, pt: PhasePoint) -> Self {
        let d = displacement(pt, self.dim);
        let ket = self.ket.as_ref().map(|k| &d * k);
        let data = match &ket {
            Some(k) => k * k.adjoint(),
            None => &d * &self.data * d.adjoint(),
        };
        let leakage = (1.0 - trace_of(&data)).max(0.0);
        Self {
            dim: self.dim,
            data,
            leakage,
            ket,
        }
    }

    /// Copy scaled to unit trace; leakage is unchanged.
    pub fn normalized(&self) -> Result<Self> {
        let t = self.trace();
        if !(t > 0.0) {
            return Err(Error::DegenerateInput("zero-trace state".into()));
        }
        Ok(Self {
            dim: self.dim,
            data: self.data.unscale(t),
            leakage: self.leakage,
            ket: self.ket.as_ref().map(|k| k.unscale(t.sqrt())),
        })
    }

    pub fn to_json(&self) -> MatrixJson {
        MatrixJson::from_matrix(&self.data)
    }

    pub fn from_json(json: &MatrixJson) -> Result<Self> {
        let m = json.to_matrix()?;
        Self::from_matrix(FockDim::new(m.nrows())?, m)
    }
}

/// Row-major `[re, im]` debug serialization of a complex matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let z = m[(i, j)];
                data.push([z.re, z.im]);
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                found: self.data.len(),
            });
        }
        Ok(CMatrix::from_fn(self.rows, self.cols, |i, j| {
            let [re, im] = self.data[i * self.cols + j];
            Complex64::new(re, im)
        }))
    }
}

pub(crate) fn coherent_ket(alpha: Complex64, n: usize) -> CVector {
    let mut ket = CVector::zeros(n);
    let mut amp = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for k in 0..n {
        ket[k] = amp;
        amp = amp * alpha / ((k + 1) as f64).sqrt();
    }
    ket
}

fn trace_of(m: &CMatrix) -> f64 {
    (0..m.nrows()).map(|k| m[(k, k)].re).sum()
}

fn warn_leakage(what: &str, leakage: f64) {
    if leakage > DEFAULT_LEAKAGE_WARN {
        log::warn!("{what}: truncation leakage {leakage:.3e}");
    }
}
