use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::measures::{hermitian_eigen, max_hermitian_defect};
use super::state::MatrixJson;
use super::{CMatrix, DensityMatrix, FockDim};
use crate::{Error, Result};

const NEGATIVE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    A,
    B,
}

#[derive(Debug, Clone)]
enum Repr {
    /// Pure `Σ c_n |n, n⟩`.
    Schmidt(Vec<f64>),
    /// `Σ w_k |M_k⟩⟩⟨⟨M_k|` with unit-norm amplitude matrices.
    Mixture(Vec<(f64, CMatrix)>),
    Dense(CMatrix),
}

/// A state of two modes A and B, each truncated to `dim` levels.
///
/// Flattened index of `|a⟩⊗|b⟩` is `a·n_max + b`. Pure parts are kept as
/// amplitude matrices `M[a, b]`, so the `n_max² × n_max²` matrix is only
/// built on request by [`TwoModeState::matrix`].
#[derive(Debug, Clone)]
pub struct TwoModeState {
    dim: FockDim,
    repr: Repr,
    leakage: f64,
}

impl TwoModeState {
    /// Pure state `Σ c_n |n, n⟩`; missing coefficients are zero.
    pub fn from_schmidt(dim: FockDim, mut coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() > dim.get() {
            return Err(Error::DimensionMismatch {
                expected: dim.get(),
                found: coefficients.len(),
            });
        }
        coefficients.resize(dim.get(), 0.0);
        let norm: f64 = coefficients.iter().map(|c| c * c).sum();
        if !(norm > 0.0) {
            return Err(Error::DegenerateInput("zero Schmidt vector".into()));
        }
        Ok(Self {
            dim,
            repr: Repr::Schmidt(coefficients),
            leakage: (1.0 - norm).max(0.0),
        })
    }

    /// Pure state with amplitudes `M[a, b]`, kept unnormalized.
    pub fn from_amplitudes(dim: FockDim, amplitudes: CMatrix) -> Result<Self> {
        dim.check(amplitudes.nrows())?;
        dim.check(amplitudes.ncols())?;
        let norm = amplitudes.norm_squared();
        if !(norm > 0.0) {
            return Err(Error::DegenerateInput("zero amplitude matrix".into()));
        }
        Ok(Self {
            dim,
            repr: Repr::Mixture(vec![(norm, amplitudes.unscale(norm.sqrt()))]),
            leakage: (1.0 - norm).max(0.0),
        })
    }

    /// Convex combination `Σ p_k W_k`. Weights must be nonnegative; they are
    /// not renormalized.
    pub fn mixture(parts: &[(f64, TwoModeState)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::DegenerateInput("empty mixture".into()))?;
        let dim = first.1.dim;
        let mut components = Vec::new();
        for (p, state) in parts {
            if !(*p >= 0.0) {
                return Err(Error::OutOfRange(format!("mixture weight {p} < 0")));
            }
            dim.check(state.dim.get())?;
            for (w, m) in state.components()? {
                components.push((p * w, m));
            }
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        Ok(Self {
            dim,
            repr: Repr::Mixture(components),
            leakage: (1.0 - total).max(0.0),
        })
    }

    /// Arbitrary Hermitian `n_max² × n_max²` matrix.
    pub fn from_matrix(dim: FockDim, data: CMatrix) -> Result<Self> {
        if data.nrows() != dim.two_mode() || data.ncols() != dim.two_mode() {
            return Err(Error::DimensionMismatch {
                expected: dim.two_mode(),
                found: data.nrows(),
            });
        }
        let defect = max_hermitian_defect(&data);
        if defect > 1e-12 {
            return Err(Error::Numerical(format!(
                "two-mode matrix is not Hermitian (max defect {defect:.3e})"
            )));
        }
        let trace: f64 = (0..data.nrows()).map(|k| data[(k, k)].re).sum();
        Ok(Self {
            dim,
            repr: Repr::Dense(data),
            leakage: (1.0 - trace).max(0.0),
        })
    }

    /// `a ⊗ b`, assembled from the spectral decompositions of both factors.
    pub fn tensor(a: &DensityMatrix, b: &DensityMatrix) -> Result<Self> {
        a.dim().check(b.dim().get())?;
        let sa = a.spectral()?;
        let sb = b.spectral()?;
        let mut components = Vec::with_capacity(sa.len() * sb.len());
        for (wa, va) in &sa {
            for (wb, vb) in &sb {
                components.push((wa * wb, va * vb.transpose()));
            }
        }
        let trace = a.trace() * b.trace();
        Ok(Self {
            dim: a.dim(),
            repr: Repr::Mixture(components),
            leakage: (1.0 - trace).max(0.0),
        })
    }

    #[inline]
    pub fn dim(&self) -> FockDim {
        self.dim
    }

    /// Weight the ideal state puts outside the truncated product space.
    pub fn leakage(&self) -> f64 {
        self.leakage
    }

    pub fn schmidt(&self) -> Option<&[f64]> {
        match &self.repr {
            Repr::Schmidt(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_pure(&self) -> bool {
        match &self.repr {
            Repr::Schmidt(_) => true,
            Repr::Mixture(c) => c.len() == 1,
            Repr::Dense(_) => false,
        }
    }

    pub fn trace(&self) -> f64 {
        match &self.repr {
            Repr::Schmidt(c) => c.iter().map(|x| x * x).sum(),
            Repr::Mixture(c) => c.iter().map(|(w, _)| w).sum(),
            Repr::Dense(m) => (0..m.nrows()).map(|k| m[(k, k)].re).sum(),
        }
    }

    /// `W = Σ w_k |M_k⟩⟩⟨⟨M_k|`, unit-norm amplitude matrices. A dense state
    /// is diagonalized here, which costs `O(n_max⁶)`.
    pub fn components(&self) -> Result<Vec<(f64, CMatrix)>> {
        let n = self.dim.get();
        match &self.repr {
            Repr::Schmidt(c) => {
                let w: f64 = c.iter().map(|x| x * x).sum();
                let s = w.sqrt();
                let m = CMatrix::from_fn(n, n, |i, j| {
                    if i == j {
                        Complex64::new(c[i] / s, 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                });
                Ok(vec![(w, m)])
            }
            Repr::Mixture(c) => Ok(c.clone()),
            Repr::Dense(d) => {
                let (values, vecs) = hermitian_eigen(d);
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
                    .map(|(k, &v)| (v, CMatrix::from_fn(n, n, |a, b| vecs[(a * n + b, k)])))
                    .collect())
            }
        }
    }

    /// Dense `n_max² × n_max²` matrix, rows indexed `a·n_max + b`.
    pub fn matrix(&self) -> CMatrix {
        let n = self.dim.get();
        let nn = n * n;
        match &self.repr {
            Repr::Dense(d) => d.clone(),
            Repr::Schmidt(c) => {
                let mut m = CMatrix::zeros(nn, nn);
                for i in 0..n {
                    for j in 0..n {
                        m[(i * n + i, j * n + j)] = Complex64::new(c[i] * c[j], 0.0);
                    }
                }
                m
            }
            Repr::Mixture(c) => {
                let mut m = CMatrix::zeros(nn, nn);
                for (w, amp) in c {
                    let v = flatten(amp);
                    m += &v * v.adjoint() * Complex64::new(*w, 0.0);
                }
                m
            }
        }
    }

    /// Reduced state of the kept mode.
    pub fn partial_trace(&self, keep: Mode) -> DensityMatrix {
        let n = self.dim.get();
        let reduced = match &self.repr {
            Repr::Schmidt(c) => CMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    Complex64::new(c[i] * c[i], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }),
            Repr::Mixture(parts) => {
                let mut acc = CMatrix::zeros(n, n);
                for (w, m) in parts {
                    let r = match keep {
                        Mode::A => m * m.adjoint(),
                        Mode::B => (m.adjoint() * m).transpose(),
                    };
                    acc += r * Complex64::new(*w, 0.0);
                }
                acc
            }
            Repr::Dense(d) => CMatrix::from_fn(n, n, |i, j| {
                (0..n)
                    .map(|k| match keep {
                        Mode::A => d[(i * n + k, j * n + k)],
                        Mode::B => d[(k * n + i, k * n + j)],
                    })
                    .sum()
            }),
        };
        DensityMatrix::from_accumulated(self.dim, reduced)
    }

    /// `(U_A ⊗ U_B) W (U_A ⊗ U_B)†`; `None` stands for the identity.
    pub fn map_local(&self, ua: Option<&CMatrix>, ub: Option<&CMatrix>) -> Result<Self> {
        let n = self.dim.get();
        for u in [ua, ub].into_iter().flatten() {
            self.dim.check(u.nrows())?;
            self.dim.check(u.ncols())?;
        }
        let apply = |m: &CMatrix| -> CMatrix {
            let left = match ua {
                Some(u) => u * m,
                None => m.clone(),
            };
            match ub {
                Some(u) => left * u.transpose(),
                None => left,
            }
        };
        let repr = match &self.repr {
            Repr::Dense(d) => {
                let ia = CMatrix::identity(n, n);
                let ua = ua.unwrap_or(&ia);
                let ub = ub.unwrap_or(&ia);
                let u = ua.kronecker(ub);
                Repr::Dense(&u * d * u.adjoint())
            }
            _ => Repr::Mixture(
                self.components()?
                    .iter()
                    .map(|(w, m)| {
                        let out = apply(m);
                        let nrm = out.norm();
                        (w * nrm * nrm, out.unscale(nrm))
                    })
                    .collect(),
            ),
        };
        let mut out = Self {
            dim: self.dim,
            repr,
            leakage: 0.0,
        };
        out.leakage = (1.0 - out.trace()).max(0.0);
        Ok(out)
    }

    pub fn to_json(&self) -> TwoModeJson {
        let n_max = self.dim.get();
        match &self.repr {
            Repr::Schmidt(c) => TwoModeJson::Schmidt {
                n_max,
                coefficients: c.clone(),
            },
            Repr::Mixture(c) => TwoModeJson::Mixture {
                n_max,
                components: c
                    .iter()
                    .map(|(w, m)| MixtureComponentJson {
                        weight: *w,
                        amplitudes: MatrixJson::from_matrix(m),
                    })
                    .collect(),
            },
            Repr::Dense(d) => TwoModeJson::Dense {
                n_max,
                matrix: MatrixJson::from_matrix(d),
            },
        }
    }

    pub fn from_json(json: &TwoModeJson) -> Result<Self> {
        match json {
            TwoModeJson::Schmidt {
                n_max,
                coefficients,
            } => Self::from_schmidt(FockDim::new(*n_max)?, coefficients.clone()),
            TwoModeJson::Mixture { n_max, components } => {
                let dim = FockDim::new(*n_max)?;
                let parts = components
                    .iter()
                    .map(|c| {
                        let m = c.amplitudes.to_matrix()?;
                        let pure = Self::from_amplitudes(dim, m)?;
                        let norm = pure.trace();
                        Ok((c.weight / norm, pure))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::mixture(&parts)
            }
            TwoModeJson::Dense { n_max, matrix } => {
                Self::from_matrix(FockDim::new(*n_max)?, matrix.to_matrix()?)
            }
        }
    }
}

/// Row-major flatten `M[a, b] → v[a·n + b]`.
pub(crate) fn flatten(m: &CMatrix) -> nalgebra::DVector<Complex64> {
    let (r, c) = m.shape();
    nalgebra::DVector::from_fn(r * c, |k, _| m[(k / c, k % c)])
}

/// File format for two-mode resource states.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TwoModeJson {
    Schmidt {
        n_max: usize,
        coefficients: Vec<f64>,
    },
    /// Each component is `weight · |M⟩⟩⟨⟨M| / ⟨⟨M|M⟩⟩`.
    Mixture {
        n_max: usize,
        components: Vec<MixtureComponentJson>,
    },
    Dense {
        n_max: usize,
        matrix: MatrixJson,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureComponentJson {
    pub weight: f64,
    pub amplitudes: MatrixJson,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::PhasePoint;

    fn dim(n: usize) -> FockDim {
        FockDim::new(n).unwrap()
    }

    fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
        a.shape() == b.shape() && (a - b).iter().all(|z| z.norm() <= tol)
    }

    #[test]
    fn flattening_convention() {
        // |1⟩_A ⊗ |0⟩_B at n_max = 3 sits at index 1·3 + 0 = 3.
        let a = DensityMatrix::fock(1, dim(3)).unwrap();
        let b = DensityMatrix::fock(0, dim(3)).unwrap();
        let m = TwoModeState::tensor(&a, &b).unwrap().matrix();
        assert_eq!(m[(3, 3)], Complex64::new(1.0, 0.0));
        assert!((m.trace() - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        // and |0⟩⊗|2⟩ at index 2
        let m2 = TwoModeState::tensor(&b, &DensityMatrix::fock(2, dim(3)).unwrap())
            .unwrap()
            .matrix();
        assert_eq!(m2[(2, 2)], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn tensor_matches_kronecker_and_traces_back() {
        let d = dim(6);
        let rho = DensityMatrix::thermal(0.5, d)
            .unwrap()
            .displaced(PhasePoint::new(0.3, 0.2).unwrap());
        let sigma = DensityMatrix::coherent(Complex64::new(0.2, -0.4), d).unwrap();
        let t = TwoModeState::tensor(&rho, &sigma).unwrap();
        assert!(close(&t.matrix(), &rho.matrix().kronecker(sigma.matrix()), 1e-12));
        let back_b = t.partial_trace(Mode::A);
        let back_a = t.partial_trace(Mode::B);
        assert!(close(
            back_b.matrix(),
            &(rho.matrix() * Complex64::new(sigma.trace(), 0.0)),
            1e-12
        ));
        assert!(close(
            back_a.matrix(),
            &(sigma.matrix() * Complex64::new(rho.trace(), 0.0)),
            1e-12
        ));
        assert!((t.trace() - rho.trace() * sigma.trace()).abs() < 1e-14);
    }

    #[test]
    fn dense_and_mixture_partial_traces_agree() {
        let d = dim(5);
        let mut amp = CMatrix::zeros(5, 5);
        amp[(0, 1)] = Complex64::new(0.6, 0.0);
        amp[(2, 0)] = Complex64::new(0.0, 0.8);
        let pure = TwoModeState::from_amplitudes(d, amp).unwrap();
        let dense = TwoModeState::from_matrix(d, pure.matrix()).unwrap();
        for keep in [Mode::A, Mode::B] {
            assert!(close(
                pure.partial_trace(keep).matrix(),
                dense.partial_trace(keep).matrix(),
                1e-14
            ));
        }
        let comps = dense.components().unwrap();
        assert_eq!(comps.len(), 1);
        assert!((comps[0].0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn schmidt_matrix_is_outer_product() {
        let c = vec![0.8, 0.6];
        let s = TwoModeState::from_schmidt(dim(3), c).unwrap();
        let m = s.matrix();
        assert!((m[(0, 4)].re - 0.48).abs() < 1e-15);
        assert!((m[(4, 4)].re - 0.36).abs() < 1e-15);
        assert!(s.is_pure());
        let ra = s.partial_trace(Mode::A);
        assert!((ra.matrix()[(1, 1)].re - 0.36).abs() < 1e-15);
    }

    #[test]
    fn local_map_on_schmidt_matches_dense_conjugation() {
        let d = dim(6);
        let s = TwoModeState::from_schmidt(d, vec![0.9, 0.4, 0.1]).unwrap();
        let u = crate::fock::displacement(PhasePoint::new(0.2, -0.1).unwrap(), d);
        let mapped = s.map_local(None, Some(&u)).unwrap();
        let dense = TwoModeState::from_matrix(d, s.matrix()).unwrap();
        let mapped_dense = dense.map_local(None, Some(&u)).unwrap();
        assert!(close(&mapped.matrix(), &mapped_dense.matrix(), 1e-13));
    }

    #[test]
    fn json_round_trip_of_mixture() {
        let d = dim(4);
        let a = TwoModeState::from_schmidt(d, vec![0.9, 0.3]).unwrap();
        let b = TwoModeState::from_schmidt(d, vec![0.7, 0.5, 0.2]).unwrap();
        let mix = TwoModeState::mixture(&[(0.25, a), (0.75, b)]).unwrap();
        let text = serde_json::to_string(&mix.to_json()).unwrap();
        let back = TwoModeState::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert!(close(&mix.matrix(), &back.matrix(), 1e-14));
    }
}
