//! The random-displacement ("generalized thermalizing") channel
//! `L(ρ) = ∫∫ P(x, p) D(x, p) ρ D†(x, p) dx dp`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::epr::{epr_moments, KernelEvaluator};
use crate::fock::{displacement, displacement_alpha, DensityMatrix, FockDim, Mode, PhasePoint, TwoModeState};
use crate::grid::{gauss_hermite, GridSamples, PhaseGrid, DEFAULT_RESOLUTION};
use crate::summation::reduce_rows;
use crate::{Error, Result};

/// Allowed deviation of a kernel's quadrature normalization from 1.
pub const KERNEL_NORMALIZATION_TOLERANCE: f64 = 1e-3;
/// Default bound on the trace lost by a channel output.
pub const DEFAULT_LEAKAGE_BOUND: f64 = 1e-3;
pub const MIN_RESOLUTION: usize = 41;

/// Quadrature weights below this are skipped.
const NEGLIGIBLE_WEIGHT: f64 = 1e-20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Quadrature {
    Trapezoid,
    /// Tensor Gauss–Hermite rule; only used for closed-form Gaussian kernels.
    GaussHermite { order: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub extent: f64,
    pub resolution: usize,
    pub renormalize: bool,
    pub leakage_bound: f64,
    pub quadrature: Quadrature,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            extent: PhaseGrid::default_extent(1.0, 0.0, 0.0),
            resolution: DEFAULT_RESOLUTION,
            renormalize: false,
            leakage_bound: DEFAULT_LEAKAGE_BOUND,
            quadrature: Quadrature::Trapezoid,
        }
    }
}

impl ChannelConfig {
    /// Default grid rule for a kernel of variance `nbar` acting on an input
    /// with `mean_photons`, shifted off-centre by `offset`.
    pub fn for_states(nbar: f64, mean_photons: f64, offset: f64) -> Self {
        Self {
            extent: PhaseGrid::default_extent(nbar, mean_photons, offset),
            ..Self::default()
        }
    }

    /// Grid rule sized from the resource's EPR second moments, the input, and
    /// the photon number of the resource's sender half. The last term matters
    /// to the protocol, whose outcome density is wider than the kernel.
    pub fn for_resource(w: &TwoModeState, rho: &DensityMatrix) -> Result<Self> {
        let m = epr_moments(w)?;
        let nbar = m.second_x_diff.max(m.second_p_sum);
        let offset = m.mean_x_diff.abs().max(m.mean_p_sum.abs());
        let sender = w.partial_trace(Mode::A).mean_photon_number();
        Ok(Self::for_states(nbar, rho.mean_photon_number() + sender, offset))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.extent > 0.0) || !self.extent.is_finite() {
            return Err(Error::Config(format!("extent {} must be > 0", self.extent)));
        }
        if self.resolution < MIN_RESOLUTION || self.resolution % 2 == 0 {
            return Err(Error::Config(format!(
                "resolution {} must be odd and ≥ {MIN_RESOLUTION}",
                self.resolution
            )));
        }
        if !(self.leakage_bound > 0.0) {
            return Err(Error::Config("leakage bound must be > 0".into()));
        }
        if let Quadrature::GaussHermite { order } = self.quadrature {
            if order < 2 {
                return Err(Error::Config("Gauss–Hermite order must be ≥ 2".into()));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<PhaseGrid> {
        self.validate()?;
        PhaseGrid::new(self.extent, self.resolution)
    }
}

/// Displacement distribution of the channel.
#[derive(Debug, Clone)]
pub enum Kernel {
    /// `(1/2πn̄) exp(−(x² + p²)/2n̄)`; `nbar = 0` is the identity channel.
    GaussianClosed { nbar: f64 },
    /// Nonnegative samples with trapezoidal weights.
    SampledGrid(GridSamples),
}

/// Serializable summary of a kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelDescriptor {
    GaussianClosed { nbar: f64 },
    SampledGrid { grid: PhaseGrid, normalization: f64 },
}

pub fn gaussian_kernel(nbar: f64) -> Result<Kernel> {
    if !(nbar >= 0.0) || !nbar.is_finite() {
        return Err(Error::OutOfRange(format!("kernel n̄ = {nbar} must be ≥ 0")));
    }
    Ok(Kernel::GaussianClosed { nbar })
}

/// `n̄ = 1 − (1 − e^{−2r}) T` for a resource sent through a channel of
/// transmission `T`.
pub fn noisy_nbar(r: f64, transmission: f64) -> Result<f64> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::OutOfRange(format!("squeezing r = {r} must be ≥ 0")));
    }
    if !(0.0..=1.0).contains(&transmission) {
        return Err(Error::OutOfRange(format!(
            "transmission T = {transmission} outside [0, 1]"
        )));
    }
    Ok(1.0 - (1.0 - (-2.0 * r).exp()) * transmission)
}

/// Samples the kernel of `w` on the configured grid.
pub fn kernel_from(w: &TwoModeState, cfg: &ChannelConfig) -> Result<Kernel> {
    let grid = cfg.grid()?;
    let eval = KernelEvaluator::new(w)?;
    let values = (0..grid.len())
        .into_par_iter()
        .map(|k| eval.value(grid.point(k / grid.resolution, k % grid.resolution)))
        .collect::<Result<Vec<f64>>>()?;
    Kernel::sampled(GridSamples { grid, values })
}

impl Kernel {
    pub fn sampled(samples: GridSamples) -> Result<Self> {
        if samples.values.len() != samples.grid.len() {
            return Err(Error::DimensionMismatch {
                expected: samples.grid.len(),
                found: samples.values.len(),
            });
        }
        if let Some(v) = samples.values.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::Numerical(format!("negative kernel sample {v}")));
        }
        let total = samples.integral();
        check_normalization(total)?;
        Ok(Kernel::SampledGrid(samples))
    }

    pub fn gaussian_value(nbar: f64, pt: PhasePoint) -> f64 {
        (-pt.norm_sqr() / (2.0 * nbar)).exp() / (2.0 * std::f64::consts::PI * nbar)
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Kernel::GaussianClosed { nbar } if *nbar == 0.0)
    }

    pub fn nbar(&self) -> Option<f64> {
        match self {
            Kernel::GaussianClosed { nbar } => Some(*nbar),
            Kernel::SampledGrid(_) => None,
        }
    }

    pub fn descriptor(&self) -> KernelDescriptor {
        match self {
            Kernel::GaussianClosed { nbar } => KernelDescriptor::GaussianClosed { nbar: *nbar },
            Kernel::SampledGrid(s) => KernelDescriptor::SampledGrid {
                grid: s.grid,
                normalization: s.integral(),
            },
        }
    }

    /// Quadrature nodes grouped in rows, each weight already multiplied by the
    /// kernel value.
    pub fn weighted_rows(&self, cfg: &ChannelConfig) -> Result<Vec<Vec<(PhasePoint, f64)>>> {
        let rows: Vec<Vec<(PhasePoint, f64)>> = match self {
            Kernel::GaussianClosed { nbar } if *nbar == 0.0 => vec![vec![(PhasePoint::ORIGIN, 1.0)]],
            Kernel::GaussianClosed { nbar } => match cfg.quadrature {
                Quadrature::Trapezoid => {
                    let grid = cfg.grid()?;
                    (0..grid.resolution)
                        .map(|i| {
                            grid.row(i)
                                .map(|(pt, w)| (pt, w * Self::gaussian_value(*nbar, pt)))
                                .collect()
                        })
                        .collect()
                }
                Quadrature::GaussHermite { order } => {
                    cfg.validate()?;
                    let (t, h) = gauss_hermite(order);
                    let s = (2.0 * nbar).sqrt();
                    (0..order)
                        .map(|i| {
                            (0..order)
                                .map(|j| {
                                    (
                                        PhasePoint { x: s * t[i], p: s * t[j] },
                                        h[i] * h[j] / std::f64::consts::PI,
                                    )
                                })
                                .collect()
                        })
                        .collect()
                }
            },
            Kernel::SampledGrid(s) => (0..s.grid.resolution)
                .map(|i| {
                    s.grid
                        .row(i)
                        .enumerate()
                        .map(|(j, (pt, w))| (pt, w * s.values[i * s.grid.resolution + j]))
                        .collect()
                })
                .collect(),
        };
        let total: f64 = rows.iter().flatten().map(|(_, w)| w).sum();
        check_normalization(total)?;
        Ok(rows)
    }

    /// `(⟨x²⟩, ⟨p²⟩)` under the kernel, by the same quadrature the channel uses.
    pub fn second_moments(&self, cfg: &ChannelConfig) -> Result<(f64, f64)> {
        let rows = self.weighted_rows(cfg)?;
        let (mut xx, mut pp) = (0.0, 0.0);
        for (pt, w) in rows.iter().flatten() {
            xx += w * pt.x * pt.x;
            pp += w * pt.p * pt.p;
        }
        Ok((xx, pp))
    }
}

fn check_normalization(total: f64) -> Result<()> {
    if (total - 1.0).abs() > KERNEL_NORMALIZATION_TOLERANCE {
        return Err(Error::KernelNormalization {
            total,
            tolerance: KERNEL_NORMALIZATION_TOLERANCE,
        });
    }
    Ok(())
}

/// `Σ w P(pt) D(pt) ρ D†(pt)` over the kernel's quadrature.
///
/// The output is not renormalized unless `cfg.renormalize` is set: its trace
/// deficit measures truncation, and a deficit above `cfg.leakage_bound` is an
/// error.
pub fn apply_channel(
    kernel: &Kernel,
    rho: &DensityMatrix,
    cfg: &ChannelConfig,
) -> Result<DensityMatrix> {
    cfg.validate()?;
    let dim = rho.dim();
    let out = if kernel.is_identity() {
        rho.clone()
    } else {
        let rows = kernel.weighted_rows(cfg)?;
        let spectrum = rho.spectral()?;
        let (m, _) = reduce_rows(rows.len(), dim.get(), |r, acc| {
            for &(pt, w) in &rows[r] {
                if w < NEGLIGIBLE_WEIGHT {
                    continue;
                }
                let d = displacement(pt, dim);
                for (mu, v) in &spectrum {
                    acc.add_outer(w * mu, &(&d * v));
                }
            }
            0.0
        });
        DensityMatrix::from_accumulated(dim, m)
    };
    finish(out, cfg)
}

pub(crate) fn finish(out: DensityMatrix, cfg: &ChannelConfig) -> Result<DensityMatrix> {
    let deficit = out.trace_deficit();
    if deficit > cfg.leakage_bound {
        return Err(Error::TruncationLeakage {
            leakage: deficit,
            bound: cfg.leakage_bound,
        });
    }
    if cfg.renormalize {
        out.normalized()
    } else {
        Ok(out)
    }
}

/// `Σ_i w_i D(α_i) ρ_th D†(α_i)`: the channel output for an input whose
/// P-function is the point mixture `{(w_i, α_i)}`.
pub fn apply_thermal_form(
    mixture: &[(f64, Complex64)],
    nbar: f64,
    dim: FockDim,
) -> Result<DensityMatrix> {
    if mixture.is_empty() {
        return Err(Error::DegenerateInput("empty coherent mixture".into()));
    }
    if mixture.iter().any(|(w, _)| !(*w >= 0.0)) {
        return Err(Error::OutOfRange("mixture weights must be ≥ 0".into()));
    }
    let total: f64 = mixture.iter().map(|(w, _)| w).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::OutOfRange(format!(
            "mixture weights sum to {total}, expected 1"
        )));
    }
    let thermal = DensityMatrix::thermal(nbar, dim)?;
    let n = dim.get();
    let mut acc = crate::fock::CMatrix::zeros(n, n);
    for (w, alpha) in mixture {
        let d = displacement_alpha(*alpha, n);
        acc += &d * thermal.matrix() * d.adjoint() * Complex64::new(*w, 0.0);
    }
    Ok(DensityMatrix::from_accumulated(dim, acc))
}

/// Teleportation fidelity of a pure input, `Σ w P(pt) |⟨ψ|D(pt)|ψ⟩|²`,
/// scaled by `1/⟨ψ|ψ⟩` to match [`crate::fock::fidelity`] on the channel output.
pub fn fidelity_via_kernel(
    kernel: &Kernel,
    psi: &DensityMatrix,
    cfg: &ChannelConfig,
) -> Result<f64> {
    let ket = match psi.ket() {
        Some(k) => k.clone(),
        None => psi.pure_ket()?,
    };
    let norm = ket.norm_squared();
    if kernel.is_identity() {
        return Ok(norm);
    }
    let dim = psi.dim();
    let rows = kernel.weighted_rows(cfg)?;
    let per_row: Vec<f64> = rows
        .par_iter()
        .map(|row| {
            row.iter()
                .filter(|(_, w)| *w >= NEGLIGIBLE_WEIGHT)
                .map(|&(pt, w)| {
                    let d = displacement(pt, dim);
                    w * (ket.adjoint() * (&d * &ket))[(0, 0)].norm_sqr()
                })
                .sum()
        })
        .collect();
    Ok(crate::summation::pairwise_scalar(&per_row) / norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{fidelity, trace_distance};

    fn dim(n: usize) -> FockDim {
        FockDim::new(n).unwrap()
    }

    #[test]
    fn noisy_substitution() {
        let r = 0.7;
        assert!((noisy_nbar(r, 1.0).unwrap() - (-1.4f64).exp()).abs() < 1e-15);
        assert_eq!(noisy_nbar(r, 0.0).unwrap(), 1.0);
        assert_eq!(noisy_nbar(0.0, 0.3).unwrap(), 1.0);
        let want = 1.0 - (1.0 - (-2.0f64).exp()) * 0.5;
        assert!((noisy_nbar(1.0, 0.5).unwrap() - want).abs() < 1e-15);
        assert!((want - 0.5677).abs() < 1e-4);
        assert!(noisy_nbar(0.5, 1.1).is_err());
        assert!(noisy_nbar(-0.5, 0.5).is_err());
    }

    #[test]
    fn gaussian_kernel_basics() {
        assert!(gaussian_kernel(-1.0).is_err());
        let k = gaussian_kernel(1.0).unwrap();
        assert!((Kernel::gaussian_value(1.0, PhasePoint::ORIGIN) - 0.15915494309189535).abs() < 1e-15);
        let (xx, pp) = k.second_moments(&ChannelConfig::default()).unwrap();
        assert!((xx - 1.0).abs() < 1e-9 && (pp - 1.0).abs() < 1e-9);
        let k2 = gaussian_kernel(0.3).unwrap();
        let (xx, _) = k2.second_moments(&ChannelConfig::default()).unwrap();
        assert!((xx - 0.3).abs() < 1e-9);
    }

    #[test]
    fn identity_branch_is_exact() {
        let d = dim(12);
        let rho = DensityMatrix::cat(Complex64::new(0.8, 0.1), 0.0, d).unwrap();
        let out = apply_channel(&gaussian_kernel(0.0).unwrap(), &rho, &ChannelConfig::default()).unwrap();
        assert_eq!(out.matrix(), rho.matrix());
        let f = fidelity_via_kernel(&gaussian_kernel(0.0).unwrap(), &rho, &ChannelConfig::default()).unwrap();
        assert!((f - fidelity(&rho, &out).unwrap()).abs() < 1e-12);
        assert!((f - 1.0).abs() < 1e-6);
    }

    #[test]
    fn vacuum_becomes_thermal() {
        let d = dim(40);
        for nbar in [0.2, 0.55, 1.0] {
            let cfg = ChannelConfig::for_states(nbar, 0.0, 0.0);
            let out = apply_channel(&gaussian_kernel(nbar).unwrap(), &DensityMatrix::vacuum(d), &cfg).unwrap();
            let th = DensityMatrix::thermal(nbar, d).unwrap();
            let td = trace_distance(&out, &th).unwrap();
            assert!(td < 1e-3, "nbar {nbar}: {td}");
        }
    }

    #[test]
    fn coherent_becomes_displaced_thermal_and_matches_thermal_form() {
        let d = dim(40);
        let alpha = Complex64::new(0.6, -0.3);
        let nbar = 0.4;
        let rho = DensityMatrix::coherent(alpha, d).unwrap();
        let cfg = ChannelConfig::for_states(nbar, rho.mean_photon_number(), 0.0);
        let out = apply_channel(&gaussian_kernel(nbar).unwrap(), &rho, &cfg).unwrap();
        let want = DensityMatrix::thermal(nbar, d)
            .unwrap()
            .displaced(PhasePoint::from_alpha(alpha));
        assert!(trace_distance(&out, &want).unwrap() < 1e-3);
        let form = apply_thermal_form(&[(1.0, alpha)], nbar, d).unwrap();
        assert!(trace_distance(&out, &form).unwrap() < 1e-3);
    }

    #[test]
    fn thermal_form_mixture_photon_number() {
        let d = dim(40);
        let nbar = 0.5;
        let out = apply_thermal_form(
            &[(0.5, Complex64::new(1.0, 0.0)), (0.5, Complex64::new(-1.0, 0.0))],
            nbar,
            d,
        )
        .unwrap();
        assert!((out.mean_photon_number() - (nbar + 1.0)).abs() < 1e-10);
        assert!(apply_thermal_form(&[], nbar, d).is_err());
        let single = apply_thermal_form(&[(1.0, Complex64::new(0.0, 0.0))], nbar, d).unwrap();
        assert!(trace_distance(&single, &DensityMatrix::thermal(nbar, d).unwrap()).unwrap() < 1e-14);
    }

    #[test]
    fn coherent_fidelity_law() {
        let d = dim(40);
        let rho = DensityMatrix::coherent(Complex64::new(0.5, 0.5), d).unwrap();
        let mut last = 2.0;
        for nbar in [0.05, 0.2, 0.5, 1.0, 1.5] {
            let cfg = ChannelConfig::for_states(nbar, rho.mean_photon_number(), 0.0);
            let k = gaussian_kernel(nbar).unwrap();
            let f = fidelity_via_kernel(&k, &rho, &cfg).unwrap();
            assert!((f - 1.0 / (1.0 + nbar)).abs() < 1e-6, "nbar {nbar}: {f}");
            assert!(f < last);
            last = f;
            if nbar <= 1.0 {
                let out = apply_channel(&k, &rho, &cfg).unwrap();
                assert!((fidelity(&rho, &out).unwrap() - f).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn gauss_hermite_option_agrees() {
        let d = dim(30);
        let rho = DensityMatrix::fock(1, d).unwrap();
        let k = gaussian_kernel(0.5).unwrap();
        let trap = apply_channel(&k, &rho, &ChannelConfig::for_states(0.5, 1.0, 0.0)).unwrap();
        let gh_cfg = ChannelConfig {
            quadrature: Quadrature::GaussHermite { order: 60 },
            ..ChannelConfig::for_states(0.5, 1.0, 0.0)
        };
        let gh = apply_channel(&k, &rho, &gh_cfg).unwrap();
        assert!(trace_distance(&trap, &gh).unwrap() < 1e-6);
    }

    #[test]
    fn mixed_input_fidelity_requires_purity() {
        let d = dim(10);
        let th = DensityMatrix::thermal(0.3, d).unwrap();
        let err = fidelity_via_kernel(&gaussian_kernel(0.2).unwrap(), &th, &ChannelConfig::default());
        assert!(matches!(err, Err(Error::NotPure { .. })));
    }

    #[test]
    fn small_truncation_trips_leakage_bound() {
        let d = dim(6);
        let rho = DensityMatrix::coherent(Complex64::new(0.8, 0.0), d).unwrap();
        let cfg = ChannelConfig::for_states(0.55, 0.64, 0.0);
        let err = apply_channel(&gaussian_kernel(0.55).unwrap(), &rho, &cfg);
        assert!(matches!(err, Err(Error::TruncationLeakage { .. })), "{err:?}");
    }

    #[test]
    fn narrow_grid_fails_normalization() {
        let cfg = ChannelConfig {
            extent: 0.5,
            ..ChannelConfig::default()
        };
        let err = apply_channel(&gaussian_kernel(1.0).unwrap(), &DensityMatrix::vacuum(dim(8)), &cfg);
        assert!(matches!(err, Err(Error::KernelNormalization { .. })));
        let bad = ChannelConfig {
            resolution: 40,
            ..ChannelConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
