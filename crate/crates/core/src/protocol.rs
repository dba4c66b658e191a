//! The standard teleportation protocol, computed directly.
//!
//! Alice projects the input mode and her half of the resource onto the
//! displaced EPR vector `|Φ(x, p)⟩ = (D̂(x, p) ⊗ 1) Σ_n |n, n⟩/√2π`, sends
//! `(x, p)`, and Bob applies `D̂(x, p)`. With `ρ = Σ μ |r⟩⟨r|` and
//! `W = Σ λ |M⟩⟩⟨⟨M|`, Bob's unnormalized state before correction is
//! `Σ μ λ |Mᵀu⟩⟨Mᵀu|` with `u = D̂†(x, p) r / √2π`. The three-mode state is
//! never formed.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{finish, ChannelConfig};
use crate::epr::epr_coefficient;
use crate::fock::{displacement, fidelity, CMatrix, CVector, DensityMatrix, PhasePoint, TwoModeState};
use crate::gaussian::fock_to_gaussian_moments;
use crate::grid::GridSamples;
use crate::sampling::{stream_rng, GaussianEnvelope};
use crate::summation::reduce_rows;
use crate::{Error, Result};

/// Densities below this are reported as zero with no conditional state.
pub const DEGENERATE_DENSITY: f64 = 1e-300;
/// Allowed deviation of the outcome density's grid integral from 1.
pub const DENSITY_NORMALIZATION_TOLERANCE: f64 = 1e-2;

#[derive(Debug, Clone)]
pub struct ConditionalOutcome {
    pub pt: PhasePoint,
    /// Bob's corrected state, normalized; `None` when the density underflows.
    pub state: Option<DensityMatrix>,
    pub density: f64,
}

#[derive(Debug, Clone)]
pub struct AverageOutput {
    /// `∫∫ D̂ ⟨Φ|ρ ⊗ W|Φ⟩ D̂† dx dp`, not renormalized unless configured.
    pub state: DensityMatrix,
    /// Grid integral of the outcome density.
    pub density_integral: f64,
}

/// Input and resource in the decomposed form the per-point work needs.
#[derive(Debug, Clone)]
pub struct Teleporter {
    dim: crate::fock::FockDim,
    input: Vec<(f64, CVector)>,
    resource: Resource,
}

#[derive(Debug, Clone)]
enum Resource {
    Schmidt(Vec<f64>),
    Components(Vec<(f64, CMatrix)>),
}

impl Teleporter {
    pub fn new(rho: &DensityMatrix, w: &TwoModeState) -> Result<Self> {
        w.dim().check(rho.dim().get())?;
        let resource = match w.schmidt() {
            Some(c) => Resource::Schmidt(c.to_vec()),
            None => Resource::Components(
                w.components()?
                    .into_iter()
                    .map(|(l, m)| (l, m.transpose()))
                    .collect(),
            ),
        };
        Ok(Self {
            dim: rho.dim(),
            input: rho.spectral()?,
            resource,
        })
    }

    /// Calls `f(weight, v)` for each term of Bob's corrected unnormalized
    /// operator `Σ weight · v v†` and returns the outcome density.
    fn visit(&self, pt: PhasePoint, mut f: impl FnMut(f64, &CVector)) -> f64 {
        let d = displacement(pt, self.dim);
        let dh = d.adjoint() * Complex64::new(epr_coefficient(), 0.0);
        let mut density = 0.0;
        for (mu, r) in &self.input {
            let u = &dh * r;
            let mut emit = |lambda: f64, bob: CVector| {
                density += mu * lambda * bob.norm_squared();
                f(mu * lambda, &(&d * bob));
            };
            match &self.resource {
                Resource::Schmidt(c) => {
                    let bob = CVector::from_fn(c.len(), |i, _| u[i] * c[i]);
                    emit(1.0, bob);
                }
                Resource::Components(parts) => {
                    for (lambda, mt) in parts {
                        emit(*lambda, mt * &u);
                    }
                }
            }
        }
        density
    }

    pub fn density(&self, pt: PhasePoint) -> f64 {
        self.visit(pt, |_, _| {})
    }

    pub fn conditional(&self, pt: PhasePoint) -> Result<ConditionalOutcome> {
        let n = self.dim.get();
        let mut op = CMatrix::zeros(n, n);
        let density = self.visit(pt, |w, v| {
            op += v * v.adjoint() * Complex64::new(w, 0.0);
        });
        if !(density >= DEGENERATE_DENSITY) {
            return Ok(ConditionalOutcome {
                pt,
                state: None,
                density: density.max(0.0),
            });
        }
        let state = DensityMatrix::from_matrix(self.dim, (&op + op.adjoint()).unscale(2.0))?.normalized()?;
        Ok(ConditionalOutcome {
            pt,
            state: Some(state),
            density,
        })
    }
}

pub fn conditional_output(
    rho: &DensityMatrix,
    w: &TwoModeState,
    pt: PhasePoint,
) -> Result<ConditionalOutcome> {
    Teleporter::new(rho, w)?.conditional(pt)
}

/// Outcome density sampled on the configured grid.
pub fn outcome_density(rho: &DensityMatrix, w: &TwoModeState, cfg: &ChannelConfig) -> Result<GridSamples> {
    let grid = cfg.grid()?;
    let t = Teleporter::new(rho, w)?;
    let values = (0..grid.len())
        .into_par_iter()
        .map(|k| t.density(grid.point(k / grid.resolution, k % grid.resolution)))
        .collect();
    Ok(GridSamples { grid, values })
}

/// Ensemble-averaged corrected output on the channel's trapezoidal grid, so
/// it can be compared with [`crate::channel::apply_channel`] node for node.
pub fn average_output(rho: &DensityMatrix, w: &TwoModeState, cfg: &ChannelConfig) -> Result<AverageOutput> {
    let grid = cfg.grid()?;
    let t = Teleporter::new(rho, w)?;
    let (m, density_integral) = reduce_rows(grid.resolution, rho.dim().get(), |i, acc| {
        let mut side = 0.0;
        for (pt, weight) in grid.row(i) {
            side += weight * t.visit(pt, |lw, v| acc.add_outer(weight * lw, v));
        }
        side
    });
    if (density_integral - 1.0).abs() > DENSITY_NORMALIZATION_TOLERANCE {
        return Err(Error::KernelNormalization {
            total: density_integral,
            tolerance: DENSITY_NORMALIZATION_TOLERANCE,
        });
    }
    let state = finish(DensityMatrix::from_accumulated(rho.dim(), m), cfg)?;
    Ok(AverageOutput {
        state,
        density_integral,
    })
}

/// `count` outcomes drawn from the density by rejection sampling. Outcome `k`
/// uses its own stream of `seed`, so results do not depend on thread count.
pub fn sample_outcomes(
    rho: &DensityMatrix,
    w: &TwoModeState,
    count: usize,
    seed: u64,
    cfg: &ChannelConfig,
) -> Result<Vec<ConditionalOutcome>> {
    if count == 0 {
        return Err(Error::Config("sample count must be ≥ 1".into()));
    }
    let t = Teleporter::new(rho, w)?;
    let env = GaussianEnvelope::fit(&outcome_density(rho, w, cfg)?)?;
    (0..count)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            let (pt, _) = env.sample(&mut rng, |pt| Ok(t.density(pt)))?;
            t.conditional(pt)
        })
        .collect()
}

/// Covariance of the displacement the protocol adds, estimated from sampled
/// outcomes as `Cov(conditional means) + mean(conditional cov) − cov(ρ)`.
pub fn empirical_displacement_covariance(
    outcomes: &[ConditionalOutcome],
    rho: &DensityMatrix,
) -> Result<[[f64; 2]; 2]> {
    let moments: Vec<_> = outcomes
        .iter()
        .filter_map(|o| o.state.as_ref())
        .map(fock_to_gaussian_moments)
        .collect();
    if moments.len() < 2 {
        return Err(Error::DegenerateInput("need at least two outcomes".into()));
    }
    let n = moments.len() as f64;
    let mut mean = [0.0; 2];
    for g in &moments {
        mean[0] += g.mean[0] / n;
        mean[1] += g.mean[1] / n;
    }
    let input = fock_to_gaussian_moments(rho);
    let mut out = [[0.0; 2]; 2];
    for g in &moments {
        let d = [g.mean[0] - mean[0], g.mean[1] - mean[1]];
        for a in 0..2 {
            for b in 0..2 {
                out[a][b] += (d[a] * d[b] + g.cov[a][b]) / n;
            }
        }
    }
    for a in 0..2 {
        for b in 0..2 {
            out[a][b] -= input.cov[a][b];
        }
    }
    Ok(out)
}

/// One CSV row per grid node: `x, p, density, fidelity`, the last being the
/// fidelity of the conditional state with a pure input (empty otherwise).
pub fn write_outcome_csv<W: Write>(
    out: W,
    rho: &DensityMatrix,
    w: &TwoModeState,
    cfg: &ChannelConfig,
) -> Result<()> {
    let grid = cfg.grid()?;
    let t = Teleporter::new(rho, w)?;
    let pure = rho.ket().is_some();
    let rows: Vec<(PhasePoint, f64, Option<f64>)> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let o = t.conditional(grid.point(k / grid.resolution, k % grid.resolution))?;
            let f = match (&o.state, pure) {
                (Some(s), true) => Some(fidelity(rho, s)?),
                _ => None,
            };
            Ok((o.pt, o.density, f))
        })
        .collect::<Result<_>>()?;
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    wtr.write_record(["x", "p", "density", "fidelity"])?;
    for (pt, d, f) in rows {
        wtr.write_record([
            pt.x.to_string(),
            pt.p.to_string(),
            d.to_string(),
            f.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Summary of an oracle run, for JSON manifests.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleSummary {
    pub density_integral: f64,
    pub trace: f64,
    pub trace_deficit: f64,
}

impl From<&AverageOutput> for OracleSummary {
    fn from(a: &AverageOutput) -> Self {
        Self {
            density_integral: a.density_integral,
            trace: a.state.trace(),
            trace_deficit: a.state.trace_deficit(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_channel, kernel_from};
    use crate::epr::{kernel_value, tmsv};
    use crate::fock::{trace_distance, FockDim};

    fn dim(n: usize) -> FockDim {
        FockDim::new(n).unwrap()
    }

    #[test]
    fn density_is_kernel_for_vacuum_resource_and_input() {
        let d = dim(12);
        let w = tmsv(0.0, d).unwrap();
        let rho = DensityMatrix::vacuum(d);
        for pt in [PhasePoint::ORIGIN, PhasePoint { x: 0.7, p: -0.4 }] {
            let o = conditional_output(&rho, &w, pt).unwrap();
            let want = (-pt.norm_sqr() / 2.0).exp() / (2.0 * std::f64::consts::PI);
            assert!((o.density - want).abs() < 1e-12, "{} vs {want}", o.density);
            let s = o.state.unwrap();
            assert!((s.trace() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn density_is_rotation_invariant() {
        let d = dim(20);
        let w = tmsv(0.6, d).unwrap();
        let rho = DensityMatrix::thermal(0.3, d).unwrap();
        let t = Teleporter::new(&rho, &w).unwrap();
        let base = t.density(PhasePoint { x: 1.1, p: 0.0 });
        for k in 1..8 {
            let th = k as f64 * std::f64::consts::PI / 4.0;
            let v = t.density(PhasePoint { x: 1.1 * th.cos(), p: 1.1 * th.sin() });
            assert!((v - base).abs() < 1e-12 * base.max(1e-300) + 1e-15);
        }
    }

    #[test]
    fn strong_resource_preserves_state_near_peak() {
        let d = dim(40);
        let w = tmsv(2.0, d).unwrap();
        let rho = DensityMatrix::coherent(Complex64::new(0.5, 0.0), d).unwrap();
        let peak = PhasePoint::from_alpha(Complex64::new(0.5, 0.0));
        for pt in [peak, peak + PhasePoint { x: 0.3, p: -0.2 }] {
            let o = conditional_output(&rho, &w, pt).unwrap();
            let f = fidelity(&rho, o.state.as_ref().unwrap()).unwrap();
            assert!(f >= 0.96, "fidelity {f} at {pt:?}");
        }
    }

    #[test]
    fn underflowing_density_is_flagged() {
        let d = dim(10);
        let o = conditional_output(&DensityMatrix::vacuum(d), &tmsv(0.0, d).unwrap(), PhasePoint { x: 60.0, p: 0.0 })
            .unwrap();
        assert!(o.state.is_none());
    }

    #[test]
    fn oracle_matches_channel_for_asymmetric_resource() {
        let d = dim(24);
        let w = tmsv(0.5, d)
            .unwrap()
            .map_local(None, Some(&displacement(PhasePoint { x: 0.4, p: -0.3 }, d)))
            .unwrap();
        let rho = DensityMatrix::coherent(Complex64::new(0.3, 0.2), d).unwrap();
        let cfg = ChannelConfig {
            renormalize: true,
            ..ChannelConfig::for_resource(&w, &rho).unwrap()
        };
        let avg = average_output(&rho, &w, &cfg).unwrap();
        let ch = apply_channel(&kernel_from(&w, &cfg).unwrap(), &rho, &cfg).unwrap();
        let td = trace_distance(&avg.state, &ch).unwrap();
        assert!(td < 1e-3, "trace distance {td}");
        let m = crate::epr::epr_moments(&w).unwrap();
        assert!(m.kernel_mean().x.abs() > 0.1);
    }

    #[test]
    fn density_integrates_to_one() {
        let d = dim(30);
        let w = tmsv(0.4, d).unwrap();
        let rho = DensityMatrix::fock(1, d).unwrap();
        let cfg = ChannelConfig::for_resource(&w, &rho).unwrap();
        let s = outcome_density(&rho, &w, &cfg).unwrap();
        assert!((s.integral() - 1.0).abs() < 1e-3);
        let avg = average_output(&rho, &w, &cfg).unwrap();
        assert!((avg.density_integral - s.integral()).abs() < 1e-12);
        let _ = kernel_value(&w, PhasePoint::ORIGIN).unwrap();
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let d = dim(16);
        let w = tmsv(0.5, d).unwrap();
        let rho = DensityMatrix::vacuum(d);
        let cfg = ChannelConfig::for_resource(&w, &rho).unwrap();
        let a = sample_outcomes(&rho, &w, 5, 42, &cfg).unwrap();
        let b = sample_outcomes(&rho, &w, 5, 42, &cfg).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.pt == y.pt && x.density == y.density));
        let one = sample_outcomes(&rho, &w, 1, 3, &cfg).unwrap();
        assert_eq!(one.len(), 1);
        assert!(one[0].state.is_some() && one[0].density > 0.0);
        assert!(sample_outcomes(&rho, &w, 0, 3, &cfg).is_err());
    }
}
