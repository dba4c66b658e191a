//! Random phase-space points: rejection sampling under a Gaussian envelope,
//! and cell sampling from gridded densities.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::fock::PhasePoint;
use crate::grid::GridSamples;
use crate::{Error, Result};

/// Envelope height over the largest density/envelope ratio seen on the grid.
pub const ENVELOPE_INFLATION: f64 = 1.5;
/// Envelope variance over the fitted variance, so its tails dominate.
pub const ENVELOPE_WIDENING: f64 = 1.25;
const MAX_ATTEMPTS: usize = 1_000_000;

/// Independent generator for item `index` of a run seeded with `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `scale · N(mean, diag(σ²))`, fitted so that `scale · pdf ≥ f` on the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianEnvelope {
    pub mean: PhasePoint,
    pub sigma: [f64; 2],
    pub scale: f64,
}

impl GaussianEnvelope {
    pub fn fit(samples: &GridSamples) -> Result<Self> {
        let total = samples.integral();
        if !(total > 0.0) {
            return Err(Error::DegenerateInput("density has no mass on the grid".into()));
        }
        let mut m = [0.0; 2];
        let mut s = [0.0; 2];
        for ((pt, w), v) in samples.grid.points().zip(&samples.values) {
            let wv = w * v / total;
            m[0] += wv * pt.x;
            m[1] += wv * pt.p;
            s[0] += wv * pt.x * pt.x;
            s[1] += wv * pt.p * pt.p;
        }
        let h = samples.grid.step();
        let sigma = [0, 1].map(|k| {
            ((s[k] - m[k] * m[k]).max(h * h) * ENVELOPE_WIDENING).sqrt()
        });
        let mut env = Self {
            mean: PhasePoint { x: m[0], p: m[1] },
            sigma,
            scale: 1.0,
        };
        let ratio = samples
            .grid
            .points()
            .zip(&samples.values)
            .map(|((pt, _), v)| v / env.pdf(pt))
            .fold(0.0, f64::max);
        env.scale = ENVELOPE_INFLATION * ratio;
        Ok(env)
    }

    pub fn pdf(&self, pt: PhasePoint) -> f64 {
        let zx = (pt.x - self.mean.x) / self.sigma[0];
        let zp = (pt.p - self.mean.p) / self.sigma[1];
        (-0.5 * (zx * zx + zp * zp)).exp()
            / (2.0 * std::f64::consts::PI * self.sigma[0] * self.sigma[1])
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> PhasePoint {
        let nx = Normal::new(self.mean.x, self.sigma[0]).expect("σ > 0");
        let np = Normal::new(self.mean.p, self.sigma[1]).expect("σ > 0");
        PhasePoint {
            x: nx.sample(rng),
            p: np.sample(rng),
        }
    }

    /// Draws one point from the density `f`, returning it with `f(point)`.
    /// A point where `f` exceeds the envelope is an error, not a retry.
    pub fn sample<R, F>(&self, rng: &mut R, f: F) -> Result<(PhasePoint, f64)>
    where
        R: Rng + ?Sized,
        F: Fn(PhasePoint) -> Result<f64>,
    {
        for _ in 0..MAX_ATTEMPTS {
            let pt = self.draw(rng);
            let bound = self.scale * self.pdf(pt);
            let value = f(pt)?;
            if value > bound {
                return Err(Error::EnvelopeFailure {
                    x: pt.x,
                    p: pt.p,
                    ratio: value / bound,
                });
            }
            if rng.random::<f64>() * bound < value {
                return Ok((pt, value));
            }
        }
        Err(Error::Numerical(format!(
            "rejection sampler accepted nothing in {MAX_ATTEMPTS} attempts"
        )))
    }
}

/// Draws from a gridded density: a node is chosen with probability
/// `weight · value`, then the point is spread uniformly over its cell.
#[derive(Debug, Clone)]
pub struct GridCellSampler {
    samples: GridSamples,
    cdf: Vec<f64>,
}

impl GridCellSampler {
    pub fn new(samples: GridSamples) -> Result<Self> {
        let mut acc = 0.0;
        let cdf: Vec<f64> = samples
            .grid
            .points()
            .zip(&samples.values)
            .map(|((_, w), v)| {
                acc += w * v.max(0.0);
                acc
            })
            .collect();
        if !(acc > 0.0) {
            return Err(Error::DegenerateInput("density has no mass on the grid".into()));
        }
        Ok(Self { samples, cdf })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> PhasePoint {
        let total = *self.cdf.last().expect("non-empty grid");
        let u = rng.random::<f64>() * total;
        let k = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        let g = &self.samples.grid;
        let centre = g.point(k / g.resolution, k % g.resolution);
        let h = g.step();
        let jitter = |c: f64, r: f64| (c + (r - 0.5) * h).clamp(-g.extent, g.extent);
        PhasePoint {
            x: jitter(centre.x, rng.random()),
            p: jitter(centre.p, rng.random()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::PhaseGrid;

    fn gaussian_samples(nbar: f64, shift: f64) -> GridSamples {
        let grid = PhaseGrid::new(6.0, 81).unwrap();
        let values = grid
            .points()
            .map(|(pt, _)| {
                let d = PhasePoint { x: pt.x - shift, p: pt.p };
                (-d.norm_sqr() / (2.0 * nbar)).exp() / (2.0 * std::f64::consts::PI * nbar)
            })
            .collect();
        GridSamples { grid, values }
    }

    #[test]
    fn envelope_fit_covers_density() {
        let s = gaussian_samples(0.5, 0.7);
        let env = GaussianEnvelope::fit(&s).unwrap();
        assert!((env.mean.x - 0.7).abs() < 1e-3);
        for ((pt, _), v) in s.grid.points().zip(&s.values) {
            assert!(env.scale * env.pdf(pt) >= *v);
        }
    }

    #[test]
    fn rejection_sampler_moments() {
        let nbar = 0.5;
        let s = gaussian_samples(nbar, 0.0);
        let env = GaussianEnvelope::fit(&s).unwrap();
        let f = |pt: PhasePoint| {
            Ok((-pt.norm_sqr() / (2.0 * nbar)).exp() / (2.0 * std::f64::consts::PI * nbar))
        };
        let mut rng = stream_rng(11, 0);
        let n = 20_000;
        let var: f64 = (0..n)
            .map(|_| env.sample(&mut rng, f).unwrap().0.x.powi(2))
            .sum::<f64>()
            / n as f64;
        assert!((var - nbar).abs() < 0.03, "{var}");
    }

    #[test]
    fn envelope_violation_is_reported() {
        let env = GaussianEnvelope {
            mean: PhasePoint::ORIGIN,
            sigma: [1.0, 1.0],
            scale: 1e-6,
        };
        let mut rng = stream_rng(1, 0);
        let err = env.sample(&mut rng, |_| Ok(1.0));
        assert!(matches!(err, Err(Error::EnvelopeFailure { .. })));
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream_rng(5, 3).random();
        let b: u64 = stream_rng(5, 3).random();
        let c: u64 = stream_rng(5, 4).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn cell_sampler_moments() {
        let s = gaussian_samples(0.4, 0.5);
        let sampler = GridCellSampler::new(s).unwrap();
        let mut rng = stream_rng(2, 0);
        let n = 20_000;
        let pts: Vec<PhasePoint> = (0..n).map(|_| sampler.draw(&mut rng)).collect();
        let mx = pts.iter().map(|p| p.x).sum::<f64>() / n as f64;
        let vp = pts.iter().map(|p| p.p * p.p).sum::<f64>() / n as f64;
        assert!((mx - 0.5).abs() < 0.02);
        assert!((vp - 0.4).abs() < 0.03, "{vp}");
    }
}
