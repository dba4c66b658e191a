//! Phase-space quadrature: uniform trapezoidal grids, Gauss–Hermite nodes,
//! and CSV/JSON export of sampled functions.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::fock::PhasePoint;
use crate::{Error, Result};

pub const DEFAULT_RESOLUTION: usize = 121;
/// Relative change in a grid integral below which refinement stops.
pub const REFINE_TOLERANCE: f64 = 1e-5;
const MAX_REFINEMENTS: usize = 4;

/// Uniform square grid on `[−extent, extent]²` with `resolution` nodes per
/// axis (odd, so the origin is a node) and trapezoidal weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub extent: f64,
    pub resolution: usize,
}

impl PhaseGrid {
    pub fn new(extent: f64, resolution: usize) -> Result<Self> {
        if !(extent > 0.0) || !extent.is_finite() {
            return Err(Error::Config(format!("grid extent {extent} must be > 0")));
        }
        if resolution < 3 || resolution % 2 == 0 {
            return Err(Error::Config(format!(
                "grid resolution {resolution} must be odd and ≥ 3"
            )));
        }
        Ok(Self { extent, resolution })
    }

    /// Extent rule `L = 5·√(max(n̄, 1) + ⟨n̂⟩ + 1)`, widened by `offset` when
    /// the kernel is not centred on the origin.
    pub fn default_extent(nbar: f64, mean_photons: f64, offset: f64) -> f64 {
        5.0 * (nbar.max(1.0) + mean_photons.max(0.0) + 1.0).sqrt() + offset.abs()
    }

    pub fn with_default_rule(nbar: f64, mean_photons: f64, offset: f64) -> Self {
        Self {
            extent: Self::default_extent(nbar, mean_photons, offset),
            resolution: DEFAULT_RESOLUTION,
        }
    }

    #[inline]
    pub fn step(&self) -> f64 {
        2.0 * self.extent / (self.resolution - 1) as f64
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.extent + i as f64 * self.step()
    }

    pub fn len(&self) -> usize {
        self.resolution * self.resolution
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Node `(i, j)`, `i` along x, `j` along p. Flat index is `i·resolution + j`.
    #[inline]
    pub fn point(&self, i: usize, j: usize) -> PhasePoint {
        PhasePoint {
            x: self.coord(i),
            p: self.coord(j),
        }
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let h = self.step();
        let edge = |k: usize| {
            if k == 0 || k + 1 == self.resolution {
                0.5
            } else {
                1.0
            }
        };
        h * h * edge(i) * edge(j)
    }

    /// Nodes of row `i` with their weights.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (PhasePoint, f64)> + '_ {
        (0..self.resolution).map(move |j| (self.point(i, j), self.weight(i, j)))
    }

    pub fn points(&self) -> impl Iterator<Item = (PhasePoint, f64)> + '_ {
        (0..self.resolution).flat_map(move |i| self.row(i))
    }

    /// Same extent, twice the density: `2N − 1` nodes, so every old node is kept.
    pub fn refined(&self) -> Self {
        Self {
            extent: self.extent,
            resolution: 2 * self.resolution - 1,
        }
    }

    pub fn integrate(&self, f: impl Fn(PhasePoint) -> f64) -> f64 {
        self.points().map(|(pt, w)| w * f(pt)).sum()
    }

    /// Doubles the resolution until the integral of `f` moves by less than
    /// [`REFINE_TOLERANCE`]. Returns the final grid and integral.
    pub fn refine_until_stable(&self, f: impl Fn(PhasePoint) -> f64) -> (Self, f64) {
        let mut grid = *self;
        let mut value = grid.integrate(&f);
        for _ in 0..MAX_REFINEMENTS {
            let finer = grid.refined();
            let next = finer.integrate(&f);
            let shift = (next - value).abs();
            grid = finer;
            value = next;
            if shift < REFINE_TOLERANCE {
                break;
            }
        }
        (grid, value)
    }
}

/// Gauss–Hermite rule for `∫ e^{−t²} f(t) dt` (Golub–Welsch).
pub fn gauss_hermite(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = DMatrix::<f64>::zeros(order, order);
    for k in 1..order {
        let b = (k as f64 / 2.0).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// A real function sampled on a [`PhaseGrid`], row-major in `(x, p)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSamples {
    pub grid: PhaseGrid,
    pub values: Vec<f64>,
}

impl GridSamples {
    pub fn integral(&self) -> f64 {
        self.grid
            .points()
            .zip(&self.values)
            .map(|((_, w), v)| w * v)
            .sum()
    }

    /// CSV with header `x,p,<name>[,<extra>…]`.
    pub fn write_csv<W: Write>(
        &self,
        out: W,
        name: &str,
        extra: &[(&str, &[f64])],
    ) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let mut header = vec!["x", "p", name];
        header.extend(extra.iter().map(|(n, _)| *n));
        w.write_record(&header)?;
        for (k, (pt, _)) in self.grid.points().enumerate() {
            let mut rec = vec![pt.x.to_string(), pt.p.to_string(), self.values[k].to_string()];
            rec.extend(extra.iter().map(|(_, col)| col[k].to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_even_or_tiny_resolution() {
        assert!(PhaseGrid::new(5.0, 120).is_err());
        assert!(PhaseGrid::new(5.0, 1).is_err());
        assert!(PhaseGrid::new(0.0, 41).is_err());
        let g = PhaseGrid::new(5.0, 41).unwrap();
        assert_eq!(g.point(20, 20), PhasePoint::ORIGIN);
    }

    #[test]
    fn trapezoid_integrates_gaussian() {
        let g = PhaseGrid::new(8.0, 121).unwrap();
        let nbar = 0.7;
        let v = g.integrate(|pt| {
            (-(pt.norm_sqr()) / (2.0 * nbar)).exp() / (2.0 * std::f64::consts::PI * nbar)
        });
        assert!((v - 1.0).abs() < 1e-10);
        let area = g.integrate(|_| 1.0);
        assert!((area - 256.0).abs() < 1e-9);
    }

    #[test]
    fn refinement_keeps_nodes() {
        let g = PhaseGrid::new(3.0, 41).unwrap();
        let f = g.refined();
        assert_eq!(f.resolution, 81);
        assert!((f.coord(2) - g.coord(1)).abs() < 1e-14);
    }

    #[test]
    fn gauss_hermite_moments() {
        let (t, w) = gauss_hermite(20);
        let m0: f64 = w.iter().sum();
        let m2: f64 = t.iter().zip(&w).map(|(t, w)| w * t * t).sum();
        let m4: f64 = t.iter().zip(&w).map(|(t, w)| w * t.powi(4)).sum();
        let sp = std::f64::consts::PI.sqrt();
        assert!((m0 - sp).abs() < 1e-12);
        assert!((m2 - sp / 2.0).abs() < 1e-12);
        assert!((m4 - 3.0 * sp / 4.0).abs() < 1e-12);
    }

    #[test]
    fn csv_layout() {
        let g = PhaseGrid::new(1.0, 3).unwrap();
        let s = GridSamples {
            grid: g,
            values: (0..9).map(|k| k as f64).collect(),
        };
        let mut buf = Vec::new();
        s.write_csv(&mut buf, "P", &[]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,p,P"));
        assert_eq!(lines.next(), Some("-1,-1,0"));
        assert_eq!(lines.next(), Some("-1,0,1"));
        assert!(!text.contains('\r'));
    }
}
