//! Order-insensitive accumulation of weighted outer products.
//!
//! Work is split into a fixed set of rows. Each row is summed sequentially with
//! Neumaier compensation, rows run in parallel, and the row partials are
//! combined by a fixed pairwise tree, so the result does not depend on the
//! thread count or scheduling.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::fock::{CMatrix, CVector};

/// Compensated accumulator for Hermitian `Σ w v v†`, upper triangle only.
pub(crate) struct HermitianAccumulator {
    n: usize,
    sum: Vec<f64>,
    comp: Vec<f64>,
}

impl HermitianAccumulator {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            n,
            sum: vec![0.0; 2 * n * n],
            comp: vec![0.0; 2 * n * n],
        }
    }

    #[inline]
    fn add_at(&mut self, k: usize, value: f64) {
        let s = self.sum[k];
        let t = s + value;
        if s.abs() >= value.abs() {
            self.comp[k] += (s - t) + value;
        } else {
            self.comp[k] += (value - t) + s;
        }
        self.sum[k] = t;
    }

    /// `acc += w · v v†`.
    pub(crate) fn add_outer(&mut self, w: f64, v: &CVector) {
        let n = self.n;
        for i in 0..n {
            let vi = v[i] * w;
            if vi.re == 0.0 && vi.im == 0.0 {
                continue;
            }
            for j in i..n {
                let z: Complex64 = vi * v[j].conj();
                let k = 2 * (i * n + j);
                self.add_at(k, z.re);
                self.add_at(k + 1, z.im);
            }
        }
    }

    fn into_matrix(self) -> CMatrix {
        let n = self.n;
        CMatrix::from_fn(n, n, |i, j| {
            let (a, b, conj) = if i <= j { (i, j, false) } else { (j, i, true) };
            let k = 2 * (a * n + b);
            let z = Complex64::new(self.sum[k] + self.comp[k], self.sum[k + 1] + self.comp[k + 1]);
            if conj {
                z.conj()
            } else {
                z
            }
        })
    }
}

/// Runs `row_fn(row, acc)` for every row in parallel and returns the
/// deterministic total together with the per-row scalar side sums.
pub(crate) fn reduce_rows<F>(rows: usize, n: usize, row_fn: F) -> (CMatrix, f64)
where
    F: Fn(usize, &mut HermitianAccumulator) -> f64 + Sync,
{
    let partials: Vec<(CMatrix, f64)> = (0..rows)
        .into_par_iter()
        .map(|r| {
            let mut acc = HermitianAccumulator::new(n);
            let side = row_fn(r, &mut acc);
            (acc.into_matrix(), side)
        })
        .collect();
    let scalar = pairwise_scalar(&partials.iter().map(|p| p.1).collect::<Vec<_>>());
    let mats: Vec<CMatrix> = partials.into_iter().map(|p| p.0).collect();
    let total = pairwise_matrix(mats).unwrap_or_else(|| CMatrix::zeros(n, n));
    (total, scalar)
}

fn pairwise_matrix(mut level: Vec<CMatrix>) -> Option<CMatrix> {
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        let mut it = level.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(a + b),
                None => next.push(a),
            }
        }
        level = next;
    }
    level.pop()
}

pub(crate) fn pairwise_scalar(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => pairwise_scalar(&values[..n / 2]) + pairwise_scalar(&values[n / 2..]),
    }
}
