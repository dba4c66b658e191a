//! Dense coding over the standard protocol.
//!
//! Alice encodes a message `(x, p)` as `D̂(x, p)` on her half of `W`; Bob's
//! joint measurement returns `(x′, p′)` with density
//! `P(x′, p′ | x, p) = 𝒫(x − x′, p′ − p)`, the same kernel that governs
//! teleportation. The opposite signs on the two differences are kept as
//! written; for even kernels (every two-mode squeezed resource) they are
//! indistinguishable from a symmetric convention.

use std::io::Write;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{gaussian_kernel, kernel_from, noisy_nbar, ChannelConfig, Kernel};
use crate::epr::kernel_value;
use crate::fock::{PhasePoint, TwoModeState};
use crate::sampling::{stream_rng, GridCellSampler};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct DenseCodingChannel {
    pub kernel: Kernel,
    sampler: Option<GridCellSampler>,
}

impl DenseCodingChannel {
    pub fn new(kernel: Kernel) -> Result<Self> {
        let sampler = match &kernel {
            Kernel::GaussianClosed { .. } => None,
            Kernel::SampledGrid(s) => Some(GridCellSampler::new(s.clone())?),
        };
        Ok(Self { kernel, sampler })
    }

    pub fn gaussian(nbar: f64) -> Result<Self> {
        Self::new(gaussian_kernel(nbar)?)
    }

    /// Channel for an arbitrary resource, through its sampled kernel.
    pub fn from_resource(w: &TwoModeState, cfg: &ChannelConfig) -> Result<Self> {
        Self::new(kernel_from(w, cfg)?)
    }

    pub fn nbar(&self) -> Option<f64> {
        self.kernel.nbar()
    }

    /// `P(measured | encoded)` for the closed-form kernel.
    pub fn probability(&self, encoded: PhasePoint, measured: PhasePoint) -> Result<f64> {
        match self.kernel {
            Kernel::GaussianClosed { nbar } if nbar > 0.0 => {
                Ok(Kernel::gaussian_value(nbar, kernel_argument(encoded, measured)))
            }
            Kernel::GaussianClosed { .. } => Err(Error::DegenerateInput(
                "the n̄ = 0 channel is a delta function".into(),
            )),
            Kernel::SampledGrid(_) => Err(Error::Config(
                "pointwise values of a sampled kernel need the resource; use channel_matrix".into(),
            )),
        }
    }

    /// A kernel draw `(dx, dp)`, mapped to `measured = (x − dx, p + dp)`.
    fn transmit<R: rand::Rng + ?Sized>(&self, rng: &mut R, m: PhasePoint) -> PhasePoint {
        let err = match (&self.kernel, &self.sampler) {
            (Kernel::GaussianClosed { nbar }, _) if *nbar == 0.0 => PhasePoint::ORIGIN,
            (Kernel::GaussianClosed { nbar }, _) => {
                let n = Normal::new(0.0, nbar.sqrt()).expect("n̄ > 0");
                PhasePoint {
                    x: n.sample(rng),
                    p: n.sample(rng),
                }
            }
            (_, Some(s)) => s.draw(rng),
            (Kernel::SampledGrid(_), None) => unreachable!("sampler built with the channel"),
        };
        PhasePoint {
            x: m.x - err.x,
            p: m.p + err.p,
        }
    }
}

#[inline]
fn kernel_argument(encoded: PhasePoint, measured: PhasePoint) -> PhasePoint {
    PhasePoint {
        x: encoded.x - measured.x,
        p: measured.p - encoded.p,
    }
}

/// `P(x′, p′ | x, p) = 𝒫(x − x′, p′ − p)`, through [`kernel_value`].
pub fn channel_matrix(w: &TwoModeState, encoded: PhasePoint, measured: PhasePoint) -> Result<f64> {
    kernel_value(w, kernel_argument(encoded, measured))
}

/// Gaussian channel with `n̄ = 1 − (1 − e^{−2r}) T`.
pub fn noisy_dense_coding(r: f64, transmission: f64) -> Result<DenseCodingChannel> {
    DenseCodingChannel::gaussian(noisy_nbar(r, transmission)?)
}

/// Bob's outcome for each message. Message `k` uses its own stream of `seed`.
pub fn simulate_transmission(
    channel: &DenseCodingChannel,
    messages: &[PhasePoint],
    seed: u64,
) -> Vec<PhasePoint> {
    messages
        .par_iter()
        .enumerate()
        .map(|(k, m)| channel.transmit(&mut stream_rng(seed, k as u64), *m))
        .collect()
}

/// Messages with i.i.d. `N(0, signal_var)` quadratures, on stream `u64::MAX`
/// of `seed` so they never share randomness with transmission.
pub fn gaussian_messages(count: usize, signal_var: f64, seed: u64) -> Result<Vec<PhasePoint>> {
    if !(signal_var > 0.0) {
        return Err(Error::OutOfRange(format!("signal variance {signal_var} must be > 0")));
    }
    let n = Normal::new(0.0, signal_var.sqrt()).expect("variance > 0");
    let mut rng = stream_rng(seed, u64::MAX);
    Ok((0..count)
        .map(|_| PhasePoint {
            x: n.sample(&mut rng),
            p: n.sample(&mut rng),
        })
        .collect())
}

/// `log₂(1 + S/n̄)`: two quadratures, `½ log₂(1 + S/n̄)` bits each.
pub fn mutual_information_gaussian(signal_var: f64, nbar: f64) -> Result<f64> {
    if !(signal_var > 0.0) || !(nbar > 0.0) {
        return Err(Error::OutOfRange(format!(
            "signal variance {signal_var} and n̄ {nbar} must both be > 0"
        )));
    }
    Ok((1.0 + signal_var / nbar).log2())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiEstimator {
    /// Histogram plug-in with Freedman–Diaconis bins.
    #[default]
    PlugIn,
    /// Plug-in plus the Miller–Madow bias correction.
    MillerMadow,
}

/// Empirical mutual information in bits, summed over the x and p quadratures.
pub fn empirical_mutual_information(
    sent: &[PhasePoint],
    received: &[PhasePoint],
    estimator: MiEstimator,
) -> Result<f64> {
    if sent.len() != received.len() {
        return Err(Error::DimensionMismatch {
            expected: sent.len(),
            found: received.len(),
        });
    }
    if sent.len() < 4 {
        return Err(Error::DegenerateInput("need at least four samples".into()));
    }
    let xs: Vec<f64> = sent.iter().map(|p| p.x).collect();
    let xr: Vec<f64> = received.iter().map(|p| p.x).collect();
    let ps: Vec<f64> = sent.iter().map(|p| p.p).collect();
    let pr: Vec<f64> = received.iter().map(|p| p.p).collect();
    Ok(histogram_mi(&xs, &xr, estimator)? + histogram_mi(&ps, &pr, estimator)?)
}

struct Bins {
    lo: f64,
    width: f64,
    count: usize,
}

impl Bins {
    fn freedman_diaconis(data: &[f64]) -> Result<Self> {
        let mut sorted = data.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q = |f: f64| {
            let pos = f * (sorted.len() - 1) as f64;
            let i = pos.floor() as usize;
            let t = pos - i as f64;
            sorted[i] + t * (sorted[(i + 1).min(sorted.len() - 1)] - sorted[i])
        };
        let iqr = q(0.75) - q(0.25);
        let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
        let width = 2.0 * iqr / (data.len() as f64).cbrt();
        if !(width > 0.0) || !(hi > lo) {
            return Err(Error::DegenerateInput("sample has zero spread".into()));
        }
        let count = (((hi - lo) / width).ceil() as usize).max(1);
        Ok(Self { lo, width, count })
    }

    fn index(&self, v: f64) -> usize {
        (((v - self.lo) / self.width) as usize).min(self.count - 1)
    }
}

fn entropy_bits<'a>(counts: impl Iterator<Item = &'a usize>, total: f64, estimator: MiEstimator) -> f64 {
    let mut h = 0.0;
    let mut occupied = 0usize;
    for &c in counts.filter(|c| **c > 0) {
        let p = c as f64 / total;
        h -= p * p.ln();
        occupied += 1;
    }
    if estimator == MiEstimator::MillerMadow {
        h += (occupied as f64 - 1.0) / (2.0 * total);
    }
    h / std::f64::consts::LN_2
}

fn histogram_mi(a: &[f64], b: &[f64], estimator: MiEstimator) -> Result<f64> {
    let ba = Bins::freedman_diaconis(a)?;
    let bb = Bins::freedman_diaconis(b)?;
    let mut ca = vec![0usize; ba.count];
    let mut cb = vec![0usize; bb.count];
    let mut joint = std::collections::HashMap::<(usize, usize), usize>::new();
    for (u, v) in a.iter().zip(b) {
        let (i, j) = (ba.index(*u), bb.index(*v));
        ca[i] += 1;
        cb[j] += 1;
        *joint.entry((i, j)).or_default() += 1;
    }
    let n = a.len() as f64;
    Ok(entropy_bits(ca.iter(), n, estimator) + entropy_bits(cb.iter(), n, estimator)
        - entropy_bits(joint.values(), n, estimator))
}

/// Sample covariance of the decoding error `(x − x′, p′ − p)`.
pub fn error_covariance(sent: &[PhasePoint], received: &[PhasePoint]) -> [[f64; 2]; 2] {
    let n = sent.len() as f64;
    let errs: Vec<[f64; 2]> = sent
        .iter()
        .zip(received)
        .map(|(s, r)| [s.x - r.x, r.p - s.p])
        .collect();
    let mean = [0, 1].map(|k| errs.iter().map(|e| e[k]).sum::<f64>() / n);
    let mut cov = [[0.0; 2]; 2];
    for e in &errs {
        for a in 0..2 {
            for b in 0..2 {
                cov[a][b] += (e[a] - mean[a]) * (e[b] - mean[b]) / (n - 1.0);
            }
        }
    }
    cov
}

/// One point of a mutual-information sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiExperiment {
    pub r: f64,
    pub transmission: f64,
    pub signal_var: f64,
    pub samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub estimator: MiEstimator,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiRow {
    pub r: f64,
    #[serde(rename = "T")]
    pub transmission: f64,
    pub nbar: f64,
    pub signal_var: f64,
    #[serde(rename = "MI_closed_form")]
    pub mi_closed_form: f64,
    #[serde(rename = "MI_empirical")]
    pub mi_empirical: f64,
    pub samples: usize,
}

impl MiExperiment {
    pub fn run(&self) -> Result<MiRow> {
        let channel = noisy_dense_coding(self.r, self.transmission)?;
        let nbar = channel.nbar().expect("closed-form channel");
        let sent = gaussian_messages(self.samples, self.signal_var, self.seed)?;
        let received = simulate_transmission(&channel, &sent, self.seed);
        Ok(MiRow {
            r: self.r,
            transmission: self.transmission,
            nbar,
            signal_var: self.signal_var,
            mi_closed_form: mutual_information_gaussian(self.signal_var, nbar)?,
            mi_empirical: empirical_mutual_information(&sent, &received, self.estimator)?,
            samples: self.samples,
        })
    }
}

pub fn write_mi_csv<W: Write>(out: W, rows: &[MiRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
