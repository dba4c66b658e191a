//! The acceptance matrix: eight numbered checks with pinned tolerances,
//! shared by the `verify` command and the acceptance test target.

use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{apply_channel, fidelity_via_kernel, gaussian_kernel, kernel_from, noisy_nbar, ChannelConfig, Kernel};
use crate::dense_coding::{
    empirical_mutual_information, error_covariance, DenseCodingChannel, gaussian_messages, mutual_information_gaussian,
    noisy_dense_coding, simulate_transmission, MiEstimator,
};
use crate::epr::{epr_moments, epr_overlap, tmsv, EprVector};
use crate::fock::{fidelity, trace_distance, CMatrix, CVector, DensityMatrix, FockDim, Mode, PhasePoint, TwoModeState};
use crate::gaussian::{apply_gaussian_channel, gaussian_fidelity, GaussianState};
use crate::grid::{PhaseGrid, DEFAULT_RESOLUTION};
use crate::protocol::average_output;
use crate::sampling::stream_rng;
use crate::Result;

pub const TRACE_DISTANCE_TOLERANCE: f64 = 1e-3;
pub const KERNEL_POINTWISE_TOLERANCE: f64 = 1e-5;
pub const FIDELITY_TOLERANCE: f64 = 1e-3;
pub const COMPLETENESS_TOLERANCE: f64 = 1e-3;
pub const EPR_VARIANCE_TOLERANCE: f64 = 1e-6;
pub const COVARIANCE_RELATIVE_TOLERANCE: f64 = 0.05;
pub const MI_TOLERANCE_BITS: f64 = 0.1;
pub const TRACE_DEFICIT_BOUND: f64 = 1e-3;
pub const EIGENVALUE_FLOOR: f64 = -1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub n_max: usize,
    pub resolution: usize,
    pub seed: u64,
    pub transmissions: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            n_max: crate::fock::DEFAULT_N_MAX,
            resolution: DEFAULT_RESOLUTION,
            seed: 7,
            transmissions: 100_000,
        }
    }
}

impl VerifyConfig {
    fn dim(&self) -> Result<FockDim> {
        FockDim::new(self.n_max)
    }

    fn channel(&self, base: ChannelConfig) -> ChannelConfig {
        ChannelConfig {
            resolution: self.resolution,
            ..base
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Measurement {
    pub label: String,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckReport {
    pub id: u8,
    pub title: String,
    pub relations: Vec<String>,
    pub passed: bool,
    pub measurements: Vec<Measurement>,
    pub error: Option<String>,
    pub seconds: f64,
}

impl CheckReport {
    /// One line: id, verdict, title, and the worst measurement.
    pub fn summary_line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let detail = match (&self.error, self.worst()) {
            (Some(e), _) => format!("error: {e}"),
            (None, Some(m)) => format!("worst {} = {:.3e} (bound {:.1e})", m.label, m.value, m.bound),
            (None, None) => "no measurements".into(),
        };
        format!("criterion {} [{verdict}] {}: {detail} [{:.1}s]", self.id, self.title, self.seconds)
    }

    fn worst(&self) -> Option<&Measurement> {
        self.measurements
            .iter()
            .find(|m| !m.passed)
            .or_else(|| self.measurements.iter().max_by(|a, b| (a.value / a.bound).total_cmp(&(b.value / b.bound))))
    }
}

/// Collects measurements for one check.
#[derive(Default)]
struct Sheet(Vec<Measurement>);

impl Sheet {
    /// Passes when `value ≤ bound`.
    fn at_most(&mut self, label: impl Into<String>, value: f64, bound: f64) {
        self.0.push(Measurement {
            label: label.into(),
            value,
            bound,
            passed: value <= bound,
        });
    }

    /// Records a boolean property as `0` (holds) or `1` (violated) against bound `0`.
    fn holds(&mut self, label: impl Into<String>, ok: bool) {
        self.at_most(label, if ok { 0.0 } else { 1.0 }, 0.0);
    }
}

pub struct Check {
    pub id: u8,
    pub title: &'static str,
    pub relations: &'static [&'static str],
    run: fn(&VerifyConfig, &mut Sheet) -> Result<()>,
}

pub fn checks() -> Vec<Check> {
    vec![
        Check {
            id: 1,
            title: "protocol oracle equals the random-displacement channel",
            relations: &["protocol-average", "channel-map", "kernel-overlap"],
            run: check_equivalence,
        },
        Check {
            id: 2,
            title: "squeezed-resource kernel has the Gaussian closed form",
            relations: &["kernel-overlap", "tmsv-kernel-gaussian"],
            run: check_kernel_closed_form,
        },
        Check {
            id: 3,
            title: "Gaussian kernel thermalizes",
            relations: &["thermalizing-identity", "channel-map"],
            run: check_thermalizing,
        },
        Check {
            id: 4,
            title: "coherent-state fidelity law on four paths",
            relations: &["fidelity-kernel", "channel-map", "protocol-average", "gaussian-moments"],
            run: check_fidelity_law,
        },
        Check {
            id: 5,
            title: "noisy-resource substitution",
            relations: &["noisy-resource-nbar", "thermalizing-identity"],
            run: check_noisy_resource,
        },
        Check {
            id: 6,
            title: "measurement-operator invariants",
            relations: &["epr-reduced-trace", "epr-completeness", "epr-variances"],
            run: check_measurement_invariants,
        },
        Check {
            id: 7,
            title: "dense-coding statistics",
            relations: &["dense-coding-channel-matrix", "gaussian-mutual-information"],
            run: check_dense_coding,
        },
        Check {
            id: 8,
            title: "channel structure",
            relations: &["channel-map", "truncation-leakage"],
            run: check_structure,
        },
    ]
}

pub fn run_check(check: &Check, cfg: &VerifyConfig) -> CheckReport {
    let start = Instant::now();
    let mut sheet = Sheet::default();
    let result = (check.run)(cfg, &mut sheet);
    let error = result.err().map(|e| e.to_string());
    let passed = error.is_none() && !sheet.0.is_empty() && sheet.0.iter().all(|m| m.passed);
    CheckReport {
        id: check.id,
        title: check.title.to_string(),
        relations: check.relations.iter().map(|s| s.to_string()).collect(),
        passed,
        measurements: sheet.0,
        error,
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub fn run_all(cfg: &VerifyConfig) -> Vec<CheckReport> {
    checks().iter().map(|c| run_check(c, cfg)).collect()
}

fn acceptance_inputs(dim: FockDim) -> Result<Vec<(&'static str, DensityMatrix)>> {
    Ok(vec![
        ("vacuum", DensityMatrix::vacuum(dim)),
        ("fock:1", DensityMatrix::fock(1, dim)?),
        ("coherent:0.8", DensityMatrix::coherent(Complex64::new(0.8, 0.0), dim)?),
        ("cat:1.0", DensityMatrix::cat(Complex64::new(1.0, 0.0), 0.0, dim)?),
    ])
}

fn acceptance_resources(dim: FockDim) -> Result<Vec<(&'static str, TwoModeState)>> {
    let low = tmsv(0.3, dim)?;
    let high = tmsv(0.8, dim)?;
    let mixed = TwoModeState::mixture(&[(0.6, low.clone()), (0.4, high.clone())])?;
    Ok(vec![("tmsv:0.3", low), ("tmsv:0.8", high), ("mixture", mixed)])
}

fn check_equivalence(cfg: &VerifyConfig, sheet: &mut Sheet) -> Result<()> {
    let dim = cfg.dim()?;
    for (wn, w) in acceptance_resources(dim)? {
        for (rn, rho) in acceptance_inputs(dim)? {
            let cc = cfg.channel(ChannelConfig::for_resource(&w, &rho)?);
            let oracle = average_output(&rho, &w, &cc)?;
            let channel = apply_channel(&kernel_from(&w, &cc)?, &rho, &cc)?;
            let td = trace_distance(&oracle.state, &channel)?;
            sheet.at_most(format!("trace distance {rn} / {wn}"), td, TRACE_DISTANCE_TOLERANCE);
        }
    }
    Ok(())
}

fn check_kernel_closed_form(cfg: &VerifyConfig, sheet: &mut Sheet) -> Result<()> {
    let dim = cfg.dim()?;
    for r in [0.0f64, 0.5, 1.0] {
        let nbar = (-2.0 * r).exp();
        let cc = cfg.channel(ChannelConfig::for_states(nbar, 0.0, 0.0));
        let Kernel::SampledGrid(s) = kernel_from(&tmsv(r, dim)?, &cc)? else {
            unreachable!("kernel_from samples on a grid")
        };
        let worst = s
            .grid
            .points()
            .zip(&s.values)
            .map(|((pt, _), v)| (v - Kernel::gaussian_value(nbar, pt)).abs())
            .fold(0.0, f64::max);
        sheet.at_most(format!("max pointwise error r={r}"), worst, KERNEL_POINTWISE_TOLERANCE);
    }
    Ok(())
}

fn check_thermalizing(cfg: &VerifyConfig, sheet: &mut Sheet) -> Result<()> {
    let dim = cfg.dim()?;
    let alpha = Complex64::new(0.8, -0.3);
    for r in [0.3f64, 0.8] {
        let nbar = (-2.0 * r).exp();
        let thermal = DensityMatrix::thermal(nbar, dim)?;
        let displaced = thermal.displaced(PhasePoint::from_alpha(alpha));
        let w = tmsv(r, dim)?;
        for (name, rho, want) in [
            ("vacuum", DensityMatrix::vacuum(dim), &thermal),
            ("coherent", DensityMatrix::coherent(alpha, dim)?, &displaced),
        ] {
            let cc = cfg.channel(ChannelConfig::for_states(nbar, rho.mean_photon_number(), 0.0));
            let closed = apply_channel(&gaussian_kernel(nbar)?, &rho, &cc)?;
            sheet.at_most(format!("{name} r={r} closed kernel"), trace_distance(&closed, want)?, TRACE_DISTANCE_TOLERANCE);
            let sampled = apply_channel(&kernel_from(&w, &cc)?, &rho, &cc)?;
            sheet.at_most(format!("{name} r={r} resource kernel"), trace_distance(&sampled, want)?, TRACE_DISTANCE_TOLERANCE);
        }
    }
    Ok(())
}

fn check_fidelity_law(cfg: &VerifyConfig, sheet: &mut Sheet) -> Result<()> {
    let dim = cfg.dim()?;
    let alpha = Complex64::new(0.8, 0.0);
    let psi = DensityMatrix::coherent(alpha, dim)?;
    let g = GaussianState::coherent(alpha);
    for k in 0..=6 {
        let r = 0.25 * k as f64;
        let nbar = (-2.0 * r).exp();
        let want = 1.0 / (1.0 + nbar);
        let w = tmsv(r, dim)?;
        let cc = cfg.channel(ChannelConfig::for_resource(&w, &psi)?);
        let kernel = gaussian_kernel(nbar)?;
        let paths = [
            ("kernel quadrature", fidelity_via_kernel(&kernel, &psi, &cc)?),
            ("channel output", fidelity(&psi, &apply_channel(&kernel, &psi, &cc)?)?),
            ("oracle output", fidelity(&psi, &average_output(&psi, &w, &cc)?.state)?),
            ("Gaussian closed form", gaussian_fidelity(&g, &apply_gaussian_channel(&g, nbar)?)?),
        ];
        for (name, f) in &paths {
            sheet.at_most(format!("|F − 1/(1+n̄)| {name} r={r}"), (f - want).abs(), FIDELITY_TOLERANCE);
        }
        let spread = paths.iter().map(|p| p.1).fold(f64::MIN, f64::max) - paths.iter().map(|p| p.1).fold(f64::MAX, f64::min);
        sheet.at_most(format!("path spread r={r}"), spread, FIDELITY_TOLERANCE);
    }
    Ok(())
}

fn check_noisy_resource(cfg: &VerifyConfig, sheet: &mut Sheet) -> Result<()> {
    let dim = cfg.dim()?;
    let (r, t) = (0.35, 0.7);
    let nbar = noisy_nbar(r, t)?;
    let want = DensityMatrix::thermal(nbar, dim)?;
    let vac = DensityMatrix::vacuum(dim);
    let cc = cfg.channel(ChannelConfig::for_states(nbar, 0.0, 0.0));
    let out = apply_channel(&gaussian_kernel(nbar)?, &vac, &cc)?;
    sheet.at_most("channel route trace distance", trace_distance(&out, &want)?, TRACE_DISTANCE_TOLERANCE);
    let effective = tmsv(-0.5 * nbar.ln(), dim)?;
    let oracle = average_output(&vac, &effective, &cc)?;
    sheet.at_most("oracle route trace distance", trace_distance(&oracle.state, &want)?, TRACE_DISTANCE_TOLERANCE);
    Ok(())
}

/// Random pure two-mode state supported on the lowest `levels` of each mode.
fn random_two_mode(dim: FockDim, levels: usize, rng: &mut impl Rng) -> Result<TwoModeState> {
    let n = dim.get();
    let mut m = CMatrix::zeros(n, n);
    for a in 0..levels {
        for b in 0..levels {
            m[(a, b)] = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        }
    }
    let norm = m.norm();
    TwoModeState::from_amplitudes(dim, m.unscale(norm))
}

fn check_measurement_invariants(cfg: &VerifyConfig, sheet: &mut Sheet) -> Result<()> {
    let dim = cfg.dim()?;
    let red = EprVector::new(dim).reduced(Mode::B);
    let flat = CMatrix::identity(dim.get(), dim.get()) * Complex64::new(1.0 / (2.0 * std::f64::consts::PI), 0.0);
    sheet.holds("reduced operator equals identity/2π exactly", red == flat);

    let levels = 4;
    let grid = PhaseGrid::with_default_rule(1.0, 2.0 * levels as f64, 0.0);
    for k in 0..5 {
        let mut rng = stream_rng(cfg.seed, 1000 + k);
        let psi = random_two_mode(dim, levels, &mut rng)?;
        let total = grid.integrate(|pt| epr_overlap(&psi, pt).map(|z| z.norm_sqr()).unwrap_or(f64::NAN));
        sheet.at_most(format!("completeness |∫|⟨Φ|ψ⟩|² − 1| state {k}"), (total - 1.0).abs(), COMPLETENESS_TOLERANCE);
    }

    for r in [0.0f64, 0.5, 1.0] {
        let m = epr_moments(&tmsv(r, dim)?)?;
        let want = (-2.0 * r).exp();
        sheet.at_most(format!("Var(x_A − x_B) r={r}"), (m.var_x_diff() - want).abs(), EPR_VARIANCE_TOLERANCE);
        sheet.at_most(format!("Var(p_A + p_B) r={r}"), (m.var_p_sum() - want).abs(), EPR_VARIANCE_TOLERANCE);
    }
    Ok(())
}

fn check_dense_coding(cfg: &VerifyConfig, sheet: &mut Sheet) -> Result<()> {
    let samples = cfg.transmissions;
    let signal_var = 2.0;

    let r: f64 = 0.5;
    let nbar = (-2.0 * r).exp();
    let channel = noisy_dense_coding(r, 1.0)?;
    let sent = gaussian_messages(samples, signal_var, cfg.seed)?;
    let cov = error_covariance(&sent, &simulate_transmission(&channel, &sent, cfg.seed));
    sheet.at_most("error covariance xx relative deviation", (cov[0][0] / nbar - 1.0).abs(), COVARIANCE_RELATIVE_TOLERANCE);
    sheet.at_most("error covariance pp relative deviation", (cov[1][1] / nbar - 1.0).abs(), COVARIANCE_RELATIVE_TOLERANCE);
    sheet.at_most("error covariance xp relative to n̄", cov[0][1].abs() / nbar, COVARIANCE_RELATIVE_TOLERANCE);

    let mi_nbar = 0.5;
    let channel = DenseCodingChannel::gaussian(mi_nbar)?;
    let received = simulate_transmission(&channel, &sent, cfg.seed);
    let empirical = empirical_mutual_information(&sent, &received, MiEstimator::PlugIn)?;
    let closed = mutual_information_gaussian(signal_var, mi_nbar)?;
    sheet.at_most("|MI plug-in − closed form| bits", (empirical - closed).abs(), MI_TOLERANCE_BITS);

    let mut last = f64::NEG_INFINITY;
    let mut increasing = true;
    for k in 0..=4 {
        let r = 0.25 * k as f64;
        let received = simulate_transmission(&noisy_dense_coding(r, 1.0)?, &sent, cfg.seed);
        let mi = empirical_mutual_information(&sent, &received, MiEstimator::PlugIn)?;
        increasing &= mi > last;
        last = mi;
    }
    sheet.holds("empirical MI strictly increasing in r", increasing);
    Ok(())
}

/// Random mixed state: three random kets on the lowest eight levels.
fn random_mixed(dim: FockDim, rng: &mut impl Rng) -> Result<DensityMatrix> {
    let n = dim.get();
    let mut m = CMatrix::zeros(n, n);
    let weights: Vec<f64> = (0..3).map(|_| rng.random::<f64>() + 0.1).collect();
    let total: f64 = weights.iter().sum();
    for w in weights {
        let mut v = CVector::zeros(n);
        for k in 0..8.min(n) {
            v[k] = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        }
        let v = v.unscale(v.norm());
        m += &v * v.adjoint() * Complex64::new(w / total, 0.0);
    }
    DensityMatrix::from_matrix(dim, m)
}

fn check_structure(cfg: &VerifyConfig, sheet: &mut Sheet) -> Result<()> {
    let dim = cfg.dim()?;
    let mut worst_deficit = 0.0f64;
    for (_, w) in acceptance_resources(dim)? {
        for (_, rho) in acceptance_inputs(dim)? {
            let cc = cfg.channel(ChannelConfig::for_resource(&w, &rho)?);
            let out = apply_channel(&kernel_from(&w, &cc)?, &rho, &cc)?;
            worst_deficit = worst_deficit.max(out.trace_deficit().abs());
        }
    }
    sheet.at_most("max |trace deficit| over the equivalence matrix", worst_deficit, TRACE_DEFICIT_BOUND);

    let mut floor = f64::INFINITY;
    for k in 0..20 {
        let mut rng = stream_rng(cfg.seed, 2000 + k);
        let rho = random_mixed(dim, &mut rng)?;
        let nbar = 0.1 + 0.9 * rng.random::<f64>();
        let cc = cfg.channel(ChannelConfig::for_states(nbar, rho.mean_photon_number(), 0.0));
        let out = apply_channel(&gaussian_kernel(nbar)?, &rho, &cc)?;
        floor = floor.min(out.min_eigenvalue());
    }
    sheet.at_most("−(min output eigenvalue) over 20 random inputs", -floor, -EIGENVALUE_FLOOR);

    let rho = random_mixed(dim, &mut stream_rng(cfg.seed, 3000))?;
    let same = apply_channel(&gaussian_kernel(0.0)?, &rho, &cfg.channel(ChannelConfig::default()))?;
    sheet.holds("n̄ = 0 output is bitwise the input", same.matrix() == rho.matrix());
    Ok(())
}
