//! Command-line front end: `kernel`, `teleport`, `fidelity-sweep`,
//! `densecode`, `verify`.
//!
//! Every command writes its results under `--out-dir` together with a JSON
//! manifest that echoes the resolved configuration and the defaults table.
//! `--config file.json` supplies values that take precedence over flags.
//! Exit codes: 0 success, 1 acceptance or numerical failure, 2 configuration
//! error.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::channel::{
    apply_channel, fidelity_via_kernel, gaussian_kernel, kernel_from, noisy_nbar, ChannelConfig, Kernel,
    DEFAULT_LEAKAGE_BOUND, KERNEL_NORMALIZATION_TOLERANCE,
};
use crate::dense_coding::{
    error_covariance, gaussian_messages, noisy_dense_coding, simulate_transmission, write_mi_csv, MiEstimator,
    MiExperiment,
};
use crate::epr::{epr_moments, tmsv};
use crate::fock::{fidelity, trace_distance, DensityMatrix, FockDim, MatrixJson, PhasePoint, TwoModeJson, TwoModeState};
use crate::gaussian::{apply_gaussian_channel, fock_to_gaussian_moments, gaussian_fidelity, GaussianState};
use crate::grid::{PhaseGrid, DEFAULT_RESOLUTION, REFINE_TOLERANCE};
use crate::protocol::{average_output, write_outcome_csv, DENSITY_NORMALIZATION_TOLERANCE};
use crate::sampling::{ENVELOPE_INFLATION, ENVELOPE_WIDENING};
use crate::verify::{self, VerifyConfig};
use crate::{Error, Result};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "CVTELE_THREADS";
pub const DEFAULTS_VERSION: &str = "1";
pub const DEFAULT_OUT_DIR: &str = "cvtele-out";

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "cvtele", version, about = "Teleportation and dense coding as random-displacement channels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the outcome kernel of a resource on a grid.
    Kernel {
        #[command(flatten)]
        args: KernelArgs,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Teleport an input state; compare the protocol oracle with the channel.
    Teleport {
        #[command(flatten)]
        args: TeleportArgs,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Teleportation fidelity as a function of squeezing.
    FidelitySweep {
        #[command(flatten)]
        args: SweepArgs,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Dense-coding channel slices, simulation, and mutual information.
    Densecode {
        #[command(flatten)]
        args: DenseArgs,
        #[command(flatten)]
        io: IoArgs,
    },
    /// Run the acceptance matrix.
    Verify {
        #[command(flatten)]
        args: VerifyArgs,
        #[command(flatten)]
        io: IoArgs,
    },
}

/// Paths that are not part of the resolved configuration.
#[derive(Debug, Clone, Args)]
pub struct IoArgs {
    /// JSON file whose keys override the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = DEFAULT_OUT_DIR)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GridOpts {
    #[arg(long, default_value_t = crate::fock::DEFAULT_N_MAX)]
    pub n_max: usize,
    /// Half-width of the square phase-space grid; default from the extent rule.
    #[arg(long)]
    pub extent: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    pub resolution: usize,
}

impl GridOpts {
    fn dim(&self) -> Result<FockDim> {
        FockDim::new(self.n_max).map_err(|e| Error::Config(e.to_string()))
    }

    fn apply(&self, base: ChannelConfig) -> ChannelConfig {
        ChannelConfig {
            extent: self.extent.unwrap_or(base.extent),
            resolution: self.resolution,
            ..base
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct KernelArgs {
    /// Squeezing of a two-mode squeezed resource.
    #[arg(long, conflicts_with = "state")]
    pub r: Option<f64>,
    /// Transmission of the lossy channel the resource passed through.
    #[arg(long = "T", default_value_t = 1.0)]
    #[serde(alias = "T")]
    pub transmission: f64,
    /// Two-mode state JSON file.
    #[arg(long)]
    pub state: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridOpts,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TeleportArgs {
    #[arg(long, conflicts_with_all = ["state", "nbar"])]
    pub r: Option<f64>,
    #[arg(long = "T", default_value_t = 1.0)]
    #[serde(alias = "T")]
    pub transmission: f64,
    /// Use the Gaussian kernel with this n̄ directly (no resource state).
    #[arg(long, conflicts_with = "state")]
    pub nbar: Option<f64>,
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// vacuum | fock:N | coherent:RE[,IM] | cat:RE[,IM[,PHASE]] | thermal:NBAR | file:PATH
    #[arg(long, default_value = "vacuum")]
    pub input: String,
    /// Renormalize channel outputs to unit trace.
    #[arg(long)]
    pub renormalize: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridOpts,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(long, default_value = "coherent:0.8")]
    pub input: String,
    #[arg(long, default_value_t = 0.0)]
    pub r_min: f64,
    #[arg(long, default_value_t = 1.5)]
    pub r_max: f64,
    #[arg(long, default_value_t = 0.25)]
    pub r_step: f64,
    #[arg(long = "T", default_value_t = 1.0)]
    #[serde(alias = "T")]
    pub transmission: f64,
    /// Skip the protocol-oracle column.
    #[arg(long)]
    pub no_oracle: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridOpts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorArg {
    PlugIn,
    MillerMadow,
}

impl From<EstimatorArg> for MiEstimator {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::PlugIn => MiEstimator::PlugIn,
            EstimatorArg::MillerMadow => MiEstimator::MillerMadow,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DenseArgs {
    /// One or more squeezing values, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1.0")]
    pub r: Vec<f64>,
    #[arg(long = "T", default_value_t = 1.0)]
    #[serde(alias = "T")]
    pub transmission: f64,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    /// Master seed; required.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 2.0)]
    pub signal_var: f64,
    #[arg(long, value_enum, default_value_t = EstimatorArg::PlugIn)]
    pub estimator: EstimatorArg,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct VerifyArgs {
    /// Print the check matrix without running it.
    #[arg(long)]
    pub list: bool,
    #[arg(long, default_value_t = crate::fock::DEFAULT_N_MAX)]
    pub n_max: usize,
    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    pub resolution: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 100_000)]
    pub transmissions: usize,
    /// Run only these criteria (comma separated ids).
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<u8>,
}

/// All defaults in one place; echoed into every manifest.
#[derive(Debug, Clone, Serialize)]
pub struct DefaultsTable {
    pub version: &'static str,
    pub n_max: usize,
    pub resolution: usize,
    pub extent_rule: &'static str,
    pub refine_tolerance: f64,
    pub kernel_normalization_tolerance: f64,
    pub density_normalization_tolerance: f64,
    pub leakage_bound: f64,
    pub envelope_inflation: f64,
    pub envelope_widening: f64,
    pub trace_distance_tolerance: f64,
    pub kernel_pointwise_tolerance: f64,
    pub fidelity_tolerance: f64,
    pub epr_variance_tolerance: f64,
    pub covariance_relative_tolerance: f64,
    pub mi_tolerance_bits: f64,
    pub eigenvalue_floor: f64,
}

pub fn defaults_table() -> DefaultsTable {
    DefaultsTable {
        version: DEFAULTS_VERSION,
        n_max: crate::fock::DEFAULT_N_MAX,
        resolution: DEFAULT_RESOLUTION,
        extent_rule: "5*sqrt(max(nbar,1) + <n> + 1) + |kernel offset|",
        refine_tolerance: REFINE_TOLERANCE,
        kernel_normalization_tolerance: KERNEL_NORMALIZATION_TOLERANCE,
        density_normalization_tolerance: DENSITY_NORMALIZATION_TOLERANCE,
        leakage_bound: DEFAULT_LEAKAGE_BOUND,
        envelope_inflation: ENVELOPE_INFLATION,
        envelope_widening: ENVELOPE_WIDENING,
        trace_distance_tolerance: verify::TRACE_DISTANCE_TOLERANCE,
        kernel_pointwise_tolerance: verify::KERNEL_POINTWISE_TOLERANCE,
        fidelity_tolerance: verify::FIDELITY_TOLERANCE,
        epr_variance_tolerance: verify::EPR_VARIANCE_TOLERANCE,
        covariance_relative_tolerance: verify::COVARIANCE_RELATIVE_TOLERANCE,
        mi_tolerance_bits: verify::MI_TOLERANCE_BITS,
        eigenvalue_floor: verify::EIGENVALUE_FLOOR,
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub defaults: DefaultsTable,
    pub config: Value,
    pub relations: Vec<&'static str>,
    pub grid: Option<PhaseGrid>,
    pub leakage: Value,
    pub threads: usize,
    pub wall_clock_seconds: f64,
    pub results: Value,
}

/// Outcome of a command: results for the manifest, plus whether any
/// acceptance check inside it failed.
struct Outcome {
    relations: Vec<&'static str>,
    grid: Option<PhaseGrid>,
    leakage: Value,
    results: Value,
    passed: bool,
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Io(_)
        | Error::Json(_)
        | Error::Csv(_)
        | Error::InvalidDimension(_)
        | Error::DimensionMismatch { .. }
        | Error::OutOfRange(_) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

/// Sets up logging and the thread pool, parses `args`, runs the command, and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    match dispatch(cli.command) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV}={raw:?} is not a positive integer")))?;
    // A pool that already exists (tests, repeated calls) is kept.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Serializes `flags`, overlays the keys of the JSON config file, and
/// deserializes the result. Unknown keys are rejected.
pub fn resolve<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&Path>) -> Result<T> {
    let mut base = serde_json::to_value(flags)?;
    if let Some(path) = config {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let over: Value = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let (Value::Object(b), Value::Object(o)) = (&mut base, over) else {
            return Err(Error::Config("config file must hold a JSON object".into()));
        };
        for (k, v) in o {
            let key = if k == "T" { "transmission".to_string() } else { k };
            if !b.contains_key(&key) {
                return Err(Error::Config(format!("unknown config key {key:?}")));
            }
            b.insert(key, v);
        }
    }
    serde_json::from_value(base).map_err(|e| Error::Config(e.to_string()))
}

fn dispatch(command: Command) -> Result<bool> {
    match command {
        Command::Kernel { args, io } => execute("kernel", (args, io), cmd_kernel),
        Command::Teleport { args, io } => execute("teleport", (args, io), cmd_teleport),
        Command::FidelitySweep { args, io } => execute("fidelity-sweep", (args, io), cmd_fidelity_sweep),
        Command::Densecode { args, io } => execute("densecode", (args, io), cmd_densecode),
        Command::Verify { args, io } => cmd_verify((args, io)),
    }
}

/// Wraps a command with config resolution, timing, and the manifest.
fn execute<T>(name: &'static str, flags: (T, IoArgs), body: fn(&T, &Path) -> Result<Outcome>) -> Result<bool>
where
    T: Serialize + DeserializeOwned,
{
    let (flags, io) = flags;
    let cfg = resolve(&flags, io.config.as_deref())?;
    fs::create_dir_all(&io.out_dir)?;
    let start = Instant::now();
    let outcome = body(&cfg, &io.out_dir)?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: name,
        defaults: defaults_table(),
        config: serde_json::to_value(&cfg)?,
        relations: outcome.relations,
        grid: outcome.grid,
        leakage: outcome.leakage,
        threads: rayon::current_num_threads(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        results: outcome.results,
    };
    let path = io.out_dir.join(format!("{name}.manifest.json"));
    serde_json::to_writer_pretty(BufWriter::new(File::create(&path)?), &manifest)?;
    println!("{name}: wrote {}", path.display());
    Ok(outcome.passed)
}

/// Parses an input-state spec.
pub fn parse_input(spec: &str, dim: FockDim) -> Result<DensityMatrix> {
    let bad = || Error::Config(format!("cannot parse input {spec:?}"));
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let nums = || -> Result<Vec<f64>> {
        rest.split(',')
            .filter(|s| !s.is_empty())
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
            .collect()
    };
    let complex = |v: &[f64]| Complex64::new(v[0], v.get(1).copied().unwrap_or(0.0));
    match kind {
        "vacuum" => Ok(DensityMatrix::vacuum(dim)),
        "fock" => {
            let n: usize = rest.trim().parse().map_err(|_| bad())?;
            DensityMatrix::fock(n, dim)
        }
        "coherent" => {
            let v = nums()?;
            if v.is_empty() || v.len() > 2 {
                return Err(bad());
            }
            DensityMatrix::coherent(complex(&v), dim)
        }
        "cat" => {
            let v = nums()?;
            if v.is_empty() || v.len() > 3 {
                return Err(bad());
            }
            DensityMatrix::cat(complex(&v), v.get(2).copied().unwrap_or(0.0), dim)
        }
        "thermal" => {
            let v = nums()?;
            if v.len() != 1 {
                return Err(bad());
            }
            DensityMatrix::thermal(v[0], dim)
        }
        "file" => {
            let json: MatrixJson = serde_json::from_str(&fs::read_to_string(rest)?)?;
            let rho = DensityMatrix::from_json(&json)?;
            dim.check(rho.dim().get())?;
            Ok(rho)
        }
        _ => Err(bad()),
    }
}

fn read_two_mode(path: &Path, dim: FockDim) -> Result<TwoModeState> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let json: TwoModeJson = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let w = TwoModeState::from_json(&json)?;
    dim.check(w.dim().get())?;
    Ok(w)
}

/// Resource selected by `--r [--T]` or `--state`. A lossy squeezed resource
/// is represented by the pure squeezed state with the same kernel variance.
fn resource(r: Option<f64>, transmission: f64, state: Option<&Path>, dim: FockDim) -> Result<(TwoModeState, Option<f64>)> {
    match (r, state) {
        (Some(r), None) => {
            let nbar = noisy_nbar(r, transmission)?;
            Ok((tmsv(-0.5 * nbar.ln(), dim)?, Some(nbar)))
        }
        (None, Some(p)) => Ok((read_two_mode(p, dim)?, None)),
        _ => Err(Error::Config("give exactly one of --r or --state".into())),
    }
}

fn create_csv(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn cmd_kernel(a: &KernelArgs, out: &Path) -> Result<Outcome> {
    let dim = a.grid.dim()?;
    let (w, closed_nbar) = resource(a.r, a.transmission, a.state.as_deref(), dim)?;
    let m = epr_moments(&w)?;
    let nbar = m.second_x_diff.max(m.second_p_sum);
    let offset = m.mean_x_diff.abs().max(m.mean_p_sum.abs());
    let cfg = a.grid.apply(ChannelConfig::for_states(nbar, 0.0, offset));
    let Kernel::SampledGrid(samples) = kernel_from(&w, &cfg)? else {
        unreachable!("kernel_from samples on a grid")
    };
    let closed: Option<Vec<f64>> =
        closed_nbar.map(|n| samples.grid.points().map(|(pt, _)| Kernel::gaussian_value(n, pt)).collect());
    let extra: Vec<(&str, &[f64])> = closed.iter().map(|c| ("closed_form", c.as_slice())).collect();
    samples.write_csv(create_csv(out, "kernel.csv")?, "P", &extra)?;
    let max_abs_error = closed.as_ref().map(|c| {
        samples
            .values
            .iter()
            .zip(c)
            .map(|(s, c)| (s - c).abs())
            .fold(0.0, f64::max)
    });
    let peak = samples.values.iter().copied().fold(0.0, f64::max);
    println!(
        "kernel: normalization {:.6}, peak {:.6}{}",
        samples.integral(),
        peak,
        max_abs_error.map(|e| format!(", max |sampled − closed form| {e:.3e}")).unwrap_or_default()
    );
    Ok(Outcome {
        relations: vec!["kernel-overlap", "tmsv-kernel-gaussian"],
        grid: Some(samples.grid),
        leakage: json!({ "resource": w.leakage() }),
        results: json!({
            "normalization": samples.integral(),
            "peak": peak,
            "nbar_closed_form": closed_nbar,
            "max_abs_error": max_abs_error,
            "epr_variances": [m.var_x_diff(), m.var_p_sum()],
            "csv": "kernel.csv",
        }),
        passed: true,
    })
}

fn gaussian_json(g: &GaussianState) -> Value {
    json!({ "mean": g.mean, "cov": g.cov })
}

fn cmd_teleport(a: &TeleportArgs, out: &Path) -> Result<Outcome> {
    let dim = a.grid.dim()?;
    let rho = parse_input(&a.input, dim)?;
    let pure = rho.ket().is_some() || rho.purity() > 1.0 - 1e-8;
    let mut results = serde_json::Map::new();
    let (cfg, nbar, out_state, relations) = if let Some(nbar) = a.nbar {
        let cfg = ChannelConfig {
            renormalize: a.renormalize,
            ..a.grid.apply(ChannelConfig::for_states(nbar, rho.mean_photon_number(), 0.0))
        };
        let k = gaussian_kernel(nbar)?;
        let state = apply_channel(&k, &rho, &cfg)?;
        if pure {
            results.insert("fidelity_kernel".into(), json!(fidelity_via_kernel(&k, &rho, &cfg)?));
        }
        (cfg, Some(nbar), state, vec!["channel-map", "thermalizing-identity", "fidelity-kernel"])
    } else {
        let (w, nbar) = resource(a.r, a.transmission, a.state.as_deref(), dim)?;
        let cfg = ChannelConfig {
            renormalize: a.renormalize,
            ..a.grid.apply(ChannelConfig::for_resource(&w, &rho)?)
        };
        let oracle = average_output(&rho, &w, &cfg)?;
        let channel = apply_channel(&kernel_from(&w, &cfg)?, &rho, &cfg)?;
        let td = trace_distance(&oracle.state, &channel)?;
        println!("teleport: trace distance oracle vs channel {td:.3e}");
        results.insert("trace_distance_oracle_channel".into(), json!(td));
        results.insert("oracle_density_integral".into(), json!(oracle.density_integral));
        results.insert("oracle_trace_deficit".into(), json!(oracle.state.trace_deficit()));
        if pure {
            results.insert("fidelity_oracle".into(), json!(fidelity(&rho, &oracle.state)?));
        }
        write_outcome_csv(create_csv(out, "teleport_outcomes.csv")?, &rho, &w, &cfg)?;
        results.insert("outcomes_csv".into(), json!("teleport_outcomes.csv"));
        results.insert("resource_leakage".into(), json!(w.leakage()));
        (cfg, nbar, channel, vec!["protocol-average", "channel-map", "kernel-overlap"])
    };
    if pure {
        let f = fidelity(&rho, &out_state)?;
        println!("teleport: fidelity {f:.6}");
        results.insert("fidelity_channel".into(), json!(f));
    }
    if let Some(n) = nbar {
        results.insert("nbar".into(), json!(n));
        let input_moments = fock_to_gaussian_moments(&rho);
        results.insert(
            "gaussian_prediction".into(),
            gaussian_json(&apply_gaussian_channel(&GaussianState { ..input_moments }, n).unwrap_or(input_moments)),
        );
        if a.input == "vacuum" {
            let td = trace_distance(&out_state, &DensityMatrix::thermal(n, dim)?)?;
            println!("teleport: trace distance to thermal(n̄ = {n:.6}) {td:.3e}");
            results.insert("trace_distance_to_thermal".into(), json!(td));
        }
    }
    results.insert("output_trace_deficit".into(), json!(out_state.trace_deficit()));
    results.insert("output_moments".into(), gaussian_json(&fock_to_gaussian_moments(&out_state)));
    serde_json::to_writer(create_csv(out, "teleport_output.json")?, &out_state.to_json())?;
    results.insert("output_state".into(), json!("teleport_output.json"));
    Ok(Outcome {
        relations,
        grid: Some(cfg.grid()?),
        leakage: json!({ "input": rho.leakage(), "output_trace_deficit": out_state.trace_deficit() }),
        results: Value::Object(results),
        passed: true,
    })
}

#[derive(Debug, Serialize)]
struct SweepRow {
    r: f64,
    nbar: f64,
    fidelity_kernel: f64,
    fidelity_channel: f64,
    fidelity_oracle: Option<f64>,
    fidelity_gaussian: Option<f64>,
    analytic: Option<f64>,
}

fn coherent_amplitude(spec: &str) -> Option<Complex64> {
    let rest = spec.strip_prefix("coherent:")?;
    let v: Vec<f64> = rest.split(',').map(|s| s.trim().parse().ok()).collect::<Option<_>>()?;
    Some(Complex64::new(v[0], v.get(1).copied().unwrap_or(0.0)))
}

fn cmd_fidelity_sweep(a: &SweepArgs, out: &Path) -> Result<Outcome> {
    if !(a.r_step > 0.0) || a.r_min < 0.0 || a.r_max < a.r_min {
        return Err(Error::Config("need 0 ≤ r_min ≤ r_max and r_step > 0".into()));
    }
    let dim = a.grid.dim()?;
    let psi = parse_input(&a.input, dim)?;
    let alpha = coherent_amplitude(&a.input);
    let steps = ((a.r_max - a.r_min) / a.r_step + 1e-9).floor() as usize;
    let mut rows = Vec::with_capacity(steps + 1);
    let mut grids = Vec::new();
    for k in 0..=steps {
        let r = a.r_min + k as f64 * a.r_step;
        let nbar = noisy_nbar(r, a.transmission)?;
        let w = tmsv(-0.5 * nbar.ln(), dim)?;
        let cfg = a.grid.apply(ChannelConfig::for_resource(&w, &psi)?);
        grids.push(cfg.grid()?);
        let kernel = gaussian_kernel(nbar)?;
        let fidelity_oracle = if a.no_oracle {
            None
        } else {
            Some(fidelity(&psi, &average_output(&psi, &w, &cfg)?.state)?)
        };
        let fidelity_gaussian = match alpha {
            Some(al) => {
                let g = GaussianState::coherent(al);
                Some(gaussian_fidelity(&g, &apply_gaussian_channel(&g, nbar)?)?)
            }
            None => None,
        };
        rows.push(SweepRow {
            r,
            nbar,
            fidelity_kernel: fidelity_via_kernel(&kernel, &psi, &cfg)?,
            fidelity_channel: fidelity(&psi, &apply_channel(&kernel, &psi, &cfg)?)?,
            fidelity_oracle,
            fidelity_gaussian,
            analytic: alpha.map(|_| 1.0 / (1.0 + nbar)),
        });
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(create_csv(out, "fidelity_sweep.csv")?);
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    let max_dev = rows
        .iter()
        .filter_map(|r| r.analytic.map(|an| (r.fidelity_kernel - an).abs().max((r.fidelity_channel - an).abs())))
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
    let monotone = rows.windows(2).all(|p| p[1].fidelity_kernel >= p[0].fidelity_kernel);
    for row in &rows {
        println!("r = {:.3}  F = {:.6}", row.r, row.fidelity_kernel);
    }
    Ok(Outcome {
        relations: vec!["fidelity-kernel", "channel-map", "protocol-average", "gaussian-moments"],
        grid: grids.last().copied(),
        leakage: json!({ "input": psi.leakage() }),
        results: json!({
            "points": rows.len(),
            "max_deviation_from_analytic": max_dev,
            "monotone_in_r": monotone,
            "csv": "fidelity_sweep.csv",
        }),
        passed: true,
    })
}

fn cmd_densecode(a: &DenseArgs, out: &Path) -> Result<Outcome> {
    let seed = a
        .seed
        .ok_or_else(|| Error::Config("densecode needs an explicit --seed".into()))?;
    if a.r.is_empty() {
        return Err(Error::Config("need at least one --r value".into()));
    }
    let mut rows = Vec::new();
    let mut covariances = Vec::new();
    let mut slice = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(create_csv(out, "densecode_slices.csv")?);
    slice.write_record(["r", "x_measured", "p_measured", "P"])?;
    for &r in &a.r {
        let exp = MiExperiment {
            r,
            transmission: a.transmission,
            signal_var: a.signal_var,
            samples: a.samples,
            seed,
            estimator: a.estimator.into(),
        };
        let row = exp.run()?;
        let channel = noisy_dense_coding(r, a.transmission)?;
        let sent = gaussian_messages(a.samples, a.signal_var, seed)?;
        covariances.push(error_covariance(&sent, &simulate_transmission(&channel, &sent, seed)));
        if row.nbar > 0.0 {
            let grid = PhaseGrid::with_default_rule(row.nbar, 0.0, 0.0);
            for i in 0..grid.resolution {
                let c = grid.coord(i);
                for m in [PhasePoint { x: c, p: 0.0 }, PhasePoint { x: 0.0, p: c }] {
                    let v = channel.probability(PhasePoint::ORIGIN, m)?;
                    slice.write_record([r.to_string(), m.x.to_string(), m.p.to_string(), v.to_string()])?;
                }
            }
        }
        println!(
            "densecode: r = {r:.3}, n̄ = {:.6}, MI closed form {:.4} bits, empirical {:.4} bits",
            row.nbar, row.mi_closed_form, row.mi_empirical
        );
        rows.push(row);
    }
    slice.flush()?;
    write_mi_csv(create_csv(out, "densecode.csv")?, &rows)?;
    let max_gap = rows
        .iter()
        .map(|r| (r.mi_empirical - r.mi_closed_form).abs())
        .fold(0.0, f64::max);
    Ok(Outcome {
        relations: vec!["dense-coding-channel-matrix", "noisy-resource-nbar", "gaussian-mutual-information"],
        grid: None,
        leakage: json!(null),
        results: json!({
            "rows": rows,
            "error_covariances": covariances,
            "max_mi_gap_bits": max_gap,
            "csv": "densecode.csv",
            "slices_csv": "densecode_slices.csv",
        }),
        passed: true,
    })
}

fn cmd_verify(flags: (VerifyArgs, IoArgs)) -> Result<bool> {
    let (flags, io) = flags;
    let a = resolve(&flags, io.config.as_deref())?;
    let all = verify::checks();
    if a.list {
        for c in &all {
            println!("criterion {}: {} [{}]", c.id, c.title, c.relations.join(", "));
        }
        return Ok(true);
    }
    if let Some(bad) = a.only.iter().find(|id| !all.iter().any(|c| c.id == **id)) {
        return Err(Error::Config(format!("no criterion {bad}")));
    }
    let cfg = VerifyConfig {
        n_max: a.n_max,
        resolution: a.resolution,
        seed: a.seed,
        transmissions: a.transmissions,
    };
    FockDim::new(cfg.n_max).map_err(|e| Error::Config(e.to_string()))?;
    if cfg.resolution < crate::channel::MIN_RESOLUTION || cfg.resolution % 2 == 0 {
        return Err(Error::Config(format!("resolution {} must be odd and ≥ 41", cfg.resolution)));
    }
    let start = Instant::now();
    let mut reports = Vec::new();
    for c in all.iter().filter(|c| a.only.is_empty() || a.only.contains(&c.id)) {
        let report = verify::run_check(c, &cfg);
        println!("{}", report.summary_line());
        reports.push(report);
    }
    let passed = reports.iter().all(|r| r.passed);
    println!(
        "verify: {} of {} criteria passed",
        reports.iter().filter(|r| r.passed).count(),
        reports.len()
    );
    fs::create_dir_all(&io.out_dir)?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: "verify",
        defaults: defaults_table(),
        config: serde_json::to_value(&a)?,
        relations: all.iter().flat_map(|c| c.relations.iter().copied()).collect(),
        grid: None,
        leakage: json!({ "n_max": cfg.n_max }),
        threads: rayon::current_num_threads(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        results: serde_json::to_value(&reports)?,
    };
    let path = io.out_dir.join("verify.manifest.json");
    serde_json::to_writer_pretty(BufWriter::new(File::create(&path)?), &manifest)?;
    Ok(passed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn input_specs() {
        let d = FockDim::new(12).unwrap();
        assert_eq!(parse_input("vacuum", d).unwrap().matrix()[(0, 0)].re, 1.0);
        assert_eq!(parse_input("fock:2", d).unwrap().matrix()[(2, 2)].re, 1.0);
        let c = parse_input("coherent:0.5,-0.2", d).unwrap();
        let g = fock_to_gaussian_moments(&c);
        assert!((g.mean[1] + 0.2 * std::f64::consts::SQRT_2).abs() < 1e-9);
        assert!(parse_input("cat:1.0", d).is_ok());
        assert!(parse_input("thermal:0.3", d).is_ok());
        for bad in ["squeezed:1", "fock:x", "coherent:", "thermal:1,2"] {
            assert!(matches!(parse_input(bad, d), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn config_overrides_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"r": [0.25, 0.5], "T": 0.5, "seed": 3}"#).unwrap();
        let flags = DenseArgs {
            r: vec![1.0],
            transmission: 1.0,
            samples: 10,
            seed: None,
            signal_var: 2.0,
            estimator: EstimatorArg::PlugIn,
        };
        let got = resolve(&flags, Some(&path)).unwrap();
        assert_eq!(got.r, vec![0.25, 0.5]);
        assert_eq!(got.transmission, 0.5);
        assert_eq!(got.seed, Some(3));
        assert_eq!(got.samples, 10);
        fs::write(&path, r#"{"bogus": 1}"#).unwrap();
        assert!(matches!(resolve(&flags, Some(&path)), Err(Error::Config(_))));
    }

    #[test]
    fn flattened_grid_keys_resolve() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"n_max": 12, "resolution": 61}"#).unwrap();
        let flags = KernelArgs {
            r: Some(0.5),
            transmission: 1.0,
            state: None,
            grid: GridOpts {
                n_max: 40,
                extent: None,
                resolution: 121,
            },
        };
        let got = resolve(&flags, Some(&path)).unwrap();
        assert_eq!(got.grid.n_max, 12);
        assert_eq!(got.grid.resolution, 61);
    }

    #[test]
    fn error_classes_map_to_exit_codes() {
        assert_eq!(exit_code_for(&Error::Config("x".into())), EXIT_CONFIG);
        assert_eq!(exit_code_for(&Error::TruncationLeakage { leakage: 1.0, bound: 0.1 }), EXIT_FAILURE);
    }
}
