//! Simulates the measurement protocol directly and compares its average
//! output with the random-displacement channel built from the same resource.

use cvtele::channel::{apply_channel, kernel_from, ChannelConfig};
use cvtele::epr::tmsv;
use cvtele::fock::{fidelity, trace_distance};
use cvtele::protocol::{average_output, conditional_output};
use cvtele::{DensityMatrix, FockDim, PhasePoint, TwoModeState};
use num_complex::Complex64;

fn main() -> cvtele::Result<()> {
    let dim = FockDim::new(30)?;
    let rho = DensityMatrix::cat(Complex64::new(1.0, 0.0), 0.0, dim)?;
    let mixed = TwoModeState::mixture(&[(0.6, tmsv(0.3, dim)?), (0.4, tmsv(0.8, dim)?)])?;
    for (name, w) in [("TMSV(0.8)", tmsv(0.8, dim)?), ("TMSV mixture", mixed)] {
        let cfg = ChannelConfig::for_resource(&w, &rho)?;
        let oracle = average_output(&rho, &w, &cfg)?;
        let channel = apply_channel(&kernel_from(&w, &cfg)?, &rho, &cfg)?;
        println!(
            "{name:>12}: ∫density = {:.6}, T(oracle, channel) = {:.2e}, F = {:.4}",
            oracle.density_integral,
            trace_distance(&oracle.state, &channel)?,
            fidelity(&rho, &channel)?
        );
    }

    let w = tmsv(0.8, dim)?;
    let outcome = conditional_output(&rho, &w, PhasePoint::new(0.4, -0.2)?)?;
    let state = outcome.state.expect("density is well above underflow");
    println!(
        "single outcome (0.4, −0.2): density {:.4e}, corrected-state fidelity {:.4}",
        outcome.density,
        fidelity(&rho, &state)?
    );
    Ok(())
}
