//! A squeezed resource sent through loss acts like a weaker pure resource:
//! teleporting vacuum yields a thermal state with n̄ = 1 − (1 − e^(−2r))T.

use cvtele::channel::{apply_channel, gaussian_kernel, noisy_nbar, ChannelConfig};
use cvtele::fock::trace_distance;
use cvtele::{DensityMatrix, FockDim};

fn main() -> cvtele::Result<()> {
    let dim = FockDim::new(40)?;
    let (r, t) = (0.35, 0.7);
    let nbar = noisy_nbar(r, t)?;
    let out = apply_channel(
        &gaussian_kernel(nbar)?,
        &DensityMatrix::vacuum(dim),
        &ChannelConfig::for_states(nbar, 0.0, 0.0),
    )?;
    println!("r = {r}, T = {t}: n̄ = {nbar:.6}, equivalent squeezing {:.6}", -0.5 * nbar.ln());
    println!(
        "trace distance to thermal(n̄): {:.2e}",
        trace_distance(&out, &DensityMatrix::thermal(nbar, dim)?)?
    );
    Ok(())
}
