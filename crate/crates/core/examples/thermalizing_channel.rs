//! The Gaussian random-displacement channel turns vacuum into a thermal state
//! and a coherent state into a displaced thermal state.

use cvtele::channel::{apply_channel, apply_thermal_form, gaussian_kernel, ChannelConfig};
use cvtele::fock::trace_distance;
use cvtele::{DensityMatrix, FockDim};
use num_complex::Complex64;

fn main() -> cvtele::Result<()> {
    let dim = FockDim::new(40)?;
    let alpha = Complex64::new(0.8, -0.3);
    for r in [0.3f64, 0.8] {
        let nbar = (-2.0 * r).exp();
        let kernel = gaussian_kernel(nbar)?;

        let vacuum = DensityMatrix::vacuum(dim);
        let out = apply_channel(&kernel, &vacuum, &ChannelConfig::for_states(nbar, 0.0, 0.0))?;
        let thermal = DensityMatrix::thermal(nbar, dim)?;

        let coherent = DensityMatrix::coherent(alpha, dim)?;
        let cfg = ChannelConfig::for_states(nbar, coherent.mean_photon_number(), 0.0);
        let out_c = apply_channel(&kernel, &coherent, &cfg)?;
        let displaced = apply_thermal_form(&[(1.0, alpha)], nbar, dim)?;

        println!(
            "r = {r}: T(vacuum out, thermal) = {:.2e}, T(coherent out, displaced thermal) = {:.2e}",
            trace_distance(&out, &thermal)?,
            trace_distance(&out_c, &displaced)?
        );
    }
    Ok(())
}
