//! Coherent-state teleportation fidelity against squeezing, computed four ways.

use cvtele::channel::{apply_channel, fidelity_via_kernel, gaussian_kernel, ChannelConfig};
use cvtele::epr::tmsv;
use cvtele::fock::fidelity;
use cvtele::gaussian::{apply_gaussian_channel, gaussian_fidelity, GaussianState};
use cvtele::protocol::average_output;
use cvtele::{DensityMatrix, FockDim};
use num_complex::Complex64;

fn main() -> cvtele::Result<()> {
    let dim = FockDim::new(40)?;
    let alpha = Complex64::new(0.8, 0.0);
    let psi = DensityMatrix::coherent(alpha, dim)?;
    let g = GaussianState::coherent(alpha);
    println!("   r   kernel    channel   oracle    gaussian  1/(1+n̄)");
    for k in 0..=6 {
        let r = 0.25 * k as f64;
        let nbar = (-2.0 * r).exp();
        let w = tmsv(r, dim)?;
        let cfg = ChannelConfig::for_resource(&w, &psi)?;
        let kernel = gaussian_kernel(nbar)?;
        println!(
            "{r:5.2}  {:.6}  {:.6}  {:.6}  {:.6}  {:.6}",
            fidelity_via_kernel(&kernel, &psi, &cfg)?,
            fidelity(&psi, &apply_channel(&kernel, &psi, &cfg)?)?,
            fidelity(&psi, &average_output(&psi, &w, &cfg)?.state)?,
            gaussian_fidelity(&g, &apply_gaussian_channel(&g, nbar)?)?,
            1.0 / (1.0 + nbar)
        );
    }
    Ok(())
}
