//! Moment-level propagation: means and covariances through the channel
//! without any Fock-space matrices.

use cvtele::channel::noisy_nbar;
use cvtele::gaussian::{apply_gaussian_channel, gaussian_fidelity, GaussianState};
use num_complex::Complex64;

fn main() -> cvtele::Result<()> {
    let input = GaussianState::coherent(Complex64::new(1.0, 0.5));
    for (r, t) in [(0.5, 1.0), (0.5, 0.8), (1.0, 0.8), (2.0, 0.5)] {
        let nbar = noisy_nbar(r, t)?;
        let out = apply_gaussian_channel(&input, nbar)?;
        println!(
            "r = {r}, T = {t}: n̄ = {nbar:.4}, cov = [{:.4}, {:.4}], F = {:.4}",
            out.cov[0][0],
            out.cov[1][1],
            gaussian_fidelity(&input, &out)?
        );
    }
    let squeezed = GaussianState::squeezed(0.6);
    println!(
        "squeezed input: det {:.4} → {:.4} after n̄ = 0.2",
        squeezed.det(),
        apply_gaussian_channel(&squeezed, 0.2)?.det()
    );
    Ok(())
}
