//! States and displacements on a truncated Fock space.

use cvtele::fock::{displacement, fidelity};
use cvtele::gaussian::fock_to_gaussian_moments;
use cvtele::{DensityMatrix, FockDim, PhasePoint};
use num_complex::Complex64;

fn main() -> cvtele::Result<()> {
    let dim = FockDim::new(40)?;
    let alpha = Complex64::new(0.8, -0.3);
    let coherent = DensityMatrix::coherent(alpha, dim)?;
    let shifted = DensityMatrix::vacuum(dim).displaced(PhasePoint::from_alpha(alpha));
    println!("⟨n⟩ of |α⟩: {:.6} (|α|² = {:.6})", coherent.mean_photon_number(), alpha.norm_sqr());
    println!("F(|α⟩, D(α)|0⟩) = {:.12}", fidelity(&coherent, &shifted)?);

    let d = displacement(PhasePoint::new(2.0f64.sqrt(), 0.0)?, dim);
    println!("⟨0|D(α = 1)|0⟩ = {:.6} (e^(-1/2) = {:.6})", d[(0, 0)].re, (-0.5f64).exp());

    for (name, rho) in [
        ("thermal(0.5)", DensityMatrix::thermal(0.5, dim)?),
        ("even cat(1)", DensityMatrix::cat(Complex64::new(1.0, 0.0), 0.0, dim)?),
        ("fock(1)", DensityMatrix::fock(1, dim)?),
    ] {
        let g = fock_to_gaussian_moments(&rho);
        println!(
            "{name:>12}: purity {:.4}, Var x {:.4}, Var p {:.4}, leakage {:.1e}",
            rho.purity(),
            g.cov[0][0],
            g.cov[1][1],
            rho.leakage()
        );
    }
    Ok(())
}
