//! Draws measurement outcomes of the protocol and recovers the added noise
//! from the conditional output states.

use cvtele::channel::ChannelConfig;
use cvtele::epr::tmsv;
use cvtele::protocol::{empirical_displacement_covariance, sample_outcomes};
use cvtele::{DensityMatrix, FockDim};

fn main() -> cvtele::Result<()> {
    let dim = FockDim::new(30)?;
    let r = 0.5;
    let w = tmsv(r, dim)?;
    let rho = DensityMatrix::vacuum(dim);
    let cfg = ChannelConfig::for_resource(&w, &rho)?;
    let outcomes = sample_outcomes(&rho, &w, 10_000, 1, &cfg)?;
    let cov = empirical_displacement_covariance(&outcomes, &rho)?;
    println!("first outcome ({:.3}, {:.3})", outcomes[0].pt.x, outcomes[0].pt.p);
    println!("added covariance {cov:.4?}, expected n̄ = {:.4}", (-2.0 * r).exp());
    Ok(())
}
