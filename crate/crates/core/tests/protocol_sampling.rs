//! Monte Carlo outcomes of the measurement protocol.

use cvtele::channel::ChannelConfig;
use cvtele::epr::tmsv;
use cvtele::protocol::{empirical_displacement_covariance, sample_outcomes};
use cvtele::{DensityMatrix, FockDim};

#[test]
fn sampled_displacement_covariance_matches_nbar() {
    let d = FockDim::new(30).unwrap();
    let r = 0.5;
    let w = tmsv(r, d).unwrap();
    let rho = DensityMatrix::vacuum(d);
    let cfg = ChannelConfig::for_resource(&w, &rho).unwrap();
    let outcomes = sample_outcomes(&rho, &w, 10_000, 3, &cfg).unwrap();
    let cov = empirical_displacement_covariance(&outcomes, &rho).unwrap();
    let nbar = (-2.0 * r).exp();
    for k in 0..2 {
        assert!((cov[k][k] - nbar).abs() / nbar < 0.05, "{cov:?}");
    }
    assert!(cov[0][1].abs() < 0.05 * nbar, "{cov:?}");
}

#[test]
fn sampled_outcomes_are_valid_states() {
    let d = FockDim::new(20).unwrap();
    let w = tmsv(0.8, d).unwrap();
    let rho = DensityMatrix::fock(1, d).unwrap();
    let cfg = ChannelConfig::for_resource(&w, &rho).unwrap();
    for o in sample_outcomes(&rho, &w, 200, 9, &cfg).unwrap() {
        let s = o.state.expect("density is far above the underflow floor");
        assert!(s.min_eigenvalue() >= -1e-9);
        assert!((s.trace() - 1.0).abs() < 1e-9);
    }
}
