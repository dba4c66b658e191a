//! Dense coding over the shared kernel: simulated transmissions, error
//! covariance, and mutual information against the Gaussian closed form.

use cvtele::dense_coding::{
    error_covariance, gaussian_messages, noisy_dense_coding, simulate_transmission, MiEstimator, MiExperiment,
};

fn main() -> cvtele::Result<()> {
    let seed = 11;
    let channel = noisy_dense_coding(0.5, 1.0)?;
    let sent = gaussian_messages(100_000, 2.0, seed)?;
    let received = simulate_transmission(&channel, &sent, seed);
    let cov = error_covariance(&sent, &received);
    println!("n̄ = {:.4}, error covariance {cov:.4?}", channel.nbar().unwrap_or(0.0));

    println!("   r      n̄      MI closed  MI empirical (bits)");
    for k in 0..=4 {
        let row = MiExperiment {
            r: 0.25 * k as f64,
            transmission: 1.0,
            signal_var: 2.0,
            samples: 100_000,
            seed,
            estimator: MiEstimator::PlugIn,
        }
        .run()?;
        println!("{:5.2}  {:.4}  {:9.4}  {:9.4}", row.r, row.nbar, row.mi_closed_form, row.mi_empirical);
    }
    Ok(())
}
