//! Outcome kernel of a two-mode squeezed resource against its Gaussian form.

use cvtele::channel::{kernel_from, ChannelConfig, Kernel};
use cvtele::epr::{epr_moments, tmsv};
use cvtele::FockDim;

fn main() -> cvtele::Result<()> {
    let dim = FockDim::new(40)?;
    println!("   r      n̄      Var(x_A−x_B)  Var(p_A+p_B)  max |P − Gaussian|");
    for r in [0.0f64, 0.5, 1.0] {
        let w = tmsv(r, dim)?;
        let m = epr_moments(&w)?;
        let nbar = (-2.0 * r).exp();
        let cfg = ChannelConfig::for_states(nbar, 0.0, 0.0);
        let Kernel::SampledGrid(s) = kernel_from(&w, &cfg)? else {
            unreachable!()
        };
        let err = s
            .grid
            .points()
            .zip(&s.values)
            .map(|((pt, _), v)| (v - Kernel::gaussian_value(nbar, pt)).abs())
            .fold(0.0, f64::max);
        println!(
            "{r:5.2}  {nbar:8.5}  {:12.8}  {:12.8}  {err:.2e}",
            m.var_x_diff(),
            m.var_p_sum()
        );
    }
    Ok(())
}
