//! Decompose the WSSR of a regularized estimator into a weighted chi-square
//! mixture, compute its cumulants and decide whether the Gaussian
//! approximation applies.

use dp_residual::estimation::{chi_mixture, cumulants, gaussian_law, DEFAULT_MAX_DENSITY_BOUND};
use dp_residual::model::{AttackVector, MeasurementModel};
use dp_residual::SeedStream;
use nalgebra::DVector;

fn main() -> dp_residual::Result<()> {
    let mut rng = SeedStream::new(5, 0);
    for (m, n, lambda) in [(20, 5, 0.0), (200, 20, 0.0), (200, 20, 0.5)] {
        let model = MeasurementModel::random(m, n, 1.0, lambda, &mut rng)?;
        let x = DVector::from_element(n, 1.0);
        let mix = chi_mixture(&model, &x, &AttackVector::zero(m))?;
        let c = cumulants(&mix);
        let g = gaussian_law(&mix)?;
        println!(
            "{m}x{n} lambda {lambda}: K1 {:.3} K2 {:.3} rho {:.4} bound {:?} -> {:?}",
            c.k[0],
            c.k[1],
            g.rho,
            g.density_bound,
            g.regime(DEFAULT_MAX_DENSITY_BOUND)
        );
    }
    Ok(())
}
