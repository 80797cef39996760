//! Calibrate the output-noise scale of the Gaussian mechanism for a pair of
//! neighboring Gaussian residual laws, then release a value.

use dp_residual::estimation::ResidualLaw;
use dp_residual::mechanism::{
    calibrate_nu_sigma, epsilon_for_nu_sigma, gaussian_leakage_probability,
    gaussian_output_release, PrivacyParams,
};
use dp_residual::SeedStream;

fn main() -> dp_residual::Result<()> {
    let law = ResidualLaw::gaussian(10.0, 1.0)?;
    let neighbor = ResidualLaw::gaussian(11.0, 1.0)?;
    for (eps, delta) in [(0.5, 0.1), (1.0, 0.1), (1.0, 1e-3)] {
        let nu = calibrate_nu_sigma(eps, delta, &law, &neighbor)?;
        let p = gaussian_leakage_probability(eps, &law, &neighbor, nu)?;
        println!("eps {eps} delta {delta}: nu_sigma {nu:.4}  Pr(|L| <= eps) {p:.4}");
    }
    for s in [0.5, 2.0, 8.0] {
        println!(
            "nu_sigma {s}: eps {:.4} at delta 0.1",
            epsilon_for_nu_sigma(0.1, &law, &neighbor, s)?
        );
    }
    let params = PrivacyParams::gaussian_output(1.0, 0.1, 0.0, 2.0)?;
    let r = gaussian_output_release(&law, 10.4, &params, &mut SeedStream::new(9, 2))?;
    println!("released {:.4}, law {:?}", r.value, r.law);
    Ok(())
}
