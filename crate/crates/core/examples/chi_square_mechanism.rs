//! Release a WSSR through the chi-square mechanism and report the (ε, δ)
//! guarantee for a pair of neighboring noncentralities.

use dp_residual::estimation::{residual_law, wssr};
use dp_residual::mechanism::{chi_square_release, delta_for_epsilon, leakage, PrivacyParams};
use dp_residual::model::{simulate_measurements, AttackVector, MeasurementModel};
use dp_residual::SeedStream;
use nalgebra::DVector;

fn main() -> dp_residual::Result<()> {
    let mut rng = SeedStream::new(1, 0);
    let model = MeasurementModel::random(20, 5, 1.0, 0.0, &mut rng)?;
    let x = DVector::from_element(5, 1.0);
    let attack = AttackVector::new(20, vec![4], vec![3.0])?;
    let z = simulate_measurements(&model, &x, &attack, &mut rng)?;
    let law = residual_law(&model, &x, &attack)?;

    let params = PrivacyParams::chi_square(1.0, 0.1, 1)?;
    let mut release_rng = SeedStream::new(1, 2);
    let release = chi_square_release(&law, wssr(&model, &z)?, &params, &mut release_rng)?;
    println!("released {:.4} from law {:?}", release.value, release.law);
    println!("replay record {:?}", release.seed);

    let r_tilde = 16.0;
    let (theta, theta_prime) = (2.0, 2.1);
    for eps in [0.25, 0.5, 1.0, 2.0] {
        println!(
            "eps {eps:4}: delta {:.3e}",
            delta_for_epsilon(eps, r_tilde, theta, theta_prime)?
        );
    }
    println!(
        "leakage at the release: {:.4}",
        leakage(release.value, r_tilde, theta, theta_prime)?
    );
    Ok(())
}
