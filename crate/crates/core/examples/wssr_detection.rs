//! Estimate the state of a random 20x5 system, compute the WSSR and run the
//! chi-square bad-data test with and without a false-data injection.

use dp_residual::detection::{pfa_pd, threshold, TestSpec};
use dp_residual::estimation::{residual_law, wls_estimate, wssr};
use dp_residual::model::{simulate_measurements, AttackVector, MeasurementModel};
use dp_residual::SeedStream;
use nalgebra::DVector;

fn main() -> dp_residual::Result<()> {
    let mut rng = SeedStream::new(7, 0);
    let model = MeasurementModel::random(20, 5, 1.0, 0.0, &mut rng)?;
    let x = DVector::from_element(5, 1.0);
    let clean = AttackVector::zero(20);
    let attack = AttackVector::new(20, vec![2, 11], vec![3.0, -2.5])?;

    let spec = TestSpec::new(
        0.05,
        residual_law(&model, &x, &clean)?,
        residual_law(&model, &x, &attack)?,
    )?;
    let tau = threshold(&spec)?;
    let (pfa, pd) = pfa_pd(&spec)?;
    println!("threshold {tau:.4}  pfa {pfa:.4}  pd {pd:.4}");

    for (name, a) in [("clean", &clean), ("attacked", &attack)] {
        let z = simulate_measurements(&model, &x, a, &mut rng)?;
        let x_hat = wls_estimate(&model, &z)?;
        let q = wssr(&model, &z)?;
        println!(
            "{name:>8}: wssr {q:8.3}  reject {}  |x_hat - x| {:.3}",
            q > tau,
            (x_hat - &x).norm()
        );
    }
    Ok(())
}
