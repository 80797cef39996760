//! Perturb every measurement with Gaussian noise before estimation and
//! compare detection AUROC with output perturbation at the same budget.

use dp_residual::detection::{default_alpha_grid, roc, TestSpec};
use dp_residual::estimation::{residual_law, wssr};
use dp_residual::mechanism::{input_perturbation_release, Mechanism, PrivacyParams};
use dp_residual::model::{simulate_measurements, AttackVector, MeasurementModel};
use dp_residual::SeedStream;
use nalgebra::DVector;

fn main() -> dp_residual::Result<()> {
    let mut rng = SeedStream::new(11, 0);
    let model = MeasurementModel::random(20, 5, 1.0, 0.0, &mut rng)?;
    let x = DVector::from_element(5, 1.0);
    let attack = AttackVector::new(20, vec![6], vec![5.0])?;
    let z = simulate_measurements(&model, &x, &attack, &mut rng)?;

    let clean = TestSpec::new(
        0.05,
        residual_law(&model, &x, &AttackVector::zero(20))?,
        residual_law(&model, &x, &attack)?,
    )?;
    let grid = default_alpha_grid();
    println!("clean AUROC {:.4}", roc(&clean, &grid)?.auroc);
    for eps in [1.0, 10.0, 100.0] {
        let r = input_perturbation_release(&model, &z, eps, 0.1, &mut rng)?;
        let dp = PrivacyParams::new(eps, 0.1, Mechanism::GaussianInput { k: r.k })?;
        println!(
            "eps {eps:5}: sigma_w {:.3}  released wssr {:.3}  AUROC {:.4}",
            r.sigma_w,
            wssr(&model, &r.z)? / (1.0 + r.k),
            roc(&clean.with_dp(dp), &grid)?.auroc
        );
    }
    Ok(())
}
