//! Check analytic false-alarm and detection rates against simulation.

use dp_residual::detection::{monte_carlo_validate, TestSpec};
use dp_residual::estimation::residual_law;
use dp_residual::mechanism::PrivacyParams;
use dp_residual::model::{AttackVector, MeasurementModel};
use dp_residual::SeedStream;
use nalgebra::DVector;

fn main() -> dp_residual::Result<()> {
    let model = MeasurementModel::random(20, 5, 1.0, 0.0, &mut SeedStream::new(2, 0))?;
    let x = DVector::from_element(5, 1.0);
    let attack = AttackVector::new(20, vec![3], vec![4.0])?;
    let spec = TestSpec::new(
        0.05,
        residual_law(&model, &x, &AttackVector::zero(20))?,
        residual_law(&model, &x, &attack)?,
    )?;
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    for (name, s) in [
        ("clean", spec),
        ("chi r'=2", spec.with_dp(PrivacyParams::chi_square(1.0, 0.1, 2)?)),
    ] {
        let r = monte_carlo_validate(&model, &x, &attack, &s, 100_000, 42, workers)?;
        println!(
            "{name:>9}: pfa {:.4} (mc {:.4} ± {:.4})  pd {:.4} (mc {:.4} ± {:.4})",
            r.pfa, r.pfa_hat, r.pfa_se, r.pd, r.pd_hat, r.pd_se
        );
    }
    Ok(())
}
