//! ROC and AUROC of the detector for growing attack strength, clean and with
//! the chi-square mechanism.

use dp_residual::detection::{default_alpha_grid, roc, TestSpec};
use dp_residual::estimation::ResidualLaw;
use dp_residual::mechanism::PrivacyParams;

fn main() -> dp_residual::Result<()> {
    let grid = default_alpha_grid();
    let law0 = ResidualLaw::chi_square(15.0, 0.0)?;
    let dp = PrivacyParams::chi_square(1.0, 0.1, 3)?;
    for nc in [1.0, 4.0, 9.0, 16.0, 25.0] {
        let spec = TestSpec::new(0.05, law0, ResidualLaw::chi_square(15.0, nc)?)?;
        let clean = roc(&spec, &grid)?;
        let private = roc(&spec.with_dp(dp), &grid)?;
        println!(
            "theta^2 {nc:4}: AUROC clean {:.4}  private {:.4}",
            clean.auroc, private.auroc
        );
    }
    Ok(())
}
