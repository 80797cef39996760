//! Generate the Gaussian-regime experiment tables in-process and print a few
//! summary rows.

use dp_residual::cli::config::FigureConfig;
use dp_residual::cli::figures::{fig3, fig5, fig6};

fn main() -> dp_residual::Result<()> {
    let f = FigureConfig::default();
    for row in fig3(&f)?.1 {
        println!("fig3 delta_theta {:3}: AUROC {:.4}", row.delta_theta, row.auroc);
    }
    for row in fig5(&f)?.iter().step_by(4) {
        println!("fig5 sigma_nu {:4}: eps {:.4} AUROC {:.4}", row.sigma_nu, row.epsilon, row.auroc);
    }
    for row in fig6(&f, 20_000, 0)?.iter().step_by(5) {
        println!(
            "fig6 sigma_nu {:4}: pfa {:.4} ({:.4})  pd {:.4} ({:.4})",
            row.sigma_nu, row.pfa, row.pfa_mc, row.pd, row.pd_mc
        );
    }
    Ok(())
}
