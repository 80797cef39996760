//! Marcum Q, noncentral chi-square quantiles and Bessel-function values.

use dp_residual::special::{
    ln_bessel_i, marcum_q, noncentral_chisq_cdf, noncentral_chisq_quantile,
    regularized_gamma_q_inverse,
};

fn main() -> dp_residual::Result<()> {
    println!("Q_1(1, 2)          = {:.10}", marcum_q(1.0, 1.0, 2.0)?);
    println!("Q_7.5(3, 5)        = {:.10}", marcum_q(7.5, 3.0, 5.0)?);
    println!("chi2_15 threshold  = {:.6}", 2.0 * regularized_gamma_q_inverse(0.05, 7.5)?);
    let x = noncentral_chisq_quantile(0.95, 15.0, 9.0)?;
    println!("chi2_15(9) 95%     = {x:.6} (cdf back {:.12})", noncentral_chisq_cdf(x, 15.0, 9.0)?);
    println!("ln I_2.5(700)      = {:.6}", ln_bessel_i(2.5, 700.0)?);
    Ok(())
}
