//! A stealth attack `a = Hc` leaves the residual untouched; restricting the
//! state to a low-dimensional subspace exposes it again.

use dp_residual::detection::{pfa_pd, TestSpec};
use dp_residual::estimation::residual_law;
use dp_residual::model::{gsp_reduce, stealth_attack, AttackVector, MeasurementModel};
use dp_residual::SeedStream;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

fn main() -> dp_residual::Result<()> {
    let mut rng = SeedStream::new(4, 0);
    let model = MeasurementModel::random(30, 6, 1.0, 0.0, &mut rng)?;
    let x = DVector::from_element(6, 1.0);
    let a = stealth_attack(&model, &DVector::from_vec(vec![1.0, -2.0, 0.5, 0.0, 1.5, 3.0]))?;
    let law = residual_law(&model, &x, &a)?;
    let spec = TestSpec::new(0.05, residual_law(&model, &x, &AttackVector::zero(30))?, law)?;
    println!("full model: law {law:?}, (pfa, pd) {:?}", pfa_pd(&spec)?);

    let g = DMatrix::from_fn(6, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
    let u = g.qr().q();
    let reduced = gsp_reduce(&model, &u)?;
    let xr = u.transpose() * &x;
    let law = residual_law(&reduced, &xr, &a)?;
    let spec = TestSpec::new(0.05, residual_law(&reduced, &xr, &AttackVector::zero(30))?, law)?;
    println!("reduced model: law {law:?}, (pfa, pd) {:?}", pfa_pd(&spec)?);
    Ok(())
}
