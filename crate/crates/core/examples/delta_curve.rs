//! Scan one-row neighbors of a model and print the worst-case δ(ε) curve of
//! the chi-square mechanism.

use dp_residual::mechanism::{delta_curve, NeighborScan, NeighborhoodSpec};
use dp_residual::model::{AttackVector, MeasurementModel};
use dp_residual::SeedStream;

fn main() -> dp_residual::Result<()> {
    let model = MeasurementModel::random(20, 5, 1.0, 0.0, &mut SeedStream::new(3, 0))?;
    let attack = AttackVector::new(20, vec![0], vec![4.0])?;
    let spec = NeighborhoodSpec::new(0.1, 2000)?;
    let scan = NeighborScan::new(&model, &attack, &spec, &mut SeedStream::new(3, 1))?;
    println!(
        "theta {:.4}, max |theta' - theta| {:.4}, {} neighbors",
        scan.theta,
        scan.max_sensitivity(),
        scan.neighbors.len()
    );
    let eps: Vec<f64> = (0..12).map(|i| 0.05 * 1.5f64.powi(i)).collect();
    for row in delta_curve(&scan, 1, &eps)? {
        println!("eps {:8.4}  delta {:.3e}", row.epsilon, row.delta);
    }
    Ok(())
}
