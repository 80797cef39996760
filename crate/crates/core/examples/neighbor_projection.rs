//! Update the residual projection after one sensor's model row changes and
//! compare with refactoring from scratch.

use dp_residual::model::{
    neighbor_projection, projection_matrix, MeasurementModel, NeighborPerturbation,
};
use dp_residual::SeedStream;
use nalgebra::DVector;

fn main() -> dp_residual::Result<()> {
    let model = MeasurementModel::random(50, 10, 1.0, 0.0, &mut SeedStream::new(8, 0))?;
    for (row, scale) in [(0, 0.01), (17, 0.1), (49, 1.0)] {
        let pert = NeighborPerturbation {
            row_index: row,
            delta_h: DVector::from_fn(10, |i, _| scale * (i as f64 - 4.5)),
        };
        let (updated, path) = neighbor_projection(&model, &pert)?;
        let direct = projection_matrix(&model.apply_neighbor(&pert)?)?.matrix;
        println!(
            "row {row:2} |dh| {:.3}: {path:?}, max deviation {:.2e}",
            pert.delta_h.norm(),
            (updated - direct).amax()
        );
    }
    Ok(())
}
