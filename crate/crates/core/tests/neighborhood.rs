use dp_residual::mechanism::{NeighborScan, NeighborhoodSpec};
use dp_residual::model::{AttackVector, MeasurementModel};
use dp_residual::SeedStream;

#[test]
fn scan_maximum_is_stable_across_seeds() {
    let model = MeasurementModel::random(10, 4, 1.0, 0.0, &mut SeedStream::new(12, 0)).unwrap();
    let attack = AttackVector::new(10, vec![3], vec![2.0]).unwrap();
    let spec = NeighborhoodSpec::new(0.1, 10_000).unwrap();
    let a = NeighborScan::new(&model, &attack, &spec, &mut SeedStream::new(1, 3)).unwrap();
    let b = NeighborScan::new(&model, &attack, &spec, &mut SeedStream::new(2, 3)).unwrap();
    let (sa, sb) = (a.max_sensitivity(), b.max_sensitivity());
    assert!(sa > 0.0);
    assert!((sa - sb).abs() <= 0.05 * sa.max(sb), "{sa} vs {sb}");

    let (da, db) = (a.delta_max(0.5, 7.0).unwrap(), b.delta_max(0.5, 7.0).unwrap());
    assert!(da.delta >= 0.0 && db.delta >= 0.0);
    assert_eq!(a.skipped + a.neighbors.len(), 10_000);
}
