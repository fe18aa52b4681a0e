//! The intertwiners `U₀` and `U_(1)` acting between nucleonic and molecular states.

mod common;

use num_complex::Complex64;

use boa_core::effective::{build_effective, intertwine, Direction};
use boa_core::f64::Grid;
use boa_core::kinetic::gaussian_packet;
use boa_core::model::{make_avoided_crossing_1d, BandSelector, ConstantFrame, Profile};
use boa_core::Error;

fn one() -> [Complex64; 1] {
    [Complex64::new(1.0, 0.0)]
}

#[test]
fn at_zero_eps_the_molecular_density_is_the_nuclear_density() {
    let grid = Grid::new_1d([-10.0, 10.0], 256, false).unwrap();
    let model = make_avoided_crossing_1d(0.5, Profile::Tanh).unwrap();
    let h = build_effective(&model, &grid, &BandSelector::single(0), 2, 0.0, &Default::default()).unwrap();
    let mut rng = common::rng(5);
    let psi = common::random_state(&grid, 1, 0.0, &mut rng);
    let (u, _) = h.intertwiner().unwrap();
    let big = intertwine(&u, Direction::ToMolecular, &psi).unwrap();
    for (a, b) in big.fiber_density().iter().zip(psi.fiber_density()) {
        assert!((a - b).abs() < 1e-14 * (1.0 + b));
    }
}

#[test]
fn constant_frame_round_trip_is_exact() {
    let grid = Grid::new_1d([-10.0, 10.0], 256, false).unwrap();
    let model = ConstantFrame::new(1, vec![-1.0, 1.0], 0.5).unwrap();
    for order in 0..=2 {
        let h = build_effective(&model, &grid, &BandSelector::single(0), order, 0.1, &Default::default()).unwrap();
        let (u, _) = h.intertwiner().unwrap();
        let psi = gaussian_packet(&grid, &[1.0], 0.7, &[0.5], &one(), 0.1).unwrap();
        let big = intertwine(&u, Direction::ToMolecular, &psi).unwrap();
        let back = intertwine(&u, Direction::ToNucleonic, &big).unwrap();
        assert!(back.distance(&psi).unwrap() < 1e-12);
    }
}

#[test]
fn first_order_round_trip_defect_is_second_order() {
    let grid = Grid::new_1d([-10.0, 10.0], 1024, false).unwrap();
    let model = make_avoided_crossing_1d(0.5, Profile::Tanh).unwrap();
    let eps = [0.2, 0.1, 0.05, 0.025];
    let defects: Vec<f64> = eps
        .iter()
        .map(|&e| {
            let h = build_effective(&model, &grid, &BandSelector::single(0), 2, e, &Default::default()).unwrap();
            let (u, _) = h.intertwiner().unwrap();
            let psi = gaussian_packet(&grid, &[-0.5], 0.6, &[0.7], &one(), e).unwrap();
            let big = intertwine(&u, Direction::ToMolecular, &psi).unwrap();
            intertwine(&u, Direction::ToNucleonic, &big).unwrap().distance(&psi).unwrap()
        })
        .collect();
    let slope = common::loglog_slope(&eps, &defects);
    assert!(slope >= 1.7, "slope {slope:.3} from {defects:?}");
}

#[test]
fn mismatched_components_are_rejected() {
    let grid = Grid::new_1d([-10.0, 10.0], 64, false).unwrap();
    let model = ConstantFrame::new(1, vec![-1.0, 1.0], 0.5).unwrap();
    let h = build_effective(&model, &grid, &BandSelector::single(0), 1, 0.1, &Default::default()).unwrap();
    let (u, _) = h.intertwiner().unwrap();
    let mut rng = common::rng(1);
    let wrong = common::random_state(&grid, 3, 0.1, &mut rng);
    assert!(matches!(intertwine(&u, Direction::ToNucleonic, &wrong), Err(Error::GridMismatch(_))));
}
