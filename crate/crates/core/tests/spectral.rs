use std::f64::consts::TAU;

use proptest::prelude::*;
use visco_core::rng::random_field;
use visco_core::spectral::{curl_rows, div, grad, hodge_decompose, laplacian, leray_project};
use visco_core::{Grid, Rank, SpectralField};

#[test]
fn derivatives_of_a_trigonometric_field_are_exact() {
    let grid = Grid::new(2, 16, TAU).unwrap();
    // f = sin(2x) cos(3y); grad f and lap f in closed form
    let f = SpectralField::from_fn(&grid, Rank::Scalar, |p, _| (2.0 * p[0]).sin() * (3.0 * p[1]).cos());
    let g = grad(&f).unwrap().to_physical();
    let l = laplacian(&f).to_physical();
    let n = grid.n_modes();
    for idx in 0..n {
        let [x, y, _] = grid.point(idx);
        assert!((g[idx] - 2.0 * (2.0 * x).cos() * (3.0 * y).cos()).abs() < 1e-12);
        assert!((g[n + idx] + 3.0 * (2.0 * x).sin() * (3.0 * y).sin()).abs() < 1e-12);
        assert!((l[idx] + 13.0 * (2.0 * x).sin() * (3.0 * y).cos()).abs() < 1e-12);
    }
}

#[test]
fn physical_round_trip_and_parseval() {
    let grid = Grid::new(3, 8, TAU).unwrap();
    let f = random_field(&grid, Rank::Vector, 2, 3);
    let values = f.to_physical();
    let back = SpectralField::from_physical(&grid, Rank::Vector, &values).unwrap();
    let diff = back.sub(&f).unwrap().norm_l2();
    assert!(diff < 1e-13 * f.norm_l2());
    let direct: f64 = values.iter().map(|v| v * v).sum::<f64>() * grid.cell_volume();
    assert!((direct.sqrt() - f.norm_l2()).abs() < 1e-12 * f.norm_l2());
}

#[test]
fn a_gradient_has_no_curl_and_is_removed_by_the_projector() {
    let grid = Grid::new(3, 8, TAU).unwrap();
    let phi = random_field(&grid, Rank::Scalar, 2, 5);
    let g = grad(&phi).unwrap();
    assert!(leray_project(&g).unwrap().norm_l2() < 1e-13 * g.norm_l2());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn projection_is_idempotent_and_solenoidal(seed in any::<u64>(), dim in 2usize..=3) {
        let grid = Grid::new(dim, 8, TAU).unwrap();
        let v = random_field(&grid, Rank::Vector, 2, seed);
        let p = leray_project(&v).unwrap();
        prop_assert!(div(&p).unwrap().norm_l2() < 1e-12 * v.norm_l2());
        let pp = leray_project(&p).unwrap();
        prop_assert!(pp.sub(&p).unwrap().norm_l2() < 1e-13 * v.norm_l2());
    }

    #[test]
    fn hodge_parts_are_orthogonal_and_sum_back(seed in any::<u64>(), dim in 2usize..=3) {
        let grid = Grid::new(dim, 8, TAU).unwrap();
        let e = random_field(&grid, Rank::Tensor, 2, seed);
        let (gradient, rest) = hodge_decompose(&e).unwrap();
        let scale = e.norm_l2() * e.norm_l2();
        prop_assert!(gradient.inner(&rest).unwrap().abs() < 1e-12 * scale);
        prop_assert!(gradient.add(&rest).unwrap().sub(&e).unwrap().norm_l2() < 1e-12 * e.norm_l2());
        prop_assert!(curl_rows(&gradient).unwrap().norm_l2() < 1e-11 * e.norm_h1());
    }

    #[test]
    fn real_fields_stay_conjugate_symmetric(seed in any::<u64>()) {
        let grid = Grid::new(2, 12, TAU).unwrap();
        let f = random_field(&grid, Rank::Tensor, 3, seed);
        let g = laplacian(&grad(&div(&f).unwrap()).unwrap());
        prop_assert!(g.hermitian_defect() < 1e-12 * g.max_abs_coeff().max(1.0));
    }
}
