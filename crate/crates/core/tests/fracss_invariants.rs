use std::io::{BufReader, Cursor};

use nalgebra::DMatrix;
use plurvec::fracss::{
    apply_map, approximation_residuals, diagonal_profile, fit_linear_map, fit_pairs, split_indices, Direction,
    LinearMap,
};
use plurvec::synth::{gen_linear, pairs_from_matrices, LinearSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian(t: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(t, d, |_, _| StandardNormal.sample(&mut rng))
}

#[test]
fn ridge_gradient_vanishes() {
    // stationarity of ‖XB − Y‖² + λ‖B‖²: Xᵀ(XB − Y) = −λB
    let x = gaussian(60, 8, 1);
    let y = gaussian(60, 5, 2);
    for lambda in [0.0, 0.01, 1.0, 25.0] {
        let b = fit_linear_map(&x, &y, lambda).unwrap().matrix;
        let grad = x.transpose() * (&x * &b - &y);
        let err = (&grad + &b * lambda).norm();
        assert!(err <= 1e-9 * (1.0 + grad.norm()), "λ = {lambda}: {err:e}");
    }
}

#[test]
fn least_squares_residual_is_orthogonal_to_the_column_space() {
    let x = gaussian(40, 6, 3);
    let y = gaussian(40, 6, 4);
    let b = fit_linear_map(&x, &y, 0.0).unwrap().matrix;
    let r = &x * &b - &y;
    assert!((x.transpose() * r).norm() < 1e-10);
}

#[test]
fn ridge_shrinks_the_map_and_grows_the_residual() {
    let x = gaussian(50, 10, 5);
    let y = gaussian(50, 10, 6);
    let mut last: Option<(f64, f64)> = None;
    for lambda in [0.0, 0.1, 1.0, 10.0, 100.0, 1e4] {
        let b = fit_linear_map(&x, &y, lambda).unwrap().matrix;
        let (size, resid) = (b.norm(), (&x * &b - &y).norm());
        if let Some((s, r)) = last {
            assert!(size <= s + 1e-12, "‖B‖ grew at λ = {lambda}");
            assert!(resid >= r - 1e-12, "residual fell at λ = {lambda}");
        }
        last = Some((size, resid));
    }
}

#[test]
fn rank_deficient_identity_is_the_row_space_projector() {
    // 3 samples in 7 dimensions: mapping X to itself has infinitely many
    // solutions; the minimum-norm one projects onto the row space
    let x = gaussian(3, 7, 7);
    let map = fit_linear_map(&x, &x, 0.0).unwrap();
    let b = &map.matrix;
    assert!((&x * b - &x).norm() < 1e-10);
    assert!((b * b - b).norm() < 1e-10);
    assert!((b - b.transpose()).norm() < 1e-10);
    assert!((b.trace() - 3.0).abs() < 1e-10);
    assert_eq!(map.meta.unwrap().rank, 3);
}

#[test]
fn minimum_norm_solution_matches_the_pseudo_inverse() {
    let x = gaussian(4, 9, 8);
    let y = gaussian(4, 3, 9);
    let b = fit_linear_map(&x, &y, 0.0).unwrap().matrix;
    let normal = x.transpose() * (&x * x.transpose()).try_inverse().unwrap() * &y;
    assert!((b - normal).norm() < 1e-9);
}

#[test]
fn fits_are_deterministic_and_round_trip() {
    let (x, y) = gen_linear::<f64>(&LinearSpec {
        rows: 300,
        dim: 12,
        seed: 4,
        ..LinearSpec::default()
    })
    .unwrap();
    let a = fit_linear_map(&x, &y, 0.5).unwrap();
    let b = fit_linear_map(&x, &y, 0.5).unwrap();
    assert_eq!(a.matrix, b.matrix);

    let mut buf = Vec::new();
    a.write(&mut buf).unwrap();
    let back = LinearMap::<f64>::parse(BufReader::new(Cursor::new(buf))).unwrap();
    assert_eq!(back.matrix, a.matrix);
    assert_eq!(back.ridge, a.ridge);
}

#[test]
fn apply_map_is_a_row_times_matrix() {
    let x = gaussian(20, 4, 10);
    let y = gaussian(20, 3, 11);
    let map = fit_linear_map(&x, &y, 0.0).unwrap();
    let v = [0.5, -1.0, 2.0, 0.25];
    let want = DMatrix::from_row_slice(1, 4, &v) * &map.matrix;
    let got = apply_map(&map, &v).unwrap();
    for j in 0..3 {
        assert!((got[j] - want[(0, j)]).abs() < 1e-12);
    }
    assert!(apply_map(&map, &[1.0]).is_err());
}

#[test]
fn residuals_subtract_the_scaled_input() {
    let (x, y) = gen_linear::<f64>(&LinearSpec {
        rows: 400,
        dim: 10,
        seed: 2,
        ..LinearSpec::default()
    })
    .unwrap();
    let map = fit_linear_map(&x, &y, 0.0).unwrap();
    let prof = diagonal_profile(&map).unwrap();
    let res = approximation_residuals(&map, &x, prof.diag_mean).unwrap();
    let pred = &x * &map.matrix;
    assert_eq!(res.rows.len(), 400);
    for (i, row) in res.rows.iter().enumerate().take(20) {
        for (j, e) in row.iter().enumerate() {
            assert!((e - (pred[(i, j)] - prof.diag_mean * x[(i, j)])).abs() < 1e-12);
        }
    }
    let flat: Vec<f64> = res.rows.iter().flatten().copied().collect();
    let mean = flat.iter().sum::<f64>() / flat.len() as f64;
    assert!((mean - res.elementwise_mean).abs() < 1e-12);
}

#[test]
fn inverse_pairs_fit_swaps_the_roles() {
    let x = gaussian(80, 5, 12);
    let y = &x * DMatrix::from_diagonal_element(5, 5, 2.0);
    let (table, pairs) = pairs_from_matrices(&x, &y).unwrap();
    let fwd = fit_pairs(&pairs, &table, 0.0, Direction::Forward).unwrap();
    let inv = fit_pairs(&pairs, &table, 0.0, Direction::Inverse).unwrap();
    assert!((fwd.matrix - DMatrix::from_diagonal_element(5, 5, 2.0)).norm() < 1e-10);
    assert!((inv.matrix - DMatrix::from_diagonal_element(5, 5, 0.5)).norm() < 1e-10);
}

#[test]
fn split_is_a_seeded_partition() {
    let (train, test) = split_indices(101, 0.1, 9).unwrap();
    assert_eq!(test.len(), 10);
    assert_eq!(train.len(), 91);
    let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..101).collect::<Vec<_>>());
    assert_eq!(split_indices(101, 0.1, 9).unwrap(), (train, test.clone()));
    assert_ne!(split_indices(101, 0.1, 10).unwrap().1, test);
    assert!(split_indices(10, 1.0, 0).is_err());
}

#[test]
fn fit_rejects_bad_input() {
    let x = gaussian(5, 3, 1);
    assert!(fit_linear_map(&x, &gaussian(4, 3, 2), 0.0).is_err());
    assert!(fit_linear_map(&x, &gaussian(5, 3, 2), -1.0).is_err());
    let mut bad = x.clone();
    bad[(0, 0)] = f64::NAN;
    assert!(fit_linear_map(&bad, &x, 0.0).is_err());
}
