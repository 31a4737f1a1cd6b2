//! Sparse GMRF structures checked against dense matrix computations.

use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

use stm::lattice::{build_gmrf_structure, build_lattice, build_neighborhood, GaussianKernel, GmrfStructure};

fn dense_h(s: &GmrfStructure) -> DMatrix<f64> {
    let n = s.len();
    let mut h = DMatrix::zeros(n, n);
    for d in 0..n {
        h[(d, d)] = s.h_diag(d);
        for (j, v) in s.h_row(d) {
            h[(d, j)] = v;
        }
    }
    h
}

fn structure(dims: &[usize], r0: f64, phi: f64) -> GmrfStructure {
    let lat = build_lattice(dims).unwrap();
    let g = build_neighborhood(&lat, r0, &GaussianKernel).unwrap();
    build_gmrf_structure(&g, phi).unwrap()
}

const RADII: [f64; 3] = [1.0, 2.0, 2.236_067_977_499_79];
const PHIS: [f64; 4] = [0.1, 1.0, 10.0, 100.0];

#[test]
fn precision_is_positive_definite_on_small_lattices() {
    for rows in 1..=8 {
        for cols in [1, 3, 8] {
            for r0 in RADII {
                for phi in PHIS {
                    let s = structure(&[rows, cols], r0, phi);
                    let q = DMatrix::identity(s.len(), s.len()) + dense_h(&s) * phi;
                    let eig = SymmetricEigen::new(q);
                    let min = eig.eigenvalues.min();
                    // Eigenvalues of I + φH are at least 1 since H is PSD.
                    assert!(min > 1.0 - 1e-9, "{rows}x{cols} r0={r0} phi={phi}: min eigenvalue {min}");
                }
            }
        }
    }
}

#[test]
fn conditionals_match_dense_schur_complement() {
    let lat_dims = [[2, 2], [3, 3], [4, 4], [2, 4]];
    let mut state = 0x5eed_u64;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
    };
    for dims in lat_dims {
        for r0 in RADII {
            for phi in [0.5, 10.0] {
                let s = structure(&dims, r0, phi);
                let n = s.len();
                let nu = 1.7;
                let q = (DMatrix::identity(n, n) + dense_h(&s) * phi) * nu;
                let x: Vec<f64> = (0..n).map(|_| next()).collect();
                for d in 0..n {
                    let c = s.conditional_params(nu, &x, d);
                    // For a zero-mean Gaussian with precision Q the conditional
                    // mean is -Σ_{j≠d} Q_dj x_j / Q_dd and the precision is Q_dd.
                    let mean: f64 = -(0..n).filter(|&j| j != d).map(|j| q[(d, j)] * x[j]).sum::<f64>() / q[(d, d)];
                    assert!((c.precision - q[(d, d)]).abs() <= 1e-10 * q[(d, d)]);
                    assert!((c.mean - mean).abs() <= 1e-10, "{dims:?} d={d}: {} vs {mean}", c.mean);

                    // Same answer from the covariance: Schur complement of Σ.
                    if n <= 16 {
                        let sigma = q.clone().try_inverse().unwrap();
                        let others: Vec<usize> = (0..n).filter(|&j| j != d).collect();
                        let s_oo = DMatrix::from_fn(n - 1, n - 1, |a, b| sigma[(others[a], others[b])]);
                        let s_do = DMatrix::from_fn(1, n - 1, |_, b| sigma[(d, others[b])]);
                        let x_o = DMatrix::from_fn(n - 1, 1, |a, _| x[others[a]]);
                        let w = s_do * s_oo.clone().try_inverse().unwrap();
                        let m = (&w * x_o)[(0, 0)];
                        let v = sigma[(d, d)] - (&w * s_do_t(&sigma, d, &others))[(0, 0)];
                        assert!((c.mean - m).abs() <= 1e-8, "schur mean {m} vs {}", c.mean);
                        assert!((1.0 / c.precision - v).abs() <= 1e-8 * v.max(1.0));
                    }
                }
            }
        }
    }
}

fn s_do_t(sigma: &DMatrix<f64>, d: usize, others: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(others.len(), 1, |a, _| sigma[(others[a], d)])
}

#[test]
fn quad_form_matches_dense() {
    let s = structure(&[5, 6], 2.0, 3.0);
    let n = s.len();
    let x: Vec<f64> = (0..n).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
    let xv = DMatrix::from_column_slice(n, 1, &x);
    let q = DMatrix::identity(n, n) + dense_h(&s) * 3.0;
    let dense = (xv.transpose() * q * &xv)[(0, 0)];
    assert!((s.quad_form(&x) - dense).abs() <= 1e-9 * dense.abs());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn h_is_symmetric_with_zero_row_sums(
        rows in 1usize..7,
        cols in 1usize..7,
        depth in 0usize..3,
        r0 in 0.5f64..3.0,
    ) {
        let dims: Vec<usize> = if depth == 0 { vec![rows, cols] } else { vec![rows, cols, depth] };
        let s = structure(&dims, r0, 1.0);
        let h = dense_h(&s);
        for i in 0..s.len() {
            let row_sum: f64 = h.row(i).iter().sum();
            prop_assert!(row_sum.abs() < 1e-12);
            for j in 0..s.len() {
                prop_assert_eq!(h[(i, j)], h[(j, i)]);
            }
        }
    }
}
