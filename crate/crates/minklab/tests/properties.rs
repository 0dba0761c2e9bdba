//! Property-based invariants across the lattice, minima, haar, and siegel
//! modules.

use minklab::haar::iwasawa_decompose;
use minklab::intmat;
use minklab::lattice::{is_unimodular_integer_matrix, operator_norm, LatticeBasis};
use minklab::mat::Mat;
use minklab::minima::{partial_minima, successive_minima};
use minklab::siegel::{f_hat_k, DEFAULT_ENUM_BUDGET};
use proptest::prelude::*;

fn entry() -> impl Strategy<Value = f64> {
    (-20i32..=20).prop_map(|k| k as f64 / 10.0)
}

/// Well-conditioned random bases with entries in [-2, 2].
fn basis_strategy(d: usize) -> impl Strategy<Value = LatticeBasis> {
    prop::collection::vec(prop::collection::vec(entry(), d), d).prop_filter_map(
        "valid and well conditioned",
        move |cols| {
            let basis = LatticeBasis::new(cols).ok()?;
            let eig = basis.gram().entries().symmetric_eigenvalues();
            ((eig[d - 1] / eig[0]).sqrt() < 30.0).then_some(basis)
        },
    )
}

fn dim_and_basis() -> impl Strategy<Value = LatticeBasis> {
    prop_oneof![basis_strategy(2), basis_strategy(3), basis_strategy(4)]
}

/// Random matrix scaled to determinant +1.
fn sl_matrix(d: usize) -> impl Strategy<Value = Mat> {
    prop::collection::vec(prop::collection::vec(entry(), d), d).prop_filter_map(
        "invertible",
        move |rows| {
            let mut m = Mat::from_rows(&rows);
            let det = m.det();
            if det.abs() < 0.05 {
                return None;
            }
            if det < 0.0 {
                for i in 0..d {
                    m[(i, 0)] = -m[(i, 0)];
                }
            }
            let scale = m.det().powf(-1.0 / d as f64);
            Some(m.scale(scale))
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dual_covolume_product_is_one(basis in dim_and_basis()) {
        let dual = basis.dual().unwrap();
        let prod = basis.covolume() * dual.covolume();
        prop_assert!((prod - 1.0).abs() < 1e-9);
        // and the dual of the dual spans the original lattice
        prop_assert!(basis.same_lattice(&dual.dual().unwrap()));
    }

    #[test]
    fn dual_commutes_with_linear_maps(basis in basis_strategy(3), t in sl_matrix(3)) {
        let lhs = basis.transform(&t).unwrap().dual().unwrap();
        let rhs = basis.dual().unwrap().transform(&t.inverse().unwrap().transpose()).unwrap();
        prop_assert!(rhs.same_lattice(&lhs));
    }

    #[test]
    fn dual_pairing_is_integral(basis in dim_and_basis(), seed_coeffs in prop::collection::vec(-4i64..=4, 8)) {
        let d = basis.dim();
        let dual = basis.dual().unwrap();
        let v = basis.vector(seed_coeffs[..d].to_vec());
        let w = dual.vector(seed_coeffs[4..4 + d].to_vec());
        let dot: f64 = v.embedding.iter().zip(&w.embedding).map(|(a, b)| a * b).sum();
        prop_assert!((dot - dot.round()).abs() < 1e-6, "pairing {dot} not integral");
    }

    #[test]
    fn operator_norm_bounds_minima(basis in basis_strategy(3), b in sl_matrix(3)) {
        let lam = successive_minima(&basis).unwrap().values;
        let moved = basis.transform(&b).unwrap();
        let lam_moved = successive_minima(&moved).unwrap().values;
        let op = operator_norm(&b);
        for i in 0..3 {
            prop_assert!(lam_moved[i] <= op * lam[i] + 1e-9);
        }
    }

    #[test]
    fn minima_are_continuous(basis in basis_strategy(3), rows in prop::collection::vec(prop::collection::vec(entry(), 3), 3)) {
        // perturbation b = I + eps E with ||E||_op <= 1
        let mut e = Mat::from_rows(&rows);
        let norm = operator_norm(&e);
        if norm > 1e-9 {
            e = e.scale(1.0 / norm);
        }
        let lam = successive_minima(&basis).unwrap().values;
        let cap = 2.0 * operator_norm(&basis.matrix()) * 3.0;
        for eps in [1e-2, 1e-3, 1e-4] {
            let moved = basis.transform(&Mat::identity(3).add(&e.scale(eps))).unwrap();
            let lam_eps = successive_minima(&moved).unwrap().values;
            for i in 0..3 {
                prop_assert!((lam_eps[i] - lam[i]).abs() <= cap * eps + 1e-12);
            }
        }
    }

    #[test]
    fn minima_scale_linearly(basis in dim_and_basis(), s in 1u32..40) {
        let s = s as f64 / 10.0;
        let lam = successive_minima(&basis).unwrap().values;
        let scaled = successive_minima(&basis.scaled(s).unwrap()).unwrap().values;
        for (a, b) in lam.iter().zip(&scaled) {
            prop_assert!((s * a - b).abs() < 1e-9 * (1.0 + s * a));
        }
    }

    #[test]
    fn iwasawa_reconstructs(g in sl_matrix(3)) {
        let coords = iwasawa_decompose(&g).unwrap();
        prop_assert!(coords.reconstruct().frobenius_dist(&g) < 1e-9);
        prop_assert!((coords.k.det() - 1.0).abs() < 1e-9);
        let prod: f64 = coords.a.iter().product();
        prop_assert!((prod - 1.0).abs() < 1e-12);
    }

    #[test]
    fn counting_transform_is_monotone_in_radius(basis in basis_strategy(2), r in 2u32..12) {
        let r = r as f64 / 4.0;
        let small = f_hat_k(&basis, 1, r, DEFAULT_ENUM_BUDGET).unwrap();
        let large = f_hat_k(&basis, 1, r + 0.25, DEFAULT_ENUM_BUDGET).unwrap();
        prop_assert!(large >= small);
    }

    #[test]
    fn primitivity_is_basis_independent(rows in prop::collection::vec(prop::collection::vec(-5i64..=5, 3), 2), shear in -3i64..=3) {
        // a unimodular change of basis leaves the elementary divisors alone
        let u = [
            vec![1, shear, 0],
            vec![0, 1, shear],
            vec![0, 0, 1],
        ];
        let transformed: Vec<Vec<i64>> = rows
            .iter()
            .map(|r| {
                (0..3)
                    .map(|j| (0..3).map(|k| r[k] * u[k][j]).sum())
                    .collect()
            })
            .collect();
        prop_assert_eq!(
            intmat::primitive_system(&rows),
            intmat::primitive_system(&transformed)
        );
    }

    #[test]
    fn minima_are_rotation_invariant(basis in basis_strategy(2), angle in 0u32..360) {
        let theta = f64::from(angle).to_radians();
        let k = Mat::from_rows(&[
            vec![theta.cos(), -theta.sin()],
            vec![theta.sin(), theta.cos()],
        ]);
        let lam = partial_minima(&basis, 2).unwrap().values;
        let rot = partial_minima(&basis.transform(&k).unwrap(), 2).unwrap().values;
        for (a, b) in lam.iter().zip(&rot) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn lattice_equality_is_change_of_basis(basis in basis_strategy(3), shear in -4i64..=4) {
        let u = vec![
            vec![1, 0, shear],
            vec![shear, 1, 0],
            vec![0, 0, 1],
        ];
        let changed = basis.change_basis(&u).unwrap();
        prop_assert!(basis.same_lattice(&changed));
        let m = basis.matrix().inverse().unwrap().mul(&changed.matrix());
        prop_assert!(is_unimodular_integer_matrix(&m));
    }
}
