use std::sync::Arc;

use proptest::prelude::*;
use tlpq_core::lchs::*;
use tlpq_core::linalg::{c64, paulis, CMatrix, CVector};
use tlpq_core::runtime::ClusterConfig;

fn oracle_energy(gamma: f64, t: f64) -> f64 {
    let h = imaginary_time_hamiltonian(gamma);
    let u = trotter_oracle(&h.scale(c64(0.0, -1.0)), &CVector::basis(2, 0), t, 0.01).unwrap();
    u.quadratic_form(&h).re / u.norm().powi(2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quadrature_is_symmetric(eps in 0.05f64..0.5, c in 0.3f64..2.0, t in 0.2f64..2.0, emulate in any::<bool>()) {
        let q = match QuadratureScheme::build(eps, c, t, emulate) {
            Ok(q) => q,
            Err(LchsError::DegenerateQuadrature(_)) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        prop_assert_eq!(q.nodes.len(), q.m + 1);
        for j in 0..=q.m {
            prop_assert_eq!(q.coeffs[j], q.coeffs[q.m - j]);
            prop_assert_eq!(q.nodes[j], -q.nodes[q.m - j]);
        }
        let k = q.k_cut as f64;
        let integral = 2.0 * k.atan() / std::f64::consts::PI;
        let h = 2.0 * k / q.m as f64;
        let bound = 2.0 * k * h * h / 12.0 * (2.0 / std::f64::consts::PI);
        prop_assert!((q.coeff_sum() - integral).abs() <= bound + 1e-12);
    }

    #[test]
    fn nodes_are_unitary(k in -5.0f64..5.0, t in 0.1f64..1.5) {
        let u = unitary_node(&nonhermitian_system(), k, t, 0.01).unwrap();
        prop_assert!(u.is_unitary(1e-10));
    }

    #[test]
    fn generator_json_round_trips(gamma in -2.0f64..2.0) {
        let g = GeneratorSpec::constant(paulis::x(), imaginary_time_hamiltonian(gamma)).unwrap();
        let u0 = CVector::basis(2, 1);
        let (back, v) = generator_from_json(&generator_to_json(&g, &u0)).unwrap();
        prop_assert_eq!(back.h, g.h);
        prop_assert_eq!(back.l, g.l);
        prop_assert_eq!(v, u0);
    }
}

fn eps_errors(c: f64, t: f64) -> Vec<f64> {
    let g = nonhermitian_system();
    let u0 = CVector::basis(2, 0);
    let oracle = trotter_oracle(&g.a_matrix(), &u0, t, 0.01).unwrap();
    [0.4, 0.2, 0.1]
        .iter()
        .map(|&eps| {
            let q = QuadratureScheme::build(eps, c, t, false).unwrap();
            lchs_state(&g, &u0, &q, 0.01).unwrap().state.max_abs_diff(&oracle)
        })
        .collect()
}

#[test]
fn halving_eps_reduces_error() {
    for (c, t) in [(0.5, 1.0), (1.0, 0.5), (1.0, 1.0)] {
        let e = eps_errors(c, t);
        assert!(e[0] > e[1] && e[1] > e[2], "c={c} T={t}: {e:?}");
    }
}

#[test]
fn truncation_error_is_not_monotone_everywhere() {
    // K = ⌊c/ε⌋ jumps 1 → 2 while the tail phase oscillates with T.
    let e = eps_errors(0.5, 0.5);
    assert!(e[1] > e[0] && e[2] < e[1], "{e:?}");
}

#[test]
fn bridge_matches_dense_sum() {
    let g = nonhermitian_system();
    let u0 = CVector::basis(2, 0);
    let q = QuadratureScheme::build(0.2, 0.5, 0.5, false).unwrap();
    for normalize in [true, false] {
        for o in [paulis::y(), paulis::z(), &paulis::x() + &paulis::z()] {
            let dense = lchs_expectation(&g, &u0, &q, &o, normalize, 0.01).unwrap();
            let tlp = lchs_expectation_tlp(&g, "0", &q, &o, normalize, 0.01, &ClusterConfig::local(4)).unwrap();
            assert!((dense - tlp).abs() < 1e-9);
        }
    }
}

#[test]
fn imaginary_time_energy_decreases() {
    for k in 1..=10 {
        let gamma = 0.2 * k as f64;
        let e: Vec<f64> = [0.5, 1.0, 1.5].iter().map(|&t| oracle_energy(gamma, t)).collect();
        assert!(e[0] >= e[1] && e[1] >= e[2], "gamma={gamma}: {e:?}");
        assert!(e[2] >= 2.0 - gamma - 1e-12);
    }
}

#[test]
fn dissipation_shrinks_the_norm() {
    let a = nonhermitian_system().a_matrix();
    let u0 = CVector::basis(2, 0);
    let norms: Vec<f64> = (1..=10).map(|k| trotter_oracle(&a, &u0, 0.1 * k as f64, 0.01).unwrap().norm()).collect();
    assert!(norms.windows(2).all(|w| w[1] <= w[0]), "{norms:?}");
}

#[test]
fn node_sign_convention_does_not_matter() {
    let q = QuadratureScheme::build(0.3, 1.0, 0.5, false).unwrap();
    let u0 = CVector::basis(2, 0);
    for gamma in [0.4, 1.2] {
        let h = imaginary_time_hamiltonian(gamma);
        let plus = imaginary_time(&h, &u0, &q, 0.01).unwrap().state;
        let flipped = GeneratorSpec::constant(CMatrix::zeros(2, 2), h.scale(c64(-1.0, 0.0))).unwrap();
        let minus = lchs_state(&flipped, &u0, &q, 0.01).unwrap().state;
        assert!(plus.max_abs_diff(&minus) < 1e-14);
    }
}

#[test]
fn ground_energies() {
    for (gamma, e0) in [(0.6, 1.4), (2.0, 0.0), (0.0, 2.0)] {
        assert!((exact_ground(&imaginary_time_hamiltonian(gamma)).unwrap().0 - e0).abs() < 1e-14);
    }
}

#[test]
fn time_dependent_midpoint_is_exact_for_commuting_linear_drive() {
    let f: GeneratorFn = Arc::new(|s| (paulis::x().scale(c64(1.0 + s, 0.0)), CMatrix::zeros(2, 2)));
    let g = GeneratorSpec::time_dependent(f).unwrap();
    assert!(g.is_time_dependent());
    let t = 0.8;
    let u = unitary_node(&g, 0.3, t, 0.01).unwrap();
    let want = tlpq_core::linalg::expm_hermitian(&paulis::x(), t + t * t / 2.0).unwrap();
    assert!(u.max_abs_diff(&want) < 1e-10);
}

#[test]
fn invalid_inputs() {
    assert!(matches!(QuadratureScheme::build(0.0, 0.5, 1.0, false), Err(LchsError::InvalidParameter(_))));
    assert!(matches!(QuadratureScheme::build(0.2, 0.1, 1.0, false), Err(LchsError::DegenerateQuadrature(0))));
    assert!(GeneratorSpec::constant(paulis::y().scale(c64(0.0, 1.0)), CMatrix::zeros(2, 2)).is_err());
    assert!(generator_from_json(r#"{"H":[[[0,0]]],"L":[[[0,0]]],"u0":[[1,0],[0,0]]}"#).is_err());
}
