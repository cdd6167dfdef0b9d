mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tlpq_core::circuit::{circuit_unitary, Circuit, Gate};
use tlpq_core::factorize::*;
use tlpq_core::linalg::{c64, kron, CMatrix, CVector};
use tlpq_core::partition::build_graph;

use common::{random_c64, random_hermitian, random_unitary};

fn cz() -> CMatrix {
    Gate::cz(0, 1).matrix().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn schmidt_resums_random_gates(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_unitary(&mut rng, 2);
        let lcu = operator_schmidt(&u).unwrap();
        prop_assert!(lcu.ell() <= 4);
        prop_assert_eq!(lcu.ell(), schmidt_rank(&u).unwrap());
        prop_assert!(lcu.resum().max_abs_diff(&u) < 1e-10);
        for t in lcu.terms() {
            prop_assert_eq!(t.factors.len(), 2);
        }
    }

    #[test]
    fn product_gates_have_rank_one(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = kron(&random_unitary(&mut rng, 1), &random_unitary(&mut rng, 1));
        let lcu = operator_schmidt(&u).unwrap();
        prop_assert_eq!(lcu.ell(), 1);
        prop_assert!(lcu.resum().max_abs_diff(&u) < 1e-10);
    }

    #[test]
    fn controlled_phases_have_rank_two_with_unitary_factors(phi in 0.05f64..6.2) {
        let g = Circuit::new(2).with(Gate::h(1)).with(Gate::cz(0, 1)).with(Gate::h(1));
        let cnot_like = circuit_unitary(&g).unwrap();
        let mut cp = CMatrix::identity(4);
        cp[(3, 3)] = c64(phi.cos(), phi.sin());
        for u in [cp, cnot_like] {
            let lcu = operator_schmidt(&u).unwrap();
            prop_assert_eq!(lcu.ell(), 2);
            prop_assert_eq!(lcu.method(), LcuMethod::Schmidt);
            prop_assert!(lcu.resum().max_abs_diff(&u) < 1e-10);
            for t in lcu.terms() {
                for f in &t.factors {
                    prop_assert!(f.is_unitary(1e-9));
                }
            }
        }
    }

    #[test]
    fn cz_quasi_decomposition_is_exact(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = CVector::from_vec((0..4).map(|_| random_c64(&mut rng)).collect()).normalized().unwrap();
        let rho = &psi.outer().scale(c64(0.5, 0.0)) + &random_hermitian(&mut rng, 4).scale(c64(0.1, 0.0));
        let want = &(&cz() * &rho) * &cz();
        prop_assert!(cz_cutting_decomposition().apply(&rho).max_abs_diff(&want) < 1e-10);
    }

    #[test]
    fn layered_expansion_resums(seed in any::<u64>(), crossings in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = Circuit::new(4);
        for _ in 0..crossings {
            for q in 0..4 {
                c.push(Gate::ry(q, rng.gen_range(-3.0..3.0))).unwrap();
            }
            c.push(Gate::cz(0, 1)).unwrap();
            c.push(Gate::cnot(3, 2)).unwrap();
            let (a, b) = if rng.gen_bool(0.5) { (1, 2) } else { (0, 3) };
            c.push(if rng.gen_bool(0.5) { Gate::cz(a, b) } else { Gate::cnot(b, a) }).unwrap();
        }
        let cut = build_graph(&c).unwrap().cut_from_parts(vec![0, 0, 1, 1]).unwrap();
        for mode in [CrossingLcu::OperatorSchmidt, CrossingLcu::CnotPauli] {
            let d = match expand_layered_with(&c, &cut, mode) {
                Ok(d) => d,
                Err(FactorizeError::UnsupportedCrossingGate { .. }) => continue,
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            };
            prop_assert_eq!(d.cut_gates().len(), crossings);
            prop_assert_eq!(d.term_count(), d.ells().iter().product::<usize>());
            prop_assert!(d.resum_unitary().unwrap().max_abs_diff(&circuit_unitary(&c).unwrap()) < 1e-9);
        }
    }
}

#[test]
fn cnot_pauli_form() {
    let lcu = cnot_pauli_lcu();
    assert_eq!((lcu.ell(), lcu.method()), (4, LcuMethod::Pauli));
    assert!(lcu.resum().max_abs_diff(&Gate::cnot(0, 1).matrix().unwrap()) < 1e-12);
}

#[test]
fn quasi_overhead() {
    let d = cz_cutting_decomposition();
    assert_eq!(d.len(), 10);
    assert!((d.sampling_overhead() - 5.0).abs() < 1e-12);
}

#[test]
fn rejects_non_unitary_input() {
    assert!(matches!(operator_schmidt(&CMatrix::zeros(4, 4)), Err(FactorizeError::NotUnitary(_))));
    assert!(matches!(operator_schmidt(&CMatrix::identity(2)), Err(FactorizeError::NotTwoQubit(2, 2))));
}
