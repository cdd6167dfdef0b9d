//! Seeded random instances shared by integration and acceptance tests.
#![allow(dead_code)]

use rand::Rng;
use tlpq_core::circuit::{Circuit, Pauli, PauliString};
use tlpq_core::linalg::{c64, expm_hermitian, CMatrix, C64};
use tlpq_core::partition::CircuitGraph;
use tlpq_core::planner::{Branch, ChannelLCU, FactorTerm, FactorizedUnitary, PartObservable, Subtask};

pub fn random_c64<R: Rng>(rng: &mut R) -> C64 {
    c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

pub fn random_hermitian<R: Rng>(rng: &mut R, dim: usize) -> CMatrix {
    let mut g = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            g[(i, j)] = random_c64(rng);
        }
    }
    (&g + &g.adjoint()).scale(c64(0.5, 0.0))
}

/// exp(−i·3H) for a random Hermitian H; spreads well over the unitary group.
pub fn random_unitary<R: Rng>(rng: &mut R, n_qubits: usize) -> CMatrix {
    expm_hermitian(&random_hermitian(rng, 1 << n_qubits), 3.0).expect("Hermitian")
}

pub fn random_circuit<R: Rng>(rng: &mut R, n_qubits: usize) -> Circuit {
    Circuit::from_unitary(random_unitary(rng, n_qubits)).expect("unitary")
}

pub fn random_pauli<R: Rng>(rng: &mut R, n: usize) -> PauliString {
    PauliString::new((0..n).map(|_| Pauli::ALL[rng.gen_range(0..4)]).collect())
}

pub fn random_label<R: Rng>(rng: &mut R, n: usize) -> String {
    (0..n).map(|_| if rng.gen_bool(0.5) { '1' } else { '0' }).collect()
}

pub fn random_observable<R: Rng>(rng: &mut R, n: usize) -> PartObservable {
    if rng.gen_bool(0.5) {
        PartObservable::Pauli(random_pauli(rng, n))
    } else {
        PartObservable::Unitary(random_unitary(rng, n))
    }
}

/// Channel with q ≤ 2 branches, m ≤ 2 unitaries each, ℓ ≤ 3 product terms,
/// two parts of width ≤ 2, plus matching inputs and observables.
pub fn random_channel_instance<R: Rng>(rng: &mut R) -> (ChannelLCU, Vec<String>, Vec<PartObservable>) {
    let widths = [rng.gen_range(1..=2), rng.gen_range(1..=2)];
    let q = rng.gen_range(1..=2);
    let m = rng.gen_range(1..=2);
    let branches = (0..q)
        .map(|_| Branch {
            coeffs: (0..m).map(|_| random_c64(rng)).collect(),
            unitaries: (0..m)
                .map(|_| {
                    let ell = rng.gen_range(1..=3);
                    let terms = (0..ell)
                        .map(|_| FactorTerm {
                            coeff: random_c64(rng),
                            parts: widths.iter().map(|&w| random_circuit(rng, w)).collect(),
                        })
                        .collect();
                    FactorizedUnitary::new(terms).expect("consistent widths")
                })
                .collect(),
        })
        .collect();
    let ch = ChannelLCU::new(branches, false).expect("valid channel");
    let inputs = widths.iter().map(|&w| random_label(rng, w)).collect();
    let obs = widths.iter().map(|&w| random_observable(rng, w)).collect();
    (ch, inputs, obs)
}

/// Estimator subtask on up to `max_width` qubits.
pub fn random_subtask<R: Rng>(rng: &mut R, max_width: usize) -> Subtask {
    let w = rng.gen_range(1..=max_width);
    Subtask {
        id: 0,
        indices: [0; 6],
        left: random_circuit(rng, w),
        right: random_circuit(rng, w),
        obs: random_observable(rng, w),
        input: random_label(rng, w),
        coeff: c64(1.0, 0.0),
    }
}

/// Connected multigraph on `n` vertices: a random spanning tree plus extra
/// edges, weights 1..=3.
pub fn random_connected_graph<R: Rng>(rng: &mut R, n: usize) -> CircuitGraph {
    let mut edges = Vec::new();
    for v in 1..n {
        edges.push((rng.gen_range(0..v), v, rng.gen_range(1..=3)));
    }
    for _ in 0..rng.gen_range(0..=n) {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u != v {
            edges.push((u, v, rng.gen_range(1..=3)));
        }
    }
    CircuitGraph::from_edges(n, &edges)
}

/// Minimum cut weight by enumerating every bipartition with vertex 0 in part 0.
pub fn brute_force_min_cut(g: &CircuitGraph) -> usize {
    let n = g.n_vertices();
    (1..(1u32 << (n - 1)))
        .map(|mask| {
            let labels: Vec<u8> = (0..n).map(|v| if v == 0 { 0 } else { ((mask >> (v - 1)) & 1) as u8 }).collect();
            g.cut_from_parts(labels).expect("non-empty parts").weight()
        })
        .min()
        .expect("n ≥ 2")
}
