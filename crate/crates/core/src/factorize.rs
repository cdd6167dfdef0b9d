//! Two-part gate and channel decompositions: the CNOT Pauli LCU, unitary
//! operator-Schmidt factorization, the CZ cutting quasi-decomposition, and
//! expansion of a cut circuit into per-part tensor terms.

use std::f64::consts::{FRAC_PI_4, PI};

use thiserror::Error;

use crate::circuit::{circuit_unitary, Circuit, CircuitError, Gate, GateKind, Pauli};
use crate::linalg::{c64, kron, paulis, CMatrix, C64, UNITARY_TOL};
use crate::partition::CutAssignment;

const SINGULAR_TOL: f64 = 1e-10;
const RESUM_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FactorizeError {
    #[error("gate is not unitary (residual {0:.3e})")]
    NotUnitary(f64),
    #[error("expected a 4x4 matrix, got {0}x{1}")]
    NotTwoQubit(usize, usize),
    #[error("gate {gate_index} ({kind:?}) cannot be split across the cut")]
    UnsupportedCrossingGate { gate_index: usize, kind: GateKind },
    #[error("cut does not match the circuit: {0}")]
    InvalidCut(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LcuTerm {
    pub coeff: C64,
    /// One unitary per part; `factors[0]` acts on the gate's first qubit.
    pub factors: Vec<CMatrix>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LcuMethod {
    Pauli,
    Schmidt,
}

/// A two-qubit gate as Σ coeff · (A ⊗ B) with unitary A, B.
#[derive(Clone, Debug, PartialEq)]
pub struct GateLCU {
    terms: Vec<LcuTerm>,
    method: LcuMethod,
}

impl GateLCU {
    pub fn terms(&self) -> &[LcuTerm] {
        &self.terms
    }

    pub fn ell(&self) -> usize {
        self.terms.len()
    }

    pub fn method(&self) -> LcuMethod {
        self.method
    }

    pub fn parts(&self) -> usize {
        2
    }

    pub fn resum(&self) -> CMatrix {
        self.terms.iter().fold(CMatrix::zeros(4, 4), |acc, t| {
            &acc + &kron(&t.factors[0], &t.factors[1]).scale(t.coeff)
        })
    }
}

/// CNOT = ½(I⊗I + Z⊗I + I⊗X − Z⊗X), control first.
pub fn cnot_pauli_lcu() -> GateLCU {
    let half = c64(0.5, 0.0);
    let (i, x, z) = (paulis::identity(), paulis::x(), paulis::z());
    let terms = vec![
        LcuTerm { coeff: half, factors: vec![i.clone(), i.clone()] },
        LcuTerm { coeff: half, factors: vec![z.clone(), i.clone()] },
        LcuTerm { coeff: half, factors: vec![i, x.clone()] },
        LcuTerm { coeff: -half, factors: vec![z, x] },
    ];
    GateLCU { terms, method: LcuMethod::Pauli }
}

fn check_two_qubit_unitary(gate: &CMatrix) -> Result<(), FactorizeError> {
    if gate.rows() != 4 || gate.cols() != 4 {
        return Err(FactorizeError::NotTwoQubit(gate.rows(), gate.cols()));
    }
    let residual = gate.unitarity_residual();
    if residual >= UNITARY_TOL {
        return Err(FactorizeError::NotUnitary(residual));
    }
    Ok(())
}

/// Operator-Schmidt pieces: σ_s with A_s ⊗ B_s, each of unit Frobenius norm.
fn schmidt_pieces(gate: &CMatrix) -> Vec<(f64, CMatrix, CMatrix)> {
    // R[(i j), (k l)] = G[(i k), (j l)]
    let mut r = CMatrix::zeros(4, 4);
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    r[(2 * i + j, 2 * k + l)] = gate[(2 * i + k, 2 * j + l)];
                }
            }
        }
    }
    let svd = r.to_nalgebra().svd(true, true);
    let u = svd.u.expect("left singular vectors");
    let v_t = svd.v_t.expect("right singular vectors");
    let mut pieces: Vec<(f64, CMatrix, CMatrix)> = (0..4)
        .filter(|&s| svd.singular_values[s] > SINGULAR_TOL)
        .map(|s| {
            let mut a = CMatrix::zeros(2, 2);
            let mut b = CMatrix::zeros(2, 2);
            for p in 0..2 {
                for q in 0..2 {
                    a[(p, q)] = u[(2 * p + q, s)];
                    b[(p, q)] = v_t[(s, 2 * p + q)];
                }
            }
            (svd.singular_values[s], a, b)
        })
        .collect();
    pieces.sort_by(|x, y| y.0.total_cmp(&x.0));
    pieces
}

/// Number of operator-Schmidt coefficients above 1e-10.
pub fn schmidt_rank(gate: &CMatrix) -> Result<usize, FactorizeError> {
    if gate.rows() != 4 || gate.cols() != 4 {
        return Err(FactorizeError::NotTwoQubit(gate.rows(), gate.cols()));
    }
    Ok(schmidt_pieces(gate).len())
}

/// ‖X†X − tr(X†X)/2·I‖²; zero exactly when X is proportional to a unitary.
fn non_unitarity(x: &CMatrix) -> f64 {
    let g = &x.adjoint() * x;
    let half_tr = g.trace().re / 2.0;
    let d = &g - &CMatrix::identity(2).scale(c64(half_tr, 0.0));
    d.as_slice().iter().map(|z| z.norm_sqr()).sum()
}

/// Mixes a degenerate pair (A1,A2),(B1,B2) by a unitary that leaves
/// A1⊗B1 + A2⊗B2 invariant.
fn rotate_pair(pair: &[(f64, CMatrix, CMatrix); 2], theta: f64, phi: f64) -> [(CMatrix, CMatrix); 2] {
    let (s, c) = theta.sin_cos();
    let e = C64::from_polar(1.0, phi);
    let (a1, a2) = (&pair[0].1, &pair[1].1);
    let (b1, b2) = (&pair[0].2, &pair[1].2);
    let cc = c64(c, 0.0);
    [
        (&a1.scale(cc) + &a2.scale(e * s), &b1.scale(cc) + &b2.scale(e.conj() * s)),
        (&a2.scale(cc) - &a1.scale(e.conj() * s), &b2.scale(cc) - &b1.scale(e * s)),
    ]
}

fn pair_objective(pair: &[(f64, CMatrix, CMatrix); 2], theta: f64, phi: f64) -> f64 {
    rotate_pair(pair, theta, phi)
        .iter()
        .map(|(a, b)| non_unitarity(a) + non_unitarity(b))
        .sum()
}

fn unitarize_pair(pair: &[(f64, CMatrix, CMatrix); 2]) -> Option<[(CMatrix, CMatrix); 2]> {
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for ti in 0..=32 {
        let theta = ti as f64 * PI / 64.0;
        for pj in 0..64 {
            let phi = pj as f64 * PI / 32.0;
            let f = pair_objective(pair, theta, phi);
            if f < best.0 {
                best = (f, theta, phi);
            }
        }
    }
    let (mut f, mut theta, mut phi) = best;
    let mut step = PI / 64.0;
    while step > 1e-16 && f > 0.0 {
        let mut moved = false;
        for (dt, dp) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
            let trial = pair_objective(pair, theta + dt, phi + dp);
            if trial < f {
                (f, theta, phi) = (trial, theta + dt, phi + dp);
                moved = true;
            }
        }
        if !moved {
            step /= 2.0;
        }
    }
    (f < 1e-24).then(|| rotate_pair(pair, theta, phi))
}

/// Scales a near-unitary-proportional factor to a unitary, returning the scale.
fn normalize_factor(x: &CMatrix) -> (f64, CMatrix) {
    let norm = ((&x.adjoint() * x).trace().re / 2.0).sqrt();
    (norm, x.scale(c64(1.0 / norm, 0.0)))
}

fn schmidt_lcu(gate: &CMatrix) -> Option<GateLCU> {
    let pieces = schmidt_pieces(gate);
    let mut blocks: Vec<Vec<(f64, CMatrix, CMatrix)>> = Vec::new();
    for piece in pieces {
        match blocks.last_mut() {
            Some(block) if (block[0].0 - piece.0).abs() < SINGULAR_TOL => block.push(piece),
            _ => blocks.push(vec![piece]),
        }
    }
    let mut terms = Vec::new();
    for block in blocks {
        let sigma = block[0].0;
        let factor_pairs: Vec<(CMatrix, CMatrix)> =
            if block.iter().all(|(_, a, b)| non_unitarity(a) < 1e-24 && non_unitarity(b) < 1e-24) {
                block.into_iter().map(|(_, a, b)| (a, b)).collect()
            } else if block.len() == 2 {
                let pair: [(f64, CMatrix, CMatrix); 2] = block.try_into().ok()?;
                unitarize_pair(&pair)?.into()
            } else {
                return None;
            };
        for (a, b) in factor_pairs {
            let (na, ua) = normalize_factor(&a);
            let (nb, ub) = normalize_factor(&b);
            terms.push(LcuTerm { coeff: c64(sigma * na * nb, 0.0), factors: vec![ua, ub] });
        }
    }
    let lcu = GateLCU { terms, method: LcuMethod::Schmidt };
    let ok = lcu.resum().max_abs_diff(gate) < RESUM_TOL
        && lcu.terms.iter().flat_map(|t| &t.factors).all(|f| f.is_unitary(UNITARY_TOL));
    ok.then_some(lcu)
}

fn pauli_lcu(gate: &CMatrix) -> GateLCU {
    let mut terms = Vec::new();
    for p in Pauli::ALL {
        for q in Pauli::ALL {
            let pq = kron(&p.matrix(), &q.matrix());
            let coeff = (gate * &pq.adjoint()).trace() / 4.0;
            if coeff.norm() > SINGULAR_TOL {
                terms.push(LcuTerm { coeff, factors: vec![p.matrix(), q.matrix()] });
            }
        }
    }
    GateLCU { terms, method: LcuMethod::Pauli }
}

/// Minimal-term split of a two-qubit unitary into unitary local factors
/// across (qubit 0 | qubit 1). Degenerate Schmidt pairs are rotated toward
/// unitary factors; when no unitary Schmidt form exists the Pauli expansion
/// is returned instead.
pub fn operator_schmidt(gate: &CMatrix) -> Result<GateLCU, FactorizeError> {
    check_two_qubit_unitary(gate)?;
    Ok(schmidt_lcu(gate).unwrap_or_else(|| pauli_lcu(gate)))
}

/// Strategy for replacing crossing gates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CrossingLcu {
    #[default]
    OperatorSchmidt,
    /// CNOTs use the four-term Pauli LCU; everything else uses Schmidt.
    CnotPauli,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuasiTerm {
    pub coeff: f64,
    /// Per part, a Kraus list applied as ρ ↦ Σ K ρ K†.
    pub maps: Vec<Vec<CMatrix>>,
}

/// Σ coeff · (map_a ⊗ map_b) reproducing a two-qubit gate channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelQuasiDecomposition {
    terms: Vec<QuasiTerm>,
}

impl ChannelQuasiDecomposition {
    pub fn terms(&self) -> &[QuasiTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Σ|coeff|
    pub fn sampling_overhead(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.abs()).sum()
    }

    /// Applies the decomposition to a two-qubit density operator.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(4, 4);
        for t in &self.terms {
            let mut acc = CMatrix::zeros(4, 4);
            for ka in &t.maps[0] {
                for kb in &t.maps[1] {
                    let k = kron(ka, kb);
                    acc = &acc + &(&(&k * rho) * &k.adjoint());
                }
            }
            out = &out + &acc.scale(c64(t.coeff, 0.0));
        }
        out
    }
}

/// e^{iθZ}
fn z_phase(theta: f64) -> CMatrix {
    CMatrix::from_diag(&[C64::from_polar(1.0, theta), C64::from_polar(1.0, -theta)])
}

/// (I + αZ)/2
fn z_projector(alpha: i32) -> CMatrix {
    if alpha > 0 {
        CMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, 0.0])
    } else {
        CMatrix::from_real(2, 2, &[0.0, 0.0, 0.0, 1.0])
    }
}

/// Ten-term local quasi-decomposition of the CZ channel:
///
/// ½ 𝒰(π/4)⊗𝒰(π/4) + ½ 𝒰(−π/4)⊗𝒰(−π/4)
///   − ½ Σ_α α₁α₂ [𝒫_{α₁}⊗𝒰((α₂+1)π/4) + 𝒰((α₁+1)π/4)⊗𝒫_{α₂}]
///
/// with 𝒰(θ) conjugation by e^{iθZ} and 𝒫_α projection onto (I+αZ)/2.
pub fn cz_cutting_decomposition() -> ChannelQuasiDecomposition {
    let phase_angle = |alpha: i32| f64::from(alpha + 1) * FRAC_PI_4;
    let mut terms = vec![
        QuasiTerm { coeff: 0.5, maps: vec![vec![z_phase(FRAC_PI_4)], vec![z_phase(FRAC_PI_4)]] },
        QuasiTerm { coeff: 0.5, maps: vec![vec![z_phase(-FRAC_PI_4)], vec![z_phase(-FRAC_PI_4)]] },
    ];
    let signs = [(1, 1), (1, -1), (-1, 1), (-1, -1)];
    for (a1, a2) in signs {
        terms.push(QuasiTerm {
            coeff: -0.5 * f64::from(a1 * a2),
            maps: vec![vec![z_projector(a1)], vec![z_phase(phase_angle(a2))]],
        });
    }
    for (a1, a2) in signs {
        terms.push(QuasiTerm {
            coeff: -0.5 * f64::from(a1 * a2),
            maps: vec![vec![z_phase(phase_angle(a1))], vec![z_projector(a2)]],
        });
    }
    ChannelQuasiDecomposition { terms }
}

#[derive(Clone, Debug, PartialEq)]
enum Segment {
    Local { part: usize, gate: Gate },
    Crossing { lcu: usize, local_qubits: [(usize, usize); 2] },
}

/// One tensor term of a cut circuit.
#[derive(Clone, Debug, PartialEq)]
pub struct LayeredTerm {
    /// Per crossing gate, the chosen LCU term index.
    pub indices: Vec<usize>,
    pub coeff: C64,
    /// Local circuits on each part's qubits (relabelled 0..width).
    pub parts: Vec<Circuit>,
}

/// A circuit with every crossing gate replaced by its LCU, yielding
/// Π ℓ_t product terms.
#[derive(Clone, Debug, PartialEq)]
pub struct LayeredDecomposition {
    n_qubits: usize,
    part_qubits: [Vec<usize>; 2],
    segments: Vec<Segment>,
    cut_gates: Vec<(usize, GateLCU)>,
}

impl LayeredDecomposition {
    /// `(gate index, LCU)` for each crossing gate in circuit order.
    pub fn cut_gates(&self) -> &[(usize, GateLCU)] {
        &self.cut_gates
    }

    pub fn part_qubits(&self) -> &[Vec<usize>; 2] {
        &self.part_qubits
    }

    pub fn ells(&self) -> Vec<usize> {
        self.cut_gates.iter().map(|(_, l)| l.ell()).collect()
    }

    pub fn term_count(&self) -> usize {
        self.cut_gates.iter().map(|(_, l)| l.ell()).product()
    }

    /// Mixed-radix index of the `flat`-th term; the first crossing gate is
    /// the most significant digit.
    pub fn term_indices(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.cut_gates.len()];
        for (slot, (_, lcu)) in idx.iter_mut().zip(&self.cut_gates).rev() {
            *slot = flat % lcu.ell();
            flat /= lcu.ell();
        }
        idx
    }

    pub fn term(&self, flat: usize) -> LayeredTerm {
        assert!(flat < self.term_count(), "term {flat} out of range");
        let indices = self.term_indices(flat);
        let mut coeff = c64(1.0, 0.0);
        let mut parts: Vec<Circuit> = self.part_qubits.iter().map(|q| Circuit::new(q.len())).collect();
        for seg in &self.segments {
            match seg {
                Segment::Local { part, gate } => {
                    parts[*part].push(gate.clone()).expect("local gate in range");
                }
                Segment::Crossing { lcu, local_qubits, .. } => {
                    let term = &self.cut_gates[*lcu].1.terms()[indices[*lcu]];
                    coeff *= term.coeff;
                    for (factor, &(part, q)) in term.factors.iter().zip(local_qubits) {
                        let g = Gate::raw(vec![q], factor.clone()).expect("unitary factor");
                        parts[part].push(g).expect("local qubit in range");
                    }
                }
            }
        }
        LayeredTerm { indices, coeff, parts }
    }

    /// All terms in lexicographic index order.
    pub fn terms(&self) -> impl Iterator<Item = LayeredTerm> + Clone + '_ {
        (0..self.term_count()).map(move |k| self.term(k))
    }

    /// Σ coeff · (U_a ⊗ U_b) mapped back onto the original qubit order.
    pub fn resum_unitary(&self) -> Result<CMatrix, FactorizeError> {
        let dim = 1usize << self.n_qubits;
        let mut total = CMatrix::zeros(dim, dim);
        for term in self.terms() {
            let mut global = Circuit::new(self.n_qubits);
            for (part, local) in term.parts.iter().enumerate() {
                for g in local.gates() {
                    global.push(g.remapped(|q| self.part_qubits[part][q]))?;
                }
            }
            total = &total + &circuit_unitary(&global)?.scale(term.coeff);
        }
        Ok(total)
    }
}

pub fn expand_layered(c: &Circuit, cut: &CutAssignment) -> Result<LayeredDecomposition, FactorizeError> {
    expand_layered_with(c, cut, CrossingLcu::OperatorSchmidt)
}

pub fn expand_layered_with(
    c: &Circuit,
    cut: &CutAssignment,
    strategy: CrossingLcu,
) -> Result<LayeredDecomposition, FactorizeError> {
    let part_of = cut.part_of();
    if part_of.len() != c.n_qubits() {
        return Err(FactorizeError::InvalidCut(format!(
            "cut covers {} qubits, circuit has {}",
            part_of.len(),
            c.n_qubits()
        )));
    }
    let part_qubits = [cut.part(0), cut.part(1)];
    if part_qubits.iter().any(Vec::is_empty) {
        return Err(FactorizeError::InvalidCut("empty part".into()));
    }
    let local_index = |q: usize| part_qubits[part_of[q] as usize].binary_search(&q).expect("qubit in its part");

    let mut segments = Vec::new();
    let mut cut_gates = Vec::new();
    for (idx, gate) in c.gates().iter().enumerate() {
        let parts: Vec<usize> = gate.qubits().iter().map(|&q| part_of[q] as usize).collect();
        if parts.iter().all(|&p| p == parts[0]) {
            segments.push(Segment::Local { part: parts[0], gate: gate.remapped(local_index) });
            continue;
        }
        let unsupported = FactorizeError::UnsupportedCrossingGate { gate_index: idx, kind: gate.kind() };
        if gate.arity() != 2 || !gate.is_unitary_kind() {
            return Err(unsupported);
        }
        let lcu = match (strategy, gate.kind()) {
            (CrossingLcu::CnotPauli, GateKind::CNOT) => cnot_pauli_lcu(),
            _ => operator_schmidt(&gate.matrix()?)?,
        };
        let q = gate.qubits();
        segments.push(Segment::Crossing {
            lcu: cut_gates.len(),
            local_qubits: [(parts[0], local_index(q[0])), (parts[1], local_index(q[1]))],
        });
        cut_gates.push((idx, lcu));
    }
    Ok(LayeredDecomposition { n_qubits: c.n_qubits(), part_qubits, segments, cut_gates })
}
