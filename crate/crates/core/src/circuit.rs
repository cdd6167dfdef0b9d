//! Circuit IR, exact statevector and density-matrix simulation, Pauli
//! observables and ASAP layering.
//!
//! Qubit 0 is the most significant bit of a basis-state label, so on three
//! qubits `|q0 q1 q2⟩ = |1 0 0⟩` is index 4. Multi-qubit gate matrices follow
//! the same rule over their own qubit list.

use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{c64, kron, paulis, CMatrix, CVector, C64, UNITARY_TOL};

/// Largest register `circuit_unitary` will build.
pub const MAX_UNITARY_QUBITS: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid gate: {0}")]
    InvalidGate(String),
    #[error("qubit {qubit} out of range for a {n}-qubit circuit")]
    QubitOutOfRange { qubit: usize, n: usize },
    #[error("{0} qubits exceeds the dense unitary limit of {MAX_UNITARY_QUBITS}")]
    TooLarge(usize),
    #[error("non-unitary gate {0:?} cannot run on the statevector path")]
    NonUnitary(GateKind),
    #[error("invalid pauli string {0:?}")]
    InvalidPauli(String),
    #[error("expectation has imaginary residue {0:.3e}")]
    NonRealExpectation(f64),
}

#[allow(clippy::upper_case_acronyms)]
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    I,
    X,
    Y,
    Z,
    H,
    S,
    T,
    RX,
    RY,
    RZ,
    PHASE,
    CZ,
    CNOT,
    /// Arbitrary unitary on `qubits`, given explicitly.
    RAW,
    /// Local Kraus map ρ ↦ Σ K ρ K†; density-matrix path only.
    KRAUS,
}

impl GateKind {
    fn fixed_arity(self) -> Option<usize> {
        match self {
            GateKind::CZ | GateKind::CNOT => Some(2),
            GateKind::RAW | GateKind::KRAUS => None,
            _ => Some(1),
        }
    }

    fn param_count(self) -> usize {
        match self {
            GateKind::RX | GateKind::RY | GateKind::RZ | GateKind::PHASE => 1,
            _ => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    kind: GateKind,
    qubits: Vec<usize>,
    params: Vec<f64>,
    raw: Option<CMatrix>,
    kraus: Vec<CMatrix>,
}

impl Gate {
    /// Builds and validates a gate of a named (non-matrix) kind.
    pub fn new(kind: GateKind, qubits: Vec<usize>, params: Vec<f64>) -> Result<Gate, CircuitError> {
        if matches!(kind, GateKind::RAW | GateKind::KRAUS) {
            return Err(CircuitError::InvalidGate(format!("{kind:?} needs explicit matrices")));
        }
        let g = Gate { kind, qubits, params, raw: None, kraus: Vec::new() };
        g.validate()?;
        Ok(g)
    }

    fn fixed(kind: GateKind, qubits: Vec<usize>, params: Vec<f64>) -> Gate {
        Gate::new(kind, qubits, params).expect("well-formed built-in gate")
    }

    pub fn raw(qubits: Vec<usize>, matrix: CMatrix) -> Result<Gate, CircuitError> {
        let g = Gate { kind: GateKind::RAW, qubits, params: vec![], raw: Some(matrix), kraus: Vec::new() };
        g.validate()?;
        Ok(g)
    }

    pub fn kraus(qubits: Vec<usize>, operators: Vec<CMatrix>) -> Result<Gate, CircuitError> {
        let g = Gate { kind: GateKind::KRAUS, qubits, params: vec![], raw: None, kraus: operators };
        g.validate()?;
        Ok(g)
    }

    pub fn i(q: usize) -> Gate {
        Self::fixed(GateKind::I, vec![q], vec![])
    }
    pub fn x(q: usize) -> Gate {
        Self::fixed(GateKind::X, vec![q], vec![])
    }
    pub fn y(q: usize) -> Gate {
        Self::fixed(GateKind::Y, vec![q], vec![])
    }
    pub fn z(q: usize) -> Gate {
        Self::fixed(GateKind::Z, vec![q], vec![])
    }
    pub fn h(q: usize) -> Gate {
        Self::fixed(GateKind::H, vec![q], vec![])
    }
    pub fn s(q: usize) -> Gate {
        Self::fixed(GateKind::S, vec![q], vec![])
    }
    pub fn t(q: usize) -> Gate {
        Self::fixed(GateKind::T, vec![q], vec![])
    }
    pub fn rx(q: usize, theta: f64) -> Gate {
        Self::fixed(GateKind::RX, vec![q], vec![theta])
    }
    pub fn ry(q: usize, theta: f64) -> Gate {
        Self::fixed(GateKind::RY, vec![q], vec![theta])
    }
    pub fn rz(q: usize, theta: f64) -> Gate {
        Self::fixed(GateKind::RZ, vec![q], vec![theta])
    }
    pub fn phase(q: usize, phi: f64) -> Gate {
        Self::fixed(GateKind::PHASE, vec![q], vec![phi])
    }
    pub fn cz(control: usize, target: usize) -> Gate {
        Self::fixed(GateKind::CZ, vec![control, target], vec![])
    }
    pub fn cnot(control: usize, target: usize) -> Gate {
        Self::fixed(GateKind::CNOT, vec![control, target], vec![])
    }

    pub fn kind(&self) -> GateKind {
        self.kind
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn raw_matrix(&self) -> Option<&CMatrix> {
        self.raw.as_ref()
    }

    pub fn kraus_operators(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn arity(&self) -> usize {
        self.qubits.len()
    }

    pub fn is_unitary_kind(&self) -> bool {
        self.kind != GateKind::KRAUS
    }

    /// Same gate acting on relabelled qubits.
    pub fn remapped(&self, map: impl Fn(usize) -> usize) -> Gate {
        Gate { qubits: self.qubits.iter().map(|&q| map(q)).collect(), ..self.clone() }
    }

    fn validate(&self) -> Result<(), CircuitError> {
        let arity = self.qubits.len();
        if arity == 0 {
            return Err(CircuitError::InvalidGate(format!("{:?} acts on no qubits", self.kind)));
        }
        if let Some(expected) = self.kind.fixed_arity() {
            if arity != expected {
                return Err(CircuitError::InvalidGate(format!(
                    "{:?} expects {expected} qubit(s), got {arity}",
                    self.kind
                )));
            }
        }
        if self.params.len() != self.kind.param_count() {
            return Err(CircuitError::InvalidGate(format!(
                "{:?} expects {} parameter(s), got {}",
                self.kind,
                self.kind.param_count(),
                self.params.len()
            )));
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(CircuitError::InvalidGate("non-finite gate parameter".into()));
        }
        for (k, q) in self.qubits.iter().enumerate() {
            if self.qubits[..k].contains(q) {
                return Err(CircuitError::InvalidGate(format!("qubit {q} repeated in {:?}", self.kind)));
            }
        }
        let dim = 1usize << arity;
        match self.kind {
            GateKind::RAW => {
                let m = self.raw.as_ref().ok_or_else(|| CircuitError::InvalidGate("RAW without matrix".into()))?;
                if m.rows() != dim || m.cols() != dim {
                    return Err(CircuitError::InvalidGate(format!(
                        "RAW matrix is {}x{} for {arity} qubit(s)",
                        m.rows(),
                        m.cols()
                    )));
                }
                let residual = m.unitarity_residual();
                if residual >= UNITARY_TOL {
                    return Err(CircuitError::InvalidGate(format!("RAW matrix not unitary ({residual:.3e})")));
                }
            }
            GateKind::KRAUS => {
                if self.kraus.is_empty() {
                    return Err(CircuitError::InvalidGate("KRAUS map with no operators".into()));
                }
                if self.kraus.iter().any(|k| k.rows() != dim || k.cols() != dim) {
                    return Err(CircuitError::InvalidGate("KRAUS operator has wrong dimension".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Matrix of a unitary gate over its own qubit list.
    pub fn matrix(&self) -> Result<CMatrix, CircuitError> {
        let one = c64(1.0, 0.0);
        let zero = c64(0.0, 0.0);
        let m = match self.kind {
            GateKind::I => CMatrix::identity(2),
            GateKind::X => paulis::x(),
            GateKind::Y => paulis::y(),
            GateKind::Z => paulis::z(),
            GateKind::H => paulis::hadamard(),
            GateKind::S => CMatrix::from_diag(&[one, c64(0.0, 1.0)]),
            GateKind::T => CMatrix::from_diag(&[one, C64::from_polar(1.0, FRAC_PI_4)]),
            GateKind::RX => {
                let (s, c) = (self.params[0] / 2.0).sin_cos();
                CMatrix::from_vec(2, 2, vec![c64(c, 0.0), c64(0.0, -s), c64(0.0, -s), c64(c, 0.0)]).unwrap()
            }
            GateKind::RY => {
                let (s, c) = (self.params[0] / 2.0).sin_cos();
                CMatrix::from_real(2, 2, &[c, -s, s, c])
            }
            GateKind::RZ => {
                let half = self.params[0] / 2.0;
                CMatrix::from_diag(&[C64::from_polar(1.0, -half), C64::from_polar(1.0, half)])
            }
            GateKind::PHASE => CMatrix::from_diag(&[one, C64::from_polar(1.0, self.params[0])]),
            GateKind::CZ => CMatrix::from_diag(&[one, one, one, -one]),
            GateKind::CNOT => CMatrix::from_vec(
                4,
                4,
                vec![
                    one, zero, zero, zero, //
                    zero, one, zero, zero, //
                    zero, zero, zero, one, //
                    zero, zero, one, zero,
                ],
            )
            .unwrap(),
            GateKind::RAW => self.raw.clone().expect("validated RAW gate"),
            GateKind::KRAUS => return Err(CircuitError::NonUnitary(GateKind::KRAUS)),
        };
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Circuit {
        Circuit { n_qubits, gates: Vec::new() }
    }

    pub fn from_gates(n_qubits: usize, gates: Vec<Gate>) -> Result<Circuit, CircuitError> {
        let mut c = Circuit::new(n_qubits);
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    pub fn push(&mut self, gate: Gate) -> Result<&mut Self, CircuitError> {
        if let Some(&q) = gate.qubits.iter().find(|&&q| q >= self.n_qubits) {
            return Err(CircuitError::QubitOutOfRange { qubit: q, n: self.n_qubits });
        }
        self.gates.push(gate);
        Ok(self)
    }

    /// Appends a gate known to be in range; panics otherwise.
    pub fn with(mut self, gate: Gate) -> Circuit {
        self.push(gate).expect("gate within circuit width");
        self
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn is_unitary(&self) -> bool {
        self.gates.iter().all(Gate::is_unitary_kind)
    }

    /// Single-RAW-gate circuit wrapping a unitary on all qubits.
    pub fn from_unitary(u: CMatrix) -> Result<Circuit, CircuitError> {
        let n = qubits_for_dim(u.rows())?;
        Circuit::from_gates(n, vec![Gate::raw((0..n).collect(), u)?])
    }

    /// Circuit preparing the computational basis state `label` from |0…0⟩.
    pub fn basis_prep(label: &str) -> Result<Circuit, CircuitError> {
        let mut c = Circuit::new(label.len());
        for (q, ch) in label.chars().enumerate() {
            match ch {
                '0' => {}
                '1' => {
                    c.push(Gate::x(q))?;
                }
                _ => return Err(CircuitError::InvalidGate(format!("bad basis label {label:?}"))),
            }
        }
        Ok(c)
    }
}

pub fn qubits_for_dim(dim: usize) -> Result<usize, CircuitError> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(CircuitError::DimensionMismatch(format!("dimension {dim} is not a power of two")));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// Applies a k-qubit operator to a statevector in place.
pub(crate) fn apply_operator(state: &mut [C64], n: usize, qubits: &[usize], op: &CMatrix) {
    let k = qubits.len();
    let sub = 1usize << k;
    let masks: Vec<usize> = qubits.iter().map(|&q| 1usize << (n - 1 - q)).collect();
    let all_mask: usize = masks.iter().sum();
    let offsets: Vec<usize> = (0..sub)
        .map(|s| (0..k).filter(|&b| s & (1 << (k - 1 - b)) != 0).map(|b| masks[b]).sum())
        .collect();
    let mut scratch = vec![C64::new(0.0, 0.0); sub];
    for base in 0..state.len() {
        if base & all_mask != 0 {
            continue;
        }
        for (s, off) in offsets.iter().enumerate() {
            scratch[s] = state[base + off];
        }
        for (r, off) in offsets.iter().enumerate() {
            state[base + off] = op.row(r).iter().zip(&scratch).map(|(a, b)| a * b).sum();
        }
    }
}

/// Embeds a k-qubit operator into the full n-qubit space.
pub(crate) fn embed_operator(n: usize, qubits: &[usize], op: &CMatrix) -> CMatrix {
    let dim = 1usize << n;
    let mut full = CMatrix::zeros(dim, dim);
    for col in 0..dim {
        let mut v = CVector::basis(dim, col);
        apply_operator(v.as_mut_slice(), n, qubits, op);
        for row in 0..dim {
            full[(row, col)] = v[row];
        }
    }
    full
}

/// Applies the circuit's gates in order to `input`.
pub fn simulate(c: &Circuit, input: &CVector) -> Result<CVector, CircuitError> {
    let dim = 1usize << c.n_qubits;
    if input.dim() != dim {
        return Err(CircuitError::DimensionMismatch(format!(
            "state of dim {} for {} qubits",
            input.dim(),
            c.n_qubits
        )));
    }
    let mut state = input.clone();
    for g in &c.gates {
        let m = g.matrix()?;
        apply_operator(state.as_mut_slice(), c.n_qubits, &g.qubits, &m);
    }
    Ok(state)
}

/// Runs the circuit on |0…0⟩⟨0…0| as a density matrix, applying KRAUS maps
/// without renormalization.
pub fn simulate_density(c: &Circuit) -> Result<CMatrix, CircuitError> {
    if c.n_qubits > MAX_UNITARY_QUBITS / 2 {
        return Err(CircuitError::TooLarge(c.n_qubits));
    }
    let dim = 1usize << c.n_qubits;
    let mut rho = CVector::basis(dim, 0).outer();
    for g in &c.gates {
        let ops = match g.kind {
            GateKind::KRAUS => g.kraus.clone(),
            _ => vec![g.matrix()?],
        };
        let mut next = CMatrix::zeros(dim, dim);
        for op in &ops {
            let full = embed_operator(c.n_qubits, &g.qubits, op);
            next = &next + &(&(&full * &rho) * &full.adjoint());
        }
        rho = next;
    }
    Ok(rho)
}

/// Full unitary of a circuit (qubit 0 most significant).
pub fn circuit_unitary(c: &Circuit) -> Result<CMatrix, CircuitError> {
    if c.n_qubits > MAX_UNITARY_QUBITS {
        return Err(CircuitError::TooLarge(c.n_qubits));
    }
    let dim = 1usize << c.n_qubits;
    let mut u = CMatrix::zeros(dim, dim);
    for col in 0..dim {
        let out = simulate(c, &CVector::basis(dim, col))?;
        for row in 0..dim {
            u[(row, col)] = out[row];
        }
    }
    Ok(u)
}

/// Greedy as-soon-as-possible layering. Each layer lists gate indices whose
/// supports are pairwise disjoint.
pub fn layers(c: &Circuit) -> Vec<Vec<usize>> {
    let mut depth_of_qubit = vec![0usize; c.n_qubits];
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (idx, g) in c.gates.iter().enumerate() {
        let layer = g.qubits.iter().map(|&q| depth_of_qubit[q]).max().unwrap_or(0);
        if layer == out.len() {
            out.push(Vec::new());
        }
        out[layer].push(idx);
        for &q in &g.qubits {
            depth_of_qubit[q] = layer + 1;
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> CMatrix {
        match self {
            Pauli::I => paulis::identity(),
            Pauli::X => paulis::x(),
            Pauli::Y => paulis::y(),
            Pauli::Z => paulis::z(),
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    letters: Vec<Pauli>,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>) -> Self {
        PauliString { letters }
    }

    pub fn identity(n: usize) -> Self {
        PauliString { letters: vec![Pauli::I; n] }
    }

    pub fn n_qubits(&self) -> usize {
        self.letters.len()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    pub fn is_identity(&self) -> bool {
        self.letters.iter().all(|&p| p == Pauli::I)
    }

    /// All 4ⁿ strings in lexicographic I < X < Y < Z order.
    pub fn all(n: usize) -> Vec<PauliString> {
        (0..4usize.pow(n as u32))
            .map(|mut idx| {
                let mut letters = vec![Pauli::I; n];
                for slot in letters.iter_mut().rev() {
                    *slot = Pauli::ALL[idx % 4];
                    idx /= 4;
                }
                PauliString { letters }
            })
            .collect()
    }

    pub fn concat(&self, other: &PauliString) -> PauliString {
        PauliString { letters: self.letters.iter().chain(&other.letters).copied().collect() }
    }

    pub fn split_at(&self, k: usize) -> (PauliString, PauliString) {
        let (a, b) = self.letters.split_at(k);
        (PauliString::new(a.to_vec()), PauliString::new(b.to_vec()))
    }

    pub fn matrix(&self) -> CMatrix {
        self.letters.iter().fold(CMatrix::identity(1), |acc, p| kron(&acc, &p.matrix()))
    }

    /// P|v⟩ without building the dense matrix.
    pub fn apply(&self, state: &CVector) -> Result<CVector, CircuitError> {
        let n = self.n_qubits();
        if state.dim() != 1usize << n {
            return Err(CircuitError::DimensionMismatch(format!(
                "{n}-qubit pauli on a state of dim {}",
                state.dim()
            )));
        }
        let mut out = state.clone();
        for (q, p) in self.letters.iter().enumerate() {
            if *p != Pauli::I {
                apply_operator(out.as_mut_slice(), n, &[q], &p.matrix());
            }
        }
        Ok(out)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.letters {
            write!(f, "{}", p.symbol())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = CircuitError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let letters = s
            .chars()
            .map(|ch| match ch.to_ascii_uppercase() {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                _ => Err(CircuitError::InvalidPauli(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        if letters.is_empty() {
            return Err(CircuitError::InvalidPauli(s.to_string()));
        }
        Ok(PauliString { letters })
    }
}

/// ⟨state|P|state⟩ for a normalized state.
pub fn expectation(state: &CVector, p: &PauliString) -> Result<f64, CircuitError> {
    let value = state.inner(&p.apply(state)?);
    if value.im.abs() > 1e-10 {
        return Err(CircuitError::NonRealExpectation(value.im));
    }
    Ok(value.re)
}

/// Tr(ρ·P)
pub fn density_expectation(rho: &CMatrix, p: &PauliString) -> Result<C64, CircuitError> {
    let dim = 1usize << p.n_qubits();
    if rho.rows() != dim || rho.cols() != dim {
        return Err(CircuitError::DimensionMismatch(format!("{}-qubit pauli on {}x{} rho", p.n_qubits(), rho.rows(), rho.cols())));
    }
    let mut total = C64::new(0.0, 0.0);
    // Tr(ρP) = Σ_col (ρ·P)[col, col] = Σ_col ⟨col|ρ P|col⟩, and P|col⟩ = phase·|col'⟩.
    for col in 0..dim {
        let image = p.apply(&CVector::basis(dim, col))?;
        let (target, amp) = image
            .as_slice()
            .iter()
            .enumerate()
            .find(|(_, a)| a.norm() > 0.0)
            .map(|(i, a)| (i, *a))
            .expect("pauli maps basis states to basis states");
        total += rho[(col, target)] * amp;
    }
    Ok(total)
}

mod json {
    //! Wire form: `{"n": int, "gates": [{"kind", "qubits", "params", "raw"?, "kraus"?}]}`
    //! with complex numbers as `[re, im]` pairs.

    use super::*;

    pub type JsonMatrix = Vec<Vec<[f64; 2]>>;

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct CircuitJson {
        pub n: usize,
        pub gates: Vec<GateJson>,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct GateJson {
        pub kind: GateKind,
        pub qubits: Vec<usize>,
        #[serde(default)]
        pub params: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub raw: Option<JsonMatrix>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub kraus: Option<Vec<JsonMatrix>>,
    }

    pub fn matrix_to_json(m: &CMatrix) -> JsonMatrix {
        (0..m.rows()).map(|i| m.row(i).iter().map(|z| [z.re, z.im]).collect()).collect()
    }

    pub fn matrix_from_json(rows: &JsonMatrix) -> Result<CMatrix, CircuitError> {
        let rows: Vec<Vec<C64>> = rows.iter().map(|r| r.iter().map(|&[re, im]| c64(re, im)).collect()).collect();
        CMatrix::from_rows(&rows).map_err(|e| CircuitError::InvalidGate(e.to_string()))
    }

    impl From<&Circuit> for CircuitJson {
        fn from(c: &Circuit) -> Self {
            CircuitJson {
                n: c.n_qubits,
                gates: c
                    .gates
                    .iter()
                    .map(|g| GateJson {
                        kind: g.kind,
                        qubits: g.qubits.clone(),
                        params: g.params.clone(),
                        raw: g.raw.as_ref().map(matrix_to_json),
                        kraus: (g.kind == GateKind::KRAUS).then(|| g.kraus.iter().map(matrix_to_json).collect()),
                    })
                    .collect(),
            }
        }
    }

    impl TryFrom<CircuitJson> for Circuit {
        type Error = CircuitError;
        fn try_from(j: CircuitJson) -> Result<Self, Self::Error> {
            let mut c = Circuit::new(j.n);
            for g in j.gates {
                let gate = match g.kind {
                    GateKind::RAW => {
                        let raw = g.raw.ok_or_else(|| CircuitError::InvalidGate("RAW gate without \"raw\"".into()))?;
                        if !g.params.is_empty() || g.kraus.is_some() {
                            return Err(CircuitError::InvalidGate("RAW gate with extra fields".into()));
                        }
                        Gate::raw(g.qubits, matrix_from_json(&raw)?)?
                    }
                    GateKind::KRAUS => {
                        let ops = g.kraus.ok_or_else(|| CircuitError::InvalidGate("KRAUS gate without \"kraus\"".into()))?;
                        if !g.params.is_empty() || g.raw.is_some() {
                            return Err(CircuitError::InvalidGate("KRAUS gate with extra fields".into()));
                        }
                        Gate::kraus(g.qubits, ops.iter().map(matrix_from_json).collect::<Result<_, _>>()?)?
                    }
                    kind => {
                        if g.raw.is_some() || g.kraus.is_some() {
                            return Err(CircuitError::InvalidGate(format!("{kind:?} does not take matrices")));
                        }
                        Gate::new(kind, g.qubits, g.params)?
                    }
                };
                c.push(gate)?;
            }
            Ok(c)
        }
    }
}

pub use json::{matrix_from_json, matrix_to_json, JsonMatrix};

impl Serialize for Circuit {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        json::CircuitJson::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Circuit {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let j = json::CircuitJson::deserialize(deserializer)?;
        Circuit::try_from(j).map_err(serde::de::Error::custom)
    }
}

impl Serialize for PauliString {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The four-qubit GHZ preparation circuit: H on every qubit, then
/// CZ(0,1) H(1) CZ(1,2) H(2) CZ(2,3) H(3).
pub fn ghz4_template() -> Circuit {
    let mut c = Circuit::new(4);
    for q in 0..4 {
        c.push(Gate::h(q)).unwrap();
    }
    for q in 0..3 {
        c.push(Gate::cz(q, q + 1)).unwrap();
        c.push(Gate::h(q + 1)).unwrap();
    }
    c
}

/// (|0…0⟩ + |1…1⟩)/√2
pub fn ghz_state(n: usize) -> CVector {
    let dim = 1usize << n;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = CVector::zeros(dim);
    v[0] = c64(s, 0.0);
    v[dim - 1] = c64(s, 0.0);
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hadamard_on_zero() {
        let c = Circuit::new(1).with(Gate::h(0));
        let out = simulate(&c, &CVector::basis(2, 0)).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(out.max_abs_diff(&CVector::from_vec(vec![c64(s, 0.), c64(s, 0.)])) < 1e-15);
    }

    #[test]
    fn empty_circuit_is_identity() {
        let v = CVector::from_vec(vec![c64(0.6, 0.), c64(0., 0.8)]);
        assert_eq!(simulate(&Circuit::new(1), &v).unwrap(), v);
    }

    #[test]
    fn ghz_template_prepares_ghz() {
        let out = simulate(&ghz4_template(), &CVector::basis(16, 0)).unwrap();
        assert!(out.max_abs_diff(&ghz_state(4)) < 1e-12);
        let u = circuit_unitary(&ghz4_template()).unwrap();
        assert!(u.mul_vec(&CVector::basis(16, 0)).max_abs_diff(&out) < 1e-12);
    }

    #[test]
    fn pauli_expectations() {
        let zero = CVector::basis(2, 0);
        assert_eq!(expectation(&zero, &"Z".parse().unwrap()).unwrap(), 1.0);
        let plus = simulate(&Circuit::new(1).with(Gate::h(0)), &zero).unwrap();
        assert!((expectation(&plus, &"X".parse().unwrap()).unwrap() - 1.0).abs() < 1e-15);
        let ghz = ghz_state(4);
        for (p, v) in [("XXXX", 1.0), ("ZZII", 1.0), ("ZIII", 0.0), ("IIII", 1.0)] {
            assert!((expectation(&ghz, &p.parse().unwrap()).unwrap() - v).abs() < 1e-12, "{p}");
        }
    }

    #[test]
    fn unitary_of_small_circuits() {
        let u = circuit_unitary(&Circuit::new(1).with(Gate::h(0))).unwrap();
        assert!(u.max_abs_diff(&paulis::hadamard()) < 1e-15);
        let u = circuit_unitary(&Circuit::new(2).with(Gate::cnot(0, 1))).unwrap();
        let perm = CMatrix::from_real(4, 4, &[1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0.]);
        assert_eq!(u, perm);
        assert!(matches!(circuit_unitary(&Circuit::new(13)), Err(CircuitError::TooLarge(13))));
    }

    #[test]
    fn cnot_control_order_matters() {
        // Control on qubit 1, target qubit 0: |01⟩ → |11⟩.
        let c = Circuit::new(2).with(Gate::cnot(1, 0));
        let out = simulate(&c, &CVector::basis(4, 0b01)).unwrap();
        assert_eq!(out, CVector::basis(4, 0b11));
    }

    #[test]
    fn layering() {
        let l = layers(&ghz4_template());
        assert_eq!(l[0], vec![0, 1, 2, 3]);
        assert_eq!(layers(&Circuit::new(1).with(Gate::h(0))), vec![vec![0]]);
        let two = Circuit::new(2).with(Gate::h(0)).with(Gate::cz(0, 1));
        assert_eq!(layers(&two), vec![vec![0], vec![1]]);
    }

    #[test]
    fn invalid_gates_rejected() {
        assert!(Gate::new(GateKind::CZ, vec![0], vec![]).is_err());
        assert!(Gate::new(GateKind::CZ, vec![1, 1], vec![]).is_err());
        assert!(Gate::new(GateKind::RX, vec![0], vec![]).is_err());
        assert!(Gate::raw(vec![0], CMatrix::from_real(2, 2, &[1., 1., 0., 1.])).is_err());
        assert!(matches!(
            Circuit::new(2).push(Gate::h(2)),
            Err(CircuitError::QubitOutOfRange { qubit: 2, n: 2 })
        ));
    }

    #[test]
    fn json_round_trip_and_strictness() {
        let mut c = ghz4_template();
        c.push(Gate::rx(0, 0.3)).unwrap();
        c.push(Gate::raw(vec![2], paulis::y()).unwrap()).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        let back: Circuit = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);

        let unknown = r#"{"n":1,"gates":[{"kind":"H","qubits":[0],"params":[],"color":"red"}]}"#;
        assert!(serde_json::from_str::<Circuit>(unknown).is_err());
        let out_of_range = r#"{"n":1,"gates":[{"kind":"H","qubits":[3]}]}"#;
        assert!(serde_json::from_str::<Circuit>(out_of_range).is_err());
    }

    #[test]
    fn density_path_matches_statevector_for_unitaries() {
        let rho = simulate_density(&ghz4_template()).unwrap();
        assert!(rho.max_abs_diff(&ghz_state(4).outer()) < 1e-12);
    }

    #[test]
    fn kraus_projector_is_not_renormalized() {
        let p0 = CMatrix::from_real(2, 2, &[1., 0., 0., 0.]);
        let c = Circuit::new(1).with(Gate::h(0)).with(Gate::kraus(vec![0], vec![p0]).unwrap());
        let rho = simulate_density(&c).unwrap();
        assert!((rho.trace().re - 0.5).abs() < 1e-15);
        assert!(simulate(&c, &CVector::basis(2, 0)).is_err());
    }

    #[test]
    fn density_expectation_matches_dense_trace() {
        let rho = simulate_density(&ghz4_template()).unwrap();
        for p in PauliString::all(4).iter().step_by(7) {
            let dense = (&rho * &p.matrix()).trace();
            assert!((density_expectation(&rho, p).unwrap() - dense).norm() < 1e-12);
        }
    }
}
