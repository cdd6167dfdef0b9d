//! Factorized subtask enumeration, single-ancilla estimator synthesis, the
//! GHZ overlap and cutting plans, and their reconstructions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{
    circuit_unitary, density_expectation, ghz4_template, qubits_for_dim, Circuit, CircuitError, Gate, Pauli,
    PauliString,
};
use crate::factorize::{cz_cutting_decomposition, expand_layered, ChannelQuasiDecomposition, FactorizeError, LayeredDecomposition};
use crate::linalg::{c64, clip_to_physical, eigh, kron, CMatrix, CVector, LinalgError, C64};
use crate::partition::{build_graph, CutAssignment, PartitionError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("observable is not unitary (residual {0:.3e})")]
    NonUnitaryObservable(f64),
    #[error("incomplete tables: {0}")]
    IncompleteTables(String),
    #[error("reconstructed state is not physical (min eigenvalue {0:.3e})")]
    NonPhysical(f64),
    #[error("missing result for task {0}")]
    MissingResult(usize),
    #[error("invalid readout {0:?}")]
    InvalidReadout(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Factorize(#[from] FactorizeError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// One product term of a factorized unitary.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorTerm {
    pub coeff: C64,
    pub parts: Vec<Circuit>,
}

/// Σ_α coeff_α ⊗ₐ U^a_α
#[derive(Clone, Debug, PartialEq)]
pub struct FactorizedUnitary {
    terms: Vec<FactorTerm>,
}

impl FactorizedUnitary {
    pub fn new(terms: Vec<FactorTerm>) -> Result<Self, PlanError> {
        let first = terms.first().ok_or_else(|| PlanError::ShapeMismatch("no terms".into()))?;
        let widths: Vec<usize> = first.parts.iter().map(Circuit::n_qubits).collect();
        if widths.is_empty() {
            return Err(PlanError::ShapeMismatch("term with no parts".into()));
        }
        for t in &terms {
            let w: Vec<usize> = t.parts.iter().map(Circuit::n_qubits).collect();
            if w != widths {
                return Err(PlanError::ShapeMismatch(format!("part widths {w:?} vs {widths:?}")));
            }
            if !t.parts.iter().all(Circuit::is_unitary) {
                return Err(PlanError::ShapeMismatch("part circuit contains a non-unitary map".into()));
            }
        }
        Ok(FactorizedUnitary { terms })
    }

    /// A single product term with coefficient 1.
    pub fn product(parts: Vec<Circuit>) -> Result<Self, PlanError> {
        Self::new(vec![FactorTerm { coeff: c64(1.0, 0.0), parts }])
    }

    pub fn from_layered(d: &LayeredDecomposition) -> Result<Self, PlanError> {
        Self::new(d.terms().map(|t| FactorTerm { coeff: t.coeff, parts: t.parts }).collect())
    }

    pub fn terms(&self) -> &[FactorTerm] {
        &self.terms
    }

    pub fn ell(&self) -> usize {
        self.terms.len()
    }

    pub fn n_parts(&self) -> usize {
        self.terms[0].parts.len()
    }

    pub fn part_widths(&self) -> Vec<usize> {
        self.terms[0].parts.iter().map(Circuit::n_qubits).collect()
    }

    /// Dense operator with part 0 as the most significant factor.
    pub fn dense(&self) -> Result<CMatrix, PlanError> {
        let dim = 1usize << self.part_widths().iter().sum::<usize>();
        let mut total = CMatrix::zeros(dim, dim);
        for t in &self.terms {
            let mut op = CMatrix::identity(1);
            for p in &t.parts {
                op = kron(&op, &circuit_unitary(p)?);
            }
            total = &total + &op.scale(t.coeff);
        }
        Ok(total)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub coeffs: Vec<C64>,
    pub unitaries: Vec<FactorizedUnitary>,
}

/// Φ(ρ) = Σ_p (Σ_i c_{p,i} U_{p,i}) ρ (Σ_j c_{p,j} U_{p,j})†
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelLCU {
    branches: Vec<Branch>,
    cptp_expected: bool,
}

impl ChannelLCU {
    pub fn new(branches: Vec<Branch>, cptp_expected: bool) -> Result<Self, PlanError> {
        let first = branches.first().ok_or_else(|| PlanError::ShapeMismatch("no branches".into()))?;
        let m = first.coeffs.len();
        let widths = first
            .unitaries
            .first()
            .ok_or_else(|| PlanError::ShapeMismatch("empty branch".into()))?
            .part_widths();
        for b in &branches {
            if b.coeffs.len() != m || b.unitaries.len() != m {
                return Err(PlanError::ShapeMismatch(format!(
                    "branch has {} coefficients and {} unitaries, expected m = {m}",
                    b.coeffs.len(),
                    b.unitaries.len()
                )));
            }
            if let Some(u) = b.unitaries.iter().find(|u| u.part_widths() != widths) {
                return Err(PlanError::ShapeMismatch(format!("part widths {:?} vs {widths:?}", u.part_widths())));
            }
        }
        Ok(ChannelLCU { branches, cptp_expected })
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn q(&self) -> usize {
        self.branches.len()
    }

    pub fn m(&self) -> usize {
        self.branches[0].coeffs.len()
    }

    pub fn cptp_expected(&self) -> bool {
        self.cptp_expected
    }

    pub fn part_widths(&self) -> Vec<usize> {
        self.branches[0].unitaries[0].part_widths()
    }

    /// Dense Kraus operators K_p = Σ_i c_{p,i} U_{p,i}.
    pub fn kraus_operators(&self) -> Result<Vec<CMatrix>, PlanError> {
        let dim = 1usize << self.part_widths().iter().sum::<usize>();
        self.branches
            .iter()
            .map(|b| {
                let mut k = CMatrix::zeros(dim, dim);
                for (c, u) in b.coeffs.iter().zip(&b.unitaries) {
                    k = &k + &u.dense()?.scale(*c);
                }
                Ok(k)
            })
            .collect()
    }

    pub fn apply_dense(&self, rho: &CMatrix) -> Result<CMatrix, PlanError> {
        let mut out = CMatrix::zeros(rho.rows(), rho.cols());
        for k in self.kraus_operators()? {
            out = &out + &(&(&k * rho) * &k.adjoint());
        }
        Ok(out)
    }

    /// ‖Σ K†K − I‖_max
    pub fn trace_preservation_residual(&self) -> Result<f64, PlanError> {
        let ks = self.kraus_operators()?;
        let dim = ks[0].rows();
        let sum = ks.iter().fold(CMatrix::zeros(dim, dim), |acc, k| &acc + &(&k.adjoint() * k));
        Ok(sum.max_abs_diff(&CMatrix::identity(dim)))
    }
}

/// Per-part observable: a Pauli string or an explicit unitary.
#[derive(Clone, Debug, PartialEq)]
pub enum PartObservable {
    Pauli(PauliString),
    Unitary(CMatrix),
}

impl PartObservable {
    pub fn width(&self) -> Result<usize, PlanError> {
        match self {
            PartObservable::Pauli(p) => Ok(p.n_qubits()),
            PartObservable::Unitary(u) => Ok(qubits_for_dim(u.rows())?),
        }
    }

    pub fn matrix(&self) -> CMatrix {
        match self {
            PartObservable::Pauli(p) => p.matrix(),
            PartObservable::Unitary(u) => u.clone(),
        }
    }
}

impl From<PauliString> for PartObservable {
    fn from(p: PauliString) -> Self {
        PartObservable::Pauli(p)
    }
}

impl fmt::Display for PartObservable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartObservable::Pauli(p) => write!(f, "{p}"),
            PartObservable::Unitary(u) => write!(f, "U[{}x{}]", u.rows(), u.cols()),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ObservableJson {
    Pauli(String),
    Unitary { raw: crate::circuit::JsonMatrix },
}

impl Serialize for PartObservable {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            PartObservable::Pauli(p) => ObservableJson::Pauli(p.to_string()),
            PartObservable::Unitary(u) => ObservableJson::Unitary { raw: crate::circuit::matrix_to_json(u) },
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PartObservable {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        match ObservableJson::deserialize(deserializer)? {
            ObservableJson::Pauli(s) => s.parse().map(PartObservable::Pauli).map_err(serde::de::Error::custom),
            ObservableJson::Unitary { raw } => crate::circuit::matrix_from_json(&raw)
                .map(PartObservable::Unitary)
                .map_err(serde::de::Error::custom),
        }
    }
}

/// Index tuple (p, i, j, α, α′, a).
pub type SubtaskIndices = [usize; 6];

/// One part overlap ⟨ψᵃ|U^a_{jα′}† Oᵃ U^a_{iα}|ψᵃ⟩ of one sibling group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Subtask {
    pub id: usize,
    pub indices: SubtaskIndices,
    pub left: Circuit,
    pub right: Circuit,
    pub obs: PartObservable,
    pub input: String,
    #[serde(with = "complex_pair")]
    pub coeff: C64,
}

impl Subtask {
    pub fn part(&self) -> usize {
        self.indices[5]
    }
}

pub(crate) mod complex_pair {
    use super::*;

    pub fn serialize<S: serde::Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(c64(re, im))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub subtasks: Vec<Subtask>,
}

impl Plan {
    pub fn parts(&self) -> usize {
        self.subtasks.iter().map(|s| s.part() + 1).max().unwrap_or(0)
    }

    pub fn group_count(&self) -> usize {
        if self.subtasks.is_empty() {
            0
        } else {
            self.subtasks.len() / self.parts()
        }
    }
}

/// Expands Tr(O·Φ(ρ)) into part overlaps in lexicographic (p,i,j,α,α′,a)
/// order. The weight c_{p,i}c*_{p,j}·coeff_α·coeff*_{α′} sits on the a = 0
/// member of each sibling group; the others carry 1.
pub fn enumerate_subtasks(
    ch: &ChannelLCU,
    rho_parts: &[String],
    obs_parts: &[PartObservable],
) -> Result<Plan, PlanError> {
    let widths = ch.part_widths();
    if rho_parts.len() != widths.len() || obs_parts.len() != widths.len() {
        return Err(PlanError::ShapeMismatch(format!(
            "{} parts but {} inputs and {} observables",
            widths.len(),
            rho_parts.len(),
            obs_parts.len()
        )));
    }
    for (a, w) in widths.iter().enumerate() {
        if rho_parts[a].len() != *w || !rho_parts[a].chars().all(|c| c == '0' || c == '1') {
            return Err(PlanError::ShapeMismatch(format!("input {:?} for a {w}-qubit part", rho_parts[a])));
        }
        if obs_parts[a].width()? != *w {
            return Err(PlanError::ShapeMismatch(format!("observable {} for a {w}-qubit part", obs_parts[a])));
        }
    }

    let mut subtasks = Vec::new();
    for (p, branch) in ch.branches.iter().enumerate() {
        for (i, ui) in branch.unitaries.iter().enumerate() {
            for (j, uj) in branch.unitaries.iter().enumerate() {
                let cij = branch.coeffs[i] * branch.coeffs[j].conj();
                for (alpha, ta) in ui.terms.iter().enumerate() {
                    for (alpha2, tb) in uj.terms.iter().enumerate() {
                        let weight = cij * ta.coeff * tb.coeff.conj();
                        for a in 0..widths.len() {
                            subtasks.push(Subtask {
                                id: subtasks.len(),
                                indices: [p, i, j, alpha, alpha2, a],
                                left: ta.parts[a].clone(),
                                right: tb.parts[a].clone(),
                                obs: obs_parts[a].clone(),
                                input: rho_parts[a].clone(),
                                coeff: if a == 0 { weight } else { c64(1.0, 0.0) },
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(Plan { subtasks })
}

/// Σ_groups coeff · Π_a overlap, summed in ascending group order.
pub fn aggregate_overlaps(plan: &Plan, overlaps: &[C64]) -> Result<C64, PlanError> {
    if overlaps.len() < plan.subtasks.len() {
        return Err(PlanError::MissingResult(overlaps.len()));
    }
    let parts = plan.parts().max(1);
    let mut total = c64(0.0, 0.0);
    for group in plan.subtasks.chunks(parts) {
        let mut term = group[0].coeff;
        for s in group {
            term *= overlaps[s.id];
        }
        total += term;
    }
    Ok(total)
}

fn basis_state(label: &str) -> Result<CVector, PlanError> {
    let dim = 1usize << label.len();
    let idx = usize::from_str_radix(label, 2).map_err(|_| PlanError::ShapeMismatch(format!("bad label {label:?}")))?;
    Ok(CVector::basis(dim, idx))
}

/// Tr(O·Φ(ρ)) with ρ = ⊗ₐ|inputᵃ⟩⟨inputᵃ| and O = ⊗ₐ Oᵃ, computed densely.
pub fn dense_channel_expectation(
    ch: &ChannelLCU,
    rho_parts: &[String],
    obs_parts: &[PartObservable],
) -> Result<C64, PlanError> {
    let label: String = rho_parts.concat();
    let rho = basis_state(&label)?.outer();
    let o = obs_parts.iter().fold(CMatrix::identity(1), |acc, ob| kron(&acc, &ob.matrix()));
    Ok((&o * &ch.apply_dense(&rho)?).trace())
}

/// Dense value of one subtask's overlap.
pub fn subtask_overlap_dense(s: &Subtask) -> Result<C64, PlanError> {
    let psi = basis_state(&s.input)?;
    let ui = circuit_unitary(&s.left)?;
    let uj = circuit_unitary(&s.right)?;
    let o = s.obs.matrix();
    Ok(uj.mul_vec(&psi).inner(&o.mul_vec(&ui.mul_vec(&psi))))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AncillaOp {
    I,
    X,
    Y,
    Z,
    /// |0⟩⟨0|
    P0,
    /// |1⟩⟨1|
    P1,
}

impl AncillaOp {
    fn matrix(self) -> CMatrix {
        match self {
            AncillaOp::I => Pauli::I.matrix(),
            AncillaOp::X => Pauli::X.matrix(),
            AncillaOp::Y => Pauli::Y.matrix(),
            AncillaOp::Z => Pauli::Z.matrix(),
            AncillaOp::P0 => CMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            AncillaOp::P1 => CMatrix::from_real(2, 2, &[0.0, 0.0, 0.0, 1.0]),
        }
    }

    fn is_projector(self) -> bool {
        matches!(self, AncillaOp::P0 | AncillaOp::P1)
    }
}

/// A measured quantity. `Pauli` spans the whole register; `Ancilla` is an
/// operator on qubit 0 correlated with a Pauli on the remaining qubits.
///
/// Text form: `"XZ"` or `"P1:ZZ"`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Readout {
    Pauli(PauliString),
    Ancilla { op: AncillaOp, system: PauliString },
}

impl Readout {
    pub fn width(&self) -> usize {
        match self {
            Readout::Pauli(p) => p.n_qubits(),
            Readout::Ancilla { system, .. } => system.n_qubits() + 1,
        }
    }

    pub fn matrix(&self) -> CMatrix {
        match self {
            Readout::Pauli(p) => p.matrix(),
            Readout::Ancilla { op, system } => kron(&op.matrix(), &system.matrix()),
        }
    }

    /// The operator whose expectation is the readout's normalization
    /// (I for Pauli readouts, the bare projector otherwise).
    fn support_matrix(&self) -> CMatrix {
        match self {
            Readout::Ancilla { op, system } if op.is_projector() => {
                kron(&op.matrix(), &CMatrix::identity(1 << system.n_qubits()))
            }
            _ => CMatrix::identity(1 << self.width()),
        }
    }

    pub fn expectation_state(&self, state: &CVector) -> Result<f64, PlanError> {
        self.check_width(state.dim())?;
        Ok(state.quadratic_form(&self.matrix()).re)
    }

    pub fn expectation_density(&self, rho: &CMatrix) -> Result<f64, PlanError> {
        self.check_width(rho.rows())?;
        Ok(match self {
            Readout::Pauli(p) => density_expectation(rho, p)?.re,
            Readout::Ancilla { .. } => (rho * &self.matrix()).trace().re,
        })
    }

    /// Probabilities of outcomes (−1, 0, +1). Outcome 0 covers the branch
    /// rejected by a projector and any trace lost to non-unitary maps.
    pub fn outcome_probabilities_state(&self, state: &CVector) -> Result<[f64; 3], PlanError> {
        self.check_width(state.dim())?;
        let value = self.expectation_state(state)?;
        let support = state.quadratic_form(&self.support_matrix()).re;
        Ok(outcome_split(value, support))
    }

    pub fn outcome_probabilities_density(&self, rho: &CMatrix) -> Result<[f64; 3], PlanError> {
        self.check_width(rho.rows())?;
        let value = self.expectation_density(rho)?;
        let support = (rho * &self.support_matrix()).trace().re;
        Ok(outcome_split(value, support))
    }

    fn check_width(&self, dim: usize) -> Result<(), PlanError> {
        if dim != 1usize << self.width() {
            return Err(PlanError::ShapeMismatch(format!("readout {self} on dimension {dim}")));
        }
        Ok(())
    }
}

fn outcome_split(value: f64, support: f64) -> [f64; 3] {
    let plus = ((support + value) / 2.0).clamp(0.0, 1.0);
    let minus = ((support - value) / 2.0).clamp(0.0, 1.0);
    [minus, (1.0 - plus - minus).max(0.0), plus]
}

impl fmt::Display for Readout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Readout::Pauli(p) => write!(f, "{p}"),
            Readout::Ancilla { op, system } => write!(f, "{op:?}:{system}"),
        }
    }
}

impl FromStr for Readout {
    type Err = PlanError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PlanError::InvalidReadout(s.to_string());
        match s.split_once(':') {
            None => Ok(Readout::Pauli(s.parse().map_err(|_| bad())?)),
            Some((op, system)) => {
                let op = match op {
                    "I" => AncillaOp::I,
                    "X" => AncillaOp::X,
                    "Y" => AncillaOp::Y,
                    "Z" => AncillaOp::Z,
                    "P0" => AncillaOp::P0,
                    "P1" => AncillaOp::P1,
                    _ => return Err(bad()),
                };
                Ok(Readout::Ancilla { op, system: system.parse().map_err(|_| bad())? })
            }
        }
    }
}

impl Serialize for Readout {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Readout {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    /// Pure-state circuit from |0…0⟩; readouts on the final state.
    Estimator,
    /// Density-matrix circuit from |0…0⟩⟨0…0|, possibly non-unitary.
    Density,
}

/// A unit of work for a node: a circuit started from |0…0⟩ and a readout list.
#[derive(Clone, Debug, PartialEq)]
pub struct Task {
    pub id: usize,
    pub kind: TaskKind,
    pub circuit: Circuit,
    pub readout: Vec<Readout>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorCircuit {
    pub circuit: Circuit,
    pub readouts: Vec<Readout>,
}

impl EstimatorCircuit {
    pub fn into_task(self, id: usize) -> Task {
        Task { id, kind: TaskKind::Estimator, circuit: self.circuit, readout: self.readouts }
    }
}

/// diag(U, I) when `on_one` is false, diag(I, U) when true; ancilla is the
/// most significant qubit.
fn controlled_block(u: &CMatrix, on_one: bool) -> CMatrix {
    let d = u.rows();
    let mut m = CMatrix::identity(2 * d);
    let off = if on_one { d } else { 0 };
    for r in 0..d {
        for c in 0..d {
            m[(off + r, off + c)] = u[(r, c)];
        }
    }
    m
}

/// Ancilla-interferometer for ⟨ψ₀|U_{jα′}† O U_{iα}|ψ₀⟩.
///
/// Qubit 0 is the ancilla. After H, the right circuit fires on ancilla |0⟩
/// and the left circuit followed by O on |1⟩, so ⟨σx⟩ + i⟨σy⟩ of the ancilla
/// equals the overlap. With `projectors`, the readouts |0⟩⟨0|⊗O and
/// |1⟩⟨1|⊗O are appended (O must then be a Pauli string); they evaluate to
/// ½⟨U_j†OU_j⟩ and ½⟨U_i†OU_i⟩.
pub fn build_estimator_circuit(s: &Subtask, projectors: bool) -> Result<EstimatorCircuit, PlanError> {
    let w = s.left.n_qubits();
    if s.right.n_qubits() != w || s.input.len() != w || s.obs.width()? != w {
        return Err(PlanError::ShapeMismatch(format!(
            "left {} / right {} / input {} / observable {} qubits",
            s.left.n_qubits(),
            s.right.n_qubits(),
            s.input.len(),
            s.obs
        )));
    }
    let o = s.obs.matrix();
    let residual = o.unitarity_residual();
    if residual >= crate::linalg::UNITARY_TOL {
        return Err(PlanError::NonUnitaryObservable(residual));
    }
    let all: Vec<usize> = (0..=w).collect();
    let mut c = Circuit::new(w + 1);
    for (q, ch) in s.input.chars().enumerate() {
        if ch == '1' {
            c.push(Gate::x(q + 1))?;
        }
    }
    c.push(Gate::h(0))?;
    c.push(Gate::raw(all.clone(), controlled_block(&circuit_unitary(&s.right)?, false))?)?;
    c.push(Gate::raw(all.clone(), controlled_block(&circuit_unitary(&s.left)?, true))?)?;
    c.push(Gate::raw(all, controlled_block(&o, true))?)?;

    let id = PauliString::identity(w);
    let mut readouts = vec![
        Readout::Ancilla { op: AncillaOp::X, system: id.clone() },
        Readout::Ancilla { op: AncillaOp::Y, system: id },
    ];
    if projectors {
        let PartObservable::Pauli(p) = &s.obs else {
            return Err(PlanError::InvalidReadout("projector readouts need a Pauli observable".into()));
        };
        readouts.push(Readout::Ancilla { op: AncillaOp::P0, system: p.clone() });
        readouts.push(Readout::Ancilla { op: AncillaOp::P1, system: p.clone() });
    }
    Ok(EstimatorCircuit { circuit: c, readouts })
}

/// Overlap from the two leading estimator readouts.
pub fn overlap_from_readouts(values: &[f64]) -> Result<C64, PlanError> {
    match values {
        [x, y, ..] => Ok(c64(*x, *y)),
        _ => Err(PlanError::IncompleteTables(format!("{} readout values", values.len()))),
    }
}

/// Estimator tasks for a plan, one per subtask with ids matching.
pub fn plan_tasks(plan: &Plan) -> Result<Vec<Task>, PlanError> {
    plan.subtasks
        .iter()
        .map(|s| Ok(build_estimator_circuit(s, false)?.into_task(s.id)))
        .collect()
}

/// GHZ sign pattern s_{jk} = (−1)^{jk} for 0-based j, k.
pub fn ghz_sign(j: usize, k: usize) -> f64 {
    if j * k % 2 == 1 {
        -1.0
    } else {
        1.0
    }
}

/// Preparation circuits of the two part states of one template.
#[derive(Clone, Debug, PartialEq)]
pub struct GhzTemplate {
    pub name: &'static str,
    /// Prepares the first state from |00⟩.
    pub left: Circuit,
    /// Prepares the second state from |00⟩.
    pub right: Circuit,
}

fn ghz_part_a(second: bool) -> Circuit {
    let mut c = Circuit::new(2).with(Gate::h(0)).with(Gate::h(1)).with(Gate::cz(0, 1)).with(Gate::h(1));
    if second {
        c = c.with(Gate::z(1));
    }
    c
}

fn ghz_part_b(second: bool) -> Circuit {
    let mut c = Circuit::new(2);
    if second {
        c = c.with(Gate::x(0));
    }
    c.with(Gate::h(1)).with(Gate::cz(0, 1)).with(Gate::h(1))
}

/// The two GHZ templates: (a) |φ₁⟩ = (|00⟩+|11⟩)/√2 and |φ₂⟩ = (I⊗Z)|φ₁⟩;
/// (b) |ψ₁⟩ = |00⟩ and |ψ₂⟩ = |11⟩.
pub fn ghz_templates() -> [GhzTemplate; 2] {
    [
        GhzTemplate { name: "a", left: ghz_part_a(false), right: ghz_part_a(true) },
        GhzTemplate { name: "b", left: ghz_part_b(false), right: ghz_part_b(true) },
    ]
}

/// ⟨state_{j′}|M|state_j⟩ for each two-qubit Pauli M in `PauliString::all` order.
#[derive(Clone, Debug, PartialEq)]
pub struct GramTables {
    pub width: usize,
    pub tables: Vec<[[C64; 2]; 2]>,
}

impl GramTables {
    pub fn dense(left: &CVector, right: &CVector) -> Result<GramTables, PlanError> {
        let width = qubits_for_dim(left.dim())?;
        let states = [left, right];
        let tables = PauliString::all(width)
            .iter()
            .map(|p| {
                let mut t = [[c64(0.0, 0.0); 2]; 2];
                for (jp, row) in t.iter_mut().enumerate() {
                    for (j, cell) in row.iter_mut().enumerate() {
                        *cell = states[jp].inner(&p.apply(states[j])?);
                    }
                }
                Ok(t)
            })
            .collect::<Result<_, PlanError>>()?;
        Ok(GramTables { width, tables })
    }
}

/// One estimator circuit per (template, setting) with four readouts.
#[derive(Clone, Debug, PartialEq)]
pub struct GhzOverlapPlan {
    pub templates: [GhzTemplate; 2],
    pub settings: Vec<PauliString>,
}

impl GhzOverlapPlan {
    pub fn circuit_count(&self) -> usize {
        self.templates.len() * self.settings.len()
    }

    pub fn evaluation_count(&self) -> usize {
        self.tasks().iter().map(|t| t.readout.len()).sum()
    }

    /// Task id = template · 16 + setting index.
    pub fn tasks(&self) -> Vec<Task> {
        let mut out = Vec::new();
        for t in &self.templates {
            for m in &self.settings {
                let s = Subtask {
                    id: out.len(),
                    indices: [0; 6],
                    left: t.left.clone(),
                    right: t.right.clone(),
                    obs: PartObservable::Pauli(m.clone()),
                    input: "00".into(),
                    coeff: c64(1.0, 0.0),
                };
                let est = build_estimator_circuit(&s, true).expect("well-formed GHZ subtask");
                out.push(est.into_task(s.id));
            }
        }
        out
    }

    /// Gram tables of both templates from per-task readout values
    /// (⟨σx⟩, ⟨σy⟩, ⟨P0⊗M⟩, ⟨P1⊗M⟩).
    pub fn gram_tables(&self, values: &[Vec<f64>]) -> Result<[GramTables; 2], PlanError> {
        if values.len() != self.circuit_count() {
            return Err(PlanError::IncompleteTables(format!("{} of {} tasks", values.len(), self.circuit_count())));
        }
        let n = self.settings.len();
        let table = |t: usize| -> Result<GramTables, PlanError> {
            let tables = (0..n)
                .map(|k| match values[t * n + k].as_slice() {
                    [x, y, p0, p1] => {
                        let off = c64(*x, *y);
                        Ok([[c64(2.0 * p1, 0.0), off.conj()], [off, c64(2.0 * p0, 0.0)]])
                    }
                    v => Err(PlanError::IncompleteTables(format!("task {} has {} readouts", t * n + k, v.len()))),
                })
                .collect::<Result<_, _>>()?;
            Ok(GramTables { width: 2, tables })
        };
        Ok([table(0)?, table(1)?])
    }
}

pub fn ghz_overlap_plan() -> GhzOverlapPlan {
    GhzOverlapPlan { templates: ghz_templates(), settings: PauliString::all(2) }
}

fn reconstruct_unchecked_inner(a: &GramTables, b: &GramTables) -> Result<CMatrix, PlanError> {
    for (name, t) in [("a", a), ("b", b)] {
        if t.tables.len() != 1usize << (2 * t.width) {
            return Err(PlanError::IncompleteTables(format!(
                "part {name}: {} tables for width {}",
                t.tables.len(),
                t.width
            )));
        }
    }
    let pauli_value = |ta: &[[C64; 2]; 2], tb: &[[C64; 2]; 2]| -> C64 {
        let mut total = c64(0.0, 0.0);
        for j in 0..2 {
            for jp in 0..2 {
                for k in 0..2 {
                    for kp in 0..2 {
                        total += ta[jp][j] * tb[kp][k] * (ghz_sign(j, k) * ghz_sign(jp, kp));
                    }
                }
            }
        }
        total
    };
    let norm = pauli_value(&a.tables[0], &b.tables[0]);
    let n = a.width + b.width;
    let dim = 1usize << n;
    let mut rho = CMatrix::zeros(dim, dim);
    let pa = PauliString::all(a.width);
    let pb = PauliString::all(b.width);
    for (ia, sa) in pa.iter().enumerate() {
        for (ib, sb) in pb.iter().enumerate() {
            let value = pauli_value(&a.tables[ia], &b.tables[ib]) / norm;
            rho = &rho + &sa.concat(sb).matrix().scale(c64(value.re, 0.0));
        }
    }
    Ok(rho.scale(c64(1.0 / dim as f64, 0.0)))
}

/// ρ = 2⁻ⁿ Σ_P ⟨P⟩P with ⟨P_a⊗P_b⟩ = N⁻¹ Σ s_{jk}s_{j′k′} gram_a[P_a][j′,j] gram_b[P_b][k′,k].
pub fn reconstruct_density_matrix(a: &GramTables, b: &GramTables) -> Result<CMatrix, PlanError> {
    let rho = reconstruct_unchecked_inner(a, b)?;
    let min = eigh(&rho)?.values[0];
    if min < -1e-6 {
        return Err(PlanError::NonPhysical(min));
    }
    Ok(rho)
}

/// As [`reconstruct_density_matrix`] without the physicality check; used for
/// finite-shot data.
pub fn reconstruct_density_matrix_unchecked(a: &GramTables, b: &GramTables) -> Result<CMatrix, PlanError> {
    reconstruct_unchecked_inner(a, b)
}

/// Closest physical state (unit trace, PSD) to a finite-shot reconstruction, for
/// fidelity reporting.
pub fn physical_estimate(rho: &CMatrix) -> Result<CMatrix, PlanError> {
    Ok(clip_to_physical(rho)?)
}

/// Ten subcircuit pairs from the CZ quasi-decomposition of the (1,2) cut.
#[derive(Clone, Debug, PartialEq)]
pub struct GhzCuttingPlan {
    pub decomposition: ChannelQuasiDecomposition,
    /// Per quasi term: (coefficient, [part a circuit, part b circuit]).
    pub subcircuits: Vec<(f64, [Circuit; 2])>,
    pub settings: Vec<PauliString>,
}

impl GhzCuttingPlan {
    pub fn setting_count(&self) -> usize {
        self.subcircuits.len() * self.settings.len()
    }

    /// Density tasks; id = 2·term + part.
    pub fn tasks(&self) -> Vec<Task> {
        let readout: Vec<Readout> = self.settings.iter().cloned().map(Readout::Pauli).collect();
        self.subcircuits
            .iter()
            .flat_map(|(_, pair)| pair.iter())
            .enumerate()
            .map(|(id, c)| Task { id, kind: TaskKind::Density, circuit: c.clone(), readout: readout.clone() })
            .collect()
    }

    /// ρ₄ = Σᵢ cᵢ ρᵃᵢ⊗ρᵇᵢ (trace-normalized) from per-task Pauli
    /// expectations Tr(ρ′P).
    pub fn combine(&self, values: &[Vec<f64>]) -> Result<CMatrix, PlanError> {
        let (rho, trace) = self.combine_raw(values)?;
        Ok(rho.scale(c64(1.0 / trace, 0.0)))
    }

    /// Unnormalized combination and its trace.
    pub fn combine_raw(&self, values: &[Vec<f64>]) -> Result<(CMatrix, f64), PlanError> {
        if values.len() != 2 * self.subcircuits.len() {
            return Err(PlanError::IncompleteTables(format!("{} of {} tasks", values.len(), 2 * self.subcircuits.len())));
        }
        let local = |v: &[f64]| -> Result<CMatrix, PlanError> {
            if v.len() != self.settings.len() {
                return Err(PlanError::IncompleteTables(format!("{} of {} settings", v.len(), self.settings.len())));
            }
            let mut rho = CMatrix::zeros(4, 4);
            for (p, x) in self.settings.iter().zip(v) {
                rho = &rho + &p.matrix().scale(c64(x / 4.0, 0.0));
            }
            Ok(rho)
        };
        let mut total = CMatrix::zeros(16, 16);
        for (i, (coeff, _)) in self.subcircuits.iter().enumerate() {
            let ra = local(&values[2 * i])?;
            let rb = local(&values[2 * i + 1])?;
            total = &total + &kron(&ra, &rb).scale(c64(*coeff, 0.0));
        }
        let trace = total.trace().re;
        Ok((total, trace))
    }
}

fn kraus_gate(q: usize, ops: &[CMatrix]) -> Gate {
    Gate::kraus(vec![q], ops.to_vec()).expect("single-qubit Kraus list")
}

/// Cuts CZ(1,2) of the GHZ₄ template with the ten-term quasi-decomposition.
/// Part a holds qubits 0,1 and part b qubits 2,3 (relabelled 0,1).
pub fn ghz_cutting_plan() -> GhzCuttingPlan {
    let decomposition = cz_cutting_decomposition();
    let subcircuits = decomposition
        .terms()
        .iter()
        .map(|t| {
            let a = Circuit::new(2)
                .with(Gate::h(0))
                .with(Gate::h(1))
                .with(Gate::cz(0, 1))
                .with(Gate::h(1))
                .with(kraus_gate(1, &t.maps[0]));
            let b = Circuit::new(2)
                .with(Gate::h(0))
                .with(Gate::h(1))
                .with(kraus_gate(0, &t.maps[1]))
                .with(Gate::h(0))
                .with(Gate::cz(0, 1))
                .with(Gate::h(1));
            (t.coeff, [a, b])
        })
        .collect();
    GhzCuttingPlan { decomposition, subcircuits, settings: PauliString::all(2) }
}

/// Chain circuit on four qubits whose min cut {0,1 | 2,3} crosses `m`
/// CZ(1,2) gates.
pub fn multi_cut_circuit(m: usize) -> Circuit {
    let mut c = ghz4_template();
    for _ in 1..m {
        c.push(Gate::h(2)).unwrap();
        c.push(Gate::cz(1, 2)).unwrap();
    }
    c
}

/// Evaluation counts of the two strategies for a cut circuit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ScalingReport {
    /// Crossing gates m′.
    pub m: usize,
    /// Π ℓ_t of the crossing gates.
    pub ell_product: usize,
    /// Sibling-group subtasks q·m²·ℓ²·𝒜 for one observable.
    pub eq3_subtasks: usize,
    /// 𝒜 · Π ℓ_t estimator circuits × 4 readouts.
    pub tlp_evaluations: usize,
    /// 10^m subcircuit pairs.
    pub cutting_circuits: usize,
    /// 10^m × 16 tomography settings.
    pub cutting_settings: usize,
}

pub fn scaling_report(c: &Circuit, cut: &CutAssignment) -> Result<ScalingReport, PlanError> {
    let d = expand_layered(c, cut)?;
    let m = d.cut_gates().len();
    let ell_product = d.term_count();
    let parts = 2;
    let fu = FactorizedUnitary::from_layered(&d)?;
    let ch = ChannelLCU::new(vec![Branch { coeffs: vec![c64(1.0, 0.0)], unitaries: vec![fu] }], true)?;
    let widths = ch.part_widths();
    let inputs: Vec<String> = widths.iter().map(|w| "0".repeat(*w)).collect();
    let obs: Vec<PartObservable> = widths.iter().map(|w| PauliString::identity(*w).into()).collect();
    let eq3_subtasks = enumerate_subtasks(&ch, &inputs, &obs)?.subtasks.len();
    let quasi_terms = cz_cutting_decomposition().len();
    let cutting_circuits = quasi_terms.pow(m as u32);
    Ok(ScalingReport {
        m,
        ell_product,
        eq3_subtasks,
        tlp_evaluations: parts * ell_product * 4,
        cutting_circuits,
        cutting_settings: cutting_circuits * PauliString::all(2).len(),
    })
}

/// Scaling report for `multi_cut_circuit(m)` split as {0,1 | 2,3}.
pub fn multi_cut_scaling(m: usize) -> Result<ScalingReport, PlanError> {
    let c = multi_cut_circuit(m);
    let cut = build_graph(&c)?.cut_from_parts(vec![0, 0, 1, 1])?;
    scaling_report(&c, &cut)
}
