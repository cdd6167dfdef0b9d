//! Linear combination of Hamiltonian simulations: trapezoidal quadrature of
//! the Cauchy-kernel integral, unitary nodes, state and expectation
//! assembly, the imaginary-time specialization, and reference propagators.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{matrix_from_json, matrix_to_json, Circuit, JsonMatrix, PauliString};
use crate::linalg::{c64, eigh, expm_hermitian, matexp, CMatrix, CVector, LinalgError, C64};
use crate::planner::{enumerate_subtasks, Branch, ChannelLCU, FactorizedUnitary, PartObservable, Plan, PlanError};
use crate::runtime::{aggregate, run_plan, ClusterConfig, RuntimeError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LchsError {
    #[error("quadrature has M = {0} intervals; at least 2 are required")]
    DegenerateQuadrature(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("generator is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPSD(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
}

/// Trapezoidal discretization of ∫_{−K}^{K} dk /(π(1+k²)) (…).
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureScheme {
    pub eps: f64,
    pub c: f64,
    pub t: f64,
    /// K = ⌊c/ε⌋
    pub k_cut: u64,
    /// M = ⌊2KT/ε⌋
    pub m: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub coeffs: Vec<f64>,
}

/// Exact rational value of the shortest decimal that prints as `x`.
fn decimal_rational(x: f64) -> Result<BigRational, LchsError> {
    let text = format!("{x}");
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.as_str()),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    let digits: BigInt = format!("{int_part}{frac_part}")
        .parse()
        .map_err(|_| LchsError::InvalidParameter(format!("cannot read {x} as a decimal")))?;
    let denom = num_traits::pow(BigInt::from(10), frac_part.len());
    let r = BigRational::new(digits, denom);
    Ok(if negative { -r } else { r })
}

impl QuadratureScheme {
    /// Builds the scheme. M comes from exact decimal arithmetic on ε and T
    /// unless `emulate_float_truncation` is set, in which case it is
    /// `floor((2.0 * K * T) / ε)` in binary floating point.
    pub fn build(eps: f64, c: f64, t: f64, emulate_float_truncation: bool) -> Result<Self, LchsError> {
        for (name, v) in [("eps", eps), ("c", c), ("T", t)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(LchsError::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        let (k_cut, m) = if emulate_float_truncation {
            let k = (c / eps).floor();
            (k as u64, ((2.0 * k * t) / eps).floor() as usize)
        } else {
            let (re, rc, rt) = (decimal_rational(eps)?, decimal_rational(c)?, decimal_rational(t)?);
            let k = (rc / &re).floor();
            let m = (BigRational::from_integer(BigInt::from(2)) * &k * rt / re).floor();
            let as_int = |r: &BigRational| r.to_integer().to_u64().ok_or_else(|| LchsError::InvalidParameter("overflow".into()));
            (as_int(&k)?, as_int(&m)? as usize)
        };
        if m < 2 {
            return Err(LchsError::DegenerateQuadrature(m));
        }
        let kf = k_cut as f64;
        let mf = m as f64;
        let nodes: Vec<f64> = (0..=m).map(|j| kf * (2.0 * j as f64 - mf) / mf).collect();
        let weights: Vec<f64> =
            (0..=m).map(|j| if j == 0 || j == m { kf / mf } else { 2.0 * kf / mf }).collect();
        let coeffs = nodes.iter().zip(&weights).map(|(k, w)| w / (PI * (1.0 + k * k))).collect();
        Ok(QuadratureScheme { eps, c, t, k_cut, m, nodes, weights, coeffs })
    }

    /// (M+1)² pairwise overlaps per observable.
    pub fn pair_count(&self) -> usize {
        (self.m + 1) * (self.m + 1)
    }

    pub fn coeff_sum(&self) -> f64 {
        self.coeffs.iter().sum()
    }
}

/// Time-dependent generator s ↦ (H(s), L(s)).
pub type GeneratorFn = Arc<dyn Fn(f64) -> (CMatrix, CMatrix) + Send + Sync>;

/// A(t) = H(t) − iL(t) with Hermitian H, L.
#[derive(Clone)]
pub struct GeneratorSpec {
    pub h: CMatrix,
    pub l: CMatrix,
    time_dependence: Option<GeneratorFn>,
}

impl fmt::Debug for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneratorSpec")
            .field("h", &self.h)
            .field("l", &self.l)
            .field("time_dependent", &self.time_dependence.is_some())
            .finish()
    }
}

fn check_pair(h: &CMatrix, l: &CMatrix) -> Result<(), LchsError> {
    if h.rows() != l.rows() || !h.is_square() || !l.is_square() {
        return Err(LchsError::DimensionMismatch(format!(
            "H is {}x{}, L is {}x{}",
            h.rows(),
            h.cols(),
            l.rows(),
            l.cols()
        )));
    }
    for m in [h, l] {
        let r = m.hermiticity_residual();
        if r >= crate::linalg::HERMITIAN_TOL {
            return Err(LinalgError::NotHermitian(r).into());
        }
    }
    Ok(())
}

impl GeneratorSpec {
    pub fn constant(h: CMatrix, l: CMatrix) -> Result<Self, LchsError> {
        check_pair(&h, &l)?;
        Ok(GeneratorSpec { h, l, time_dependence: None })
    }

    /// `f(s)` gives (H(s), L(s)); `h`, `l` are taken from `f(0)`.
    pub fn time_dependent(f: GeneratorFn) -> Result<Self, LchsError> {
        let (h, l) = f(0.0);
        check_pair(&h, &l)?;
        Ok(GeneratorSpec { h, l, time_dependence: Some(f) })
    }

    pub fn is_time_dependent(&self) -> bool {
        self.time_dependence.is_some()
    }

    pub fn dim(&self) -> usize {
        self.h.rows()
    }

    /// H − iL
    pub fn a_matrix(&self) -> CMatrix {
        &self.h - &self.l.scale(c64(0.0, 1.0))
    }

    fn at(&self, s: f64) -> Result<(CMatrix, CMatrix), LchsError> {
        match &self.time_dependence {
            None => Ok((self.h.clone(), self.l.clone())),
            Some(f) => {
                let (h, l) = f(s);
                check_pair(&h, &l)?;
                Ok((h, l))
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorJson {
    #[serde(rename = "H")]
    h: JsonMatrix,
    #[serde(rename = "L")]
    l: JsonMatrix,
    u0: Vec<[f64; 2]>,
}

/// Reads `{"H": matrix, "L": matrix, "u0": vector}` with entries as
/// `[re, im]` pairs.
pub fn generator_from_json(text: &str) -> Result<(GeneratorSpec, CVector), LchsError> {
    let raw: GeneratorJson = serde_json::from_str(text).map_err(|e| LchsError::InvalidParameter(e.to_string()))?;
    let read = |m: &JsonMatrix| matrix_from_json(m).map_err(|e| LchsError::DimensionMismatch(e.to_string()));
    let g = GeneratorSpec::constant(read(&raw.h)?, read(&raw.l)?)?;
    let u0 = CVector::from_vec(raw.u0.iter().map(|&[re, im]| c64(re, im)).collect());
    if u0.dim() != g.dim() {
        return Err(LchsError::DimensionMismatch(format!("u0 has dim {}, generator {}", u0.dim(), g.dim())));
    }
    Ok((g, u0))
}

/// Inverse of [`generator_from_json`] for time-independent generators.
pub fn generator_to_json(g: &GeneratorSpec, u0: &CVector) -> String {
    let raw = GeneratorJson {
        h: matrix_to_json(&g.h),
        l: matrix_to_json(&g.l),
        u0: u0.as_slice().iter().map(|z| [z.re, z.im]).collect(),
    };
    serde_json::to_string(&raw).expect("serializable")
}

fn step_count(t: f64, dt: f64) -> Result<usize, LchsError> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(LchsError::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let n = (t / dt).round();
    if n < 1.0 || (n * dt - t).abs() > 1e-9 * t.max(1.0) {
        return Err(LchsError::InvalidParameter(format!("dt = {dt} does not divide T = {t}")));
    }
    Ok(n as usize)
}

/// U = 𝒯exp(−i∫₀ᵀ[H(s) + kL(s)]ds). Time-independent generators use one
/// spectral exponential; otherwise a midpoint product with step `dt`.
pub fn unitary_node(g: &GeneratorSpec, k: f64, t: f64, dt: f64) -> Result<CMatrix, LchsError> {
    let combine = |h: &CMatrix, l: &CMatrix| h + &l.scale(c64(k, 0.0));
    if !g.is_time_dependent() {
        return Ok(expm_hermitian(&combine(&g.h, &g.l), t)?);
    }
    let steps = step_count(t, dt)?;
    let mut u = CMatrix::identity(g.dim());
    for n in 0..steps {
        let (h, l) = g.at((n as f64 + 0.5) * dt)?;
        u = &expm_hermitian(&combine(&h, &l), dt)? * &u;
    }
    Ok(u)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionResult {
    /// u(T) = Σ_j c_j U_j u₀, unnormalized.
    pub state: CVector,
    /// v_j = U_j u₀
    pub per_node_states: Option<Vec<CVector>>,
    pub observables: BTreeMap<String, f64>,
}

impl EvolutionResult {
    /// Records ⟨u|O|u⟩/⟨u|u⟩ under `name`.
    pub fn record(&mut self, name: &str, o: &CMatrix) -> f64 {
        let v = self.state.quadratic_form(o).re / self.state.norm().powi(2);
        self.observables.insert(name.to_string(), v);
        v
    }
}

fn check_state(g: &GeneratorSpec, u0: &CVector) -> Result<(), LchsError> {
    if u0.dim() != g.dim() {
        return Err(LchsError::DimensionMismatch(format!("u0 has dim {}, generator {}", u0.dim(), g.dim())));
    }
    Ok(())
}

/// Unitary nodes U_j for every quadrature point.
pub fn node_unitaries(g: &GeneratorSpec, scheme: &QuadratureScheme, dt: f64) -> Result<Vec<CMatrix>, LchsError> {
    scheme.nodes.iter().map(|&k| unitary_node(g, k, scheme.t, dt)).collect()
}

pub fn lchs_state(g: &GeneratorSpec, u0: &CVector, scheme: &QuadratureScheme, dt: f64) -> Result<EvolutionResult, LchsError> {
    check_state(g, u0)?;
    let vs: Vec<CVector> = node_unitaries(g, scheme, dt)?.iter().map(|u| u.mul_vec(u0)).collect();
    let mut state = CVector::zeros(u0.dim());
    for (c, v) in scheme.coeffs.iter().zip(&vs) {
        state.add_scaled(c64(*c, 0.0), v);
    }
    Ok(EvolutionResult { state, per_node_states: Some(vs), observables: BTreeMap::new() })
}

/// Σ_{k,k′} c_k c_{k′} ⟨u₀|U_k† O U_{k′}|u₀⟩, optionally divided by the
/// same form at O = I.
pub fn lchs_expectation(
    g: &GeneratorSpec,
    u0: &CVector,
    scheme: &QuadratureScheme,
    o: &CMatrix,
    normalize: bool,
    dt: f64,
) -> Result<f64, LchsError> {
    check_state(g, u0)?;
    let vs: Vec<CVector> = node_unitaries(g, scheme, dt)?.iter().map(|u| u.mul_vec(u0)).collect();
    let form = |op: Option<&CMatrix>| -> C64 {
        let mut total = c64(0.0, 0.0);
        for (ck, vk) in scheme.coeffs.iter().zip(&vs) {
            for (ck2, vk2) in scheme.coeffs.iter().zip(&vs) {
                let right = op.map_or_else(|| vk2.clone(), |m| m.mul_vec(vk2));
                total += vk.inner(&right) * (ck * ck2);
            }
        }
        total
    };
    let raw = form(Some(o)).re;
    Ok(if normalize { raw / form(None).re } else { raw })
}

/// Pauli coefficients o_P = Tr(P·O)/2ⁿ of an operator, dropping |o_P| ≤ 1e-14.
pub fn pauli_decompose(o: &CMatrix) -> Result<Vec<(PauliString, C64)>, LchsError> {
    let n = crate::circuit::qubits_for_dim(o.rows()).map_err(|e| LchsError::DimensionMismatch(e.to_string()))?;
    let dim = o.rows() as f64;
    Ok(PauliString::all(n)
        .into_iter()
        .map(|p| {
            let v = crate::circuit::density_expectation(o, &p).expect("matching width") / dim;
            (p, v)
        })
        .filter(|(_, v)| v.norm() > 1e-14)
        .collect())
}

/// The pairwise form as a single-part channel: q = 1, m = M + 1, one
/// unitary RAW circuit per node.
pub fn lchs_channel(g: &GeneratorSpec, scheme: &QuadratureScheme, dt: f64) -> Result<ChannelLCU, LchsError> {
    let unitaries = node_unitaries(g, scheme, dt)?
        .into_iter()
        .map(|u| {
            let c = Circuit::from_unitary(u).map_err(|e| LchsError::DimensionMismatch(e.to_string()))?;
            Ok(FactorizedUnitary::product(vec![c])?)
        })
        .collect::<Result<Vec<_>, LchsError>>()?;
    let coeffs = scheme.coeffs.iter().map(|&c| c64(c, 0.0)).collect();
    Ok(ChannelLCU::new(vec![Branch { coeffs, unitaries }], false)?)
}

/// Subtask plans, one per Pauli component of O.
pub fn lchs_plans(
    g: &GeneratorSpec,
    u0_label: &str,
    scheme: &QuadratureScheme,
    o: &CMatrix,
    dt: f64,
) -> Result<Vec<(C64, Plan)>, LchsError> {
    let ch = lchs_channel(g, scheme, dt)?;
    pauli_decompose(o)?
        .into_iter()
        .map(|(p, w)| Ok((w, enumerate_subtasks(&ch, &[u0_label.to_string()], &[PartObservable::Pauli(p)])?)))
        .collect()
}

/// [`lchs_expectation`] evaluated through estimator subtasks on a cluster.
/// u₀ must be a computational basis state given by its label.
pub fn lchs_expectation_tlp(
    g: &GeneratorSpec,
    u0_label: &str,
    scheme: &QuadratureScheme,
    o: &CMatrix,
    normalize: bool,
    dt: f64,
    cfg: &ClusterConfig,
) -> Result<f64, LchsError> {
    let evaluate = |op: &CMatrix| -> Result<f64, LchsError> {
        let mut total = c64(0.0, 0.0);
        for (w, plan) in lchs_plans(g, u0_label, scheme, op, dt)? {
            let results = run_plan(&plan, cfg)?;
            total += w * aggregate(&plan, &results)?;
        }
        Ok(total.re)
    };
    let raw = evaluate(o)?;
    if normalize {
        Ok(raw / evaluate(&CMatrix::identity(o.rows()))?)
    } else {
        Ok(raw)
    }
}

/// exp(−Hγ T)u₀ via H := 0, L := Hγ.
pub fn imaginary_time(
    h_gamma: &CMatrix,
    u0: &CVector,
    scheme: &QuadratureScheme,
    dt: f64,
) -> Result<EvolutionResult, LchsError> {
    let min = eigh(h_gamma)?.values[0];
    if min < -1e-10 {
        return Err(LchsError::NotPSD(min));
    }
    let g = GeneratorSpec::constant(CMatrix::zeros(h_gamma.rows(), h_gamma.rows()), h_gamma.clone())?;
    lchs_state(&g, u0, scheme, dt)
}

/// First-order propagation u ← exp(−iAΔt)u repeated T/Δt times.
pub fn trotter_oracle(a: &CMatrix, u0: &CVector, t: f64, dt: f64) -> Result<CVector, LchsError> {
    if a.rows() != u0.dim() {
        return Err(LchsError::DimensionMismatch(format!("A is {}x{}, u0 has dim {}", a.rows(), a.cols(), u0.dim())));
    }
    let steps = step_count(t, dt)?;
    let step = matexp(a, c64(0.0, -dt))?;
    let mut u = u0.clone();
    for _ in 0..steps {
        u = step.mul_vec(&u);
    }
    Ok(u)
}

/// Lowest eigenpair.
pub fn exact_ground(h: &CMatrix) -> Result<(f64, CVector), LchsError> {
    let e = eigh(h)?;
    Ok((e.values[0], e.eigenvector(0)))
}

/// `count` evenly spaced values from `start` to `stop`, generated as
/// `start + k·step` with the last value pinned to `stop`.
pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![start],
        _ => {
            let step = (stop - start) / (count - 1) as f64;
            let mut v: Vec<f64> = (0..count).map(|k| k as f64 * step + start).collect();
            v[count - 1] = stop;
            v
        }
    }
}

/// T = 0.1·k for k = 1..=10. With `emulate_float_truncation` the values come
/// from [`linspace`]; otherwise they are the decimals k/10.
pub fn default_t_sweep(emulate_float_truncation: bool) -> Vec<f64> {
    if emulate_float_truncation {
        linspace(0.1, 1.0, 10)
    } else {
        (1..=10).map(|k| k as f64 / 10.0).collect()
    }
}

/// γ = 0.2·k for k = 0..=10.
pub fn default_gamma_sweep() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 5.0).collect()
}

/// H = σx, L = I + σz.
pub fn nonhermitian_system() -> GeneratorSpec {
    use crate::linalg::paulis;
    GeneratorSpec::constant(paulis::x(), &paulis::identity() + &paulis::z()).expect("Hermitian pair")
}

/// H(γ) = 2I + γσx
pub fn imaginary_time_hamiltonian(gamma: f64) -> CMatrix {
    use crate::linalg::paulis;
    &paulis::identity().scale(c64(2.0, 0.0)) + &paulis::x().scale(c64(gamma, 0.0))
}

/// Rational check helper: true if x, printed shortest, is a whole number.
pub fn is_decimal_integer(x: f64) -> bool {
    decimal_rational(x).map(|r| (r.clone() - r.floor()).is_zero()).unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{paulis, vector_fidelity, FidelityConvention};

    #[test]
    fn decimal_reading() {
        assert_eq!(decimal_rational(0.6).unwrap(), BigRational::new(3.into(), 5.into()));
        assert_eq!(decimal_rational(-2.5).unwrap(), BigRational::new((-5).into(), 2.into()));
        assert!(is_decimal_integer(3.0) && !is_decimal_integer(0.1));
    }

    #[test]
    fn quadrature_examples() {
        let q = QuadratureScheme::build(0.2, 0.5, 0.5, false).unwrap();
        assert_eq!((q.k_cut, q.m), (2, 10));
        assert_eq!(QuadratureScheme::build(0.2, 0.5, 0.6, true).unwrap().m, 11);
        assert_eq!(QuadratureScheme::build(0.2, 0.5, 0.6, false).unwrap().m, 12);
        let q = QuadratureScheme::build(0.3, 1.0, 0.5, false).unwrap();
        assert_eq!((q.k_cut, q.m), (3, 10));
        assert_eq!(q.nodes[0], -3.0);
        assert_eq!(q.nodes[10], 3.0);
        for j in 0..=q.m {
            assert_eq!(q.coeffs[j], q.coeffs[q.m - j]);
        }
        assert!(matches!(QuadratureScheme::build(0.2, 0.5, 0.05, false), Err(LchsError::DegenerateQuadrature(1))));
    }

    #[test]
    fn linspace_matches_emulated_m_column() {
        let ms: Vec<usize> = default_t_sweep(true)
            .iter()
            .map(|&t| QuadratureScheme::build(0.2, 0.5, t, true).unwrap().m)
            .collect();
        assert_eq!(ms, vec![2, 4, 6, 8, 10, 11, 14, 16, 18, 20]);
        let exact: Vec<usize> = default_t_sweep(false)
            .iter()
            .map(|&t| QuadratureScheme::build(0.2, 0.5, t, false).unwrap().m)
            .collect();
        assert_eq!(exact, (1..=10).map(|k| 2 * k).collect::<Vec<_>>());
    }

    #[test]
    fn node_closed_forms() {
        let g = GeneratorSpec::constant(paulis::x(), paulis::z()).unwrap();
        let u = unitary_node(&g, 0.0, PI, 0.01).unwrap();
        assert!(u.max_abs_diff(&CMatrix::identity(2).scale(c64(-1.0, 0.0))) < 1e-12);
        let g = GeneratorSpec::constant(CMatrix::zeros(2, 2), CMatrix::identity(2)).unwrap();
        let u = unitary_node(&g, 1.7, 0.3, 0.01).unwrap();
        let phase = C64::from_polar(1.0, -1.7 * 0.3);
        assert!(u.max_abs_diff(&CMatrix::identity(2).scale(phase)) < 1e-12);
    }

    #[test]
    fn time_dependent_constant_matches_static() {
        let f: GeneratorFn = Arc::new(|_| (paulis::x(), &paulis::identity() + &paulis::z()));
        let td = GeneratorSpec::time_dependent(f).unwrap();
        let u = unitary_node(&td, 0.7, 0.5, 0.01).unwrap();
        let v = unitary_node(&nonhermitian_system(), 0.7, 0.5, 0.01).unwrap();
        assert!(u.max_abs_diff(&v) < 1e-10);
    }

    #[test]
    fn zero_dissipation_reduces_to_plain_evolution() {
        let g = GeneratorSpec::constant(paulis::x(), CMatrix::zeros(2, 2)).unwrap();
        let q = QuadratureScheme::build(0.2, 0.5, 0.7, false).unwrap();
        let u0 = CVector::basis(2, 0);
        let r = lchs_state(&g, &u0, &q, 0.01).unwrap();
        let exact = expm_hermitian(&paulis::x(), 0.7).unwrap().mul_vec(&u0);
        let f = vector_fidelity(&r.state, &exact, FidelityConvention::OverlapSquared).unwrap();
        assert!((f - 1.0).abs() < 1e-9);
        assert!(r.state.max_abs_diff(&exact.scale(c64(q.coeff_sum(), 0.0))) < 1e-12);
    }

    #[test]
    fn nonhermitian_fidelity_spot_checks() {
        let g = nonhermitian_system();
        let u0 = CVector::basis(2, 0);
        for (t, want) in [(0.1, 0.9999), (0.5, 0.9808)] {
            let q = QuadratureScheme::build(0.2, 0.5, t, true).unwrap();
            let s = lchs_state(&g, &u0, &q, 0.01).unwrap().state;
            let o = trotter_oracle(&g.a_matrix(), &u0, t, 0.01).unwrap();
            let f = vector_fidelity(&s, &o, FidelityConvention::OverlapSquared).unwrap();
            assert!((f - want).abs() < 5e-3, "T={t}: {f}");
        }
    }

    #[test]
    fn expectation_identity_normalizes_to_one() {
        let g = nonhermitian_system();
        let q = QuadratureScheme::build(0.2, 0.5, 0.5, false).unwrap();
        let v = lchs_expectation(&g, &CVector::basis(2, 0), &q, &CMatrix::identity(2), true, 0.01).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn estimator_path_matches_dense() {
        let g = nonhermitian_system();
        let q = QuadratureScheme::build(0.2, 0.5, 0.3, false).unwrap();
        let u0 = CVector::basis(2, 0);
        let cfg = ClusterConfig::local(3);
        for (o, normalize) in [(paulis::y(), true), (paulis::z(), false), (paulis::x(), true)] {
            let dense = lchs_expectation(&g, &u0, &q, &o, normalize, 0.01).unwrap();
            let tlp = lchs_expectation_tlp(&g, "0", &q, &o, normalize, 0.01, &cfg).unwrap();
            assert!((dense - tlp).abs() < 1e-10, "{dense} vs {tlp}");
        }
        let plans = lchs_plans(&g, "0", &q, &paulis::z(), 0.01).unwrap();
        assert_eq!(plans.len(), 1);
        assert_eq!(plans[0].1.subtasks.len(), q.pair_count());
    }

    #[test]
    fn imaginary_time_checks() {
        let q = QuadratureScheme::build(0.3, 1.0, 0.5, false).unwrap();
        let u0 = CVector::basis(2, 0);
        assert!(matches!(
            imaginary_time(&paulis::z(), &u0, &q, 0.01),
            Err(LchsError::NotPSD(_))
        ));
        let mut r = imaginary_time(&imaginary_time_hamiltonian(0.0), &u0, &q, 0.01).unwrap();
        assert!((r.record("H", &imaginary_time_hamiltonian(0.0)) - 2.0).abs() < 1e-12);
        let (e0, _) = exact_ground(&imaginary_time_hamiltonian(1.0)).unwrap();
        assert!((e0 - 1.0).abs() < 1e-12);
        let (e, v) = exact_ground(&paulis::z()).unwrap();
        assert_eq!(e, -1.0);
        assert!((v[1].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trotter_matches_closed_form() {
        let h = imaginary_time_hamiltonian(1.0);
        let a = h.scale(c64(0.0, -1.0));
        let u0 = CVector::basis(2, 0);
        let got = trotter_oracle(&a, &u0, 0.5, 0.01).unwrap();
        let want = eigh(&h).unwrap().reconstruct_with(|x| c64((-x * 0.5).exp(), 0.0)).mul_vec(&u0);
        assert!(got.max_abs_diff(&want) < 1e-6);
        let unitary = trotter_oracle(&paulis::x(), &u0, 1.0, 0.01).unwrap();
        assert!((unitary.norm() - 1.0).abs() < 1e-8);
        assert!(trotter_oracle(&paulis::x(), &u0, 1.0, 0.3).is_err());
    }
}
