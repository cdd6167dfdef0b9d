//! Experiment pipelines shared by the subcommands and the acceptance suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use tlpq_core::circuit::{ghz4_template, ghz_state, Circuit};
use tlpq_core::factorize::expand_layered;
use tlpq_core::lchs::{
    exact_ground, imaginary_time, imaginary_time_hamiltonian, lchs_expectation, lchs_expectation_tlp,
    lchs_state, nonhermitian_system, trotter_oracle, GeneratorSpec, LchsError, QuadratureScheme,
};
use tlpq_core::linalg::{c64, paulis, pure_state_fidelity, vector_fidelity, CMatrix, CVector, FidelityConvention};
use tlpq_core::partition::{balanced_bisection, build_graph, global_min_cut, CutAssignment};
use tlpq_core::planner::{
    ghz_cutting_plan, ghz_overlap_plan, multi_cut_circuit, physical_estimate, reconstruct_density_matrix,
    reconstruct_density_matrix_unchecked, scaling_report, ScalingReport,
};
use tlpq_core::runtime::{run_tasks, values_by_id, ClusterConfig};

use crate::config::Resolved;
use crate::CliError;

/// Density-matrix reconstruction of the four-qubit GHZ state.
#[derive(Clone, Debug)]
pub struct GhzOutcome {
    pub rho: CMatrix,
    pub fidelity: f64,
    pub circuits: usize,
    pub evaluations: usize,
    /// True when the raw estimate had to be projected onto the physical set.
    pub projected: bool,
}

fn ghz_fidelity(rho: &CMatrix) -> Result<f64, CliError> {
    pure_state_fidelity(rho, &ghz_state(4)).map_err(CliError::execution)
}

/// Two-template overlap pipeline: 32 estimator circuits, 128 evaluations.
pub fn run_ghz_overlap(cfg: &ClusterConfig) -> Result<GhzOutcome, CliError> {
    let plan = ghz_overlap_plan();
    let tasks = plan.tasks();
    let results = run_tasks(&tasks, cfg).map_err(CliError::execution)?;
    let values = values_by_id(&results, tasks.len()).map_err(CliError::execution)?;
    let [a, b] = plan.gram_tables(&values).map_err(CliError::execution)?;
    let (rho, projected) = if cfg.shots.is_some() {
        let raw = reconstruct_density_matrix_unchecked(&a, &b).map_err(CliError::execution)?;
        (physical_estimate(&raw).map_err(CliError::execution)?, true)
    } else {
        (reconstruct_density_matrix(&a, &b).map_err(CliError::execution)?, false)
    };
    Ok(GhzOutcome {
        fidelity: ghz_fidelity(&rho)?,
        rho,
        circuits: plan.circuit_count(),
        evaluations: plan.evaluation_count(),
        projected,
    })
}

/// Ten-term circuit-cutting pipeline: 20 subcircuit tasks, 160 settings.
pub fn run_ghz_cut(cfg: &ClusterConfig) -> Result<GhzOutcome, CliError> {
    let plan = ghz_cutting_plan();
    let tasks = plan.tasks();
    let results = run_tasks(&tasks, cfg).map_err(CliError::execution)?;
    let values = values_by_id(&results, tasks.len()).map_err(CliError::execution)?;
    let combined = plan.combine(&values).map_err(CliError::execution)?;
    let (rho, projected) = if cfg.shots.is_some() {
        (physical_estimate(&combined).map_err(CliError::execution)?, true)
    } else {
        (combined, false)
    };
    Ok(GhzOutcome {
        fidelity: ghz_fidelity(&rho)?,
        rho,
        circuits: plan.subcircuits.len(),
        evaluations: plan.setting_count(),
        projected,
    })
}

/// Seeded random Hermitian observable: (G + G†)/2 with entries of G drawn
/// uniformly from [−1, 1] + i[−1, 1].
pub fn random_hermitian(seed: u64, dim: usize) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            g[(i, j)] = c64(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0));
        }
    }
    (&g + &g.adjoint()).scale(c64(0.5, 0.0))
}

/// One observable under the three methods.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Triple {
    pub tlp: f64,
    pub lchs_dense: f64,
    pub oracle: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonhermRow {
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub pairs: usize,
    pub fidelity: f64,
    pub sx: Triple,
    pub sy: Triple,
    pub sz: Triple,
    #[serde(rename = "R")]
    pub r: Triple,
}

fn oracle_value(u: &CVector, o: &CMatrix, normalize: bool) -> f64 {
    let v = u.quadratic_form(o).re;
    if normalize {
        v / u.norm().powi(2)
    } else {
        v
    }
}

/// H = σx, L = I + σz, u₀ = |0⟩ over the configured T list.
pub fn run_nonherm(r: &Resolved, observable_r: &CMatrix) -> Result<Vec<NonhermRow>, CliError> {
    let g = nonhermitian_system();
    let u0 = CVector::basis(2, 0);
    let obs = [paulis::x(), paulis::y(), paulis::z(), observable_r.clone()];
    let mut rows = Vec::with_capacity(r.t.len());
    for &t in &r.t {
        let scheme = QuadratureScheme::build(r.eps, r.c, t, r.emulate_float_truncation).map_err(lchs_error)?;
        let state = lchs_state(&g, &u0, &scheme, r.dt).map_err(lchs_error)?.state;
        let oracle = trotter_oracle(&g.a_matrix(), &u0, t, r.dt).map_err(lchs_error)?;
        let fidelity =
            vector_fidelity(&state, &oracle, FidelityConvention::OverlapSquared).map_err(CliError::execution)?;
        let mut triples = Vec::with_capacity(obs.len());
        for o in &obs {
            triples.push(Triple {
                tlp: lchs_expectation_tlp(&g, "0", &scheme, o, r.normalize, r.dt, &r.cluster).map_err(lchs_error)?,
                lchs_dense: lchs_expectation(&g, &u0, &scheme, o, r.normalize, r.dt).map_err(lchs_error)?,
                oracle: oracle_value(&oracle, o, r.normalize),
            });
        }
        rows.push(NonhermRow {
            t,
            m: scheme.m,
            pairs: scheme.pair_count(),
            fidelity,
            sx: triples[0],
            sy: triples[1],
            sz: triples[2],
            r: triples[3],
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImagtimeRow {
    pub gamma: f64,
    pub terms: usize,
    #[serde(rename = "H")]
    pub h: Triple,
    pub sx: Triple,
    pub sz: Triple,
    /// Oracle ⟨H⟩ at the longer baseline time.
    #[serde(rename = "H_oracle_baseline")]
    pub h_baseline: Option<f64>,
    #[serde(rename = "E0_exact")]
    pub e0_exact: f64,
    pub fidelity: f64,
}

/// H(γ) = 2I + γσx evolved in imaginary time from |0⟩.
pub fn run_imagtime(r: &Resolved) -> Result<Vec<ImagtimeRow>, CliError> {
    let t = r.t[0];
    let u0 = CVector::basis(2, 0);
    let scheme = QuadratureScheme::build(r.eps, r.c, t, r.emulate_float_truncation).map_err(lchs_error)?;
    let mut rows = Vec::with_capacity(r.gamma_list.len());
    for &gamma in &r.gamma_list {
        let h = imaginary_time_hamiltonian(gamma);
        let state = imaginary_time(&h, &u0, &scheme, r.dt).map_err(lchs_error)?.state;
        let a = h.scale(c64(0.0, -1.0));
        let oracle = trotter_oracle(&a, &u0, t, r.dt).map_err(lchs_error)?;
        let fidelity =
            vector_fidelity(&state, &oracle, FidelityConvention::OverlapSquared).map_err(CliError::execution)?;
        let g = GeneratorSpec::constant(CMatrix::zeros(2, 2), h.clone()).map_err(lchs_error)?;
        let triple = |o: &CMatrix| -> Result<Triple, CliError> {
            Ok(Triple {
                tlp: lchs_expectation_tlp(&g, "0", &scheme, o, r.normalize, r.dt, &r.cluster).map_err(lchs_error)?,
                lchs_dense: lchs_expectation(&g, &u0, &scheme, o, r.normalize, r.dt).map_err(lchs_error)?,
                oracle: oracle_value(&oracle, o, r.normalize),
            })
        };
        let h_baseline = match r.baseline_t {
            Some(tb) => Some(oracle_value(&trotter_oracle(&a, &u0, tb, r.dt).map_err(lchs_error)?, &h, r.normalize)),
            None => None,
        };
        rows.push(ImagtimeRow {
            gamma,
            terms: scheme.pair_count(),
            h: triple(&h)?,
            sx: triple(&paulis::x())?,
            sz: triple(&paulis::z())?,
            h_baseline,
            e0_exact: exact_ground(&h).map_err(lchs_error)?.0,
            fidelity,
        });
    }
    Ok(rows)
}

fn lchs_error(e: LchsError) -> CliError {
    match e {
        LchsError::InvalidParameter(_) | LchsError::DegenerateQuadrature(_) | LchsError::NotPSD(_) => CliError::Config(e.to_string()),
        other => CliError::execution(other),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CutReport {
    pub weight: usize,
    pub parts: [Vec<usize>; 2],
    pub crossing_gates: Vec<usize>,
}

impl From<&CutAssignment> for CutReport {
    fn from(c: &CutAssignment) -> Self {
        CutReport { weight: c.weight(), parts: [c.part(0), c.part(1)], crossing_gates: c.crossing_gate_indices().to_vec() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub ours: usize,
    pub cutting: usize,
    pub ours_formula: String,
    pub cutting_formula: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct PlanReport {
    pub n_qubits: usize,
    pub gates: usize,
    pub edges: Vec<(usize, usize, usize)>,
    pub min_cut: CutReport,
    pub bisection: CutReport,
    /// The cut the scaling counts refer to.
    pub planning_cut: CutReport,
    /// Schmidt rank of each crossing gate.
    pub ells: Vec<usize>,
    pub scaling: ScalingReport,
    pub comparison: Comparison,
}

/// Source of the circuit for `plan`.
pub enum PlanSource {
    Ghz4,
    MultiCut(usize),
    Circuit(Circuit),
}

/// Graph, cuts and subtask counts. Multi-cut circuits are split as
/// {0,1 | 2,3}; other circuits use the balanced bisection.
pub fn plan_report(source: PlanSource) -> Result<PlanReport, CliError> {
    let (circuit, fixed) = match source {
        PlanSource::Ghz4 => (ghz4_template(), false),
        PlanSource::MultiCut(m) => (multi_cut_circuit(m), true),
        PlanSource::Circuit(c) => (c, false),
    };
    let graph = build_graph(&circuit).map_err(CliError::execution)?;
    let min_cut = global_min_cut(&graph).map_err(CliError::execution)?;
    let bisection = balanced_bisection(&graph).map_err(CliError::execution)?;
    let planning = if fixed {
        graph.cut_from_parts(vec![0, 0, 1, 1]).map_err(CliError::execution)?
    } else {
        bisection.clone()
    };
    let ells = expand_layered(&circuit, &planning).map_err(CliError::execution)?.ells();
    let scaling = scaling_report(&circuit, &planning).map_err(CliError::execution)?;
    let comparison = Comparison {
        ours: scaling.tlp_evaluations,
        cutting: scaling.cutting_settings,
        ours_formula: if scaling.ell_product == 1 << scaling.m {
            format!("8x2^{}", scaling.m)
        } else {
            format!("8x{}", scaling.ell_product)
        },
        cutting_formula: format!("16x10^{}", scaling.m),
    };
    Ok(PlanReport {
        n_qubits: circuit.n_qubits(),
        gates: circuit.len(),
        edges: graph.edges(),
        min_cut: (&min_cut).into(),
        bisection: (&bisection).into(),
        planning_cut: (&planning).into(),
        ells,
        scaling,
        comparison,
    })
}
