//! `tlpq` command-line driver.

use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use tlpq_core::circuit::{matrix_to_json, Circuit};
use tlpq_core::runtime::{spawn_worker, ClusterMode, WorkerOptions};

pub mod config;
pub mod experiments;
pub mod render;

use config::{ClusterOverrides, Experiment, Format, OneOrMany, Resolved, RunConfig};
use experiments::PlanSource;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Execution(String),
    Check(Vec<String>),
}

impl CliError {
    pub fn execution(e: impl fmt::Display) -> CliError {
        CliError::Execution(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Execution(_) => 3,
            CliError::Check(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Execution(m) => write!(f, "execution error: {m}"),
            CliError::Check(v) => write!(f, "check failed: {}", v.join("; ")),
        }
    }
}

impl std::error::Error for CliError {}

#[derive(Debug, Parser)]
#[command(name = "tlpq", version, about = "Distributed partitioned-circuit and LCHS experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: GlobalOpts,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Interaction graph, cuts and subtask counts of a circuit.
    Plan {
        /// Circuit JSON; the four-qubit GHZ template when omitted.
        circuit: Option<PathBuf>,
        /// Use the synthetic chain circuit with this many crossing gates.
        #[arg(long, conflicts_with = "circuit")]
        multi_cut: Option<usize>,
    },
    /// GHZ state tomography through partitioned overlaps.
    Ghz,
    /// GHZ state tomography through CZ circuit cutting.
    GhzCut,
    /// Non-Hermitian dynamics sweep over T.
    Nonherm,
    /// Imaginary-time sweep over γ.
    Imagtime,
    /// Serve tasks over TCP until a shutdown message arrives.
    Worker {
        /// Listen address, e.g. 127.0.0.1:7000 (port 0 picks a free port).
        #[arg(default_value = "127.0.0.1:0")]
        listen: String,
        #[arg(long)]
        max_qubits: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_parser = ["local", "network"])]
    pub mode: Option<String>,
    #[arg(long, global = true)]
    pub nodes: Option<usize>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub workers: Option<Vec<String>>,
    #[arg(long, global = true)]
    pub shots: Option<u64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub retry_limit: Option<usize>,
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    #[arg(long = "c", global = true)]
    pub c: Option<f64>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Evolution time, or a comma-separated list for the T sweep.
    #[arg(long = "T", global = true, value_delimiter = ',')]
    pub t: Option<Vec<f64>>,
    /// Longer oracle baseline time for imagtime.
    #[arg(long = "baseline-T", global = true)]
    pub baseline_t: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    pub gamma_list: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub emulate_float_truncation: bool,
    /// Divide expectations by the identity form (default).
    #[arg(long, global = true, conflicts_with = "raw")]
    pub normalize: bool,
    /// Report unnormalized expectations.
    #[arg(long, global = true)]
    pub raw: bool,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Exit with status 4 if an acceptance threshold is violated.
    #[arg(long, global = true)]
    pub check: bool,
}

impl GlobalOpts {
    fn cluster_overrides(&self) -> ClusterOverrides {
        ClusterOverrides {
            mode: self.mode.as_deref().map(|m| if m == "network" { ClusterMode::Network } else { ClusterMode::Local }),
            nodes: self.nodes,
            workers: self.workers.clone(),
            shots: self.shots,
            seed: self.seed,
            retry_limit: self.retry_limit,
        }
    }

    /// File config with flag overrides applied.
    fn merged(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        cfg.eps = self.eps.or(cfg.eps);
        cfg.c = self.c.or(cfg.c);
        cfg.dt = self.dt.or(cfg.dt);
        if let Some(t) = &self.t {
            cfg.t = Some(OneOrMany::Many(t.clone()));
        }
        cfg.baseline_t = self.baseline_t.or(cfg.baseline_t);
        if self.gamma_list.is_some() {
            cfg.gamma_list = self.gamma_list.clone();
        }
        if self.emulate_float_truncation {
            cfg.emulate_float_truncation = Some(true);
        }
        if self.normalize {
            cfg.normalize = Some(true);
        }
        if self.raw {
            cfg.normalize = Some(false);
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        cfg.format = self.format.or(cfg.format);
        if self.check {
            cfg.check = Some(true);
        }
        Ok(cfg)
    }
}

fn resolve(opts: &GlobalOpts, experiment: Experiment, mut file: RunConfig) -> Result<Resolved, CliError> {
    let cluster = opts.cluster_overrides().apply(file.cluster.take())?;
    file.resolve(experiment, cluster)
}

/// Writes the primary output to `--out` or stdout.
fn emit(r: &Resolved, body: &str) -> Result<(), CliError> {
    match &r.out {
        Some(path) => std::fs::write(path, body)
            .map_err(|e| CliError::Execution(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes()).and_then(|_| out.flush()).map_err(CliError::execution)
        }
    }
}

fn check(r: &Resolved, failures: Vec<String>) -> Result<(), CliError> {
    if r.check && !failures.is_empty() {
        Err(CliError::Check(failures))
    } else {
        Ok(())
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let opts = &cli.opts;
    match cli.command {
        Command::Worker { listen, max_qubits } => {
            let mut wo = WorkerOptions::default();
            if let Some(q) = max_qubits {
                wo.max_qubits = q;
            }
            let handle = spawn_worker(&listen, wo).map_err(|e| CliError::Config(format!("cannot bind {listen}: {e}")))?;
            println!("listening on {}", handle.addr());
            std::io::stdout().flush().map_err(CliError::execution)?;
            handle.join();
            Ok(())
        }
        Command::Plan { circuit, multi_cut } => {
            let mut file = opts.merged()?;
            if circuit.is_some() {
                file.circuit = circuit;
            }
            file.multi_cut = multi_cut.or(file.multi_cut);
            let r = resolve(opts, Experiment::Plan, file)?;
            let source = match (&r.circuit, r.multi_cut) {
                (Some(path), _) => {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
                    let c: Circuit = serde_json::from_str(&text)
                        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                    PlanSource::Circuit(c)
                }
                (None, Some(m)) => PlanSource::MultiCut(m),
                (None, None) => PlanSource::Ghz4,
            };
            let report = experiments::plan_report(source)?;
            eprintln!("ours: {}, cutting: {}", report.comparison.ours, report.comparison.cutting);
            emit(&r, &render::json(&report)?)?;
            let mut failures = Vec::new();
            if report.min_cut.weight != report.min_cut.crossing_gates.len() {
                failures.push("min-cut weight differs from crossing gate count".into());
            }
            check(&r, failures)
        }
        Command::Ghz | Command::GhzCut => {
            let experiment = if matches!(cli.command, Command::Ghz) { Experiment::Ghz } else { Experiment::GhzCut };
            let r = resolve(opts, experiment, opts.merged()?)?;
            let outcome = if experiment == Experiment::Ghz {
                experiments::run_ghz_overlap(&r.cluster)?
            } else {
                experiments::run_ghz_cut(&r.cluster)?
            };
            eprintln!(
                "fidelity {:.9} ({} circuits, {} evaluations)",
                outcome.fidelity, outcome.circuits, outcome.evaluations
            );
            let body = match r.format {
                Format::Json => render::json(&render::GhzJson {
                    experiment: experiment.to_string(),
                    circuits: outcome.circuits,
                    evaluations: outcome.evaluations,
                    shots: r.cluster.shots,
                    seed: r.cluster.seed,
                    projected: outcome.projected,
                    fidelity: outcome.fidelity,
                    rho: matrix_to_json(&outcome.rho),
                })?,
                Format::Csv => render::matrix_csv(&outcome.rho),
            };
            emit(&r, &body)?;
            let threshold = if r.cluster.shots.is_some() { 0.97 } else { 1.0 - 1e-9 };
            let mut failures = Vec::new();
            if outcome.fidelity < threshold {
                failures.push(format!("fidelity {} below {threshold}", outcome.fidelity));
            }
            check(&r, failures)
        }
        Command::Nonherm => {
            let r = resolve(opts, Experiment::Nonherm, opts.merged()?)?;
            let obs_r = experiments::random_hermitian(r.cluster.seed, 2);
            let rows = experiments::run_nonherm(&r, &obs_r)?;
            let pairs: usize = rows.iter().map(|row| row.pairs).sum();
            eprintln!("{} time points, {} pairwise overlaps per observable", rows.len(), pairs);
            emit(&r, &render::nonherm(&r, &obs_r, &rows)?)?;
            let mut failures = Vec::new();
            for row in &rows {
                if row.fidelity < 0.95 {
                    failures.push(format!("T={}: fidelity {}", row.t, row.fidelity));
                }
                if r.cluster.shots.is_none() {
                    for t in [row.sx, row.sy, row.sz, row.r] {
                        if (t.tlp - t.lchs_dense).abs() > 1e-9 {
                            failures.push(format!("T={}: tlp {} vs dense {}", row.t, t.tlp, t.lchs_dense));
                        }
                    }
                }
            }
            check(&r, failures)
        }
        Command::Imagtime => {
            let r = resolve(opts, Experiment::Imagtime, opts.merged()?)?;
            let rows = experiments::run_imagtime(&r)?;
            let terms: usize = rows.iter().map(|row| row.terms).sum();
            eprintln!("{} gamma values, {} terms per observable", rows.len(), terms);
            emit(&r, &render::imagtime(&r, &rows)?)?;
            let mut failures = Vec::new();
            for row in &rows {
                if row.fidelity < 0.99 {
                    failures.push(format!("gamma={}: fidelity {}", row.gamma, row.fidelity));
                }
                if (row.e0_exact - (2.0 - row.gamma.abs())).abs() > 1e-12 {
                    failures.push(format!("gamma={}: E0 {}", row.gamma, row.e0_exact));
                }
                if r.cluster.shots.is_none() && (row.h.tlp - row.h.lchs_dense).abs() > 1e-9 {
                    failures.push(format!("gamma={}: tlp {} vs dense {}", row.gamma, row.h.tlp, row.h.lchs_dense));
                }
            }
            check(&r, failures)
        }
    }
}
