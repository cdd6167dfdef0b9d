//! Task execution over a pool of simulated QPU nodes: in-process exact or
//! shot-sampling nodes, and remote workers speaking newline-delimited JSON
//! over TCP. Scheduling is static round-robin with ring-order retries.

use std::collections::BTreeMap;
use std::io::{self, BufRead, BufReader, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::thread;
use std::time::Duration;

use log::{debug, warn};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{simulate, simulate_density, Circuit, MAX_UNITARY_QUBITS};
use crate::linalg::{CVector, C64};
use crate::planner::{aggregate_overlaps, overlap_from_readouts, plan_tasks, Plan, PlanError, Readout, Task, TaskKind};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RuntimeError {
    #[error("task {task} failed after {attempts} attempt(s): {last}")]
    NodeFailure { task: usize, attempts: usize, last: String },
    #[error("task {task} needs {needed} qubits but node {node} supports {max}")]
    CapabilityMismatch { task: usize, needed: usize, node: String, max: usize },
    #[error("missing result for task {0}")]
    MissingResult(usize),
    #[error("invalid cluster configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// Failure of a single execution attempt.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NodeError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("worker error: {0}")]
    Remote(String),
    #[error("execution: {0}")]
    Execution(String),
    #[error("capability: task needs {needed} qubits, node supports {max}")]
    Capability { needed: usize, max: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub max_qubits: usize,
    pub exact_expectation: bool,
    pub shot_sampling: bool,
    pub density_matrix: bool,
}

impl Default for Capabilities {
    fn default() -> Self {
        Capabilities { max_qubits: MAX_UNITARY_QUBITS, exact_expectation: true, shot_sampling: true, density_matrix: true }
    }
}

/// What a node is asked to run.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskRequest {
    pub task: Task,
    pub shots: Option<u64>,
    pub seed: u64,
}

/// What a node returns: one real value per readout.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskOutput {
    pub values: Vec<f64>,
    pub shots_used: u64,
}

pub trait NodeBackend: Send {
    fn id(&self) -> String;
    fn capabilities(&mut self) -> Result<Capabilities, NodeError>;
    fn execute(&mut self, req: &TaskRequest) -> Result<TaskOutput, NodeError>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskResult {
    pub task_id: usize,
    pub values: Vec<f64>,
    pub shots_used: u64,
    pub node_id: String,
}

impl TaskResult {
    /// ⟨σx⟩ + i⟨σy⟩ for estimator tasks.
    pub fn overlap(&self) -> Result<C64, PlanError> {
        overlap_from_readouts(&self.values)
    }
}

/// Mean of `n` draws from outcomes (−1, 0, +1) with the given probabilities.
pub fn sample_shots<R: Rng + ?Sized>(probs: [f64; 3], n: u64, rng: &mut R) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let weights = probs.map(|p| p.max(0.0));
    let Ok(dist) = WeightedIndex::new(weights) else {
        return 0.0;
    };
    let sum: i64 = (0..n).map(|_| dist.sample(rng) as i64 - 1).sum();
    sum as f64 / n as f64
}

/// Per-task seed, independent of which node runs it.
pub fn task_seed(base: u64, task_id: usize) -> u64 {
    let mut z = base ^ (task_id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs a task on the calling thread. Identical requests give identical
/// outputs.
pub fn execute_task(req: &TaskRequest) -> Result<TaskOutput, NodeError> {
    let exec = |e: &dyn std::fmt::Display| NodeError::Execution(e.to_string());
    let task = &req.task;
    let n = task.circuit.n_qubits();
    if let Some(r) = task.readout.iter().find(|r| r.width() != n) {
        return Err(NodeError::Execution(format!("readout {r} does not match {n} qubits")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    let mut values = Vec::with_capacity(task.readout.len());
    match task.kind {
        TaskKind::Estimator => {
            let state = simulate(&task.circuit, &CVector::basis(1 << n, 0)).map_err(|e| exec(&e))?;
            for r in &task.readout {
                values.push(match req.shots {
                    None => r.expectation_state(&state).map_err(|e| exec(&e))?,
                    Some(s) => sample_shots(r.outcome_probabilities_state(&state).map_err(|e| exec(&e))?, s, &mut rng),
                });
            }
        }
        TaskKind::Density => {
            let rho = simulate_density(&task.circuit).map_err(|e| exec(&e))?;
            for r in &task.readout {
                values.push(match req.shots {
                    None => r.expectation_density(&rho).map_err(|e| exec(&e))?,
                    Some(s) => sample_shots(r.outcome_probabilities_density(&rho).map_err(|e| exec(&e))?, s, &mut rng),
                });
            }
        }
    }
    let shots_used = req.shots.map_or(0, |s| s * task.readout.len() as u64);
    Ok(TaskOutput { values, shots_used })
}

/// Tr(ρ′P) for each setting after applying `circuit` (possibly non-unitary)
/// to |0…0⟩⟨0…0|.
pub fn run_density_path(circuit: &Circuit, settings: &[Readout]) -> Result<Vec<f64>, NodeError> {
    let task = Task { id: 0, kind: TaskKind::Density, circuit: circuit.clone(), readout: settings.to_vec() };
    Ok(execute_task(&TaskRequest { task, shots: None, seed: 0 })?.values)
}

/// In-process simulated node.
#[derive(Clone, Debug)]
pub struct LocalNode {
    id: String,
    caps: Capabilities,
}

impl LocalNode {
    pub fn new(id: impl Into<String>) -> Self {
        LocalNode { id: id.into(), caps: Capabilities::default() }
    }

    pub fn with_max_qubits(mut self, max_qubits: usize) -> Self {
        self.caps.max_qubits = max_qubits;
        self
    }
}

impl NodeBackend for LocalNode {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn capabilities(&mut self) -> Result<Capabilities, NodeError> {
        Ok(self.caps)
    }

    fn execute(&mut self, req: &TaskRequest) -> Result<TaskOutput, NodeError> {
        let needed = req.task.circuit.n_qubits();
        if needed > self.caps.max_qubits {
            return Err(NodeError::Capability { needed, max: self.caps.max_qubits });
        }
        execute_task(req)
    }
}

/// Wire messages; one JSON object per line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Message {
    Hello {
        proto: u32,
    },
    HelloAck {
        proto: u32,
        max_qubits: usize,
    },
    Task {
        id: u64,
        kind: TaskKind,
        circuit: Circuit,
        readout: Vec<Readout>,
        shots: Option<u64>,
        seed: u64,
    },
    Result {
        id: u64,
        values: Vec<[f64; 2]>,
        shots_used: u64,
    },
    Error {
        id: i64,
        message: String,
    },
    Shutdown,
}

impl Message {
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("message serializes");
        s.push('\n');
        s
    }
}

fn write_message(stream: &mut TcpStream, msg: &Message) -> io::Result<()> {
    stream.write_all(msg.to_line().as_bytes())?;
    stream.flush()
}

fn read_message(reader: &mut BufReader<TcpStream>) -> Result<Message, NodeError> {
    let mut line = String::new();
    match reader.read_line(&mut line) {
        Ok(0) => Err(NodeError::Transport("connection closed".into())),
        Ok(_) => serde_json::from_str(&line).map_err(|e| NodeError::Transport(format!("bad message: {e}"))),
        Err(e) => Err(NodeError::Transport(e.to_string())),
    }
}

/// Connection to a remote worker, opened lazily and reopened after failures.
pub struct RemoteNode {
    addr: String,
    timeout: Duration,
    conn: Option<(TcpStream, BufReader<TcpStream>, usize)>,
}

impl RemoteNode {
    pub fn new(addr: impl Into<String>) -> Self {
        RemoteNode { addr: addr.into(), timeout: Duration::from_secs(60), conn: None }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn connect(&mut self) -> Result<&mut (TcpStream, BufReader<TcpStream>, usize), NodeError> {
        if self.conn.is_none() {
            let transport = |e: io::Error| NodeError::Transport(format!("{}: {e}", self.addr));
            let addr: SocketAddr = self
                .addr
                .to_socket_addrs()
                .map_err(transport)?
                .next()
                .ok_or_else(|| NodeError::Transport(format!("{}: no address", self.addr)))?;
            let mut stream = TcpStream::connect_timeout(&addr, self.timeout).map_err(transport)?;
            stream.set_read_timeout(Some(self.timeout)).map_err(transport)?;
            stream.set_nodelay(true).map_err(transport)?;
            write_message(&mut stream, &Message::Hello { proto: PROTOCOL_VERSION }).map_err(transport)?;
            let mut reader = BufReader::new(stream.try_clone().map_err(transport)?);
            match read_message(&mut reader)? {
                Message::HelloAck { proto, max_qubits } if proto == PROTOCOL_VERSION => {
                    self.conn = Some((stream, reader, max_qubits));
                }
                Message::HelloAck { proto, .. } => {
                    return Err(NodeError::Remote(format!("protocol {proto}, expected {PROTOCOL_VERSION}")))
                }
                Message::Error { message, .. } => return Err(NodeError::Remote(message)),
                other => return Err(NodeError::Transport(format!("unexpected handshake reply {other:?}"))),
            }
        }
        Ok(self.conn.as_mut().expect("connected"))
    }

    /// Asks the worker to stop serving.
    pub fn shutdown_worker(&mut self) -> Result<(), NodeError> {
        let (stream, _, _) = self.connect()?;
        write_message(stream, &Message::Shutdown).map_err(|e| NodeError::Transport(e.to_string()))?;
        self.conn = None;
        Ok(())
    }

    fn try_execute(&mut self, req: &TaskRequest) -> Result<TaskOutput, NodeError> {
        let (stream, reader, max_qubits) = self.connect()?;
        let needed = req.task.circuit.n_qubits();
        if needed > *max_qubits {
            return Err(NodeError::Capability { needed, max: *max_qubits });
        }
        let msg = Message::Task {
            id: req.task.id as u64,
            kind: req.task.kind,
            circuit: req.task.circuit.clone(),
            readout: req.task.readout.clone(),
            shots: req.shots,
            seed: req.seed,
        };
        write_message(stream, &msg).map_err(|e| NodeError::Transport(e.to_string()))?;
        match read_message(reader)? {
            Message::Result { id, values, shots_used } if id == req.task.id as u64 => {
                Ok(TaskOutput { values: values.into_iter().map(|[re, _]| re).collect(), shots_used })
            }
            Message::Error { message, .. } => Err(NodeError::Remote(message)),
            other => Err(NodeError::Transport(format!("unexpected reply {other:?}"))),
        }
    }
}

impl NodeBackend for RemoteNode {
    fn id(&self) -> String {
        self.addr.clone()
    }

    fn capabilities(&mut self) -> Result<Capabilities, NodeError> {
        let (_, _, max_qubits) = self.connect()?;
        Ok(Capabilities { max_qubits: *max_qubits, ..Capabilities::default() })
    }

    fn execute(&mut self, req: &TaskRequest) -> Result<TaskOutput, NodeError> {
        let out = self.try_execute(req);
        if matches!(out, Err(NodeError::Transport(_))) {
            self.conn = None;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClusterMode {
    Local,
    Network,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterConfig {
    pub mode: ClusterMode,
    /// Local node count (ignored in network mode).
    #[serde(default = "one")]
    pub nodes: usize,
    #[serde(default)]
    pub workers: Vec<String>,
    #[serde(default)]
    pub shots: Option<u64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub retry_limit: usize,
}

fn one() -> usize {
    1
}

impl ClusterConfig {
    pub fn local(nodes: usize) -> Self {
        ClusterConfig { mode: ClusterMode::Local, nodes, workers: vec![], shots: None, seed: 0, retry_limit: 1 }
    }

    pub fn network(workers: Vec<String>) -> Self {
        ClusterConfig { mode: ClusterMode::Network, nodes: workers.len(), workers, shots: None, seed: 0, retry_limit: 1 }
    }

    pub fn with_shots(mut self, shots: Option<u64>) -> Self {
        self.shots = shots;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_retry_limit(mut self, retry_limit: usize) -> Self {
        self.retry_limit = retry_limit;
        self
    }

    pub fn validate(&self) -> Result<(), RuntimeError> {
        match self.mode {
            ClusterMode::Local if self.nodes == 0 => Err(RuntimeError::InvalidConfig("nodes must be ≥ 1".into())),
            ClusterMode::Network if self.workers.is_empty() => {
                Err(RuntimeError::InvalidConfig("network mode needs at least one worker".into()))
            }
            _ if self.shots == Some(0) => Err(RuntimeError::InvalidConfig("shots must be ≥ 1".into())),
            _ => Ok(()),
        }
    }

    pub fn build_nodes(&self) -> Result<Vec<Box<dyn NodeBackend>>, RuntimeError> {
        self.validate()?;
        Ok(match self.mode {
            ClusterMode::Local => (0..self.nodes)
                .map(|k| Box::new(LocalNode::new(format!("local-{k}"))) as Box<dyn NodeBackend>)
                .collect(),
            ClusterMode::Network => self
                .workers
                .iter()
                .map(|a| Box::new(RemoteNode::new(a.clone())) as Box<dyn NodeBackend>)
                .collect(),
        })
    }
}

/// Runs tasks on the configured cluster.
pub fn run_tasks(tasks: &[Task], cfg: &ClusterConfig) -> Result<Vec<TaskResult>, RuntimeError> {
    run_tasks_on(tasks, cfg, cfg.build_nodes()?)
}

/// Runs tasks on explicit nodes. Task k goes to node k mod N; a failed
/// attempt is re-sent to the next node in ring order, for at most
/// 1 + retry_limit attempts. Results are returned in ascending task id.
pub fn run_tasks_on(
    tasks: &[Task],
    cfg: &ClusterConfig,
    nodes: Vec<Box<dyn NodeBackend>>,
) -> Result<Vec<TaskResult>, RuntimeError> {
    if nodes.is_empty() {
        return Err(RuntimeError::InvalidConfig("no nodes".into()));
    }
    let n_nodes = nodes.len();
    let max_attempts = 1 + cfg.retry_limit;
    let mut results: BTreeMap<usize, TaskResult> = BTreeMap::new();

    thread::scope(|scope| -> Result<(), RuntimeError> {
        let (done_tx, done_rx) = mpsc::channel::<(usize, usize, String, Result<TaskOutput, NodeError>)>();
        let mut queues = Vec::with_capacity(n_nodes);
        for mut node in nodes {
            let (tx, rx) = mpsc::channel::<(usize, usize)>();
            queues.push(tx);
            let done_tx = done_tx.clone();
            scope.spawn(move || {
                for (index, attempt) in rx {
                    let task = &tasks[index];
                    let req = TaskRequest { task: task.clone(), shots: cfg.shots, seed: task_seed(cfg.seed, task.id) };
                    let out = node.execute(&req);
                    if done_tx.send((index, attempt, node.id(), out)).is_err() {
                        break;
                    }
                }
            });
        }
        drop(done_tx);

        for (index, task) in tasks.iter().enumerate() {
            queues[task.id % n_nodes].send((index, 0)).expect("node thread alive");
        }
        let mut outstanding = tasks.len();
        while outstanding > 0 {
            let (index, attempt, node_id, out) = done_rx.recv().expect("node threads alive");
            let task = &tasks[index];
            match out {
                Ok(o) => {
                    debug!("task {} done on {node_id}", task.id);
                    results.insert(
                        task.id,
                        TaskResult { task_id: task.id, values: o.values, shots_used: o.shots_used, node_id },
                    );
                    outstanding -= 1;
                }
                Err(NodeError::Capability { needed, max }) => {
                    return Err(RuntimeError::CapabilityMismatch { task: task.id, needed, node: node_id, max });
                }
                Err(e) if attempt + 1 < max_attempts => {
                    let next = (task.id + attempt + 1) % n_nodes;
                    warn!("task {} failed on {node_id} ({e}); retrying on node {next}", task.id);
                    queues[next].send((index, attempt + 1)).expect("node thread alive");
                }
                Err(e) => {
                    return Err(RuntimeError::NodeFailure { task: task.id, attempts: attempt + 1, last: e.to_string() });
                }
            }
        }
        Ok(())
    })?;

    Ok(results.into_values().collect())
}

/// Executes every subtask of a plan as an estimator task.
pub fn run_plan(plan: &Plan, cfg: &ClusterConfig) -> Result<Vec<TaskResult>, RuntimeError> {
    run_tasks(&plan_tasks(plan)?, cfg)
}

/// Σ over sibling groups of coefficient × Π part overlaps, in ascending
/// group order.
pub fn aggregate(plan: &Plan, results: &[TaskResult]) -> Result<C64, RuntimeError> {
    let mut overlaps = vec![None; plan.subtasks.len()];
    for r in results {
        if let Some(slot) = overlaps.get_mut(r.task_id) {
            *slot = Some(r.overlap()?);
        }
    }
    let overlaps: Vec<C64> = overlaps
        .into_iter()
        .enumerate()
        .map(|(id, o)| o.ok_or(RuntimeError::MissingResult(id)))
        .collect::<Result<_, _>>()?;
    Ok(aggregate_overlaps(plan, &overlaps)?)
}

/// Values per task in task-id order, failing on gaps.
pub fn values_by_id(results: &[TaskResult], count: usize) -> Result<Vec<Vec<f64>>, RuntimeError> {
    let mut out = vec![None; count];
    for r in results {
        if let Some(slot) = out.get_mut(r.task_id) {
            *slot = Some(r.values.clone());
        }
    }
    out.into_iter()
        .enumerate()
        .map(|(id, v)| v.ok_or(RuntimeError::MissingResult(id)))
        .collect()
}

#[derive(Clone, Debug)]
pub struct WorkerOptions {
    pub max_qubits: usize,
    /// Test hook: after this many tasks the worker drops every connection
    /// and stops listening, without answering the task that tripped it.
    pub crash_after_tasks: Option<usize>,
}

impl Default for WorkerOptions {
    fn default() -> Self {
        WorkerOptions { max_qubits: MAX_UNITARY_QUBITS, crash_after_tasks: None }
    }
}

struct WorkerShared {
    stop: AtomicBool,
    served: AtomicUsize,
    streams: Mutex<Vec<TcpStream>>,
    opts: WorkerOptions,
}

impl WorkerShared {
    fn halt(&self) {
        self.stop.store(true, Ordering::SeqCst);
        for s in self.streams.lock().expect("stream list").drain(..) {
            let _ = s.shutdown(Shutdown::Both);
        }
    }
}

/// A running worker.
pub struct WorkerHandle {
    addr: SocketAddr,
    shared: Arc<WorkerShared>,
    thread: Option<thread::JoinHandle<()>>,
}

impl WorkerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Drops every connection and stops listening immediately.
    pub fn kill(&self) {
        self.shared.halt();
    }

    pub fn tasks_served(&self) -> usize {
        self.shared.served.load(Ordering::SeqCst)
    }

    pub fn join(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for WorkerHandle {
    fn drop(&mut self) {
        self.shared.halt();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Binds `addr` and serves in background threads.
pub fn spawn_worker(addr: &str, opts: WorkerOptions) -> io::Result<WorkerHandle> {
    let listener = TcpListener::bind(addr)?;
    let local = listener.local_addr()?;
    listener.set_nonblocking(true)?;
    let shared = Arc::new(WorkerShared {
        stop: AtomicBool::new(false),
        served: AtomicUsize::new(0),
        streams: Mutex::new(Vec::new()),
        opts,
    });
    let accept_shared = shared.clone();
    let thread = thread::spawn(move || accept_loop(listener, accept_shared));
    Ok(WorkerHandle { addr: local, shared, thread: Some(thread) })
}

/// Serves the wire protocol on `addr` until a shutdown message arrives.
pub fn serve_worker(addr: &str, opts: WorkerOptions) -> io::Result<()> {
    let handle = spawn_worker(addr, opts)?;
    log::info!("worker listening on {}", handle.addr());
    handle.join();
    Ok(())
}

fn accept_loop(listener: TcpListener, shared: Arc<WorkerShared>) {
    let mut conns = Vec::new();
    while !shared.stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                debug!("worker accepted {peer}");
                let _ = stream.set_nonblocking(false);
                if let Ok(clone) = stream.try_clone() {
                    shared.streams.lock().expect("stream list").push(clone);
                }
                let s = shared.clone();
                conns.push(thread::spawn(move || {
                    let closer = stream.try_clone();
                    if let Err(e) = handle_connection(stream, &s) {
                        debug!("connection from {peer} ended: {e}");
                    }
                    if let Ok(c) = closer {
                        let _ = c.shutdown(Shutdown::Both);
                    }
                }));
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(2)),
            Err(e) => {
                warn!("accept failed: {e}");
                break;
            }
        }
    }
    drop(listener);
    shared.halt();
    for c in conns {
        let _ = c.join();
    }
}

fn handle_connection(stream: TcpStream, shared: &WorkerShared) -> io::Result<()> {
    let mut writer = stream.try_clone()?;
    let mut reader = BufReader::new(stream);
    let mut greeted = false;
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 || shared.stop.load(Ordering::SeqCst) {
            return Ok(());
        }
        let msg: Message = match serde_json::from_str(&line) {
            Ok(m) => m,
            Err(e) => {
                write_message(&mut writer, &Message::Error { id: -1, message: format!("malformed message: {e}") })?;
                continue;
            }
        };
        match msg {
            Message::Hello { proto } if proto == PROTOCOL_VERSION => {
                greeted = true;
                write_message(
                    &mut writer,
                    &Message::HelloAck { proto: PROTOCOL_VERSION, max_qubits: shared.opts.max_qubits },
                )?;
            }
            Message::Hello { proto } => {
                let message = format!("protocol {proto} unsupported; this worker speaks {PROTOCOL_VERSION}");
                write_message(&mut writer, &Message::Error { id: -1, message })?;
                return Ok(());
            }
            Message::Shutdown => {
                shared.halt();
                return Ok(());
            }
            Message::Task { id, .. } if !greeted => {
                write_message(&mut writer, &Message::Error { id: id as i64, message: "hello required first".into() })?;
            }
            Message::Task { id, kind, circuit, readout, shots, seed } => {
                let served = shared.served.fetch_add(1, Ordering::SeqCst);
                if shared.opts.crash_after_tasks.is_some_and(|limit| served >= limit) {
                    shared.halt();
                    return Ok(());
                }
                let reply = if circuit.n_qubits() > shared.opts.max_qubits {
                    Message::Error {
                        id: id as i64,
                        message: format!("{} qubits exceeds max_qubits {}", circuit.n_qubits(), shared.opts.max_qubits),
                    }
                } else {
                    let task = Task { id: id as usize, kind, circuit, readout };
                    match execute_task(&TaskRequest { task, shots, seed }) {
                        Ok(o) => Message::Result {
                            id,
                            values: o.values.into_iter().map(|v| [v, 0.0]).collect(),
                            shots_used: o.shots_used,
                        },
                        Err(e) => Message::Error { id: id as i64, message: e.to_string() },
                    }
                };
                write_message(&mut writer, &reply)?;
            }
            other => {
                let message = format!("unexpected message type: {}", serde_json::to_string(&other).unwrap_or_default());
                write_message(&mut writer, &Message::Error { id: -1, message })?;
            }
        }
    }
}
