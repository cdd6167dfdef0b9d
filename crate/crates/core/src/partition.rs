//! Qubit-interaction graphs and minimum cuts.
//!
//! Edge weights count two-qubit gates, so a cut's weight is exactly the number
//! of gates that straddle it.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::circuit::Circuit;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PartitionError {
    #[error("graph has {0} vertices; at least 2 are needed")]
    TooFewVertices(usize),
    #[error("invalid cut: {0}")]
    InvalidCut(String),
    #[error("gate {0} acts on more than two qubits")]
    WideGate(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CircuitGraph {
    n: usize,
    /// (u, v) with u < v → gate indices on that pair, in circuit order.
    edges: BTreeMap<(usize, usize), Vec<usize>>,
}

impl CircuitGraph {
    /// Graph from explicit weighted edges. Each unit of weight is given a
    /// synthetic gate index, numbered in input order.
    pub fn from_edges(n: usize, edges: &[(usize, usize, usize)]) -> CircuitGraph {
        let mut g = CircuitGraph { n, edges: BTreeMap::new() };
        let mut next = 0;
        for &(u, v, w) in edges {
            assert!(u != v && u < n && v < n, "edge ({u},{v}) invalid for {n} vertices");
            let list = g.edges.entry((u.min(v), u.max(v))).or_default();
            list.extend(next..next + w);
            next += w;
        }
        g
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn weight(&self, u: usize, v: usize) -> usize {
        self.edges.get(&(u.min(v), u.max(v))).map_or(0, Vec::len)
    }

    /// `(u, v, weight)` with u < v, sorted.
    pub fn edges(&self) -> Vec<(usize, usize, usize)> {
        self.edges.iter().map(|(&(u, v), gates)| (u, v, gates.len())).collect()
    }

    pub fn total_weight(&self) -> usize {
        self.edges.values().map(Vec::len).sum()
    }

    fn adjacency(&self) -> Vec<Vec<u64>> {
        let mut w = vec![vec![0u64; self.n]; self.n];
        for (&(u, v), gates) in &self.edges {
            w[u][v] = gates.len() as u64;
            w[v][u] = gates.len() as u64;
        }
        w
    }

    fn component_of_zero(&self) -> BTreeSet<usize> {
        let adj = self.adjacency();
        let mut seen = BTreeSet::from([0]);
        let mut queue = VecDeque::from([0]);
        while let Some(u) = queue.pop_front() {
            for v in 0..self.n {
                if adj[u][v] > 0 && seen.insert(v) {
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    /// Evaluates a bipartition given as a per-vertex part label.
    pub fn cut_from_parts(&self, part_of: Vec<u8>) -> Result<CutAssignment, PartitionError> {
        if part_of.len() != self.n {
            return Err(PartitionError::InvalidCut(format!("{} labels for {} vertices", part_of.len(), self.n)));
        }
        if part_of.iter().any(|&p| p > 1) {
            return Err(PartitionError::InvalidCut("part labels must be 0 or 1".into()));
        }
        if !part_of.contains(&0) || !part_of.contains(&1) {
            return Err(PartitionError::InvalidCut("both parts must be non-empty".into()));
        }
        let mut crossing: Vec<usize> = self
            .edges
            .iter()
            .filter(|(&(u, v), _)| part_of[u] != part_of[v])
            .flat_map(|(_, gates)| gates.iter().copied())
            .collect();
        crossing.sort_unstable();
        Ok(CutAssignment { weight: crossing.len(), part_of, crossing_gate_indices: crossing })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CutAssignment {
    part_of: Vec<u8>,
    crossing_gate_indices: Vec<usize>,
    weight: usize,
}

impl CutAssignment {
    pub fn part_of(&self) -> &[u8] {
        &self.part_of
    }

    pub fn part(&self, p: u8) -> Vec<usize> {
        (0..self.part_of.len()).filter(|&q| self.part_of[q] == p).collect()
    }

    pub fn crossing_gate_indices(&self) -> &[usize] {
        &self.crossing_gate_indices
    }

    pub fn weight(&self) -> usize {
        self.weight
    }
}

pub fn build_graph(c: &Circuit) -> Result<CircuitGraph, PartitionError> {
    let mut g = CircuitGraph { n: c.n_qubits(), edges: BTreeMap::new() };
    for (idx, gate) in c.gates().iter().enumerate() {
        match gate.qubits() {
            [_] => {}
            &[a, b] => g.edges.entry((a.min(b), a.max(b))).or_default().push(idx),
            _ => return Err(PartitionError::WideGate(idx)),
        }
    }
    Ok(g)
}

/// Stoer–Wagner global minimum cut.
///
/// Among the minimum-weight phase cuts, the one whose vertex-0 side is
/// lexicographically smallest (as a sorted list) wins, and that side is
/// reported as part 0.
pub fn global_min_cut(g: &CircuitGraph) -> Result<CutAssignment, PartitionError> {
    let n = g.n;
    if n < 2 {
        return Err(PartitionError::TooFewVertices(n));
    }
    let component = g.component_of_zero();
    if component.len() < n {
        let labels = (0..n).map(|v| u8::from(!component.contains(&v))).collect();
        return g.cut_from_parts(labels);
    }

    let mut w = g.adjacency();
    let mut groups: Vec<Vec<usize>> = (0..n).map(|v| vec![v]).collect();
    let mut active: Vec<usize> = (0..n).collect();
    let mut best: Option<(u64, Vec<usize>)> = None;

    while active.len() > 1 {
        let mut in_a = vec![false; n];
        let mut conn = vec![0u64; n];
        let mut order = Vec::with_capacity(active.len());
        for _ in 0..active.len() {
            let next = active
                .iter()
                .copied()
                .filter(|&v| !in_a[v])
                .max_by(|&x, &y| conn[x].cmp(&conn[y]).then(y.cmp(&x)))
                .expect("unvisited vertex");
            in_a[next] = true;
            order.push(next);
            for &v in &active {
                conn[v] += w[next][v];
            }
        }
        let t = order[order.len() - 1];
        let s = order[order.len() - 2];
        let cut_weight: u64 = active.iter().filter(|&&v| v != t).map(|&v| w[t][v]).sum();

        let t_side: BTreeSet<usize> = groups[t].iter().copied().collect();
        let zero_side: Vec<usize> = if t_side.contains(&0) {
            t_side.into_iter().collect()
        } else {
            (0..n).filter(|v| !t_side.contains(v)).collect()
        };
        let better = match &best {
            None => true,
            Some((bw, bside)) => cut_weight < *bw || (cut_weight == *bw && zero_side < *bside),
        };
        if better {
            best = Some((cut_weight, zero_side));
        }

        let moved = std::mem::take(&mut groups[t]);
        groups[s].extend(moved);
        for v in 0..n {
            w[s][v] += w[t][v];
            w[v][s] = w[s][v];
        }
        w[s][s] = 0;
        active.retain(|&v| v != t);
    }

    let (_, zero_side) = best.expect("at least one phase");
    let labels = (0..n).map(|v| u8::from(!zero_side.contains(&v))).collect();
    g.cut_from_parts(labels)
}

/// Balanced bisection: start from `0..⌈n/2⌉` versus the rest and apply one
/// Kernighan–Lin pass.
pub fn balanced_bisection(g: &CircuitGraph) -> Result<CutAssignment, PartitionError> {
    let n = g.n;
    if n < 2 {
        return Err(PartitionError::TooFewVertices(n));
    }
    let w = g.adjacency();
    let half = n.div_ceil(2);
    let mut part: Vec<u8> = (0..n).map(|v| u8::from(v >= half)).collect();

    let mut side = part.clone();
    let mut locked = vec![false; n];
    let d = |side: &[u8], v: usize| -> i64 {
        (0..n)
            .map(|u| if side[u] == side[v] { -(w[v][u] as i64) } else { w[v][u] as i64 })
            .sum()
    };
    let mut swaps = Vec::new();
    let mut gains = Vec::new();
    for _ in 0..(n / 2) {
        let mut pick: Option<(i64, usize, usize)> = None;
        for a in (0..n).filter(|&v| side[v] == 0 && !locked[v]) {
            for b in (0..n).filter(|&v| side[v] == 1 && !locked[v]) {
                let gain = d(&side, a) + d(&side, b) - 2 * w[a][b] as i64;
                if pick.map_or(true, |(best, _, _)| gain > best) {
                    pick = Some((gain, a, b));
                }
            }
        }
        let Some((gain, a, b)) = pick else { break };
        locked[a] = true;
        locked[b] = true;
        side.swap(a, b);
        swaps.push((a, b));
        gains.push(gain);
    }

    let mut best_k = 0;
    let mut best_total = 0i64;
    let mut total = 0i64;
    for (k, gain) in gains.iter().enumerate() {
        total += gain;
        if total > best_total {
            best_total = total;
            best_k = k + 1;
        }
    }
    for &(a, b) in &swaps[..best_k] {
        part.swap(a, b);
    }
    g.cut_from_parts(part)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{ghz4_template, Gate};

    #[test]
    fn ghz_graph_is_a_chain() {
        let g = build_graph(&ghz4_template()).unwrap();
        assert_eq!(g.edges(), vec![(0, 1, 1), (1, 2, 1), (2, 3, 1)]);
        let cut = global_min_cut(&g).unwrap();
        assert_eq!((cut.weight(), cut.part(0)), (1, vec![0]));
        let bis = balanced_bisection(&g).unwrap();
        assert_eq!((bis.weight(), bis.part(0)), (1, vec![0, 1]));
        // CZ(1,2) is gate 6 of the template.
        assert_eq!(bis.crossing_gate_indices(), &[6]);
    }

    #[test]
    fn counting_and_trivial_graphs() {
        let only_h = Circuit::new(2).with(Gate::h(0)).with(Gate::h(1));
        assert!(build_graph(&only_h).unwrap().edges().is_empty());
        let two = Circuit::new(2).with(Gate::cnot(0, 1)).with(Gate::cnot(1, 0));
        let g = build_graph(&two).unwrap();
        assert_eq!(g.edges(), vec![(0, 1, 2)]);
        let g3 = CircuitGraph::from_edges(2, &[(0, 1, 3)]);
        assert_eq!(global_min_cut(&g3).unwrap().weight(), 3);
        assert_eq!(global_min_cut(&CircuitGraph::from_edges(1, &[])), Err(PartitionError::TooFewVertices(1)));
    }

    #[test]
    fn disconnected_gives_zero_cut() {
        let g = CircuitGraph::from_edges(4, &[(0, 1, 2), (2, 3, 1)]);
        let cut = global_min_cut(&g).unwrap();
        assert_eq!((cut.weight(), cut.part(0)), (0, vec![0, 1]));
    }

    #[test]
    fn bisection_examples() {
        let k4 = CircuitGraph::from_edges(4, &[(0, 1, 1), (0, 2, 1), (0, 3, 1), (1, 2, 1), (1, 3, 1), (2, 3, 1)]);
        assert_eq!(balanced_bisection(&k4).unwrap().weight(), 4);
        let p6 = CircuitGraph::from_edges(6, &[(0, 1, 1), (1, 2, 1), (2, 3, 1), (3, 4, 1), (4, 5, 1)]);
        assert_eq!(balanced_bisection(&p6).unwrap().weight(), 1);
        // Interleaved start is repaired by the exchange pass.
        let g = CircuitGraph::from_edges(4, &[(0, 2, 3), (1, 3, 3), (0, 1, 1)]);
        let cut = balanced_bisection(&g).unwrap();
        assert_eq!((cut.weight(), cut.part(0)), (1, vec![1, 3]));
    }
}
