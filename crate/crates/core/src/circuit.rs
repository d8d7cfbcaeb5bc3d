//! Logical CNOT circuits and their two derived views: the gate dependency
//! DAG and the weighted qubit communication graph.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod generators;
pub mod qasm;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CircuitError {
    #[error("gate {gate}: control and target are both qubit {qubit}")]
    SelfLoop { gate: usize, qubit: usize },
    #[error("gate {gate}: qubit {qubit} out of range for {n} qubits")]
    QubitOutOfRange { gate: usize, qubit: usize, n: usize },
    #[error("infeasible generator parameters: {0}")]
    InfeasibleParameters(String),
    #[error("malformed clause {clause}: {reason}")]
    MalformedClause { clause: usize, reason: String },
}

/// A single logical CNOT. `id` equals the gate's position in program order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Gate {
    pub id: usize,
    pub control: usize,
    pub target: usize,
}

impl Gate {
    pub fn qubits(&self) -> [usize; 2] {
        [self.control, self.target]
    }

    pub fn touches(&self, q: usize) -> bool {
        self.control == q || self.target == q
    }

    /// The operand other than `q`. Panics if `q` is not an operand.
    pub fn partner(&self, q: usize) -> usize {
        if self.control == q {
            self.target
        } else {
            assert_eq!(self.target, q, "qubit {q} is not an operand of gate {}", self.id);
            self.control
        }
    }
}

/// Ordered CNOT list over `n` logical qubits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogicalCircuit {
    n: usize,
    gates: Vec<Gate>,
}

impl LogicalCircuit {
    pub fn new<I>(n: usize, pairs: I) -> Result<Self, CircuitError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut gates = Vec::new();
        for (id, (control, target)) in pairs.into_iter().enumerate() {
            for qubit in [control, target] {
                if qubit >= n {
                    return Err(CircuitError::QubitOutOfRange { gate: id, qubit, n });
                }
            }
            if control == target {
                return Err(CircuitError::SelfLoop { gate: id, qubit: control });
            }
            gates.push(Gate { id, control, target });
        }
        Ok(LogicalCircuit { n, gates })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn gate(&self, id: usize) -> &Gate {
        &self.gates[id]
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Number of gates acting on each qubit.
    pub fn qubit_loads(&self) -> Vec<usize> {
        let mut loads = vec![0; self.n];
        for g in &self.gates {
            loads[g.control] += 1;
            loads[g.target] += 1;
        }
        loads
    }

    pub fn dump(&self) -> CircuitDump {
        CircuitDump {
            n: self.n,
            gates: self.gates.iter().map(|g| [g.id, g.control, g.target]).collect(),
        }
    }

    pub fn from_dump(dump: &CircuitDump) -> Result<Self, CircuitError> {
        Self::new(dump.n, dump.gates.iter().map(|g| (g[1], g[2])))
    }
}

/// Canonical JSON form used for golden files: `{"n": .., "gates": [[id, control, target], ..]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitDump {
    pub n: usize,
    pub gates: Vec<[usize; 3]>,
}

/// Immediate-dependency DAG over gate ids.
///
/// Edge `(u, v)` exists iff `u` and `v` share a qubit and `u` is the last gate on
/// that qubit before `v`. Because edges always point forward in program order,
/// ascending gate id is a topological order.
#[derive(Debug, Clone)]
pub struct GateDag {
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    /// Longest path ending at each gate, counted in gates (1 for sources).
    asap: Vec<usize>,
    alpha: usize,
}

impl GateDag {
    pub fn build(circuit: &LogicalCircuit) -> Self {
        let g = circuit.len();
        let mut parents = vec![Vec::new(); g];
        let mut children = vec![Vec::new(); g];
        let mut last_on: Vec<Option<usize>> = vec![None; circuit.n()];
        for gate in circuit.gates() {
            for q in gate.qubits() {
                if let Some(p) = last_on[q] {
                    if !parents[gate.id].contains(&p) {
                        parents[gate.id].push(p);
                        children[p].push(gate.id);
                    }
                }
                last_on[q] = Some(gate.id);
            }
        }
        let mut asap = vec![0; g];
        for v in 0..g {
            asap[v] = parents[v].iter().map(|&p| asap[p]).max().unwrap_or(0) + 1;
        }
        let alpha = asap.iter().copied().max().unwrap_or(0);
        GateDag { parents, children, asap, alpha }
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    /// Critical-path length in gates.
    pub fn alpha(&self) -> usize {
        self.alpha
    }

    pub fn parents(&self, gate: usize) -> &[usize] {
        &self.parents[gate]
    }

    pub fn children(&self, gate: usize) -> &[usize] {
        &self.children[gate]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.children
            .iter()
            .enumerate()
            .flat_map(|(u, cs)| cs.iter().map(move |&v| (u, v)))
    }

    /// Earliest 1-based layer of each gate.
    pub fn asap_layers(&self) -> &[usize] {
        &self.asap
    }

    /// Latest 1-based layer of each gate within a schedule of length `alpha`.
    pub fn alap_layers(&self) -> Vec<usize> {
        let g = self.len();
        let mut alap = vec![self.alpha; g];
        for v in (0..g).rev() {
            if let Some(m) = self.children[v].iter().map(|&c| alap[c]).min() {
                alap[v] = m - 1;
            }
        }
        alap
    }

    /// Longest path from each gate to a sink, counted in gates.
    pub fn criticality(&self) -> Vec<usize> {
        let g = self.len();
        let mut crit = vec![1; g];
        for v in (0..g).rev() {
            if let Some(m) = self.children[v].iter().map(|&c| crit[c]).max() {
                crit[v] = m + 1;
            }
        }
        crit
    }

    /// Number of transitive descendants of each gate, plus one for the gate itself.
    pub fn remaining(&self) -> Vec<usize> {
        let g = self.len();
        let words = g.div_ceil(64);
        let mut reach = vec![0u64; g * words];
        let mut counts = vec![0; g];
        for v in (0..g).rev() {
            let (head, tail) = reach.split_at_mut((v + 1) * words);
            let row = &mut head[v * words..];
            row[v / 64] |= 1 << (v % 64);
            for &c in &self.children[v] {
                let off = (c - v - 1) * words;
                let child = &tail[off..off + words];
                for (a, b) in row.iter_mut().zip(child) {
                    *a |= *b;
                }
            }
            counts[v] = row.iter().map(|w| w.count_ones() as usize).sum();
        }
        counts
    }

    pub fn sources(&self) -> Vec<usize> {
        (0..self.len()).filter(|&v| self.parents[v].is_empty()).collect()
    }
}

/// Undirected weighted communication graph. Weight = number of CNOTs on the pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommGraph {
    n: usize,
    weights: BTreeMap<(usize, usize), u32>,
}

impl CommGraph {
    pub fn build(circuit: &LogicalCircuit) -> Self {
        Self::from_gates(circuit.n(), circuit.gates().iter())
    }

    pub fn from_gates<'a>(n: usize, gates: impl Iterator<Item = &'a Gate>) -> Self {
        let mut weights = BTreeMap::new();
        for g in gates {
            *weights.entry(Self::key(g.control, g.target)).or_insert(0) += 1;
        }
        CommGraph { n, weights }
    }

    fn key(a: usize, b: usize) -> (usize, usize) {
        if a < b {
            (a, b)
        } else {
            (b, a)
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weight(&self, a: usize, b: usize) -> u32 {
        self.weights.get(&Self::key(a, b)).copied().unwrap_or(0)
    }

    /// Edges as `(i, j, weight)` with `i < j`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        self.weights.iter().map(|(&(a, b), &w)| (a, b, w))
    }

    pub fn edge_count(&self) -> usize {
        self.weights.len()
    }

    pub fn total_weight(&self) -> u64 {
        self.weights.values().map(|&w| w as u64).sum()
    }

    pub fn adjacency(&self) -> Vec<Vec<(usize, u32)>> {
        let mut adj = vec![Vec::new(); self.n];
        for (a, b, w) in self.edges() {
            adj[a].push((b, w));
            adj[b].push((a, w));
        }
        adj
    }

    /// Two-colouring if the graph is bipartite. Each component's lowest vertex gets `false`.
    pub fn two_coloring(&self) -> Option<Vec<bool>> {
        let adj = self.adjacency();
        let mut color: Vec<Option<bool>> = vec![None; self.n];
        for s in 0..self.n {
            if color[s].is_some() {
                continue;
            }
            color[s] = Some(false);
            let mut stack = vec![s];
            while let Some(u) = stack.pop() {
                let cu = color[u].unwrap();
                for &(v, _) in &adj[u] {
                    match color[v] {
                        None => {
                            color[v] = Some(!cu);
                            stack.push(v);
                        }
                        Some(cv) if cv == cu => return None,
                        _ => {}
                    }
                }
            }
        }
        Some(color.into_iter().map(|c| c.unwrap()).collect())
    }

    pub fn is_bipartite(&self) -> bool {
        self.two_coloring().is_some()
    }
}
