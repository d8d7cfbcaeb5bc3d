//! Circuit generators: layered random circuits with a prescribed depth and
//! parallelism, the clause/consistency gadget circuit used to stress cut-type
//! initialisation, and regenerated benchmark families.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CircuitError, LogicalCircuit};

/// Random circuit whose minimum-length layering has exactly `depth` layers of
/// exactly `parallelism` gates each.
///
/// Every layer is filled with `parallelism` qubit-disjoint gates, and the first
/// gate of each layer reuses a qubit from the previous layer so that the
/// critical path runs through all layers. With `depth * parallelism` gates and
/// critical path `depth`, no minimum-length layering can have a smaller
/// maximum layer, so the parallelism degree is exactly `parallelism`.
pub fn random_layered(
    n: usize,
    depth: usize,
    parallelism: usize,
    seed: u64,
) -> Result<LogicalCircuit, CircuitError> {
    if depth == 0 {
        return Err(CircuitError::InfeasibleParameters("depth must be at least 1".into()));
    }
    if parallelism == 0 || 2 * parallelism > n {
        return Err(CircuitError::InfeasibleParameters(format!(
            "parallelism {parallelism} needs 1 <= 2*parallelism <= n = {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(depth * parallelism);
    let mut previous: Vec<usize> = Vec::new();
    for _ in 0..depth {
        let mut free: Vec<usize> = (0..n).collect();
        free.shuffle(&mut rng);
        let mut layer = Vec::with_capacity(parallelism);
        if !previous.is_empty() {
            let link = previous[rng.gen_range(0..previous.len())];
            free.retain(|&q| q != link);
            let other = free.pop().unwrap();
            layer.push(if rng.gen_bool(0.5) { (link, other) } else { (other, link) });
        }
        while layer.len() < parallelism {
            let a = free.pop().unwrap();
            let b = free.pop().unwrap();
            layer.push((a, b));
        }
        layer.shuffle(&mut rng);
        previous = layer.iter().flat_map(|&(a, b)| [a, b]).collect();
        pairs.extend(layer);
    }
    LogicalCircuit::new(n, pairs)
}

/// Qubit layout of the gadget circuit built by [`three_sat_gadget`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GadgetLayout {
    pub clauses: usize,
    pub variables: usize,
}

impl GadgetLayout {
    pub const CLAUSE_QUBITS: usize = 8;

    /// Literal qubit at `position` (0..3) of clause `clause`.
    pub fn literal(&self, clause: usize, position: usize) -> usize {
        clause * Self::CLAUSE_QUBITS + position
    }

    pub fn ancilla(&self, clause: usize, position: usize) -> usize {
        clause * Self::CLAUSE_QUBITS + 3 + position
    }

    pub fn clause_true(&self, clause: usize) -> usize {
        clause * Self::CLAUSE_QUBITS + 6
    }

    pub fn clause_false(&self, clause: usize) -> usize {
        clause * Self::CLAUSE_QUBITS + 7
    }

    /// Ideal-literal qubit of 1-based variable `var`.
    pub fn ideal(&self, var: usize) -> usize {
        self.clauses * Self::CLAUSE_QUBITS + (var - 1)
    }

    /// Placeholder qubit that pads the ideal literal of `var`.
    pub fn spacer(&self, var: usize) -> usize {
        self.clauses * Self::CLAUSE_QUBITS + self.variables + (var - 1)
    }

    pub fn ideal_true(&self) -> usize {
        self.clauses * Self::CLAUSE_QUBITS + 2 * self.variables
    }

    pub fn ideal_false(&self) -> usize {
        self.ideal_true() + 1
    }

    pub fn qubits(&self) -> usize {
        if self.clauses == 0 {
            0
        } else {
            self.ideal_false() + 1
        }
    }
}

/// Builds the clause/consistency gadget circuit for a 3-CNF formula.
///
/// Literals are DIMACS-style: `v` or `-v` for 1-based variable `v`. Each clause
/// gets eight qubits (three literals, three ancillas, `T`, `F`); for each literal
/// position the literal meets `T` (positive) or `F` (negated), `T` meets `F`, and
/// the other two literals meet their ancillas. Every occurrence of a variable then
/// meets that variable's ideal-literal qubit, whose chain is padded with
/// placeholder gates on a spacer qubit up to one gate per clause. Finally the ideal
/// `T`/`F` pair gets a chain of one gate per clause.
pub fn three_sat_gadget(formula: &[Vec<i32>]) -> Result<(LogicalCircuit, GadgetLayout), CircuitError> {
    let mut variables = 0usize;
    for (i, clause) in formula.iter().enumerate() {
        if clause.len() != 3 {
            return Err(CircuitError::MalformedClause {
                clause: i,
                reason: format!("expected 3 literals, found {}", clause.len()),
            });
        }
        for &lit in clause {
            if lit == 0 {
                return Err(CircuitError::MalformedClause { clause: i, reason: "literal 0".into() });
            }
            variables = variables.max(lit.unsigned_abs() as usize);
        }
    }
    let layout = GadgetLayout { clauses: formula.len(), variables };
    let mut pairs = Vec::new();
    for (i, clause) in formula.iter().enumerate() {
        for (j, &lit) in clause.iter().enumerate() {
            let side = if lit > 0 { layout.clause_true(i) } else { layout.clause_false(i) };
            pairs.push((layout.literal(i, j), side));
            pairs.push((layout.clause_true(i), layout.clause_false(i)));
            for k in (0..3).filter(|&k| k != j) {
                pairs.push((layout.literal(i, k), layout.ancilla(i, k)));
            }
        }
    }
    for var in 1..=variables {
        let ideal = layout.ideal(var);
        let mut count = 0;
        for (i, clause) in formula.iter().enumerate() {
            for (j, &lit) in clause.iter().enumerate() {
                if lit.unsigned_abs() as usize == var {
                    pairs.push((layout.literal(i, j), ideal));
                    count += 1;
                }
            }
        }
        while count < formula.len() {
            pairs.push((ideal, layout.spacer(var)));
            count += 1;
        }
    }
    for _ in 0..formula.len() {
        pairs.push((layout.ideal_true(), layout.ideal_false()));
    }
    let circuit = LogicalCircuit::new(layout.qubits(), pairs)?;
    Ok((circuit, layout))
}

/// GHZ preparation: a CNOT chain q0 -> q1 -> ... -> q(n-1).
pub fn ghz(n: usize) -> LogicalCircuit {
    LogicalCircuit::new(n, (0..n.saturating_sub(1)).map(|i| (i, i + 1))).unwrap()
}

/// Bernstein-Vazirani oracle: one CNOT from every set bit of `secret` onto the
/// last qubit.
pub fn bernstein_vazirani(n: usize, secret: u64) -> LogicalCircuit {
    assert!(n >= 2);
    let target = n - 1;
    let controls = (0..target.min(64)).filter(|i| secret >> i & 1 == 1);
    LogicalCircuit::new(n, controls.map(|c| (c, target))).unwrap()
}

/// QFT with controlled-phase gates lowered to two CNOTs each and the final
/// qubit-reversal swaps lowered to three CNOTs each.
pub fn qft(n: usize) -> LogicalCircuit {
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            pairs.push((j, i));
            pairs.push((j, i));
        }
    }
    for i in 0..n / 2 {
        let j = n - 1 - i;
        pairs.extend([(i, j), (j, i), (i, j)]);
    }
    LogicalCircuit::new(n, pairs).unwrap()
}

/// Trotterised 1D Ising evolution: per step, ZZ on even bonds then odd bonds,
/// each ZZ lowered to two CNOTs.
pub fn ising(n: usize, steps: usize) -> LogicalCircuit {
    let mut pairs = Vec::new();
    for _ in 0..steps {
        for start in [0, 1] {
            for i in (start..n.saturating_sub(1)).step_by(2) {
                pairs.push((i, i + 1));
                pairs.push((i, i + 1));
            }
        }
    }
    LogicalCircuit::new(n, pairs).unwrap()
}

/// W-state preparation: a controlled-rotation cascade (two CNOTs per step)
/// followed by the CNOT ladder that spreads the excitation.
pub fn w_state(n: usize) -> LogicalCircuit {
    let mut pairs = Vec::new();
    for i in 0..n.saturating_sub(1) {
        pairs.push((i, i + 1));
    }
    for i in (0..n.saturating_sub(1)).rev() {
        pairs.push((i + 1, i));
    }
    LogicalCircuit::new(n, pairs).unwrap()
}

/// Swap test on two `k`-qubit registers: `n = 2k + 1`, one controlled swap
/// (eight CNOTs) per register position, all controlled by qubit 0.
pub fn swap_test(n: usize) -> LogicalCircuit {
    assert!(n >= 3 && n % 2 == 1, "swap test needs an odd qubit count >= 3");
    let k = (n - 1) / 2;
    let mut pairs = Vec::new();
    for i in 0..k {
        let (a, b, c) = (0, 1 + i, 1 + k + i);
        pairs.extend([(c, b), (b, c), (a, c), (b, c), (a, c), (a, b), (a, b), (c, b)]);
    }
    LogicalCircuit::new(n, pairs).unwrap()
}

/// Phase-estimation-like kernel: `gates` CNOTs from the counting qubits
/// (round-robin) onto the last qubit. The DAG is a single chain.
pub fn qpe_like(n: usize, gates: usize) -> LogicalCircuit {
    assert!(n >= 2);
    let target = n - 1;
    LogicalCircuit::new(n, (0..gates).map(|i| (i % target, target))).unwrap()
}
