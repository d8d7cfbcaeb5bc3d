//! Parallelism-degree estimation.
//!
//! [`para_finding`] builds a layering of minimum length (one layer per step of
//! the critical path) while keeping layers as even as it can. Every gate carries
//! a window `[low, high]` of layers it may occupy; the gate with the tightest
//! window is fixed first, into its least-loaded layer, and the windows of its
//! descendants and ancestors shrink accordingly.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::circuit::GateDag;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProfileError {
    #[error("no candidate gates to choose from")]
    EmptyCandidates,
    #[error("candidate gate {gate} has an empty window [{low}, {high}]")]
    EmptyWindow { gate: usize, low: usize, high: usize },
}

/// Minimum-length layer assignment. Layer numbers are 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSchedule {
    layers: Vec<Vec<usize>>,
    layer_of: Vec<usize>,
    pm: usize,
}

impl LayerSchedule {
    /// Builds a schedule from an explicit layer assignment (1-based layers).
    pub fn from_assignment(layer_of: Vec<usize>, depth: usize) -> Self {
        let mut layers = vec![Vec::new(); depth];
        for (g, &l) in layer_of.iter().enumerate() {
            layers[l - 1].push(g);
        }
        let pm = layers.iter().map(Vec::len).max().unwrap_or(0);
        LayerSchedule { layers, layer_of, pm }
    }

    /// Gate ids per layer, ascending within each layer.
    pub fn layers(&self) -> &[Vec<usize>] {
        &self.layers
    }

    pub fn layer_of(&self, gate: usize) -> usize {
        self.layer_of[gate]
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Largest layer size: the parallelism estimate.
    pub fn pm(&self) -> usize {
        self.pm
    }

    /// True when every DAG edge goes from a lower to a higher layer.
    pub fn respects(&self, dag: &GateDag) -> bool {
        dag.edges().all(|(u, v)| self.layer_of[u] < self.layer_of[v])
    }
}

/// Picks the next gate and layer.
///
/// `candidates` holds `(gate, low, high)`; `loads[i]` is the size of layer `i + 1`.
/// Returns the gate with the smallest `high - low` (lowest id on ties) and the
/// least-loaded layer inside its window (earliest on ties), as a 1-based layer.
pub fn slack_tiebreak(
    candidates: &[(usize, usize, usize)],
    loads: &[usize],
) -> Result<(usize, usize), ProfileError> {
    let &(gate, low, high) = candidates
        .iter()
        .min_by_key(|&&(g, lo, hi)| (hi.saturating_sub(lo), g))
        .ok_or(ProfileError::EmptyCandidates)?;
    if low == 0 || low > high || high > loads.len() {
        return Err(ProfileError::EmptyWindow { gate, low, high });
    }
    Ok((gate, least_loaded(loads, low, high)))
}

fn least_loaded(loads: &[usize], low: usize, high: usize) -> usize {
    (low..=high).min_by_key(|&l| (loads[l - 1], l)).unwrap()
}

pub fn para_finding(dag: &GateDag) -> LayerSchedule {
    let g = dag.len();
    let alpha = dag.alpha();
    let mut low = dag.asap_layers().to_vec();
    let mut high = dag.alap_layers();
    let mut loads = vec![0usize; alpha];
    let mut fixed = vec![false; g];
    let mut queue: BTreeSet<(usize, usize)> = (0..g).map(|v| (high[v] - low[v], v)).collect();
    let mut stack = Vec::new();

    while let Some((_, v)) = queue.pop_first() {
        let layer = least_loaded(&loads, low[v], high[v]);
        loads[layer - 1] += 1;
        fixed[v] = true;
        low[v] = layer;
        high[v] = layer;

        // Raise lows of descendants.
        stack.push(v);
        while let Some(u) = stack.pop() {
            for &c in dag.children(u) {
                if low[c] < low[u] + 1 {
                    debug_assert!(!fixed[c]);
                    queue.remove(&(high[c] - low[c], c));
                    low[c] = low[u] + 1;
                    debug_assert!(low[c] <= high[c]);
                    queue.insert((high[c] - low[c], c));
                    stack.push(c);
                }
            }
        }
        // Lower highs of ancestors.
        stack.push(v);
        while let Some(u) = stack.pop() {
            for &p in dag.parents(u) {
                if high[p] + 1 > high[u] {
                    debug_assert!(!fixed[p]);
                    queue.remove(&(high[p] - low[p], p));
                    high[p] = high[u] - 1;
                    debug_assert!(low[p] <= high[p]);
                    queue.insert((high[p] - low[p], p));
                    stack.push(p);
                }
            }
        }
    }
    LayerSchedule::from_assignment(low, alpha)
}
