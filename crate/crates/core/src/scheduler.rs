//! Cycle-by-cycle scheduling of CNOTs on a mapped chip.
//!
//! [`schedule_limited`] is the list scheduler for chips that cannot run whole
//! layers at once: each cycle it walks the ready gates in priority order,
//! routes what fits and decides, for same-cut double-defect pairs, between a
//! three-cycle direct CNOT and flipping one tile's cut first.
//!
//! [`schedule_sufficient`] runs one layer per cycle on chips whose capacity
//! covers the parallelism estimate; on double-defect chips it groups layers
//! into bipartite segments and flips cuts between segments.

pub mod validate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chip::{ChipLayout, Cut, Model};
use crate::circuit::{GateDag, LogicalCircuit};
use crate::placement::{ParityUnionFind, TileMapping};
use crate::profiler::LayerSchedule;
use crate::router::{route_batch_guaranteed, Occupancy, Route, RouteError, RoutingGraph, Site};

pub use validate::{validate, Violation};

/// Cycles a direct same-cut CNOT or a cut modification takes.
pub const LONG_OP: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    /// Double-defect braid between opposite cuts; one cycle.
    Braid { gate: usize, route: Route },
    /// Lattice-surgery CNOT through a Bell-state chain, or a direct merge.
    Bell { gate: usize, route: Route },
    /// Same-cut double-defect CNOT holding its route for three cycles.
    DirectSameCut { gate: usize, route: Route, phase: u8 },
    /// Three-cycle cut flip of one tile.
    CutModify { qubit: usize, tile: Site, new_cut: Cut, phase: u8 },
}

impl Action {
    pub fn gate(&self) -> Option<usize> {
        match self {
            Action::Braid { gate, .. } | Action::Bell { gate, .. } | Action::DirectSameCut { gate, .. } => Some(*gate),
            Action::CutModify { .. } => None,
        }
    }

    pub fn route(&self) -> Option<&Route> {
        match self {
            Action::Braid { route, .. } | Action::Bell { route, .. } | Action::DirectSameCut { route, .. } => Some(route),
            Action::CutModify { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedSchedule {
    pub model: Model,
    /// Cut of every qubit before cycle 0; empty for lattice surgery.
    pub initial_cuts: Vec<Cut>,
    pub cycles: Vec<Vec<Action>>,
}

impl EncodedSchedule {
    /// Number of cycles.
    pub fn delta(&self) -> usize {
        self.cycles.len()
    }

    fn push(&mut self, t: usize, action: Action) {
        while self.cycles.len() <= t {
            self.cycles.push(Vec::new());
        }
        self.cycles[t].push(action);
    }

    /// Number of tile cut flips.
    pub fn modifications(&self) -> usize {
        self.cycles
            .iter()
            .flatten()
            .filter(|a| matches!(a, Action::CutModify { phase: 1, .. }))
            .count()
    }

    /// Serialisable view with routes as display coordinates.
    pub fn export(&self, graph: &RoutingGraph) -> ScheduleDoc {
        let cycles = self
            .cycles
            .iter()
            .enumerate()
            .map(|(index, actions)| CycleDoc {
                index,
                actions: actions
                    .iter()
                    .map(|a| {
                        let (kind, gate, qubit, phase, new_cut) = match a {
                            Action::Braid { gate, .. } => ("braid", Some(*gate), None, None, None),
                            Action::Bell { gate, .. } => ("bell", Some(*gate), None, None, None),
                            Action::DirectSameCut { gate, phase, .. } => ("direct", Some(*gate), None, Some(*phase), None),
                            Action::CutModify { qubit, new_cut, phase, .. } => {
                                ("modify", None, Some(*qubit), Some(*phase), Some(*new_cut))
                            }
                        };
                        let route = match a {
                            Action::CutModify { tile, .. } => vec![[tile.0, tile.1]],
                            _ => a.route().unwrap().nodes().iter().map(|&v| graph.coord(v)).collect(),
                        };
                        ActionDoc { kind: kind.into(), gate, qubit, route, phase, new_cut }
                    })
                    .collect(),
            })
            .collect();
        ScheduleDoc { delta: self.delta(), cycles }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleDoc {
    pub delta: usize,
    pub cycles: Vec<CycleDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleDoc {
    pub index: usize,
    pub actions: Vec<ActionDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionDoc {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gate: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qubit: Option<usize>,
    pub route: Vec<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub new_cut: Option<Cut>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("gate {gate} cannot be routed even on an idle chip")]
    Unroutable { gate: usize },
    #[error("chip capacity {} is below the parallelism estimate {pm}; use the limited-resource scheduler", capacity.map_or("0 (no channels)".to_string(), |c| c.to_string()))]
    Insufficient { capacity: Option<usize>, pm: usize },
    #[error("double-defect scheduling needs one cut per qubit ({expected}), got {got}")]
    CutCount { expected: usize, got: usize },
    #[error("layer {layer}: {source}")]
    Batch { layer: usize, source: RouteError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateOrder {
    /// Criticality, then remaining gates, descending; gate id ascending.
    Priority,
    /// Program order.
    Program,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SameCutPolicy {
    /// Flip the tile with the lowest M-value when that value is negative.
    MValue,
    /// Whichever finishes the CNOT sooner; direct on ties.
    TimeFirst,
    /// Always flip: one lane-cycle instead of three.
    ChannelFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LimitedOptions {
    pub order: GateOrder,
    pub same_cut: SameCutPolicy,
}

impl Default for LimitedOptions {
    fn default() -> Self {
        LimitedOptions { order: GateOrder::Priority, same_cut: SameCutPolicy::MValue }
    }
}

/// Criticality and remaining-gate count of one gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct GatePriority {
    pub criticality: usize,
    pub remaining: usize,
}

pub fn gate_priorities(dag: &GateDag) -> Vec<GatePriority> {
    dag.criticality()
        .into_iter()
        .zip(dag.remaining())
        .map(|(criticality, remaining)| GatePriority { criticality, remaining })
        .collect()
}

/// Pressure weight of the lane term: twice the other ready gates per lane of
/// total bandwidth, scaled by the qubit count.
pub fn theta(other_ready: usize, total_bandwidth: usize, n: usize) -> f64 {
    if total_bandwidth == 0 {
        return 0.0;
    }
    2.0 * other_ready as f64 / total_bandwidth as f64 * n as f64
}

/// Time term of flipping a tile that has been idle for `credit` cycles: the
/// flip-then-braid path costs `4 - credit` more cycles against 3 for direct.
pub fn m_time(credit: usize) -> f64 {
    (4 - credit.min(LONG_OP)) as f64 - 3.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MValue {
    pub m_t: f64,
    pub m_s: f64,
    pub theta: f64,
}

impl MValue {
    pub fn value(&self) -> f64 {
        self.m_t + self.theta * self.m_s
    }
}

/// Lane term of flipping `qubit` for `gate`: one lane-cycle saved on the gate
/// itself, then one saved or lost for each child on the same tile depending on
/// whether the child's pair ends up opposite or equal.
pub fn m_space(circuit: &LogicalCircuit, dag: &GateDag, cuts: &[Cut], gate: usize, qubit: usize) -> f64 {
    let flipped = cuts[qubit].flip();
    let mut m = -1.0;
    for &c in dag.children(gate) {
        let child = circuit.gate(c);
        if child.touches(qubit) {
            let partner = child.partner(qubit);
            m += if cuts[partner] != flipped { -1.0 } else { 1.0 };
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SameCutDecision {
    Direct,
    Modify { qubit: usize },
}

/// Everything the same-cut decision looks at, for one candidate tile.
#[derive(Debug, Clone, Copy)]
pub struct TileOption {
    pub qubit: usize,
    pub credit: usize,
    pub m: MValue,
}

pub fn decide_same_cut(policy: SameCutPolicy, options: &[TileOption]) -> SameCutDecision {
    // Ties keep the earlier option (the control tile).
    let most_idle = options.iter().fold(None::<&TileOption>, |best, o| match best {
        Some(b) if b.credit >= o.credit => Some(b),
        _ => Some(o),
    });
    match policy {
        SameCutPolicy::MValue => {
            let best = options.iter().fold(None::<&TileOption>, |best, o| match best {
                Some(b) if b.m.value() <= o.m.value() => Some(b),
                _ => Some(o),
            });
            match best {
                Some(o) if o.m.value() < 0.0 => SameCutDecision::Modify { qubit: o.qubit },
                _ => SameCutDecision::Direct,
            }
        }
        SameCutPolicy::TimeFirst => match most_idle {
            Some(o) if o.credit >= 2 => SameCutDecision::Modify { qubit: o.qubit },
            _ => SameCutDecision::Direct,
        },
        SameCutPolicy::ChannelFirst => match most_idle {
            Some(o) => SameCutDecision::Modify { qubit: o.qubit },
            None => SameCutDecision::Direct,
        },
    }
}

struct LimitedState<'a> {
    circuit: &'a LogicalCircuit,
    graph: &'a RoutingGraph,
    mapping: &'a TileMapping,
    occ: Occupancy,
    schedule: EncodedSchedule,
    cuts: Vec<Cut>,
    /// Last cycle each qubit's tile is busy.
    busy_until: Vec<Option<usize>>,
    /// Gate waiting to braid after flipping one of these tiles.
    locked_by: Vec<Option<usize>>,
}

impl LimitedState<'_> {
    fn tile_free(&self, q: usize, t: usize) -> bool {
        self.busy_until[q].is_none_or(|b| b < t)
    }

    fn credit(&self, q: usize, t: usize) -> usize {
        let idle = match self.busy_until[q] {
            None => t,
            Some(b) => t - b - 1,
        };
        idle.min(LONG_OP)
    }

    fn occupy(&mut self, q: usize, until: usize) {
        self.busy_until[q] = Some(self.busy_until[q].map_or(until, |b| b.max(until)));
    }

    /// Tries a one-cycle CNOT at `t`. Returns true if it was placed.
    fn one_cycle(&mut self, gate: usize, t: usize) -> bool {
        let g = self.circuit.gate(gate);
        let (a, b) = (self.mapping.tile(g.control), self.mapping.tile(g.target));
        let Some(route) = self.graph.find_path(&self.occ, t, 1, a, b) else { return false };
        self.occ.commit(&route, t, 1);
        let action = match self.graph.model() {
            Model::DoubleDefect => Action::Braid { gate, route },
            Model::LatticeSurgery => Action::Bell { gate, route },
        };
        self.schedule.push(t, action);
        self.occupy(g.control, t);
        self.occupy(g.target, t);
        true
    }

    fn direct(&mut self, gate: usize, t: usize) -> bool {
        let g = self.circuit.gate(gate);
        let (a, b) = (self.mapping.tile(g.control), self.mapping.tile(g.target));
        let Some(route) = self.graph.find_path(&self.occ, t, LONG_OP, a, b) else { return false };
        self.occ.commit(&route, t, LONG_OP);
        for phase in 1..=LONG_OP as u8 {
            let action = Action::DirectSameCut { gate, route: route.clone(), phase };
            self.schedule.push(t + phase as usize - 1, action);
        }
        self.occupy(g.control, t + LONG_OP - 1);
        self.occupy(g.target, t + LONG_OP - 1);
        true
    }

    /// Flips `q` in the `credit` idle cycles before `t` plus as many cycles
    /// from `t` as still needed.
    fn modify(&mut self, q: usize, t: usize, credit: usize) {
        let start = t - credit;
        let new_cut = self.cuts[q].flip();
        let tile = self.mapping.tile(q);
        for phase in 1..=LONG_OP as u8 {
            self.schedule.push(start + phase as usize - 1, Action::CutModify { qubit: q, tile, new_cut, phase });
        }
        self.cuts[q] = new_cut;
        self.occupy(q, start + LONG_OP - 1);
    }
}

/// List scheduling for limited resources (both models).
///
/// `cuts` is the initial cut of every qubit and is ignored for lattice surgery.
pub fn schedule_limited(
    circuit: &LogicalCircuit,
    dag: &GateDag,
    graph: &RoutingGraph,
    layout: &ChipLayout,
    mapping: &TileMapping,
    cuts: &[Cut],
    options: LimitedOptions,
) -> Result<EncodedSchedule, ScheduleError> {
    let n = circuit.n();
    let model = graph.model();
    let initial_cuts = match model {
        Model::DoubleDefect => {
            if cuts.len() != n {
                return Err(ScheduleError::CutCount { expected: n, got: cuts.len() });
            }
            cuts.to_vec()
        }
        Model::LatticeSurgery => Vec::new(),
    };
    let prio = gate_priorities(dag);
    let total_bw = layout.total_bandwidth();
    let mut st = LimitedState {
        circuit,
        graph,
        mapping,
        occ: Occupancy::new(graph),
        schedule: EncodedSchedule { model, initial_cuts: initial_cuts.clone(), cycles: Vec::new() },
        cuts: if initial_cuts.is_empty() { vec![Cut::X; n] } else { initial_cuts },
        busy_until: vec![None; n],
        locked_by: vec![None; n],
    };

    let g_count = circuit.len();
    let mut pending_parents: Vec<usize> = (0..g_count).map(|g| dag.parents(g).len()).collect();
    // Gate ids whose parents are done, with the first cycle they may start.
    let mut waiting: Vec<(usize, usize)> = dag.sources().into_iter().map(|g| (g, 0)).collect();
    let mut done = 0;
    let mut t = 0;
    while done < g_count {
        let mut front: Vec<usize> = waiting.iter().filter(|&&(_, e)| e <= t).map(|&(g, _)| g).collect();
        match options.order {
            GateOrder::Priority => front.sort_by(|&x, &y| prio[y].cmp(&prio[x]).then(x.cmp(&y))),
            GateOrder::Program => front.sort_unstable(),
        }
        let mut progress = false;
        let mut finished = Vec::new();
        for &gid in &front {
            let g = *circuit.gate(gid);
            let (a, b) = (g.control, g.target);
            if !st.tile_free(a, t) || !st.tile_free(b, t) {
                continue;
            }
            let placed_until = if model == Model::LatticeSurgery || st.cuts[a] != st.cuts[b] {
                st.one_cycle(gid, t).then_some(t)
            } else {
                let th = theta(front.len() - 1, total_bw, n);
                let options_for: Vec<TileOption> = [a, b]
                    .into_iter()
                    .filter(|&q| st.locked_by[q].is_none_or(|h| h == gid))
                    .map(|q| {
                        let credit = st.credit(q, t);
                        let m = MValue { m_t: m_time(credit), m_s: m_space(circuit, dag, &st.cuts, gid, q), theta: th };
                        TileOption { qubit: q, credit, m }
                    })
                    .collect();
                match decide_same_cut(options.same_cut, &options_for) {
                    SameCutDecision::Modify { qubit } => {
                        let credit = st.credit(qubit, t);
                        st.modify(qubit, t, credit);
                        st.locked_by[a] = Some(gid);
                        st.locked_by[b] = Some(gid);
                        progress = true;
                        if credit == LONG_OP {
                            st.one_cycle(gid, t).then_some(t)
                        } else {
                            None
                        }
                    }
                    SameCutDecision::Direct => st.direct(gid, t).then_some(t + LONG_OP - 1),
                }
            };
            if let Some(end) = placed_until {
                progress = true;
                for q in [a, b] {
                    if st.locked_by[q] == Some(gid) {
                        st.locked_by[q] = None;
                    }
                }
                finished.push((gid, end));
            }
        }
        for (gid, end) in finished {
            done += 1;
            waiting.retain(|&(g, _)| g != gid);
            for &c in dag.children(gid) {
                pending_parents[c] -= 1;
                if pending_parents[c] == 0 {
                    waiting.push((c, end + 1));
                }
            }
        }
        if !progress && !front.is_empty() {
            let in_flight = st.busy_until.iter().any(|b| b.is_some_and(|b| b >= t));
            if !in_flight {
                return Err(ScheduleError::Unroutable { gate: front[0] });
            }
        }
        t += 1;
    }
    Ok(st.schedule)
}

/// Longest run of layers from `start` whose combined communication graph is
/// bipartite, and its two-colouring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartitePrefix {
    /// First layer index not consumed.
    pub end: usize,
    /// Colour of every qubit touched by the consumed layers.
    pub colors: Vec<Option<Cut>>,
    /// Connected component (lowest qubit) of every coloured qubit.
    pub component: Vec<Option<usize>>,
}

pub fn bipartite_prefix(circuit: &LogicalCircuit, layers: &LayerSchedule, start: usize) -> BipartitePrefix {
    let n = circuit.n();
    let mut uf = ParityUnionFind::new(n);
    let mut touched = vec![false; n];
    let mut end = start;
    'layers: while end < layers.depth() {
        let mut candidate = uf.clone();
        for &g in &layers.layers()[end] {
            let gate = circuit.gate(g);
            if !candidate.union_opposite(gate.control, gate.target) {
                break 'layers;
            }
        }
        uf = candidate;
        for &g in &layers.layers()[end] {
            let gate = circuit.gate(g);
            touched[gate.control] = true;
            touched[gate.target] = true;
        }
        end += 1;
    }
    let cuts = uf.coloring(&touched);
    let mut component = vec![None; n];
    let mut lowest: Vec<Option<usize>> = vec![None; n];
    for q in 0..n {
        if touched[q] {
            let (root, _) = uf.find(q);
            component[q] = Some(*lowest[root].get_or_insert(q));
        }
    }
    let colors = (0..n).map(|q| touched[q].then_some(cuts[q])).collect();
    BipartitePrefix { end, colors, component }
}

/// Layer-per-cycle scheduling for chips whose capacity covers the parallelism
/// estimate. Returns the schedule; its `initial_cuts` are the chosen initial
/// cut assignment on double-defect chips.
pub fn schedule_sufficient(
    circuit: &LogicalCircuit,
    layers: &LayerSchedule,
    graph: &RoutingGraph,
    layout: &ChipLayout,
    mapping: &TileMapping,
) -> Result<EncodedSchedule, ScheduleError> {
    let pm = layers.pm();
    let capacity = layout.capacity();
    if pm > 0 && capacity.is_none_or(|c| c < pm) {
        return Err(ScheduleError::Insufficient { capacity, pm });
    }
    let n = circuit.n();
    let model = graph.model();
    let b = layout.bandwidth();
    let mut schedule = EncodedSchedule { model, initial_cuts: Vec::new(), cycles: Vec::new() };
    let route_layer = |li: usize| -> Result<Vec<(usize, Route)>, ScheduleError> {
        let gates = &layers.layers()[li];
        let pairs: Vec<(Site, Site)> = gates
            .iter()
            .map(|&g| (mapping.tile(circuit.gate(g).control), mapping.tile(circuit.gate(g).target)))
            .collect();
        let routes =
            route_batch_guaranteed(graph, b, &pairs).map_err(|source| ScheduleError::Batch { layer: li, source })?;
        Ok(gates.iter().copied().zip(routes).collect())
    };
    match model {
        Model::LatticeSurgery => {
            for li in 0..layers.depth() {
                for (gate, route) in route_layer(li)? {
                    schedule.push(li, Action::Bell { gate, route });
                }
            }
        }
        Model::DoubleDefect => {
            let mut cuts = vec![Cut::X; n];
            let mut start = 0;
            let mut t = 0;
            while start < layers.depth() {
                let seg = bipartite_prefix(circuit, layers, start);
                let target = orient(&seg, &cuts, start == 0);
                if start == 0 {
                    schedule.initial_cuts = target.clone();
                } else {
                    let changed: Vec<usize> = (0..n).filter(|&q| target[q] != cuts[q]).collect();
                    if !changed.is_empty() {
                        for q in changed {
                            for phase in 1..=LONG_OP as u8 {
                                let action = Action::CutModify { qubit: q, tile: mapping.tile(q), new_cut: target[q], phase };
                                schedule.push(t + phase as usize - 1, action);
                            }
                        }
                        t += LONG_OP;
                    }
                }
                cuts = target;
                for li in start..seg.end {
                    for (gate, route) in route_layer(li)? {
                        schedule.push(t, Action::Braid { gate, route });
                    }
                    t += 1;
                }
                start = seg.end;
            }
            if schedule.initial_cuts.is_empty() {
                schedule.initial_cuts = cuts;
            }
        }
    }
    Ok(schedule)
}

/// Cut vector for a segment: coloured qubits follow the segment colouring,
/// each component oriented to change as few tiles as possible (the first
/// segment keeps the colouring as is); other qubits keep their cut.
fn orient(seg: &BipartitePrefix, current: &[Cut], first: bool) -> Vec<Cut> {
    let n = current.len();
    let mut flip = vec![false; n];
    if !first {
        let mut same = vec![0i64; n];
        for q in 0..n {
            if let (Some(c), Some(comp)) = (seg.colors[q], seg.component[q]) {
                same[comp] += if c == current[q] { 1 } else { -1 };
            }
        }
        for comp in 0..n {
            flip[comp] = same[comp] < 0;
        }
    }
    (0..n)
        .map(|q| match (seg.colors[q], seg.component[q]) {
            (Some(c), Some(comp)) => {
                if flip[comp] {
                    c.flip()
                } else {
                    c
                }
            }
            _ => current[q],
        })
        .collect()
}

#[cfg(test)]
mod tests;
