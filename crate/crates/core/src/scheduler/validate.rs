//! Independent checker for encoded schedules.

use std::collections::HashMap;
use std::fmt;

use crate::chip::{Cut, Model};
use crate::circuit::{GateDag, LogicalCircuit};
use crate::placement::TileMapping;
use crate::router::{Route, RoutingGraph, Site};

use super::{Action, EncodedSchedule, LONG_OP};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Missing { gate: usize },
    Duplicate { gate: usize },
    UnknownGate { gate: usize },
    Dependency { parent: usize, child: usize },
    OverCapacity { cycle: usize, node: usize, used: u32, capacity: u32 },
    TileConflict { cycle: usize, tile: Site },
    BadRoute { cycle: usize, gate: usize },
    PhaseOrder { cycle: usize, what: String },
    CutMismatch { cycle: usize, gate: usize },
    NoOpModify { cycle: usize, qubit: usize },
    WrongModel { cycle: usize },
    InitialCuts { expected: usize, got: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Missing { gate } => write!(f, "gate {gate} never scheduled"),
            Violation::Duplicate { gate } => write!(f, "gate {gate} scheduled more than once"),
            Violation::UnknownGate { gate } => write!(f, "gate {gate} does not exist"),
            Violation::Dependency { parent, child } => write!(f, "gate {child} starts before parent {parent} ends"),
            Violation::OverCapacity { cycle, node, used, capacity } => {
                write!(f, "cycle {cycle}: node {node} used {used} times, capacity {capacity}")
            }
            Violation::TileConflict { cycle, tile } => write!(f, "cycle {cycle}: tile {tile:?} used twice"),
            Violation::BadRoute { cycle, gate } => write!(f, "cycle {cycle}: route of gate {gate} does not join its tiles"),
            Violation::PhaseOrder { cycle, what } => write!(f, "cycle {cycle}: {what}"),
            Violation::CutMismatch { cycle, gate } => write!(f, "cycle {cycle}: gate {gate} has the wrong cut relation"),
            Violation::NoOpModify { cycle, qubit } => write!(f, "cycle {cycle}: modify of qubit {qubit} keeps its cut"),
            Violation::WrongModel { cycle } => write!(f, "cycle {cycle}: action does not belong to this model"),
            Violation::InitialCuts { expected, got } => write!(f, "expected {expected} initial cuts, got {got}"),
        }
    }
}

/// Checks a schedule against the circuit, chip graph and mapping. Returns every
/// violation found.
pub fn validate(
    schedule: &EncodedSchedule,
    circuit: &LogicalCircuit,
    graph: &RoutingGraph,
    mapping: &TileMapping,
) -> Result<(), Vec<Violation>> {
    let mut v = Vec::new();
    let dag = GateDag::build(circuit);
    let model = schedule.model;
    let n = circuit.n();
    if model != graph.model() {
        v.push(Violation::WrongModel { cycle: 0 });
        return Err(v);
    }
    let mut cuts: Vec<Cut> = match model {
        Model::DoubleDefect => {
            if schedule.initial_cuts.len() != n {
                v.push(Violation::InitialCuts { expected: n, got: schedule.initial_cuts.len() });
                return Err(v);
            }
            schedule.initial_cuts.clone()
        }
        Model::LatticeSurgery => vec![Cut::X; n],
    };

    // Gate intervals, assembled from single actions and phased runs.
    let mut span: Vec<Option<(usize, usize)>> = vec![None; circuit.len()];
    // Open direct CNOTs: gate -> (start cycle, last phase, route).
    let mut open_direct: HashMap<usize, (usize, u8, &Route)> = HashMap::new();
    // Open modifies: qubit -> (start cycle, last phase, target cut).
    let mut open_modify: HashMap<usize, (usize, u8, Cut)> = HashMap::new();

    for (t, actions) in schedule.cycles.iter().enumerate() {
        let mut load: HashMap<usize, u32> = HashMap::new();
        let mut tiles: HashMap<Site, ()> = HashMap::new();
        let mut cut_updates = Vec::new();
        let mut claim = |site: Site, v: &mut Vec<Violation>| {
            if tiles.insert(site, ()).is_some() {
                v.push(Violation::TileConflict { cycle: t, tile: site });
            }
        };
        for action in actions {
            match action {
                Action::Braid { gate, route } | Action::Bell { gate, route } | Action::DirectSameCut { gate, route, .. } => {
                    let gate = *gate;
                    if gate >= circuit.len() {
                        v.push(Violation::UnknownGate { gate });
                        continue;
                    }
                    let g = circuit.gate(gate);
                    let (a, b) = (mapping.tile(g.control), mapping.tile(g.target));
                    if !graph.route_joins(route, a, b) {
                        v.push(Violation::BadRoute { cycle: t, gate });
                    }
                    claim(a, &mut v);
                    claim(b, &mut v);
                    for &node in route.nodes() {
                        *load.entry(node).or_default() += 1;
                    }
                    let same = cuts[g.control] == cuts[g.target];
                    match action {
                        Action::Braid { .. } => {
                            if model != Model::DoubleDefect {
                                v.push(Violation::WrongModel { cycle: t });
                            }
                            if same {
                                v.push(Violation::CutMismatch { cycle: t, gate });
                            }
                            record(&mut span, &mut v, gate, t, t);
                        }
                        Action::Bell { .. } => {
                            if model != Model::LatticeSurgery {
                                v.push(Violation::WrongModel { cycle: t });
                            }
                            record(&mut span, &mut v, gate, t, t);
                        }
                        Action::DirectSameCut { phase, .. } => {
                            if model != Model::DoubleDefect {
                                v.push(Violation::WrongModel { cycle: t });
                            }
                            if !same {
                                v.push(Violation::CutMismatch { cycle: t, gate });
                            }
                            let phase = *phase;
                            match open_direct.get(&gate).copied() {
                                None if phase == 1 => {
                                    open_direct.insert(gate, (t, 1, route));
                                }
                                Some((start, last, r)) if phase == last + 1 && start + last as usize == t && r == route => {
                                    if phase as usize == LONG_OP {
                                        open_direct.remove(&gate);
                                        record(&mut span, &mut v, gate, start, t);
                                    } else {
                                        open_direct.insert(gate, (start, phase, r));
                                    }
                                }
                                _ => v.push(Violation::PhaseOrder {
                                    cycle: t,
                                    what: format!("direct CNOT of gate {gate} phase {phase} out of order"),
                                }),
                            }
                        }
                        Action::CutModify { .. } => unreachable!(),
                    }
                }
                Action::CutModify { qubit, tile, new_cut, phase } => {
                    let (q, phase) = (*qubit, *phase);
                    if model != Model::DoubleDefect {
                        v.push(Violation::WrongModel { cycle: t });
                    }
                    if q >= n || mapping.tile(q) != *tile {
                        v.push(Violation::PhaseOrder { cycle: t, what: format!("modify names qubit {q} on the wrong tile") });
                        continue;
                    }
                    claim(*tile, &mut v);
                    match open_modify.get(&q).copied() {
                        None if phase == 1 => {
                            if *new_cut == cuts[q] {
                                v.push(Violation::NoOpModify { cycle: t, qubit: q });
                            }
                            open_modify.insert(q, (t, 1, *new_cut));
                        }
                        Some((start, last, c)) if phase == last + 1 && start + last as usize == t && c == *new_cut => {
                            if phase as usize == LONG_OP {
                                open_modify.remove(&q);
                                cut_updates.push((q, c));
                            } else {
                                open_modify.insert(q, (start, phase, c));
                            }
                        }
                        _ => v.push(Violation::PhaseOrder {
                            cycle: t,
                            what: format!("modify of qubit {q} phase {phase} out of order"),
                        }),
                    }
                }
            }
        }
        for (node, used) in load {
            let capacity = graph.capacity(node);
            if used > capacity {
                v.push(Violation::OverCapacity { cycle: t, node, used, capacity });
            }
        }
        for (q, c) in cut_updates {
            cuts[q] = c;
        }
    }
    let end = schedule.cycles.len();
    for (gate, ..) in open_direct {
        v.push(Violation::PhaseOrder { cycle: end, what: format!("direct CNOT of gate {gate} unfinished") });
    }
    for (q, ..) in open_modify {
        v.push(Violation::PhaseOrder { cycle: end, what: format!("modify of qubit {q} unfinished") });
    }
    for (gate, s) in span.iter().enumerate() {
        if s.is_none() {
            v.push(Violation::Missing { gate });
        }
    }
    for (p, c) in dag.edges() {
        if let (Some((_, pe)), Some((cs, _))) = (span[p], span[c]) {
            if cs <= pe {
                v.push(Violation::Dependency { parent: p, child: c });
            }
        }
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

fn record(span: &mut [Option<(usize, usize)>], v: &mut Vec<Violation>, gate: usize, start: usize, end: usize) {
    if span[gate].is_some() {
        v.push(Violation::Duplicate { gate });
    } else {
        span[gate] = Some((start, end));
    }
}
