//! Exact answers for tiny instances: minimum parallelism degree, minimum
//! cycle count and simultaneous-routing feasibility. Used as ground truth by
//! tests; refuses anything over its budget.

use std::collections::{HashMap, HashSet};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::chip::{ChipLayout, Cut, Model};
use crate::circuit::{GateDag, LogicalCircuit};
use crate::placement::TileMapping;
use crate::router::{exhaustive_routes, Occupancy, Route, RoutingGraph, Site};
use crate::scheduler::LONG_OP;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleBudget {
    pub max_gates: usize,
    pub max_qubits: usize,
    pub max_rows: usize,
    pub max_cols: usize,
    pub time_limit: Option<Duration>,
    /// Cap on candidate routes per gate and on steps per routing search
    /// (the latter scaled by 10 000).
    pub max_routes: usize,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget { max_gates: 8, max_qubits: 6, max_rows: 3, max_cols: 3, time_limit: Some(Duration::from_secs(120)), max_routes: 400 }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("{what} = {value} exceeds the oracle budget of {limit}")]
    OverBudget { what: &'static str, value: usize, limit: usize },
    #[error("oracle search exceeded its time limit")]
    TimedOut,
    #[error("no schedule exists: gate {gate} can never be routed")]
    Infeasible { gate: usize },
    #[error("invalid oracle input: {0}")]
    Invalid(String),
}

fn check(what: &'static str, value: usize, limit: usize) -> Result<(), OracleError> {
    if value > limit {
        Err(OracleError::OverBudget { what, value, limit })
    } else {
        Ok(())
    }
}

/// Minimum over all dependency-respecting layerings of length exactly the
/// critical path of the largest layer.
pub fn optimal_pm(dag: &GateDag, budget: &OracleBudget) -> Result<usize, OracleError> {
    let g = dag.len();
    check("gates", g, budget.max_gates)?;
    if g == 0 {
        return Ok(0);
    }
    let alpha = dag.alpha();
    let asap = dag.asap_layers();
    let alap = dag.alap_layers();
    // Gate ids are a topological order: parents always come first.
    fn place(dag: &GateDag, asap: &[usize], alap: &[usize], k: usize, i: usize, layer: &mut [usize], load: &mut [usize]) -> bool {
        if i == layer.len() {
            return true;
        }
        let lo = dag.parents(i).iter().map(|&p| layer[p] + 1).max().unwrap_or(1).max(asap[i]);
        for l in lo..=alap[i] {
            if load[l - 1] < k {
                load[l - 1] += 1;
                layer[i] = l;
                if place(dag, asap, alap, k, i + 1, layer, load) {
                    return true;
                }
                load[l - 1] -= 1;
            }
        }
        false
    }
    for k in g.div_ceil(alpha)..=g {
        let mut layer = vec![0; g];
        let mut load = vec![0; alpha];
        if place(dag, asap, &alap, k, 0, &mut layer, &mut load) {
            return Ok(k);
        }
    }
    unreachable!("one gate per layer slot always fits")
}

/// Whether all pairs can be routed in the same cycle on an otherwise empty
/// chip, with only the pair tiles occupied.
pub fn routing_feasible(layout: &ChipLayout, pairs: &[(Site, Site)], budget: &OracleBudget) -> Result<bool, OracleError> {
    check("tile rows", layout.rows(), budget.max_rows)?;
    check("tile columns", layout.cols(), budget.max_cols)?;
    let sites: Vec<Site> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    let mapping = TileMapping::new(layout.rows(), layout.cols(), sites)
        .map_err(|e| OracleError::Invalid(format!("pairs must use distinct tiles on the chip: {e}")))?;
    let graph = RoutingGraph::build(layout, &mapping);
    let mut steps = budget.max_routes as u64 * 10_000;
    match exhaustive_routes(&graph, &Occupancy::new(&graph), 0, pairs, &mut steps) {
        Ok(found) => Ok(found.is_some()),
        Err(()) => Err(OracleError::TimedOut),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct State {
    done: u32,
    /// Bit q set when qubit q has cut Z.
    cuts: u32,
    /// (gate, cycles left, route index), sorted.
    directs: Vec<(u8, u8, u16)>,
    /// (qubit, cycles left), sorted.
    modifies: Vec<(u8, u8)>,
}

struct Search<'a> {
    model: Model,
    graph: &'a RoutingGraph,
    pairs: Vec<(usize, usize)>,
    sites: Vec<(Site, Site)>,
    parents: Vec<u32>,
    /// Gates touching each qubit.
    on_qubit: Vec<u32>,
    direct_routes: Vec<Vec<Route>>,
    braid_cache: HashMap<(u32, Vec<(u8, u16)>), bool>,
    steps: u64,
    deadline: Option<Instant>,
}

/// One cycle's choice before modifications are added.
struct Choice {
    braids: u32,
    directs: Vec<(u8, u16)>,
    qubits: u32,
}

impl Search<'_> {
    fn timed_out(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() > d)
    }

    fn base_occupancy(&self, directs: &[(u8, u16)]) -> Occupancy {
        let mut occ = Occupancy::new(self.graph);
        for &(g, r) in directs {
            occ.commit(&self.direct_routes[g as usize][r as usize], 0, 1);
        }
        occ
    }

    fn braids_fit(&mut self, braids: u32, directs: &[(u8, u16)]) -> Result<bool, OracleError> {
        if braids == 0 {
            return Ok(true);
        }
        let mut key_d = directs.to_vec();
        key_d.sort_unstable();
        let key = (braids, key_d);
        if let Some(&v) = self.braid_cache.get(&key) {
            return Ok(v);
        }
        let occ = self.base_occupancy(directs);
        let pairs: Vec<(Site, Site)> = (0..self.pairs.len()).filter(|g| braids >> g & 1 == 1).map(|g| self.sites[g]).collect();
        let mut steps = self.steps;
        let ok = exhaustive_routes(self.graph, &occ, 0, &pairs, &mut steps).map_err(|()| OracleError::TimedOut)?.is_some();
        self.braid_cache.insert(key, ok);
        Ok(ok)
    }

    /// Enumerates tile-disjoint sets of gates starting this cycle.
    #[allow(clippy::too_many_arguments)]
    fn choices(
        &self,
        ready: &[usize],
        i: usize,
        cuts: u32,
        used: u32,
        occ: &mut Occupancy,
        cur: &mut Choice,
        out: &mut Vec<Choice>,
    ) {
        if i == ready.len() {
            out.push(Choice { braids: cur.braids, directs: cur.directs.clone(), qubits: cur.qubits });
            return;
        }
        self.choices(ready, i + 1, cuts, used, occ, cur, out);
        let g = ready[i];
        let (a, b) = self.pairs[g];
        let mask = 1 << a | 1 << b;
        if used & mask != 0 {
            return;
        }
        cur.qubits |= mask;
        let same = (cuts >> a & 1) == (cuts >> b & 1);
        if self.model == Model::LatticeSurgery || !same {
            cur.braids |= 1 << g;
            self.choices(ready, i + 1, cuts, used | mask, occ, cur, out);
            cur.braids &= !(1 << g);
        } else {
            for (ri, route) in self.direct_routes[g].iter().enumerate() {
                if route.nodes().iter().all(|&v| occ.available(v, 0, 1)) {
                    occ.commit(route, 0, 1);
                    cur.directs.push((g as u8, ri as u16));
                    self.choices(ready, i + 1, cuts, used | mask, occ, cur, out);
                    cur.directs.pop();
                    occ.release(route, 0, 1);
                }
            }
        }
        cur.qubits &= !mask;
    }
}

/// Minimum number of cycles over every schedule the validator accepts.
///
/// With `cuts = None` on a double-defect chip the initial cut assignment is
/// free as well. Lattice-surgery chips ignore `cuts`.
pub fn optimal_cycles(
    circuit: &LogicalCircuit,
    layout: &ChipLayout,
    mapping: &TileMapping,
    cuts: Option<&[Cut]>,
    budget: &OracleBudget,
) -> Result<usize, OracleError> {
    let n = circuit.n();
    let g = circuit.len();
    check("gates", g, budget.max_gates)?;
    check("qubits", n, budget.max_qubits)?;
    check("tile rows", layout.rows(), budget.max_rows)?;
    check("tile columns", layout.cols(), budget.max_cols)?;
    check("gates", g, 31)?;
    if let Some(c) = cuts {
        if c.len() != n {
            return Err(OracleError::Invalid(format!("expected {n} cuts, got {}", c.len())));
        }
    }
    if g == 0 {
        return Ok(0);
    }
    let model = layout.model();
    let graph = RoutingGraph::build(layout, mapping);
    let dag = GateDag::build(circuit);
    let pairs: Vec<(usize, usize)> = circuit.gates().iter().map(|x| (x.control, x.target)).collect();
    let sites: Vec<(Site, Site)> = pairs.iter().map(|&(a, b)| (mapping.tile(a), mapping.tile(b))).collect();
    let mut direct_routes = Vec::with_capacity(g);
    for (gi, &(a, b)) in sites.iter().enumerate() {
        let routes = match model {
            Model::DoubleDefect => graph
                .simple_routes(a, b, budget.max_routes)
                .ok_or(OracleError::OverBudget { what: "candidate routes", value: budget.max_routes + 1, limit: budget.max_routes })?,
            Model::LatticeSurgery => Vec::new(),
        };
        let idle = Occupancy::new(&graph);
        if graph.find_path(&idle, 0, 1, a, b).is_none() {
            return Err(OracleError::Infeasible { gate: gi });
        }
        direct_routes.push(routes);
    }
    let mut on_qubit = vec![0u32; n];
    for (gi, &(a, b)) in pairs.iter().enumerate() {
        on_qubit[a] |= 1 << gi;
        on_qubit[b] |= 1 << gi;
    }
    let parents = (0..g).map(|x| dag.parents(x).iter().fold(0u32, |m, &p| m | 1 << p)).collect();
    let mut search = Search {
        model,
        graph: &graph,
        pairs,
        sites,
        parents,
        on_qubit,
        direct_routes,
        braid_cache: HashMap::new(),
        steps: budget.max_routes as u64 * 10_000,
        deadline: budget.time_limit.map(|d| Instant::now() + d),
    };

    let all = if g == 32 { u32::MAX } else { (1u32 << g) - 1 };
    let mut frontier: Vec<State> = match (model, cuts) {
        (Model::LatticeSurgery, _) => vec![State { done: 0, cuts: 0, directs: vec![], modifies: vec![] }],
        (Model::DoubleDefect, Some(c)) => {
            let bits = c.iter().enumerate().fold(0u32, |m, (q, &x)| if x == Cut::Z { m | 1 << q } else { m });
            vec![State { done: 0, cuts: bits, directs: vec![], modifies: vec![] }]
        }
        // Flipping every cut changes nothing, so qubit 0 may stay X.
        (Model::DoubleDefect, None) => (0..1u32 << n.saturating_sub(1))
            .map(|c| State { done: 0, cuts: c << 1, directs: vec![], modifies: vec![] })
            .collect(),
    };
    let mut seen: HashSet<State> = frontier.iter().cloned().collect();
    let mut depth = 0;
    while !frontier.is_empty() {
        if search.timed_out() {
            return Err(OracleError::TimedOut);
        }
        depth += 1;
        let mut next = Vec::new();
        for s in &frontier {
            for t in successors(&mut search, s, n)? {
                if t.done == all && t.directs.is_empty() && t.modifies.is_empty() {
                    return Ok(depth);
                }
                if seen.insert(t.clone()) {
                    next.push(t);
                }
            }
        }
        frontier = next;
    }
    // Every gate routes on an idle chip, so the search always ends above.
    unreachable!("state space exhausted without a complete schedule")
}

fn successors(search: &mut Search, s: &State, n: usize) -> Result<Vec<State>, OracleError> {
    let mut busy = 0u32;
    let mut in_progress = 0u32;
    for &(gi, ..) in &s.directs {
        let (a, b) = search.pairs[gi as usize];
        busy |= 1 << a | 1 << b;
        in_progress |= 1 << gi;
    }
    for &(q, _) in &s.modifies {
        busy |= 1 << q;
    }
    let ready: Vec<usize> = (0..search.pairs.len())
        .filter(|&gi| {
            let (a, b) = search.pairs[gi];
            s.done >> gi & 1 == 0
                && in_progress >> gi & 1 == 0
                && search.parents[gi] & !s.done == 0
                && busy & (1 << a | 1 << b) == 0
        })
        .collect();
    let ongoing: Vec<(u8, u16)> = s.directs.iter().map(|&(gi, _, r)| (gi, r)).collect();
    let mut occ = search.base_occupancy(&ongoing);
    let mut choices = Vec::new();
    let mut cur = Choice { braids: 0, directs: Vec::new(), qubits: 0 };
    search.choices(&ready, 0, s.cuts, busy, &mut occ, &mut cur, &mut choices);

    let mut out = Vec::new();
    for choice in choices {
        let mut all_directs = ongoing.clone();
        all_directs.extend(choice.directs.iter().copied());
        if !search.braids_fit(choice.braids, &all_directs)? {
            continue;
        }
        // Flipping a tile only matters while gates on it remain.
        let open: Vec<usize> = if search.model == Model::DoubleDefect {
            (0..n)
                .filter(|&q| (busy | choice.qubits) >> q & 1 == 0 && search.on_qubit[q] & !s.done & !choice.braids != 0)
                .collect()
        } else {
            Vec::new()
        };
        for subset in 0..1u32 << open.len() {
            let starts: Vec<usize> = (0..open.len()).filter(|&i| subset >> i & 1 == 1).map(|i| open[i]).collect();
            if choice.braids == 0 && choice.directs.is_empty() && starts.is_empty() && s.directs.is_empty() && s.modifies.is_empty() {
                continue;
            }
            let mut t = State { done: s.done | choice.braids, cuts: s.cuts, directs: Vec::new(), modifies: Vec::new() };
            for &(gi, left, r) in &s.directs {
                if left == 1 {
                    t.done |= 1 << gi;
                } else {
                    t.directs.push((gi, left - 1, r));
                }
            }
            for &(gi, r) in &choice.directs {
                t.directs.push((gi, LONG_OP as u8 - 1, r));
            }
            for &(q, left) in &s.modifies {
                if left == 1 {
                    t.cuts ^= 1 << q;
                } else {
                    t.modifies.push((q, left - 1));
                }
            }
            for &q in &starts {
                t.modifies.push((q as u8, LONG_OP as u8 - 1));
            }
            t.directs.sort_unstable();
            t.modifies.sort_unstable();
            out.push(t);
        }
    }
    Ok(out)
}
