//! Initial placement: array shape, qubit-to-tile mapping, lane allocation and
//! cut-type initialisation, plus the baseline variants of each.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chip::{Axis, ChipLayout, Cut, Model};
use crate::circuit::{CommGraph, GateDag, LogicalCircuit};
use crate::router::{Occupancy, Route, RoutingGraph};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlacementError {
    #[error("no array of at most {max_rows}x{max_cols} tiles holds {n} qubits")]
    NoShape { n: usize, max_rows: usize, max_cols: usize },
    #[error("at least one mapping trial is required")]
    ZeroTrials,
    #[error("qubit {qubit} is not mapped (mapping covers {n} qubits)")]
    Unmapped { qubit: usize, n: usize },
    #[error("tile ({row},{col}) is outside the {rows}x{cols} array")]
    OutOfArray { row: usize, col: usize, rows: usize, cols: usize },
    #[error("qubits {a} and {b} share tile ({row},{col})")]
    Collision { a: usize, b: usize, row: usize, col: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayShape {
    pub rows: usize,
    pub cols: usize,
}

/// Picks the tile array for `n` qubits: minimum perimeter among shapes that fit
/// in `max_rows x max_cols`, hold `n` qubits and leave no row or column entirely
/// empty; then the squarest, then the one with fewer rows.
pub fn determine_shape(n: usize, max_rows: usize, max_cols: usize) -> Result<ArrayShape, PlacementError> {
    let n_eff = n.max(1);
    let mut best: Option<(usize, usize, usize, ArrayShape)> = None;
    for rows in 1..=max_rows.min(n_eff) {
        for cols in 1..=max_cols.min(n_eff) {
            let cells = rows * cols;
            if cells < n_eff || cells - n_eff >= rows.min(cols) {
                continue;
            }
            let key = (rows + cols, rows.abs_diff(cols), rows, ArrayShape { rows, cols });
            if best.as_ref().is_none_or(|b| (key.0, key.1, key.2) < (b.0, b.1, b.2)) {
                best = Some(key);
            }
        }
    }
    best.map(|b| b.3).ok_or(PlacementError::NoShape { n, max_rows, max_cols })
}

/// Injective assignment of qubits to tile sites of an array.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileMapping {
    rows: usize,
    cols: usize,
    pos: Vec<(usize, usize)>,
}

impl TileMapping {
    pub fn new(rows: usize, cols: usize, pos: Vec<(usize, usize)>) -> Result<Self, PlacementError> {
        let mut seen = vec![None; rows * cols];
        for (q, &(r, c)) in pos.iter().enumerate() {
            if r >= rows || c >= cols {
                return Err(PlacementError::OutOfArray { row: r, col: c, rows, cols });
            }
            if let Some(a) = seen[r * cols + c] {
                return Err(PlacementError::Collision { a, b: q, row: r, col: c });
            }
            seen[r * cols + c] = Some(q);
        }
        Ok(TileMapping { rows, cols, pos })
    }

    fn from_cells(shape: ArrayShape, cells: &[usize]) -> Self {
        let pos = cells.iter().map(|&i| (i / shape.cols, i % shape.cols)).collect();
        TileMapping { rows: shape.rows, cols: shape.cols, pos }
    }

    pub fn n(&self) -> usize {
        self.pos.len()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn tile(&self, q: usize) -> (usize, usize) {
        self.pos[q]
    }

    pub fn tiles(&self) -> &[(usize, usize)] {
        &self.pos
    }

    /// Row-major occupant of every site.
    pub fn occupants(&self) -> Vec<Option<usize>> {
        let mut occ = vec![None; self.rows * self.cols];
        for (q, &(r, c)) in self.pos.iter().enumerate() {
            occ[r * self.cols + c] = Some(q);
        }
        occ
    }

    pub fn distance(&self, a: usize, b: usize) -> usize {
        let (ra, ca) = self.pos[a];
        let (rb, cb) = self.pos[b];
        ra.abs_diff(rb) + ca.abs_diff(cb)
    }
}

/// Communication cost: sum of edge weight times Manhattan tile distance.
pub fn mapping_cost(mapping: &TileMapping, comm: &CommGraph) -> Result<u64, PlacementError> {
    let mut f = 0u64;
    for (a, b, w) in comm.edges() {
        for q in [a, b] {
            if q >= mapping.n() {
                return Err(PlacementError::Unmapped { qubit: q, n: mapping.n() });
            }
        }
        f += w as u64 * mapping.distance(a, b) as u64;
    }
    Ok(f)
}

/// Row 0 left to right, row 1 right to left, and so on.
pub fn snake_mapping(n: usize, shape: ArrayShape) -> TileMapping {
    let pos = (0..n)
        .map(|k| {
            let r = k / shape.cols;
            let c = if r % 2 == 0 { k % shape.cols } else { shape.cols - 1 - k % shape.cols };
            (r, c)
        })
        .collect();
    TileMapping { rows: shape.rows, cols: shape.cols, pos }
}

pub fn random_mapping(n: usize, shape: ArrayShape, seed: u64) -> TileMapping {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells: Vec<usize> = (0..shape.rows * shape.cols).collect();
    cells.shuffle(&mut rng);
    cells.truncate(n);
    TileMapping::from_cells(shape, &cells)
}

/// Seeded trials of recursive min-cut bisection followed by pairwise-swap
/// refinement; keeps the trial with the lowest cost (earliest trial on ties).
pub fn establish_mapping(
    comm: &CommGraph,
    shape: ArrayShape,
    trials: usize,
    seed: u64,
) -> Result<TileMapping, PlacementError> {
    if trials == 0 {
        return Err(PlacementError::ZeroTrials);
    }
    let n = comm.n();
    if n > shape.rows * shape.cols {
        return Err(PlacementError::NoShape { n, max_rows: shape.rows, max_cols: shape.cols });
    }
    let adj = comm.adjacency();
    let best = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(t as u64));
            let mut cells = vec![0; n];
            let mut qubits: Vec<usize> = (0..n).collect();
            bisect(&adj, &mut qubits, (0, 0, shape.rows, shape.cols), shape.cols, &mut cells, &mut rng);
            refine(&adj, shape, &mut cells);
            let m = TileMapping::from_cells(shape, &cells);
            let f = mapping_cost(&m, comm).unwrap();
            (f, t, m)
        })
        .min_by_key(|(f, t, _)| (*f, *t))
        .unwrap();
    Ok(best.2)
}

type Region = (usize, usize, usize, usize);

fn bisect(
    adj: &[Vec<(usize, u32)>],
    qubits: &mut [usize],
    (r0, c0, h, w): Region,
    cols: usize,
    out: &mut [usize],
    rng: &mut ChaCha8Rng,
) {
    if qubits.is_empty() {
        return;
    }
    if h * w == 1 {
        debug_assert_eq!(qubits.len(), 1);
        out[qubits[0]] = r0 * cols + c0;
        return;
    }
    let (a, b): (Region, Region) = if h >= w {
        let h1 = h / 2;
        ((r0, c0, h1, w), (r0 + h1, c0, h - h1, w))
    } else {
        let w1 = w / 2;
        ((r0, c0, h, w1), (r0, c0 + w1, h, w - w1))
    };
    let (cells_a, cells_b) = (a.2 * a.3, b.2 * b.3);
    let len = qubits.len();
    let target = (len * cells_a + (cells_a + cells_b) / 2) / (cells_a + cells_b);
    let na = target.clamp(len.saturating_sub(cells_b), cells_a.min(len));
    qubits.shuffle(rng);
    min_cut_split(adj, qubits, na);
    let (left, right) = qubits.split_at_mut(na);
    bisect(adj, left, a, cols, out, rng);
    bisect(adj, right, b, cols, out, rng);
}

/// Improves the split `qubits[..na] | qubits[na..]` by best-gain pairwise swaps.
fn min_cut_split(adj: &[Vec<(usize, u32)>], qubits: &mut [usize], na: usize) {
    if na == 0 || na == qubits.len() {
        return;
    }
    let n = adj.len();
    let mut side = vec![2u8; n];
    for (i, &q) in qubits.iter().enumerate() {
        side[q] = u8::from(i >= na);
    }
    let weight = |a: usize, b: usize| adj[a].iter().find(|&&(v, _)| v == b).map_or(0, |&(_, w)| w as i64);
    // External minus internal weight, restricted to this sub-problem.
    let gain_of = |q: usize, side: &[u8]| -> i64 {
        adj[q]
            .iter()
            .filter(|&&(v, _)| side[v] != 2)
            .map(|&(v, w)| if side[v] != side[q] { w as i64 } else { -(w as i64) })
            .sum()
    };
    for _ in 0..4 * qubits.len() {
        let mut best = (0i64, 0usize, 0usize);
        for i in 0..na {
            let a = qubits[i];
            let da = gain_of(a, &side);
            for j in na..qubits.len() {
                let b = qubits[j];
                let g = da + gain_of(b, &side) - 2 * weight(a, b);
                if g > best.0 {
                    best = (g, i, j);
                }
            }
        }
        if best.0 <= 0 {
            break;
        }
        let (_, i, j) = best;
        side[qubits[i]] = 1;
        side[qubits[j]] = 0;
        qubits.swap(i, j);
    }
}

/// Swaps pairs of sites (occupied or empty) while the cost strictly drops.
fn refine(adj: &[Vec<(usize, u32)>], shape: ArrayShape, cells: &mut [usize]) {
    let total = shape.rows * shape.cols;
    let mut occupant = vec![usize::MAX; total];
    for (q, &c) in cells.iter().enumerate() {
        occupant[c] = q;
    }
    let dist = |x: usize, y: usize| {
        let (rx, cx) = (x / shape.cols, x % shape.cols);
        let (ry, cy) = (y / shape.cols, y % shape.cols);
        (rx.abs_diff(ry) + cx.abs_diff(cy)) as i64
    };
    let move_delta = |q: usize, to: usize, other: usize, cells: &[usize]| -> i64 {
        adj[q]
            .iter()
            .filter(|&&(v, _)| v != other)
            .map(|&(v, w)| w as i64 * (dist(to, cells[v]) - dist(cells[q], cells[v])))
            .sum()
    };
    loop {
        let mut improved = false;
        for x in 0..total {
            for y in x + 1..total {
                let (qx, qy) = (occupant[x], occupant[y]);
                if qx == usize::MAX && qy == usize::MAX {
                    continue;
                }
                let mut delta = 0;
                if qx != usize::MAX {
                    delta += move_delta(qx, y, qy, cells);
                }
                if qy != usize::MAX {
                    delta += move_delta(qy, x, qx, cells);
                }
                if delta < 0 {
                    if qx != usize::MAX {
                        cells[qx] = y;
                    }
                    if qy != usize::MAX {
                        cells[qy] = x;
                    }
                    occupant.swap(x, y);
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
}

/// Lines crossed by each gate's shortest route on an unloaded chip, as
/// `(horizontal counts, vertical counts)`.
pub fn route_tally(layout: &ChipLayout, mapping: &TileMapping, circuit: &LogicalCircuit) -> (Vec<usize>, Vec<usize>) {
    let h_lanes: Vec<usize> = layout.bandwidths(Axis::Horizontal).iter().map(|&b| b.max(1)).collect();
    let v_lanes: Vec<usize> = layout.bandwidths(Axis::Vertical).iter().map(|&b| b.max(1)).collect();
    let probe = ChipLayout::with_bandwidths(layout.model(), layout.spec().d, layout.rows(), layout.cols(), &h_lanes, &v_lanes);
    let graph = RoutingGraph::build(&probe, mapping);
    let occ = Occupancy::unlimited(&graph);
    let mut h = vec![0; layout.line_count(Axis::Horizontal)];
    let mut v = vec![0; layout.line_count(Axis::Vertical)];
    for g in circuit.gates() {
        let (a, b) = (mapping.tile(g.control), mapping.tile(g.target));
        if let Some(Route::Path(nodes)) = graph.find_path(&occ, 0, 1, a, b) {
            for node in nodes {
                for (axis, line) in graph.lines_of(node) {
                    match axis {
                        Axis::Horizontal => h[line] += 1,
                        Axis::Vertical => v[line] += 1,
                    }
                }
            }
        }
    }
    (h, v)
}

/// Spends the layout's slack on the lines that carry the most pre-executed
/// routes per lane. Lines never lose lanes; with no slack this is the identity.
pub fn adjust_bandwidth(layout: &ChipLayout, mapping: &TileMapping, circuit: &LogicalCircuit) -> ChipLayout {
    let mut out = layout.clone();
    if out.slack(Axis::Horizontal) == 0 && out.slack(Axis::Vertical) == 0 {
        return out;
    }
    let (h, v) = route_tally(layout, mapping, circuit);
    for (axis, counts) in [(Axis::Horizontal, h), (Axis::Vertical, v)] {
        loop {
            let affordable: Vec<usize> = (0..counts.len())
                .filter(|&i| out.lane_cost(axis, i) <= out.slack(axis))
                .collect();
            let Some(&first) = affordable.first() else { break };
            let mut best = first;
            for &i in &affordable[1..] {
                if pressure_cmp(counts[i], out.line_bandwidth(axis, i), counts[best], out.line_bandwidth(axis, best))
                    == std::cmp::Ordering::Greater
                {
                    best = i;
                }
            }
            out.grant_lane(axis, best);
        }
    }
    out
}

/// Orders lines by routes per lane, then by route count. Unused lines rank lowest;
/// a used line without lanes ranks highest.
fn pressure_cmp(ca: usize, ba: usize, cb: usize, bb: usize) -> std::cmp::Ordering {
    let ratio = |c: usize, b: usize| -> (u8, u64, u64) {
        match (c, b) {
            (0, _) => (0, 0, 1),
            (_, 0) => (2, 0, 1),
            _ => (1, c as u64, b as u64),
        }
    };
    let (ta, na, da) = ratio(ca, ba);
    let (tb, nb, db) = ratio(cb, bb);
    ta.cmp(&tb)
        .then((na * db).cmp(&(nb * da)))
        .then(ca.cmp(&cb))
}

/// Number of communication edges whose endpoints have no route on an unloaded
/// chip. Only lattice-surgery layouts without lanes can have any.
pub fn unroutable_edges(layout: &ChipLayout, mapping: &TileMapping, comm: &CommGraph) -> usize {
    let graph = RoutingGraph::build(layout, mapping);
    let occ = Occupancy::new(&graph);
    comm.edges()
        .filter(|&(a, b, _)| graph.find_path(&occ, 0, 1, mapping.tile(a), mapping.tile(b)).is_none())
        .count()
}

/// Local search over site swaps that first drives the number of unroutable
/// communication edges to zero, then the mapping cost.
pub fn repair_routability(layout: &ChipLayout, mapping: &TileMapping, comm: &CommGraph) -> TileMapping {
    if layout.model() != Model::LatticeSurgery {
        return mapping.clone();
    }
    let shape = ArrayShape { rows: mapping.rows(), cols: mapping.cols() };
    let score = |m: &TileMapping| (unroutable_edges(layout, m, comm), mapping_cost(m, comm).unwrap());
    let mut current = mapping.clone();
    let mut best = score(&current);
    if best.0 == 0 {
        return current;
    }
    let total = shape.rows * shape.cols;
    for _ in 0..8 {
        let mut improved = false;
        for x in 0..total {
            for y in x + 1..total {
                let mut cells: Vec<usize> = current.tiles().iter().map(|&(r, c)| r * shape.cols + c).collect();
                let (mut touched, mut any) = (false, false);
                for c in cells.iter_mut() {
                    if *c == x {
                        *c = y;
                        touched = true;
                    } else if *c == y {
                        *c = x;
                        any = true;
                    }
                }
                if !touched && !any {
                    continue;
                }
                let cand = TileMapping::from_cells(shape, &cells);
                let s = score(&cand);
                if s < best {
                    best = s;
                    current = cand;
                    improved = true;
                }
            }
        }
        if !improved || best.0 == 0 {
            break;
        }
    }
    current
}

/// Cut types from the longest front-first prefix of gates whose communication
/// graph stays bipartite. Gates are peeled front layer by front layer, in id
/// order within a front; the first gate that would close an odd cycle stops the
/// growth. Each coloured component gives its lowest qubit X; qubits outside the
/// prefix default to X.
pub fn init_cut_types(circuit: &LogicalCircuit, dag: &GateDag) -> Vec<Cut> {
    let n = circuit.n();
    let mut uf = ParityUnionFind::new(n);
    let mut touched = vec![false; n];
    let mut pending: Vec<usize> = (0..dag.len()).map(|g| dag.parents(g).len()).collect();
    let mut front: Vec<usize> = dag.sources();
    'peel: while !front.is_empty() {
        let mut next = Vec::new();
        for &g in &front {
            let gate = circuit.gate(g);
            if !uf.union_opposite(gate.control, gate.target) {
                break 'peel;
            }
            touched[gate.control] = true;
            touched[gate.target] = true;
            for &c in dag.children(g) {
                pending[c] -= 1;
                if pending[c] == 0 {
                    next.push(c);
                }
            }
        }
        next.sort_unstable();
        front = next;
    }
    uf.coloring(&touched)
}

/// Union-find tracking the parity of each element relative to its root.
#[derive(Clone)]
pub(crate) struct ParityUnionFind {
    parent: Vec<usize>,
    parity: Vec<bool>,
}

impl ParityUnionFind {
    pub(crate) fn new(n: usize) -> Self {
        ParityUnionFind { parent: (0..n).collect(), parity: vec![false; n] }
    }

    pub(crate) fn find(&mut self, x: usize) -> (usize, bool) {
        if self.parent[x] == x {
            return (x, false);
        }
        let (root, p) = self.find(self.parent[x]);
        self.parent[x] = root;
        self.parity[x] ^= p;
        (root, self.parity[x])
    }

    /// Records that `a` and `b` need opposite colours. Returns false (and
    /// changes nothing) if they are already forced equal.
    pub(crate) fn union_opposite(&mut self, a: usize, b: usize) -> bool {
        let (ra, pa) = self.find(a);
        let (rb, pb) = self.find(b);
        if ra == rb {
            return pa != pb;
        }
        self.parent[rb] = ra;
        self.parity[rb] = !(pa ^ pb);
        true
    }

    /// Colours elements flagged in `members`: each component's lowest member
    /// gets X. Unflagged elements get X.
    pub(crate) fn coloring(&mut self, members: &[bool]) -> Vec<Cut> {
        let n = self.parent.len();
        let mut anchor: Vec<Option<bool>> = vec![None; n];
        let mut cuts = vec![Cut::X; n];
        for q in 0..n {
            if !members[q] {
                continue;
            }
            let (root, p) = self.find(q);
            let a = *anchor[root].get_or_insert(p);
            cuts[q] = if p == a { Cut::X } else { Cut::Z };
        }
        cuts
    }
}

pub fn random_cuts(n: usize, seed: u64) -> Vec<Cut> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| if rng.gen_bool(0.5) { Cut::Z } else { Cut::X }).collect()
}

/// One-exchange max-cut local search from a random start.
pub fn max_cut_cuts(comm: &CommGraph, seed: u64) -> Vec<Cut> {
    let mut cuts = random_cuts(comm.n(), seed);
    let adj = comm.adjacency();
    loop {
        let mut improved = false;
        for v in 0..comm.n() {
            let gain: i64 = adj[v]
                .iter()
                .map(|&(u, w)| if cuts[u] == cuts[v] { w as i64 } else { -(w as i64) })
                .sum();
            if gain > 0 {
                cuts[v] = cuts[v].flip();
                improved = true;
            }
        }
        if !improved {
            return cuts;
        }
    }
}

/// Total weight of edges whose endpoints carry different cuts.
pub fn cut_weight(comm: &CommGraph, cuts: &[Cut]) -> u64 {
    comm.edges().filter(|&(a, b, _)| cuts[a] != cuts[b]).map(|(_, _, w)| w as u64).sum()
}
