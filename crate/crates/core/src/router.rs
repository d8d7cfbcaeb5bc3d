//! Capacitated routing graphs and route search.
//!
//! Double defect: nodes are corridor segments (one per tile side) and the
//! junctions where corridor lines cross. A segment holds as many routes as its
//! line has lanes; a junction holds as many as the wider of its two lines. A
//! route alternates segment, junction, segment and starts on a side of one
//! operand tile and ends on a side of the other. Tiles that share a side route
//! through that single segment.
//!
//! Lattice surgery: nodes are ancilla slots (lane slots plus unoccupied tile
//! sites), each holding one route. A route is a 4-connected chain of slots from
//! a neighbour of one operand tile to a neighbour of the other; operand tiles
//! that touch need no route at all.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chip::{chip_capacity, Axis, ChipLayout, Model};
use crate::placement::TileMapping;

pub type Site = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    /// Segment of horizontal line `line` above tile column `col`.
    HSeg { line: usize, col: usize },
    /// Segment of vertical line `line` beside tile row `row`.
    VSeg { row: usize, line: usize },
    Junction { h: usize, v: usize },
    Slot { row: usize, col: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Route {
    /// Lattice-surgery merge between touching tiles.
    Adjacent,
    /// Node ids from the first operand's side to the second's.
    Path(Vec<usize>),
}

impl Route {
    pub fn nodes(&self) -> &[usize] {
        match self {
            Route::Adjacent => &[],
            Route::Path(p) => p,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RouteError {
    #[error("gates {a} and {b} of the batch share a tile")]
    SharedTile { a: usize, b: usize },
    #[error("{k} gates exceed the chip capacity {capacity}")]
    OverCapacity { k: usize, capacity: usize },
    #[error("the chip has bandwidth 0; nothing can be routed")]
    ZeroBandwidth,
    #[error("no simultaneous routes found for the batch")]
    Unroutable,
}

#[derive(Debug, Clone)]
pub struct RoutingGraph {
    model: Model,
    rows: usize,
    cols: usize,
    kinds: Vec<NodeKind>,
    caps: Vec<u32>,
    adj: Vec<Vec<usize>>,
    access: Vec<Vec<usize>>,
    slot_of_site: Vec<Site>,
    slot_dims: (usize, usize),
    h_slot_line: Vec<Option<usize>>,
    v_slot_line: Vec<Option<usize>>,
}

impl RoutingGraph {
    pub fn build(layout: &ChipLayout, mapping: &TileMapping) -> Self {
        match layout.model() {
            Model::DoubleDefect => Self::build_dd(layout),
            Model::LatticeSurgery => Self::build_ls(layout, mapping),
        }
    }

    fn build_dd(layout: &ChipLayout) -> Self {
        let (rows, cols) = (layout.rows(), layout.cols());
        let hb = layout.bandwidths(Axis::Horizontal);
        let vb = layout.bandwidths(Axis::Vertical);
        let mut kinds = Vec::new();
        let mut caps = Vec::new();
        let hseg = |h: usize, c: usize| h * cols + c;
        let n_h = (rows + 1) * cols;
        let vseg = |r: usize, v: usize| n_h + r * (cols + 1) + v;
        let n_v = rows * (cols + 1);
        let junc = |h: usize, v: usize| n_h + n_v + h * (cols + 1) + v;
        for h in 0..=rows {
            for c in 0..cols {
                kinds.push(NodeKind::HSeg { line: h, col: c });
                caps.push(hb[h] as u32);
            }
        }
        for r in 0..rows {
            for v in 0..=cols {
                kinds.push(NodeKind::VSeg { row: r, line: v });
                caps.push(vb[v] as u32);
            }
        }
        for h in 0..=rows {
            for v in 0..=cols {
                kinds.push(NodeKind::Junction { h, v });
                caps.push(hb[h].max(vb[v]) as u32);
            }
        }
        let mut adj = vec![Vec::new(); kinds.len()];
        for (id, kind) in kinds.iter().enumerate() {
            adj[id] = match *kind {
                NodeKind::HSeg { line, col } => vec![junc(line, col + 1), junc(line, col)],
                NodeKind::VSeg { row, line } => vec![junc(row, line), junc(row + 1, line)],
                NodeKind::Junction { h, v } => {
                    let mut n = Vec::with_capacity(4);
                    if h > 0 {
                        n.push(vseg(h - 1, v));
                    }
                    if v < cols {
                        n.push(hseg(h, v));
                    }
                    if h < rows {
                        n.push(vseg(h, v));
                    }
                    if v > 0 {
                        n.push(hseg(h, v - 1));
                    }
                    n
                }
                NodeKind::Slot { .. } => unreachable!(),
            };
        }
        let mut access = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                access.push(vec![hseg(r, c), vseg(r, c + 1), hseg(r + 1, c), vseg(r, c)]);
            }
        }
        RoutingGraph {
            model: Model::DoubleDefect,
            rows,
            cols,
            kinds,
            caps,
            adj,
            access,
            slot_of_site: Vec::new(),
            slot_dims: (0, 0),
            h_slot_line: Vec::new(),
            v_slot_line: Vec::new(),
        }
    }

    fn build_ls(layout: &ChipLayout, mapping: &TileMapping) -> Self {
        let (rows, cols) = (layout.rows(), layout.cols());
        let (sr, sc) = layout.slot_dims();
        let mut blocked = vec![false; sr * sc];
        let mut slot_of_site = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                slot_of_site.push(layout.tile_slot(r, c));
            }
        }
        for &(r, c) in mapping.tiles() {
            let (y, x) = slot_of_site[r * cols + c];
            blocked[y * sc + x] = true;
        }
        let mut id_of = vec![usize::MAX; sr * sc];
        let mut kinds = Vec::new();
        for y in 0..sr {
            for x in 0..sc {
                if !blocked[y * sc + x] {
                    id_of[y * sc + x] = kinds.len();
                    kinds.push(NodeKind::Slot { row: y, col: x });
                }
            }
        }
        let neighbours = |y: usize, x: usize| {
            let mut out = Vec::with_capacity(4);
            if y > 0 {
                out.push((y - 1, x));
            }
            if x + 1 < sc {
                out.push((y, x + 1));
            }
            if y + 1 < sr {
                out.push((y + 1, x));
            }
            if x > 0 {
                out.push((y, x - 1));
            }
            out
        };
        let live = |(y, x): (usize, usize)| id_of[y * sc + x];
        let adj = kinds
            .iter()
            .map(|k| match *k {
                NodeKind::Slot { row, col } => {
                    neighbours(row, col).into_iter().map(live).filter(|&i| i != usize::MAX).collect()
                }
                _ => unreachable!(),
            })
            .collect();
        let access = slot_of_site
            .iter()
            .map(|&(y, x)| neighbours(y, x).into_iter().map(live).filter(|&i| i != usize::MAX).collect())
            .collect();
        let caps = vec![1; kinds.len()];
        RoutingGraph {
            model: Model::LatticeSurgery,
            rows,
            cols,
            kinds,
            caps,
            adj,
            access,
            slot_of_site,
            slot_dims: (sr, sc),
            h_slot_line: (0..sr).map(|y| layout.slot_line(Axis::Horizontal, y)).collect(),
            v_slot_line: (0..sc).map(|x| layout.slot_line(Axis::Vertical, x)).collect(),
        }
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn kind(&self, node: usize) -> NodeKind {
        self.kinds[node]
    }

    pub fn capacity(&self, node: usize) -> u32 {
        self.caps[node]
    }

    pub fn neighbours(&self, node: usize) -> &[usize] {
        &self.adj[node]
    }

    /// Nodes a route may start or end on for the tile at `site`.
    pub fn access(&self, site: Site) -> &[usize] {
        &self.access[site.0 * self.cols + site.1]
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Lattice surgery: the two tiles touch and can merge directly.
    pub fn tiles_touch(&self, a: Site, b: Site) -> bool {
        if self.model != Model::LatticeSurgery {
            return false;
        }
        let (ya, xa) = self.slot_of_site[a.0 * self.cols + a.1];
        let (yb, xb) = self.slot_of_site[b.0 * self.cols + b.1];
        ya.abs_diff(yb) + xa.abs_diff(xb) == 1
    }

    /// Corridor lines a node belongs to.
    pub fn lines_of(&self, node: usize) -> Vec<(Axis, usize)> {
        match self.kinds[node] {
            NodeKind::HSeg { line, .. } => vec![(Axis::Horizontal, line)],
            NodeKind::VSeg { line, .. } => vec![(Axis::Vertical, line)],
            NodeKind::Junction { .. } => Vec::new(),
            NodeKind::Slot { row, col } => {
                let mut out = Vec::new();
                if let Some(l) = self.h_slot_line[row] {
                    out.push((Axis::Horizontal, l));
                }
                if let Some(l) = self.v_slot_line[col] {
                    out.push((Axis::Vertical, l));
                }
                out
            }
        }
    }

    /// Display coordinate of a node. Double defect uses a doubled grid where
    /// tile `(r, c)` sits at `(2r+1, 2c+1)`; lattice surgery uses slot coordinates.
    pub fn coord(&self, node: usize) -> [usize; 2] {
        match self.kinds[node] {
            NodeKind::HSeg { line, col } => [2 * line, 2 * col + 1],
            NodeKind::VSeg { row, line } => [2 * row + 1, 2 * line],
            NodeKind::Junction { h, v } => [2 * h, 2 * v],
            NodeKind::Slot { row, col } => [row, col],
        }
    }

    /// Breadth-first shortest route between two tiles using only nodes with a
    /// free lane in every cycle of `[t, t + duration)`. Neighbours are explored
    /// N, E, S, W. Reserves nothing.
    pub fn find_path(&self, occ: &Occupancy, t: usize, duration: usize, a: Site, b: Site) -> Option<Route> {
        if a == b {
            return None;
        }
        if self.tiles_touch(a, b) {
            return Some(Route::Adjacent);
        }
        let targets = self.access(b);
        let free = |v: usize| occ.available(v, t, duration);
        let mut prev = vec![usize::MAX; self.len()];
        let mut seen = vec![false; self.len()];
        let mut queue = VecDeque::new();
        for &s in self.access(a) {
            if free(s) && !seen[s] {
                if targets.contains(&s) {
                    return Some(Route::Path(vec![s]));
                }
                seen[s] = true;
                queue.push_back(s);
            }
        }
        while let Some(u) = queue.pop_front() {
            for &v in &self.adj[u] {
                if seen[v] || !free(v) {
                    continue;
                }
                seen[v] = true;
                prev[v] = u;
                if targets.contains(&v) {
                    let mut path = vec![v];
                    let mut x = v;
                    while prev[x] != usize::MAX {
                        x = prev[x];
                        path.push(x);
                    }
                    path.reverse();
                    return Some(Route::Path(path));
                }
                queue.push_back(v);
            }
        }
        None
    }

    /// Checks that `route` is a contiguous route joining `a` and `b`.
    pub fn route_joins(&self, route: &Route, a: Site, b: Site) -> bool {
        match route {
            Route::Adjacent => self.tiles_touch(a, b),
            Route::Path(p) => {
                let (Some(&first), Some(&last)) = (p.first(), p.last()) else { return false };
                p.iter().all(|&v| v < self.len())
                    && self.access(a).contains(&first)
                    && self.access(b).contains(&last)
                    && p.windows(2).all(|w| self.adj[w[0]].contains(&w[1]))
                    && {
                        let mut s = p.clone();
                        s.sort_unstable();
                        s.windows(2).all(|w| w[0] != w[1])
                    }
            }
        }
    }

    /// Every simple route between two tiles whose node set contains no other
    /// route's node set, shortest first. `None` when more than `limit` raw
    /// routes turn up.
    pub fn simple_routes(&self, a: Site, b: Site, limit: usize) -> Option<Vec<Route>> {
        if self.tiles_touch(a, b) {
            return Some(vec![Route::Adjacent]);
        }
        let (start, targets) = (self.access(a), self.access(b));
        let mut found: Vec<Vec<usize>> = Vec::new();
        let mut on_path = vec![false; self.len()];
        let mut stack: Vec<(usize, usize)> = Vec::new();
        let mut path = Vec::new();
        for &s in start {
            if self.caps[s] == 0 {
                continue;
            }
            stack.push((s, 0));
            while let Some(&mut (u, ref mut next)) = stack.last_mut() {
                if *next == 0 {
                    on_path[u] = true;
                    path.push(u);
                    if targets.contains(&u) {
                        found.push(path.clone());
                        if found.len() > limit {
                            return None;
                        }
                        on_path[u] = false;
                        path.pop();
                        stack.pop();
                        continue;
                    }
                }
                match self.adj[u].get(*next) {
                    Some(&v) => {
                        *next += 1;
                        if !on_path[v] && !start.contains(&v) && self.caps[v] > 0 {
                            stack.push((v, 0));
                        }
                    }
                    None => {
                        on_path[u] = false;
                        path.pop();
                        stack.pop();
                    }
                }
            }
        }
        found.sort_by_key(|p| (p.len(), p.clone()));
        let sets: Vec<Vec<usize>> = found
            .iter()
            .map(|p| {
                let mut s = p.clone();
                s.sort_unstable();
                s
            })
            .collect();
        let subset = |x: &[usize], y: &[usize]| x.iter().all(|v| y.binary_search(v).is_ok());
        let mut keep: Vec<usize> = Vec::new();
        for i in 0..found.len() {
            if !keep.iter().any(|&k| subset(&sets[k], &sets[i])) {
                keep.push(i);
            }
        }
        Some(keep.into_iter().map(|i| Route::Path(found[i].clone())).collect())
    }

    /// ASCII picture of the routes of one cycle. Tiles show `#`, or `.` when
    /// unmapped; route nodes show their label.
    pub fn render(&self, mapping: &TileMapping, routes: &[(char, &Route)]) -> String {
        let (h, w) = match self.model {
            Model::DoubleDefect => (2 * self.rows + 1, 2 * self.cols + 1),
            Model::LatticeSurgery => self.slot_dims,
        };
        let mut grid = vec![vec![' '; w]; h];
        if self.model == Model::LatticeSurgery {
            for node in 0..self.len() {
                let [y, x] = self.coord(node);
                grid[y][x] = '.';
            }
        } else {
            for r in 0..self.rows {
                for c in 0..self.cols {
                    grid[2 * r + 1][2 * c + 1] = '.';
                }
                for c in 0..=self.cols {
                    grid[2 * r + 1][2 * c] = '|';
                }
            }
            for row in grid.iter_mut().step_by(2) {
                for (x, cell) in row.iter_mut().enumerate() {
                    *cell = if x % 2 == 0 { '+' } else { '-' };
                }
            }
        }
        for &(r, c) in mapping.tiles() {
            let [y, x] = match self.model {
                Model::DoubleDefect => [2 * r + 1, 2 * c + 1],
                Model::LatticeSurgery => {
                    let (y, x) = self.slot_of_site[r * self.cols + c];
                    [y, x]
                }
            };
            grid[y][x] = '#';
        }
        for &(label, route) in routes {
            for &node in route.nodes() {
                let [y, x] = self.coord(node);
                grid[y][x] = label;
            }
        }
        grid.into_iter().map(|row| row.into_iter().collect::<String>() + "\n").collect()
    }
}

/// Per-cycle lane usage of every routing node.
#[derive(Debug, Clone)]
pub struct Occupancy {
    caps: Vec<u32>,
    used: Vec<Vec<u32>>,
}

impl Occupancy {
    pub fn new(graph: &RoutingGraph) -> Self {
        Occupancy { caps: graph.caps.clone(), used: Vec::new() }
    }

    /// Occupancy where every node has unbounded capacity.
    pub fn unlimited(graph: &RoutingGraph) -> Self {
        Occupancy { caps: vec![u32::MAX; graph.len()], used: Vec::new() }
    }

    pub fn used(&self, node: usize, t: usize) -> u32 {
        self.used.get(t).map_or(0, |u| u[node])
    }

    pub fn available(&self, node: usize, t: usize, duration: usize) -> bool {
        (t..t + duration).all(|c| self.used(node, c) < self.caps[node])
    }

    fn ensure(&mut self, t: usize) {
        while self.used.len() <= t {
            self.used.push(vec![0; self.caps.len()]);
        }
    }

    /// Reserves one lane on every node of `route` for `duration` cycles from `t`.
    ///
    /// # Panics
    /// If any node is already full in one of those cycles.
    pub fn commit(&mut self, route: &Route, t: usize, duration: usize) {
        for c in t..t + duration {
            self.ensure(c);
            for &v in route.nodes() {
                let u = &mut self.used[c][v];
                assert!(*u < self.caps[v], "node {v} over capacity at cycle {c}");
                *u += 1;
            }
        }
    }

    pub fn release(&mut self, route: &Route, t: usize, duration: usize) {
        for c in t..t + duration {
            for &v in route.nodes() {
                self.used[c][v] -= 1;
            }
        }
    }
}

/// Routes a batch of pairwise tile-disjoint gates in one cycle on an otherwise
/// idle chip. With at most `chip_capacity(b)` gates this always succeeds.
///
/// Greedy shortest paths are tried first. When a gate cannot be routed, the
/// committed routes that separate it from its partner (those whose removal
/// reconnects the pair) are ripped up and re-routed after it. Remaining
/// failures fall back to negotiated-congestion rerouting and finally to an
/// exhaustive search.
pub fn route_batch_guaranteed(
    graph: &RoutingGraph,
    bandwidth: usize,
    pairs: &[(Site, Site)],
) -> Result<Vec<Route>, RouteError> {
    check_disjoint(pairs)?;
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let capacity = chip_capacity(bandwidth).ok_or(RouteError::ZeroBandwidth)?;
    if pairs.len() > capacity {
        return Err(RouteError::OverCapacity { k: pairs.len(), capacity });
    }
    route_batch(graph, &Occupancy::new(graph), 0, pairs).ok_or(RouteError::Unroutable)
}

fn check_disjoint(pairs: &[(Site, Site)]) -> Result<(), RouteError> {
    for i in 0..pairs.len() {
        for j in i + 1..pairs.len() {
            let (a, b) = pairs[i];
            let (c, d) = pairs[j];
            if a == c || a == d || b == c || b == d {
                return Err(RouteError::SharedTile { a: i, b: j });
            }
        }
    }
    Ok(())
}

/// Best-effort simultaneous routing at cycle `t` on top of `base`.
pub fn route_batch(graph: &RoutingGraph, base: &Occupancy, t: usize, pairs: &[(Site, Site)]) -> Option<Vec<Route>> {
    greedy_with_ripup(graph, base, t, pairs)
        .or_else(|| permuted_greedy(graph, base, t, pairs))
        .or_else(|| negotiated(graph, base, t, pairs))
        .or_else(|| {
            let mut budget = 2_000_000u64;
            exhaustive_routes(graph, base, t, pairs, &mut budget).ok().flatten()
        })
}

fn greedy_with_ripup(graph: &RoutingGraph, base: &Occupancy, t: usize, pairs: &[(Site, Site)]) -> Option<Vec<Route>> {
    let mut occ = base.clone();
    let mut routes: Vec<Option<Route>> = vec![None; pairs.len()];
    let mut queue: VecDeque<usize> = (0..pairs.len()).collect();
    let mut ripups = 0;
    while let Some(i) = queue.pop_front() {
        let (a, b) = pairs[i];
        if let Some(r) = graph.find_path(&occ, t, 1, a, b) {
            occ.commit(&r, t, 1);
            routes[i] = Some(r);
            continue;
        }
        if ripups >= 4 * pairs.len() {
            return None;
        }
        // Residual check: which single committed route blocks this pair?
        let blocker = (0..pairs.len()).find(|&j| {
            routes[j].as_ref().is_some_and(|rj| {
                occ.release(rj, t, 1);
                let ok = graph.find_path(&occ, t, 1, a, b).is_some();
                occ.commit(rj, t, 1);
                ok
            })
        })?;
        let old = routes[blocker].take().unwrap();
        occ.release(&old, t, 1);
        let r = graph.find_path(&occ, t, 1, a, b).unwrap();
        occ.commit(&r, t, 1);
        routes[i] = Some(r);
        queue.push_back(blocker);
        ripups += 1;
    }
    Some(routes.into_iter().map(Option::unwrap).collect())
}

/// Plain sequential routing over every order of the pairs (up to 6 pairs).
fn permuted_greedy(graph: &RoutingGraph, base: &Occupancy, t: usize, pairs: &[(Site, Site)]) -> Option<Vec<Route>> {
    if pairs.len() > 6 {
        return None;
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    loop {
        let mut occ = base.clone();
        let mut routes = vec![None; pairs.len()];
        let ok = order.iter().all(|&i| {
            let (a, b) = pairs[i];
            graph.find_path(&occ, t, 1, a, b).map(|r| {
                occ.commit(&r, t, 1);
                routes[i] = Some(r);
            })
            .is_some()
        });
        if ok {
            return Some(routes.into_iter().map(Option::unwrap).collect());
        }
        if !next_permutation(&mut order) {
            return None;
        }
    }
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else { return false };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).unwrap();
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Negotiated congestion: every pair takes its cheapest route allowing overuse,
/// and overused nodes grow more expensive each round until no node is overused.
fn negotiated(graph: &RoutingGraph, base: &Occupancy, t: usize, pairs: &[(Site, Site)]) -> Option<Vec<Route>> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let n = graph.len();
    let mut history = vec![0u64; n];
    let mut routes: Vec<Route> = Vec::new();
    for round in 0..60u64 {
        let present_weight = 1 + round * 2;
        let mut usage: Vec<u32> = (0..n).map(|v| base.used(v, t)).collect();
        routes.clear();
        for &(a, b) in pairs {
            if graph.tiles_touch(a, b) {
                routes.push(Route::Adjacent);
                continue;
            }
            let cost = |v: usize, usage: &[u32]| -> u64 {
                if graph.caps[v] == 0 {
                    return u64::MAX / 4;
                }
                let over = (usage[v] + 1).saturating_sub(graph.caps[v]) as u64;
                (10 + history[v]) * (1 + present_weight * over)
            };
            let targets = graph.access(b);
            let mut dist = vec![u64::MAX; n];
            let mut prev = vec![usize::MAX; n];
            let mut heap = BinaryHeap::new();
            for &s in graph.access(a) {
                let c = cost(s, &usage);
                if c < dist[s] {
                    dist[s] = c;
                    heap.push(Reverse((c, s)));
                }
            }
            let mut hit = None;
            while let Some(Reverse((d, u))) = heap.pop() {
                if d > dist[u] {
                    continue;
                }
                if targets.contains(&u) {
                    hit = Some(u);
                    break;
                }
                for &v in &graph.adj[u] {
                    let nd = d.saturating_add(cost(v, &usage));
                    if nd < dist[v] {
                        dist[v] = nd;
                        prev[v] = u;
                        heap.push(Reverse((nd, v)));
                    }
                }
            }
            let end = hit?;
            if dist[end] >= u64::MAX / 4 {
                return None;
            }
            let mut path = vec![end];
            let mut x = end;
            while prev[x] != usize::MAX {
                x = prev[x];
                path.push(x);
            }
            path.reverse();
            for &v in &path {
                usage[v] += 1;
            }
            routes.push(Route::Path(path));
        }
        let mut clean = true;
        for v in 0..n {
            if usage[v] > graph.caps[v] {
                clean = false;
                history[v] = (history[v] * 2 + 10).min(1 << 40);
            }
        }
        if clean {
            return Some(routes);
        }
    }
    None
}

/// Exhaustive search over simultaneous routes. `Ok(None)` means provably no
/// assignment exists; `Err(())` means the step budget ran out first.
#[allow(clippy::result_unit_err)]
pub fn exhaustive_routes(
    graph: &RoutingGraph,
    base: &Occupancy,
    t: usize,
    pairs: &[(Site, Site)],
    budget: &mut u64,
) -> Result<Option<Vec<Route>>, ()> {
    let mut occ = base.clone();
    let mut routes = Vec::with_capacity(pairs.len());
    if search_pair(graph, &mut occ, t, pairs, 0, &mut routes, budget)? {
        Ok(Some(routes))
    } else {
        Ok(None)
    }
}

fn search_pair(
    graph: &RoutingGraph,
    occ: &mut Occupancy,
    t: usize,
    pairs: &[(Site, Site)],
    i: usize,
    routes: &mut Vec<Route>,
    budget: &mut u64,
) -> Result<bool, ()> {
    if i == pairs.len() {
        return Ok(true);
    }
    let (a, b) = pairs[i];
    if graph.tiles_touch(a, b) {
        routes.push(Route::Adjacent);
        if search_pair(graph, occ, t, pairs, i + 1, routes, budget)? {
            return Ok(true);
        }
        routes.pop();
        return Ok(false);
    }
    // Pruning: every remaining pair must still be connectable on its own.
    for &(c, d) in &pairs[i..] {
        if graph.find_path(occ, t, 1, c, d).is_none() {
            return Ok(false);
        }
    }
    let mut on_path = vec![false; graph.len()];
    let mut path = Vec::new();
    for &s in graph.access(a) {
        if occ.available(s, t, 1) {
            on_path[s] = true;
            path.push(s);
            let found = extend(graph, occ, t, pairs, i, b, &mut on_path, &mut path, routes, budget)?;
            path.pop();
            on_path[s] = false;
            if found {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

#[allow(clippy::too_many_arguments)]
fn extend(
    graph: &RoutingGraph,
    occ: &mut Occupancy,
    t: usize,
    pairs: &[(Site, Site)],
    i: usize,
    b: Site,
    on_path: &mut Vec<bool>,
    path: &mut Vec<usize>,
    routes: &mut Vec<Route>,
    budget: &mut u64,
) -> Result<bool, ()> {
    if *budget == 0 {
        return Err(());
    }
    *budget -= 1;
    let u = *path.last().unwrap();
    if graph.access(b).contains(&u) {
        // Any longer route through this node can be cut short here.
        let r = Route::Path(path.clone());
        occ.commit(&r, t, 1);
        routes.push(r.clone());
        if search_pair(graph, occ, t, pairs, i + 1, routes, budget)? {
            return Ok(true);
        }
        routes.pop();
        occ.release(&r, t, 1);
        return Ok(false);
    }
    let start = graph.access(pairs[i].0);
    for &v in graph.neighbours(u) {
        // Revisiting the source tile's sides would only lengthen the route.
        if on_path[v] || start.contains(&v) || !occ.available(v, t, 1) {
            continue;
        }
        on_path[v] = true;
        path.push(v);
        let found = extend(graph, occ, t, pairs, i, b, on_path, path, routes, budget)?;
        path.pop();
        on_path[v] = false;
        if found {
            return Ok(true);
        }
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::placement::{snake_mapping, ArrayShape};

    fn dd(rows: usize, cols: usize, b: usize) -> (RoutingGraph, TileMapping) {
        let layout = ChipLayout::uniform(Model::DoubleDefect, 3, rows, cols, b);
        let m = snake_mapping(0, ArrayShape { rows, cols });
        (RoutingGraph::build(&layout, &m), m)
    }

    #[test]
    fn adjacent_tiles_share_one_segment() {
        let (g, _) = dd(2, 2, 1);
        let occ = Occupancy::new(&g);
        let r = g.find_path(&occ, 0, 1, (0, 0), (0, 1)).unwrap();
        assert_eq!(r.nodes().len(), 1);
        assert!(g.route_joins(&r, (0, 0), (0, 1)));
    }

    #[test]
    fn saturated_corridor_blocks() {
        // 1x2 array whose only usable line is the one between the tiles.
        let layout = ChipLayout::with_bandwidths(Model::DoubleDefect, 3, 1, 2, &[0, 0], &[0, 1, 0]);
        let m = snake_mapping(2, ArrayShape { rows: 1, cols: 2 });
        let g = RoutingGraph::build(&layout, &m);
        let mut occ = Occupancy::new(&g);
        let r = g.find_path(&occ, 0, 1, (0, 0), (0, 1)).unwrap();
        assert_eq!(r.nodes().len(), 1);
        occ.commit(&r, 0, 1);
        assert!(g.find_path(&occ, 0, 1, (0, 0), (0, 1)).is_none());
        assert!(g.find_path(&occ, 1, 1, (0, 0), (0, 1)).is_some());
    }

    #[test]
    fn multi_cycle_commit() {
        let (g, _) = dd(1, 2, 1);
        let mut occ = Occupancy::new(&g);
        let r = Route::Path(vec![g.access((0, 0))[1]]);
        occ.commit(&r, 4, 3);
        let v = r.nodes()[0];
        assert!(!occ.available(v, 6, 1));
        assert!(occ.available(v, 7, 1));
        assert!(occ.available(v, 3, 1));
    }

    #[test]
    #[should_panic]
    fn double_commit_panics() {
        let (g, _) = dd(1, 2, 1);
        let mut occ = Occupancy::new(&g);
        let r = Route::Path(vec![g.access((0, 0))[1]]);
        occ.commit(&r, 0, 1);
        occ.commit(&r, 0, 1);
    }

    #[test]
    fn two_lanes_then_full() {
        let (g, _) = dd(1, 2, 2);
        let mut occ = Occupancy::new(&g);
        let r = Route::Path(vec![g.access((0, 0))[1]]);
        occ.commit(&r, 0, 1);
        occ.commit(&r, 0, 1);
        assert!(!occ.available(r.nodes()[0], 0, 1));
    }

    /// All simple routes between two tiles on an unloaded graph.
    fn all_routes(g: &RoutingGraph, a: Site, b: Site) -> Vec<Vec<usize>> {
        fn dfs(g: &RoutingGraph, b: Site, path: &mut Vec<usize>, on: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
            let u = *path.last().unwrap();
            if g.access(b).contains(&u) {
                out.push(path.clone());
            }
            for &v in g.neighbours(u) {
                if !on[v] && g.capacity(v) > 0 {
                    on[v] = true;
                    path.push(v);
                    dfs(g, b, path, on, out);
                    path.pop();
                    on[v] = false;
                }
            }
        }
        let mut out = Vec::new();
        for &s in g.access(a) {
            let mut on = vec![false; g.len()];
            on[s] = true;
            dfs(g, b, &mut vec![s], &mut on, &mut out);
        }
        out
    }

    #[test]
    fn bfs_is_shortest() {
        let (g, _) = dd(3, 3, 1);
        let occ = Occupancy::new(&g);
        let sites: Vec<Site> = (0..3).flat_map(|r| (0..3).map(move |c| (r, c))).collect();
        for &a in &sites {
            for &b in &sites {
                if a == b {
                    continue;
                }
                let r = g.find_path(&occ, 0, 1, a, b).unwrap();
                let best = all_routes(&g, a, b).iter().map(Vec::len).min().unwrap();
                assert_eq!(r.nodes().len(), best, "{a:?}->{b:?}");
                assert!(g.route_joins(&r, a, b));
            }
        }
    }

    #[test]
    fn simple_routes_cover_every_route() {
        let (g, _) = dd(3, 3, 1);
        let sorted = |p: &[usize]| {
            let mut s = p.to_vec();
            s.sort_unstable();
            s
        };
        let within = |x: &[usize], y: &[usize]| x.iter().all(|v| y.contains(v));
        for (a, b) in [((0, 0), (2, 2)), ((0, 0), (0, 2)), ((1, 1), (2, 0))] {
            let minimal = g.simple_routes(a, b, 1 << 20).unwrap();
            let sets: Vec<Vec<usize>> = minimal.iter().map(|r| sorted(r.nodes())).collect();
            let best = all_routes(&g, a, b).iter().map(Vec::len).min().unwrap();
            assert_eq!(minimal[0].nodes().len(), best);
            for (i, r) in minimal.iter().enumerate() {
                assert!(g.route_joins(r, a, b));
                for (j, s) in sets.iter().enumerate() {
                    assert!(i == j || !within(s, &sets[i]));
                }
            }
            for p in all_routes(&g, a, b) {
                assert!(sets.iter().any(|s| within(s, &p)));
            }
        }
        assert_eq!(g.simple_routes((0, 0), (2, 2), 3), None);
        assert_eq!(g.simple_routes((0, 0), (0, 1), 1000).unwrap()[0].nodes().len(), 1);
    }

    #[test]
    fn lattice_surgery_routes() {
        let layout = ChipLayout::uniform(Model::LatticeSurgery, 3, 2, 2, 1);
        let m = snake_mapping(4, ArrayShape { rows: 2, cols: 2 });
        let g = RoutingGraph::build(&layout, &m);
        // 5x5 slot grid with four data tiles.
        assert_eq!(g.len(), 21);
        let occ = Occupancy::new(&g);
        let r = g.find_path(&occ, 0, 1, (0, 0), (0, 1)).unwrap();
        assert_eq!(r.nodes().len(), 1);
        let r = g.find_path(&occ, 0, 1, (0, 0), (1, 1)).unwrap();
        assert_eq!(r.nodes().len(), 3);
        assert!(g.route_joins(&r, (0, 0), (1, 1)));

        let tight = ChipLayout::uniform(Model::LatticeSurgery, 3, 1, 2, 0);
        let m = snake_mapping(2, ArrayShape { rows: 1, cols: 2 });
        let g = RoutingGraph::build(&tight, &m);
        assert_eq!(g.find_path(&Occupancy::new(&g), 0, 1, (0, 0), (0, 1)), Some(Route::Adjacent));
    }

    #[test]
    fn batch_preconditions() {
        let (g, _) = dd(3, 3, 1);
        assert_eq!(
            route_batch_guaranteed(&g, 1, &[((0, 0), (0, 1)), ((0, 1), (2, 2))]),
            Err(RouteError::SharedTile { a: 0, b: 1 })
        );
        let four = [((0, 0), (2, 2)), ((0, 1), (2, 1)), ((0, 2), (2, 0)), ((1, 0), (1, 2))];
        assert_eq!(route_batch_guaranteed(&g, 1, &four), Err(RouteError::OverCapacity { k: 4, capacity: 3 }));
        assert_eq!(route_batch_guaranteed(&g, 1, &[]), Ok(Vec::new()));
        let one = route_batch_guaranteed(&g, 1, &[((0, 0), (2, 2))]).unwrap();
        assert_eq!(one[0], g.find_path(&Occupancy::new(&g), 0, 1, (0, 0), (2, 2)).unwrap());
    }

    #[test]
    fn batch_three_crossing_pairs() {
        let (g, _) = dd(3, 3, 1);
        let pairs = [((0, 0), (2, 2)), ((0, 2), (2, 0)), ((1, 1), (0, 1))];
        let routes = route_batch_guaranteed(&g, 1, &pairs).unwrap();
        let mut occ = Occupancy::new(&g);
        for (r, &(a, b)) in routes.iter().zip(&pairs) {
            assert!(g.route_joins(r, a, b));
            occ.commit(r, 0, 1);
        }
    }

    #[test]
    fn render_shows_route() {
        let (g, m) = dd(1, 2, 1);
        let occ = Occupancy::new(&g);
        let r = g.find_path(&occ, 0, 1, (0, 0), (0, 1)).unwrap();
        let pic = g.render(&m, &[('a', &r)]);
        assert_eq!(pic.lines().count(), 3);
        assert!(pic.contains('a'));
    }
}
