//! Chip geometry: tile grid, corridor lines and their lane counts.
//!
//! A layout places an `R x C` array of tile sites and `R + 1` horizontal plus
//! `C + 1` vertical corridor lines (line `i` runs just before tile row or column
//! `i`, line `R` after the last one). Each line has a physical width in qubits;
//! its bandwidth follows from the model's floor formula.
//!
//! Double-defect tiles are `5d` wide and include a routing margin, so every line
//! starts at one lane (`ceil(2.5d)` qubits) that costs no extra pixels. Lattice
//! surgery lines start empty; each lane is one extra row or column of ancilla
//! tiles. Pixels not yet given to any line stay in a per-axis slack pool.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    DoubleDefect,
    LatticeSurgery,
}

impl Model {
    pub fn short(self) -> &'static str {
        match self {
            Model::DoubleDefect => "dd",
            Model::LatticeSurgery => "ls",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

impl FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "dd" | "double-defect" => Ok(Model::DoubleDefect),
            "ls" | "lattice-surgery" => Ok(Model::LatticeSurgery),
            other => Err(format!("unknown model `{other}` (expected dd or ls)")),
        }
    }
}

/// Defect flavour of a double-defect tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Cut {
    X,
    Z,
}

impl Cut {
    pub fn flip(self) -> Cut {
        match self {
            Cut::X => Cut::Z,
            Cut::Z => Cut::X,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChipError {
    #[error("chip {m1}x{m2} cannot hold a single {side}x{side} tile")]
    TooSmall { m1: usize, m2: usize, side: usize },
    #[error("a {rows}x{cols} tile array does not fit the chip ({max_rows}x{max_cols} tiles at most)")]
    ArrayTooLarge { rows: usize, cols: usize, max_rows: usize, max_cols: usize },
    #[error("code distance must be at least 1")]
    ZeroDistance,
    #[error("the sufficient configuration needs a parallelism estimate")]
    MissingParallelism,
    #[error("no square chip up to side {limit} reaches capacity {pm}")]
    NoSufficientChip { pm: usize, limit: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChipSpec {
    pub model: Model,
    pub m1: usize,
    pub m2: usize,
    pub d: usize,
}

impl ChipSpec {
    pub fn tile_side(&self) -> usize {
        tile_side(self.model, self.d)
    }

    /// Largest tile array the chip can hold with no room left for lanes.
    pub fn max_grid(&self) -> (usize, usize) {
        let s = self.tile_side();
        (self.m1 / s, self.m2 / s)
    }
}

/// Tile side in physical qubits: `5d` for double defect, the smallest `s` with
/// `s*s >= 2*d*d` for lattice surgery.
pub fn tile_side(model: Model, d: usize) -> usize {
    match model {
        Model::DoubleDefect => 5 * d,
        Model::LatticeSurgery => {
            let target = 2 * d * d;
            let mut s = (((target as f64).sqrt()) as usize).saturating_sub(1);
            while s * s < target {
                s += 1;
            }
            s
        }
    }
}

/// Lanes in a corridor of physical width `w`.
pub fn channel_bandwidth(w: usize, d: usize, model: Model) -> usize {
    match model {
        // floor(w / 2.5d) without floating point.
        Model::DoubleDefect => 2 * w / (5 * d),
        Model::LatticeSurgery => w / tile_side(model, d),
    }
}

/// Narrowest corridor width that carries `lanes` lanes.
pub fn width_for_lanes(lanes: usize, d: usize, model: Model) -> usize {
    match model {
        Model::DoubleDefect => (5 * d * lanes).div_ceil(2),
        Model::LatticeSurgery => lanes * tile_side(model, d),
    }
}

/// Number of independent CNOTs that can always be routed at once on a chip of
/// bandwidth `b`. `None` for `b = 0`: nothing can be routed.
pub fn chip_capacity(b: usize) -> Option<usize> {
    if b == 0 {
        None
    } else {
        Some((b - 1) / 2 + 3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlackPolicy {
    /// Hand out leftover width round-robin, one lane at a time, from line 0.
    Uniform,
    /// Keep leftover width in the pool for a later bandwidth adjustment.
    Unassigned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Lines running left to right, stacked down the chip (consume `m1`).
    Horizontal,
    /// Lines running top to bottom (consume `m2`).
    Vertical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChipLayout {
    spec: ChipSpec,
    rows: usize,
    cols: usize,
    h_widths: Vec<usize>,
    v_widths: Vec<usize>,
    h_slack: usize,
    v_slack: usize,
}

impl ChipLayout {
    /// Lays out an `rows x cols` tile array on the chip and distributes leftover
    /// width according to `policy`.
    pub fn derive(spec: ChipSpec, rows: usize, cols: usize, policy: SlackPolicy) -> Result<Self, ChipError> {
        if spec.d == 0 {
            return Err(ChipError::ZeroDistance);
        }
        let side = spec.tile_side();
        let (max_rows, max_cols) = spec.max_grid();
        if max_rows == 0 || max_cols == 0 {
            return Err(ChipError::TooSmall { m1: spec.m1, m2: spec.m2, side });
        }
        if rows > max_rows || cols > max_cols || rows == 0 || cols == 0 {
            return Err(ChipError::ArrayTooLarge { rows, cols, max_rows, max_cols });
        }
        let base = base_width(spec);
        let mut layout = ChipLayout {
            spec,
            rows,
            cols,
            h_widths: vec![base; rows + 1],
            v_widths: vec![base; cols + 1],
            h_slack: spec.m1 - rows * side,
            v_slack: spec.m2 - cols * side,
        };
        if policy == SlackPolicy::Uniform {
            for axis in [Axis::Horizontal, Axis::Vertical] {
                let lines = layout.line_count(axis);
                let mut i = 0;
                while layout.grant_lane(axis, i) {
                    i = (i + 1) % lines;
                }
            }
        }
        Ok(layout)
    }

    /// Layout with every line at exactly `lanes[axis][i]` lanes and no slack,
    /// sized to fit. Used for synthetic chips in tests and sweeps.
    pub fn with_bandwidths(
        model: Model,
        d: usize,
        rows: usize,
        cols: usize,
        h_lanes: &[usize],
        v_lanes: &[usize],
    ) -> Self {
        assert_eq!(h_lanes.len(), rows + 1);
        assert_eq!(v_lanes.len(), cols + 1);
        let side = tile_side(model, d);
        let probe = ChipSpec { model, m1: side, m2: side, d };
        let base = base_width(probe);
        let h_widths: Vec<usize> = h_lanes.iter().map(|&b| width_for_lanes(b, d, model)).collect();
        let v_widths: Vec<usize> = v_lanes.iter().map(|&b| width_for_lanes(b, d, model)).collect();
        let m1 = rows * side + h_widths.iter().map(|w| w.saturating_sub(base)).sum::<usize>();
        let m2 = cols * side + v_widths.iter().map(|w| w.saturating_sub(base)).sum::<usize>();
        ChipLayout {
            spec: ChipSpec { model, m1, m2, d },
            rows,
            cols,
            h_widths,
            v_widths,
            h_slack: 0,
            v_slack: 0,
        }
    }

    /// Uniform-bandwidth layout: every line carries `b` lanes.
    pub fn uniform(model: Model, d: usize, rows: usize, cols: usize, b: usize) -> Self {
        Self::with_bandwidths(model, d, rows, cols, &vec![b; rows + 1], &vec![b; cols + 1])
    }

    pub fn spec(&self) -> &ChipSpec {
        &self.spec
    }

    pub fn model(&self) -> Model {
        self.spec.model
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn tile_count(&self) -> usize {
        self.rows * self.cols
    }

    pub fn line_count(&self, axis: Axis) -> usize {
        match axis {
            Axis::Horizontal => self.rows + 1,
            Axis::Vertical => self.cols + 1,
        }
    }

    pub fn width(&self, axis: Axis, line: usize) -> usize {
        match axis {
            Axis::Horizontal => self.h_widths[line],
            Axis::Vertical => self.v_widths[line],
        }
    }

    pub fn line_bandwidth(&self, axis: Axis, line: usize) -> usize {
        channel_bandwidth(self.width(axis, line), self.spec.d, self.spec.model)
    }

    pub fn bandwidths(&self, axis: Axis) -> Vec<usize> {
        (0..self.line_count(axis)).map(|i| self.line_bandwidth(axis, i)).collect()
    }

    /// Chip bandwidth: the narrowest line.
    pub fn bandwidth(&self) -> usize {
        self.bandwidths(Axis::Horizontal)
            .into_iter()
            .chain(self.bandwidths(Axis::Vertical))
            .min()
            .unwrap_or(0)
    }

    /// Sum of lanes over all lines.
    pub fn total_bandwidth(&self) -> usize {
        self.bandwidths(Axis::Horizontal).iter().sum::<usize>()
            + self.bandwidths(Axis::Vertical).iter().sum::<usize>()
    }

    pub fn capacity(&self) -> Option<usize> {
        chip_capacity(self.bandwidth())
    }

    pub fn slack(&self, axis: Axis) -> usize {
        match axis {
            Axis::Horizontal => self.h_slack,
            Axis::Vertical => self.v_slack,
        }
    }

    /// Pixels needed to give `line` one more lane.
    pub fn lane_cost(&self, axis: Axis, line: usize) -> usize {
        let b = self.line_bandwidth(axis, line);
        width_for_lanes(b + 1, self.spec.d, self.spec.model) - self.width(axis, line)
    }

    /// Moves enough slack into `line` for one more lane. Returns false (and
    /// changes nothing) when the pool cannot pay for it.
    pub fn grant_lane(&mut self, axis: Axis, line: usize) -> bool {
        let cost = self.lane_cost(axis, line);
        let (widths, slack) = match axis {
            Axis::Horizontal => (&mut self.h_widths, &mut self.h_slack),
            Axis::Vertical => (&mut self.v_widths, &mut self.v_slack),
        };
        if cost > *slack {
            return false;
        }
        *slack -= cost;
        widths[line] += cost;
        true
    }

    /// Physical extent used along each axis: `(height, width)`.
    pub fn footprint(&self) -> (usize, usize) {
        let base = base_width(self.spec);
        let side = self.spec.tile_side();
        let h = self.rows * side + self.h_widths.iter().map(|w| w.saturating_sub(base)).sum::<usize>();
        let v = self.cols * side + self.v_widths.iter().map(|w| w.saturating_sub(base)).sum::<usize>();
        (h, v)
    }

    /// Top-left physical coordinate of tile site `(r, c)`.
    pub fn tile_origin(&self, r: usize, c: usize) -> (usize, usize) {
        let base = base_width(self.spec);
        let side = self.spec.tile_side();
        let y = r * side + self.h_widths[..=r].iter().map(|w| w.saturating_sub(base)).sum::<usize>();
        let x = c * side + self.v_widths[..=c].iter().map(|w| w.saturating_sub(base)).sum::<usize>();
        (y, x)
    }

    /// Lattice-surgery slot grid: tile rows interleaved with lane rows.
    /// Returns `(slot_rows, slot_cols)`.
    pub fn slot_dims(&self) -> (usize, usize) {
        let h: usize = self.bandwidths(Axis::Horizontal).iter().sum();
        let v: usize = self.bandwidths(Axis::Vertical).iter().sum();
        (self.rows + h, self.cols + v)
    }

    /// Slot coordinate of tile site `(r, c)` in the lattice-surgery slot grid.
    pub fn tile_slot(&self, r: usize, c: usize) -> (usize, usize) {
        let h: usize = (0..=r).map(|i| self.line_bandwidth(Axis::Horizontal, i)).sum();
        let v: usize = (0..=c).map(|i| self.line_bandwidth(Axis::Vertical, i)).sum();
        (r + h, c + v)
    }

    /// Which line (if any) a slot row or column belongs to.
    pub fn slot_line(&self, axis: Axis, index: usize) -> Option<usize> {
        let mut pos = 0;
        for line in 0..self.line_count(axis) {
            let lanes = self.line_bandwidth(axis, line);
            if index < pos + lanes {
                return Some(line);
            }
            pos += lanes + 1;
            if index < pos {
                return None;
            }
        }
        None
    }
}

fn base_width(spec: ChipSpec) -> usize {
    match spec.model {
        Model::DoubleDefect => width_for_lanes(1, spec.d, spec.model),
        Model::LatticeSurgery => 0,
    }
}

/// Standard chip configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChipConfig {
    MinimumViable,
    FourX,
    Sufficient,
    Custom { m1: usize, m2: usize },
    /// Array-shaped chip with every line at the given number of lanes.
    Bandwidth { lanes: usize },
}

impl fmt::Display for ChipConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChipConfig::MinimumViable => f.write_str("min"),
            ChipConfig::FourX => f.write_str("4x"),
            ChipConfig::Sufficient => f.write_str("sufficient"),
            ChipConfig::Custom { m1, m2 } => write!(f, "{m1}x{m2}"),
            ChipConfig::Bandwidth { lanes } => write!(f, "bw{lanes}"),
        }
    }
}

impl FromStr for ChipConfig {
    type Err = String;

    /// Accepts `min`, `4x`, `sufficient`, `WxH` (physical qubits) and `bwK`
    /// (every corridor line at `K` lanes).
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "min" | "minimum" => return Ok(ChipConfig::MinimumViable),
            "4x" => return Ok(ChipConfig::FourX),
            "sufficient" => return Ok(ChipConfig::Sufficient),
            _ => {}
        }
        if let Some(k) = s.strip_prefix("bw") {
            return k.parse().map(|lanes| ChipConfig::Bandwidth { lanes }).map_err(|_| format!("bad lane count in `{s}`"));
        }
        if let Some((a, b)) = s.split_once('x') {
            if let (Ok(m1), Ok(m2)) = (a.parse(), b.parse()) {
                return Ok(ChipConfig::Custom { m1, m2 });
            }
        }
        Err(format!("unknown chip `{s}` (expected min, 4x, sufficient, WxH or bwK)"))
    }
}

fn ceil_sqrt(n: usize) -> usize {
    let mut r = (n as f64).sqrt() as usize;
    while r * r < n {
        r += 1;
    }
    while r > 0 && (r - 1) * (r - 1) >= n {
        r -= 1;
    }
    r
}

/// Physical dimensions `(m1, m2)` of a configuration for `n` qubits.
///
/// `shape` is the tile array the qubits will occupy; it is only consulted by
/// [`ChipConfig::Bandwidth`] and [`ChipConfig::Sufficient`].
pub fn config_dims(
    kind: ChipConfig,
    n: usize,
    d: usize,
    model: Model,
    pm: Option<usize>,
    shape: (usize, usize),
) -> Result<(usize, usize), ChipError> {
    if d == 0 {
        return Err(ChipError::ZeroDistance);
    }
    let side = tile_side(model, d);
    let k = ceil_sqrt(n.max(1));
    match kind {
        ChipConfig::MinimumViable => Ok((k * side, k * side)),
        ChipConfig::FourX => {
            let l = match model {
                Model::DoubleDefect => 2 * k * 5 * d,
                Model::LatticeSurgery => k * 5 * d,
            };
            Ok((l, l))
        }
        ChipConfig::Custom { m1, m2 } => Ok((m1, m2)),
        ChipConfig::Bandwidth { lanes } => {
            let l = ChipLayout::uniform(model, d, shape.0, shape.1, lanes);
            Ok((l.spec.m1, l.spec.m2))
        }
        ChipConfig::Sufficient => {
            let pm = pm.ok_or(ChipError::MissingParallelism)?;
            let start = k * side;
            let limit = start * 8 + 100;
            for l in start..=limit {
                let spec = ChipSpec { model, m1: l, m2: l, d };
                let (mr, mc) = spec.max_grid();
                if mr < shape.0 || mc < shape.1 {
                    continue;
                }
                let layout = ChipLayout::derive(spec, shape.0, shape.1, SlackPolicy::Uniform)?;
                if layout.capacity().is_some_and(|c| c >= pm) {
                    return Ok((l, l));
                }
            }
            Err(ChipError::NoSufficientChip { pm, limit })
        }
    }
}
