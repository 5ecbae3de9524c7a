//! Label cover to graph reductions, intended colorings and the influence-based decoder.
//!
//! Every label-cover vertex `v` becomes a block `[v]` of `q^R` vertices, one per point of `[q]^R`;
//! vertex ids are `block * q^R + index` with the row-major index of [`crate::qcube`]. Cross-block
//! edges come from each constraint through the support of the matching gadget operator:
//!
//! * almost3 (one-to-one `pi`, `q = 3`): `x ~ y` iff `T(x_i <-> y_pi(i)) != 0` for all `i`;
//! * col4 / col3 (two-to-two / alpha `pi1, pi2`, `q = 4 / 3`, `R` even): `x ~ y` iff
//!   `T((x_pi1(2i-1), x_pi1(2i)) <-> (y_pi2(2i-1), y_pi2(2i))) != 0` for all `i <= R/2`.
//!
//! Adjacency is a support lookup, never a product of probabilities. Pairs `x ~ x` that a
//! self-loop constraint would create are dropped.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Error, Result};
use crate::gaussian::{mo_bound_report, BoundReport, Verdict};
use crate::labelcover::{satisfies_induced, Constraint, ConstraintKind, LabelCoverInstance, TLabeling};
use crate::operators::{gadget_operator, GadgetKind, MarkovOp};
use crate::oracles::Graph;
use crate::qcube::{bunch_fn, build_basis, decode_into, encode, transform, QFunction};

/// Largest number of block-graph vertices.
pub const MAX_VERTICES: usize = 1 << 22;
/// Largest number of edges [`BlockGraph::to_graph`] will materialize.
pub const MAX_EDGES: usize = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReductionKind {
    Almost3,
    Col4,
    Col3,
}

impl std::str::FromStr for ReductionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "almost3" => Ok(Self::Almost3),
            "col4" => Ok(Self::Col4),
            "col3" => Ok(Self::Col3),
            _ => Err(invalid_param!("unknown reduction kind {s:?}")),
        }
    }
}

impl std::fmt::Display for ReductionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Almost3 => "almost3",
            Self::Col4 => "col4",
            Self::Col3 => "col3",
        })
    }
}

impl ReductionKind {
    pub fn gadget(self) -> GadgetKind {
        match self {
            Self::Almost3 => GadgetKind::Almost3,
            Self::Col4 => GadgetKind::Col4,
            Self::Col3 => GadgetKind::Alpha,
        }
    }

    /// Block alphabet, which is also the palette of the intended coloring.
    pub fn q(self) -> usize {
        self.gadget().base_alphabet()
    }

    pub fn constraint_kind(self) -> ConstraintKind {
        match self {
            Self::Almost3 => ConstraintKind::OneToOne,
            Self::Col4 => ConstraintKind::TwoToTwo,
            Self::Col3 => ConstraintKind::Alpha,
        }
    }

    pub fn for_constraint(kind: ConstraintKind) -> Option<Self> {
        match kind {
            ConstraintKind::OneToOne => Some(Self::Almost3),
            ConstraintKind::TwoToTwo => Some(Self::Col4),
            ConstraintKind::Alpha => Some(Self::Col3),
            ConstraintKind::Explicit => None,
        }
    }
}

/// The graph `[G]`, with edges kept implicit as (constraint, support rule).
#[derive(Debug, Clone)]
pub struct BlockGraph {
    kind: ReductionKind,
    q: usize,
    coords: usize,
    block_size: usize,
    instance: LabelCoverInstance,
    op: MarkovOp,
    support: Vec<bool>,
}

/// For one constraint: the output positions filled per slot, and per slot value the allowed fillings.
struct SlotRule {
    /// `positions[s]`: 0-based coordinates of `y` fixed by slot `s`.
    positions: Vec<Vec<usize>>,
    /// `x_positions[s]`: 0-based coordinates of `x` read by slot `s`.
    x_positions: Vec<Vec<usize>>,
}

impl BlockGraph {
    pub fn kind(&self) -> ReductionKind {
        self.kind
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Coordinates per block (the instance's label range).
    pub fn coords(&self) -> usize {
        self.coords
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn blocks(&self) -> usize {
        self.instance.vertices()
    }

    pub fn num_vertices(&self) -> usize {
        self.blocks() * self.block_size
    }

    pub fn instance(&self) -> &LabelCoverInstance {
        &self.instance
    }

    pub fn operator(&self) -> &MarkovOp {
        &self.op
    }

    pub fn vertex_id(&self, block: usize, index: usize) -> usize {
        block * self.block_size + index
    }

    /// `(block, index)` of a vertex id.
    pub fn locate(&self, id: usize) -> (usize, usize) {
        (id / self.block_size, id % self.block_size)
    }

    /// Coordinates of block vertex `index`.
    pub fn point(&self, index: usize) -> Vec<usize> {
        let mut x = vec![0; self.coords];
        decode_into(self.q, index, &mut x);
        x
    }

    fn slot_rule(&self, c: &Constraint) -> SlotRule {
        match c {
            Constraint::OneToOne { perm } => SlotRule {
                positions: perm.iter().map(|&p| vec![p - 1]).collect(),
                x_positions: (0..self.coords).map(|i| vec![i]).collect(),
            },
            Constraint::TwoToTwo { perm1, perm2 } | Constraint::Alpha { perm1, perm2 } => SlotRule {
                positions: (0..self.coords / 2).map(|i| vec![perm2[2 * i] - 1, perm2[2 * i + 1] - 1]).collect(),
                x_positions: (0..self.coords / 2).map(|i| vec![perm1[2 * i] - 1, perm1[2 * i + 1] - 1]).collect(),
            },
            Constraint::Explicit { .. } => unreachable!("explicit constraints are rejected by reduce"),
        }
    }

    /// Operator state of the values at `positions`.
    fn state(&self, x: &[usize], positions: &[usize]) -> usize {
        positions.iter().fold(0, |s, &p| s * self.q + x[p])
    }

    /// The support rule of constraint `c` on block points `x` (at `u`) and `y` (at `v`).
    fn rule_holds(&self, c: &Constraint, x: &[usize], y: &[usize]) -> bool {
        let rule = self.slot_rule(c);
        let m = self.op.m();
        rule.x_positions.iter().zip(&rule.positions).all(|(xp, yp)| self.support[self.state(x, xp) * m + self.state(y, yp)])
    }

    /// Whether two vertex ids are adjacent in `[G]`.
    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        if a == b || a >= self.num_vertices() || b >= self.num_vertices() {
            return false;
        }
        let ((ba, ia), (bb, ib)) = (self.locate(a), self.locate(b));
        let (xa, xb) = (self.point(ia), self.point(ib));
        self.instance.edges().iter().any(|e| {
            (e.u == ba && e.v == bb && self.rule_holds(&e.constraint, &xa, &xb)) || (e.u == bb && e.v == ba && self.rule_holds(&e.constraint, &xb, &xa))
        })
    }

    /// Calls `visit(x_id, y_id)` for every edge of every constraint (parallel constraints repeat edges).
    pub fn for_each_edge(&self, mut visit: impl FnMut(usize, usize)) {
        let m = self.op.m();
        let slot_len = if self.kind == ReductionKind::Almost3 { 1 } else { 2 };
        let mut x = vec![0; self.coords];
        let mut y = vec![0; self.coords];
        for e in self.instance.edges() {
            let rule = self.slot_rule(&e.constraint);
            for ix in 0..self.block_size {
                decode_into(self.q, ix, &mut x);
                // Allowed fillings of each slot of y.
                let options: Vec<Vec<usize>> = rule
                    .x_positions
                    .iter()
                    .map(|xp| {
                        let s = self.state(&x, xp);
                        (0..m).filter(|&t| self.support[s * m + t]).collect()
                    })
                    .collect();
                if options.iter().any(Vec::is_empty) {
                    continue;
                }
                let mut pick = vec![0usize; options.len()];
                loop {
                    for (slot, &choice) in pick.iter().enumerate() {
                        let mut t = options[slot][choice];
                        for &p in rule.positions[slot].iter().rev() {
                            y[p] = t % self.q;
                            t /= self.q;
                        }
                        debug_assert!(t == 0 && rule.positions[slot].len() == slot_len);
                    }
                    let iy = encode(self.q, &y);
                    let (a, b) = (self.vertex_id(e.u, ix), self.vertex_id(e.v, iy));
                    if a != b {
                        visit(a, b);
                    }
                    let mut s = pick.len();
                    loop {
                        if s == 0 {
                            break;
                        }
                        s -= 1;
                        pick[s] += 1;
                        if pick[s] < options[s].len() {
                            break;
                        }
                        pick[s] = 0;
                        if s == 0 {
                            s = usize::MAX;
                            break;
                        }
                    }
                    if s == usize::MAX || pick.is_empty() {
                        break;
                    }
                }
            }
        }
    }

    /// Upper bound on the number of emitted edges (before deduplication).
    pub fn edge_bound(&self) -> usize {
        let m = self.op.m();
        let max_row = (0..m).map(|s| (0..m).filter(|&t| self.support[s * m + t]).count()).max().unwrap_or(0);
        let slots = if self.kind == ReductionKind::Almost3 { self.coords } else { self.coords / 2 };
        let per_x = (max_row as f64).powi(slots as i32);
        (per_x * self.block_size as f64 * self.instance.edges().len() as f64).min(usize::MAX as f64) as usize
    }

    /// Explicit simple graph (duplicate edges merged).
    pub fn to_graph(&self) -> Result<Graph> {
        if self.edge_bound() > MAX_EDGES {
            return Err(Error::SizeLimit(format!("up to {} edges exceed the materialization cap {MAX_EDGES}", self.edge_bound())));
        }
        let mut edges = Vec::new();
        self.for_each_edge(|a, b| edges.push((a, b)));
        Graph::from_edges(self.num_vertices(), edges)
    }

    /// DIMACS edge list; the first comment line is a JSON map of vertex ids to `(block, x)`.
    pub fn to_dimacs(&self) -> Result<String> {
        let g = self.to_graph()?;
        let map: Vec<(usize, Vec<usize>)> = (0..self.num_vertices()).map(|id| (id / self.block_size, self.point(id % self.block_size))).collect();
        let header = serde_json::json!({
            "kind": self.kind,
            "q": self.q,
            "coords": self.coords,
            "blocks": self.blocks(),
            "ids": "1-based; vertex i maps to vertex_map[i-1] = [block, x]",
            "vertex_map": map,
        });
        let mut out = String::new();
        out.push_str(&format!("c {header}\n"));
        out.push_str(&format!("p edge {} {}\n", g.num_vertices(), g.num_edges()));
        for (u, v) in g.edges() {
            out.push_str(&format!("e {} {}\n", u + 1, v + 1));
        }
        Ok(out)
    }
}

/// Reads a DIMACS edge list (comments ignored).
pub fn read_dimacs(text: &str) -> Result<Graph> {
    let bad = |line: &str| Error::InvalidInput(format!("malformed DIMACS line {line:?}"));
    let mut n = None;
    let mut edges = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("c") => {}
            Some("p") => {
                let _format = parts.next().ok_or_else(|| bad(line))?;
                n = Some(parts.next().and_then(|s| s.parse::<usize>().ok()).ok_or_else(|| bad(line))?);
            }
            Some("e") => {
                let u: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad(line))?;
                let v: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad(line))?;
                if u == 0 || v == 0 {
                    return Err(bad(line));
                }
                edges.push((u - 1, v - 1));
            }
            _ => return Err(bad(line)),
        }
    }
    Graph::from_edges(n.ok_or_else(|| Error::InvalidInput("missing DIMACS problem line".into()))?, edges)
}

/// Builds `[G]` for a reduction kind; the instance's constraints must all be of the matching family.
pub fn reduce(kind: ReductionKind, g: &LabelCoverInstance) -> Result<BlockGraph> {
    if let Some(e) = g.edges().iter().find(|e| e.constraint.kind() != kind.constraint_kind()) {
        return Err(invalid_param!("{kind} needs {:?} constraints, found {:?}", kind.constraint_kind(), e.constraint.kind()));
    }
    let coords = g.label_range();
    if kind != ReductionKind::Almost3 && coords % 2 != 0 {
        return Err(invalid_param!("{kind} needs an even label range, got {coords}"));
    }
    let q = kind.q();
    let block_size = (q as u64)
        .checked_pow(coords as u32)
        .filter(|&b| b.saturating_mul(g.vertices() as u64) <= MAX_VERTICES as u64)
        .ok_or_else(|| Error::SizeLimit(format!("{} blocks of {q}^{coords} vertices exceed {MAX_VERTICES}", g.vertices())))? as usize;
    let op = gadget_operator(kind.gadget());
    let support = op.support();
    Ok(BlockGraph { kind, q, coords, block_size, instance: g.clone(), op, support })
}

/// A (possibly partial) coloring of `[G]` with palette `{0..palette-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColoringAssignment {
    pub palette: usize,
    pub colors: Vec<Option<usize>>,
}

impl ColoringAssignment {
    pub fn validate(&self) -> Result<()> {
        match self.colors.iter().flatten().find(|&&c| c >= self.palette) {
            Some(c) => Err(invalid_param!("color {c} outside palette of {}", self.palette)),
            None => Ok(()),
        }
    }

    /// Vertices with color `c`.
    pub fn class(&self, c: usize) -> Vec<usize> {
        (0..self.colors.len()).filter(|&v| self.colors[v] == Some(c)).collect()
    }
}

/// Colors `x in [v]` by `x_{l(v)}` for every labeled block.
///
/// `labels[v] = None` leaves block `v` uncolored (almost3 only). The labeled blocks must satisfy
/// every constraint they induce; col4 and col3 need every block labeled.
pub fn intended_coloring(bg: &BlockGraph, labels: &[Option<usize>]) -> Result<ColoringAssignment> {
    let g = bg.instance();
    if labels.len() != g.vertices() {
        return Err(invalid_param!("{} labels for {} vertices", labels.len(), g.vertices()));
    }
    if bg.kind != ReductionKind::Almost3 && labels.iter().any(Option::is_none) {
        return Err(Error::InvalidLabeling(format!("{} needs a label on every vertex", bg.kind)));
    }
    let mut l = TLabeling::new(1);
    for (v, a) in labels.iter().enumerate() {
        if let Some(a) = *a {
            if !(1..=bg.coords).contains(&a) {
                return Err(Error::InvalidLabeling(format!("label {a} on vertex {v} outside 1..={}", bg.coords)));
            }
            l.sets.insert(v, BTreeSet::from([a]));
        }
    }
    let s: BTreeSet<usize> = l.sets.keys().copied().collect();
    if !satisfies_induced(g, &l, &s) {
        return Err(Error::InvalidLabeling("labeling violates an induced constraint".into()));
    }
    let mut colors = vec![None; bg.num_vertices()];
    let mut x = vec![0; bg.coords];
    for (v, a) in labels.iter().enumerate() {
        if let Some(a) = *a {
            for idx in 0..bg.block_size {
                decode_into(bg.q, idx, &mut x);
                colors[bg.vertex_id(v, idx)] = Some(x[a - 1]);
            }
        }
    }
    Ok(ColoringAssignment { palette: bg.q, colors })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColoringReport {
    /// Edges with both ends colored alike.
    pub monochromatic: usize,
    pub uncolored: usize,
    pub edges: usize,
}

/// Exact counts over the materialized edge set.
pub fn verify_coloring(bg: &BlockGraph, c: &ColoringAssignment) -> Result<ColoringReport> {
    c.validate()?;
    if c.colors.len() != bg.num_vertices() {
        return Err(invalid_param!("coloring covers {} of {} vertices", c.colors.len(), bg.num_vertices()));
    }
    let g = bg.to_graph()?;
    let monochromatic = g.edges().filter(|&(u, v)| matches!((c.colors[u], c.colors[v]), (Some(a), Some(b)) if a == b)).count();
    Ok(ColoringReport { monochromatic, uncolored: c.colors.iter().filter(|c| c.is_none()).count(), edges: g.num_edges() })
}

/// Decoder thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub k: usize,
    pub delta: f64,
    pub epsilon: f64,
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self { k: 3, delta: 0.05, epsilon: 0.1 }
    }
}

/// Per induced edge of `J`: whether the decoded lists satisfy it, and the noisy inner product check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDecode {
    pub edge: usize,
    pub u: usize,
    pub v: usize,
    pub satisfied: bool,
    /// `<f, T g>` for the aligned restrictions; zero for an independent set.
    pub inner: f64,
    /// The bound checker found a common influential coordinate.
    pub common_influential: bool,
    pub bound: BoundReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    pub params: DecodeParams,
    /// Density of the set in every block.
    pub densities: Vec<f64>,
    /// Blocks with density at least `epsilon`.
    pub j: Vec<usize>,
    /// List size bound: `k/delta` (almost3, col3) or `4k/delta` (col4).
    pub t: usize,
    pub labeling: TLabeling,
    pub edges: Vec<EdgeDecode>,
}

impl DecodeResult {
    /// Fraction of induced edges satisfied (1 when there are none).
    pub fn satisfied_fraction(&self) -> f64 {
        if self.edges.is_empty() {
            1.0
        } else {
            self.edges.iter().filter(|e| e.satisfied).count() as f64 / self.edges.len() as f64
        }
    }

    pub fn max_list_size(&self) -> usize {
        self.labeling.sets.values().map(BTreeSet::len).max().unwrap_or(0)
    }
}

/// `f_v`: indicator of the set restricted to block `v`.
fn block_indicator(bg: &BlockGraph, members: &[bool], v: usize) -> Result<QFunction> {
    let start = bg.vertex_id(v, 0);
    let values = members[start..start + bg.block_size].iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    QFunction::new(bg.q, bg.coords, values)
}

/// Decodes an independent set into `J` and a t-labeling of `J`.
pub fn decode_tlabeling(bg: &BlockGraph, set: &[usize], params: DecodeParams) -> Result<DecodeResult> {
    let DecodeParams { k, delta, epsilon } = params;
    if k == 0 || !(delta > 0.0) || !(epsilon > 0.0) {
        return Err(invalid_param!("decoder needs k >= 1, delta > 0, epsilon > 0"));
    }
    let n = bg.num_vertices();
    let mut members = vec![false; n];
    for &x in set {
        if x >= n || members[x] {
            return Err(Error::InvalidInput(format!("set entry {x} is out of range or repeated")));
        }
        members[x] = true;
    }
    let mut conflict = None;
    bg.for_each_edge(|a, b| {
        if conflict.is_none() && members[a] && members[b] {
            conflict = Some((a, b));
        }
    });
    if let Some((a, b)) = conflict {
        return Err(Error::InvalidInput(format!("set is not independent: {a} ~ {b}")));
    }

    let (level, threshold, t) = match bg.kind {
        ReductionKind::Col4 => (2 * k, delta / 2.0, (4.0 * k as f64 / delta + 1e-9).floor() as usize),
        _ => (k, delta, (k as f64 / delta + 1e-9).floor() as usize),
    };
    let t = t.max(1);
    let blocks = bg.blocks();
    let basis = build_basis(bg.q)?;
    let mut densities = Vec::with_capacity(blocks);
    let mut indicators = Vec::with_capacity(blocks);
    let mut j = Vec::new();
    let mut labeling = TLabeling::new(t);
    for v in 0..blocks {
        let f = block_indicator(bg, &members, v)?;
        let density = f.mean();
        densities.push(density);
        if density >= epsilon {
            j.push(v);
            let inf = transform(&f, &basis)?.low_level_influences(level);
            let list: Vec<usize> = (1..=bg.coords).filter(|&i| inf[i - 1] >= threshold).collect();
            if list.len() > t {
                return Err(Error::InvalidLabeling(format!("block {v} decoded {} labels, above t = {t}", list.len())));
            }
            labeling.insert(v, list)?;
        }
        indicators.push(f);
    }

    let in_j: BTreeSet<usize> = j.iter().copied().collect();
    let mut edges = Vec::new();
    for (idx, e) in bg.instance().edges().iter().enumerate() {
        if !(in_j.contains(&e.u) && in_j.contains(&e.v)) {
            continue;
        }
        let satisfied = labeling.satisfies(&e.constraint, e.u, e.v);
        let (fu, fv) = (&indicators[e.u], &indicators[e.v]);
        let bound = match &e.constraint {
            Constraint::OneToOne { perm } => mo_bound_report(fu, &fv.permute_coords(perm)?, bg.operator(), k, delta, epsilon, false)?,
            Constraint::TwoToTwo { perm1, perm2 } => {
                let f = bunch_fn(&fu.permute_coords(perm1)?)?;
                let g = bunch_fn(&fv.permute_coords(perm2)?)?;
                mo_bound_report(&f, &g, bg.operator(), k, delta, epsilon, false)?
            }
            Constraint::Alpha { perm1, perm2 } => {
                mo_bound_report(&fu.permute_coords(perm1)?, &fv.permute_coords(perm2)?, bg.operator(), k, delta, epsilon, true)?
            }
            Constraint::Explicit { .. } => unreachable!("explicit constraints are rejected by reduce"),
        };
        edges.push(EdgeDecode {
            edge: idx,
            u: e.u,
            v: e.v,
            satisfied,
            inner: bound.inner,
            common_influential: bound.verdict == Verdict::HypothesisViolated,
            bound,
        });
    }
    Ok(DecodeResult { params, densities, j, t, labeling, edges })
}
