//! Exact brute-force solvers: chromatic number, maximum independent set, best label-cover labeling.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Error, Result};
use crate::labelcover::{best_labeling_search, LabelCoverInstance, SatCount, TLabeling};

/// Simple undirected graph on `0..n` with sorted, duplicate-free adjacency lists and no loops.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    n: usize,
    adj: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds from an edge list; duplicates collapse, loops are rejected.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidInput(format!("edge ({u}, {v}) outside {n} vertices")));
            }
            if u == v {
                return Err(Error::InvalidInput(format!("loop at vertex {u}")));
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { n, adj })
    }

    pub fn complete(n: usize) -> Self {
        Self::from_edges(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)))).expect("valid")
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    /// Edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj.iter().enumerate().flat_map(|(u, list)| list.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    pub fn is_independent(&self, set: &[usize]) -> bool {
        let mut inside = vec![false; self.n];
        for &v in set {
            if v >= self.n || inside[v] {
                return false;
            }
            inside[v] = true;
        }
        set.iter().all(|&v| self.adj[v].iter().all(|&w| !inside[w]))
    }

    /// Number of edges whose endpoints share a color.
    pub fn monochromatic_edges(&self, colors: &[usize]) -> usize {
        self.edges().filter(|&(u, v)| colors[u] == colors[v]).count()
    }

    pub fn is_proper_coloring(&self, colors: &[usize], q: usize) -> bool {
        colors.len() == self.n && colors.iter().all(|&c| c < q) && self.monochromatic_edges(colors) == 0
    }
}

/// Limits on oracle inputs and running time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchBudget {
    pub max_vertices: usize,
    pub max_edges: usize,
    pub time_limit_seconds: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self { max_vertices: 5000, max_edges: 5_000_000, time_limit_seconds: 60 }
    }
}

impl SearchBudget {
    pub fn validate(&self) -> Result<()> {
        if self.max_vertices == 0 || self.max_edges == 0 || self.time_limit_seconds == 0 {
            return Err(invalid_param!("budget fields must be positive"));
        }
        Ok(())
    }

    fn admit(&self, g: &Graph) -> Result<Deadline> {
        self.validate()?;
        if g.num_vertices() > self.max_vertices || g.num_edges() > self.max_edges {
            return Err(Error::SizeLimit(format!(
                "graph with {} vertices and {} edges exceeds the budget ({} / {})",
                g.num_vertices(),
                g.num_edges(),
                self.max_vertices,
                self.max_edges
            )));
        }
        Ok(Deadline { end: Instant::now() + Duration::from_secs(self.time_limit_seconds), ticks: 0 })
    }
}

struct Deadline {
    end: Instant,
    ticks: u32,
}

impl Deadline {
    fn check(&mut self) -> Result<()> {
        self.ticks = self.ticks.wrapping_add(1);
        if self.ticks % 4096 == 0 && Instant::now() > self.end {
            return Err(Error::SizeLimit("time limit exceeded".into()));
        }
        Ok(())
    }
}

/// Result of a chromatic-number search up to `qmax` colors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Chromatic {
    Colorable { chi: usize, coloring: Vec<usize> },
    ExceedsQmax { qmax: usize },
}

/// Vertex order for backtracking: start at the highest degree, then repeatedly take the vertex with
/// the most already-ordered neighbors (ties: higher degree, then lower index).
fn search_order(g: &Graph) -> Vec<usize> {
    let n = g.num_vertices();
    let mut placed = vec![false; n];
    let mut links = vec![0usize; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let v = (0..n)
            .filter(|&v| !placed[v])
            .max_by(|&a, &b| links[a].cmp(&links[b]).then(g.degree(a).cmp(&g.degree(b))).then(b.cmp(&a)))
            .expect("unplaced vertex");
        placed[v] = true;
        order.push(v);
        for &w in g.neighbors(v) {
            links[w] += 1;
        }
    }
    order
}

fn try_color(g: &Graph, order: &[usize], q: usize, deadline: &mut Deadline) -> Result<Option<Vec<usize>>> {
    let n = order.len();
    let mut color = vec![usize::MAX; g.num_vertices()];
    // A vertex may open at most one new color: the first vertex gets color 0.
    fn rec(g: &Graph, order: &[usize], i: usize, used: usize, q: usize, color: &mut [usize], deadline: &mut Deadline) -> Result<bool> {
        if i == order.len() {
            return Ok(true);
        }
        deadline.check()?;
        let v = order[i];
        let limit = (used + 1).min(q);
        for c in 0..limit {
            if g.neighbors(v).iter().all(|&w| color[w] != c) {
                color[v] = c;
                if rec(g, order, i + 1, used.max(c + 1), q, color, deadline)? {
                    return Ok(true);
                }
                color[v] = usize::MAX;
            }
        }
        Ok(false)
    }
    if n == 0 || rec(g, order, 0, 0, q, &mut color, deadline)? {
        Ok(Some(color))
    } else {
        Ok(None)
    }
}

/// Smallest `q <= qmax` with a proper `q`-coloring, and the coloring found.
pub fn chromatic_number(g: &Graph, qmax: usize, budget: &SearchBudget) -> Result<Chromatic> {
    let mut deadline = budget.admit(g)?;
    if qmax == 0 {
        return Err(invalid_param!("qmax must be positive"));
    }
    if g.num_vertices() == 0 {
        return Ok(Chromatic::Colorable { chi: 0, coloring: Vec::new() });
    }
    let order = search_order(g);
    for q in 1..=qmax {
        if let Some(coloring) = try_color(g, &order, q, &mut deadline)? {
            debug_assert!(g.is_proper_coloring(&coloring, q));
            return Ok(Chromatic::Colorable { chi: q, coloring });
        }
    }
    Ok(Chromatic::ExceedsQmax { qmax })
}

/// Whether a proper `q`-coloring exists, with a witness.
pub fn find_coloring(g: &Graph, q: usize, budget: &SearchBudget) -> Result<Option<Vec<usize>>> {
    let mut deadline = budget.admit(g)?;
    try_color(g, &search_order(g), q, &mut deadline)
}

/// Maximum independent set size with a witness (sorted).
///
/// Branch and bound for a maximum clique of the complement, bounded by greedy coloring of the
/// candidate set.
pub fn max_independent_set(g: &Graph, budget: &SearchBudget) -> Result<(usize, Vec<usize>)> {
    let mut deadline = budget.admit(g)?;
    let n = g.num_vertices();
    if n == 0 {
        return Ok((0, Vec::new()));
    }
    let words = n.div_ceil(64);
    // Complement adjacency as bitsets.
    let mut comp = vec![vec![0u64; words]; n];
    for (u, row) in comp.iter_mut().enumerate() {
        for v in 0..n {
            if v != u && !g.has_edge(u, v) {
                row[v / 64] |= 1 << (v % 64);
            }
        }
    }

    struct Mis<'a> {
        comp: &'a [Vec<u64>],
        words: usize,
        best: Vec<usize>,
        current: Vec<usize>,
    }

    fn members(set: &[u64]) -> Vec<usize> {
        let mut out = Vec::new();
        for (w, &word) in set.iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                out.push(w * 64 + b);
                bits &= bits - 1;
            }
        }
        out
    }

    impl Mis<'_> {
        /// Greedy coloring of `cand` in the complement: vertices in order with their color bound.
        fn color_bound(&self, cand: &[u64]) -> Vec<(usize, usize)> {
            let mut uncolored = cand.to_vec();
            let mut out = Vec::new();
            let mut color = 0;
            while uncolored.iter().any(|&w| w != 0) {
                color += 1;
                let mut avail = uncolored.clone();
                while let Some(v) = members(&avail).first().copied() {
                    out.push((v, color));
                    uncolored[v / 64] &= !(1 << (v % 64));
                    avail[v / 64] &= !(1 << (v % 64));
                    for (a, c) in avail.iter_mut().zip(&self.comp[v]) {
                        *a &= !c;
                    }
                }
            }
            out
        }

        fn expand(&mut self, mut cand: Vec<u64>, deadline: &mut Deadline) -> Result<()> {
            deadline.check()?;
            let ordered = self.color_bound(&cand);
            for &(v, bound) in ordered.iter().rev() {
                if self.current.len() + bound <= self.best.len() {
                    return Ok(());
                }
                self.current.push(v);
                let next: Vec<u64> = cand.iter().zip(&self.comp[v]).map(|(a, b)| a & b).collect();
                if next.iter().all(|&w| w == 0) {
                    if self.current.len() > self.best.len() {
                        self.best = self.current.clone();
                    }
                } else {
                    self.expand(next, deadline)?;
                }
                self.current.pop();
                cand[v / 64] &= !(1 << (v % 64));
            }
            debug_assert_eq!(cand.len(), self.words);
            Ok(())
        }
    }

    let mut all = vec![u64::MAX; words];
    if n % 64 != 0 {
        all[words - 1] = (1u64 << (n % 64)) - 1;
    }
    let mut mis = Mis { comp: &comp, words, best: vec![0], current: Vec::new() };
    mis.expand(all, &mut deadline)?;
    let mut witness = mis.best;
    witness.sort_unstable();
    debug_assert!(g.is_independent(&witness));
    Ok((witness.len(), witness))
}

/// Exact `max_L sat_L(G)` over t-labelings, within the budget's time limit (as a labeling count cap).
pub fn best_labeling(g: &LabelCoverInstance, t: usize, budget: &SearchBudget) -> Result<(SatCount, TLabeling)> {
    budget.validate()?;
    // Roughly 10^6 labelings per second per budget second, generous for desk-scale inputs.
    let cap = budget.time_limit_seconds.saturating_mul(1_000_000);
    best_labeling_search(g, t, cap)
}
