//! Label-cover instances, t-labelings and the bipartite transformations.
//!
//! Vertices are 0-based ids; labels are 1-based. A permutation `pi` on `{1..R}` is stored as the
//! vector `[pi(1), .., pi(R)]`.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Error, Result};
use crate::rational::{self, Rational};

/// Largest vertex count accepted by the exhaustive evaluators.
pub const MAX_EXHAUSTIVE_VERTICES: usize = 10;
/// Largest label range accepted by the exhaustive evaluators.
pub const MAX_EXHAUSTIVE_LABELS: usize = 8;
/// Largest number of constraints a transformation may emit.
pub const MAX_CONSTRAINTS: usize = 1_000_000;
/// Largest number of labelings or sequences an enumerator may visit.
pub const MAX_ENUMERATION: u64 = 50_000_000;

fn check_perm(perm: &[usize], r: usize) -> Result<()> {
    if perm.len() != r {
        return Err(Error::InvalidInstance(format!("permutation of length {} on {{1..{r}}}", perm.len())));
    }
    let mut seen = vec![false; r + 1];
    for &p in perm {
        if p == 0 || p > r || seen[p] {
            return Err(Error::InvalidInstance(format!("{perm:?} is not a permutation of 1..={r}")));
        }
        seen[p] = true;
    }
    Ok(())
}

pub fn invert_perm(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p - 1] = i + 1;
    }
    inv
}

/// A set of label pairs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Relation {
    pairs: BTreeSet<(usize, usize)>,
}

impl Relation {
    pub fn new(pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Self { pairs: pairs.into_iter().collect() }
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.pairs.contains(&(a, b))
    }

    pub fn pairs(&self) -> &BTreeSet<(usize, usize)> {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn transpose(&self) -> Relation {
        Relation::new(self.pairs.iter().map(|&(a, b)| (b, a)))
    }

    /// Right labels related to `a`.
    pub fn image(&self, a: usize) -> impl Iterator<Item = usize> + '_ {
        self.pairs.range((a, 0)..(a + 1, 0)).map(|&(_, b)| b)
    }

    fn in_range(&self, left: usize, right: usize) -> bool {
        self.pairs.iter().all(|&(a, b)| (1..=left).contains(&a) && (1..=right).contains(&b))
    }

    /// Every right label `b <= R/d` has exactly `d` partners and every left label exactly one.
    pub fn is_d_to_one(&self, r: usize, d: usize) -> bool {
        if d == 0 || r % d != 0 || !self.in_range(r, r / d) {
            return false;
        }
        let mut left = vec![0usize; r + 1];
        let mut right = vec![0usize; r / d + 1];
        for &(a, b) in &self.pairs {
            left[a] += 1;
            right[b] += 1;
        }
        left[1..].iter().all(|&c| c == 1) && right[1..].iter().all(|&c| c == d)
    }

    /// Every label on either side has exactly `d` partners.
    pub fn is_d_to_d(&self, r: usize, d: usize) -> bool {
        if !self.in_range(r, r) {
            return false;
        }
        let mut left = vec![0usize; r + 1];
        let mut right = vec![0usize; r + 1];
        for &(a, b) in &self.pairs {
            left[a] += 1;
            right[b] += 1;
        }
        left[1..].iter().all(|&c| c == d) && right[1..].iter().all(|&c| c == d)
    }
}

/// Constraint families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintKind {
    OneToOne,
    TwoToTwo,
    Alpha,
    Explicit,
}

impl std::str::FromStr for ConstraintKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one-to-one" => Ok(Self::OneToOne),
            "two-to-two" => Ok(Self::TwoToTwo),
            "alpha" => Ok(Self::Alpha),
            "explicit" => Ok(Self::Explicit),
            _ => Err(invalid_param!("unknown constraint kind {s:?}")),
        }
    }
}

/// The relation on one edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Constraint {
    /// `b = pi(a)`.
    OneToOne { perm: Vec<usize> },
    /// `(pi1^-1(a), pi2^-1(b))` lie in a common block `{2i-1, 2i}`.
    TwoToTwo { perm1: Vec<usize>, perm2: Vec<usize> },
    /// As two-to-two, excluding the pair `(2i, 2i)`.
    Alpha { perm1: Vec<usize>, perm2: Vec<usize> },
    Explicit { relation: Relation },
}

impl Constraint {
    pub fn kind(&self) -> ConstraintKind {
        match self {
            Self::OneToOne { .. } => ConstraintKind::OneToOne,
            Self::TwoToTwo { .. } => ConstraintKind::TwoToTwo,
            Self::Alpha { .. } => ConstraintKind::Alpha,
            Self::Explicit { .. } => ConstraintKind::Explicit,
        }
    }

    pub fn identity(kind: ConstraintKind, r: usize) -> Result<Self> {
        let id: Vec<usize> = (1..=r).collect();
        let c = match kind {
            ConstraintKind::OneToOne => Self::OneToOne { perm: id },
            ConstraintKind::TwoToTwo => Self::TwoToTwo { perm1: id.clone(), perm2: id },
            ConstraintKind::Alpha => Self::Alpha { perm1: id.clone(), perm2: id },
            ConstraintKind::Explicit => Self::Explicit { relation: Relation::new((1..=r).map(|a| (a, a))) },
        };
        c.validate(r)?;
        Ok(c)
    }

    pub fn validate(&self, r: usize) -> Result<()> {
        match self {
            Self::OneToOne { perm } => check_perm(perm, r),
            Self::TwoToTwo { perm1, perm2 } | Self::Alpha { perm1, perm2 } => {
                if r % 2 != 0 {
                    return Err(Error::InvalidInstance(format!("{:?} constraints need an even label range, got {r}", self.kind())));
                }
                check_perm(perm1, r)?;
                check_perm(perm2, r)
            }
            Self::Explicit { relation } => {
                if relation.in_range(r, r) {
                    Ok(())
                } else {
                    Err(Error::InvalidInstance(format!("relation uses labels outside 1..={r}")))
                }
            }
        }
    }

    /// Membership test with labels in range (unchecked).
    fn holds_raw(&self, a: usize, b: usize) -> bool {
        match self {
            Self::OneToOne { perm } => perm[a - 1] == b,
            Self::TwoToTwo { perm1, perm2 } | Self::Alpha { perm1, perm2 } => {
                let i = perm1.iter().position(|&p| p == a).map_or(0, |i| i + 1);
                let j = perm2.iter().position(|&p| p == b).map_or(0, |j| j + 1);
                let same_block = (i + 1) / 2 == (j + 1) / 2;
                match self {
                    Self::Alpha { .. } => same_block && !(i % 2 == 0 && j % 2 == 0),
                    _ => same_block,
                }
            }
            Self::Explicit { relation } => relation.contains(a, b),
        }
    }

    /// The same relation read from `v` to `u`.
    pub fn transpose(&self) -> Constraint {
        match self {
            Self::OneToOne { perm } => Self::OneToOne { perm: invert_perm(perm) },
            Self::TwoToTwo { perm1, perm2 } => Self::TwoToTwo { perm1: perm2.clone(), perm2: perm1.clone() },
            Self::Alpha { perm1, perm2 } => Self::Alpha { perm1: perm2.clone(), perm2: perm1.clone() },
            Self::Explicit { relation } => Self::Explicit { relation: relation.transpose() },
        }
    }

    /// Row-major `R x R` membership table, indexed `(a-1)*R + (b-1)`.
    pub fn table(&self, r: usize) -> Vec<bool> {
        let mut t = vec![false; r * r];
        for a in 1..=r {
            for b in 1..=r {
                t[(a - 1) * r + (b - 1)] = self.holds_raw(a, b);
            }
        }
        t
    }

    pub fn to_relation(&self, r: usize) -> Relation {
        let t = self.table(r);
        Relation::new((0..r * r).filter(|&i| t[i]).map(|i| (i / r + 1, i % r + 1)))
    }
}

/// Membership test for labels in `{1..R}`.
pub fn constraint_holds(c: &Constraint, r: usize, a: usize, b: usize) -> Result<bool> {
    if !(1..=r).contains(&a) || !(1..=r).contains(&b) {
        return Err(invalid_param!("labels ({a}, {b}) outside 1..={r}"));
    }
    c.validate(r).map_err(|e| invalid_param!("{e}"))?;
    Ok(c.holds_raw(a, b))
}

/// An edge with its constraint, stored with `u <= v`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LcEdge {
    pub u: usize,
    pub v: usize,
    #[serde(flatten)]
    pub constraint: Constraint,
}

#[derive(Deserialize)]
struct InstanceRepr {
    vertices: usize,
    #[serde(rename = "R")]
    r: usize,
    edges: Vec<LcEdge>,
}

/// `G = ((V, E), R, Psi)`; edges may be parallel or self-loops.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "InstanceRepr")]
pub struct LabelCoverInstance {
    vertices: usize,
    #[serde(rename = "R")]
    r: usize,
    edges: Vec<LcEdge>,
}

impl TryFrom<InstanceRepr> for LabelCoverInstance {
    type Error = Error;

    fn try_from(repr: InstanceRepr) -> Result<Self> {
        Self::new(repr.vertices, repr.r, repr.edges)
    }
}

impl LabelCoverInstance {
    /// Validates every constraint and re-orients edges so that `u <= v`.
    pub fn new(vertices: usize, r: usize, edges: Vec<LcEdge>) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidInstance("label range must be positive".into()));
        }
        let mut stored = Vec::with_capacity(edges.len());
        for e in edges {
            if e.u >= vertices || e.v >= vertices {
                return Err(Error::InvalidInstance(format!("edge ({}, {}) outside {vertices} vertices", e.u, e.v)));
            }
            e.constraint.validate(r)?;
            stored.push(if e.u <= e.v { e } else { LcEdge { u: e.v, v: e.u, constraint: e.constraint.transpose() } });
        }
        Ok(Self { vertices, r, edges: stored })
    }

    pub fn vertices(&self) -> usize {
        self.vertices
    }

    pub fn label_range(&self) -> usize {
        self.r
    }

    pub fn edges(&self) -> &[LcEdge] {
        &self.edges
    }

    /// The common constraint family, if all edges share one.
    pub fn family(&self) -> Option<ConstraintKind> {
        let first = self.edges.first()?.constraint.kind();
        self.edges.iter().all(|e| e.constraint.kind() == first).then_some(first)
    }

    fn tables(&self) -> Vec<Vec<bool>> {
        self.edges.iter().map(|e| e.constraint.table(self.r)).collect()
    }
}

/// `L : V -> subsets of {1..R}` with `|L(v)| <= t`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TLabeling {
    pub t: usize,
    pub sets: BTreeMap<usize, BTreeSet<usize>>,
}

impl TLabeling {
    pub fn new(t: usize) -> Self {
        Self { t, sets: BTreeMap::new() }
    }

    /// A 1-labeling from `labels[v]`.
    pub fn from_labels(labels: &[usize]) -> Self {
        Self { t: 1, sets: labels.iter().enumerate().map(|(v, &a)| (v, BTreeSet::from([a]))).collect() }
    }

    pub fn insert(&mut self, v: usize, labels: impl IntoIterator<Item = usize>) -> Result<()> {
        let set: BTreeSet<usize> = labels.into_iter().collect();
        if set.len() > self.t {
            return Err(Error::InvalidLabeling(format!("{} labels on vertex {v} exceed t = {}", set.len(), self.t)));
        }
        self.sets.insert(v, set);
        Ok(())
    }

    pub fn get(&self, v: usize) -> Option<&BTreeSet<usize>> {
        self.sets.get(&v)
    }

    pub fn validate(&self, r: usize) -> Result<()> {
        for (v, set) in &self.sets {
            if set.len() > self.t {
                return Err(Error::InvalidLabeling(format!("vertex {v} has {} > t = {} labels", set.len(), self.t)));
            }
            if let Some(a) = set.iter().find(|&&a| a == 0 || a > r) {
                return Err(Error::InvalidLabeling(format!("label {a} on vertex {v} outside 1..={r}")));
            }
        }
        Ok(())
    }

    /// `(L(u) x L(v)) meets psi`; unlabeled endpoints fail.
    pub fn satisfies(&self, c: &Constraint, u: usize, v: usize) -> bool {
        match (self.sets.get(&u), self.sets.get(&v)) {
            (Some(lu), Some(lv)) => lu.iter().any(|&a| lv.iter().any(|&b| c.holds_raw(a, b))),
            _ => false,
        }
    }
}

/// Satisfied edges out of the total, counted with multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SatCount {
    pub satisfied: usize,
    pub total: usize,
}

impl SatCount {
    /// An instance without edges counts as fully satisfied.
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.satisfied as f64 / self.total as f64
        }
    }

    pub fn exact(&self) -> Rational {
        if self.total == 0 {
            Rational::one()
        } else {
            rational::ratio(self.satisfied as i64, self.total as i64)
        }
    }
}

/// `sat_L(G)` for a t-labeling of every vertex.
pub fn eval_sat(g: &LabelCoverInstance, l: &TLabeling) -> Result<SatCount> {
    l.validate(g.r).map_err(|e| invalid_param!("{e}"))?;
    if let Some(v) = (0..g.vertices).find(|v| !l.sets.contains_key(v)) {
        return Err(invalid_param!("vertex {v} is unlabeled"));
    }
    let satisfied = g.edges.iter().filter(|e| l.satisfies(&e.constraint, e.u, e.v)).count();
    Ok(SatCount { satisfied, total: g.edges.len() })
}

/// Edges with both endpoints in `set`, as indices into `g.edges()`.
pub fn induced_edges(g: &LabelCoverInstance, set: &BTreeSet<usize>) -> Vec<usize> {
    (0..g.edges.len()).filter(|&i| set.contains(&g.edges[i].u) && set.contains(&g.edges[i].v)).collect()
}

/// Whether `l` satisfies every constraint induced by `set`.
pub fn satisfies_induced(g: &LabelCoverInstance, l: &TLabeling, set: &BTreeSet<usize>) -> bool {
    induced_edges(g, set).into_iter().all(|i| l.satisfies(&g.edges[i].constraint, g.edges[i].u, g.edges[i].v))
}

/// All `k`-subsets of `{1..r}` in lexicographic order.
pub fn label_subsets(r: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, r: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for a in start..=r {
            if r - a + 1 < k - cur.len() {
                break;
            }
            cur.push(a);
            rec(a + 1, r, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(1, r, k, &mut Vec::new(), &mut out);
    out
}

/// Bitmask of labels (bit `a-1`) for each subset.
fn masks(subsets: &[Vec<usize>]) -> Vec<u32> {
    subsets.iter().map(|s| s.iter().fold(0u32, |m, &a| m | 1 << (a - 1))).collect()
}

/// `pair_ok[c][i * n + j]`: subsets `i` (at `u`) and `j` (at `v`) satisfy constraint `c`.
fn pair_tables(tables: &[Vec<bool>], r: usize, set_masks: &[u32]) -> Vec<Vec<bool>> {
    let n = set_masks.len();
    tables
        .iter()
        .map(|t| {
            let mut out = vec![false; n * n];
            for (i, &mi) in set_masks.iter().enumerate() {
                for (j, &mj) in set_masks.iter().enumerate() {
                    out[i * n + j] = (0..r).any(|a| mi >> a & 1 == 1 && (0..r).any(|b| mj >> b & 1 == 1 && t[a * r + b]));
                }
            }
            out
        })
        .collect()
}

/// Value and witness of an induced-satisfiability search.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsatResult {
    #[serde(with = "rational::as_string")]
    pub value: Rational,
    pub set: BTreeSet<usize>,
    pub labeling: TLabeling,
}

/// `isat_t(G)`: the largest `|S|/|V|` admitting a t-labeling of `S` satisfying all induced constraints.
///
/// Exhaustive branch and bound; labelings use sets of exactly `min(t, R)` labels, which loses nothing.
/// Capped at `|V| <= 10`, `R <= 8`.
pub fn isat_t(g: &LabelCoverInstance, t: usize) -> Result<IsatResult> {
    if t == 0 {
        return Err(invalid_param!("t must be at least 1"));
    }
    if g.vertices == 0 {
        return Err(invalid_param!("instance has no vertices"));
    }
    if g.vertices > MAX_EXHAUSTIVE_VERTICES || g.r > MAX_EXHAUSTIVE_LABELS {
        return Err(Error::SizeLimit(format!(
            "isat_t is capped at {MAX_EXHAUSTIVE_VERTICES} vertices and R <= {MAX_EXHAUSTIVE_LABELS} (got {}, {})",
            g.vertices, g.r
        )));
    }
    let subsets = label_subsets(g.r, t.min(g.r));
    let set_masks = masks(&subsets);
    let ok = pair_tables(&g.tables(), g.r, &set_masks);
    let n = set_masks.len();
    // Constraints grouped by their later endpoint, so each is checked once both ends are placed.
    let mut by_last: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); g.vertices];
    for (c, e) in g.edges.iter().enumerate() {
        by_last[e.v].push((c, e.u, e.v));
    }

    struct Search<'a> {
        n_sets: usize,
        ok: &'a [Vec<bool>],
        by_last: &'a [Vec<(usize, usize, usize)>],
        choice: Vec<Option<usize>>,
        included: usize,
        best: usize,
        best_choice: Vec<Option<usize>>,
    }

    impl Search<'_> {
        fn consistent(&self, v: usize) -> bool {
            self.by_last[v].iter().all(|&(c, u, w)| match (self.choice[u], self.choice[w]) {
                (Some(i), Some(j)) => self.ok[c][i * self.n_sets + j],
                _ => true,
            })
        }

        fn run(&mut self, v: usize) {
            let total = self.choice.len();
            if self.included + (total - v) <= self.best {
                return;
            }
            if v == total {
                self.best = self.included;
                self.best_choice = self.choice.clone();
                return;
            }
            for i in 0..self.n_sets {
                self.choice[v] = Some(i);
                if self.consistent(v) {
                    self.included += 1;
                    self.run(v + 1);
                    self.included -= 1;
                    if self.best == total {
                        return;
                    }
                }
            }
            self.choice[v] = None;
            self.run(v + 1);
        }
    }

    let mut search = Search {
        n_sets: n,
        ok: &ok,
        by_last: &by_last,
        choice: vec![None; g.vertices],
        included: 0,
        best: 0,
        best_choice: vec![None; g.vertices],
    };
    search.run(0);
    let mut labeling = TLabeling::new(t);
    let mut set = BTreeSet::new();
    for (v, c) in search.best_choice.iter().enumerate() {
        if let Some(i) = c {
            set.insert(v);
            labeling.sets.insert(v, subsets[*i].iter().copied().collect());
        }
    }
    Ok(IsatResult { value: rational::ratio(search.best as i64, g.vertices as i64), set, labeling })
}

/// Maximum `sat_L(G)` over t-labelings (sets of exactly `min(t, R)` labels), with a witness.
pub fn best_labeling_search(g: &LabelCoverInstance, t: usize, max_labelings: u64) -> Result<(SatCount, TLabeling)> {
    if t == 0 {
        return Err(invalid_param!("t must be at least 1"));
    }
    let subsets = label_subsets(g.r, t.min(g.r));
    let n = subsets.len();
    let space = (n as u64).checked_pow(g.vertices as u32).unwrap_or(u64::MAX);
    if space > max_labelings {
        return Err(Error::SizeLimit(format!("{space} labelings exceed the budget of {max_labelings}")));
    }
    let ok = pair_tables(&g.tables(), g.r, &masks(&subsets));
    let mut by_last: Vec<Vec<usize>> = vec![Vec::new(); g.vertices];
    for (c, e) in g.edges.iter().enumerate() {
        by_last[e.v].push(c);
    }
    let total = g.edges.len();
    // Edges whose later endpoint is at least v: an upper bound on what is still winnable.
    let mut open_from = vec![0usize; g.vertices + 1];
    for v in (0..g.vertices).rev() {
        open_from[v] = open_from[v + 1] + by_last[v].len();
    }
    let mut choice = vec![0usize; g.vertices];
    let mut best = (0usize, choice.clone());
    let mut found = false;

    #[allow(clippy::too_many_arguments)]
    fn rec(
        v: usize,
        sat: usize,
        choice: &mut Vec<usize>,
        best: &mut (usize, Vec<usize>),
        found: &mut bool,
        g: &LabelCoverInstance,
        ok: &[Vec<bool>],
        by_last: &[Vec<usize>],
        open_from: &[usize],
        n: usize,
    ) {
        if *found && sat + open_from[v] <= best.0 {
            return;
        }
        if v == choice.len() {
            *best = (sat, choice.clone());
            *found = true;
            return;
        }
        for i in 0..n {
            choice[v] = i;
            let gained = by_last[v].iter().filter(|&&c| ok[c][choice[g.edges[c].u] * n + choice[g.edges[c].v]]).count();
            rec(v + 1, sat + gained, choice, best, found, g, ok, by_last, open_from, n);
            if best.0 == g.edges.len() && *found {
                return;
            }
        }
    }

    if g.vertices > 0 {
        rec(0, 0, &mut choice, &mut best, &mut found, g, &ok, &by_last, &open_from, n);
    }
    let mut labeling = TLabeling::new(t);
    for (v, &i) in best.1.iter().enumerate() {
        labeling.sets.insert(v, subsets[i].iter().copied().collect());
    }
    Ok((SatCount { satisfied: best.0, total }, labeling))
}

/// Constraint families available to the planted generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlantedFamily {
    OneToOne,
    TwoToTwo,
    Alpha,
}

impl std::str::FromStr for PlantedFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one-to-one" => Ok(Self::OneToOne),
            "two-to-two" => Ok(Self::TwoToTwo),
            "alpha" => Ok(Self::Alpha),
            _ => Err(invalid_param!("unknown planted family {s:?}")),
        }
    }
}

/// A uniform permutation of `{1..r}` with `perm(at) = value`.
fn perm_with(rng: &mut ChaCha8Rng, r: usize, at: usize, value: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (1..=r).collect();
    perm.shuffle(rng);
    let pos = perm.iter().position(|&p| p == value).expect("value in range");
    perm.swap(pos, at - 1);
    perm
}

/// Random instance with a hidden labeling that satisfies every edge.
///
/// Edges join distinct uniform endpoints (a self-loop only when there is a single vertex). Each
/// constraint is uniform among those of the family that the hidden labels satisfy: a base pair
/// `(i, j)` of the relation is drawn uniformly, then permutations sending `i` and `j` to the hidden labels.
pub fn gen_planted(
    family: PlantedFamily,
    nvertices: usize,
    nedges: usize,
    r: usize,
    seed: u64,
) -> Result<(LabelCoverInstance, Vec<usize>)> {
    if nvertices == 0 || r == 0 {
        return Err(invalid_param!("need at least one vertex and one label"));
    }
    if family != PlantedFamily::OneToOne && r % 2 != 0 {
        return Err(invalid_param!("{family:?} needs an even label range, got {r}"));
    }
    if nedges > MAX_CONSTRAINTS {
        return Err(Error::SizeLimit(format!("{nedges} edges exceed {MAX_CONSTRAINTS}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hidden: Vec<usize> = (0..nvertices).map(|_| rng.random_range(1..=r)).collect();
    let mut edges = Vec::with_capacity(nedges);
    for _ in 0..nedges {
        let u = rng.random_range(0..nvertices);
        let v = if nvertices == 1 {
            u
        } else {
            let w = rng.random_range(0..nvertices - 1);
            if w >= u {
                w + 1
            } else {
                w
            }
        };
        let (lu, lv) = (hidden[u], hidden[v]);
        let constraint = match family {
            PlantedFamily::OneToOne => Constraint::OneToOne { perm: perm_with(&mut rng, r, lu, lv) },
            PlantedFamily::TwoToTwo | PlantedFamily::Alpha => {
                let block = rng.random_range(1..=r / 2);
                let base: &[(usize, usize)] = if family == PlantedFamily::Alpha { &[(1, 1), (0, 1), (1, 0)] } else { &[(1, 1), (1, 0), (0, 1), (0, 0)] };
                let (di, dj) = base[rng.random_range(0..base.len())];
                let (i, j) = (2 * block - di, 2 * block - dj);
                let perm1 = perm_with(&mut rng, r, i, lu);
                let perm2 = perm_with(&mut rng, r, j, lv);
                if family == PlantedFamily::Alpha {
                    Constraint::Alpha { perm1, perm2 }
                } else {
                    Constraint::TwoToTwo { perm1, perm2 }
                }
            }
        };
        edges.push(LcEdge { u, v, constraint });
    }
    let g = LabelCoverInstance::new(nvertices, r, edges)?;
    Ok((g, hidden))
}

// ---------------------------------------------------------------------------------------------
// Bipartite d-to-1 instances.

/// One constraint `psi_xy` with its weight (1 for unweighted instances).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartiteEdge {
    pub x: usize,
    pub y: usize,
    pub relation: Relation,
    #[serde(with = "rational::as_string")]
    pub weight: Rational,
}

#[derive(Deserialize)]
struct BipartiteRepr {
    #[serde(rename = "X")]
    x: usize,
    #[serde(rename = "Y")]
    y: usize,
    #[serde(rename = "R")]
    r: usize,
    d: usize,
    weighted: bool,
    edges: Vec<BipartiteEdge>,
}

/// A bipartite d-to-1 label-cover instance `(X, Y, Psi, W)` or `(X, Y, Psi, E)`.
///
/// Left labels are `{1..R}`, right labels `{1..R/d}`. A weighted instance holds at most one edge per
/// pair `(x, y)`; an unweighted one is a multiset of edges of weight 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BipartiteRepr")]
pub struct BipartiteLc {
    #[serde(rename = "X")]
    nx: usize,
    #[serde(rename = "Y")]
    ny: usize,
    #[serde(rename = "R")]
    r: usize,
    d: usize,
    weighted: bool,
    edges: Vec<BipartiteEdge>,
}

impl TryFrom<BipartiteRepr> for BipartiteLc {
    type Error = Error;

    fn try_from(b: BipartiteRepr) -> Result<Self> {
        if b.weighted {
            Self::weighted(b.x, b.y, b.r, b.d, b.edges)
        } else {
            Self::unweighted(b.x, b.y, b.r, b.d, b.edges.into_iter().map(|e| (e.x, e.y, e.relation)).collect())
        }
    }
}

/// A labeling of a bipartite instance: `x_labels[x] in 1..=R`, `y_labels[y] in 1..=R/d`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartiteLabeling {
    pub x_labels: Vec<usize>,
    pub y_labels: Vec<usize>,
}

impl BipartiteLc {
    fn check_common(nx: usize, ny: usize, r: usize, d: usize) -> Result<()> {
        if d == 0 || r == 0 || r % d != 0 {
            return Err(Error::InvalidInstance(format!("need d >= 1 dividing R (R = {r}, d = {d})")));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidInstance("both sides need at least one vertex".into()));
        }
        Ok(())
    }

    fn check_edge(&self, e: &BipartiteEdge) -> Result<()> {
        if e.x >= self.nx || e.y >= self.ny {
            return Err(Error::InvalidInstance(format!("edge ({}, {}) outside {} x {}", e.x, e.y, self.nx, self.ny)));
        }
        if !e.relation.is_d_to_one(self.r, self.d) {
            return Err(Error::InvalidInstance(format!("relation on ({}, {}) is not {}-to-1", e.x, e.y, self.d)));
        }
        Ok(())
    }

    pub fn weighted(nx: usize, ny: usize, r: usize, d: usize, edges: Vec<BipartiteEdge>) -> Result<Self> {
        Self::check_common(nx, ny, r, d)?;
        let lc = Self { nx, ny, r, d, weighted: true, edges };
        let mut seen = BTreeSet::new();
        for e in &lc.edges {
            lc.check_edge(e)?;
            if e.weight < Rational::zero() {
                return Err(Error::InvalidInstance(format!("negative weight on ({}, {})", e.x, e.y)));
            }
            if !seen.insert((e.x, e.y)) {
                return Err(Error::InvalidInstance(format!("pair ({}, {}) listed twice in a weighted instance", e.x, e.y)));
            }
        }
        Ok(lc)
    }

    pub fn unweighted(nx: usize, ny: usize, r: usize, d: usize, edges: Vec<(usize, usize, Relation)>) -> Result<Self> {
        Self::check_common(nx, ny, r, d)?;
        if edges.len() > MAX_CONSTRAINTS {
            return Err(Error::SizeLimit(format!("{} constraints exceed {MAX_CONSTRAINTS}", edges.len())));
        }
        let edges = edges.into_iter().map(|(x, y, relation)| BipartiteEdge { x, y, relation, weight: Rational::one() }).collect();
        let lc = Self { nx, ny, r, d, weighted: false, edges };
        for e in &lc.edges {
            lc.check_edge(e)?;
        }
        Ok(lc)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn label_range(&self) -> usize {
        self.r
    }

    pub fn right_range(&self) -> usize {
        self.r / self.d
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn is_weighted(&self) -> bool {
        self.weighted
    }

    pub fn edges(&self) -> &[BipartiteEdge] {
        &self.edges
    }

    /// `w(Phi)`.
    pub fn total_weight(&self) -> Rational {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// `w(Phi, x)` for every `x`.
    pub fn x_weights(&self) -> Vec<Rational> {
        let mut w = vec![Rational::zero(); self.nx];
        for e in &self.edges {
            w[e.x] += e.weight;
        }
        w
    }

    /// Number of edges at each `x` (with multiplicity).
    pub fn left_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nx];
        for e in &self.edges {
            deg[e.x] += 1;
        }
        deg
    }

    /// The common left degree, if all are equal.
    pub fn left_regular_degree(&self) -> Option<usize> {
        let deg = self.left_degrees();
        deg.iter().all(|&d| d == deg[0]).then_some(deg[0])
    }

    pub fn check_labeling(&self, l: &BipartiteLabeling) -> Result<()> {
        let ok = l.x_labels.len() == self.nx
            && l.y_labels.len() == self.ny
            && l.x_labels.iter().all(|a| (1..=self.r).contains(a))
            && l.y_labels.iter().all(|b| (1..=self.right_range()).contains(b));
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidLabeling("labeling does not fit the instance".into()))
        }
    }

    /// `w_L(Phi, x)` for every `x`.
    pub fn satisfied_x_weights(&self, l: &BipartiteLabeling) -> Vec<Rational> {
        let mut w = vec![Rational::zero(); self.nx];
        for e in &self.edges {
            if e.relation.contains(l.x_labels[e.x], l.y_labels[e.y]) {
                w[e.x] += e.weight;
            }
        }
        w
    }

    /// `w_L(Phi)`.
    pub fn satisfied_weight(&self, l: &BipartiteLabeling) -> Rational {
        self.satisfied_x_weights(l).into_iter().sum()
    }

    /// Fraction of incident constraints satisfied at each `x` (0 for isolated `x`).
    pub fn satisfied_x_fractions(&self, l: &BipartiteLabeling) -> Vec<Rational> {
        let w = self.satisfied_x_weights(l);
        let tot = self.x_weights();
        w.into_iter().zip(tot).map(|(s, t)| if t.is_zero() { Rational::zero() } else { s / t }).collect()
    }

    /// For fixed right labels, the best left label of every `x` and the weight it reaches.
    pub fn best_left_response(&self, y_labels: &[usize]) -> (Vec<usize>, Vec<Rational>) {
        let mut gain = vec![vec![Rational::zero(); self.r + 1]; self.nx];
        for e in &self.edges {
            let b = y_labels[e.y];
            for &(a, bb) in e.relation.pairs() {
                if bb == b {
                    gain[e.x][a] += e.weight;
                }
            }
        }
        let mut labels = Vec::with_capacity(self.nx);
        let mut weights = Vec::with_capacity(self.nx);
        for row in gain {
            let mut best = 1;
            for a in 2..=self.r {
                if row[a] > row[best] {
                    best = a;
                }
            }
            labels.push(best);
            weights.push(row[best]);
        }
        (labels, weights)
    }

    /// Visits every right labeling in lexicographic order.
    pub fn for_each_right_labeling(&self, mut visit: impl FnMut(&[usize])) -> Result<()> {
        let k = self.right_range();
        let space = (k as u64).checked_pow(self.ny as u32).unwrap_or(u64::MAX);
        if space > MAX_ENUMERATION {
            return Err(Error::SizeLimit(format!("{space} right labelings exceed {MAX_ENUMERATION}")));
        }
        let mut y = vec![1usize; self.ny];
        loop {
            visit(&y);
            let mut i = self.ny;
            loop {
                if i == 0 {
                    return Ok(());
                }
                i -= 1;
                if y[i] < k {
                    y[i] += 1;
                    break;
                }
                y[i] = 1;
            }
        }
    }

    /// Exact `max_L w_L(Phi)` and a maximizing labeling (right labels enumerated, left labels best-responding).
    pub fn best_labeling(&self) -> Result<(Rational, BipartiteLabeling)> {
        let mut best: Option<(Rational, BipartiteLabeling)> = None;
        self.for_each_right_labeling(|y| {
            let (xl, w) = self.best_left_response(y);
            let total: Rational = w.into_iter().sum();
            if best.as_ref().is_none_or(|(b, _)| total > *b) {
                best = Some((total, BipartiteLabeling { x_labels: xl, y_labels: y.to_vec() }));
            }
        })?;
        Ok(best.expect("at least one right labeling"))
    }
}

/// Outcome of the weight-normalizing transformation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizeReport {
    /// `k(x) = floor(ell |X| w(Phi, x))` for every original `x`.
    pub copies: Vec<usize>,
    /// Original `x` with `k(x) = 0`.
    pub skipped: Vec<usize>,
    /// `origin[x']`: the original vertex of each copy.
    pub origin: Vec<usize>,
}

/// Replaces each `x` by `k(x) = floor(ell |X| w(Phi, x))` copies with weights `w_xy / w(Phi, x)`.
pub fn transform_normalize(phi: &BipartiteLc, ell: usize) -> Result<(BipartiteLc, NormalizeReport)> {
    if !phi.weighted {
        return Err(invalid_param!("normalize needs a weighted instance"));
    }
    if ell < 2 {
        return Err(invalid_param!("normalize needs ell >= 2, got {ell}"));
    }
    if phi.total_weight() != Rational::one() {
        return Err(invalid_param!("normalize needs total weight 1, got {}", rational::format(phi.total_weight())));
    }
    let wx = phi.x_weights();
    let scale = Rational::from_integer((ell * phi.nx) as i64);
    let copies: Vec<usize> = wx.iter().map(|&w| (scale * w).floor().to_integer() as usize).collect();
    let skipped: Vec<usize> = (0..phi.nx).filter(|&x| copies[x] == 0).collect();
    let mut origin = Vec::new();
    let mut edges = Vec::new();
    for x in 0..phi.nx {
        for _ in 0..copies[x] {
            let nx = origin.len();
            origin.push(x);
            for e in phi.edges.iter().filter(|e| e.x == x) {
                edges.push(BipartiteEdge { x: nx, y: e.y, relation: e.relation.clone(), weight: e.weight / wx[x] });
            }
        }
    }
    if edges.len() > MAX_CONSTRAINTS {
        return Err(Error::SizeLimit(format!("{} constraints exceed {MAX_CONSTRAINTS}", edges.len())));
    }
    if origin.is_empty() {
        return Err(Error::InvalidInstance("every vertex received zero copies".into()));
    }
    let out = BipartiteLc::weighted(origin.len(), phi.ny, phi.r, phi.d, edges)?;
    Ok((out, NormalizeReport { copies, skipped, origin }))
}

/// Left-regular multigraph of degree `alpha = ell |Y|`: `floor(alpha w_xy)` parallel edges to each
/// `y != y0(x)` and the remainder to `y0(x)`, the smallest `y` with `w_xy > 0`.
pub fn transform_unweight(phi: &BipartiteLc, ell: usize) -> Result<BipartiteLc> {
    if !phi.weighted {
        return Err(invalid_param!("unweight needs a weighted instance"));
    }
    if ell == 0 {
        return Err(invalid_param!("ell must be positive"));
    }
    if let Some(x) = phi.x_weights().iter().position(|w| *w != Rational::one()) {
        return Err(invalid_param!("unweight needs w(Phi, x) = 1 for every x; x = {x} differs"));
    }
    let alpha = ell * phi.ny;
    if alpha * phi.nx > MAX_CONSTRAINTS {
        return Err(Error::SizeLimit(format!("{} constraints exceed {MAX_CONSTRAINTS}", alpha * phi.nx)));
    }
    let mut edges = Vec::with_capacity(alpha * phi.nx);
    for x in 0..phi.nx {
        let mut row: Vec<&BipartiteEdge> = phi.edges.iter().filter(|e| e.x == x).collect();
        row.sort_by_key(|e| e.y);
        let y0 = row
            .iter()
            .find(|e| e.weight > Rational::zero())
            .ok_or_else(|| Error::InvalidInstance(format!("x = {x} has no positive-weight neighbor")))?;
        let mut used = 0;
        let mut counts = Vec::with_capacity(row.len());
        for e in &row {
            let c = if e.y == y0.y { 0 } else { (Rational::from_integer(alpha as i64) * e.weight).floor().to_integer() as usize };
            used += c;
            counts.push(c);
        }
        for (e, c) in row.iter().zip(counts) {
            let c = if e.y == y0.y { alpha - used } else { c };
            edges.extend(std::iter::repeat_n((x, e.y, e.relation.clone()), c));
        }
    }
    BipartiteLc::unweighted(phi.nx, phi.ny, phi.r, phi.d, edges)
}

/// Each `x` with neighbors `(y_1..y_alpha)` (edge order, with multiplicity) spawns one vertex per
/// sequence `(i_1..i_ell)` in `{1..alpha}^ell`, joined to `y_{i_1}..y_{i_ell}` with `x`'s constraints.
///
/// Returns the instance and `origin[x']`.
pub fn transform_power(phi: &BipartiteLc, ell: usize) -> Result<(BipartiteLc, Vec<usize>)> {
    if phi.weighted {
        return Err(invalid_param!("power needs an unweighted instance"));
    }
    if ell == 0 {
        return Err(invalid_param!("ell must be positive"));
    }
    let alpha = phi.left_regular_degree().ok_or_else(|| invalid_param!("power needs a left-regular instance"))?;
    let per_x = (alpha as u64).checked_pow(ell as u32).unwrap_or(u64::MAX);
    let total = per_x.saturating_mul(phi.nx as u64).saturating_mul(ell as u64);
    if total > MAX_CONSTRAINTS as u64 {
        return Err(Error::SizeLimit(format!("{total} constraints exceed {MAX_CONSTRAINTS}")));
    }
    let mut edges = Vec::with_capacity(total as usize);
    let mut origin = Vec::with_capacity(per_x as usize * phi.nx);
    for x in 0..phi.nx {
        let nbrs: Vec<&BipartiteEdge> = phi.edges.iter().filter(|e| e.x == x).collect();
        let mut seq = vec![0usize; ell];
        for _ in 0..per_x {
            let nx = origin.len();
            origin.push(x);
            for &i in &seq {
                edges.push((nx, nbrs[i].y, nbrs[i].relation.clone()));
            }
            for slot in seq.iter_mut().rev() {
                *slot += 1;
                if *slot < alpha {
                    break;
                }
                *slot = 0;
            }
        }
    }
    let out = BipartiteLc::unweighted(origin.len(), phi.ny, phi.r, phi.d, edges)?;
    Ok((out, origin))
}

/// One constraint `(x_1, x_2)` per unordered pair of distinct edges sharing a right vertex, with
/// `psi' = {(a_1, a_2) : exists b, (a_1, b) in psi_{x_1 y}, (a_2, b) in psi_{x_2 y}}`. Parallel edges at
/// the same `x` give self-loops.
pub fn transform_collapse(phi: &BipartiteLc) -> Result<LabelCoverInstance> {
    if phi.weighted {
        return Err(invalid_param!("collapse needs an unweighted instance"));
    }
    let mut at_y: Vec<Vec<&BipartiteEdge>> = vec![Vec::new(); phi.ny];
    for e in &phi.edges {
        at_y[e.y].push(e);
    }
    let count: usize = at_y.iter().map(|v| v.len() * v.len().saturating_sub(1) / 2).sum();
    if count > MAX_CONSTRAINTS {
        return Err(Error::SizeLimit(format!("{count} constraints exceed {MAX_CONSTRAINTS}")));
    }
    let mut edges = Vec::with_capacity(count);
    for list in &at_y {
        for (i, e1) in list.iter().enumerate() {
            for e2 in &list[i + 1..] {
                let relation = Relation::new(
                    e1.relation
                        .pairs()
                        .iter()
                        .flat_map(|&(a1, b)| e2.relation.pairs().iter().filter(move |&&(_, b2)| b2 == b).map(move |&(a2, _)| (a1, a2))),
                );
                edges.push(LcEdge { u: e1.x, v: e2.x, constraint: Constraint::Explicit { relation } });
            }
        }
    }
    LabelCoverInstance::new(phi.nx, phi.r, edges)
}

/// Random d-to-1 relation: a uniform projection `{1..R} -> {1..R/d}` with every fiber of size `d`.
pub fn random_projection<R: Rng>(rng: &mut R, r: usize, d: usize) -> Relation {
    let mut targets: Vec<usize> = (0..r).map(|i| i / d + 1).collect();
    targets.shuffle(rng);
    Relation::new(targets.into_iter().enumerate().map(|(a, b)| (a + 1, b)))
}

// ---------------------------------------------------------------------------------------------
// Set families.

/// `d` (largest set size) and `gamma` (largest fraction of sets containing one element).
pub fn family_stats(family: &[BTreeSet<usize>]) -> (usize, Rational) {
    let d = family.iter().map(|s| s.len()).max().unwrap_or(0);
    if family.is_empty() {
        return (d, Rational::zero());
    }
    let (_, count) = popular_element(family).unwrap_or((0, 0));
    (d, rational::ratio(count as i64, family.len() as i64))
}

/// Exact probability that `ell` sets drawn uniformly with repetition are pairwise disjoint.
pub fn disjoint_family_prob(family: &[BTreeSet<usize>], ell: usize) -> Result<Rational> {
    if ell == 0 {
        return Err(invalid_param!("ell must be positive"));
    }
    if family.is_empty() {
        return Err(invalid_param!("family must be nonempty"));
    }
    let n = family.len();
    let space = (n as u64).checked_pow(ell as u32).unwrap_or(u64::MAX);
    if space > MAX_ENUMERATION {
        return Err(Error::SizeLimit(format!("{space} sequences exceed {MAX_ENUMERATION}")));
    }
    let disjoint: Vec<bool> = (0..n * n).map(|i| family[i / n].is_disjoint(&family[i % n])).collect();
    fn rec(depth: usize, ell: usize, n: usize, chosen: &mut Vec<usize>, disjoint: &[bool]) -> u64 {
        if depth == ell {
            return 1;
        }
        let mut total = 0;
        for j in 0..n {
            if chosen.iter().all(|&i| disjoint[i * n + j]) {
                chosen.push(j);
                total += rec(depth + 1, ell, n, chosen, disjoint);
                chosen.pop();
            }
        }
        total
    }
    let good = rec(0, ell, n, &mut Vec::new(), &disjoint);
    Ok(Rational::new(good as i64, space as i64))
}

pub fn is_pairwise_intersecting(family: &[BTreeSet<usize>]) -> bool {
    family.iter().enumerate().all(|(i, a)| family[i + 1..].iter().all(|b| !a.is_disjoint(b)))
}

/// The element contained in the most sets (smallest on ties), with its count.
pub fn popular_element(family: &[BTreeSet<usize>]) -> Option<(usize, usize)> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for s in family {
        for &e in s {
            *counts.entry(e).or_default() += 1;
        }
    }
    counts.into_iter().fold(None, |best, (e, c)| match best {
        Some((_, bc)) if bc >= c => best,
        _ => Some((e, c)),
    })
}
