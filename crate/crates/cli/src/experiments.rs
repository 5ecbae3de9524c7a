//! Experiment drivers: completeness, soundness probes and stability scans, each emitting a CSV report.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::Instant;

use hcs_core::gaussian::mo_bound_report;
use hcs_core::labelcover::{gen_planted, PlantedFamily};
use hcs_core::operators::{beckner, gadget_operator};
use hcs_core::oracles::max_independent_set;
use hcs_core::qcube::{named_function, NamedKind};
use hcs_core::reduction::{decode_tlabeling, intended_coloring, reduce, verify_coloring, DecodeParams};
use hcs_core::{Error, GadgetKind, LabelCoverInstance, MarkovOp, QFunction, ReductionKind, Result, SearchBudget};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Function families for stability scans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// `f = mu`, `g = nu` for every pair of masses.
    Constants,
    /// `f = g = 1{x_1 = 0}`.
    Dictators,
    /// `f = g = c + s (1/n) sum_i (1{x_i = 0} - 1/q)`, every influence below `s^2 (q-1) / (q n)^2`.
    Mixture,
    /// `f = g = 1{plurality(x) = 0}`.
    Plurality,
}

/// Operators for stability scans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanOperator {
    /// The almost-3-coloring gadget on `[3]^n`.
    Almost3,
    /// The alpha gadget acting on bunched pairs of `[3]^{2n}`.
    Alpha,
    /// `T_rho` on `[3]^n` for every `rho` in the grid.
    Beckner,
}

/// Which vertex set a soundness probe decodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SetChoice {
    /// Color class 0 of the intended coloring.
    Class,
    /// The witness returned by the independent-set oracle.
    Mis,
    Empty,
    /// Every vertex kept with probability 1/2.
    Random,
}

/// Parameters of one experiment run.
///
/// `r` counts labels for almost3 (`{1..r}`) and label pairs for col4 and col3 (`{1..2r}`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub seed: Option<u64>,
    pub kind: ReductionKind,
    pub r: usize,
    pub vertices: usize,
    /// Constraints per planted instance; defaults to the vertex count.
    pub edges: Option<usize>,
    pub instances: usize,
    pub k: usize,
    pub delta: f64,
    pub epsilon: f64,
    pub rho: Vec<f64>,
    pub masses: Vec<f64>,
    pub n: Vec<usize>,
    pub families: Vec<Family>,
    pub operators: Vec<ScanOperator>,
    pub sets: Vec<SetChoice>,
    pub budget: SearchBudget,
    /// Adds a wall-time column; such reports are no longer reproducible byte for byte.
    pub timing: bool,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        let d = DecodeParams::default();
        Self {
            name: "experiment".into(),
            seed: None,
            kind: ReductionKind::Almost3,
            r: 1,
            vertices: 2,
            edges: None,
            instances: 1,
            k: d.k,
            delta: d.delta,
            epsilon: d.epsilon,
            rho: vec![0.0, 0.5, 0.9],
            masses: vec![0.25, 0.5, 0.75],
            n: vec![1, 2, 3],
            families: vec![Family::Constants, Family::Dictators, Family::Mixture],
            operators: vec![ScanOperator::Almost3, ScanOperator::Alpha, ScanOperator::Beckner],
            sets: vec![SetChoice::Class, SetChoice::Mis, SetChoice::Empty],
            budget: SearchBudget::default(),
            timing: false,
            out: None,
        }
    }
}

impl ExperimentSpec {
    fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::InvalidParameter("a seed is required for this experiment".into()))
    }

    fn label_range(&self) -> usize {
        match self.kind {
            ReductionKind::Almost3 => self.r,
            _ => 2 * self.r,
        }
    }

    fn planted_family(&self) -> PlantedFamily {
        match self.kind {
            ReductionKind::Almost3 => PlantedFamily::OneToOne,
            ReductionKind::Col4 => PlantedFamily::TwoToTwo,
            ReductionKind::Col3 => PlantedFamily::Alpha,
        }
    }

    fn check_instances(&self) -> Result<()> {
        if self.r == 0 || self.vertices == 0 || self.instances == 0 {
            return Err(Error::InvalidParameter("r, vertices and instances must be positive".into()));
        }
        Ok(())
    }

    fn decode_params(&self) -> DecodeParams {
        DecodeParams { k: self.k, delta: self.delta, epsilon: self.epsilon }
    }

    /// Planted instances with their hidden labelings and per-instance seeds.
    fn planted(&self) -> Result<Vec<(u64, LabelCoverInstance, Vec<usize>)>> {
        self.check_instances()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed()?);
        let edges = self.edges.unwrap_or(self.vertices);
        (0..self.instances)
            .map(|_| {
                let s = rng.next_u64();
                let (g, hidden) = gen_planted(self.planted_family(), self.vertices, edges, self.label_range(), s)?;
                Ok((s, g, hidden))
            })
            .collect()
    }
}

/// A finished experiment: metadata plus CSV rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub experiment: &'static str,
    pub spec: ExperimentSpec,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    /// Rows breaking an invariant the experiment is meant to confirm.
    pub failures: usize,
}

/// `git describe` of the build, or `unknown`.
pub const BUILD_DESCRIBE: &str = env!("HCS_GIT_DESCRIBE");

impl Report {
    /// The `#`-prefixed JSON metadata line.
    pub fn metadata(&self) -> String {
        let meta = serde_json::json!({
            "experiment": self.experiment,
            "spec": self.spec,
            "build": BUILD_DESCRIBE,
            "version": env!("CARGO_PKG_VERSION"),
        });
        format!("# {meta}")
    }

    /// Column header and rows.
    pub fn body(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    /// Metadata line, a timestamp line (when given), then the body.
    pub fn render(&self, unix_seconds: Option<u64>) -> String {
        let mut out = self.metadata();
        out.push('\n');
        if let Some(t) = unix_seconds {
            out.push_str(&format!("# generated-unix-seconds: {t}\n"));
        }
        out.push_str(&self.body());
        out
    }
}

/// Drops `#` lines, leaving the comparable CSV body.
pub fn csv_body(text: &str) -> String {
    text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect()
}

fn fmt(x: f64) -> String {
    format!("{x:.12}")
}

/// Intended colorings of planted instances, one row each.
pub fn run_completeness(spec: &ExperimentSpec) -> Result<Report> {
    let mut columns = vec![
        "instance",
        "seed",
        "kind",
        "vertices",
        "r",
        "label_range",
        "constraints",
        "palette",
        "graph_vertices",
        "graph_edges",
        "monochromatic",
        "uncolored",
    ];
    if spec.timing {
        columns.push("wall_ms");
    }
    let mut rows = Vec::new();
    let mut failures = 0;
    for (i, (s, g, hidden)) in spec.planted()?.into_iter().enumerate() {
        let start = Instant::now();
        let bg = reduce(spec.kind, &g)?;
        let labels: Vec<Option<usize>> = hidden.iter().map(|&a| Some(a)).collect();
        let coloring = intended_coloring(&bg, &labels)?;
        let rep = verify_coloring(&bg, &coloring)?;
        if rep.monochromatic != 0 || rep.uncolored != 0 {
            failures += 1;
        }
        let mut row = vec![
            i.to_string(),
            s.to_string(),
            spec.kind.to_string(),
            g.vertices().to_string(),
            spec.r.to_string(),
            g.label_range().to_string(),
            g.edges().len().to_string(),
            coloring.palette.to_string(),
            bg.num_vertices().to_string(),
            rep.edges.to_string(),
            rep.monochromatic.to_string(),
            rep.uncolored.to_string(),
        ];
        if spec.timing {
            row.push(format!("{:.3}", start.elapsed().as_secs_f64() * 1e3));
        }
        rows.push(row);
    }
    Ok(Report { experiment: "completeness", spec: spec.clone(), columns, rows, failures })
}

/// Independent sets of planted block graphs pushed through the decoder.
///
/// A non-independent set yields a row with status `invalid-input`; a graph beyond the oracle
/// budget aborts with a size-limit error.
pub fn run_soundness_probe(spec: &ExperimentSpec) -> Result<Report> {
    let columns = vec![
        "instance",
        "seed",
        "kind",
        "vertices",
        "r",
        "graph_vertices",
        "graph_edges",
        "mis",
        "set",
        "set_size",
        "j",
        "t",
        "lists",
        "max_list",
        "satisfied_fraction",
        "planted_in_lists",
        "status",
    ];
    let params = spec.decode_params();
    let mut rows = Vec::new();
    let mut failures = 0;
    for (i, (s, g, hidden)) in spec.planted()?.into_iter().enumerate() {
        let bg = reduce(spec.kind, &g)?;
        if bg.num_vertices() > spec.budget.max_vertices {
            return Err(Error::SizeLimit(format!(
                "{} vertices exceed the oracle budget of {}",
                bg.num_vertices(),
                spec.budget.max_vertices
            )));
        }
        let graph = bg.to_graph()?;
        let (mis, witness) = max_independent_set(&graph, &spec.budget)?;
        let labels: Vec<Option<usize>> = hidden.iter().map(|&a| Some(a)).collect();
        let mut set_rng = ChaCha8Rng::seed_from_u64(s);
        for &choice in &spec.sets {
            let set: Vec<usize> = match choice {
                SetChoice::Class => intended_coloring(&bg, &labels)?.class(0),
                SetChoice::Mis => witness.clone(),
                SetChoice::Empty => Vec::new(),
                SetChoice::Random => (0..bg.num_vertices()).filter(|_| set_rng.random_bool(0.5)).collect(),
            };
            let mut row = vec![
                i.to_string(),
                s.to_string(),
                spec.kind.to_string(),
                g.vertices().to_string(),
                spec.r.to_string(),
                bg.num_vertices().to_string(),
                graph.num_edges().to_string(),
                mis.to_string(),
                serde_json::to_value(choice).expect("plain enum").as_str().unwrap_or_default().to_string(),
                set.len().to_string(),
            ];
            match decode_tlabeling(&bg, &set, params) {
                Ok(res) => {
                    let lists: Vec<String> = res
                        .labeling
                        .sets
                        .iter()
                        .map(|(v, l)| format!("{v}:{}", l.iter().map(usize::to_string).collect::<Vec<_>>().join("|")))
                        .collect();
                    let planted = res.j.iter().all(|v| res.labeling.get(*v).is_some_and(|l| l.contains(&hidden[*v])));
                    if choice == SetChoice::Class && (!planted || res.satisfied_fraction() < 1.0) {
                        failures += 1;
                    }
                    row.extend([
                        res.j.len().to_string(),
                        res.t.to_string(),
                        lists.join(" "),
                        res.max_list_size().to_string(),
                        fmt(res.satisfied_fraction()),
                        planted.to_string(),
                        "ok".into(),
                    ]);
                }
                Err(Error::InvalidInput(_)) => {
                    row.extend(["0", "0", "", "0", "", "", "invalid-input"].map(String::from));
                }
                Err(e) => return Err(e),
            }
            rows.push(row);
        }
    }
    Ok(Report { experiment: "soundness", spec: spec.clone(), columns, rows, failures })
}

fn mixture(q: usize, n: usize, c: f64) -> Result<QFunction> {
    let qf = q as f64;
    let s = 0.4f64.min(c * qf).min((1.0 - c) * qf / (qf - 1.0));
    QFunction::from_fn(q, n, |x| {
        let avg = x.iter().map(|&a| f64::from(u8::from(a == 0)) - 1.0 / qf).sum::<f64>() / n as f64;
        (c + s * avg).clamp(0.0, 1.0)
    })
}

/// `(label, f, g)` for a family on `[q]^coords`.
fn family_pairs(family: Family, q: usize, coords: usize, masses: &[f64]) -> Result<Vec<(String, QFunction, QFunction)>> {
    Ok(match family {
        Family::Constants => {
            let mut out = Vec::new();
            for &mu in masses {
                for &nu in masses {
                    out.push((format!("{mu}/{nu}"), QFunction::constant(q, coords, mu)?, QFunction::constant(q, coords, nu)?));
                }
            }
            out
        }
        Family::Dictators => {
            let f = named_function(NamedKind::Dictator, q, coords, Some(1), Some(0))?;
            vec![("x1=0".into(), f.clone(), f)]
        }
        Family::Mixture => masses
            .iter()
            .map(|&c| mixture(q, coords, c).map(|f| (format!("{c}"), f.clone(), f)))
            .collect::<Result<_>>()?,
        Family::Plurality => {
            let p = named_function(NamedKind::Plurality, q, coords, None, None)?;
            let f = QFunction::new(q, coords, p.values().iter().map(|&v| f64::from(u8::from(v == 0.0))).collect())?;
            vec![("plurality=0".into(), f.clone(), f)]
        }
    })
}

fn check_grid(spec: &ExperimentSpec) -> Result<()> {
    if spec.k == 0 || !(spec.delta > 0.0) || !(spec.epsilon >= 0.0) {
        return Err(Error::InvalidParameter("need k >= 1, delta > 0, epsilon >= 0".into()));
    }
    if let Some(m) = spec.masses.iter().find(|m| !(0.0..=1.0).contains(*m)) {
        return Err(Error::InvalidParameter(format!("mass {m} outside [0, 1]")));
    }
    if let Some(r) = spec.rho.iter().find(|r| !(-1.0..=1.0).contains(*r)) {
        return Err(Error::InvalidParameter(format!("rho {r} outside [-1, 1]")));
    }
    if spec.n.iter().any(|&n| n == 0 || n > 6) {
        return Err(Error::InvalidParameter("scan dimensions must lie in 1..=6".into()));
    }
    Ok(())
}

/// Noisy inner products of function families against the Gaussian band.
pub fn run_stability_scan(spec: &ExperimentSpec) -> Result<Report> {
    check_grid(spec)?;
    let columns = vec![
        "family",
        "params",
        "operator",
        "op_rho",
        "n",
        "mu",
        "nu",
        "rho",
        "inner",
        "lower",
        "upper",
        "lambda_gap",
        "lower_gap",
        "margin",
        "violating",
        "verdict",
    ];
    let mut rows = Vec::new();
    for &op_kind in &spec.operators {
        let ops: Vec<(f64, MarkovOp)> = match op_kind {
            ScanOperator::Almost3 => vec![(f64::NAN, gadget_operator(GadgetKind::Almost3))],
            ScanOperator::Alpha => vec![(f64::NAN, gadget_operator(GadgetKind::Alpha))],
            ScanOperator::Beckner => spec.rho.iter().map(|&r| beckner(3, r).map(|op| (r, op))).collect::<Result<_>>()?,
        };
        let fish = op_kind == ScanOperator::Alpha;
        for (op_rho, op) in &ops {
            let op_rho = if op_rho.is_nan() { op.spectral_radius() } else { *op_rho };
            for &n in &spec.n {
                let coords = if fish { 2 * n } else { n };
                for &family in &spec.families {
                    for (label, f, g) in family_pairs(family, 3, coords, &spec.masses)? {
                        let rep = mo_bound_report(&f, &g, op, spec.k, spec.delta, spec.epsilon, fish)?;
                        let violating: Vec<String> = rep.violating_coords.iter().map(|v| format!("{}:{}", v.f_coord, v.g_coord)).collect();
                        rows.push(vec![
                            serde_json::to_value(family).expect("plain enum").as_str().unwrap_or_default().to_string(),
                            label,
                            serde_json::to_value(op_kind).expect("plain enum").as_str().unwrap_or_default().to_string(),
                            fmt(op_rho),
                            coords.to_string(),
                            fmt(rep.mu),
                            fmt(rep.nu),
                            fmt(rep.rho),
                            fmt(rep.inner),
                            fmt(rep.lower),
                            fmt(rep.upper),
                            fmt(rep.upper - rep.epsilon - rep.inner),
                            fmt(rep.inner - rep.lower - rep.epsilon),
                            fmt(rep.margin()),
                            violating.join(" "),
                            rep.verdict.as_str().to_string(),
                        ]);
                    }
                }
            }
        }
    }
    Ok(Report { experiment: "stability", spec: spec.clone(), columns, rows, failures: 0 })
}

/// Distinct values of one column.
pub fn column_values(report: &Report, column: &str) -> BTreeSet<String> {
    match report.columns.iter().position(|c| *c == column) {
        Some(idx) => report.rows.iter().map(|r| r[idx].clone()).collect(),
        None => BTreeSet::new(),
    }
}
