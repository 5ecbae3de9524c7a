use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use hcs_cli::experiments::{
    run_completeness, run_soundness_probe, run_stability_scan, ExperimentSpec, Family, Report, ScanOperator, SetChoice,
};
use hcs_cli::{exit_code, ExperimentFailure};
use hcs_core::gaussian::{chop_defect, lambda_asymptotic, lambda_closed, lower_gauss, mo_bound_report, real_analogue_inner_mc, BoundReport};
use hcs_core::labelcover::{
    eval_sat, gen_planted, isat_t, random_projection, transform_collapse, transform_normalize, transform_power,
    transform_unweight, BipartiteEdge, PlantedFamily,
};
use hcs_core::operators::{apply_tensor, beckner, gadget_operator, noisy_inner, pair_marginal_distribution};
use hcs_core::oracles::{best_labeling, chromatic_number, max_independent_set};
use hcs_core::qcube::{named_function, transform, NamedKind, OrthonormalBasis};
use hcs_core::reduction::{decode_tlabeling, read_dimacs, reduce, DecodeParams};
use hcs_core::{BipartiteLc, GadgetKind, LabelCoverInstance, MarkovOp, QFunction, ReductionKind, SearchBudget, TLabeling};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Fourier analysis, noise operators, label cover and coloring reductions on q-ary hypercubes.
#[derive(Parser)]
#[command(name = "hcs", version)]
struct Cli {
    /// Seed for every stochastic step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (standard output when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    budget_vertices: Option<usize>,
    #[arg(long, global = true)]
    budget_edges: Option<usize>,
    #[arg(long, global = true)]
    budget_seconds: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fourier coefficients and influences of a function.
    Fourier(FourierArgs),
    /// Spectrum and support of a Markov operator, optionally applied to a function.
    Op(OpArgs),
    /// Gaussian stability quantities.
    #[command(subcommand)]
    Gaussian(GaussianCmd),
    /// Label-cover instances.
    #[command(subcommand)]
    Lc(LcCmd),
    /// Builds the block graph of a label-cover instance as DIMACS.
    Reduce {
        #[arg(long)]
        kind: ReductionKind,
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Decodes an independent set of a block graph into a t-labeling.
    Decode {
        #[arg(long)]
        kind: ReductionKind,
        #[arg(long = "in")]
        input: PathBuf,
        /// JSON array of vertex ids.
        #[arg(long)]
        set: PathBuf,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
    },
    /// Exact oracles.
    #[command(subcommand)]
    Oracle(OracleCmd),
    /// Reproducible experiment pipelines emitting CSV.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct FourierArgs {
    /// Function file `{"q", "n", "values"}`.
    #[arg(long = "in", conflicts_with = "named")]
    input: Option<PathBuf>,
    #[arg(long)]
    named: Option<NamedKind>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Coordinate (dictator) or count (threshold-indicator).
    #[arg(long)]
    i: Option<usize>,
    /// Symbol for dictator and threshold-indicator.
    #[arg(long)]
    a: Option<usize>,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Use a seeded random orthonormal basis instead of the standard one.
    #[arg(long)]
    random_basis: bool,
}

#[derive(Args)]
struct OpSource {
    #[arg(long, conflicts_with_all = ["beckner", "op"])]
    gadget: Option<GadgetKind>,
    /// Alphabet size of a Beckner operator (with `--rho`).
    #[arg(long, requires = "rho", conflicts_with = "op")]
    beckner: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    rho: Option<f64>,
    /// Operator file `{"m", "matrix"}`.
    #[arg(long)]
    op: Option<PathBuf>,
}

impl OpSource {
    fn load(&self) -> anyhow::Result<Option<MarkovOp>> {
        Ok(match (&self.gadget, &self.beckner, &self.op) {
            (Some(kind), _, _) => Some(gadget_operator(*kind)),
            (_, Some(q), _) => Some(beckner(*q, self.rho.unwrap_or_default())?),
            (_, _, Some(path)) => Some(read_json(path)?),
            _ => None,
        })
    }

    fn require(&self) -> anyhow::Result<MarkovOp> {
        self.load()?.ok_or_else(|| hcs_core::Error::InvalidParameter("give --gadget, --beckner with --rho, or --op".into()).into())
    }
}

#[derive(Args)]
struct OpArgs {
    #[command(flatten)]
    source: OpSource,
    /// Function to which the tensor power is applied.
    #[arg(long)]
    apply: Option<PathBuf>,
}

#[derive(Subcommand)]
enum GaussianCmd {
    /// `Lambda(rho, mu, nu)`, the lower band edge and the small-mass asymptotic.
    Lambda {
        #[arg(long, allow_hyphen_values = true)]
        rho: f64,
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        nu: f64,
    },
    /// Monte Carlo estimate of the real-analogue inner product next to the exact value.
    Mc {
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        g: PathBuf,
        #[command(flatten)]
        source: OpSource,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Checks a noisy inner product against the Gaussian band (one CSV row).
    Bound {
        #[arg(long)]
        f: PathBuf,
        #[arg(long)]
        g: PathBuf,
        #[command(flatten)]
        source: OpSource,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        /// Bunch coordinate pairs and check the three cross pairs.
        #[arg(long)]
        fish: bool,
    },
    /// Distance of the real analogue from `[0, 1]`.
    Chop {
        #[arg(long)]
        f: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
}

#[derive(Subcommand)]
enum LcCmd {
    /// Planted instance (or a random bipartite projection instance with `--bipartite`).
    Gen {
        #[arg(long, default_value = "one-to-one")]
        family: PlantedFamily,
        #[arg(long, default_value_t = 3)]
        vertices: usize,
        #[arg(long, default_value_t = 3)]
        edges: usize,
        /// Label range.
        #[arg(long, default_value_t = 2)]
        r: usize,
        /// Writes the hidden labeling here.
        #[arg(long)]
        labels_out: Option<PathBuf>,
        #[arg(long)]
        bipartite: bool,
        #[arg(long, default_value_t = 2)]
        x: usize,
        #[arg(long, default_value_t = 2)]
        y: usize,
        #[arg(long, default_value_t = 1)]
        d: usize,
        /// Random integer weights in 1..=4 instead of an unweighted instance.
        #[arg(long)]
        weighted: bool,
    },
    /// Satisfied constraints of a labeling, or the induced value `isat_t`.
    Eval {
        #[arg(long = "in")]
        input: PathBuf,
        /// JSON array of labels, or a t-labeling `{"t", "sets"}`.
        #[arg(long, conflicts_with = "isat")]
        labels: Option<PathBuf>,
        #[arg(long)]
        isat: Option<usize>,
    },
    /// One of the four bipartite transformations.
    Transform {
        #[arg(long)]
        step: Step,
        #[arg(long, default_value_t = 2)]
        ell: usize,
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Step {
    Normalize,
    Unweight,
    Power,
    Collapse,
}

#[derive(Subcommand)]
enum OracleCmd {
    /// Chromatic number up to `qmax` colors of a DIMACS graph.
    Chrom {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 4)]
        qmax: usize,
    },
    /// Maximum independent set of a DIMACS graph.
    Mis {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Best t-labeling of a label-cover instance.
    LcBest {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        t: usize,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Experiment {
    Completeness,
    Soundness,
    Stability,
}

fn kebab<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

#[derive(Args)]
struct ExperimentArgs {
    which: Experiment,
    /// Spec file; flags override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    kind: Option<ReductionKind>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    vertices: Option<usize>,
    #[arg(long)]
    edges: Option<usize>,
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    rho: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    masses: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', value_parser = kebab::<Family>)]
    families: Option<Vec<Family>>,
    #[arg(long, value_delimiter = ',', value_parser = kebab::<ScanOperator>)]
    operators: Option<Vec<ScanOperator>>,
    #[arg(long, value_delimiter = ',', value_parser = kebab::<SetChoice>)]
    sets: Option<Vec<SetChoice>>,
    /// Adds a wall-time column.
    #[arg(long)]
    timing: bool,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    match serde_json::from_str(&text) {
        Ok(v) => Ok(v),
        // Validation failures inside `TryFrom` surface as serde messages; keep them as invalid input.
        Err(e) => Err(hcs_core::Error::InvalidInput(format!("{}: {e}", path.display())).into()),
    }
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn need_seed(seed: Option<u64>) -> anyhow::Result<u64> {
    seed.ok_or_else(|| hcs_core::Error::InvalidParameter("--seed is required for this command".into()).into())
}

fn budget(cli: &Cli, base: SearchBudget) -> SearchBudget {
    SearchBudget {
        max_vertices: cli.budget_vertices.unwrap_or(base.max_vertices),
        max_edges: cli.budget_edges.unwrap_or(base.max_edges),
        time_limit_seconds: cli.budget_seconds.unwrap_or(base.time_limit_seconds),
    }
}

fn read_function(path: &Path) -> anyhow::Result<QFunction> {
    read_json(path)
}

fn fourier(cli: &Cli, a: &FourierArgs) -> anyhow::Result<String> {
    let f = match (&a.input, a.named) {
        (Some(p), _) => read_function(p)?,
        (None, Some(kind)) => {
            let (Some(q), Some(n)) = (a.q, a.n) else {
                return Err(hcs_core::Error::InvalidParameter("--named needs --q and --n".into()).into());
            };
            named_function(kind, q, n, a.i, a.a)?
        }
        (None, None) => return Err(hcs_core::Error::InvalidParameter("give --in or --named".into()).into()),
    };
    let basis = if a.random_basis {
        let mut rng = ChaCha8Rng::seed_from_u64(need_seed(cli.seed)?);
        let seeds: Vec<Vec<f64>> = (1..f.q()).map(|_| (0..f.q()).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        OrthonormalBasis::from_seed_vectors(f.q(), &seeds)?
    } else {
        OrthonormalBasis::standard(f.q())?
    };
    let t = transform(&f, &basis)?;
    let influences: Vec<f64> = (1..=f.n()).map(|i| t.influence(i)).collect::<Result<_, _>>()?;
    to_json(&serde_json::json!({
        "function": f,
        "mean": f.mean(),
        "norm_sq": f.norm_sq(),
        "basis": basis,
        "coefficients": t.coeffs(),
        "influences": influences,
        "k": a.k,
        "low_level_influences": t.low_level_influences(a.k),
    }))
}

fn op(a: &OpArgs) -> anyhow::Result<String> {
    let op = a.source.require()?;
    let base = (op.m() as f64).sqrt().round() as usize;
    let pair_uniform = if base >= 2 && base * base == op.m() { Some(pair_marginal_distribution(&op)?.is_uniform()) } else { None };
    let applied = match &a.apply {
        Some(p) => Some(apply_tensor(&op, &read_function(p)?)?),
        None => None,
    };
    to_json(&serde_json::json!({
        "operator": op,
        "eigenvalues": op.eigenvalues(),
        "spectral_radius": op.spectral_radius(),
        "pair_marginal_uniform": pair_uniform,
        "applied": applied,
    }))
}

fn gaussian(cli: &Cli, cmd: &GaussianCmd) -> anyhow::Result<String> {
    match cmd {
        GaussianCmd::Lambda { rho, mu, nu } => {
            let tau = mu.min(*nu);
            let asymptotic = lambda_asymptotic(tau, *rho).ok().filter(|_| mu == nu);
            to_json(&serde_json::json!({
                "rho": rho,
                "mu": mu,
                "nu": nu,
                "lambda": lambda_closed(*rho, *mu, *nu)?,
                "lower": lower_gauss(*rho, *mu, *nu)?,
                "asymptotic": asymptotic,
            }))
        }
        GaussianCmd::Mc { f, g, source, samples } => {
            let (f, g) = (read_function(f)?, read_function(g)?);
            let op = source.load()?;
            let exact = match &op {
                Some(t) => noisy_inner(&f, t, &g)?,
                None => f.inner(&g)?,
            };
            let est = real_analogue_inner_mc(&f, &g, op.as_ref(), *samples, need_seed(cli.seed)?)?;
            to_json(&serde_json::json!({ "estimate": est, "exact": exact, "within_4_stderr": est.covers(exact, 4.0) }))
        }
        GaussianCmd::Bound { f, g, source, k, delta, epsilon, fish } => {
            let rep = mo_bound_report(&read_function(f)?, &read_function(g)?, &source.require()?, *k, *delta, *epsilon, *fish)?;
            Ok(format!("{}\n{}\n", BoundReport::CSV_HEADER, rep.csv_row()))
        }
        GaussianCmd::Chop { f, samples } => to_json(&chop_defect(&read_function(f)?, *samples, need_seed(cli.seed)?)?),
    }
}

fn lc(cli: &Cli, cmd: &LcCmd) -> anyhow::Result<String> {
    match cmd {
        LcCmd::Gen { family, vertices, edges, r, labels_out, bipartite, x, y, d, weighted } => {
            let seed = need_seed(cli.seed)?;
            if *bipartite {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                if *r == 0 || *d == 0 || r % d != 0 {
                    return Err(hcs_core::Error::InvalidParameter("--d must divide --r".into()).into());
                }
                let phi = if *weighted {
                    let mut pairs: Vec<(usize, usize)> = (0..*x).flat_map(|a| (0..*y).map(move |b| (a, b))).collect();
                    pairs.retain(|_| rng.random_bool(0.5));
                    let es = pairs
                        .into_iter()
                        .map(|(a, b)| BipartiteEdge {
                            x: a,
                            y: b,
                            relation: random_projection(&mut rng, *r, *d),
                            weight: hcs_core::rational::ratio(rng.random_range(1..=4), 1),
                        })
                        .collect();
                    BipartiteLc::weighted(*x, *y, *r, *d, es)?
                } else {
                    let es = (0..*edges)
                        .map(|_| (rng.random_range(0..*x), rng.random_range(0..*y), random_projection(&mut rng, *r, *d)))
                        .collect();
                    BipartiteLc::unweighted(*x, *y, *r, *d, es)?
                };
                return to_json(&phi);
            }
            let (g, hidden) = gen_planted(*family, *vertices, *edges, *r, seed)?;
            if let Some(p) = labels_out {
                fs::write(p, to_json(&hidden)?)?;
            }
            to_json(&g)
        }
        LcCmd::Eval { input, labels, isat } => {
            let g: LabelCoverInstance = read_json(input)?;
            match (labels, isat) {
                (Some(p), _) => {
                    let text = fs::read_to_string(p)?;
                    let l = match serde_json::from_str::<Vec<usize>>(&text) {
                        Ok(v) => TLabeling::from_labels(&v),
                        Err(_) => read_json::<TLabeling>(p)?,
                    };
                    let sat = eval_sat(&g, &l)?;
                    to_json(&serde_json::json!({ "satisfied": sat.satisfied, "total": sat.total, "fraction": sat.fraction() }))
                }
                (None, Some(t)) => to_json(&isat_t(&g, *t)?),
                (None, None) => Err(hcs_core::Error::InvalidParameter("give --labels or --isat".into()).into()),
            }
        }
        LcCmd::Transform { step, ell, input } => {
            let phi: BipartiteLc = read_json(input)?;
            match step {
                Step::Normalize => {
                    let (out, report) = transform_normalize(&phi, *ell)?;
                    eprintln!("{}", serde_json::to_string(&report)?);
                    to_json(&out)
                }
                Step::Unweight => to_json(&transform_unweight(&phi, *ell)?),
                Step::Power => to_json(&transform_power(&phi, *ell)?.0),
                Step::Collapse => to_json(&transform_collapse(&phi)?),
            }
        }
    }
}

fn oracle(cli: &Cli, cmd: &OracleCmd) -> anyhow::Result<String> {
    let b = budget(cli, SearchBudget::default());
    match cmd {
        OracleCmd::Chrom { input, qmax } => to_json(&chromatic_number(&read_dimacs(&fs::read_to_string(input)?)?, *qmax, &b)?),
        OracleCmd::Mis { input } => {
            let (size, witness) = max_independent_set(&read_dimacs(&fs::read_to_string(input)?)?, &b)?;
            to_json(&serde_json::json!({ "size": size, "witness": witness }))
        }
        OracleCmd::LcBest { input, t } => {
            let (sat, labeling) = best_labeling(&read_json(input)?, *t, &b)?;
            to_json(&serde_json::json!({ "satisfied": sat.satisfied, "total": sat.total, "labeling": labeling }))
        }
    }
}

fn experiment_spec(cli: &Cli, a: &ExperimentArgs) -> anyhow::Result<ExperimentSpec> {
    let mut spec: ExperimentSpec = match &a.spec {
        Some(p) => read_json(p)?,
        None => ExperimentSpec::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = &a.$field { spec.$field = v.clone(); } )* };
    }
    set!(name, kind, r, vertices, instances, k, delta, epsilon, rho, masses, n, families, operators, sets);
    if a.edges.is_some() {
        spec.edges = a.edges;
    }
    if cli.seed.is_some() {
        spec.seed = cli.seed;
    }
    if cli.out.is_some() {
        spec.out.clone_from(&cli.out);
    }
    spec.timing |= a.timing;
    spec.budget = budget(cli, spec.budget);
    Ok(spec)
}

fn experiment(cli: &Cli, a: &ExperimentArgs) -> anyhow::Result<()> {
    let spec = experiment_spec(cli, a)?;
    let report: Report = match a.which {
        Experiment::Completeness => run_completeness(&spec)?,
        Experiment::Soundness => run_soundness_probe(&spec)?,
        Experiment::Stability => run_stability_scan(&spec)?,
    };
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    emit(spec.out.as_deref(), &report.render(Some(now)))?;
    if report.failures > 0 {
        bail!(ExperimentFailure(format!("{} of {} rows broke the checked invariant", report.failures, report.rows.len())));
    }
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let text = match &cli.command {
        Command::Fourier(a) => fourier(cli, a)?,
        Command::Op(a) => op(a)?,
        Command::Gaussian(cmd) => gaussian(cli, cmd)?,
        Command::Lc(cmd) => lc(cli, cmd)?,
        Command::Reduce { kind, input } => reduce(*kind, &read_json(input)?)?.to_dimacs()?,
        Command::Decode { kind, input, set, k, delta, epsilon } => {
            let bg = reduce(*kind, &read_json(input)?)?;
            let members: Vec<usize> = read_json(set)?;
            to_json(&decode_tlabeling(&bg, &members, DecodeParams { k: *k, delta: *delta, epsilon: *epsilon })?)?
        }
        Command::Oracle(cmd) => oracle(cli, cmd)?,
        Command::Experiment(a) => return experiment(cli, a),
    };
    emit(cli.out.as_deref(), &text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
