//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::collections::{BTreeMap, BTreeSet};
use std::process::Command;
use std::time::{Duration, Instant};

use hcs_cli::experiments::{csv_body, run_completeness, run_soundness_probe, run_stability_scan, ExperimentSpec, Family, ScanOperator};
use hcs_core::gaussian::{lambda_gauss, mo_bound_report, real_analogue_inner_mc, Verdict};
use hcs_core::labelcover::{
    disjoint_family_prob, gen_planted, is_pairwise_intersecting, isat_t, popular_element, transform_collapse, transform_normalize,
    transform_power, transform_unweight, BipartiteEdge, BipartiteLabeling, PlantedFamily,
};
use hcs_core::operators::{beckner, gadget_operator};
use hcs_core::oracles::chromatic_number;
use hcs_core::qcube::{bunch_fn, named_function, transform, NamedKind};
use hcs_core::rational::{ratio, Rational};
use hcs_core::reduction::{decode_tlabeling, intended_coloring, reduce, verify_coloring, DecodeParams};
use hcs_core::{
    BipartiteLc, Constraint, GadgetKind, LabelCoverInstance, MarkovOp, OrthonormalBasis, QFunction, ReductionKind,
    Relation, SearchBudget, StabilityQuery,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        if !$cond {
            return Err(format!($($msg)*));
        }
    };
}

fn one() -> Rational {
    Rational::from_integer(1)
}

fn zero() -> Rational {
    Rational::from_integer(0)
}

// ---------------------------------------------------------------------------------------------
// Hypercube helpers written independently of the library.

fn point(q: usize, n: usize, mut idx: usize) -> Vec<usize> {
    let mut x = vec![0; n];
    for c in (0..n).rev() {
        x[c] = idx % q;
        idx /= q;
    }
    x
}

fn index(q: usize, x: &[usize]) -> usize {
    x.iter().fold(0, |acc, &s| acc * q + s)
}

fn random_values(rng: &mut ChaCha8Rng, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(lo..hi)).collect()
}

/// `E_x Var_{x_i}[f]` by direct averaging.
fn direct_influence(f: &QFunction, i: usize) -> f64 {
    let (q, n) = (f.q(), f.n());
    let mut total = 0.0;
    for idx in 0..f.len() {
        let mut x = point(q, n, idx);
        if x[i - 1] != 0 {
            continue;
        }
        let fiber: Vec<f64> = (0..q)
            .map(|a| {
                x[i - 1] = a;
                f.values()[index(q, &x)]
            })
            .collect();
        let m = fiber.iter().sum::<f64>() / q as f64;
        total += fiber.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / q as f64;
    }
    total / (f.len() / q) as f64
}

/// Gram-Schmidt under the uniform measure on `[q]`, constant vector first.
fn gram_schmidt(q: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let ip = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / q as f64;
    let mut out: Vec<Vec<f64>> = vec![vec![1.0; q]];
    while out.len() < q {
        let mut v = random_values(rng, q, -1.0, 1.0);
        for u in &out {
            let c = ip(&v, u);
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
        }
        let norm = ip(&v, &v).sqrt();
        if norm > 1e-3 {
            out.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    out
}

fn naive_coefficients(f: &QFunction, basis: &[Vec<f64>]) -> Vec<f64> {
    let (q, n) = (f.q(), f.n());
    (0..f.len())
        .map(|a| {
            let sa = point(q, n, a);
            (0..f.len())
                .map(|idx| {
                    let x = point(q, n, idx);
                    f.values()[idx] * (0..n).map(|c| basis[sa[c]][x[c]]).product::<f64>()
                })
                .sum::<f64>()
                / f.len() as f64
        })
        .collect()
}

// ---------------------------------------------------------------------------------------------
// Criteria.

fn c1_fourier() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for trial in 0..200 {
        let q = [2, 3, 4][trial % 3];
        let n = 1 + (trial / 3) % 4;
        let f = QFunction::new(q, n, random_values(&mut rng, q.pow(n as u32), -1.0, 1.0)).unwrap();
        let std_basis = OrthonormalBasis::standard(q).unwrap();
        let t = transform(&f, &std_basis).unwrap();
        let parseval = (t.energy() - f.norm_sq()).abs() / f.norm_sq().max(1e-300);
        ensure!(parseval <= 1e-10, "Parseval off by {parseval:e} (q={q}, n={n})");
        let round = t.inverse().values().iter().zip(f.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ensure!(round <= 1e-10, "round trip off by {round:e}");
        for i in 1..=n {
            let d = (direct_influence(&f, i) - t.influence(i).unwrap()).abs();
            ensure!(d <= 1e-10, "influence {i} differs by {d:e}");
            worst = worst.max(d);
        }
        let other = OrthonormalBasis::from_vectors(gram_schmidt(q, &mut rng)).unwrap();
        let t2 = transform(&f, &other).unwrap();
        for k in 0..=n {
            for i in 1..=n {
                let d = (t.low_level_influence(i, k).unwrap() - t2.low_level_influence(i, k).unwrap()).abs();
                ensure!(d <= 1e-10, "I_{i}^<={k} differs across bases by {d:e}");
                worst = worst.max(d);
            }
        }
        if n <= 3 {
            let naive = naive_coefficients(&f, other.vectors());
            let d = naive.iter().zip(t2.coeffs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            ensure!(d <= 1e-10, "coefficients differ from the direct sum by {d:e}");
        }
    }
    Ok(format!("200 functions, worst influence discrepancy {worst:.1e}"))
}

fn c2_bunched_influence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (b3, b9) = (OrthonormalBasis::standard(3).unwrap(), OrthonormalBasis::standard(9).unwrap());
    let mut tightest = f64::INFINITY;
    for _ in 0..200 {
        let f = QFunction::new(3, 4, random_values(&mut rng, 81, 0.0, 1.0)).unwrap();
        // Pair symbol 3 x_{2i-1} + x_{2i} keeps the row-major index unchanged.
        let bunched = QFunction::new(9, 2, f.values().to_vec()).unwrap();
        ensure!(bunch_fn(&f).unwrap() == bunched, "bunching disagrees with the index identity");
        let (tf, tb) = (transform(&f, &b3).unwrap(), transform(&bunched, &b9).unwrap());
        for i in 1..=2 {
            for k in 1..=2 {
                let lhs = tb.low_level_influence(i, k).unwrap();
                let rhs = tf.low_level_influence(2 * i - 1, 2 * k).unwrap() + tf.low_level_influence(2 * i, 2 * k).unwrap();
                ensure!(lhs <= rhs + 1e-12, "i={i} k={k}: {lhs} > {rhs}");
                tightest = tightest.min(rhs - lhs);
            }
        }
    }
    Ok(format!("800 checks, smallest slack {tightest:.2e}"))
}

/// Transition weights of the gadgets, rebuilt from the transition types.
fn expected_gadget(kind: GadgetKind) -> (usize, Vec<Rational>) {
    match kind {
        GadgetKind::Almost3 => (3, (0..9).map(|c| if c / 3 == c % 3 { zero() } else { ratio(1, 2) }).collect()),
        GadgetKind::Col4 => {
            let (b1, b2, b3) = (ratio(1, 12), ratio(1, 8), ratio(3, 8));
            let mut m = vec![zero(); 256];
            for s in 0..16 {
                for t in 0..16 {
                    let (x1, x2, y1, y2) = (s / 4, s % 4, t / 4, t % 4);
                    let disjoint = x1 != y1 && x1 != y2 && x2 != y1 && x2 != y2;
                    m[s * 16 + t] = match (disjoint, x1 == x2, y1 == y2) {
                        (false, _, _) => zero(),
                        (true, true, true) => b1,
                        (true, true, false) | (true, false, true) => b2,
                        (true, false, false) => b3,
                    };
                }
            }
            (16, m)
        }
        GadgetKind::Alpha => {
            let (b2, b3) = (ratio(1, 2), ratio(1, 2));
            let mut m = vec![zero(); 81];
            for s in 0..9 {
                for t in 0..9 {
                    let (x1, x2, y1, y2) = (s / 3, s % 3, t / 3, t % 3);
                    let distinct3 = |a: usize, b: usize, c: usize| a != b && b != c && a != c;
                    m[s * 9 + t] = if x1 == x2 && y1 != y2 && distinct3(x1, y1, y2) {
                        b2
                    } else if y1 == y2 && x1 != x2 && distinct3(y1, x1, x2) {
                        b2
                    } else if x2 == y2 && distinct3(x1, y1, x2) {
                        b3
                    } else {
                        zero()
                    };
                }
            }
            (9, m)
        }
    }
}

fn nontrivial_radius(op: &MarkovOp) -> f64 {
    let m = op.m();
    let mat = nalgebra::DMatrix::from_fn(m, m, |i, j| op.entry(i, j));
    let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(mat).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
    ev[1..].iter().map(|v| v.abs()).fold(0.0, f64::max)
}

fn c3_gadgets() -> Check {
    let mut radii = Vec::new();
    for kind in [GadgetKind::Almost3, GadgetKind::Col4, GadgetKind::Alpha] {
        let op = gadget_operator(kind);
        let (m, want) = expected_gadget(kind);
        ensure!(op.m() == m, "{kind:?}: {} states", op.m());
        let exact = op.exact().ok_or(format!("{kind:?} has no exact entries"))?;
        for x in 0..m {
            let row: Rational = exact[x * m..(x + 1) * m].iter().copied().sum();
            ensure!(row == one(), "{kind:?}: row {x} sums to {row}");
            for y in 0..m {
                ensure!(exact[x * m + y] == want[x * m + y], "{kind:?}: entry ({x}, {y}) is {}", exact[x * m + y]);
                ensure!(op.in_support(x, y) == (want[x * m + y] > zero()), "{kind:?}: support at ({x}, {y})");
                ensure!(exact[x * m + y] == exact[y * m + x], "{kind:?}: not symmetric");
            }
        }
        // Consequences of the supports.
        for x in 0..m {
            for y in 0..m {
                if !op.in_support(x, y) {
                    continue;
                }
                match kind {
                    GadgetKind::Almost3 => ensure!(x != y, "almost3 support holds x = y"),
                    GadgetKind::Col4 => {
                        let (a, b) = ([x / 4, x % 4], [y / 4, y % 4]);
                        ensure!(a.iter().all(|s| !b.contains(s)), "col4 support intersects");
                    }
                    GadgetKind::Alpha => {
                        let (a, b) = ([x / 3, x % 3], [y / 3, y % 3]);
                        ensure!(!b.contains(&a[0]) && !a.contains(&b[0]), "alpha support violates first coordinates");
                    }
                }
            }
        }
        let r = nontrivial_radius(&op);
        ensure!(r < 1.0 - 1e-9, "{kind:?}: radius {r}");
        ensure!((r - op.spectral_radius()).abs() < 1e-9, "{kind:?}: library radius {} vs {r}", op.spectral_radius());
        radii.push(r);
    }
    ensure!((radii[0] - 0.5).abs() <= 1e-12, "almost3 radius {}", radii[0]);
    let (b1, b2, b3) = (ratio(1, 12), ratio(1, 8), ratio(3, 8));
    ensure!(b1 * 3 + b2 * 6 == one() && b2 * 2 + b3 * 2 == one(), "col4 weight equations");
    let alpha = gadget_operator(GadgetKind::Alpha);
    let exact = alpha.exact().unwrap();
    for a in 0..3 {
        for b in 0..3 {
            let mut p = zero();
            for x1 in 0..3 {
                for y1 in 0..3 {
                    p += ratio(1, 9) * exact[(x1 * 3 + a) * 9 + y1 * 3 + b];
                }
            }
            ensure!(p == ratio(1, 9), "alpha marginal at ({a}, {b}) is {p}");
        }
    }
    Ok(format!("radii almost3 {:.12}, col4 {:.6}, alpha {:.6}", radii[0], radii[1], radii[2]))
}

/// `P[X < h, Y < k]` by composite 10-point Gauss-Legendre on the joint density.
fn orthant_by_double_integral(h: f64, k: f64, rho: f64) -> f64 {
    const NODES: [(f64, f64); 5] = [
        (0.295_524_224_714_752_9, 0.148_874_338_981_631_2),
        (0.269_266_719_309_996_4, 0.433_395_394_129_247_2),
        (0.219_086_362_515_982_0, 0.679_409_568_299_024_4),
        (0.149_451_349_150_580_6, 0.865_063_366_688_984_5),
        (0.066_671_344_308_688_14, 0.973_906_528_517_171_7),
    ];
    let rule = |lo: f64, hi: f64, panels: usize| -> Vec<(f64, f64)> {
        let w = (hi - lo) / panels as f64;
        let mut pts = Vec::with_capacity(panels * 10);
        for p in 0..panels {
            let mid = lo + (p as f64 + 0.5) * w;
            for &(wt, x) in &NODES {
                pts.push((mid - x * w / 2.0, wt * w / 2.0));
                pts.push((mid + x * w / 2.0, wt * w / 2.0));
            }
        }
        pts
    };
    let s2 = 1.0 - rho * rho;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * s2.sqrt());
    let (xs, ys) = (rule(-12.0, h, 240), rule(-12.0, k, 240));
    let mut total = 0.0;
    for &(x, wx) in &xs {
        for &(y, wy) in &ys {
            total += wx * wy * (-(x * x - 2.0 * rho * x * y + y * y) / (2.0 * s2)).exp();
        }
    }
    total * norm
}

fn lam(rho: f64, mu: f64, nu: f64) -> f64 {
    lambda_gauss(StabilityQuery::new(rho, mu, nu).unwrap()).unwrap()
}

fn c4_gaussian() -> Check {
    let grid = [0.1, 0.5, 0.9];
    let pairs: Vec<(f64, f64)> = grid.iter().flat_map(|&m| grid.iter().map(move |&n| (m, n))).collect();
    for &(mu, nu) in &pairs {
        ensure!((lam(0.0, mu, nu) - mu * nu).abs() <= 1e-9, "rho=0 at ({mu}, {nu})");
        ensure!((lam(1.0, mu, nu) - mu.min(nu)).abs() <= 1e-9, "rho=1 at ({mu}, {nu})");
        ensure!((lam(-1.0, mu, nu) - (mu + nu - 1.0).max(0.0)).abs() <= 1e-9, "rho=-1 at ({mu}, {nu})");
        let c = lam(0.0, mu, nu) + lam(0.0, mu, 1.0 - nu) - mu;
        ensure!(c.abs() <= 1e-8, "complement identity at rho=0 ({mu}, {nu}) off by {c:e}");
    }
    let oracle = orthant_by_double_integral(0.0, 0.0, 0.5);
    let v = lam(0.5, 0.5, 0.5);
    ensure!((v - oracle).abs() <= 1e-6, "Lambda(0.5, 0.5, 0.5) = {v}, double integral {oracle}");
    ensure!((v - 1.0 / 3.0).abs() <= 1e-6, "Lambda(0.5, 0.5, 0.5) = {v}");
    let rhos: Vec<f64> = (0..=20).map(|i| -1.0 + 0.1 * i as f64).collect();
    let mut worst_complement = 0.0f64;
    for &(mu, nu) in &pairs {
        let mut prev = f64::NEG_INFINITY;
        for &rho in &rhos {
            let rho = rho.clamp(-1.0, 1.0);
            let v = lam(rho, mu, nu);
            ensure!(v >= prev - 1e-12, "not monotone at rho={rho} ({mu}, {nu})");
            prev = v;
            // Replacing F_{1-nu} by its complement reflects one axis, which flips rho.
            let c = (v + lam(-rho, mu, 1.0 - nu) - mu).abs();
            ensure!(c <= 1e-8, "reflected complement identity at rho={rho} ({mu}, {nu}) off by {c:e}");
            worst_complement = worst_complement.max(c);
        }
    }
    for &rho in &rhos {
        let rho = rho.clamp(-1.0, 1.0);
        let sheppard = 0.25 + rho.asin() / (2.0 * std::f64::consts::PI);
        ensure!((lam(rho, 0.5, 0.5) - sheppard).abs() <= 1e-9, "Sheppard at rho={rho}");
    }
    Ok(format!("Lambda(0.5,0.5,0.5) = {v:.12} vs double integral {oracle:.12}; worst complement {worst_complement:.1e}"))
}

fn c5_monte_carlo() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let rho = 0.5;
    let op = beckner(3, rho).unwrap();
    let t = |a: usize, b: usize| if a == b { rho + (1.0 - rho) / 3.0 } else { (1.0 - rho) / 3.0 };
    let mut worst_z = 0.0f64;
    for p in 0..20u64 {
        let f = QFunction::new(3, 2, random_values(&mut rng, 9, 0.0, 1.0)).unwrap();
        let g = QFunction::new(3, 2, random_values(&mut rng, 9, 0.0, 1.0)).unwrap();
        let plain = f.values().iter().zip(g.values()).map(|(a, b)| a * b).sum::<f64>() / 9.0;
        let mut noisy = 0.0;
        for x in 0..9 {
            for y in 0..9 {
                noisy += f.values()[x] * t(x / 3, y / 3) * t(x % 3, y % 3) * g.values()[y];
            }
        }
        noisy /= 9.0;
        for (exact, with_op) in [(plain, false), (noisy, true)] {
            let est = real_analogue_inner_mc(&f, &g, with_op.then_some(&op), 1_000_000, 9000 + 2 * p + u64::from(with_op)).unwrap();
            let z = (est.mean - exact).abs() / est.stderr;
            ensure!(est.covers(exact, 4.0), "pair {p} (T: {with_op}): {} vs {exact}, z = {z:.2}", est.mean);
            worst_z = worst_z.max(z);
        }
    }
    Ok(format!("40 estimates at 1e6 samples, largest |z| = {worst_z:.2}"))
}

// ---------------------------------------------------------------------------------------------
// Block graphs, rebuilt from the constraint data and the gadget supports.

fn gadget_support(kind: ReductionKind, x: (usize, usize), y: (usize, usize)) -> bool {
    let distinct3 = |a: usize, b: usize, c: usize| a != b && b != c && a != c;
    match kind {
        ReductionKind::Almost3 => x.0 != y.0,
        ReductionKind::Col4 => x.0 != y.0 && x.0 != y.1 && x.1 != y.0 && x.1 != y.1,
        ReductionKind::Col3 => {
            let ((x1, x2), (y1, y2)) = (x, y);
            (x1 == x2 && distinct3(x1, y1, y2)) || (y1 == y2 && distinct3(y1, x1, x2)) || (x2 == y2 && distinct3(x1, y1, x2))
        }
    }
}

fn coordinates(kind: ReductionKind, g: &LabelCoverInstance) -> (usize, usize) {
    match kind {
        ReductionKind::Almost3 => (3, g.label_range()),
        ReductionKind::Col4 => (4, g.label_range()),
        ReductionKind::Col3 => (3, g.label_range()),
    }
}

fn block_adjacent(kind: ReductionKind, c: &Constraint, x: &[usize], y: &[usize]) -> bool {
    match c {
        Constraint::OneToOne { perm } => (0..x.len()).all(|i| gadget_support(kind, (x[i], 0), (y[perm[i] - 1], 0))),
        Constraint::TwoToTwo { perm1, perm2 } | Constraint::Alpha { perm1, perm2 } => (0..x.len() / 2).all(|i| {
            let a = (x[perm1[2 * i] - 1], x[perm1[2 * i + 1] - 1]);
            let b = (y[perm2[2 * i] - 1], y[perm2[2 * i + 1] - 1]);
            gadget_support(kind, a, b)
        }),
        Constraint::Explicit { .. } => false,
    }
}

/// Monochromatic edges of the intended coloring and the edge set, both computed from scratch.
fn independent_coloring_check(kind: ReductionKind, g: &LabelCoverInstance, hidden: &[usize]) -> (usize, BTreeSet<(usize, usize)>) {
    let (q, coords) = coordinates(kind, g);
    let size = q.pow(coords as u32);
    let mut edges = BTreeSet::new();
    let mut mono = 0;
    for e in g.edges() {
        for a in 0..size {
            let x = point(q, coords, a);
            for b in 0..size {
                let y = point(q, coords, b);
                let (va, vb) = (e.u * size + a, e.v * size + b);
                if va == vb || !block_adjacent(kind, &e.constraint, &x, &y) {
                    continue;
                }
                if edges.insert((va.min(vb), va.max(vb))) && x[hidden[e.u] - 1] == y[hidden[e.v] - 1] {
                    mono += 1;
                }
            }
        }
    }
    (mono, edges)
}

fn family_of(kind: ReductionKind) -> PlantedFamily {
    match kind {
        ReductionKind::Almost3 => PlantedFamily::OneToOne,
        ReductionKind::Col4 => PlantedFamily::TwoToTwo,
        ReductionKind::Col3 => PlantedFamily::Alpha,
    }
}

/// `(vertices, label range)` of instance `i` for each kind.
fn completeness_shape(kind: ReductionKind, i: usize) -> (usize, usize) {
    match kind {
        ReductionKind::Almost3 => (1 + i % 4, 1 + (i / 4) % 2),
        _ => (1 + i % 3, 2),
    }
}

fn c6_completeness() -> Check {
    let mut total_edges = 0;
    for kind in [ReductionKind::Almost3, ReductionKind::Col4, ReductionKind::Col3] {
        for i in 0..20 {
            let (nv, r) = completeness_shape(kind, i);
            let ne = 1 + i % 5;
            let (g, hidden) = gen_planted(family_of(kind), nv, ne, r, 600 + i as u64).map_err(|e| e.to_string())?;
            let bg = reduce(kind, &g).map_err(|e| e.to_string())?;
            let (mono, edges) = independent_coloring_check(kind, &g, &hidden);
            ensure!(mono == 0, "{kind} instance {i}: {mono} monochromatic edges");
            let graph = bg.to_graph().unwrap();
            let lib: BTreeSet<(usize, usize)> = graph.edges().collect();
            ensure!(lib == edges, "{kind} instance {i}: edge sets differ ({} vs {})", lib.len(), edges.len());
            let c = intended_coloring(&bg, &hidden.iter().map(|&a| Some(a)).collect::<Vec<_>>()).unwrap();
            let rep = verify_coloring(&bg, &c).unwrap();
            ensure!(rep.monochromatic == 0 && rep.uncolored == 0, "{kind} instance {i}: library report {rep:?}");
            ensure!(c.palette == bg.q(), "{kind}: palette {}", c.palette);
            total_edges += edges.len();
        }
        let spec = ExperimentSpec {
            seed: Some(66),
            kind,
            r: if kind == ReductionKind::Almost3 { 2 } else { 1 },
            vertices: if kind == ReductionKind::Almost3 { 4 } else { 3 },
            instances: 20,
            ..ExperimentSpec::default()
        };
        let rep = run_completeness(&spec).map_err(|e| e.to_string())?;
        ensure!(rep.rows.len() == 20 && rep.failures == 0, "{kind} driver: {} rows, {} failures", rep.rows.len(), rep.failures);
        let palette = hcs_cli::experiments::column_values(&rep, "palette");
        let want = if kind == ReductionKind::Col4 { "4" } else { "3" };
        ensure!(palette == BTreeSet::from([want.to_string()]), "{kind} driver palette {palette:?}");
    }
    let budget = SearchBudget::default();
    let identity = Constraint::OneToOne { perm: vec![1] };
    let loop_instance = LabelCoverInstance::new(1, 1, vec![hcs_core::labelcover::LcEdge { u: 0, v: 0, constraint: identity.clone() }]).unwrap();
    let chi = |g: &LabelCoverInstance| match chromatic_number(&reduce(ReductionKind::Almost3, g).unwrap().to_graph().unwrap(), 4, &budget).unwrap() {
        hcs_core::oracles::Chromatic::Colorable { chi, .. } => chi,
        hcs_core::oracles::Chromatic::ExceedsQmax { .. } => usize::MAX,
    };
    let single = chi(&loop_instance);
    ensure!(single == 3, "single-block gadget has chi = {single}");
    let two_blocks = LabelCoverInstance::new(2, 1, vec![hcs_core::labelcover::LcEdge { u: 0, v: 1, constraint: identity }]).unwrap();
    let pair = chi(&two_blocks);
    ensure!(pair == 2, "two-block gadget has chi = {pair}");
    Ok(format!("60 planted instances, {total_edges} edges, none monochromatic; gadget chi = {single} (two blocks: {pair})"))
}

fn c7_soundness() -> Check {
    let params = DecodeParams { k: 3, delta: 0.05, epsilon: 0.1 };
    let mut decoded = 0;
    for kind in [ReductionKind::Almost3, ReductionKind::Col4, ReductionKind::Col3] {
        for i in 0..10 {
            let (nv, r) = if kind == ReductionKind::Almost3 { (2 + i % 3, 1 + i % 3) } else { (2 + i % 2, 2 + 2 * (i % 2)) };
            let (g, hidden) = gen_planted(family_of(kind), nv, nv + 1, r, 700 + i as u64).map_err(|e| e.to_string())?;
            let bg = reduce(kind, &g).map_err(|e| e.to_string())?;
            let c = intended_coloring(&bg, &hidden.iter().map(|&a| Some(a)).collect::<Vec<_>>()).unwrap();
            for color in 0..c.palette {
                let set = c.class(color);
                let res = decode_tlabeling(&bg, &set, params).map_err(|e| format!("{kind} instance {i}: {e}"))?;
                ensure!(res.j.len() == g.vertices(), "{kind} instance {i}: J = {:?}", res.j);
                for &v in &res.j {
                    let list = res.labeling.get(v).cloned().unwrap_or_default();
                    ensure!(list.contains(&hidden[v]), "{kind} instance {i}: label {} missing from {list:?}", hidden[v]);
                    ensure!(list.len() as f64 <= 3.0 / 0.05, "{kind} instance {i}: list of {}", list.len());
                }
                for e in g.edges() {
                    let (lu, lv) = (res.labeling.get(e.u).unwrap(), res.labeling.get(e.v).unwrap());
                    let rel = e.constraint.to_relation(g.label_range());
                    ensure!(lu.iter().any(|&a| lv.iter().any(|&b| rel.contains(a, b))), "{kind} instance {i}: edge unsatisfied");
                }
                ensure!(res.satisfied_fraction() == 1.0, "{kind} instance {i}: fraction {}", res.satisfied_fraction());
                decoded += 1;
            }
        }
    }
    let spec = ExperimentSpec { seed: Some(77), kind: ReductionKind::Col3, r: 1, vertices: 3, instances: 3, ..ExperimentSpec::default() };
    let rep = run_soundness_probe(&spec).map_err(|e| e.to_string())?;
    ensure!(rep.failures == 0, "driver reported {} failures", rep.failures);
    Ok(format!("{decoded} color classes decoded with the planted label in every list"))
}

// ---------------------------------------------------------------------------------------------
// Bipartite label cover.

/// Projection `{1..r} -> {1..r/d}` with fibers of size `d`, sending `a` to `b` when given.
fn projection(rng: &mut ChaCha8Rng, r: usize, d: usize, fix: Option<(usize, usize)>) -> Relation {
    let mut image: Vec<usize> = (0..r).map(|i| i / d + 1).collect();
    image.shuffle(rng);
    if let Some((a, b)) = fix {
        let at = image.iter().position(|&t| t == b).unwrap();
        image.swap(a - 1, at);
    }
    Relation::new(image.into_iter().enumerate().map(|(i, b)| (i + 1, b)))
}

struct Hidden {
    x: Vec<usize>,
    y: Vec<usize>,
}

fn hidden_labels(rng: &mut ChaCha8Rng, nx: usize, ny: usize, r: usize, d: usize) -> Hidden {
    Hidden { x: (0..nx).map(|_| rng.random_range(1..=r)).collect(), y: (0..ny).map(|_| rng.random_range(1..=r / d)).collect() }
}

fn relation_for(rng: &mut ChaCha8Rng, r: usize, d: usize, hidden: Option<&Hidden>, x: usize, y: usize) -> Relation {
    projection(rng, r, d, hidden.map(|h| (h.x[x], h.y[y])))
}

/// All right labelings.
fn right_labelings(ny: usize, k: usize) -> Vec<Vec<usize>> {
    (0..k.pow(ny as u32)).map(|i| point(k, ny, i).into_iter().map(|s| s + 1).collect()).collect()
}

/// Per-`x` weight of satisfied edges for the best left label against fixed right labels.
fn best_response(phi: &BipartiteLc, yl: &[usize]) -> Vec<Rational> {
    let mut gain = vec![BTreeMap::<usize, Rational>::new(); phi.nx()];
    for e in phi.edges() {
        for a in 1..=phi.label_range() {
            if e.relation.contains(a, yl[e.y]) {
                *gain[e.x].entry(a).or_insert_with(zero) += e.weight;
            }
        }
    }
    gain.into_iter().map(|m| m.into_values().max().unwrap_or_else(zero)).collect()
}

fn brute_optimum(phi: &BipartiteLc) -> Rational {
    right_labelings(phi.ny(), phi.right_range()).iter().map(|yl| best_response(phi, yl).into_iter().sum()).max().unwrap()
}

fn satisfied_per_x(phi: &BipartiteLc, l: &BipartiteLabeling) -> Vec<Rational> {
    let mut w = vec![zero(); phi.nx()];
    for e in phi.edges() {
        if e.relation.contains(l.x_labels[e.x], l.y_labels[e.y]) {
            w[e.x] += e.weight;
        }
    }
    w
}

/// Shapes `(|X|, |Y|, R, d)` with `d | R`.
fn shapes() -> Vec<(usize, usize, usize, usize)> {
    let mut out = Vec::new();
    for nx in 1..=3 {
        for ny in 1..=3 {
            for r in 1..=4 {
                for d in 1..=2 {
                    if r % d == 0 {
                        out.push((nx, ny, r, d));
                    }
                }
            }
        }
    }
    out
}

struct TransformCounts {
    instances: usize,
    perfect: usize,
}

fn check_normalize(counts: &mut TransformCounts) -> std::result::Result<(), String> {
    for (nx, ny, r, d) in shapes() {
        for mask in 1u32..1 << (nx * ny) {
            let mut rng = ChaCha8Rng::seed_from_u64(u64::from(mask) * 131 + (nx * 1000 + ny * 100 + r * 10 + d) as u64);
            let planted = mask % 2 == 0;
            let hidden = hidden_labels(&mut rng, nx, ny, r, d);
            let raw: Vec<(usize, usize, i64)> = (0..nx * ny).filter(|b| mask >> b & 1 == 1).map(|b| (b / ny, b % ny, rng.random_range(1..=4))).collect();
            let total: i64 = raw.iter().map(|t| t.2).sum();
            let edges = raw
                .iter()
                .map(|&(x, y, w)| BipartiteEdge { x, y, relation: relation_for(&mut rng, r, d, planted.then_some(&hidden), x, y), weight: ratio(w, total) })
                .collect();
            let phi = BipartiteLc::weighted(nx, ny, r, d, edges).map_err(|e| e.to_string())?;
            let opt = brute_optimum(&phi);
            for ell in 2..=3usize {
                let (out, rep) = transform_normalize(&phi, ell).map_err(|e| e.to_string())?;
                counts.instances += 1;
                ensure!(out.x_weights().iter().all(|w| *w == one()), "normalize: per-x weight differs from 1");
                ensure!((ell - 1) * nx <= out.nx() && out.nx() <= ell * nx, "normalize: |X'| = {} for |X| = {nx}, ell = {ell}", out.nx());
                // Copies of the optimal labeling.
                let best = phi.best_labeling().unwrap().1;
                let lifted = BipartiteLabeling { x_labels: rep.origin.iter().map(|&x| best.x_labels[x]).collect(), y_labels: best.y_labels.clone() };
                let per_x = satisfied_per_x(&out, &lifted);
                if opt == one() {
                    counts.perfect += 1;
                    ensure!(per_x.iter().all(|w| *w == one()), "normalize: perfect labeling not preserved");
                }
                let zeta = 1.0 - hcs_core::rational::to_f64(opt);
                let s = ((1.0 + 1.0 / (ell as f64 - 1.0)) * zeta).sqrt();
                let good = per_x.iter().filter(|w| hcs_core::rational::to_f64(**w) >= 1.0 - s - 1e-12).count();
                ensure!(good as f64 >= (1.0 - s) * out.nx() as f64 - 1e-9, "normalize: completeness with zeta = {zeta}");
                // Soundness: every right labeling with best-responding copies, every achieved gamma.
                for yl in right_labelings(ny, r / d) {
                    let w = best_response(&out, &yl);
                    for gamma in w.iter().filter(|g| **g > zero()) {
                        let beta2 = ratio(w.iter().filter(|v| *v >= gamma).count() as i64, out.nx() as i64);
                        let need = (one() - ratio(1, ell as i64)) * beta2 * *gamma;
                        ensure!(opt >= need, "normalize soundness: opt {opt} < {need}");
                    }
                }
            }
        }
    }
    Ok(())
}

fn per_x_normalized(rng: &mut ChaCha8Rng, nx: usize, ny: usize, r: usize, d: usize, mask: u32, hidden: Option<&Hidden>) -> Option<BipartiteLc> {
    let mut edges = Vec::new();
    for x in 0..nx {
        let ys: Vec<usize> = (0..ny).filter(|y| mask >> (x * ny + y) & 1 == 1).collect();
        if ys.is_empty() {
            return None;
        }
        let raw: Vec<i64> = ys.iter().map(|_| rng.random_range(1..=4)).collect();
        let total: i64 = raw.iter().sum();
        for (y, w) in ys.into_iter().zip(raw) {
            edges.push(BipartiteEdge { x, y, relation: relation_for(rng, r, d, hidden, x, y), weight: ratio(w, total) });
        }
    }
    BipartiteLc::weighted(nx, ny, r, d, edges).ok()
}

fn check_unweight(counts: &mut TransformCounts) -> std::result::Result<(), String> {
    for (nx, ny, r, d) in shapes() {
        for mask in 1u32..1 << (nx * ny) {
            let mut rng = ChaCha8Rng::seed_from_u64(u64::from(mask) * 977 + (nx * 1000 + ny * 100 + r * 10 + d) as u64);
            let hidden = hidden_labels(&mut rng, nx, ny, r, d);
            let Some(phi) = per_x_normalized(&mut rng, nx, ny, r, d, mask, (mask % 2 == 0).then_some(&hidden)) else {
                continue;
            };
            let perfect = brute_optimum(&phi) == Rational::from_integer(nx as i64);
            for ell in 1..=3usize {
                let out = transform_unweight(&phi, ell).map_err(|e| e.to_string())?;
                counts.instances += 1;
                let alpha = ell * ny;
                ensure!(out.left_degrees().iter().all(|&g| g == alpha), "unweight: degrees {:?}, want {alpha}", out.left_degrees());
                ensure!(out.edges().iter().all(|e| phi.edges().iter().any(|f| f.x == e.x && f.y == e.y && f.relation == e.relation)), "unweight: new constraint");
                if perfect {
                    counts.perfect += 1;
                    let (_, best) = phi.best_labeling().unwrap();
                    let sat = satisfied_per_x(&out, &best);
                    ensure!(sat.iter().all(|s| *s == Rational::from_integer(alpha as i64)), "unweight: perfect labeling not preserved");
                }
                // Both directions hold per x for every left label against every right labeling.
                for yl in right_labelings(ny, r / d) {
                    for x in 0..nx {
                        for a in 1..=r {
                            let w: Rational = phi.edges().iter().filter(|e| e.x == x && e.relation.contains(a, yl[e.y])).map(|e| e.weight).sum();
                            let c = out.edges().iter().filter(|e| e.x == x && e.relation.contains(a, yl[e.y])).count();
                            let frac = ratio(c as i64, alpha as i64);
                            let slack = ratio(1, ell as i64);
                            ensure!(frac >= w - slack, "unweight completeness at x={x}: {frac} < {w} - 1/{ell}");
                            ensure!(w > frac - slack, "unweight soundness at x={x}: {w} <= {frac} - 1/{ell}");
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

fn left_regular(rng: &mut ChaCha8Rng, nx: usize, ny: usize, r: usize, d: usize, degree: usize, hidden: Option<&Hidden>) -> BipartiteLc {
    let mut edges = Vec::new();
    for x in 0..nx {
        for _ in 0..degree {
            let y = rng.random_range(0..ny);
            edges.push((x, y, relation_for(rng, r, d, hidden, x, y)));
        }
    }
    BipartiteLc::unweighted(nx, ny, r, d, edges).unwrap()
}

/// Largest fraction of `x` with at least `gamma` of their constraints satisfied, over all labelings.
fn beta_star(phi: &BipartiteLc, gamma: Rational) -> Rational {
    let deg = Rational::from_integer(phi.left_regular_degree().unwrap() as i64);
    right_labelings(phi.ny(), phi.right_range())
        .iter()
        .map(|yl| ratio(best_response(phi, yl).into_iter().filter(|w| *w / deg >= gamma).count() as i64, phi.nx() as i64))
        .max()
        .unwrap()
}

fn check_power(counts: &mut TransformCounts) -> std::result::Result<(), String> {
    for (nx, ny, r, d) in shapes() {
        for degree in 1..=3usize {
            for seed in 0..4u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed * 7919 + (degree * 10000 + nx * 1000 + ny * 100 + r * 10 + d) as u64);
                let hidden = hidden_labels(&mut rng, nx, ny, r, d);
                let phi = left_regular(&mut rng, nx, ny, r, d, degree, (seed % 2 == 0).then_some(&hidden));
                let opt = brute_optimum(&phi);
                let (_, best) = phi.best_labeling().unwrap();
                for ell in 1..=3usize {
                    let (out, origin) = transform_power(&phi, ell).map_err(|e| e.to_string())?;
                    counts.instances += 1;
                    ensure!(out.left_degrees().iter().all(|&g| g == ell), "power: left degrees not {ell}");
                    for x in 0..nx {
                        ensure!(origin.iter().filter(|&&o| o == x).count() == degree.pow(ell as u32), "power: copies of {x}");
                    }
                    // Lifted labeling: copies of x fully satisfied are exactly sequences over satisfied edges.
                    let lifted = BipartiteLabeling { x_labels: origin.iter().map(|&x| best.x_labels[x]).collect(), y_labels: best.y_labels.clone() };
                    let sat_x = satisfied_per_x(&phi, &best);
                    let sat_out = satisfied_per_x(&out, &lifted);
                    for x in 0..nx {
                        let full = (0..out.nx()).filter(|&i| origin[i] == x && sat_out[i] == Rational::from_integer(ell as i64)).count();
                        let want = sat_x[x].to_integer().pow(ell as u32) as usize;
                        ensure!(full == want, "power completeness at x={x}: {full} fully satisfied copies, want {want}");
                    }
                    let opt_out = brute_optimum(&out);
                    let edges_out = Rational::from_integer((out.nx() * ell) as i64);
                    if opt == Rational::from_integer((nx * degree) as i64) {
                        counts.perfect += 1;
                        ensure!(opt_out == edges_out, "power: perfect labeling not preserved");
                    }
                    let bound = ratio(1, (ell * ell * d) as i64);
                    let mut gammas: Vec<Rational> = (0..=degree).map(|j| ratio(j as i64, degree as i64) + ratio(1, 1_000_000)).collect();
                    gammas.push(bound - ratio(1, 1_000_000));
                    for gamma in gammas.into_iter().filter(|g| *g > zero() && *g < bound) {
                        let beta = beta_star(&phi, gamma);
                        let rhs = beta + ratio(1, ell as i64) + (one() - beta) * Rational::from_integer((ell * ell * d) as i64) * gamma;
                        ensure!(opt_out / edges_out <= rhs, "power soundness: {} > {rhs} at gamma {gamma}", opt_out / edges_out);
                    }
                }
            }
        }
    }
    Ok(())
}

fn is_d_to_d(rel: &Relation, r: usize, d: usize) -> bool {
    (1..=r).all(|a| rel.pairs().iter().filter(|p| p.0 == a).count() == d && rel.pairs().iter().filter(|p| p.1 == a).count() == d)
}

fn all_labelings(phi: &BipartiteLc) -> Vec<BipartiteLabeling> {
    let xs = right_labelings(phi.nx(), phi.label_range());
    let ys = right_labelings(phi.ny(), phi.right_range());
    xs.iter().flat_map(|x| ys.iter().map(move |y| BipartiteLabeling { x_labels: x.clone(), y_labels: y.clone() })).collect()
}

fn check_collapse(counts: &mut TransformCounts) -> std::result::Result<(), String> {
    for (nx, ny, r, d) in shapes() {
        for ell in 1..=3usize {
            for seed in 0..4u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed * 104_729 + (ell * 10000 + nx * 1000 + ny * 100 + r * 10 + d) as u64);
                let hidden = hidden_labels(&mut rng, nx, ny, r, d);
                let phi = left_regular(&mut rng, nx, ny, r, d, ell, (seed % 2 == 0).then_some(&hidden));
                let out = transform_collapse(&phi).map_err(|e| e.to_string())?;
                counts.instances += 1;
                for e in out.edges() {
                    let rel = e.constraint.to_relation(r);
                    ensure!(is_d_to_d(&rel, r, d), "collapse: relation is not {d}-to-{d}");
                }
                // For every labeling, constraints among fully satisfied x are satisfied.
                for l in all_labelings(&phi) {
                    let sat = satisfied_per_x(&phi, &l);
                    let full: Vec<bool> = sat.iter().map(|s| *s == Rational::from_integer(ell as i64)).collect();
                    for e in out.edges() {
                        if full[e.u] && full[e.v] {
                            ensure!(e.constraint.to_relation(r).contains(l.x_labels[e.u], l.x_labels[e.v]), "collapse completeness");
                        }
                    }
                    if full.iter().all(|&f| f) {
                        counts.perfect += 1;
                    }
                }
                let opt = brute_optimum(&phi) / Rational::from_integer((nx * ell) as i64);
                for t in 1..=2usize {
                    let beta = isat_t(&out, t).map_err(|e| e.to_string())?.value;
                    ensure!(opt >= beta / Rational::from_integer((t * t) as i64), "collapse soundness: opt {opt} < isat_{t} {beta} / {}", t * t);
                }
            }
        }
    }
    Ok(())
}

fn c8_transformations() -> Check {
    let mut parts = Vec::new();
    for (name, f) in [
        ("normalize", check_normalize as fn(&mut TransformCounts) -> std::result::Result<(), String>),
        ("unweight", check_unweight),
        ("power", check_power),
        ("collapse", check_collapse),
    ] {
        let mut counts = TransformCounts { instances: 0, perfect: 0 };
        f(&mut counts)?;
        ensure!(counts.perfect > 0, "{name}: no perfectly satisfiable case exercised");
        parts.push(format!("{name} {} ({} perfect)", counts.instances, counts.perfect));
    }
    Ok(parts.join(", "))
}

fn c9_set_families() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let (mut bound_cases, mut intersecting) = (0, 0);
    for i in 0..50 {
        let n: usize = rng.random_range(1..=6);
        let dmax = 1 + i % 3;
        let family: Vec<BTreeSet<usize>> = (0..n)
            .map(|_| {
                let size = rng.random_range(1..=dmax);
                let mut s = BTreeSet::new();
                while s.len() < size {
                    s.insert(rng.random_range(1..=8));
                }
                s
            })
            .collect();
        let ell = 1 + i % 3;
        let d = family.iter().map(BTreeSet::len).max().unwrap();
        let count_max = (1..=8).map(|e| family.iter().filter(|s| s.contains(&e)).count()).max().unwrap();
        let gamma = ratio(count_max as i64, n as i64);
        let sequences = n.pow(ell as u32);
        let disjoint = (0..sequences)
            .filter(|&code| {
                let idx = point(n, ell, code);
                (0..ell).all(|a| (a + 1..ell).all(|b| family[idx[a]].is_disjoint(&family[idx[b]])))
            })
            .count();
        let p = ratio(disjoint as i64, sequences as i64);
        ensure!(disjoint_family_prob(&family, ell).unwrap() == p, "family {i}: library probability differs from enumeration {p}");
        let scale = Rational::from_integer((ell * ell * d) as i64);
        if gamma * scale < one() {
            bound_cases += 1;
            ensure!(p >= one() - scale * gamma, "family {i}: {p} < 1 - {ell}^2 {d} {gamma}");
        }
        let common = rng.random_range(1..=8);
        let joined: Vec<BTreeSet<usize>> = family.iter().map(|s| s | &BTreeSet::from([common])).collect();
        for fam in [&family, &joined] {
            let pairwise = fam.iter().enumerate().all(|(a, s)| fam[a + 1..].iter().all(|t| !s.is_disjoint(t)));
            ensure!(pairwise == is_pairwise_intersecting(fam), "family {i}: intersecting test disagrees");
            if !pairwise {
                continue;
            }
            intersecting += 1;
            let t = fam.iter().map(BTreeSet::len).max().unwrap();
            let best = (1..=8).map(|e| fam.iter().filter(|s| s.contains(&e)).count()).max().unwrap();
            ensure!(best * t >= fam.len(), "family {i}: best element in {best} of {} sets, T = {t}", fam.len());
            let (e, c) = popular_element(fam).unwrap();
            ensure!(c == best && fam.iter().filter(|s| s.contains(&e)).count() == c, "family {i}: popular element {e} ({c})");
        }
    }
    ensure!(bound_cases > 0, "no family met the density hypothesis");
    Ok(format!("50 families, {bound_cases} under the density hypothesis, {intersecting} intersecting families checked"))
}

fn c10_bound_harness() -> Check {
    let base = ExperimentSpec {
        seed: Some(10),
        epsilon: 0.05,
        masses: vec![0.1, 0.25, 0.5, 0.75, 0.9],
        families: vec![Family::Constants, Family::Mixture],
        ..ExperimentSpec::default()
    };
    let mut rows = 0;
    for (op, dims) in [(ScanOperator::Almost3, (1..=6).collect::<Vec<_>>()), (ScanOperator::Alpha, vec![1, 2, 3])] {
        let spec = ExperimentSpec { operators: vec![op], n: dims.clone(), ..base.clone() };
        let rep = run_stability_scan(&spec).map_err(|e| e.to_string())?;
        let verdicts = hcs_cli::experiments::column_values(&rep, "verdict");
        ensure!(verdicts == BTreeSet::from(["bounds-hold".to_string()]), "{op:?}: verdicts {verdicts:?}");
        let (fam, rho, gap) = ["family", "rho", "lambda_gap"].map(|c| rep.columns.iter().position(|x| *x == c).unwrap()).into();
        for row in &rep.rows {
            if row[fam] == "constants" && row[rho].parse::<f64>().unwrap() >= 0.0 {
                ensure!(row[gap].parse::<f64>().unwrap() >= -1e-12, "constants margin {}", row[gap]);
            }
        }
        rows += rep.rows.len();
        let dict = run_stability_scan(&ExperimentSpec { families: vec![Family::Dictators], ..spec }).map_err(|e| e.to_string())?;
        ensure!(hcs_cli::experiments::column_values(&dict, "verdict") == BTreeSet::from(["hypothesis-violated".to_string()]), "{op:?}: dictators");
        ensure!(hcs_cli::experiments::column_values(&dict, "violating") == BTreeSet::from(["1:1".to_string()]), "{op:?}: violating coordinates");
        rows += dict.rows.len();
    }
    let almost3 = gadget_operator(GadgetKind::Almost3);
    let alpha = gadget_operator(GadgetKind::Alpha);
    for n in 1..=6 {
        for i in 1..=n {
            let f = named_function(NamedKind::Dictator, 3, n, Some(i), Some(0)).unwrap();
            let rep = mo_bound_report(&f, &f, &almost3, 3, 0.05, 0.05, false).unwrap();
            ensure!(rep.verdict == Verdict::HypothesisViolated, "dictator {i} of {n}");
            let coords: Vec<(usize, usize)> = rep.violating_coords.iter().map(|v| (v.f_coord, v.g_coord)).collect();
            ensure!(coords == vec![(i, i)], "dictator {i} of {n}: {coords:?}");
            if n % 2 == 0 && n <= 6 {
                let rep = mo_bound_report(&f, &f, &alpha, 3, 0.05, 0.05, true).unwrap();
                let coords: Vec<(usize, usize)> = rep.violating_coords.iter().map(|v| (v.f_coord, v.g_coord)).collect();
                // Second coordinates of a pair move independently under the uniform marginal.
                if i % 2 == 1 {
                    ensure!(rep.verdict == Verdict::HypothesisViolated && coords == vec![(i, i)], "paired dictator {i} of {n}: {coords:?}");
                } else {
                    ensure!(rep.verdict == Verdict::BoundsHold && coords.is_empty(), "paired dictator {i} of {n}: {:?} {coords:?}", rep.verdict);
                }
            }
        }
    }
    Ok(format!("{rows} scan rows; every dictator coordinate identified"))
}

fn c11_determinism() -> Check {
    let exe = env!("CARGO_BIN_EXE_hcs");
    let runs: [&[&str]; 4] = [
        &["experiment", "completeness", "--seed", "11", "--kind", "col4", "--r", "1", "--vertices", "3", "--instances", "5"],
        &["experiment", "soundness", "--seed", "11", "--kind", "almost3", "--r", "2", "--vertices", "3", "--instances", "3", "--sets", "class,mis,empty,random"],
        &["experiment", "stability", "--seed", "11", "--n", "1,2", "--families", "constants,dictators,mixture,plurality"],
        &["experiment", "completeness", "--seed", "12", "--kind", "col3", "--r", "1", "--vertices", "3", "--instances", "4"],
    ];
    let mut lines = 0;
    for args in runs {
        let mut bodies = Vec::new();
        for _ in 0..2 {
            let out = Command::new(exe).args(args).output().map_err(|e| e.to_string())?;
            ensure!(out.status.success(), "{args:?} exited with {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
            bodies.push(csv_body(&String::from_utf8(out.stdout).unwrap()));
        }
        ensure!(bodies[0] == bodies[1], "{args:?}: CSV bodies differ");
        ensure!(bodies[0].lines().count() > 1, "{args:?}: empty report");
        lines += bodies[0].lines().count();
    }
    Ok(format!("4 experiments rerun, {lines} identical CSV lines"))
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Check); 11] = [
        ("Fourier engine", Duration::from_secs(10), c1_fourier),
        ("bunched influence inequality", Duration::from_secs(10), c2_bunched_influence),
        ("gadget operators", Duration::from_secs(5), c3_gadgets),
        ("Gaussian quantities", Duration::from_secs(30), c4_gaussian),
        ("real-analogue Monte Carlo", Duration::from_secs(120), c5_monte_carlo),
        ("completeness end to end", Duration::from_secs(120), c6_completeness),
        ("soundness decoder", Duration::from_secs(120), c7_soundness),
        ("bipartite transformations", Duration::from_secs(300), c8_transformations),
        ("set-family claims", Duration::from_secs(30), c9_set_families),
        ("noisy inner product harness", Duration::from_secs(120), c10_bound_harness),
        ("determinism", Duration::from_secs(120), c11_determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(_) if took > limit => Err(format!("took {:.1}s, limit {}s", took.as_secs_f64(), limit.as_secs())),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS criterion {:>2} {name}: {detail} [{:.2}s]", i + 1, took.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {:>2} {name}: {why} [{:.2}s]", i + 1, took.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
