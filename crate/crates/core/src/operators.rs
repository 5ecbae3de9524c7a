//! Symmetric Markov operators on `[m]`, their tensor powers and spectra.
//!
//! Gadget operators are assembled in exact rational arithmetic from their
//! transition patterns; floats only enter for the eigendecomposition.

use nalgebra::{DMatrix, SymmetricEigen};
use num_traits::{One, Zero};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid_param, Error, Result};
use crate::qcube::{self, mix_coordinates, transform, OrthonormalBasis, QFunction};
use crate::rational::{self, ratio, Rational};

const STOCHASTIC_TOL: f64 = 1e-12;

/// Largest state space accepted for eigendecomposition and tensor powers.
pub const MAX_STATES: usize = 4096;

/// A symmetric stochastic matrix with its spectral data.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovOp {
    m: usize,
    matrix: Vec<f64>,
    exact: Option<Vec<Rational>>,
    /// `1 = lambda_0`, then the remaining eigenvalues in decreasing order.
    eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors with `alpha_0 = 1`, matching `eigenvalues`.
    eigenbasis: OrthonormalBasis,
}

impl MarkovOp {
    /// Builds from an exact row-major matrix; symmetry and row sums are checked exactly.
    pub fn from_exact(m: usize, entries: Vec<Rational>) -> Result<Self> {
        check_shape(m, entries.len())?;
        if entries.iter().any(|e| *e < Rational::zero()) {
            return Err(invalid_param!("negative transition probability"));
        }
        for x in 0..m {
            for y in 0..x {
                if entries[x * m + y] != entries[y * m + x] {
                    return Err(invalid_param!("matrix is not symmetric at ({x}, {y})"));
                }
            }
            let row: Rational = entries[x * m..(x + 1) * m].iter().sum();
            if !row.is_one() {
                return Err(invalid_param!("row {x} sums to {}", rational::format(row)));
            }
        }
        let matrix = entries.iter().map(|&e| rational::to_f64(e)).collect();
        Self::finish(m, matrix, Some(entries))
    }

    /// Builds from a float matrix; symmetry and row sums are checked to 1e-12.
    pub fn from_f64(m: usize, matrix: Vec<f64>) -> Result<Self> {
        check_shape(m, matrix.len())?;
        if matrix.iter().any(|e| !e.is_finite() || *e < 0.0) {
            return Err(invalid_param!("transition probabilities must be finite and nonnegative"));
        }
        for x in 0..m {
            for y in 0..x {
                if (matrix[x * m + y] - matrix[y * m + x]).abs() > STOCHASTIC_TOL {
                    return Err(invalid_param!("matrix is not symmetric at ({x}, {y})"));
                }
            }
            let row: f64 = matrix[x * m..(x + 1) * m].iter().sum();
            if (row - 1.0).abs() > STOCHASTIC_TOL {
                return Err(invalid_param!("row {x} sums to {row}"));
            }
        }
        Self::finish(m, matrix, None)
    }

    fn finish(m: usize, matrix: Vec<f64>, exact: Option<Vec<Rational>>) -> Result<Self> {
        let (eigenvalues, eigenbasis) = spectrum(m, &matrix)?;
        Ok(Self { m, matrix, exact, eigenvalues, eigenbasis })
    }

    pub fn identity(m: usize) -> Result<Self> {
        let entries = (0..m * m).map(|k| if k / m == k % m { Rational::one() } else { Rational::zero() }).collect();
        Self::from_exact(m, entries)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn entry(&self, x: usize, y: usize) -> f64 {
        self.matrix[x * self.m + y]
    }

    /// Exact entries, when the operator was built from rationals.
    pub fn exact(&self) -> Option<&[Rational]> {
        self.exact.as_deref()
    }

    pub fn exact_entry(&self, x: usize, y: usize) -> Option<Rational> {
        self.exact.as_ref().map(|e| e[x * self.m + y])
    }

    /// `lambda_0 = 1 >= lambda_1 >= .. >= lambda_{m-1}`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenbasis(&self) -> &OrthonormalBasis {
        &self.eigenbasis
    }

    /// `r(T) = max(|lambda_1|, |lambda_{m-1}|)`.
    pub fn spectral_radius(&self) -> f64 {
        let nontrivial = &self.eigenvalues[1..];
        match (nontrivial.first(), nontrivial.last()) {
            (Some(a), Some(b)) => a.abs().max(b.abs()),
            _ => 0.0,
        }
    }

    /// Whether `T(x <-> y) > 0`, decided exactly when rationals are available.
    pub fn in_support(&self, x: usize, y: usize) -> bool {
        match &self.exact {
            Some(e) => e[x * self.m + y] > Rational::zero(),
            None => self.matrix[x * self.m + y] > 0.0,
        }
    }

    /// Row-major support indicator.
    pub fn support(&self) -> Vec<bool> {
        (0..self.m * self.m).map(|k| self.in_support(k / self.m, k % self.m)).collect()
    }

    /// `T^{(x) n}` as an explicit operator on `[m]^n`.
    pub fn tensor_power(&self, n: usize) -> Result<MarkovOp> {
        let size = self
            .m
            .checked_pow(n as u32)
            .filter(|&s| s <= MAX_STATES)
            .ok_or_else(|| Error::SizeLimit(format!("[{}]^{n} exceeds {MAX_STATES} states", self.m)))?;
        let entry = |x: usize, y: usize| {
            let xs = qcube::decode(self.m, n, x);
            let ys = qcube::decode(self.m, n, y);
            (xs, ys)
        };
        match &self.exact {
            Some(e) => {
                let mut out = Vec::with_capacity(size * size);
                for x in 0..size {
                    for y in 0..size {
                        let (xs, ys) = entry(x, y);
                        out.push(xs.iter().zip(&ys).map(|(&a, &b)| e[a * self.m + b]).product());
                    }
                }
                MarkovOp::from_exact(size, out)
            }
            None => {
                let mut out = Vec::with_capacity(size * size);
                for x in 0..size {
                    for y in 0..size {
                        let (xs, ys) = entry(x, y);
                        out.push(xs.iter().zip(&ys).map(|(&a, &b)| self.matrix[a * self.m + b]).product());
                    }
                }
                MarkovOp::from_f64(size, out)
            }
        }
    }
}

fn check_shape(m: usize, len: usize) -> Result<()> {
    if !(2..=MAX_STATES).contains(&m) {
        return Err(invalid_param!("state-space size {m} outside 2..={MAX_STATES}"));
    }
    if len != m * m {
        return Err(invalid_param!("{len} entries for a {m}x{m} matrix"));
    }
    Ok(())
}

/// Eigen-data restricted to the complement of the constants.
///
/// `T` fixes `1` and leaves its orthogonal complement invariant, so the
/// nontrivial eigenpairs come from the `(m-1) x (m-1)` compression of `T`
/// onto the standard basis `alpha_1..alpha_{m-1}`. This keeps `alpha_0 = 1`
/// even when the eigenvalue 1 is repeated.
fn spectrum(m: usize, matrix: &[f64]) -> Result<(Vec<f64>, OrthonormalBasis)> {
    let std = OrthonormalBasis::standard(m)?;
    let k = m - 1;
    let t_alpha: Vec<Vec<f64>> = (1..m)
        .map(|b| {
            let v = std.vector(b);
            (0..m).map(|x| (0..m).map(|y| matrix[x * m + y] * v[y]).sum()).collect()
        })
        .collect();
    let compressed = DMatrix::from_fn(k, k, |a, b| {
        let u = std.vector(a + 1);
        u.iter().zip(&t_alpha[b]).map(|(p, r)| p * r).sum::<f64>() / m as f64
    });
    let sym = (&compressed + compressed.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut eigenvalues = vec![1.0];
    let mut vectors = vec![vec![1.0; m]];
    for &c in &order {
        eigenvalues.push(eig.eigenvalues[c]);
        let mut v = vec![0.0; m];
        for a in 0..k {
            let w = eig.eigenvectors[(a, c)];
            v.iter_mut().zip(std.vector(a + 1)).for_each(|(s, alpha)| *s += w * alpha);
        }
        vectors.push(v);
    }
    let seeds: Vec<Vec<f64>> = vectors[1..].to_vec();
    // Re-orthonormalize to shave the eigen-solver's rounding below the basis tolerance.
    let basis = OrthonormalBasis::from_seed_vectors(m, &seeds)?;
    Ok((eigenvalues, basis))
}

/// Spectral radius `r(T)`.
pub fn spectral_radius(op: &MarkovOp) -> f64 {
    op.spectral_radius()
}

/// Beckner operator `T_rho` on `[q]`.
pub fn beckner(q: usize, rho: f64) -> Result<MarkovOp> {
    if q < 2 {
        return Err(invalid_param!("alphabet size q = {q} must be at least 2"));
    }
    if !(-1.0..=1.0).contains(&rho) {
        return Err(invalid_param!("rho = {rho} outside [-1, 1]"));
    }
    let qi = q as i64;
    match rational::exact_from_f64(rho) {
        Some(r) => {
            let diag = ratio(1, qi) + (Rational::one() - ratio(1, qi)) * r;
            let off = ratio(1, qi) * (Rational::one() - r);
            MarkovOp::from_exact(q, (0..q * q).map(|k| if k / q == k % q { diag } else { off }).collect())
        }
        None => {
            let qf = q as f64;
            let diag = 1.0 / qf + (1.0 - 1.0 / qf) * rho;
            let off = (1.0 - rho) / qf;
            MarkovOp::from_f64(q, (0..q * q).map(|k| if k / q == k % q { diag } else { off }).collect())
        }
    }
}

/// The three gadget operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GadgetKind {
    /// On `[3]`, zero diagonal.
    Almost3,
    /// On `[4]^2`, support on pairs with disjoint symbol sets.
    Col4,
    /// On `[3]^2`, `x_1 not in {y_1, y_2}` and `y_1 not in {x_1, x_2}`.
    Alpha,
}

impl std::str::FromStr for GadgetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "almost3" => Ok(Self::Almost3),
            "col4" => Ok(Self::Col4),
            "alpha" | "col3" => Ok(Self::Alpha),
            other => Err(invalid_param!("unknown gadget {other:?}")),
        }
    }
}

/// Transition weights `beta_1, beta_2, beta_3` of the pair gadgets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GadgetWeights {
    pub beta1: Rational,
    pub beta2: Rational,
    pub beta3: Rational,
}

impl GadgetKind {
    /// Symbols per coordinate of the underlying hypercube.
    pub fn base_alphabet(self) -> usize {
        match self {
            Self::Almost3 | Self::Alpha => 3,
            Self::Col4 => 4,
        }
    }

    /// States of the operator: `q` for almost3, `q^2` for the pair gadgets.
    pub fn states(self) -> usize {
        match self {
            Self::Almost3 => 3,
            Self::Col4 => 16,
            Self::Alpha => 9,
        }
    }

    /// Weights used by [`gadget_operator`]: col4 `(1/12, 1/8, 3/8)`, alpha `(0, 1/2, 1/2)`.
    pub fn default_weights(self) -> Option<GadgetWeights> {
        match self {
            Self::Almost3 => None,
            Self::Col4 => Some(GadgetWeights { beta1: ratio(1, 12), beta2: ratio(1, 8), beta3: ratio(3, 8) }),
            Self::Alpha => Some(GadgetWeights { beta1: ratio(0, 1), beta2: ratio(1, 2), beta3: ratio(1, 2) }),
        }
    }

    /// Exact check of the weight equations.
    ///
    /// col4: `3 b1 + 6 b2 = 1`, `2 b2 + 2 b3 = 1`.
    /// alpha: `2 b1 + 2 b2 = 1`, `b2 + b3 = 1`, `b1/3 + 2 b2/3 = 2 b3/3`.
    pub fn check_weights(self, w: &GadgetWeights) -> Result<()> {
        let one = Rational::one();
        let zero = Rational::zero();
        if w.beta1 < zero || w.beta2 < zero || w.beta3 < zero {
            return Err(invalid_param!("gadget weights must be nonnegative"));
        }
        let two = ratio(2, 1);
        let ok = match self {
            Self::Almost3 => return Err(invalid_param!("almost3 has no free weights")),
            Self::Col4 => ratio(3, 1) * w.beta1 + ratio(6, 1) * w.beta2 == one && two * w.beta2 + two * w.beta3 == one,
            Self::Alpha => {
                two * w.beta1 + two * w.beta2 == one
                    && w.beta2 + w.beta3 == one
                    && w.beta1 / 3 + two * w.beta2 / 3 == two * w.beta3 / 3
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invalid_param!("weights violate the {self:?} row-sum equations"))
        }
    }
}

/// Which weight (1, 2 or 3) a pair transition carries, or `None` outside the pattern set.
fn pair_pattern(kind: GadgetKind, x: (usize, usize), y: (usize, usize)) -> Option<usize> {
    let distinct3 = |a: usize, b: usize, c: usize| a != b && b != c && a != c;
    let (x1, x2) = x;
    let (y1, y2) = y;
    let xd = x1 == x2;
    let yd = y1 == y2;
    if xd && yd {
        return (x1 != y1).then_some(1);
    }
    if xd {
        return distinct3(x1, y1, y2).then_some(2);
    }
    if yd {
        return distinct3(y1, x1, x2).then_some(2);
    }
    match kind {
        GadgetKind::Col4 => (distinct3(x1, x2, y1) && distinct3(x1, x2, y2) && y1 != y2).then_some(3),
        GadgetKind::Alpha => (x2 == y2 && distinct3(x1, x2, y1)).then_some(3),
        GadgetKind::Almost3 => None,
    }
}

/// Per-row pattern counts `(from (x,x), from (x,y))`, each as `[n1, n2, n3]`.
fn expected_multiplicities(kind: GadgetKind) -> ([usize; 3], [usize; 3]) {
    match kind {
        GadgetKind::Col4 => ([3, 6, 0], [0, 2, 2]),
        GadgetKind::Alpha => ([2, 2, 0], [0, 1, 1]),
        GadgetKind::Almost3 => unreachable!(),
    }
}

/// Gadget operator with the default weights.
pub fn gadget_operator(kind: GadgetKind) -> MarkovOp {
    match kind.default_weights() {
        None => almost3_operator(),
        Some(w) => gadget_operator_with_weights(kind, &w).expect("default gadget weights are valid"),
    }
}

fn almost3_operator() -> MarkovOp {
    let half = ratio(1, 2);
    let entries = (0..9).map(|k| if k / 3 == k % 3 { Rational::zero() } else { half }).collect();
    MarkovOp::from_exact(3, entries).expect("almost3 operator is symmetric stochastic")
}

/// Pair gadget operator from explicit weights satisfying the row-sum equations.
pub fn gadget_operator_with_weights(kind: GadgetKind, w: &GadgetWeights) -> Result<MarkovOp> {
    kind.check_weights(w)?;
    let q = kind.base_alphabet();
    let m = q * q;
    let betas = [w.beta1, w.beta2, w.beta3];
    let (diag_counts, off_counts) = expected_multiplicities(kind);
    let mut entries = vec![Rational::zero(); m * m];
    for xs in 0..m {
        let x = (xs / q, xs % q);
        let mut counts = [0usize; 3];
        for ys in 0..m {
            if let Some(p) = pair_pattern(kind, x, (ys / q, ys % q)) {
                counts[p - 1] += 1;
                entries[xs * m + ys] = betas[p - 1];
            }
        }
        let want = if x.0 == x.1 { diag_counts } else { off_counts };
        assert_eq!(counts, want, "{kind:?} pattern multiplicities from state {x:?}");
    }
    MarkovOp::from_exact(m, entries)
}

/// `T^{(x) n} f`, one coordinate at a time: `(T f)(x) = sum_y T(x -> y) f(y)`.
pub fn apply_tensor(op: &MarkovOp, f: &QFunction) -> Result<QFunction> {
    if op.m != f.q() {
        return Err(invalid_param!("operator on [{}] applied to a function over [{}]", op.m, f.q()));
    }
    QFunction::new(f.q(), f.n(), mix_coordinates(f.values(), f.q(), f.n(), 1..=f.n(), &op.matrix))
}

/// Eigenvalue of `alpha_x` under `T^{(x) n}`: `prod_j lambda_{x_j}`.
fn eigen_multiplier(op: &MarkovOp, n: usize, idx: usize) -> f64 {
    let mut prod = 1.0;
    let mut rest = idx;
    for _ in 0..n {
        prod *= op.eigenvalues[rest % op.m];
        rest /= op.m;
    }
    prod
}

/// `T^{(x) n} f = sum_x (prod_a lambda_a^{|x|_a}) f^(alpha_x) alpha_x` in the eigenbasis of `T`.
pub fn apply_tensor_eigen(op: &MarkovOp, f: &QFunction) -> Result<QFunction> {
    if op.m != f.q() {
        return Err(invalid_param!("operator on [{}] applied to a function over [{}]", op.m, f.q()));
    }
    let table = transform(f, &op.eigenbasis)?;
    let scaled: Vec<f64> =
        table.coeffs().iter().enumerate().map(|(idx, c)| c * eigen_multiplier(op, f.n(), idx)).collect();
    let values = mix_coordinates(&scaled, f.q(), f.n(), 1..=f.n(), &synthesis(&op.eigenbasis));
    QFunction::new(f.q(), f.n(), values)
}

fn synthesis(basis: &OrthonormalBasis) -> Vec<f64> {
    let q = basis.q();
    (0..q * q).map(|k| basis.vector(k % q)[k / q]).collect()
}

/// `<f, T^{(x) n} g>` under the uniform measure.
pub fn noisy_inner(f: &QFunction, op: &MarkovOp, g: &QFunction) -> Result<f64> {
    f.check_same_space(g)?;
    f.inner(&apply_tensor(op, g)?)
}

/// `sum_x (prod_a lambda_a^{|x|_a}) f^(alpha_x) g^(alpha_x)` in the eigenbasis of `T`.
pub fn noisy_inner_spectral(f: &QFunction, op: &MarkovOp, g: &QFunction) -> Result<f64> {
    f.check_same_space(g)?;
    let tf = transform(f, &op.eigenbasis)?;
    let tg = transform(g, &op.eigenbasis)?;
    Ok(tf
        .coeffs()
        .iter()
        .zip(tg.coeffs())
        .enumerate()
        .map(|(idx, (a, b))| eigen_multiplier(op, f.n(), idx) * a * b)
        .sum())
}

/// `A_S f = E_{x_S}[f]`; `coords` are 1-based and may be empty.
pub fn average_over(f: &QFunction, coords: &[usize]) -> Result<QFunction> {
    let mut set: Vec<usize> = coords.to_vec();
    set.sort_unstable();
    set.dedup();
    for &i in &set {
        f.check_coord(i)?;
    }
    let q = f.q();
    let uniform = vec![1.0 / q as f64; q * q];
    QFunction::new(q, f.n(), mix_coordinates(f.values(), q, f.n(), set, &uniform))
}

/// Distribution of `(x_2, y_2)` when `(x_1, x_2)` is uniform on `[q]^2` and `(y_1, y_2) ~ T`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMarginal {
    pub q: usize,
    /// Row-major `q x q`, exact when the operator is.
    pub exact: Option<Vec<Rational>>,
    pub probs: Vec<f64>,
}

impl PairMarginal {
    /// Exactly uniform when rationals are available, otherwise within 1e-12.
    pub fn is_uniform(&self) -> bool {
        let cell = ratio(1, (self.q * self.q) as i64);
        match &self.exact {
            Some(e) => e.iter().all(|&p| p == cell),
            None => self.probs.iter().all(|p| (p - rational::to_f64(cell)).abs() <= 1e-12),
        }
    }
}

pub fn pair_marginal_distribution(op: &MarkovOp) -> Result<PairMarginal> {
    let q = (op.m as f64).sqrt().round() as usize;
    if q < 2 || q * q != op.m {
        return Err(invalid_param!("operator on [{}] does not act on a square alphabet", op.m));
    }
    let m = op.m;
    let weight = ratio(1, m as i64);
    let exact = op.exact.as_ref().map(|e| {
        let mut table = vec![Rational::zero(); q * q];
        for xs in 0..m {
            for ys in 0..m {
                table[(xs % q) * q + ys % q] += weight * e[xs * m + ys];
            }
        }
        table
    });
    let mut probs = vec![0.0; q * q];
    for xs in 0..m {
        for ys in 0..m {
            probs[(xs % q) * q + ys % q] += op.matrix[xs * m + ys] / m as f64;
        }
    }
    Ok(PairMarginal { q, exact, probs })
}

#[derive(Serialize, Deserialize)]
struct MarkovOpRepr {
    m: usize,
    matrix: Vec<Vec<String>>,
}

impl Serialize for MarkovOp {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let m = self.m;
        let matrix = (0..m)
            .map(|x| {
                (0..m)
                    .map(|y| match &self.exact {
                        Some(e) => rational::format(e[x * m + y]),
                        None => format!("{:?}", self.matrix[x * m + y]),
                    })
                    .collect()
            })
            .collect();
        MarkovOpRepr { m, matrix }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MarkovOp {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = MarkovOpRepr::deserialize(d)?;
        if repr.matrix.len() != repr.m || repr.matrix.iter().any(|r| r.len() != repr.m) {
            return Err(de::Error::custom(format!("matrix must be {0}x{0}", repr.m)));
        }
        let cells: Vec<&String> = repr.matrix.iter().flatten().collect();
        let exact: Option<Vec<Rational>> = cells.iter().map(|c| rational::parse(c).ok()).collect();
        let built = match exact {
            Some(e) => MarkovOp::from_exact(repr.m, e),
            None => cells
                .iter()
                .map(|c| c.trim().parse::<f64>().map_err(|_| invalid_param!("bad matrix entry {c:?}")))
                .collect::<Result<Vec<f64>>>()
                .and_then(|v| MarkovOp::from_f64(repr.m, v)),
        };
        built.map_err(de::Error::custom)
    }
}
