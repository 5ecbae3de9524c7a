//! Real-valued functions on the q-ary hypercube `[q]^n`.
//!
//! A point `x = (x_1, .., x_n)` is stored at table index `sum_j x_j * q^(n-j)`,
//! so coordinate 1 is the most significant digit. Coordinates are 1-based in
//! every public function; symbols are `0..q`.
//!
//! Fourier coefficients are taken with respect to an [`OrthonormalBasis`]
//! `alpha_0 = 1, alpha_1, .., alpha_{q-1}` of `R^q` under the uniform measure,
//! and `alpha_x = alpha_{x_1} (x) .. (x) alpha_{x_n}`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Error, Result};

/// Largest table stored densely: `q^n <= 2^24`.
pub const MAX_TABLE_LEN: usize = 1 << 24;

const BASIS_TOL: f64 = 1e-12;

/// Number of points in `[q]^n`, refusing tables beyond [`MAX_TABLE_LEN`].
pub fn table_len(q: usize, n: usize) -> Result<usize> {
    if q < 2 {
        return Err(invalid_param!("alphabet size q = {q} must be at least 2"));
    }
    let mut len = 1usize;
    for _ in 0..n {
        len = len
            .checked_mul(q)
            .filter(|&l| l <= MAX_TABLE_LEN)
            .ok_or_else(|| Error::SizeLimit(format!("[{q}]^{n} exceeds {MAX_TABLE_LEN} points")))?;
    }
    Ok(len)
}

/// Table index of the point `x`.
pub fn encode(q: usize, x: &[usize]) -> usize {
    x.iter().fold(0, |acc, &s| acc * q + s)
}

/// Writes the point at table index `idx` into `out` (its length is the dimension).
pub fn decode_into(q: usize, mut idx: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = idx % q;
        idx /= q;
    }
}

pub fn decode(q: usize, n: usize, idx: usize) -> Vec<usize> {
    let mut x = vec![0; n];
    decode_into(q, idx, &mut x);
    x
}

/// Number of nonzero digits of a table index, i.e. `|x|`.
pub fn weight(q: usize, mut idx: usize) -> usize {
    let mut w = 0;
    while idx > 0 {
        if idx % q != 0 {
            w += 1;
        }
        idx /= q;
    }
    w
}

/// Digit of coordinate `coord` (1-based) in a table index over `[q]^n`.
pub fn digit(q: usize, n: usize, idx: usize, coord: usize) -> usize {
    (idx / q.pow((n - coord) as u32)) % q
}

/// Applies a `q x q` matrix along one coordinate:
/// `out[.., a, ..] = sum_b matrix[a * q + b] * input[.., b, ..]`.
pub(crate) fn mix_coordinate(input: &[f64], q: usize, n: usize, coord: usize, matrix: &[f64], out: &mut [f64]) {
    let stride = q.pow((n - coord) as u32);
    let block = stride * q;
    for start in (0..input.len()).step_by(block) {
        for r in 0..stride {
            for a in 0..q {
                let row = &matrix[a * q..(a + 1) * q];
                let mut acc = 0.0;
                for (b, &m) in row.iter().enumerate() {
                    acc += m * input[start + b * stride + r];
                }
                out[start + a * stride + r] = acc;
            }
        }
    }
}

/// Applies the same matrix along every coordinate in `coords`.
pub(crate) fn mix_coordinates(values: &[f64], q: usize, n: usize, coords: impl IntoIterator<Item = usize>, matrix: &[f64]) -> Vec<f64> {
    let mut cur = values.to_vec();
    let mut scratch = vec![0.0; values.len()];
    for coord in coords {
        mix_coordinate(&cur, q, n, coord, matrix, &mut scratch);
        std::mem::swap(&mut cur, &mut scratch);
    }
    cur
}

#[derive(Deserialize)]
struct QFunctionRepr {
    q: usize,
    n: usize,
    values: Vec<f64>,
}

impl TryFrom<QFunctionRepr> for QFunction {
    type Error = Error;

    fn try_from(r: QFunctionRepr) -> Result<Self> {
        QFunction::new(r.q, r.n, r.values)
    }
}

/// A function `[q]^n -> R` stored as a dense table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QFunctionRepr")]
pub struct QFunction {
    q: usize,
    n: usize,
    values: Vec<f64>,
}

impl QFunction {
    pub fn new(q: usize, n: usize, values: Vec<f64>) -> Result<Self> {
        let len = table_len(q, n)?;
        if values.len() != len {
            return Err(invalid_param!("table has {} values, [{q}]^{n} needs {len}", values.len()));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid_param!("non-finite value at index {pos}"));
        }
        Ok(Self { q, n, values })
    }

    pub fn constant(q: usize, n: usize, c: f64) -> Result<Self> {
        Self::new(q, n, vec![c; table_len(q, n)?])
    }

    /// Tabulates `f` over all points in index order.
    pub fn from_fn(q: usize, n: usize, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let len = table_len(q, n)?;
        let mut x = vec![0; n];
        let values = (0..len)
            .map(|idx| {
                decode_into(q, idx, &mut x);
                f(&x)
            })
            .collect();
        Self::new(q, n, values)
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, x: &[usize]) -> f64 {
        self.values[encode(self.q, x)]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    /// `<f, g> = q^-n sum_x f(x) g(x)`.
    pub fn inner(&self, other: &QFunction) -> Result<f64> {
        self.check_same_space(other)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        Ok(s / self.len() as f64)
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() / self.len() as f64
    }

    /// True when every value lies in `[0, 1]`.
    pub fn is_unit_valued(&self) -> bool {
        self.values.iter().all(|v| (0.0..=1.0).contains(v))
    }

    pub(crate) fn check_same_space(&self, other: &QFunction) -> Result<()> {
        if self.q != other.q || self.n != other.n {
            return Err(invalid_param!(
                "functions live on [{}]^{} and [{}]^{}",
                self.q,
                self.n,
                other.q,
                other.n
            ));
        }
        Ok(())
    }

    pub(crate) fn check_coord(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.n {
            return Err(invalid_param!("coordinate {i} outside 1..={}", self.n));
        }
        Ok(())
    }

    /// `1 - f`.
    pub fn complement(&self) -> QFunction {
        QFunction { q: self.q, n: self.n, values: self.values.iter().map(|v| 1.0 - v).collect() }
    }

    /// The function `h` with `h(x^pi) = f(x)`, where `x^pi = (x_{pi(1)}, .., x_{pi(n)})`
    /// and `perm[i - 1] = pi(i)` is a permutation of `1..=n`.
    ///
    /// Coordinate `i` of `h` is coordinate `pi(i)` of `f`.
    pub fn permute_coords(&self, perm: &[usize]) -> Result<QFunction> {
        check_permutation(perm, self.n)?;
        let mut x = vec![0; self.n];
        let mut z = vec![0; self.n];
        let mut out = vec![0.0; self.len()];
        for (idx, &v) in self.values.iter().enumerate() {
            decode_into(self.q, idx, &mut x);
            for (zi, &p) in z.iter_mut().zip(perm) {
                *zi = x[p - 1];
            }
            out[encode(self.q, &z)] = v;
        }
        QFunction::new(self.q, self.n, out)
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(invalid_param!("permutation has length {}, expected {n}", perm.len()));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p == 0 || p > n || std::mem::replace(&mut seen[p - 1], true) {
            return Err(invalid_param!("{perm:?} is not a permutation of 1..={n}"));
        }
    }
    Ok(())
}

/// Orthonormal basis `alpha_0 = 1, .., alpha_{q-1}` of functions `[q] -> R`
/// under the uniform inner product `<u, v> = q^-1 sum_s u(s) v(s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthonormalBasis {
    q: usize,
    /// `vectors[a][s] = alpha_a(s)`.
    vectors: Vec<Vec<f64>>,
}

fn uniform_dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / u.len() as f64
}

impl OrthonormalBasis {
    /// Gram-Schmidt on `1, e_1, .., e_{q-1}` in that order.
    pub fn standard(q: usize) -> Result<Self> {
        if q < 2 {
            return Err(invalid_param!("alphabet size q = {q} must be at least 2"));
        }
        let seeds: Vec<Vec<f64>> = (1..q)
            .map(|j| (0..q).map(|s| if s == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::from_seed_vectors(q, &seeds)
    }

    /// Gram-Schmidt on the constant vector followed by `seeds` (q - 1 vectors).
    pub fn from_seed_vectors(q: usize, seeds: &[Vec<f64>]) -> Result<Self> {
        if q < 2 {
            return Err(invalid_param!("alphabet size q = {q} must be at least 2"));
        }
        if seeds.len() != q - 1 || seeds.iter().any(|s| s.len() != q) {
            return Err(invalid_param!("need {} seed vectors of length {q}", q - 1));
        }
        let mut vectors = vec![vec![1.0; q]];
        for seed in seeds {
            let mut v = seed.clone();
            // Two passes keep the result orthogonal to 1e-15 even for nearly dependent seeds.
            for _ in 0..2 {
                for prev in &vectors {
                    let c = uniform_dot(&v, prev);
                    v.iter_mut().zip(prev).for_each(|(a, b)| *a -= c * b);
                }
            }
            let norm = uniform_dot(&v, &v).sqrt();
            if norm < 1e-9 {
                return Err(invalid_param!("seed vectors are linearly dependent"));
            }
            v.iter_mut().for_each(|a| *a /= norm);
            vectors.push(v);
        }
        Self::from_vectors(vectors)
    }

    /// Validates a user-supplied basis: `alpha_0 = 1` and orthonormal within 1e-12.
    pub fn from_vectors(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let q = vectors.len();
        if q < 2 || vectors.iter().any(|v| v.len() != q) {
            return Err(invalid_param!("basis must consist of q >= 2 vectors of length q"));
        }
        if vectors[0].iter().any(|&c| (c - 1.0).abs() > BASIS_TOL) {
            return Err(invalid_param!("alpha_0 must be the all-ones vector"));
        }
        let basis = Self { q, vectors };
        let gram = basis.gram();
        for a in 0..q {
            for b in 0..q {
                let want = if a == b { 1.0 } else { 0.0 };
                if (gram[a * q + b] - want).abs() > BASIS_TOL {
                    return Err(invalid_param!("basis is not orthonormal at ({a}, {b})"));
                }
            }
        }
        Ok(basis)
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn vector(&self, a: usize) -> &[f64] {
        &self.vectors[a]
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// Gram matrix `<alpha_a, alpha_b>` in row-major order.
    pub fn gram(&self) -> Vec<f64> {
        let q = self.q;
        let mut g = vec![0.0; q * q];
        for a in 0..q {
            for b in 0..q {
                g[a * q + b] = uniform_dot(&self.vectors[a], &self.vectors[b]);
            }
        }
        g
    }

    /// Row `a`, column `s`: `alpha_a(s) / q` (one coordinate of the forward transform).
    fn analysis_matrix(&self) -> Vec<f64> {
        let q = self.q as f64;
        self.vectors.iter().flat_map(|v| v.iter().map(move |c| c / q)).collect()
    }

    /// Row `s`, column `a`: `alpha_a(s)` (one coordinate of the inverse transform).
    fn synthesis_matrix(&self) -> Vec<f64> {
        let q = self.q;
        (0..q * q).map(|k| self.vectors[k % q][k / q]).collect()
    }
}

/// Standard basis for `[q]`.
pub fn build_basis(q: usize) -> Result<OrthonormalBasis> {
    OrthonormalBasis::standard(q)
}

/// Fourier coefficients `f^(alpha_x) = <f, alpha_x>` in table order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierTable {
    q: usize,
    n: usize,
    coeffs: Vec<f64>,
    basis: OrthonormalBasis,
}

impl FourierTable {
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn basis(&self) -> &OrthonormalBasis {
        &self.basis
    }

    pub fn coeff(&self, x: &[usize]) -> f64 {
        self.coeffs[encode(self.q, x)]
    }

    /// `sum_x f^(alpha_x)^2`.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// `sum_{x : x_i != 0, |x| <= k} f^(alpha_x)^2`.
    pub fn low_level_influence(&self, i: usize, k: usize) -> Result<f64> {
        if i == 0 || i > self.n {
            return Err(invalid_param!("coordinate {i} outside 1..={}", self.n));
        }
        Ok(self
            .coeffs
            .iter()
            .enumerate()
            .filter(|&(idx, _)| digit(self.q, self.n, idx, i) != 0 && weight(self.q, idx) <= k)
            .map(|(_, c)| c * c)
            .sum())
    }

    /// `sum_{x : x_i != 0} f^(alpha_x)^2`.
    pub fn influence(&self, i: usize) -> Result<f64> {
        self.low_level_influence(i, self.n)
    }

    /// `I_i^{<=k}` for every coordinate `i = 1..=n`.
    pub fn low_level_influences(&self, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        let mut x = vec![0; self.n];
        for (idx, c) in self.coeffs.iter().enumerate() {
            if weight(self.q, idx) > k || *c == 0.0 {
                continue;
            }
            decode_into(self.q, idx, &mut x);
            for (slot, &s) in out.iter_mut().zip(&x) {
                if s != 0 {
                    *slot += c * c;
                }
            }
        }
        out
    }

    pub fn inverse(&self) -> QFunction {
        inverse_transform(self)
    }
}

/// Forward transform, one q-point pass per coordinate: `O(n q^(n+1))`.
pub fn transform(f: &QFunction, basis: &OrthonormalBasis) -> Result<FourierTable> {
    if basis.q != f.q {
        return Err(invalid_param!("basis over [{}] applied to a function over [{}]", basis.q, f.q));
    }
    let coeffs = mix_coordinates(&f.values, f.q, f.n, 1..=f.n, &basis.analysis_matrix());
    Ok(FourierTable { q: f.q, n: f.n, coeffs, basis: basis.clone() })
}

/// `f = sum_x f^(alpha_x) alpha_x`.
pub fn inverse_transform(table: &FourierTable) -> QFunction {
    let values = mix_coordinates(&table.coeffs, table.q, table.n, 1..=table.n, &table.basis.synthesis_matrix());
    QFunction { q: table.q, n: table.n, values }
}

/// `I_i(f) = E[ Var_{x_i}[ f | other coordinates ] ]`, straight from the value table.
pub fn influence(f: &QFunction, i: usize) -> Result<f64> {
    f.check_coord(i)?;
    let q = f.q;
    let stride = q.pow((f.n - i) as u32);
    let block = stride * q;
    let mut total = 0.0;
    for start in (0..f.len()).step_by(block) {
        for r in 0..stride {
            let fiber = (0..q).map(|s| f.values[start + s * stride + r]);
            let mean = fiber.clone().sum::<f64>() / q as f64;
            total += fiber.map(|v| (v - mean) * (v - mean)).sum::<f64>() / q as f64;
        }
    }
    Ok(total / (f.len() / q) as f64)
}

/// `I_i^{<=k}(f)` in the standard basis (the value does not depend on the basis).
pub fn low_level_influence(f: &QFunction, i: usize, k: usize) -> Result<f64> {
    f.check_coord(i)?;
    transform(f, &build_basis(f.q)?)?.low_level_influence(i, k)
}

/// `[[f]]` on `[q^2]^(n/2)`: pairs `(x_{2i-1}, x_{2i})` become the symbol `x_{2i-1} * q + x_{2i}`.
///
/// With that pair encoding the table index is unchanged, so only the shape changes.
pub fn bunch_fn(f: &QFunction) -> Result<QFunction> {
    if f.n % 2 != 0 {
        return Err(invalid_param!("bunching needs an even dimension, got n = {}", f.n));
    }
    QFunction::new(f.q * f.q, f.n / 2, f.values.clone())
}

/// Inverse of [`bunch_fn`]; `f.q` must be a perfect square.
pub fn unbunch_fn(f: &QFunction) -> Result<QFunction> {
    let base = (f.q as f64).sqrt().round() as usize;
    if base * base != f.q || base < 2 {
        return Err(invalid_param!("alphabet size {} is not the square of an integer >= 2", f.q));
    }
    QFunction::new(base, f.n * 2, f.values.clone())
}

/// Test-function families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamedKind {
    Dictator,
    Plurality,
    ThresholdIndicator,
}

impl std::str::FromStr for NamedKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dictator" => Ok(Self::Dictator),
            "plurality" => Ok(Self::Plurality),
            "threshold-indicator" | "threshold" => Ok(Self::ThresholdIndicator),
            other => Err(invalid_param!("unknown function kind {other:?}")),
        }
    }
}

/// Builds a named test function.
///
/// * `dictator`: `1{x_i = a}` (needs `i` and `a`).
/// * `plurality`: the most frequent symbol, ties broken toward the smallest symbol.
/// * `threshold-indicator`: `1{|x|_a >= i}`, i.e. at least `i` coordinates equal `a` (needs both).
pub fn named_function(kind: NamedKind, q: usize, n: usize, i: Option<usize>, a: Option<usize>) -> Result<QFunction> {
    let need_symbol = |a: Option<usize>| {
        let a = a.ok_or_else(|| invalid_param!("{kind:?} needs a symbol a"))?;
        if a >= q {
            return Err(invalid_param!("symbol {a} outside 0..{q}"));
        }
        Ok(a)
    };
    match kind {
        NamedKind::Dictator => {
            let i = i.ok_or_else(|| invalid_param!("dictator needs a coordinate i"))?;
            if i == 0 || i > n {
                return Err(invalid_param!("coordinate {i} outside 1..={n}"));
            }
            let a = need_symbol(a)?;
            QFunction::from_fn(q, n, |x| f64::from(u8::from(x[i - 1] == a)))
        }
        NamedKind::Plurality => {
            let mut counts = vec![0usize; q];
            QFunction::from_fn(q, n, |x| {
                counts.iter_mut().for_each(|c| *c = 0);
                x.iter().for_each(|&s| counts[s] += 1);
                // max_by_key keeps the last maximum; scan in reverse so the smallest symbol wins.
                (0..q).rev().max_by_key(|&s| counts[s]).unwrap_or(0) as f64
            })
        }
        NamedKind::ThresholdIndicator => {
            let t = i.ok_or_else(|| invalid_param!("threshold-indicator needs a count i"))?;
            let a = need_symbol(a)?;
            QFunction::from_fn(q, n, |x| f64::from(u8::from(x.iter().filter(|&&s| s == a).count() >= t)))
        }
    }
}
