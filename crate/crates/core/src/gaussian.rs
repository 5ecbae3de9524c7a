//! Gaussian noise stability.
//!
//! `Lambda(rho, mu, nu) = <F_mu, U_rho F_nu>_gamma = P[X < t_mu, Y < t_nu]` for a
//! standard bivariate normal pair with correlation `rho`, where `F_mu = 1{x < t_mu}`
//! has Gaussian mass `mu`. The orthant probability uses the Drezner-Wesolowsky
//! integral with Genz's refinements for `|rho|` close to one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{invalid_param, Result};
use crate::operators::{apply_tensor, noisy_inner, pair_marginal_distribution, MarkovOp};
use crate::qcube::{bunch_fn, build_basis, transform, OrthonormalBasis, QFunction};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / TWO_PI.sqrt()
}

/// `t = Phi^-1(mu)`, polished with Newton steps to `|Phi(t) - mu| <= 1e-12`.
pub fn threshold_for(mu: f64) -> Result<f64> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(invalid_param!("mass mu = {mu} outside (0, 1)"));
    }
    let mut t = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * mu);
    for _ in 0..3 {
        let density = normal_pdf(t);
        if density == 0.0 {
            break;
        }
        let step = (normal_cdf(t) - mu) / density;
        if !step.is_finite() {
            break;
        }
        t -= step;
    }
    Ok(t)
}

// Gauss-Legendre (weight, negative abscissa) pairs for 6, 12 and 20 points;
// each table lists one half of the symmetric rule.
const GL6: [(f64, f64); 3] = [
    (0.171_324_492_379_170_5, -0.932_469_514_203_152_2),
    (0.360_761_573_048_138_4, -0.661_209_386_466_264_7),
    (0.467_913_934_572_690_4, -0.238_619_186_083_197_0),
];
const GL12: [(f64, f64); 6] = [
    (0.047_175_336_386_511_77, -0.981_560_634_246_719_1),
    (0.106_939_325_995_318_3, -0.904_117_256_370_475_0),
    (0.160_078_328_543_346_4, -0.769_902_674_194_305_0),
    (0.203_167_426_723_065_9, -0.587_317_954_286_617_1),
    (0.233_492_536_538_354_7, -0.367_831_498_998_180_2),
    (0.249_147_045_813_402_9, -0.125_233_408_511_469_2),
];
const GL20: [(f64, f64); 10] = [
    (0.017_614_007_139_152_12, -0.993_128_599_185_094_9),
    (0.040_601_429_800_386_94, -0.963_971_927_277_913_8),
    (0.062_672_048_334_109_06, -0.912_234_428_251_325_9),
    (0.083_276_741_576_704_75, -0.839_116_971_822_218_8),
    (0.101_930_119_817_240_4, -0.746_331_906_460_150_8),
    (0.118_194_531_961_518_4, -0.636_053_680_726_515_0),
    (0.131_688_638_449_176_6, -0.510_867_001_950_827_1),
    (0.142_096_109_318_382_1, -0.373_706_088_715_419_6),
    (0.149_172_986_472_603_7, -0.227_785_851_141_645_1),
    (0.152_753_387_130_725_9, -0.076_526_521_133_497_33),
];

/// `P[X > dh, Y > dk]` for a standard bivariate normal pair with correlation `r`, `|r| < 1`.
fn upper_orthant(dh: f64, dk: f64, r: f64) -> f64 {
    let rule: &[(f64, f64)] = if r.abs() < 0.3 {
        &GL6
    } else if r.abs() < 0.75 {
        &GL12
    } else {
        &GL20
    };
    let h = dh;
    let mut k = dk;
    let mut hk = h * k;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin();
        let mut bvn = 0.0;
        for &(w, x) in rule {
            for sign in [1.0, -1.0] {
                let sn = (asr * (sign * x + 1.0) / 2.0).sin();
                bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        return bvn * asr / (2.0 * TWO_PI) + normal_cdf(-h) * normal_cdf(-k);
    }
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    let mut bvn = 0.0;
    let a_sq = (1.0 - r) * (1.0 + r);
    let mut a = a_sq.sqrt();
    let b_sq = (h - k) * (h - k);
    let c = (4.0 - hk) / 8.0;
    let d = (12.0 - hk) / 16.0;
    let asr = -(b_sq / a_sq + hk) / 2.0;
    if asr > -100.0 {
        bvn = a * asr.exp() * (1.0 - c * (b_sq - a_sq) * (1.0 - d * b_sq / 5.0) / 3.0 + c * d * a_sq * a_sq / 5.0);
    }
    if hk > -160.0 {
        let b = b_sq.sqrt();
        bvn -= (-hk / 2.0).exp() * TWO_PI.sqrt() * normal_cdf(-b / a) * b * (1.0 - c * b_sq * (1.0 - d * b_sq / 5.0) / 3.0);
    }
    a /= 2.0;
    for &(w, x) in rule {
        for sign in [1.0, -1.0] {
            let xs = (a * (sign * x + 1.0)).powi(2);
            let rs = (1.0 - xs).sqrt();
            let asr = -(b_sq / xs + hk) / 2.0;
            if asr > -100.0 {
                bvn += a * w * asr.exp() * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs - (1.0 + c * xs * (1.0 + d * xs)));
            }
        }
    }
    bvn = -bvn / TWO_PI;
    if r > 0.0 {
        bvn + normal_cdf(-h.max(k))
    } else {
        -bvn + (normal_cdf(-h) - normal_cdf(-k)).max(0.0)
    }
}

/// `P[X < h, Y < k]` with correlation `rho`, exact limits at `rho = +-1`.
pub fn bivariate_normal_cdf(h: f64, k: f64, rho: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(invalid_param!("correlation {rho} outside [-1, 1]"));
    }
    let p = if rho == 1.0 {
        normal_cdf(h.min(k))
    } else if rho == -1.0 {
        (normal_cdf(h) - normal_cdf(-k)).max(0.0)
    } else {
        upper_orthant(-h, -k, rho)
    };
    Ok(p.clamp(0.0, 1.0))
}

/// Parameters of a Gaussian stability query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityQuery {
    pub rho: f64,
    pub mu: f64,
    pub nu: f64,
}

impl StabilityQuery {
    pub fn new(rho: f64, mu: f64, nu: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&rho) {
            return Err(invalid_param!("rho = {rho} outside [-1, 1]"));
        }
        for (name, m) in [("mu", mu), ("nu", nu)] {
            if !(m > 0.0 && m < 1.0) {
                return Err(invalid_param!("{name} = {m} outside (0, 1)"));
            }
        }
        Ok(Self { rho, mu, nu })
    }
}

/// `<F_mu, U_rho F_nu>_gamma`.
pub fn lambda_gauss(query: StabilityQuery) -> Result<f64> {
    let StabilityQuery { rho, mu, nu } = StabilityQuery::new(query.rho, query.mu, query.nu)?;
    if rho == 1.0 {
        return Ok(mu.min(nu));
    }
    if rho == -1.0 {
        return Ok((mu + nu - 1.0).max(0.0));
    }
    bivariate_normal_cdf(threshold_for(mu)?, threshold_for(nu)?, rho)
}

/// [`lambda_gauss`] extended to masses in `[0, 1]` (`F_0 = 0`, `F_1 = 1`).
pub fn lambda_closed(rho: f64, mu: f64, nu: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&mu) || !(0.0..=1.0).contains(&nu) {
        return Err(invalid_param!("masses ({mu}, {nu}) outside [0, 1]"));
    }
    if mu == 0.0 || nu == 0.0 {
        return Ok(0.0);
    }
    if mu == 1.0 {
        return Ok(nu);
    }
    if nu == 1.0 {
        return Ok(mu);
    }
    lambda_gauss(StabilityQuery::new(rho, mu, nu)?)
}

/// `<F_mu, U_rho (1 - F_{1-nu})>_gamma = mu - Lambda(rho, mu, 1 - nu)`.
pub fn lower_gauss(rho: f64, mu: f64, nu: f64) -> Result<f64> {
    Ok(mu - lambda_closed(rho, mu, 1.0 - nu)?)
}

/// Small-`tau` equivalent of `<F_tau, U_rho F_tau>`:
/// `tau^(2/(1+rho)) (4 pi ln(1/tau))^(-rho/(1+rho)) (1+rho)^(3/2) / (1-rho)^(1/2)`.
pub fn lambda_asymptotic(tau: f64, rho: f64) -> Result<f64> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(invalid_param!("tau = {tau} outside (0, 1)"));
    }
    if !(rho > -1.0 && rho < 1.0) {
        return Err(invalid_param!("rho = {rho} outside (-1, 1)"));
    }
    let log_term = 4.0 * std::f64::consts::PI * (1.0 / tau).ln();
    Ok(tau.powf(2.0 / (1.0 + rho)) * log_term.powf(-rho / (1.0 + rho)) * (1.0 + rho).powf(1.5) / (1.0 - rho).sqrt())
}

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl McEstimate {
    fn from_moments(sum: f64, sum_sq: f64, samples: usize) -> Self {
        let n = samples as f64;
        let mean = sum / n;
        let var = if samples > 1 { ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
        Self { mean, stderr: (var / n).sqrt(), samples }
    }

    /// Whether `value` lies within `sigmas` standard errors (exact match when the error is zero).
    pub fn covers(&self, value: f64, sigmas: f64) -> bool {
        (self.mean - value).abs() <= sigmas * self.stderr + 1e-12 * value.abs().max(1.0)
    }
}

/// Evaluates the real analogue `sum_x c_x prod_{i : x_i != 0} z^i_{x_i}` at one Gaussian point.
///
/// `z` holds `(q-1)` variables per coordinate, coordinate-major.
struct AnalogueEvaluator {
    q: usize,
    n: usize,
    coeffs: Vec<f64>,
    scratch: Vec<f64>,
}

impl AnalogueEvaluator {
    fn new(q: usize, n: usize, coeffs: Vec<f64>) -> Self {
        let scratch = vec![0.0; coeffs.len()];
        Self { q, n, coeffs, scratch }
    }

    fn eval(&mut self, z: &[f64]) -> f64 {
        let q = self.q;
        let mut len = self.coeffs.len();
        self.scratch[..len].copy_from_slice(&self.coeffs);
        // Contract the least significant coordinate first.
        for coord in (0..self.n).rev() {
            let zs = &z[coord * (q - 1)..(coord + 1) * (q - 1)];
            let next = len / q;
            for p in 0..next {
                let block = &self.scratch[p * q..(p + 1) * q];
                let v = block[0] + block[1..].iter().zip(zs).map(|(c, zv)| c * zv).sum::<f64>();
                self.scratch[p] = v;
            }
            len = next;
        }
        self.scratch[0]
    }
}

/// Monte Carlo estimate of `<f~, g~>_gamma`, or `<f~, T~^{(x) n} g~>_gamma` when `op` is given.
///
/// With an operator, coefficients are taken in its eigenbasis and `T~ = U_{lambda_1} (x) .. (x) U_{lambda_{q-1}}`:
/// the partner point is `z' = lambda_a z + sqrt(1 - lambda_a^2) w` per variable.
pub fn real_analogue_inner_mc(f: &QFunction, g: &QFunction, op: Option<&MarkovOp>, samples: usize, seed: u64) -> Result<McEstimate> {
    f.check_same_space(g)?;
    if samples == 0 {
        return Err(invalid_param!("need at least one sample"));
    }
    let (q, n) = (f.q(), f.n());
    let std_basis;
    let (basis, lambdas): (&OrthonormalBasis, Vec<f64>) = match op {
        Some(t) => {
            if t.m() != q {
                return Err(invalid_param!("operator on [{}] for functions over [{q}]", t.m()));
            }
            (t.eigenbasis(), t.eigenvalues()[1..].to_vec())
        }
        None => {
            std_basis = build_basis(q)?;
            (&std_basis, vec![1.0; q - 1])
        }
    };
    let mut ef = AnalogueEvaluator::new(q, n, transform(f, basis)?.coeffs().to_vec());
    let mut eg = AnalogueEvaluator::new(q, n, transform(g, basis)?.coeffs().to_vec());
    let vars = (q - 1) * n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = vec![0.0; vars];
    let mut zp = vec![0.0; vars];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        for (j, (a, b)) in z.iter_mut().zip(zp.iter_mut()).enumerate() {
            let lambda = lambdas[j % (q - 1)];
            *a = StandardNormal.sample(&mut rng);
            *b = if lambda == 1.0 {
                *a
            } else {
                let w: f64 = StandardNormal.sample(&mut rng);
                lambda * *a + (1.0 - lambda * lambda).max(0.0).sqrt() * w
            };
        }
        let v = ef.eval(&z) * eg.eval(&zp);
        sum += v;
        sum_sq += v * v;
    }
    Ok(McEstimate::from_moments(sum, sum_sq, samples))
}

/// `chop(v)`: clamp to `[0, 1]`.
pub fn chop(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

/// Monte Carlo norms of the real analogue and of its distance to `[0, 1]`, on shared samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChopDefect {
    /// `||f~ - chop(f~)||_2`.
    pub defect: f64,
    /// `||f~||_2` on the same samples.
    pub analogue_norm: f64,
    pub samples: usize,
}

pub fn chop_defect(f: &QFunction, samples: usize, seed: u64) -> Result<ChopDefect> {
    if !f.is_unit_valued() {
        return Err(invalid_param!("chop defect needs a [0, 1]-valued function"));
    }
    if samples == 0 {
        return Err(invalid_param!("need at least one sample"));
    }
    let (q, n) = (f.q(), f.n());
    let mut ev = AnalogueEvaluator::new(q, n, transform(f, &build_basis(q)?)?.coeffs().to_vec());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = vec![0.0; (q - 1) * n];
    let (mut defect, mut norm) = (0.0, 0.0);
    for _ in 0..samples {
        z.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
        let v = ev.eval(&z);
        defect += (v - chop(v)).powi(2);
        norm += v * v;
    }
    let s = samples as f64;
    Ok(ChopDefect { defect: (defect / s).sqrt(), analogue_norm: (norm / s).sqrt(), samples })
}

/// Outcome of a bound check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// No common influential coordinate and `lower <= inner <= upper`.
    BoundsHold,
    /// Some coordinate pair has both low-level influences at least `delta`.
    HypothesisViolated,
    /// Hypothesis satisfied but the inner product left the band (possible at finite `k`, `delta`).
    BoundsViolated,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::BoundsHold => "bounds-hold",
            Self::HypothesisViolated => "hypothesis-violated",
            Self::BoundsViolated => "bounds-violated",
        }
    }
}

/// A pair of coordinates whose low-level influences are both at least `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub f_coord: usize,
    pub g_coord: usize,
    pub f_influence: f64,
    pub g_influence: f64,
}

/// Result of checking the noisy inner product against the Gaussian band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub mu: f64,
    pub nu: f64,
    pub rho: f64,
    pub inner: f64,
    /// `<F_mu, U_rho (1 - F_{1-nu})> - epsilon`.
    pub lower: f64,
    /// `<F_mu, U_rho F_nu> + epsilon`.
    pub upper: f64,
    pub k: usize,
    pub delta: f64,
    pub epsilon: f64,
    pub fish: bool,
    pub violating_coords: Vec<Violation>,
    pub verdict: Verdict,
}

impl BoundReport {
    pub const CSV_HEADER: &'static str = "mu,nu,rho,inner,lower,upper,k,delta,epsilon,fish,violating,verdict";

    pub fn csv_row(&self) -> String {
        let coords: Vec<String> = self.violating_coords.iter().map(|v| format!("{}:{}", v.f_coord, v.g_coord)).collect();
        format!(
            "{:.12},{:.12},{:.12},{:.12},{:.12},{:.12},{},{},{},{},{},{}",
            self.mu,
            self.nu,
            self.rho,
            self.inner,
            self.lower,
            self.upper,
            self.k,
            self.delta,
            self.epsilon,
            self.fish,
            coords.join(" "),
            self.verdict.as_str()
        )
    }

    /// Distance from `inner` to the nearer edge of the band (negative when outside).
    pub fn margin(&self) -> f64 {
        (self.inner - self.lower).min(self.upper - self.inner)
    }
}

/// Checks `<f, T^{(x) n} g>` (or `<[[f]], T^{(x) n} [[g]]>` with `fish`) against the Gaussian band
/// with `rho = r(T)`, and lists coordinates violating the low-influence hypothesis.
///
/// Plain: coordinate `i` violates when `min(I_i^{<=k}(f), I_i^{<=k}(g)) >= delta`.
/// Fish: for each pair `i`, the coordinate pairs `(2i-1, 2i-1)`, `(2i-1, 2i)`, `(2i, 2i-1)` of `(f, g)`
/// are checked the same way; `T` acts on `[q^2]` and must have a uniform `(x_2, y_2)` marginal.
pub fn mo_bound_report(
    f: &QFunction,
    g: &QFunction,
    op: &MarkovOp,
    k: usize,
    delta: f64,
    epsilon: f64,
    fish: bool,
) -> Result<BoundReport> {
    f.check_same_space(g)?;
    if !f.is_unit_valued() || !g.is_unit_valued() {
        return Err(invalid_param!("bound report needs [0, 1]-valued functions"));
    }
    if !(delta > 0.0) || !(epsilon >= 0.0) {
        return Err(invalid_param!("need delta > 0 and epsilon >= 0"));
    }
    let (mu, nu) = (f.mean().clamp(0.0, 1.0), g.mean().clamp(0.0, 1.0));
    let rho = op.spectral_radius().min(1.0);
    let basis = build_basis(f.q())?;
    let inf_f = transform(f, &basis)?.low_level_influences(k);
    let inf_g = transform(g, &basis)?.low_level_influences(k);
    let mut violating = Vec::new();
    let mut check = |fi: usize, gi: usize| {
        let (a, b) = (inf_f[fi - 1], inf_g[gi - 1]);
        if a.min(b) >= delta {
            violating.push(Violation { f_coord: fi, g_coord: gi, f_influence: a, g_influence: b });
        }
    };
    let inner = if fish {
        if f.n() % 2 != 0 || op.m() != f.q() * f.q() {
            return Err(invalid_param!("fish check needs functions on [q]^(2n) and an operator on [q^2]"));
        }
        if !pair_marginal_distribution(op)?.is_uniform() {
            return Err(invalid_param!("operator's (x_2, y_2) marginal is not uniform"));
        }
        for i in 1..=f.n() / 2 {
            check(2 * i - 1, 2 * i - 1);
            check(2 * i - 1, 2 * i);
            check(2 * i, 2 * i - 1);
        }
        let (bf, bg) = (bunch_fn(f)?, bunch_fn(g)?);
        bf.inner(&apply_tensor(op, &bg)?)?
    } else {
        for i in 1..=f.n() {
            check(i, i);
        }
        noisy_inner(f, op, g)?
    };
    let upper = lambda_closed(rho, mu, nu)? + epsilon;
    let lower = lower_gauss(rho, mu, nu)? - epsilon;
    let verdict = if !violating.is_empty() {
        Verdict::HypothesisViolated
    } else if lower <= inner && inner <= upper {
        Verdict::BoundsHold
    } else {
        Verdict::BoundsViolated
    };
    Ok(BoundReport { mu, nu, rho, inner, lower, upper, k, delta, epsilon, fish, violating_coords: violating, verdict })
}
