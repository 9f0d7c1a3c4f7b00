//! The generalized Waring distribution GWD(a, b, c) on the non-negative integers.
//!
//! The mass function is
//!
//! ```text
//! P(Y = k) = (a)_k (b)_k / ((c)_k k!) / C_w,   C_w = Γ(c-a-b) Γ(c) / (Γ(c-b) Γ(c-a))
//! ```
//!
//! which is proper for `a, b > 0` and `c > a + b`. The law is also the
//! negative binomial NB(a, p) mixed over `p ~ Beta(c-a-b, b)`, and that
//! representation backs the quadrature distribution function used for large
//! arguments. All products of rising factorials are evaluated in log space.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::quadrature::{self, QuadratureOptions};
use crate::special::{beta_ln_pdf, beta_reg, ln_beta, ln_factorial, ln_gamma, CompensatedSum};

/// Arguments up to this index are summed directly; beyond it the
/// distribution function is computed by mixture quadrature.
pub const SUMMATION_LIMIT: u64 = 10_000;

/// Quantile scans switch from running summation to quadrature bisection
/// after this many terms.
pub const SCAN_LIMIT: u64 = 16_384;

/// Absolute slack when comparing a distribution function value with a
/// probability level. Absorbs rounding at atoms where `F(m)` equals the
/// level exactly, such as `F(37) = 0.95` for GWD(1, 2, 4).
pub const ATOM_TOLERANCE: f64 = 1e-12;

// ln pmf below this is treated as zero mass when locating the first
// representable term of a summation.
const LN_NEGLIGIBLE: f64 = -700.0;

// rising-factorial recursions are re-anchored on exact log values this often
const REANCHOR_EVERY: u64 = 1024;

/// `ln (x)_k = ln Γ(x+k) - ln Γ(x)`, exactly 0 for `k = 0`.
pub fn log_pochhammer(x: f64, k: u64) -> f64 {
    debug_assert!(x > 0.0);
    match k {
        0 => 0.0,
        1..=8 => (0..k).map(|i| (x + i as f64).ln()).sum(),
        _ => ln_gamma(x + k as f64) - ln_gamma(x),
    }
}

/// A moment that is either finite or diverges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Moment {
    Finite(f64),
    Infinite,
}

impl Moment {
    pub fn finite(self) -> Option<f64> {
        match self {
            Moment::Finite(x) => Some(x),
            Moment::Infinite => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Moment::Finite(_))
    }
}

impl std::fmt::Display for Moment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Moment::Finite(x) => write!(f, "{x}"),
            Moment::Infinite => f.write_str("Inf"),
        }
    }
}

/// How a quantile treats distribution-function values equal to the level.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantileConvention {
    /// Smallest `m` with `F(m) >= q`.
    #[default]
    CdfAtLeast,
    /// Largest `k` with `P(Y >= k) >= 1 - q`, i.e. smallest `m` with `F(m) > q`.
    StrictTail,
}

impl QuantileConvention {
    #[inline]
    fn reached(self, cdf: f64, q: f64) -> bool {
        match self {
            QuantileConvention::CdfAtLeast => cdf >= q - ATOM_TOLERANCE,
            QuantileConvention::StrictTail => cdf > q + ATOM_TOLERANCE,
        }
    }
}

/// Which algorithm evaluates `P(Y <= k)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum CdfAlgorithm {
    /// Summation for `k <= SUMMATION_LIMIT`, quadrature above.
    #[default]
    Auto,
    /// Compensated running sum of the mass function.
    Summation,
    /// Negative binomial distribution function integrated against the Beta mixing law.
    Quadrature,
}

/// Parameters of a proper generalized Waring distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GwdParams {
    a: f64,
    b: f64,
    c: f64,
    #[serde(skip)]
    ln_norm: f64,
}

impl GwdParams {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        for (name, value) in [("a", a), ("b", b), ("c", c)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be positive and finite",
                });
            }
        }
        if c - a - b <= 0.0 {
            return Err(Error::Improper { a, b, c });
        }
        let ln_norm = ln_gamma(c - a - b) + ln_gamma(c) - ln_gamma(c - b) - ln_gamma(c - a);
        Ok(Self { a, b, c, ln_norm })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `c - a - b`, the power-law exponent of the survival function.
    pub fn tail_index(&self) -> f64 {
        self.c - self.a - self.b
    }

    /// Normalizing constant `C_w` by Gauss's summation theorem.
    pub fn norm_const(&self) -> f64 {
        self.ln_norm.exp()
    }

    pub fn ln_norm_const(&self) -> f64 {
        self.ln_norm
    }

    pub fn ln_pmf(&self, k: u64) -> f64 {
        log_pochhammer(self.a, k) + log_pochhammer(self.b, k)
            - log_pochhammer(self.c, k)
            - ln_factorial(k)
            - self.ln_norm
    }

    pub fn pmf(&self, k: u64) -> f64 {
        self.ln_pmf(k).exp()
    }

    /// `pmf(k + 1) / pmf(k)`.
    #[inline]
    pub fn ratio(&self, k: u64) -> f64 {
        let k = k as f64;
        (self.a + k) * (self.b + k) / ((self.c + k) * (k + 1.0))
    }

    /// `P(Y <= k)`, choosing the algorithm by the size of `k`.
    pub fn cdf(&self, k: i64) -> Result<f64> {
        self.cdf_with(k, CdfAlgorithm::Auto)
    }

    pub fn cdf_with(&self, k: i64, algorithm: CdfAlgorithm) -> Result<f64> {
        match algorithm {
            CdfAlgorithm::Auto if k <= SUMMATION_LIMIT as i64 => Ok(self.cdf_summation(k)),
            CdfAlgorithm::Auto | CdfAlgorithm::Quadrature => self.cdf_quadrature(k),
            CdfAlgorithm::Summation => Ok(self.cdf_summation(k)),
        }
    }

    /// `P(Y <= k)` by compensated summation of the mass function.
    pub fn cdf_summation(&self, k: i64) -> f64 {
        if k < 0 {
            return 0.0;
        }
        let k = k as u64;
        let start = self.first_significant_index();
        if k < start {
            return 0.0;
        }
        let mut acc = CompensatedSum::new();
        self.for_each_term(start, k, |_, p| {
            acc.add(p);
            true
        });
        acc.value().min(1.0)
    }

    /// `P(Y <= k) = ∫ I_p(a, k+1) Beta(p; c-a-b, b) dp` by adaptive
    /// Gauss-Kronrod quadrature to absolute tolerance 1e-10.
    pub fn cdf_quadrature(&self, k: i64) -> Result<f64> {
        self.cdf_quadrature_opts(k, QuadratureOptions::default())
    }

    pub fn cdf_quadrature_opts(&self, k: i64, opts: QuadratureOptions) -> Result<f64> {
        if k < 0 {
            return Ok(0.0);
        }
        let (alpha, beta) = self.mixing_beta();
        let trials = k as f64 + 1.0;
        let a = self.a;

        let mut breaks = Vec::with_capacity(24);
        let mut add_scale = |mean: f64, sd: f64| {
            for &w in &[-16.0, -8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0, 16.0] {
                breaks.push(mean + w * sd);
            }
        };
        let (m1, s1) = beta_mean_sd(alpha, beta);
        add_scale(m1, s1);
        let (m2, s2) = beta_mean_sd(a, trials);
        add_scale(m2, s2);

        let v = beta_expectation(alpha, beta, |p| beta_reg(a, trials, p), &breaks, opts)?;
        Ok(v.clamp(0.0, 1.0))
    }

    /// `P(Y >= k)`. Exact rising-factorial ratio when `a = 1`.
    pub fn survival(&self, k: u64) -> Result<f64> {
        if k == 0 {
            return Ok(1.0);
        }
        if self.a == 1.0 {
            return Ok((log_pochhammer(self.b, k) - log_pochhammer(self.c - 1.0, k)).exp());
        }
        Ok(1.0 - self.cdf(k as i64 - 1)?)
    }

    /// Quantile under [`QuantileConvention::CdfAtLeast`].
    pub fn quantile(&self, q: f64) -> Result<u64> {
        self.quantile_with(q, QuantileConvention::CdfAtLeast)
    }

    pub fn quantile_with(&self, q: f64, convention: QuantileConvention) -> Result<u64> {
        Ok(self.quantiles(&[q], convention)?[0])
    }

    /// Several quantiles in one pass. Levels may be given in any order.
    ///
    /// A compensated running sum covers the first [`SCAN_LIMIT`] terms past the
    /// first non-negligible mass; levels not reached there are located by
    /// doubling a bracket from the mode and bisecting on the quadrature
    /// distribution function. The mean is never used, so heavy-tailed laws
    /// without a finite mean are handled.
    pub fn quantiles(&self, levels: &[f64], convention: QuantileConvention) -> Result<Vec<u64>> {
        for &q in levels {
            check_probability("q", q)?;
        }
        let mut order: Vec<usize> = (0..levels.len()).collect();
        order.sort_by(|&i, &j| levels[i].total_cmp(&levels[j]));
        let mut out = vec![0u64; levels.len()];
        let mut pending = order.into_iter().peekable();

        let start = self.first_significant_index();
        let mode = self.mode();
        let mut known_below: Option<u64> = None;
        if mode.saturating_sub(start) <= SCAN_LIMIT {
            let end = start + SCAN_LIMIT;
            let mut acc = CompensatedSum::new();
            self.for_each_term(start, end, |k, p| {
                acc.add(p);
                let cdf = acc.value();
                while let Some(&i) = pending.peek() {
                    if convention.reached(cdf, levels[i]) {
                        out[i] = k;
                        pending.next();
                    } else {
                        break;
                    }
                }
                known_below = Some(k);
                pending.peek().is_some()
            });
        }

        for i in pending {
            out[i] = self.bisect_quantile(levels[i], convention, known_below, mode)?;
        }
        Ok(out)
    }

    fn bisect_quantile(
        &self,
        q: f64,
        convention: QuantileConvention,
        known_below: Option<u64>,
        mode: u64,
    ) -> Result<u64> {
        let reached = |k: u64| -> Result<bool> { Ok(convention.reached(self.cdf(k as i64)?, q)) };
        // invariant: `lo` (if any) does not reach q, `hi` does
        let mut lo = known_below;
        let mut hi = mode.max(lo.map_or(0, |l| l + 1));
        while !reached(hi)? {
            lo = Some(hi);
            hi = hi.saturating_mul(2).max(1);
            if hi == u64::MAX {
                return Ok(hi);
            }
        }
        let mut lo = match lo {
            Some(l) => l,
            None => {
                if reached(0)? {
                    return Ok(0);
                }
                0
            }
        };
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if reached(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// `ab / (c-a-b-1)` when `c > a+b+1`.
    pub fn mean(&self) -> Moment {
        let s = self.tail_index();
        if s > 1.0 {
            Moment::Finite(self.a * self.b / (s - 1.0))
        } else {
            Moment::Infinite
        }
    }

    /// `ab(c-a-1)(c-b-1) / ((c-a-b-2)(c-a-b-1)^2)` when `c > a+b+2`.
    pub fn variance(&self) -> Moment {
        let (a, b, c) = (self.a, self.b, self.c);
        let s = self.tail_index();
        if s > 2.0 {
            Moment::Finite(a * b * (c - a - 1.0) * (c - b - 1.0) / ((s - 2.0) * (s - 1.0).powi(2)))
        } else {
            Moment::Infinite
        }
    }

    /// Pearson's β1 (squared skewness); `None` unless `c > a+b+3`.
    pub fn skewness_beta1(&self) -> Option<f64> {
        let (a, b, c) = (self.a, self.b, self.c);
        let s = self.tail_index();
        if s <= 3.0 {
            return None;
        }
        let num = (c + a - b - 1.0).powi(2) * (c - a + b - 1.0).powi(2) * (s - 2.0);
        let den = a * b * (c - a - 1.0) * (c - b - 1.0) * (s - 3.0).powi(2);
        Some(num / den)
    }

    /// `⌊(a-1)(b-1)/(c-a-b+1)⌋` clamped at 0. When the ratio is an integer
    /// the two neighbouring masses tie and the lower index is returned.
    pub fn mode(&self) -> u64 {
        let x = (self.a - 1.0) * (self.b - 1.0) / (self.tail_index() + 1.0);
        if !(x >= 1.0) {
            return 0;
        }
        let m = x.floor().min(u64::MAX as f64) as u64;
        let r = self.ratio(m - 1);
        if (r - 1.0).abs() <= 1e-12 {
            m - 1
        } else {
            m
        }
    }

    /// Law of `Y - m` given `Y >= m` for the simple Waring case `a = 1`.
    pub fn shift_conditional(&self, m: u64) -> Result<GwdParams> {
        if self.a != 1.0 {
            return Err(Error::InvalidParameter {
                name: "a",
                value: self.a,
                reason: "conditional shift requires a = 1",
            });
        }
        GwdParams::new(1.0, self.b + m as f64, self.c + m as f64)
    }

    /// Parameters `(c-a-b, b)` of the Beta law mixing NB(a, p).
    pub fn mixing_beta(&self) -> (f64, f64) {
        (self.tail_index(), self.b)
    }

    /// Rigorous upper bound on `P(Y > m)`.
    ///
    /// If `pmf(j+1)/pmf(j) <= j/(j+D)` for every `j >= m` with `D > 1`, the
    /// tail is dominated by a simple Waring series summing to
    /// `pmf(m) * m / (D - 1)`. `D` is the infimum over `j >= m` of
    /// `j(c+j)(j+1)/((a+j)(b+j)) - j`. Returns `None` when no such `D > 1`
    /// exists yet (m too small).
    pub fn tail_bound(&self, m: u64) -> Option<f64> {
        if m == 0 {
            return None;
        }
        let d = self.ratio_envelope(m as f64);
        if !(d > 1.0) {
            return None;
        }
        Some(self.pmf(m) * m as f64 / (d - 1.0))
    }

    fn ratio_envelope(&self, from: f64) -> f64 {
        // g(j) = (L j^2 + m0 j) / (j^2 + p j + q)
        let l = self.tail_index() + 1.0;
        let m0 = self.c - self.a * self.b;
        let p = self.a + self.b;
        let q = self.a * self.b;
        let g = |j: f64| (l * j * j + m0 * j) / (j * j + p * j + q);
        let mut inf = g(from).min(l);
        // stationary points: (L p - m0) j^2 + 2 L q j + m0 q = 0
        let qa = l * p - m0;
        let qb = 2.0 * l * q;
        let qc = m0 * q;
        let mut roots = Vec::with_capacity(2);
        if qa.abs() < f64::EPSILON * (qb.abs() + qc.abs()) {
            if qb != 0.0 {
                roots.push(-qc / qb);
            }
        } else {
            let disc = qb * qb - 4.0 * qa * qc;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                roots.push((-qb + sq) / (2.0 * qa));
                roots.push((-qb - sq) / (2.0 * qa));
            }
        }
        for r in roots {
            if r > from && r.is_finite() {
                inf = inf.min(g(r));
            }
        }
        inf
    }

    /// Smallest `M = 2^j * (mode + 1)` whose [`tail_bound`](Self::tail_bound) is at most `tol`.
    pub fn truncation_point(&self, tol: f64) -> Option<u64> {
        let mut m = self.mode() + 1;
        for _ in 0..48 {
            if let Some(bound) = self.tail_bound(m) {
                if bound <= tol {
                    return Some(m);
                }
            }
            m = m.checked_mul(2)?;
        }
        None
    }

    /// Draw from the Beta-mixed negative binomial representation.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let (alpha, beta) = self.mixing_beta();
        let p = Beta::new(alpha, beta)
            .expect("mixing parameters are positive")
            .sample(rng);
        NegBinParams { a: self.a, p }.sample_unchecked(rng)
    }

    // First index whose mass is representable; everything before it sums to
    // less than `index * e^-700`. ln pmf increases on [0, mode].
    fn first_significant_index(&self) -> u64 {
        if self.ln_pmf(0) >= LN_NEGLIGIBLE {
            return 0;
        }
        let (mut lo, mut hi) = (0u64, self.mode());
        if self.ln_pmf(hi) < LN_NEGLIGIBLE {
            return hi;
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.ln_pmf(mid) >= LN_NEGLIGIBLE {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    // Visit pmf(k) for k in [from, to] via the ratio recursion; stops early
    // when the callback returns false.
    fn for_each_term<F: FnMut(u64, f64) -> bool>(&self, from: u64, to: u64, mut visit: F) {
        let mut term = self.pmf(from);
        let mut k = from;
        loop {
            if !visit(k, term) || k == to {
                return;
            }
            term *= self.ratio(k);
            k += 1;
            if (k - from).is_multiple_of(REANCHOR_EVERY) {
                term = self.pmf(k);
            }
        }
    }
}

fn beta_mean_sd(alpha: f64, beta: f64) -> (f64, f64) {
    let n = alpha + beta;
    (alpha / n, (alpha * beta / (n * n * (n + 1.0))).sqrt())
}

/// Negative binomial NB(a, p): failures before the `a`-th success.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegBinParams {
    a: f64,
    p: f64,
}

impl NegBinParams {
    pub fn new(a: f64, p: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidParameter {
                name: "a",
                value: a,
                reason: "must be positive and finite",
            });
        }
        check_probability("p", p)?;
        Ok(Self { a, p })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn ln_pmf(&self, k: u64) -> f64 {
        log_pochhammer(self.a, k) - ln_factorial(k)
            + self.a * self.p.ln()
            + k as f64 * (-self.p).ln_1p()
    }

    pub fn pmf(&self, k: u64) -> f64 {
        self.ln_pmf(k).exp()
    }

    /// `P(X <= k) = I_p(a, k + 1)`.
    pub fn cdf(&self, k: u64) -> f64 {
        beta_reg(self.a, k as f64 + 1.0, self.p)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.sample_unchecked(rng)
    }

    // Gamma-Poisson construction; p may be at the edge of (0, 1) when
    // called from the GWD sampler.
    fn sample_unchecked<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        if self.p >= 1.0 {
            return 0;
        }
        if self.p <= 0.0 {
            return u64::MAX;
        }
        let scale = (1.0 - self.p) / self.p;
        let lambda = Gamma::new(self.a, scale)
            .expect("shape and scale are positive")
            .sample(rng);
        if !(lambda > 0.0) {
            return 0;
        }
        if lambda > 1e15 {
            // Poisson noise is below one part in 1e7 here
            return lambda.min(u64::MAX as f64) as u64;
        }
        Poisson::new(lambda)
            .expect("finite positive rate")
            .sample(rng) as u64
    }
}

/// `E[h(P)]` for `P ~ Beta(alpha, beta)`.
///
/// Each half of (0, 1) whose density exponent is negative is integrated in
/// `t = p^alpha` (or `u = (1-p)^beta`), which cancels the endpoint
/// singularity exactly. Breakpoints are given on the `p` scale.
fn beta_expectation<H: Fn(f64) -> f64>(
    alpha: f64,
    beta: f64,
    h: H,
    breaks: &[f64],
    opts: QuadratureOptions,
) -> Result<f64> {
    const MID: f64 = 0.5;
    let ln_b = ln_beta(alpha, beta);
    let half = QuadratureOptions {
        abs_tol: 0.5 * opts.abs_tol,
        ..opts
    };

    let left = if alpha < 1.0 {
        let f = |t: f64| {
            let p = t.powf(1.0 / alpha);
            h(p) * ((beta - 1.0) * (-p).ln_1p() - ln_b).exp() / alpha
        };
        let cuts: Vec<f64> = breaks.iter().map(|&x| x.max(0.0).powf(alpha)).collect();
        quadrature::integrate(f, 0.0, MID.powf(alpha), &cuts, half)?.value
    } else {
        let f = |p: f64| h(p) * beta_ln_pdf(alpha, beta, p).exp();
        quadrature::integrate(f, 0.0, MID, breaks, half)?.value
    };

    let right = if beta < 1.0 {
        let f = |u: f64| {
            let p = 1.0 - u.powf(1.0 / beta);
            h(p) * ((alpha - 1.0) * p.ln() - ln_b).exp() / beta
        };
        let cuts: Vec<f64> = breaks
            .iter()
            .map(|&x| (1.0 - x).max(0.0).powf(beta))
            .collect();
        quadrature::integrate(f, 0.0, (1.0 - MID).powf(beta), &cuts, half)?.value
    } else {
        let f = |p: f64| h(p) * beta_ln_pdf(alpha, beta, p).exp();
        quadrature::integrate(f, MID, 1.0, breaks, half)?.value
    };
    Ok(left + right)
}
