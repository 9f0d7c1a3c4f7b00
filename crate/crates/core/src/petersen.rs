//! Two-source capture-recapture: counts, the hypergeometric conditional
//! likelihood, Waring priors for the number of missed units `K = N - n..`,
//! and the conjugate generalized Waring posterior.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gwd::{log_pochhammer, GwdParams, Moment};
use crate::special::ln_factorial;

/// Largest total count accepted; sums of counts stay exact in `f64`.
pub const MAX_CAPTURED: u64 = 1 << 53;

/// Observed frequencies of a two-source experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CaptureCounts {
    /// caught by source 1 only
    pub n10: u64,
    /// caught by source 2 only
    pub n01: u64,
    /// caught by both sources
    pub n11: u64,
}

impl CaptureCounts {
    pub const fn new(n10: u64, n01: u64, n11: u64) -> Self {
        Self { n10, n01, n11 }
    }

    /// Units caught by source 1.
    pub const fn n1dot(&self) -> u64 {
        self.n10.saturating_add(self.n11)
    }

    /// Units caught by source 2.
    pub const fn ndot1(&self) -> u64 {
        self.n01.saturating_add(self.n11)
    }

    /// Distinct units caught.
    pub const fn ncap(&self) -> u64 {
        self.n10.saturating_add(self.n01).saturating_add(self.n11)
    }

    /// The same experiment with the two sources relabelled.
    pub const fn swapped(&self) -> Self {
        Self::new(self.n01, self.n10, self.n11)
    }

    pub(crate) fn require_nonempty(&self) -> Result<()> {
        let ncap = self.ncap();
        if ncap == 0 {
            Err(Error::EmptySample)
        } else if ncap > MAX_CAPTURED {
            Err(Error::InvalidParameter {
                name: "counts",
                value: ncap as f64,
                reason: "n10 + n01 + n11 must not exceed 2^53",
            })
        } else {
            Ok(())
        }
    }
}

/// Tail parameter `ell` of the Waring prior on K.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    ell: f64,
}

impl PriorSpec {
    pub fn new(ell: f64) -> Result<Self> {
        if ell.is_finite() && ell >= 0.0 {
            Ok(Self { ell })
        } else {
            Err(Error::InvalidParameter {
                name: "ell",
                value: ell,
                reason: "must be finite and non-negative",
            })
        }
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }
}

/// Waring prior GWD(1, ncap+1, ncap+1+ell) for K. Proper only when `ell > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaringPrior {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl WaringPrior {
    pub fn is_proper(&self) -> bool {
        self.c - self.a - self.b > 0.0
    }

    /// The distribution, or [`Error::Improper`] for `ell <= 1`.
    pub fn params(&self) -> Result<GwdParams> {
        GwdParams::new(self.a, self.b, self.c)
    }

    /// `ln[(b)_k / (c)_k]`, proportional to the log prior mass at `k` even
    /// when the prior cannot be normalized.
    pub fn ln_unnormalized(&self, k: u64) -> f64 {
        log_pochhammer(self.b, k) - log_pochhammer(self.c, k)
    }
}

/// Summaries of the posterior of K.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PosteriorSummary {
    pub params: GwdParams,
    pub mean_k: Moment,
    pub var_k: Moment,
    pub mode_k: u64,
    /// `ncap + mode_k`
    pub point_n: u64,
    /// β1 of the `ell = 0` posterior; `None` when it does not exist.
    pub beta1: Option<f64>,
}

/// `P(n11 | N, n1., n.1)`, zero outside
/// `max(0, n1. + n.1 - N) <= n11 <= min(n1., n.1)`.
pub fn hypergeom_pmf(n11: u64, population: u64, n1dot: u64, ndot1: u64) -> Result<f64> {
    if n1dot > population || ndot1 > population {
        return Err(Error::MarginsExceedPopulation {
            n1dot,
            ndot1,
            population,
        });
    }
    let lower = (n1dot + ndot1).saturating_sub(population);
    let upper = n1dot.min(ndot1);
    if n11 < lower || n11 > upper {
        return Ok(0.0);
    }
    let ln_choose = |n: u64, k: u64| ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k);
    let ln_p = ln_choose(ndot1, n11) + ln_choose(population - ndot1, n1dot - n11)
        - ln_choose(population, n1dot);
    Ok(ln_p.exp())
}

/// Waring prior for K given the number of distinct units caught.
pub fn prior(ncap: u64, prior: PriorSpec) -> Result<WaringPrior> {
    CaptureCounts::new(ncap, 0, 0).require_nonempty()?;
    let n = ncap as f64;
    Ok(WaringPrior {
        a: 1.0,
        b: n + 1.0,
        c: n + 1.0 + prior.ell(),
    })
}

/// Posterior GWD(n01+1, n10+1, ncap+ell+1) of K.
pub fn posterior(counts: CaptureCounts, prior: PriorSpec) -> Result<GwdParams> {
    counts.require_nonempty()?;
    let total = counts.n11 as f64 + prior.ell();
    if total <= 1.0 {
        return Err(Error::ImproperPosterior { total });
    }
    GwdParams::new(
        counts.n01 as f64 + 1.0,
        counts.n10 as f64 + 1.0,
        counts.ncap() as f64 + prior.ell() + 1.0,
    )
}

pub fn posterior_summary(counts: CaptureCounts, prior: PriorSpec) -> Result<PosteriorSummary> {
    let params = posterior(counts, prior)?;
    let mode_k = params.mode();
    let beta1 = posterior(counts, PriorSpec { ell: 0.0 })
        .ok()
        .and_then(|p| p.skewness_beta1());
    Ok(PosteriorSummary {
        params,
        mean_k: params.mean(),
        var_k: params.variance(),
        mode_k,
        point_n: counts.ncap().saturating_add(mode_k),
        beta1,
    })
}
