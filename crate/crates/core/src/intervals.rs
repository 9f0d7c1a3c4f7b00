//! Interval estimates for the population size N.
//!
//! `gwd_credible` inverts posterior quantiles of K; the remaining methods are
//! closed-form large-sample intervals built on the Petersen estimator.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::gwd::QuantileConvention;
use crate::petersen::{posterior, posterior_summary, CaptureCounts, PriorSpec};
use crate::special::normal_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Quantiles of the generalized Waring posterior of K.
    GwdCredible,
    /// Petersen estimator ± z times its asymptotic standard error.
    Wald,
    /// Chapman estimator ± z times the Seber-Wittes standard error.
    WaldChapman,
    /// Normal interval for log K mapped back to N.
    #[serde(rename = "lognormal")]
    LogNormal,
    /// 0.5-transformed logit interval.
    Tlogit,
    /// Normal approximation to the posterior quantiles.
    GwdNormalApprox,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::GwdCredible => "gwd_credible",
            Method::Wald => "wald",
            Method::WaldChapman => "wald_chapman",
            Method::LogNormal => "lognormal",
            Method::Tlogit => "tlogit",
            Method::GwdNormalApprox => "gwd_normal_approx",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A two-sided interval for N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalResult {
    pub method: Method,
    pub level: f64,
    pub lb: f64,
    pub ub: f64,
    /// Point estimate of N reported alongside the interval.
    pub point: f64,
    /// Prior parameter for the GWD-based methods.
    pub ell: Option<f64>,
    /// Set when the lower bound is below the number of units caught.
    pub below_ncap: bool,
}

impl IntervalResult {
    pub fn contains(&self, n: f64) -> bool {
        self.lb <= n && n <= self.ub
    }

    pub fn length(&self) -> f64 {
        self.ub - self.lb
    }
}

fn z_two_sided(level: f64) -> Result<f64> {
    check_probability("level", level)?;
    Ok(normal_quantile(0.5 + 0.5 * level))
}

fn result(
    method: Method,
    counts: CaptureCounts,
    level: f64,
    (lb, ub): (f64, f64),
    point: f64,
    ell: Option<f64>,
) -> IntervalResult {
    IntervalResult {
        method,
        level,
        lb,
        ub,
        point,
        ell,
        below_ncap: lb < counts.ncap() as f64,
    }
}

/// Equal-tailed credible interval `ncap + [q(α/2), q(1-α/2)]`.
pub fn gwd_credible(counts: CaptureCounts, prior: PriorSpec, level: f64) -> Result<IntervalResult> {
    gwd_credible_with(counts, prior, level, QuantileConvention::CdfAtLeast)
}

pub fn gwd_credible_with(
    counts: CaptureCounts,
    prior: PriorSpec,
    level: f64,
    convention: QuantileConvention,
) -> Result<IntervalResult> {
    check_probability("level", level)?;
    let summary = posterior_summary(counts, prior)?;
    let alpha = 1.0 - level;
    let q = summary
        .params
        .quantiles(&[0.5 * alpha, 1.0 - 0.5 * alpha], convention)?;
    let ncap = counts.ncap();
    Ok(result(
        Method::GwdCredible,
        counts,
        level,
        (
            ncap.saturating_add(q[0]) as f64,
            ncap.saturating_add(q[1]) as f64,
        ),
        summary.point_n as f64,
        Some(prior.ell()),
    ))
}

/// Normal approximation to the `q` posterior quantile of K.
pub fn gwd_normal_approx_quantile(counts: CaptureCounts, prior: PriorSpec, q: f64) -> Result<f64> {
    check_probability("q", q)?;
    let (center, sd) = normal_approx_moments(counts, prior)?;
    Ok(center + normal_quantile(q) * sd)
}

/// Interval from [`gwd_normal_approx_quantile`] at `α/2` and `1 - α/2`.
pub fn gwd_normal_approx(
    counts: CaptureCounts,
    prior: PriorSpec,
    level: f64,
) -> Result<IntervalResult> {
    let z = z_two_sided(level)?;
    let (center, sd) = normal_approx_moments(counts, prior)?;
    let ncap = counts.ncap() as f64;
    Ok(result(
        Method::GwdNormalApprox,
        counts,
        level,
        (ncap + center - z * sd, ncap + center + z * sd),
        ncap + center,
        Some(prior.ell()),
    ))
}

fn normal_approx_moments(counts: CaptureCounts, prior: PriorSpec) -> Result<(f64, f64)> {
    counts.require_nonempty()?;
    let ell = prior.ell();
    let t = counts.n11 as f64 + ell;
    if t <= 3.0 {
        return Err(Error::Undefined {
            method: "gwd_normal_approx",
            reason: "requires n11 + ell > 3",
        });
    }
    let a1 = counts.n01 as f64 + 1.0;
    let b1 = counts.n10 as f64 + 1.0;
    let center = a1 * b1 / t;
    let var = a1 * b1 * (counts.ndot1() as f64 - 1.0 + ell) * (counts.n1dot() as f64 - 1.0 + ell)
        / ((t - 2.0).powi(2) * (t - 3.0));
    Ok((center, var.sqrt()))
}

/// `ncap + n01 n10 / n11 ± z sqrt(n01 n10 n.1 n1. / n11^3)`; the lower bound is not clamped.
pub fn wald(counts: CaptureCounts, level: f64) -> Result<IntervalResult> {
    let z = z_two_sided(level)?;
    counts.require_nonempty()?;
    if counts.n11 == 0 {
        return Err(Error::Undefined {
            method: "wald",
            reason: "no recaptures (n11 = 0)",
        });
    }
    let (n10, n01, n11) = (counts.n10 as f64, counts.n01 as f64, counts.n11 as f64);
    let center = counts.ncap() as f64 + n01 * n10 / n11;
    let half = z * (n01 * n10 * counts.ndot1() as f64 * counts.n1dot() as f64 / n11.powi(3)).sqrt();
    Ok(result(
        Method::Wald,
        counts,
        level,
        (center - half, center + half),
        center,
        None,
    ))
}

/// Chapman's bias-corrected estimator `(n1.+1)(n.1+1)/(n11+1) - 1` with the
/// Seber-Wittes variance `(n1.+1)(n.1+1) n10 n01 / ((n11+1)^2 (n11+2))`.
pub fn wald_chapman(counts: CaptureCounts, level: f64) -> Result<IntervalResult> {
    let z = z_two_sided(level)?;
    counts.require_nonempty()?;
    let (n10, n01, n11) = (counts.n10 as f64, counts.n01 as f64, counts.n11 as f64);
    let m1 = counts.n1dot() as f64 + 1.0;
    let m2 = counts.ndot1() as f64 + 1.0;
    let center = m1 * m2 / (n11 + 1.0) - 1.0;
    let var = m1 * m2 * n10 * n01 / ((n11 + 1.0).powi(2) * (n11 + 2.0));
    let half = z * var.sqrt();
    Ok(result(
        Method::WaldChapman,
        counts,
        level,
        (center - half, center + half),
        center,
        None,
    ))
}

/// Asymptotic variance of log K: `1/n11 + 1/n10 + 1/n01 + n11/(n10 n01)`.
pub fn sigma_k2(counts: CaptureCounts) -> Result<f64> {
    if counts.n10 == 0 || counts.n01 == 0 || counts.n11 == 0 {
        return Err(Error::Undefined {
            method: "lognormal",
            reason: "every count must be positive",
        });
    }
    Ok(sigma2_from(
        counts.n10 as f64,
        counts.n01 as f64,
        counts.n11 as f64,
    ))
}

#[inline]
fn sigma2_from(n10: f64, n01: f64, n11: f64) -> f64 {
    1.0 / n11 + 1.0 / n10 + 1.0 / n01 + n11 / (n10 * n01)
}

/// `ncap + (n01 n10 / n11) exp(± z σ_K)`.
pub fn lognormal(counts: CaptureCounts, level: f64) -> Result<IntervalResult> {
    let z = z_two_sided(level)?;
    let sigma = sigma_k2(counts)?.sqrt();
    let ncap = counts.ncap() as f64;
    let k_hat = counts.n01 as f64 * counts.n10 as f64 / counts.n11 as f64;
    Ok(result(
        Method::LogNormal,
        counts,
        level,
        (
            ncap + k_hat * (-z * sigma).exp(),
            ncap + k_hat * (z * sigma).exp(),
        ),
        ncap + k_hat,
        None,
    ))
}

/// `ncap + ((n01+.5)(n10+.5)/(n11+.5)) exp(± z σ*_K) - .5`, where σ*_K adds
/// 0.5 to each count.
pub fn tlogit(counts: CaptureCounts, level: f64) -> Result<IntervalResult> {
    let z = z_two_sided(level)?;
    counts.require_nonempty()?;
    let (n10, n01, n11) = (
        counts.n10 as f64 + 0.5,
        counts.n01 as f64 + 0.5,
        counts.n11 as f64 + 0.5,
    );
    let sigma = sigma2_from(n10, n01, n11).sqrt();
    let ncap = counts.ncap() as f64;
    let k_hat = n01 * n10 / n11;
    Ok(result(
        Method::Tlogit,
        counts,
        level,
        (
            ncap + k_hat * (-z * sigma).exp() - 0.5,
            ncap + k_hat * (z * sigma).exp() - 0.5,
        ),
        ncap + k_hat - 0.5,
        None,
    ))
}

/// The method comparison shown to users: GWD credible at the chosen prior,
/// then Tlogit, Wald and log-normal. Undefined methods carry their error.
pub fn compare(
    counts: CaptureCounts,
    prior: PriorSpec,
    level: f64,
) -> Vec<(Method, Result<IntervalResult>)> {
    vec![
        (Method::GwdCredible, gwd_credible(counts, prior, level)),
        (Method::Tlogit, tlogit(counts, level)),
        (Method::Wald, wald(counts, level)),
        (Method::LogNormal, lognormal(counts, level)),
    ]
}

/// Validate the counts and prior used by [`compare`] without computing anything.
pub fn validate(counts: CaptureCounts, prior: PriorSpec, level: f64) -> Result<()> {
    check_probability("level", level)?;
    posterior(counts, prior).map(|_| ())
}
