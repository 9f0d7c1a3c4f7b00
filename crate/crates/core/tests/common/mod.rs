//! Property checks shared by the property suites and the acceptance target.
//! Each returns `Err` with a description of the first violation.
#![allow(dead_code)]

use waring_core::coverage::SampleSpace;
use waring_core::gwd::{log_pochhammer, ATOM_TOLERANCE};
use waring_core::petersen::hypergeom_pmf;
use waring_core::quadrature::{integrate, QuadratureOptions};
use waring_core::special::{ln_beta, normal_cdf, CompensatedSum};
use waring_core::{
    posterior, prior, CaptureCounts, DetectionProbs, GwdParams, Moment, NegBinParams, PriorSpec,
    QuantileConvention,
};

pub type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

pub fn gwd(a: f64, b: f64, c: f64) -> GwdParams {
    GwdParams::new(a, b, c).unwrap()
}

/// Posteriors of the four reference data sets for ell = 2 and 3.
pub fn reference_posteriors() -> Vec<GwdParams> {
    let mut out = Vec::new();
    for (n10, n01, n11) in [(493, 142, 7), (511, 232, 89), (1, 7, 5), (10, 3, 3)] {
        for ell in [2.0, 3.0] {
            out.push(
                posterior(
                    CaptureCounts::new(n10, n01, n11),
                    PriorSpec::new(ell).unwrap(),
                )
                .unwrap(),
            );
        }
    }
    out
}

/// Σ_{k<=M} pmf(k) + tail_bound(M) is within 1e-9 of 1 at the adaptive truncation point.
pub fn normalization(g: &GwdParams) -> Check {
    let m = g
        .truncation_point(1e-10)
        .ok_or_else(|| format!("{g:?}: no truncation point"))?;
    let head = g.cdf_summation(m as i64);
    let tail = g.tail_bound(m).unwrap();
    let total = head + tail;
    ensure!(
        (1.0 - 1e-9..=1.0 + 1e-9).contains(&total) && head <= 1.0 + 1e-9,
        "{g:?}: head {head} + tail {tail} = {total} at M = {m}"
    );
    Ok(())
}

/// The distribution function never decreases and survival(k) + cdf(k-1) = 1.
pub fn monotone_and_complementary(g: &GwdParams, upto: u64) -> Check {
    let mut prev = 0.0;
    for k in 0..=upto {
        let f = g.cdf(k as i64).map_err(|e| e.to_string())?;
        ensure!(
            f + 1e-15 >= prev,
            "{g:?}: cdf({k}) = {f} < cdf({}) = {prev}",
            k.saturating_sub(1)
        );
        prev = f;
        let s = g.survival(k).map_err(|e| e.to_string())?;
        let below = g.cdf(k as i64 - 1).map_err(|e| e.to_string())?;
        ensure!(
            (s + below - 1.0).abs() <= 1e-12,
            "{g:?}: survival({k}) + cdf({k}-1) = {}",
            s + below
        );
    }
    Ok(())
}

/// Compensated summation and mixture quadrature agree to 1e-8.
pub fn oracle_agreement(g: &GwdParams, k: u64) -> Check {
    let s = g.cdf_summation(k as i64);
    let q = g
        .cdf_quadrature(k as i64)
        .map_err(|e| format!("{g:?} k={k}: {e}"))?;
    ensure!(
        (s - q).abs() <= 1e-8,
        "{g:?} k={k}: summation {s} vs quadrature {q}"
    );
    Ok(())
}

fn reference_cdf(g: &GwdParams, k: i64) -> f64 {
    if k < 200_000 {
        g.cdf_summation(k)
    } else {
        g.cdf(k).unwrap()
    }
}

/// cdf(quantile(q)) >= q and cdf(quantile(q) - 1) < q, with the documented
/// tolerance for levels hit exactly by the distribution function.
pub fn galois(g: &GwdParams, q: f64) -> Check {
    let m = g.quantile(q).map_err(|e| e.to_string())?;
    let at = reference_cdf(g, m as i64);
    ensure!(
        at >= q - ATOM_TOLERANCE,
        "{g:?}: cdf(q({q}) = {m}) = {at} < {q}"
    );
    if m > 0 {
        let below = reference_cdf(g, m as i64 - 1);
        ensure!(
            below < q,
            "{g:?}: cdf(q({q}) - 1 = {}) = {below} >= {q}",
            m - 1
        );
    }
    let strict = g
        .quantile_with(q, QuantileConvention::StrictTail)
        .map_err(|e| e.to_string())?;
    ensure!(
        strict == m || strict == m + 1,
        "{g:?}: strict {strict} vs {m} at {q}"
    );
    Ok(())
}

/// Y - m given Y >= m is GWD(1, b+m, c+m).
pub fn prop1_shift(b: f64, c: f64, m: u64, upto: u64) -> Check {
    let g = gwd(1.0, b, c);
    let shifted = g.shift_conditional(m).map_err(|e| e.to_string())?;
    let denom = g.survival(m).map_err(|e| e.to_string())?;
    for k in 0..=upto {
        let lhs = g.pmf(m + k) / denom;
        let rhs = shifted.pmf(k);
        ensure!(
            (lhs - rhs).abs() <= 1e-12,
            "GWD(1,{b},{c}) m={m} k={k}: {lhs} vs {rhs}"
        );
    }
    Ok(())
}

/// For a = 1, 1 - cdf(k-1) = (b)_k / (c-1)_k.
pub fn prop1_survival(b: f64, c: f64, upto: u64) -> Check {
    let g = gwd(1.0, b, c);
    for k in 0..=upto {
        let lhs = 1.0 - g.cdf_summation(k as i64 - 1);
        let rhs = (log_pochhammer(b, k) - log_pochhammer(c - 1.0, k)).exp();
        ensure!(
            (lhs - rhs).abs() <= 1e-12,
            "GWD(1,{b},{c}) k={k}: {lhs} vs {rhs}"
        );
    }
    Ok(())
}

fn ratios_constant(label: &str, logs: &[(u64, f64)], rel: f64) -> Check {
    let Some(&(_, first)) = logs.first() else {
        return Ok(());
    };
    for &(k, v) in logs {
        let r = (v - first).exp();
        ensure!(
            (r - 1.0).abs() <= rel,
            "{label}: ratio at k={k} is {r} times the ratio at the first k"
        );
    }
    Ok(())
}

/// Hypergeometric likelihood in N = ncap + k is proportional to
/// (n01+1)_k (n10+1)_k / ((ncap+1)_k k!).
pub fn hypergeom_proportional(counts: CaptureCounts, upto: u64) -> Check {
    let (a, b, c) = (
        counts.n01 as f64 + 1.0,
        counts.n10 as f64 + 1.0,
        counts.ncap() as f64 + 1.0,
    );
    let mut logs = Vec::new();
    for k in 0..=upto {
        let h = hypergeom_pmf(
            counts.n11,
            counts.ncap() + k,
            counts.n1dot(),
            counts.ndot1(),
        )
        .map_err(|e| e.to_string())?;
        if h <= 0.0 {
            continue;
        }
        let kernel = log_pochhammer(a, k) + log_pochhammer(b, k)
            - log_pochhammer(c, k)
            - waring_core::special::ln_factorial(k);
        logs.push((k, h.ln() - kernel));
    }
    ratios_constant(&format!("{counts:?}"), &logs, 1e-10)
}

/// Posterior mass is proportional to prior mass times the likelihood.
pub fn conjugacy(counts: CaptureCounts, ell: f64, upto: u64) -> Check {
    let spec = PriorSpec::new(ell).unwrap();
    let post = posterior(counts, spec).map_err(|e| e.to_string())?;
    let pri = prior(counts.ncap(), spec).map_err(|e| e.to_string())?;
    let mut logs = Vec::new();
    for k in 0..=upto {
        let h = hypergeom_pmf(
            counts.n11,
            counts.ncap() + k,
            counts.n1dot(),
            counts.ndot1(),
        )
        .map_err(|e| e.to_string())?;
        if h <= 0.0 {
            continue;
        }
        logs.push((k, post.ln_pmf(k) - pri.ln_unnormalized(k) - h.ln()));
    }
    ratios_constant(&format!("{counts:?} ell={ell}"), &logs, 1e-10)
}

/// ∫ NB(k; a, p) Beta(p; c-a-b, b) dp equals the GWD mass.
pub fn mixture_equivalence(g: &GwdParams, upto: u64) -> Check {
    let (alpha, beta) = g.mixing_beta();
    let opts = QuadratureOptions {
        abs_tol: 1e-12,
        max_subdivisions: 2000,
    };
    let ln_b = ln_beta(alpha, beta);
    for k in 0..=upto {
        let nb = |p: f64| match p {
            p if p <= 0.0 => 0.0,
            p if p >= 1.0 => f64::from(k == 0),
            p => NegBinParams::new(g.a(), p).unwrap().pmf(k),
        };
        // p = x^2 on [0, 1/2] and 1 - p = y^2 on [1/2, 1] keep the Beta weight
        // bounded for exponents down to 1/2
        let left = |x: f64| {
            let p = x * x;
            if x <= 0.0 {
                return 0.0;
            }
            nb(p) * ((2.0 * alpha - 1.0) * x.ln() + (beta - 1.0) * (-p).ln_1p() - ln_b).exp() * 2.0
        };
        let right = |y: f64| {
            let p = 1.0 - y * y;
            if y <= 0.0 {
                return 0.0;
            }
            nb(p) * ((alpha - 1.0) * p.ln() + (2.0 * beta - 1.0) * y.ln() - ln_b).exp() * 2.0
        };
        let r = 0.5f64.sqrt();
        let v = integrate(left, 0.0, r, &[], opts)
            .and_then(|a| Ok(a.value + integrate(right, 0.0, r, &[], opts)?.value))
            .map_err(|e| format!("{g:?} k={k}: {e}"))?;
        ensure!(
            (v - g.pmf(k)).abs() <= 1e-9,
            "{g:?} k={k}: mixture {v} vs pmf {}",
            g.pmf(k)
        );
    }
    Ok(())
}

/// mode() is the smallest maximizer of the mass function on 0..10*mode+100.
pub fn mode_is_argmax(g: &GwdParams) -> Check {
    let mode = g.mode();
    let end = 10 * mode + 100;
    let mut best = 0u64;
    let mut best_p = g.pmf(0);
    for k in 1..=end {
        let p = g.pmf(k);
        if p > best_p {
            best = k;
            best_p = p;
        }
    }
    if best == mode {
        return Ok(());
    }
    // a tie between mode and mode + 1 may be resolved either way by rounding
    let tie = (g.pmf(mode) - g.pmf(mode + 1)).abs();
    ensure!(
        best == mode + 1 && tie <= 1e-14 && (g.ratio(mode) - 1.0).abs() <= ATOM_TOLERANCE,
        "{g:?}: mode {mode} but argmax {best}"
    );
    Ok(())
}

/// Closed-form mean and variance against truncated sums.
pub fn moments_match_sums(g: &GwdParams) -> Check {
    let (m1, m2) = match (g.mean(), g.variance()) {
        (Moment::Finite(m), Moment::Finite(v)) => (m, v),
        _ => return Err(format!("{g:?}: moments are not finite")),
    };
    let mut s1 = CompensatedSum::new();
    let mut s2 = CompensatedSum::new();
    let s = g.tail_index();
    let mut p = g.pmf(0);
    let mut k = 0u64;
    loop {
        let kf = k as f64;
        s1.add(kf * p);
        s2.add(kf * kf * p);
        // Σ_{j>k} j² pmf(j) is of order k³ pmf(k) / (s - 2)
        if k > g.mode() && kf.powi(3) * p / (s - 2.0) < 1e-9 * s2.value().max(1e-300) {
            break;
        }
        ensure!(k < 50_000_000, "{g:?}: truncated sums did not settle");
        p *= g.ratio(k);
        k += 1;
        if k.is_multiple_of(1024) {
            p = g.pmf(k);
        }
    }
    let mean = s1.value();
    let var = s2.value() - mean * mean;
    ensure!(
        ((mean - m1) / m1).abs() <= 1e-6,
        "{g:?}: mean {m1} vs sum {mean}"
    );
    ensure!(
        ((var - m2) / m2).abs() <= 1e-6,
        "{g:?}: variance {m2} vs sum {var}"
    );
    Ok(())
}

/// Largest gap between the standardized GWD(n, n, 3n) distribution function
/// and the standard normal at 0, ±1, ±2.
pub fn normal_limit_gap(n: f64) -> f64 {
    let g = gwd(n, n, 3.0 * n);
    let mean = g.mean().finite().unwrap();
    let sd = g.variance().finite().unwrap().sqrt();
    [-2.0, -1.0, 0.0, 1.0, 2.0]
        .iter()
        .map(|&z| {
            let k = (mean + z * sd).floor() as i64;
            (g.cdf(k).unwrap() - normal_cdf(z)).abs()
        })
        .fold(0.0, f64::max)
}

/// The normal gap shrinks with n and is within `tol` from `n_ok` on.
pub fn normal_limit(n_ok: f64, tol: f64) -> Check {
    let gaps: Vec<f64> = [n_ok / 4.0, n_ok, 4.0 * n_ok]
        .iter()
        .map(|&n| normal_limit_gap(n))
        .collect();
    ensure!(
        gaps[0] > gaps[1] && gaps[1] > gaps[2],
        "gaps do not shrink: {gaps:?}"
    );
    ensure!(gaps[1] <= tol, "gap {} at n = {n_ok}", gaps[1]);
    Ok(())
}

/// GWD(2, n, 2n+2) against NB(2, 1/2) pointwise.
pub fn negative_binomial_limit(n: f64) -> Check {
    let g = gwd(2.0, n, 2.0 * n + 2.0);
    let p = g.tail_index() / (g.c() - g.a());
    let nb = NegBinParams::new(2.0, p).unwrap();
    for k in 0..=60 {
        ensure!(
            (g.pmf(k) - nb.pmf(k)).abs() <= 0.005,
            "k={k}: {} vs {}",
            g.pmf(k),
            nb.pmf(k)
        );
    }
    Ok(())
}

/// Multinomial masses over the whole sample space sum to one.
pub fn multinomial_mass(n: u64, p1: f64, p2: f64) -> Check {
    let space = SampleSpace::new(n).map_err(|e| e.to_string())?;
    let total = space.total_mass(DetectionProbs::new(p1, p2).unwrap());
    ensure!(
        (total - 1.0).abs() <= 1e-10,
        "N={n} ({p1},{p2}): total mass {total}"
    );
    Ok(())
}
