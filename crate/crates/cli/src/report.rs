//! Computations shared by the command line and the HTTP service, so both
//! return the same numbers for the same input.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use waring_core::coverage::LengthRow;
use waring_core::gwd::ATOM_TOLERANCE;
use waring_core::intervals::{self, Method};
use waring_core::{
    posterior, posterior_summary, prior, CaptureCounts, CoverageCell, Error, GwdParams,
    LengthReport, MethodSpec, PriorSpec, QuantileConvention,
};

use crate::format::{fixed, fixed_opt, round6, round6_opt};

/// Input problems, keyed by the offending field, or a model that cannot be fitted.
#[derive(Debug, Clone, PartialEq)]
pub enum ReportError {
    Invalid(BTreeMap<String, String>),
    Improper(String),
    /// Valid input on which a numerical routine failed.
    Intractable(String),
}

impl ReportError {
    pub fn field(name: &str, message: impl Into<String>) -> Self {
        let mut m = BTreeMap::new();
        m.insert(name.to_string(), message.into());
        ReportError::Invalid(m)
    }
}

impl fmt::Display for ReportError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReportError::Invalid(fields) => {
                let parts: Vec<String> = fields.iter().map(|(k, v)| format!("{k}: {v}")).collect();
                write!(f, "invalid input: {}", parts.join("; "))
            }
            ReportError::Improper(msg) | ReportError::Intractable(msg) => f.write_str(msg),
        }
    }
}

impl std::error::Error for ReportError {}

impl From<Error> for ReportError {
    fn from(e: Error) -> Self {
        match e {
            Error::ImproperPosterior { .. } | Error::Improper { .. } => {
                ReportError::Improper(e.to_string())
            }
            Error::EmptySample => ReportError::field("counts", e.to_string()),
            Error::InvalidParameter { name, .. } => ReportError::field(name, e.to_string()),
            Error::Convergence { .. } => ReportError::Intractable(e.to_string()),
            other => ReportError::field("input", other.to_string()),
        }
    }
}

/// Check `ell >= 0` and `0 < level < 1`, collecting every problem.
pub fn validate_ell_level(ell: f64, level: f64) -> Result<(), ReportError> {
    let mut fields = BTreeMap::new();
    if !(ell.is_finite() && ell >= 0.0) {
        fields.insert(
            "ell".to_string(),
            "must be a finite number >= 0".to_string(),
        );
    }
    if !(level > 0.0 && level < 1.0) {
        fields.insert(
            "level".to_string(),
            "must lie strictly between 0 and 1".to_string(),
        );
    }
    if fields.is_empty() {
        Ok(())
    } else {
        Err(ReportError::Invalid(fields))
    }
}

/// Interval methods selectable by name; the GWD ones use the requested ell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodName {
    Gwd,
    Tlogit,
    Wald,
    LogNormal,
    WaldChapman,
    GwdNormalApprox,
}

impl MethodName {
    pub const DEFAULT: [MethodName; 4] = [
        MethodName::Gwd,
        MethodName::Tlogit,
        MethodName::Wald,
        MethodName::LogNormal,
    ];

    pub fn spec(self, ell: f64) -> MethodSpec {
        match self {
            MethodName::Gwd => MethodSpec::Gwd { ell },
            MethodName::Tlogit => MethodSpec::Tlogit,
            MethodName::Wald => MethodSpec::Wald,
            MethodName::LogNormal => MethodSpec::LogNormal,
            MethodName::WaldChapman => MethodSpec::WaldChapman,
            MethodName::GwdNormalApprox => MethodSpec::GwdNormalApprox { ell },
        }
    }
}

impl FromStr for MethodName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gwd" | "gwd_credible" => Ok(MethodName::Gwd),
            "tlogit" => Ok(MethodName::Tlogit),
            "wald" => Ok(MethodName::Wald),
            "lognormal" | "log_normal" => Ok(MethodName::LogNormal),
            "wald_chapman" | "chapman" => Ok(MethodName::WaldChapman),
            "gwd_normal_approx" => Ok(MethodName::GwdNormalApprox),
            other => Err(format!(
                "unknown method `{other}`; expected gwd, tlogit, wald, lognormal, wald_chapman or gwd_normal_approx"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodRow {
    pub method: Method,
    pub ell: Option<f64>,
    pub lb: Option<f64>,
    pub ub: Option<f64>,
    pub point: Option<f64>,
    /// Skewness of the ell = 0 posterior; reported on the GWD row only.
    pub beta1: Option<f64>,
    pub below_ncap: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalReport {
    pub n10: u64,
    pub n01: u64,
    pub n11: u64,
    pub ncap: u64,
    pub ell: f64,
    pub level: f64,
    pub methods: Vec<MethodRow>,
}

/// Intervals for each requested method. An improper posterior fails the
/// whole report when a GWD method is requested; methods that are merely
/// undefined for these counts get a row with an error message.
pub fn interval_report(
    counts: CaptureCounts,
    ell: f64,
    level: f64,
    methods: &[MethodName],
) -> Result<IntervalReport, ReportError> {
    validate_ell_level(ell, level)?;
    if counts.ncap() == 0 {
        return Err(Error::EmptySample.into());
    }
    let needs_posterior = methods
        .iter()
        .any(|m| matches!(m, MethodName::Gwd | MethodName::GwdNormalApprox));
    let beta1 = if needs_posterior {
        let spec = PriorSpec::new(ell)?;
        posterior(counts, spec)?;
        posterior_summary(counts, spec)?.beta1
    } else {
        None
    };
    let rows = methods
        .iter()
        .map(|&m| {
            let spec = m.spec(ell);
            let row_beta1 = if m == MethodName::Gwd {
                round6_opt(beta1)
            } else {
                None
            };
            match spec.interval(counts, level) {
                Ok(r) => MethodRow {
                    method: r.method,
                    ell: r.ell,
                    lb: round6(r.lb),
                    ub: round6(r.ub),
                    point: round6(r.point),
                    beta1: row_beta1,
                    below_ncap: Some(r.below_ncap),
                    error: None,
                },
                Err(e) => MethodRow {
                    method: spec.method(),
                    ell: spec.ell(),
                    lb: None,
                    ub: None,
                    point: None,
                    beta1: row_beta1,
                    below_ncap: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(IntervalReport {
        n10: counts.n10,
        n01: counts.n01,
        n11: counts.n11,
        ncap: counts.ncap(),
        ell,
        level,
        methods: rows,
    })
}

/// Plain-text rendering of an [`IntervalReport`].
pub fn render_interval_report(r: &IntervalReport) -> String {
    let mut out = format!(
        "n10={} n01={} n11={} ncap={} ell={} level={}\n",
        r.n10, r.n01, r.n11, r.ncap, r.ell, r.level
    );
    out.push_str(&format!(
        "{:<18} {:>14} {:>14} {:>14} {:>10}\n",
        "method", "lb", "ub", "point", "beta1"
    ));
    let num = |x: Option<f64>, m: Method| match x {
        Some(v) if m == Method::GwdCredible => crate::format::compact(v),
        Some(v) => fixed(v),
        None => "NA".into(),
    };
    for row in &r.methods {
        let beta1 = if row.method == Method::GwdCredible {
            row.beta1.map_or_else(|| "NA".into(), |b| format!("{b:.1}"))
        } else {
            String::new()
        };
        match &row.error {
            Some(e) => out.push_str(&format!("{:<18} undefined: {e}\n", row.method.name())),
            None => out.push_str(&format!(
                "{:<18} {:>14} {:>14} {:>14} {:>10}\n",
                row.method.name(),
                num(row.lb, row.method),
                num(row.ub, row.method),
                num(row.point, row.method),
                beta1
            )),
        }
    }
    out
}

/// Mass function of K over `0..=q(upper)`, thinned to at most `max_points` values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve {
    pub ncap: u64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub level: f64,
    /// Credible bounds on the N scale.
    pub lb: u64,
    pub ub: u64,
    /// Upper truncation quantile level.
    pub upper: f64,
    /// Distance between consecutive support points; 1 unless thinned.
    pub stride: u64,
    /// Values of K.
    pub support: Vec<u64>,
    /// Values of N = ncap + K.
    pub n: Vec<u64>,
    pub pmf: Vec<f64>,
}

pub const CURVE_UPPER: f64 = 0.999;
pub const DEFAULT_MAX_POINTS: u64 = 50_000;

fn curve(g: &GwdParams, ncap: u64, level: f64, max_points: u64) -> Result<Curve, ReportError> {
    let alpha = 1.0 - level;
    let q = g.quantiles(
        &[0.5 * alpha, 1.0 - 0.5 * alpha, CURVE_UPPER],
        QuantileConvention::CdfAtLeast,
    )?;
    let last = q[2];
    let max_points = max_points.max(2);
    let stride = last.saturating_add(1).div_ceil(max_points).max(1);
    let support: Vec<u64> = (0..=last).step_by(stride as usize).collect();
    let pmf = support.iter().map(|&k| g.pmf(k)).collect();
    Ok(Curve {
        ncap,
        a: g.a(),
        b: g.b(),
        c: g.c(),
        level,
        lb: ncap.saturating_add(q[0]),
        ub: ncap.saturating_add(q[1]),
        upper: CURVE_UPPER,
        stride,
        n: support.iter().map(|&k| ncap.saturating_add(k)).collect(),
        support,
        pmf,
    })
}

/// Posterior of K with its credible bounds.
pub fn posterior_curve(
    counts: CaptureCounts,
    ell: f64,
    level: f64,
    max_points: u64,
) -> Result<Curve, ReportError> {
    validate_ell_level(ell, level)?;
    let g = posterior(counts, PriorSpec::new(ell)?)?;
    curve(&g, counts.ncap(), level, max_points)
}

/// Waring prior of K given `ncap` units caught.
pub fn prior_curve(ncap: u64, ell: f64, level: f64, max_points: u64) -> Result<Curve, ReportError> {
    validate_ell_level(ell, level)?;
    let p = prior(ncap, PriorSpec::new(ell)?)?;
    let g = p.params().map_err(|_| {
        ReportError::Improper(format!(
            "the prior with ell = {ell} is improper; use ell >= 2"
        ))
    })?;
    curve(&g, ncap, level, max_points)
}

pub const COVERAGE_HEADER: &str = "N,p1,p2,method,ell,level,coverage,expected_rel_length";

pub fn coverage_csv_row(c: &CoverageCell) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        c.n,
        fixed(c.probs.p1()),
        fixed(c.probs.p2()),
        c.method.name(),
        fixed_opt(c.ell),
        fixed(c.level),
        fixed(c.coverage),
        fixed_opt(c.expected_rel_length)
    )
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CoverageRecord {
    #[serde(rename = "N")]
    pub n: u64,
    pub p1: Option<f64>,
    pub p2: Option<f64>,
    pub method: Method,
    pub ell: Option<f64>,
    pub level: Option<f64>,
    pub coverage: Option<f64>,
    pub expected_rel_length: Option<f64>,
}

impl From<&CoverageCell> for CoverageRecord {
    fn from(c: &CoverageCell) -> Self {
        Self {
            n: c.n,
            p1: round6(c.probs.p1()),
            p2: round6(c.probs.p2()),
            method: c.method,
            ell: round6_opt(c.ell),
            level: round6(c.level),
            coverage: round6(c.coverage),
            expected_rel_length: round6_opt(c.expected_rel_length),
        }
    }
}

pub const LENGTHS_HEADER: &str = "n10,n01,n11,rel_len_gwd2,rel_len_tlogit,tlogit_longer";

pub fn lengths_csv_row(r: &LengthRow) -> String {
    format!(
        "{},{},{},{},{},{}",
        r.counts.n10,
        r.counts.n01,
        r.counts.n11,
        fixed(r.rel_len_first),
        fixed(r.rel_len_second),
        u8::from(r.second_longer)
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct FiveNumberRecord {
    pub min: Option<f64>,
    pub q1: Option<f64>,
    pub median: Option<f64>,
    pub q3: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LengthSummary {
    #[serde(rename = "N")]
    pub n: u64,
    pub level: Option<f64>,
    pub cap: Option<f64>,
    pub cap_kind: waring_core::LengthCap,
    pub round_endpoints: bool,
    pub candidates: usize,
    pub retained: usize,
    pub tlogit_longer: usize,
    pub tlogit_longer_pct: Option<f64>,
    pub rel_len_gwd2: Option<FiveNumberRecord>,
    pub rel_len_tlogit: Option<FiveNumberRecord>,
}

impl From<&LengthReport> for LengthSummary {
    fn from(r: &LengthReport) -> Self {
        let five = |f: &Option<waring_core::coverage::FiveNumber>| {
            f.map(|s| FiveNumberRecord {
                min: round6(s.min),
                q1: round6(s.q1),
                median: round6(s.median),
                q3: round6(s.q3),
                max: round6(s.max),
            })
        };
        Self {
            n: r.n,
            level: round6(r.level),
            cap: round6(r.options.cap),
            cap_kind: r.options.cap_kind,
            round_endpoints: r.options.round_endpoints,
            candidates: r.candidates,
            retained: r.retained,
            tlogit_longer: r.second_longer,
            tlogit_longer_pct: round6(r.second_longer_pct),
            rel_len_gwd2: five(&r.first_summary),
            rel_len_tlogit: five(&r.second_summary),
        }
    }
}

/// Prior 95th percentiles of K, one row per ell, one column per ncap.
pub const TABLE1_ELLS: [f64; 3] = [2.0, 2.2, 3.0];
pub const TABLE1_NCAPS: [u64; 6] = [1, 2, 5, 10, 20, 50];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Table1Cell {
    pub ell: f64,
    pub ncap: u64,
    /// Smallest k with `P(K <= k) >= 0.95`.
    pub cdf_at_least: u64,
    /// Smallest k with `P(K <= k) > 0.95`.
    pub strict_tail: u64,
}

pub fn table1() -> Result<Vec<Table1Cell>, ReportError> {
    let mut cells = Vec::new();
    for ell in TABLE1_ELLS {
        for ncap in TABLE1_NCAPS {
            let g = prior(ncap, PriorSpec::new(ell)?)?.params()?;
            cells.push(Table1Cell {
                ell,
                ncap,
                cdf_at_least: g.quantile_with(0.95, QuantileConvention::CdfAtLeast)?,
                strict_tail: g.quantile_with(0.95, QuantileConvention::StrictTail)?,
            });
        }
    }
    Ok(cells)
}

pub fn render_table1(cells: &[Table1Cell]) -> String {
    let mut out = String::from("Prior 95th percentile of K = N - ncap\n");
    out.push_str(&format!("{:<8}", "ncap"));
    for n in TABLE1_NCAPS {
        out.push_str(&format!("{n:>10}"));
    }
    out.push('\n');
    let mut ties = false;
    for ell in TABLE1_ELLS {
        out.push_str(&format!("{:<8}", format!("ell={ell}")));
        for c in cells.iter().filter(|c| c.ell == ell) {
            let text = if c.cdf_at_least == c.strict_tail {
                c.cdf_at_least.to_string()
            } else {
                ties = true;
                format!("{}/{}*", c.cdf_at_least, c.strict_tail)
            };
            out.push_str(&format!("{text:>10}"));
        }
        out.push('\n');
    }
    if ties {
        out.push_str(&format!(
            "* P(K <= k) equals 0.95 to within {ATOM_TOLERANCE:e} at the first value; the second is the\n  smallest k with P(K <= k) > 0.95.\n"
        ));
    }
    out
}

pub const TABLE2_DATA: [CaptureCounts; 4] = [
    CaptureCounts::new(493, 142, 7),
    CaptureCounts::new(511, 232, 89),
    CaptureCounts::new(1, 7, 5),
    CaptureCounts::new(10, 3, 3),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bounds {
    pub lb: f64,
    pub ub: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table2Row {
    pub counts: CaptureCounts,
    pub ell2: Bounds,
    pub tlogit: Bounds,
    pub ell3: Bounds,
    pub beta1: Option<f64>,
    /// Bounds that change by one under the strict-tail convention.
    pub convention_sensitive: Vec<String>,
}

pub fn table2(level: f64) -> Result<Vec<Table2Row>, ReportError> {
    validate_ell_level(2.0, level)?;
    TABLE2_DATA
        .iter()
        .map(|&counts| {
            let mut sensitive = Vec::new();
            let mut gwd = |ell: f64| -> Result<Bounds, ReportError> {
                let spec = PriorSpec::new(ell)?;
                let a = intervals::gwd_credible_with(
                    counts,
                    spec,
                    level,
                    QuantileConvention::CdfAtLeast,
                )?;
                let b = intervals::gwd_credible_with(
                    counts,
                    spec,
                    level,
                    QuantileConvention::StrictTail,
                )?;
                if a.lb != b.lb {
                    sensitive.push(format!("ell={ell} lb"));
                }
                if a.ub != b.ub {
                    sensitive.push(format!("ell={ell} ub"));
                }
                Ok(Bounds { lb: a.lb, ub: a.ub })
            };
            let ell2 = gwd(2.0)?;
            let ell3 = gwd(3.0)?;
            let t = intervals::tlogit(counts, level)?;
            Ok(Table2Row {
                counts,
                ell2,
                tlogit: Bounds {
                    lb: round6(t.lb).unwrap_or(f64::NAN),
                    ub: round6(t.ub).unwrap_or(f64::NAN),
                },
                ell3,
                beta1: round6_opt(posterior_summary(counts, PriorSpec::new(2.0)?)?.beta1),
                convention_sensitive: sensitive,
            })
        })
        .collect()
}

pub fn render_table2(rows: &[Table2Row], level: f64) -> String {
    let mut out = format!("{}% intervals (Lb, Ub) for N\n", fixed_pct(level));
    out.push_str(&format!(
        "{:>5} {:>5} {:>5} | {:>7} {:>7} | {:>7} {:>7} | {:>7} {:>7} | {:>6}\n",
        "n10", "n01", "n11", "l=2 Lb", "l=2 Ub", "Tl Lb", "Tl Ub", "l=3 Lb", "l=3 Ub", "beta1"
    ));
    let mut footnotes = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let mark = if r.convention_sensitive.is_empty() {
            " "
        } else {
            footnotes.push(format!(
                "[{}] {} shift by one under the strict-tail quantile convention",
                i + 1,
                r.convention_sensitive.join(", ")
            ));
            "*"
        };
        out.push_str(&format!(
            "{:>5} {:>5} {:>5} | {:>7} {:>7} | {:>7} {:>7} | {:>7} {:>7} | {:>6}{mark}\n",
            r.counts.n10,
            r.counts.n01,
            r.counts.n11,
            r.ell2.lb,
            r.ell2.ub,
            r.tlogit.lb.round(),
            r.tlogit.ub.round(),
            r.ell3.lb,
            r.ell3.ub,
            r.beta1.map_or_else(|| "NA".into(), |b| format!("{b:.1}"))
        ));
    }
    out.push_str("Tlogit bounds rounded to the nearest integer; beta1 is the skewness of the ell=0 posterior.\n");
    for f in footnotes {
        out.push_str(&f);
        out.push('\n');
    }
    out
}

fn fixed_pct(level: f64) -> String {
    let p = level * 100.0;
    if (p - p.round()).abs() < 1e-9 {
        format!("{}", p.round() as i64)
    } else {
        format!("{p}")
    }
}
