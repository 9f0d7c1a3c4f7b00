//! Exact frequentist evaluation of interval methods.
//!
//! For a population of size N every sample `(n10, n01, n11)` with
//! `n10 + n01 + n11 <= N` is enumerated once. Intervals depend only on the
//! counts, so they are computed once per cell and reused for every pair of
//! detection probabilities.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::intervals::{self, Method};
use crate::petersen::{CaptureCounts, PriorSpec};
use crate::special::{ln_factorial, CompensatedSum};

/// Detection probabilities of the two sources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionProbs {
    p1: f64,
    p2: f64,
}

impl DetectionProbs {
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        check_probability("p1", p1)?;
        check_probability("p2", p2)?;
        Ok(Self { p1, p2 })
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p2(&self) -> f64 {
        self.p2
    }

    pub fn swapped(&self) -> Self {
        Self {
            p1: self.p2,
            p2: self.p1,
        }
    }
}

/// One possible sample for a population of size `counts.ncap() + k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct SampleCell {
    pub counts: CaptureCounts,
    /// Units missed by both sources.
    pub k: u64,
}

/// `C(n, 3)` as an exact integer.
pub fn choose3(n: u64) -> u64 {
    if n < 3 {
        0
    } else {
        n * (n - 1) * (n - 2) / 6
    }
}

/// Every sample for population size `n`, `C(n+3, 3)` in all, ordered by
/// `n11`, then `n10`, then `n01`.
pub fn enumerate_samples(n: u64) -> impl Iterator<Item = SampleCell> {
    (0..=n).flat_map(move |n11| {
        (0..=n - n11).flat_map(move |n10| {
            (0..=n - n11 - n10).map(move |n01| SampleCell {
                counts: CaptureCounts::new(n10, n01, n11),
                k: n - n11 - n10 - n01,
            })
        })
    })
}

/// Multinomial probability of `cell` for a population of size `n`.
///
/// # Panics
/// If the cell does not add up to `n`.
pub fn multinomial_prob(cell: SampleCell, n: u64, probs: DetectionProbs) -> f64 {
    assert_eq!(
        cell.counts.ncap() + cell.k,
        n,
        "cell does not belong to N = {n}"
    );
    let lf = |k: u64| ln_factorial(k);
    let ln_coef =
        lf(n) - lf(cell.counts.n11) - lf(cell.counts.n10) - lf(cell.counts.n01) - lf(cell.k);
    (ln_coef + CellLogProbs::new(probs).dot(cell)).exp()
}

#[derive(Clone, Copy)]
struct CellLogProbs {
    both: f64,
    first: f64,
    second: f64,
    neither: f64,
}

impl CellLogProbs {
    fn new(probs: DetectionProbs) -> Self {
        let (p1, p2) = (probs.p1, probs.p2);
        Self {
            both: (p1 * p2).ln(),
            first: p1.ln() + (-p2).ln_1p(),
            second: (-p1).ln_1p() + p2.ln(),
            neither: (-p1).ln_1p() + (-p2).ln_1p(),
        }
    }

    #[inline]
    fn dot(&self, cell: SampleCell) -> f64 {
        // 0 * ln(p) must stay 0 even if ln(p) underflows to -inf
        let term = |n: u64, lp: f64| if n == 0 { 0.0 } else { n as f64 * lp };
        term(cell.counts.n11, self.both)
            + term(cell.counts.n10, self.first)
            + term(cell.counts.n01, self.second)
            + term(cell.k, self.neither)
    }
}

/// Cells of one population size together with their log multinomial coefficients.
#[derive(Debug, Clone)]
pub struct SampleSpace {
    n: u64,
    cells: Vec<SampleCell>,
    ln_coef: Vec<f64>,
}

impl SampleSpace {
    pub fn new(n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "N",
                value: 0.0,
                reason: "population size must be at least 1",
            });
        }
        let lf: Vec<f64> = (0..=n).map(ln_factorial).collect();
        let cells: Vec<SampleCell> = enumerate_samples(n).collect();
        let ln_coef = cells
            .iter()
            .map(|c| {
                lf[n as usize]
                    - lf[c.counts.n11 as usize]
                    - lf[c.counts.n10 as usize]
                    - lf[c.counts.n01 as usize]
                    - lf[c.k as usize]
            })
            .collect();
        Ok(Self { n, cells, ln_coef })
    }

    pub fn population(&self) -> u64 {
        self.n
    }

    pub fn cells(&self) -> &[SampleCell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Probability of the cell at `index`.
    #[inline]
    pub fn prob(&self, index: usize, probs: DetectionProbs) -> f64 {
        self.prob_with(index, &CellLogProbs::new(probs))
    }

    #[inline]
    fn prob_with(&self, index: usize, lp: &CellLogProbs) -> f64 {
        (self.ln_coef[index] + lp.dot(self.cells[index])).exp()
    }

    /// Total multinomial mass, 1 up to rounding.
    pub fn total_mass(&self, probs: DetectionProbs) -> f64 {
        let lp = CellLogProbs::new(probs);
        (0..self.len())
            .map(|i| self.prob_with(i, &lp))
            .collect::<CompensatedSum>()
            .value()
    }
}

/// Anything that maps counts to an interval for N; `None` marks counts for
/// which the method is undefined.
pub trait IntervalRule: Sync {
    fn bounds(&self, counts: CaptureCounts, level: f64) -> Option<(f64, f64)>;
}

impl<F> IntervalRule for F
where
    F: Fn(CaptureCounts, f64) -> Option<(f64, f64)> + Sync,
{
    fn bounds(&self, counts: CaptureCounts, level: f64) -> Option<(f64, f64)> {
        self(counts, level)
    }
}

/// A built-in method, with its prior for the GWD-based ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MethodSpec {
    Gwd { ell: f64 },
    GwdNormalApprox { ell: f64 },
    Tlogit,
    Wald,
    WaldChapman,
    LogNormal,
}

impl MethodSpec {
    pub fn method(&self) -> Method {
        match self {
            MethodSpec::Gwd { .. } => Method::GwdCredible,
            MethodSpec::GwdNormalApprox { .. } => Method::GwdNormalApprox,
            MethodSpec::Tlogit => Method::Tlogit,
            MethodSpec::Wald => Method::Wald,
            MethodSpec::WaldChapman => Method::WaldChapman,
            MethodSpec::LogNormal => Method::LogNormal,
        }
    }

    pub fn ell(&self) -> Option<f64> {
        match *self {
            MethodSpec::Gwd { ell } | MethodSpec::GwdNormalApprox { ell } => Some(ell),
            _ => None,
        }
    }

    pub fn interval(&self, counts: CaptureCounts, level: f64) -> Result<intervals::IntervalResult> {
        match *self {
            MethodSpec::Gwd { ell } => intervals::gwd_credible(counts, PriorSpec::new(ell)?, level),
            MethodSpec::GwdNormalApprox { ell } => {
                intervals::gwd_normal_approx(counts, PriorSpec::new(ell)?, level)
            }
            MethodSpec::Tlogit => intervals::tlogit(counts, level),
            MethodSpec::Wald => intervals::wald(counts, level),
            MethodSpec::WaldChapman => intervals::wald_chapman(counts, level),
            MethodSpec::LogNormal => intervals::lognormal(counts, level),
        }
    }
}

impl IntervalRule for MethodSpec {
    fn bounds(&self, counts: CaptureCounts, level: f64) -> Option<(f64, f64)> {
        self.interval(counts, level).ok().map(|r| (r.lb, r.ub))
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodSpec::Gwd { ell } => write!(f, "gwd:{ell}"),
            MethodSpec::GwdNormalApprox { ell } => write!(f, "gwd_normal_approx:{ell}"),
            other => f.write_str(other.method().name()),
        }
    }
}

impl FromStr for MethodSpec {
    type Err = String;

    /// Accepts `gwd:<ell>`, `gwd<ell>`, `gwd_normal_approx:<ell>`, `tlogit`,
    /// `wald`, `wald_chapman` and `lognormal`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        let parse_ell = |t: &str| -> std::result::Result<f64, String> {
            let ell: f64 = t
                .parse()
                .map_err(|_| format!("invalid ell `{t}` in method `{s}`"))?;
            PriorSpec::new(ell).map_err(|e| e.to_string())?;
            Ok(ell)
        };
        match s.as_str() {
            "tlogit" => Ok(MethodSpec::Tlogit),
            "wald" => Ok(MethodSpec::Wald),
            "wald_chapman" | "chapman" => Ok(MethodSpec::WaldChapman),
            "lognormal" | "log_normal" => Ok(MethodSpec::LogNormal),
            _ => {
                if let Some(rest) = s.strip_prefix("gwd_normal_approx:") {
                    Ok(MethodSpec::GwdNormalApprox {
                        ell: parse_ell(rest)?,
                    })
                } else if let Some(rest) = s.strip_prefix("gwd") {
                    Ok(MethodSpec::Gwd {
                        ell: parse_ell(rest.trim_start_matches(':'))?,
                    })
                } else {
                    Err(format!(
                        "unknown method `{s}`; expected gwd:<ell>, tlogit, wald, wald_chapman, lognormal or gwd_normal_approx:<ell>"
                    ))
                }
            }
        }
    }
}

/// Intervals of one rule for every cell of a [`SampleSpace`], in cell order.
#[derive(Debug, Clone)]
pub struct IntervalTable {
    pub level: f64,
    pub bounds: Vec<Option<(f64, f64)>>,
}

impl IntervalTable {
    pub fn build<R: IntervalRule + ?Sized>(space: &SampleSpace, rule: &R, level: f64) -> Self {
        let bounds = space
            .cells()
            .par_iter()
            .map(|c| rule.bounds(c.counts, level))
            .collect();
        Self { level, bounds }
    }
}

/// Exact coverage and expected relative length for one grid point.
#[derive(Debug, Clone, Serialize)]
pub struct CoverageCell {
    #[serde(rename = "N")]
    pub n: u64,
    pub probs: DetectionProbs,
    pub method: Method,
    pub ell: Option<f64>,
    pub level: f64,
    pub coverage: f64,
    /// `E[(ub - lb) / N]` over the samples where the method is defined.
    pub expected_rel_length: Option<f64>,
    /// Probability of drawing a sample where the method is undefined.
    pub undefined_mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Tally {
    coverage: f64,
    rel_length: Option<f64>,
    undefined_mass: f64,
}

fn tally<I>(space: &SampleSpace, probs: DetectionProbs, bounds: I) -> Tally
where
    I: Iterator<Item = Option<(f64, f64)>>,
{
    let n = space.population() as f64;
    let lp = CellLogProbs::new(probs);
    let mut covered = CompensatedSum::new();
    let mut length = CompensatedSum::new();
    let mut defined = CompensatedSum::new();
    let mut undefined = CompensatedSum::new();
    for (i, b) in bounds.enumerate() {
        let w = space.prob_with(i, &lp);
        match b {
            Some((lb, ub)) => {
                if lb <= n && n <= ub {
                    covered.add(w);
                }
                defined.add(w);
                length.add(w * (ub - lb) / n);
            }
            None => undefined.add(w),
        }
    }
    let defined = defined.value();
    Tally {
        coverage: covered.value().clamp(0.0, 1.0),
        rel_length: (defined > 0.0).then(|| length.value() / defined),
        undefined_mass: undefined.value(),
    }
}

fn coverage_cell(
    space: &SampleSpace,
    probs: DetectionProbs,
    spec: &MethodSpec,
    level: f64,
    t: Tally,
) -> CoverageCell {
    CoverageCell {
        n: space.population(),
        probs,
        method: spec.method(),
        ell: spec.ell(),
        level,
        coverage: t.coverage,
        expected_rel_length: t.rel_length,
        undefined_mass: t.undefined_mass,
    }
}

/// Coverage of a rule whose intervals are already tabulated.
pub fn coverage_from_table(
    space: &SampleSpace,
    table: &IntervalTable,
    probs: DetectionProbs,
) -> (f64, Option<f64>) {
    let t = tally(space, probs, table.bounds.iter().copied());
    (t.coverage, t.rel_length)
}

/// Coverage of an arbitrary rule, evaluating the rule cell by cell with no table.
pub fn coverage_direct<R: IntervalRule + ?Sized>(
    space: &SampleSpace,
    rule: &R,
    level: f64,
    probs: DetectionProbs,
) -> (f64, Option<f64>) {
    let t = tally(
        space,
        probs,
        space.cells().iter().map(|c| rule.bounds(c.counts, level)),
    );
    (t.coverage, t.rel_length)
}

/// Coverage cell of a built-in method whose intervals are already tabulated.
pub fn coverage_cell_from_table(
    space: &SampleSpace,
    table: &IntervalTable,
    spec: &MethodSpec,
    probs: DetectionProbs,
) -> CoverageCell {
    let t = tally(space, probs, table.bounds.iter().copied());
    coverage_cell(space, probs, spec, table.level, t)
}

/// Exact coverage of a built-in method at one grid point.
pub fn exact_coverage(
    n: u64,
    probs: DetectionProbs,
    spec: MethodSpec,
    level: f64,
) -> Result<CoverageCell> {
    check_probability("level", level)?;
    let space = SampleSpace::new(n)?;
    let table = IntervalTable::build(&space, &spec, level);
    let t = tally(&space, probs, table.bounds.iter().copied());
    Ok(coverage_cell(&space, probs, &spec, level, t))
}

/// Probability values for the two axes of a coverage grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
}

impl GridSpec {
    /// The same arithmetic progression `start, start+step, ..., <= stop` on both axes.
    pub fn regular(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidParameter {
                name: "step",
                value: step,
                reason: "must be positive",
            });
        }
        check_probability("grid start", start)?;
        check_probability("grid stop", stop)?;
        let count = ((stop - start) / step + 1e-9).floor();
        if count < 0.0 {
            return Err(Error::InvalidParameter {
                name: "grid stop",
                value: stop,
                reason: "must not be below the start",
            });
        }
        let points: Vec<f64> = (0..=count as usize)
            .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
            .collect();
        Ok(Self {
            p1: points.clone(),
            p2: points,
        })
    }

    pub fn single(p1: f64, p2: f64) -> Self {
        Self {
            p1: vec![p1],
            p2: vec![p2],
        }
    }

    /// All grid points, `p1` varying slowest.
    pub fn points(&self) -> Result<Vec<DetectionProbs>> {
        let mut out = Vec::with_capacity(self.p1.len() * self.p2.len());
        for &p1 in &self.p1 {
            for &p2 in &self.p2 {
                out.push(DetectionProbs::new(p1, p2)?);
            }
        }
        Ok(out)
    }
}

impl Default for GridSpec {
    /// 0.10, 0.15, ..., 0.90 on both axes.
    fn default() -> Self {
        Self::regular(0.1, 0.9, 0.05).expect("default grid is valid")
    }
}

/// Coverage for the full cross of grid points and methods, ordered by `p1`,
/// then `p2`, then method.
pub fn coverage_grid(
    n: u64,
    grid: &GridSpec,
    methods: &[MethodSpec],
    level: f64,
) -> Result<Vec<CoverageCell>> {
    check_probability("level", level)?;
    let space = SampleSpace::new(n)?;
    let points = grid.points()?;
    let tables: Vec<IntervalTable> = methods
        .iter()
        .map(|m| IntervalTable::build(&space, m, level))
        .collect();
    let jobs: Vec<(DetectionProbs, usize)> = points
        .iter()
        .flat_map(|&p| (0..methods.len()).map(move |m| (p, m)))
        .collect();
    Ok(jobs
        .par_iter()
        .map(|&(probs, m)| coverage_cell_from_table(&space, &tables[m], &methods[m], probs))
        .collect())
}

/// Which length the discard threshold applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthCap {
    /// `(ub - lb) / N`
    Relative,
    /// `ub - lb`
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthOptions {
    /// Cells where either length exceeds this are discarded.
    pub cap: f64,
    pub cap_kind: LengthCap,
    /// Round interval endpoints to the nearest integer before measuring.
    pub round_endpoints: bool,
    /// Smallest `n11` kept.
    pub min_n11: u64,
}

impl Default for LengthOptions {
    fn default() -> Self {
        Self {
            cap: 50.0,
            cap_kind: LengthCap::Relative,
            round_endpoints: true,
            min_n11: 2,
        }
    }
}

/// Minimum, quartiles and maximum (type 7 interpolation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl FiveNumber {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let h = p * (v.len() - 1) as f64;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(v.len() - 1);
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Some(Self {
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LengthRow {
    pub counts: CaptureCounts,
    pub rel_len_first: f64,
    pub rel_len_second: f64,
    /// The second method is strictly longer.
    pub second_longer: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LengthReport {
    #[serde(rename = "N")]
    pub n: u64,
    pub level: f64,
    pub options: LengthOptions,
    /// Cells with `n11 >= min_n11`.
    pub candidates: usize,
    /// Candidates left after the length cap; cells where either method is
    /// undefined are dropped as well.
    pub retained: usize,
    pub second_longer: usize,
    /// Percentage of retained cells where the second method is strictly longer.
    pub second_longer_pct: f64,
    pub first_summary: Option<FiveNumber>,
    pub second_summary: Option<FiveNumber>,
    pub rows: Vec<LengthRow>,
}

/// Relative lengths of GWD ℓ=2 against Tlogit over the samples with `n11 >= 2`.
pub fn length_study(n: u64, level: f64, opts: LengthOptions) -> Result<LengthReport> {
    length_study_with(
        n,
        level,
        &MethodSpec::Gwd { ell: 2.0 },
        &MethodSpec::Tlogit,
        opts,
    )
}

/// Length comparison of two arbitrary rules.
pub fn length_study_with<A, B>(
    n: u64,
    level: f64,
    first: &A,
    second: &B,
    opts: LengthOptions,
) -> Result<LengthReport>
where
    A: IntervalRule + ?Sized,
    B: IntervalRule + ?Sized,
{
    check_probability("level", level)?;
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "N",
            value: 0.0,
            reason: "population size must be at least 1",
        });
    }
    let cells: Vec<CaptureCounts> = enumerate_samples(n)
        .filter(|c| c.counts.n11 >= opts.min_n11)
        .map(|c| c.counts)
        .collect();
    let nf = n as f64;
    let measure = |b: Option<(f64, f64)>| {
        b.map(|(lb, ub)| {
            let len = if opts.round_endpoints {
                ub.round() - lb.round()
            } else {
                ub - lb
            };
            match opts.cap_kind {
                LengthCap::Relative => (len / nf, len / nf),
                LengthCap::Absolute => (len / nf, len),
            }
        })
    };
    let measured: Vec<Option<LengthRow>> = cells
        .par_iter()
        .map(|&counts| {
            let (ra, ca) = measure(first.bounds(counts, level))?;
            let (rb, cb) = measure(second.bounds(counts, level))?;
            (ca <= opts.cap && cb <= opts.cap).then_some(LengthRow {
                counts,
                rel_len_first: ra,
                rel_len_second: rb,
                second_longer: rb > ra,
            })
        })
        .collect();
    let rows: Vec<LengthRow> = measured.into_iter().flatten().collect();
    let longer = rows.iter().filter(|r| r.second_longer).count();
    let firsts: Vec<f64> = rows.iter().map(|r| r.rel_len_first).collect();
    let seconds: Vec<f64> = rows.iter().map(|r| r.rel_len_second).collect();
    Ok(LengthReport {
        n,
        level,
        options: opts,
        candidates: cells.len(),
        retained: rows.len(),
        second_longer: longer,
        second_longer_pct: if rows.is_empty() {
            0.0
        } else {
            100.0 * longer as f64 / rows.len() as f64
        },
        first_summary: FiveNumber::of(&firsts),
        second_summary: FiveNumber::of(&seconds),
        rows,
    })
}
