//! Inference for two-source capture-recapture experiments based on the
//! generalized Waring distribution.
//!
//! * [`gwd`]: the generalized Waring distribution (mass, distribution
//!   function, quantiles, moments, sampling).
//! * [`petersen`]: capture counts, Waring priors on the number of missed
//!   units and the conjugate posterior.
//! * [`intervals`]: credible and confidence intervals for N.
//! * [`coverage`]: exact coverage and length of interval methods by full
//!   enumeration of the sample space.

pub mod coverage;
pub mod error;
pub mod gwd;
pub mod intervals;
pub mod petersen;
pub mod quadrature;
pub mod special;

pub use coverage::{
    coverage_grid, enumerate_samples, exact_coverage, length_study, multinomial_prob, CoverageCell,
    DetectionProbs, GridSpec, IntervalRule, LengthCap, LengthOptions, LengthReport, MethodSpec,
    SampleCell, SampleSpace,
};
pub use error::{Error, Result};
pub use gwd::{CdfAlgorithm, GwdParams, Moment, NegBinParams, QuantileConvention};
pub use intervals::{IntervalResult, Method};
pub use petersen::{
    posterior, posterior_summary, prior, CaptureCounts, PosteriorSummary, PriorSpec, WaringPrior,
};
