//! Moment-based parameter recovery for Gaussian mixtures.
//!
//! The crate provides:
//!
//! - truncated multivariate power series ([`series`]), the engine behind the
//!   moment/cumulant transforms ([`cumulants`]);
//! - exact forward moment maps for Gaussians, mixtures and data samples
//!   ([`moments`]);
//! - real-root extraction for the degree-9 recovery polynomial ([`rootfind`]);
//! - the full method-of-moments solver for two-component univariate mixtures
//!   ([`pearson`]);
//! - numerical membership tests for moment varieties and their secants
//!   ([`varieties`]);
//! - an EM / log-likelihood baseline ([`em`]) and synthetic datasets
//!   ([`datasets`]).

pub mod cumulants;
pub mod datasets;
mod dd;
pub mod em;
mod error;
pub mod moments;
pub mod pearson;
pub mod rootfind;
pub mod series;
pub mod varieties;

pub use cumulants::{cumulants_to_moments, moments_to_cumulants, CumulantVector};
pub use datasets::{sample_mixture, special_cumulants, special_data, SpecialCumulants, SpecialDataSpec};
pub use em::{em_fit, log_likelihood, EmOptions, EmResult};
pub use error::{Error, Result};
pub use moments::{
    gaussian_moments_1d, gaussian_moments_nd, mixture_moments, sample_moments, Dataset,
    GaussianComponent, MixtureModel, MomentVector,
};
pub use pearson::{
    candidate_from_ps, equal_means_fit, fit_mom, fit_mom_likelihood, pearson_nonic, recover_s,
    CandidateBranch, FitReport, PearsonCandidate, RejectReason, SelectionRule,
};
pub use rootfind::{real_roots, RootSet, UnivariatePolynomial, DEFAULT_ROOT_TOL};
pub use series::{MultiIndex, TruncatedSeries};
pub use varieties::{
    build_hd, hankel_rank, hd_left_kernel, hilbert_burch_residual, residual_g1d,
    secant2_equation_values, secant2_g16_membership, secant2_residuals, veronese_residual,
    zero_mean_quartic, MatrixReal, MembershipVerdict, DEFAULT_MEMBERSHIP_TOL,
    DEFAULT_M6_MATCH_RTOL, DEFAULT_RANK_RTOL,
};
