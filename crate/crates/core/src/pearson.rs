//! Method-of-moments solver for mixtures of two univariate Gaussians.
//!
//! The pipeline follows the classical recipe: convert moments to cumulants,
//! standardize so the second cumulant is 1, build the degree-9 polynomial in
//! the product of normalized means, keep its real non-positive roots, recover
//! the sum of normalized means for each root, solve for the remaining
//! parameters, and select among valid candidates by the sixth moment (or by
//! likelihood when the raw data is available).

use crate::cumulants::{moments_to_cumulants, CumulantVector};
use crate::em::log_likelihood;
use crate::error::{Error, Result};
use crate::moments::{mixture_moments, Dataset, MixtureModel, MomentVector};
use crate::rootfind::{real_roots, UnivariatePolynomial, DEFAULT_ROOT_TOL};
use crate::varieties::equations;
use serde::{Deserialize, Serialize};

/// Why a candidate branch was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    PPositive,
    SNonreal,
    LambdaOutOfRange,
    VarianceNegative,
    DegenerateDenominator,
}

/// Which branch of the recovery produced a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateBranch {
    /// A strictly negative root of the degree-9 polynomial.
    General,
    /// The `p = 0` root: both means coincide with the sample mean.
    EqualMeans,
    /// Fallback when all cumulants of order 3..d vanish.
    SingleGaussian,
}

/// How the reported model was selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    M6Gap,
    Likelihood,
    SingleGaussianFallback,
}

/// One root branch of the recovery: the invariants `(p, s)`, the
/// semi-invariants, the recovered parameters, and validity diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PearsonCandidate {
    pub branch: CandidateBranch,
    /// Product of normalized means (in data units).
    pub p: f64,
    /// Sum of normalized means; absent when no real value exists.
    pub s: Option<f64>,
    pub r1: Option<f64>,
    pub r2: Option<f64>,
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub nu: Option<f64>,
    pub sigma2: Option<f64>,
    pub tau2: Option<f64>,
    pub valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reject_reason: Option<RejectReason>,
    /// Sixth raw moment implied by the candidate model.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m6_model: Option<f64>,
    /// `|m6_model - m6_input|`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m6_gap: Option<f64>,
}

impl PearsonCandidate {
    fn rejected(branch: CandidateBranch, p: f64, s: Option<f64>, reason: RejectReason) -> Self {
        PearsonCandidate {
            branch,
            p,
            s,
            r1: None,
            r2: None,
            lambda: None,
            mu: None,
            nu: None,
            sigma2: None,
            tau2: None,
            valid: false,
            reject_reason: Some(reason),
            m6_model: None,
            m6_gap: None,
        }
    }

    /// `(lambda, mu, nu, sigma2, tau2)` of a valid candidate.
    pub fn params(&self) -> Option<(f64, f64, f64, f64, f64)> {
        match (self.lambda, self.mu, self.nu, self.sigma2, self.tau2) {
            (Some(l), Some(mu), Some(nu), Some(s2), Some(t2)) => Some((l, mu, nu, s2, t2)),
            _ => None,
        }
    }

    /// Two-component mixture model of the candidate parameters.
    pub fn model(&self) -> Option<MixtureModel> {
        let (l, mu, nu, s2, t2) = self.params()?;
        MixtureModel::univariate(l, mu, s2.max(0.0), nu, t2.max(0.0)).ok()
    }
}

/// Normalized residuals of the secant equations at the selected `(p, s)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualDiagnostics {
    pub e1: f64,
    pub e2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e3: Option<f64>,
}

/// Full output of one method-of-moments fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub input_moments: MomentVector,
    pub cumulants: CumulantVector,
    pub candidates: Vec<PearsonCandidate>,
    /// Index into `candidates` of the selected model.
    pub selected: Option<usize>,
    pub selection_rule: SelectionRule,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<ResidualDiagnostics>,
    /// True when the top-two sixth-moment gaps agree to numerical precision,
    /// so the selection fell back to the smallest-|p| tie-break.
    pub m6_tie: bool,
}

impl FitReport {
    pub fn selected_candidate(&self) -> Option<&PearsonCandidate> {
        self.selected.map(|i| &self.candidates[i])
    }

    pub fn selected_model(&self) -> Option<MixtureModel> {
        self.selected_candidate().and_then(|c| c.model())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("fit report JSON: {e}")))
    }
}

/// The degree-9 polynomial satisfied by the product of normalized means,
/// with coefficients in the third, fourth and fifth cumulants. Callers
/// should standardize (`k2 = 1`) first; the coefficients span six orders in
/// the cumulants and are wildly inhomogeneous otherwise.
pub fn pearson_nonic(k3: f64, k4: f64, k5: f64) -> UnivariatePolynomial {
    let coeffs = vec![
        -8.0 * k3.powi(6),
        -32.0 * k3.powi(4) * k4,
        -(21.0 * k3 * k3 * k4 * k4 + 24.0 * k3.powi(3) * k5),
        96.0 * k3.powi(4) + 9.0 * k4.powi(3) - 36.0 * k3 * k4 * k5,
        148.0 * k3 * k3 * k4 - 6.0 * k5 * k5,
        24.0 * k3 * k5 + 30.0 * k4 * k4,
        12.0 * k3 * k3,
        28.0 * k4,
        0.0,
        8.0,
    ];
    UnivariatePolynomial::new(coeffs).expect("nonic coefficients are finite")
}

/// Sum of normalized means for a given root `p < 0`: the rational expression
/// when its denominator is healthy, otherwise the real root of the first
/// secant equation (quadratic in `s`) minimizing the second equation's
/// residual. `Ok(None)` means no real `s` exists.
pub fn recover_s(p: f64, k: &CumulantVector) -> Result<Option<f64>> {
    if !(p < 0.0) {
        return Err(Error::Precondition("recover_s needs p < 0".into()));
    }
    if k.var_count() != 1 || k.order() < 5 {
        return Err(Error::Dimension("recover_s needs univariate cumulants to order 5".into()));
    }
    let (k2, k3, k4, k5) = (k.get1(2), k.get1(3), k.get1(4), k.get1(5));

    let denom = 4.0 * p.powi(3) * k3 - 4.0 * k3.powi(3) - 6.0 * p * k3 * k4 - 2.0 * p * p * k5;
    let n_terms = [
        4.0 * p.powi(5),
        14.0 * p * p * k3 * k3,
        8.0 * p.powi(3) * k4,
        k3 * k3 * k4,
        3.0 * p * k4 * k4,
        -2.0 * p * k3 * k5,
    ];
    let numer: f64 = n_terms.iter().sum();
    // The denominator multiplies s in a homogeneous equation; it is healthy
    // only relative to the whole equation's scale per unit of s, not to its
    // own (possibly uniformly tiny) monomials.
    let n_scale = n_terms.iter().fold(0.0f64, |a, t| a.max(t.abs()));
    let s_scale = p.abs().sqrt().max(k2.max(0.0).sqrt());
    if denom.abs() * s_scale > 1e-10 * n_scale {
        return Ok(Some(refine_s(p, -numer / denom, k)));
    }

    // Fallback: E1 = -2p^2 s^2 - 4pk3 s + (6p^3 + 3k4 p + k3^2) = 0.
    let a = 2.0 * p * p;
    let b = 4.0 * p * k3;
    let c = -(6.0 * p.powi(3) + 3.0 * k4 * p + k3 * k3);
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 && disc >= -1e-12 * (b * b + (4.0 * a * c).abs()) {
        // treat as a double root at the vertex
        return Ok(Some(refine_s(p, -b / (2.0 * a), k)));
    }
    if disc < 0.0 {
        return Ok(None);
    }
    let sq = disc.sqrt();
    let s1 = if b >= 0.0 { (-b - sq) / (2.0 * a) } else { (-b + sq) / (2.0 * a) };
    let s2 = if s1 != 0.0 { c / (a * s1) } else { -b / a - s1 };
    let kv = cumulant_array(k);
    let e2 = |s: f64| equations::eval(equations::E2, p, s, &kv).0.abs();
    Ok(Some(refine_s(p, if e2(s1) <= e2(s2) { s1 } else { s2 }, k)))
}

/// Gauss-Newton polish of `s` on the normalized pair (E1, E2). When the E1
/// quadratic is nearly degenerate (symmetric data makes `s` a double root and
/// the discriminant pure noise) the better-conditioned equation takes over.
fn refine_s(p: f64, s0: f64, k: &CumulantVector) -> f64 {
    let kv = cumulant_array(k);
    let u = p.abs().sqrt().max(kv[2].max(0.0).sqrt());
    if u == 0.0 {
        return s0;
    }
    let w1 = 1.0
        / (equations::max_coefficient(equations::E1)
            * u.powi(equations::weighted_degree(equations::E1)))
        .powi(2);
    let w2 = 1.0
        / (equations::max_coefficient(equations::E2)
            * u.powi(equations::weighted_degree(equations::E2)))
        .powi(2);
    let mut s = s0;
    let mut best = s0;
    let mut best_obj = f64::INFINITY;
    for _ in 0..8 {
        let (e1, _) = equations::eval(equations::E1, p, s, &kv);
        let (e2, _) = equations::eval(equations::E2, p, s, &kv);
        let obj = w1 * e1 * e1 + w2 * e2 * e2;
        if obj < best_obj {
            best_obj = obj;
            best = s;
        }
        let d1 = equations::eval_ds(equations::E1, p, s, &kv);
        let d2 = equations::eval_ds(equations::E2, p, s, &kv);
        let h = w1 * d1 * d1 + w2 * d2 * d2;
        if h == 0.0 {
            break;
        }
        let step = (w1 * e1 * d1 + w2 * e2 * d2) / h;
        s -= step;
        if step.abs() <= 1e-16 * (1.0 + s.abs()) {
            let (e1n, _) = equations::eval(equations::E1, p, s, &kv);
            let (e2n, _) = equations::eval(equations::E2, p, s, &kv);
            if w1 * e1n * e1n + w2 * e2n * e2n < best_obj {
                best = s;
            }
            break;
        }
    }
    best
}

fn cumulant_array(k: &CumulantVector) -> [f64; 9] {
    let mut kv = [0.0f64; 9];
    for (r, slot) in kv.iter_mut().enumerate().take(k.order().min(8) + 1).skip(1) {
        *slot = k.get1(r);
    }
    kv
}

/// Recover all five parameters from the invariants `(p, s)`: the normalized
/// means are the roots of `x^2 - s x + p`, the weight comes from the
/// zero-mean constraint, and the variances solve a 2 x 2 linear system in
/// the semi-invariants.
pub fn candidate_from_ps(p: f64, s: f64, m1: f64, k: &CumulantVector) -> PearsonCandidate {
    let k2 = k.get1(2);
    let k3 = k.get1(3);
    let scale = k2.abs().max(1e-300);

    if p.abs() < 1e-12 * scale {
        return PearsonCandidate::rejected(
            CandidateBranch::General,
            p,
            Some(s),
            RejectReason::DegenerateDenominator,
        );
    }
    let disc = s * s - 4.0 * p;
    if disc < 0.0 {
        return PearsonCandidate::rejected(
            CandidateBranch::General,
            p,
            Some(s),
            RejectReason::SNonreal,
        );
    }
    let sq = disc.sqrt();
    // stable quadratic roots of x^2 - s x + p
    let big = if s >= 0.0 { (s + sq) / 2.0 } else { (s - sq) / 2.0 };
    let other = if big != 0.0 { p / big } else { -big };
    let (x1, x2) = if big <= other { (big, other) } else { (other, big) };

    if (x2 - x1).abs() <= 1e-9 * x1.abs().max(x2.abs()).max(scale.sqrt()) {
        return PearsonCandidate::rejected(
            CandidateBranch::General,
            p,
            Some(s),
            RejectReason::DegenerateDenominator,
        );
    }

    let lambda = -x2 / (x1 - x2);
    let r1 = -k2 - p;
    let r2 = -s / 3.0 - k3 / (3.0 * p);
    let sigma2 = x1 * r2 - r1;
    let tau2 = x2 * r2 - r1;

    let mut cand = PearsonCandidate {
        branch: CandidateBranch::General,
        p,
        s: Some(s),
        r1: Some(r1),
        r2: Some(r2),
        lambda: Some(lambda.clamp(0.0, 1.0)),
        mu: Some(m1 + x1),
        nu: Some(m1 + x2),
        sigma2: Some(sigma2.max(0.0)),
        tau2: Some(tau2.max(0.0)),
        valid: true,
        reject_reason: None,
        m6_model: None,
        m6_gap: None,
    };
    if !(-1e-9..=1.0 + 1e-9).contains(&lambda) {
        cand.valid = false;
        cand.reject_reason = Some(RejectReason::LambdaOutOfRange);
        cand.lambda = Some(lambda);
    }
    let var_floor = -1e-10 * scale;
    if sigma2 < var_floor || tau2 < var_floor {
        cand.valid = false;
        cand.reject_reason = Some(RejectReason::VarianceNegative);
        cand.sigma2 = Some(sigma2);
        cand.tau2 = Some(tau2);
    }
    cand
}

/// The equal-means branch: with `mu = nu = m1` the pair `(sigma^2, tau^2)`
/// solves a quadratic built from the second, fourth and sixth cumulants.
pub fn equal_means_fit(k: &CumulantVector, m1: f64) -> PearsonCandidate {
    let branch = CandidateBranch::EqualMeans;
    if k.var_count() != 1 || k.order() < 6 {
        return PearsonCandidate::rejected(branch, 0.0, Some(0.0), RejectReason::DegenerateDenominator);
    }
    let (k2, k4, k6) = (k.get1(2), k.get1(4), k.get1(6));
    if k4.abs() <= 1e-10 * (k2 * k2).max(1e-300) {
        return PearsonCandidate::rejected(branch, 0.0, Some(0.0), RejectReason::DegenerateDenominator);
    }
    let b = (10.0 * k2 * k4 + k6) / (5.0 * k4);
    let c = (3.0 * k2 * k6 + 15.0 * k2 * k2 * k4 - 5.0 * k4 * k4) / (15.0 * k4);
    let disc = b * b - 4.0 * c;
    if disc < 0.0 {
        return PearsonCandidate::rejected(branch, 0.0, Some(0.0), RejectReason::VarianceNegative);
    }
    let sq = disc.sqrt();
    let y_big = if b >= 0.0 { (b + sq) / 2.0 } else { (b - sq) / 2.0 };
    let y_other = if y_big != 0.0 { c / y_big } else { -y_big };
    let (sigma2, tau2) = if y_big <= y_other { (y_big, y_other) } else { (y_other, y_big) };

    let var_floor = -1e-10 * k2.abs().max(1e-300);
    if sigma2 < var_floor {
        return PearsonCandidate::rejected(branch, 0.0, Some(0.0), RejectReason::VarianceNegative);
    }
    if (sigma2 - tau2).abs() <= 1e-12 * tau2.abs().max(1e-300) {
        return PearsonCandidate::rejected(branch, 0.0, Some(0.0), RejectReason::DegenerateDenominator);
    }
    let lambda = (k2 - tau2) / (sigma2 - tau2);
    let mut cand = PearsonCandidate {
        branch,
        p: 0.0,
        s: Some(0.0),
        r1: Some(-k2),
        r2: None,
        lambda: Some(lambda.clamp(0.0, 1.0)),
        mu: Some(m1),
        nu: Some(m1),
        sigma2: Some(sigma2.max(0.0)),
        tau2: Some(tau2.max(0.0)),
        valid: true,
        reject_reason: None,
        m6_model: None,
        m6_gap: None,
    };
    if !(-1e-9..=1.0 + 1e-9).contains(&lambda) {
        cand.valid = false;
        cand.reject_reason = Some(RejectReason::LambdaOutOfRange);
        cand.lambda = Some(lambda);
    }
    cand
}

/// Method-of-moments fit with the classical sixth-moment selection rule.
pub fn fit_mom(m: &MomentVector) -> Result<FitReport> {
    fit_impl(m, None)
}

/// Method-of-moments fit ranking valid candidates by log-likelihood on the
/// raw data instead of the sixth-moment gap.
pub fn fit_mom_likelihood(m: &MomentVector, data: &Dataset) -> Result<FitReport> {
    fit_impl(m, Some(data))
}

fn fit_impl(m: &MomentVector, data: Option<&Dataset>) -> Result<FitReport> {
    if m.var_count() != 1 {
        return Err(Error::Dimension("fit needs univariate moments".into()));
    }
    let d = m.order();
    if d < 5 {
        return Err(Error::Domain("fit needs moments to order >= 5".into()));
    }
    let k = moments_to_cumulants(m)?;
    let m1 = m.get1(1);
    let k2 = k.get1(2);

    let requested_rule = if data.is_some() {
        SelectionRule::Likelihood
    } else {
        SelectionRule::M6Gap
    };

    let mut report = FitReport {
        input_moments: m.clone(),
        cumulants: k.clone(),
        candidates: Vec::new(),
        selected: None,
        selection_rule: requested_rule,
        diagnostics: None,
        m6_tie: false,
    };

    // Degenerate spread: no scale to standardize by.
    if k2 <= 0.0 {
        let moment_scale = (1..=d).map(|i| m.get1(i).abs()).fold(1.0, f64::max);
        let higher_vanish = (3..=d).all(|r| k.get1(r).abs() <= 1e-9 * moment_scale);
        if k2 >= -1e-12 * moment_scale && higher_vanish {
            push_single_gaussian_fallback(&mut report, m1, k2.max(0.0));
            attach_outputs(&mut report, m, &k, data, d)?;
            return Ok(report);
        }
        return Err(Error::Domain(
            "second cumulant is not positive; no mixture scale".into(),
        ));
    }

    // Standardize: k_r -> k_r / k2^(r/2), so p scales by k2 and s by sqrt(k2).
    let c = k2.sqrt();
    let kt: Vec<f64> = (0..=d.min(8))
        .map(|r| k.get1(r) / c.powi(r as i32))
        .collect();
    let kt_vec = CumulantVector::from_values(
        1,
        d.min(8),
        kt.iter()
            .enumerate()
            .skip(1)
            .map(|(r, &v)| (crate::series::MultiIndex::univariate(r), v)),
    )?;

    let nonic = pearson_nonic(kt[3], kt[4], kt[5]);
    let roots = real_roots(&nonic, DEFAULT_ROOT_TOL)?;

    for &(pt, _mult) in &roots.roots {
        if pt > 1e-9 {
            report.candidates.push(PearsonCandidate::rejected(
                CandidateBranch::General,
                k2 * pt,
                None,
                RejectReason::PPositive,
            ));
        } else if pt.abs() <= 1e-9 {
            if d >= 6 {
                report.candidates.push(equal_means_fit(&k, m1));
            } else {
                // the second semi-invariant is undefined at p = 0, and with
                // only five moments the equal-means system is underdetermined
                report.candidates.push(PearsonCandidate::rejected(
                    CandidateBranch::General,
                    k2 * pt,
                    None,
                    RejectReason::DegenerateDenominator,
                ));
            }
        } else {
            match recover_s(pt, &kt_vec)? {
                None => report.candidates.push(PearsonCandidate::rejected(
                    CandidateBranch::General,
                    k2 * pt,
                    None,
                    RejectReason::SNonreal,
                )),
                Some(st) => {
                    let cand = candidate_from_ps(k2 * pt, c * st, m1, &k);
                    report.candidates.push(cand);
                }
            }
        }
    }

    report.candidates.sort_by(|a, b| {
        let sa = a.s.unwrap_or(f64::INFINITY);
        let sb = b.s.unwrap_or(f64::INFINITY);
        (a.p, sa).partial_cmp(&(b.p, sb)).unwrap()
    });

    // Fallback: nothing valid and every higher cumulant vanishes.
    if !report.candidates.iter().any(|c| c.valid) {
        let vanish = (3..=d.min(6)).all(|r| kt[r].abs() <= 1e-7);
        if vanish {
            push_single_gaussian_fallback(&mut report, m1, k2);
        }
    }

    attach_outputs(&mut report, m, &k, data, d)?;
    Ok(report)
}

fn push_single_gaussian_fallback(report: &mut FitReport, m1: f64, k2: f64) {
    report.candidates.push(PearsonCandidate {
        branch: CandidateBranch::SingleGaussian,
        p: 0.0,
        s: Some(0.0),
        r1: Some(-k2),
        r2: None,
        lambda: Some(1.0),
        mu: Some(m1),
        nu: Some(m1),
        sigma2: Some(k2),
        tau2: Some(k2),
        valid: true,
        reject_reason: None,
        m6_model: None,
        m6_gap: None,
    });
    report.selection_rule = SelectionRule::SingleGaussianFallback;
}

/// Fill in per-candidate sixth moments, pick the winner, and evaluate the
/// residual diagnostics at its `(p, s)`.
fn attach_outputs(
    report: &mut FitReport,
    m: &MomentVector,
    k: &CumulantVector,
    data: Option<&Dataset>,
    d: usize,
) -> Result<()> {
    let m6 = if d >= 6 { Some(m.get1(6)) } else { None };
    if let Some(m6) = m6 {
        for cand in report.candidates.iter_mut() {
            if let Some(model) = cand.model() {
                let mm = mixture_moments(&model, 6)?;
                cand.m6_model = Some(mm.get1(6));
                cand.m6_gap = Some((mm.get1(6) - m6).abs());
            }
        }
    }

    let single_fallback = report.selection_rule == SelectionRule::SingleGaussianFallback;
    let mut ranked: Vec<(usize, f64, f64)> = Vec::new(); // (index, key, |p|)
    for (i, cand) in report.candidates.iter().enumerate() {
        if !cand.valid {
            continue;
        }
        let key = match (data, cand.m6_gap) {
            (Some(data), _) => match cand.model() {
                Some(model) if model.components().iter().all(|c| c.covariance()[0][0] > 0.0) => {
                    -log_likelihood(&model, data)?
                }
                _ => f64::INFINITY,
            },
            (None, Some(gap)) => gap,
            (None, None) => f64::INFINITY, // d = 5: no ranking signal
        };
        ranked.push((i, key, cand.p.abs()));
    }
    ranked.sort_by(|a, b| (a.1, a.2).partial_cmp(&(b.1, b.2)).unwrap());

    if single_fallback {
        report.selected = report
            .candidates
            .iter()
            .position(|c| c.branch == CandidateBranch::SingleGaussian);
    } else if data.is_some() {
        report.selected = ranked.first().map(|r| r.0);
    } else if d >= 6 {
        report.selected = ranked.first().map(|r| r.0);
        if ranked.len() >= 2 {
            let tie_scale = m6.map(|v| v.abs()).unwrap_or(1.0).max(1.0);
            report.m6_tie = (ranked[1].1 - ranked[0].1).abs() <= 1e-12 * tie_scale;
        }
    } else {
        // d = 5: report all candidates without electing one
        report.selected = None;
    }

    if let Some(cand) = report.selected_candidate() {
        let kv = cumulant_array(k);
        let centered_p = cand.p;
        let centered_s = cand.s.unwrap_or(0.0);
        let norm =
            |t: &[equations::Term]| equations::normalized_residual(t, centered_p, centered_s, &kv);
        report.diagnostics = Some(ResidualDiagnostics {
            e1: norm(equations::E1),
            e2: norm(equations::E2),
            e3: if d >= 6 { Some(norm(equations::E3)) } else { None },
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::special_data;
    use crate::moments::sample_moments;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    fn k7_cumulants() -> (CumulantVector, f64) {
        let data = special_data(7).unwrap();
        let m = sample_moments(&data, 6, false).unwrap();
        let k = moments_to_cumulants(&m).unwrap();
        (k, m.get1(1))
    }

    #[test]
    fn nonic_at_special_cumulants() {
        let p = pearson_nonic(0.0, -2.0, 0.0);
        assert_eq!(p.coeffs(), &[0.0, 0.0, 0.0, -72.0, 0.0, 120.0, 0.0, -56.0, 0.0, 8.0]);
        let z = pearson_nonic(0.0, 0.0, 0.0);
        assert_eq!(z.coeffs(), &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 8.0]);
    }

    #[test]
    fn nonic_vanishes_at_true_p() {
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        for _ in 0..100 {
            let lambda = rng.gen_range(0.15..0.85);
            let mu = rng.gen_range(-2.0..0.0);
            let nu = rng.gen_range(0.3..2.5);
            let s2 = rng.gen_range(0.3..2.0);
            let t2 = rng.gen_range(0.3..2.0);
            let model = MixtureModel::univariate(lambda, mu, s2, nu, t2).unwrap();
            let m = mixture_moments(&model, 5).unwrap();
            let k = moments_to_cumulants(&m).unwrap();
            let m1 = m.get1(1);
            let k2 = k.get1(2);
            let c = k2.sqrt();
            let nonic = pearson_nonic(
                k.get1(3) / c.powi(3),
                k.get1(4) / c.powi(4),
                k.get1(5) / c.powi(5),
            );
            let p_true = (mu - m1) * (nu - m1) / k2;
            let norm = nonic.coeffs().iter().fold(0.0f64, |a, c| a.max(c.abs()));
            assert!(
                nonic.eval(p_true).abs() <= 1e-8 * norm,
                "residual {} vs norm {norm}",
                nonic.eval(p_true)
            );
        }
    }

    #[test]
    fn recover_s_on_symmetric_design() {
        let (k, _) = k7_cumulants();
        let k4 = k.get1(4);
        assert!(rel(k4, -2401.0 / 120.0 + 61.0 / 7500.0) < 1e-9);
        let p = -(-k4 / 2.0).sqrt();
        assert!((p - (-3.162293)).abs() < 1e-5);
        let s = recover_s(p, &k).unwrap().expect("real s");
        assert!(s.abs() < 1e-9, "s = {s}");
        // the other negative root admits no real s
        let p2 = -(-1.5 * k4).sqrt();
        assert!(recover_s(p2, &k).unwrap().is_none());
        assert!(recover_s(0.5, &k).is_err());
    }

    #[test]
    fn recover_s_matches_forward_map() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        for _ in 0..100 {
            let lambda = rng.gen_range(0.2..0.8);
            let mu = rng.gen_range(-2.0..-0.3);
            let nu = rng.gen_range(0.4..2.0);
            let s2 = rng.gen_range(0.2..1.5);
            let t2 = rng.gen_range(0.2..1.5);
            let model = MixtureModel::univariate(lambda, mu, s2, nu, t2).unwrap();
            let m = mixture_moments(&model, 5).unwrap();
            let k = moments_to_cumulants(&m).unwrap();
            let m1 = m.get1(1);
            let p_true = (mu - m1) * (nu - m1);
            let s_true = (mu - m1) + (nu - m1);
            let s = recover_s(p_true, &k).unwrap().expect("real s");
            assert!(rel(s, s_true) < 1e-7, "{s} vs {s_true}");
        }
    }

    #[test]
    fn candidate_matches_radical_estimate() {
        let (k, m1) = k7_cumulants();
        let k4 = k.get1(4);
        let p = -(-k4 / 2.0).sqrt();
        let cand = candidate_from_ps(p, 0.0, m1, &k);
        assert!(cand.valid);
        let quarter_root = 100001f64.powf(0.25);
        let mu_expect = (41.0 - quarter_root) / 10.0;
        let nu_expect = (41.0 + quarter_root) / 10.0;
        let var_expect = (401.0 - 100001f64.sqrt()) / 100.0;
        assert!(rel(cand.lambda.unwrap(), 0.5) < 1e-9);
        assert!(rel(cand.mu.unwrap(), mu_expect) < 1e-9);
        assert!(rel(cand.nu.unwrap(), nu_expect) < 1e-9);
        assert!(rel(cand.sigma2.unwrap(), var_expect) < 1e-9);
        assert!(rel(cand.tau2.unwrap(), var_expect) < 1e-9);
        // decimal form
        assert!((cand.mu.unwrap() - 2.321716).abs() < 1e-6);
        assert!((cand.nu.unwrap() - 5.878284).abs() < 1e-6);
        assert!((cand.sigma2.unwrap().sqrt() - 0.920710).abs() < 1e-6);
    }

    #[test]
    fn candidate_symmetric_point_masses() {
        let model = MixtureModel::univariate(0.5, -1.0, 0.0, 1.0, 0.0).unwrap();
        let m = mixture_moments(&model, 6).unwrap();
        let k = moments_to_cumulants(&m).unwrap();
        let cand = candidate_from_ps(-1.0, 0.0, 0.0, &k);
        assert!(cand.valid);
        assert!(rel(cand.lambda.unwrap(), 0.5) < 1e-12);
        assert!((cand.mu.unwrap() + 1.0).abs() < 1e-12);
        assert!((cand.nu.unwrap() - 1.0).abs() < 1e-12);
        assert!(cand.sigma2.unwrap().abs() < 1e-12);
        assert!(cand.tau2.unwrap().abs() < 1e-12);
    }

    #[test]
    fn equal_means_recovers_variance_pair() {
        let model = MixtureModel::univariate(0.3, 0.0, 1.0, 0.0, 4.0).unwrap();
        let m = mixture_moments(&model, 6).unwrap();
        let k = moments_to_cumulants(&m).unwrap();
        assert!(rel(k.get1(2), 3.1) < 1e-12);
        assert!(rel(k.get1(4), 5.67) < 1e-10);
        assert!(rel(k.get1(6), -34.02) < 1e-9);
        let cand = equal_means_fit(&k, 0.0);
        assert!(cand.valid, "{:?}", cand.reject_reason);
        assert!(rel(cand.sigma2.unwrap(), 1.0) < 1e-8);
        assert!(rel(cand.tau2.unwrap(), 4.0) < 1e-8);
        assert!(rel(cand.lambda.unwrap(), 0.3) < 1e-8);
        assert_eq!(cand.mu, cand.nu);
    }

    #[test]
    fn equal_means_rejects_symmetric_design() {
        for kk in 2..=20u32 {
            let data = special_data(kk).unwrap();
            let m = sample_moments(&data, 6, false).unwrap();
            let k = moments_to_cumulants(&m).unwrap();
            let cand = equal_means_fit(&k, m.get1(1));
            assert!(!cand.valid, "K={kk}");
            assert_eq!(cand.reject_reason, Some(RejectReason::VarianceNegative), "K={kk}");
        }
    }

    #[test]
    fn equal_means_needs_nonzero_k4() {
        let m = crate::moments::gaussian_moments_1d(0.4, 1.3, 6).unwrap();
        let k = moments_to_cumulants(&m).unwrap();
        let cand = equal_means_fit(&k, 0.4);
        assert!(!cand.valid);
        assert_eq!(cand.reject_reason, Some(RejectReason::DegenerateDenominator));
    }

    #[test]
    fn fit_selects_radical_estimate_on_special_data() {
        let data = special_data(7).unwrap();
        let m = sample_moments(&data, 6, false).unwrap();
        let report = fit_mom(&m).unwrap();
        let cand = report.selected_candidate().expect("selected");
        assert_eq!(cand.branch, CandidateBranch::General);
        let quarter_root = 100001f64.powf(0.25);
        assert!(rel(cand.lambda.unwrap(), 0.5) < 1e-9);
        assert!(rel(cand.mu.unwrap(), (41.0 - quarter_root) / 10.0) < 1e-9);
        assert!(rel(cand.nu.unwrap(), (41.0 + quarter_root) / 10.0) < 1e-9);
        // the equal-means branch must be present and rejected
        assert!(report
            .candidates
            .iter()
            .any(|c| c.branch == CandidateBranch::EqualMeans
                && !c.valid
                && c.reject_reason == Some(RejectReason::VarianceNegative)));
        // the order-5 equations vanish at the selected root; the sixth-moment
        // equation does not, because this design is not an exact 2-mixture
        let diag = report.diagnostics.as_ref().unwrap();
        assert!(diag.e1.abs() < 1e-9);
        assert!(diag.e2.abs() < 1e-9);
        assert!(diag.e3.unwrap().is_finite());
        assert!(diag.e3.unwrap().abs() > 1e-3);
    }

    #[test]
    fn fit_crab_parameters_round_trip() {
        let model = MixtureModel::univariate(0.414, 0.633, 0.018 * 0.018, 0.657, 0.012 * 0.012)
            .unwrap();
        let m = mixture_moments(&model, 6).unwrap();
        let report = fit_mom(&m).unwrap();
        let cand = report.selected_candidate().expect("selected");
        assert!(rel(cand.lambda.unwrap(), 0.414) < 1e-6);
        assert!(rel(cand.mu.unwrap(), 0.633) < 1e-6);
        assert!(rel(cand.nu.unwrap(), 0.657) < 1e-6);
        assert!(rel(cand.sigma2.unwrap(), 0.018 * 0.018) < 1e-6);
        assert!(rel(cand.tau2.unwrap(), 0.012 * 0.012) < 1e-6);
    }

    #[test]
    fn fit_single_gaussian_falls_back() {
        let m = crate::moments::gaussian_moments_1d(2.0, 3.0, 6).unwrap();
        let report = fit_mom(&m).unwrap();
        assert_eq!(report.selection_rule, SelectionRule::SingleGaussianFallback);
        let cand = report.selected_candidate().expect("selected");
        assert_eq!(cand.branch, CandidateBranch::SingleGaussian);
        assert_eq!(cand.lambda, Some(1.0));
        assert!(rel(cand.mu.unwrap(), 2.0) < 1e-12);
        assert!(rel(cand.sigma2.unwrap(), 3.0) < 1e-10);
    }

    #[test]
    fn fit_requires_order_five() {
        let m = crate::moments::gaussian_moments_1d(0.0, 1.0, 4).unwrap();
        assert!(fit_mom(&m).is_err());
    }

    #[test]
    fn fit_order_five_reports_all_without_selection() {
        let model = MixtureModel::univariate(0.35, -1.0, 0.5, 1.2, 0.8).unwrap();
        let m = mixture_moments(&model, 5).unwrap();
        let report = fit_mom(&m).unwrap();
        assert!(report.selected.is_none());
        assert!(report.candidates.iter().any(|c| c.valid));
        let diag_free = report.candidates.iter().all(|c| c.m6_model.is_none());
        assert!(diag_free);
    }

    #[test]
    fn fit_round_trip_identifiability() {
        let mut rng = ChaCha12Rng::seed_from_u64(43);
        let mut failures = 0usize;
        let total = 150usize;
        for _ in 0..total {
            let lambda: f64 = rng.gen_range(0.1..0.9);
            let s2: f64 = rng.gen_range(0.25..4.0);
            let t2: f64 = rng.gen_range(0.25..4.0);
            let sep = 0.5 * s2.sqrt().max(t2.sqrt());
            let mu: f64 = rng.gen_range(-3.0..3.0);
            let delta: f64 = rng.gen_range(sep..(sep + 4.0));
            let nu = mu + delta;
            let model = MixtureModel::univariate(lambda, mu, s2, nu, t2).unwrap();
            let m = mixture_moments(&model, 6).unwrap();
            let report = match fit_mom(&m) {
                Ok(r) => r,
                Err(_) => {
                    failures += 1;
                    continue;
                }
            };
            let ok = report.selected_candidate().is_some_and(|c| {
                rel(c.lambda.unwrap(), lambda) < 1e-6
                    && rel(c.mu.unwrap(), mu) < 1e-6
                    && rel(c.nu.unwrap(), nu) < 1e-6
                    && rel(c.sigma2.unwrap(), s2) < 1e-6
                    && rel(c.tau2.unwrap(), t2) < 1e-6
            });
            if !ok {
                failures += 1;
            }
        }
        assert!(failures * 100 <= total, "{failures}/{total} failures");
    }

    #[test]
    fn fit_equivariance_under_affine_maps() {
        let base = MixtureModel::univariate(0.3, -0.8, 0.6, 1.1, 1.4).unwrap();
        let m = mixture_moments(&base, 6).unwrap();
        let r0 = fit_mom(&m).unwrap();
        let c0 = r0.selected_candidate().unwrap();
        // on exact mixture moments all three equations vanish at the winner
        let d0 = r0.diagnostics.as_ref().unwrap();
        assert!(d0.e1.abs() <= 1e-7 && d0.e2.abs() <= 1e-7 && d0.e3.unwrap().abs() <= 1e-7);

        // translate by b
        let b = 2.7;
        let shifted = MixtureModel::univariate(0.3, -0.8 + b, 0.6, 1.1 + b, 1.4).unwrap();
        let rb = fit_mom(&mixture_moments(&shifted, 6).unwrap()).unwrap();
        let cb = rb.selected_candidate().unwrap();
        assert!(rel(cb.mu.unwrap(), c0.mu.unwrap() + b) < 1e-8);
        assert!(rel(cb.nu.unwrap(), c0.nu.unwrap() + b) < 1e-8);
        assert!(rel(cb.lambda.unwrap(), c0.lambda.unwrap()) < 1e-8);
        assert!(rel(cb.sigma2.unwrap(), c0.sigma2.unwrap()) < 1e-8);

        // scale by c > 0
        let c = 3.5;
        let scaled =
            MixtureModel::univariate(0.3, -0.8 * c, 0.6 * c * c, 1.1 * c, 1.4 * c * c).unwrap();
        let rc = fit_mom(&mixture_moments(&scaled, 6).unwrap()).unwrap();
        let cc = rc.selected_candidate().unwrap();
        assert!(rel(cc.mu.unwrap(), c0.mu.unwrap() * c) < 1e-8);
        assert!(rel(cc.nu.unwrap(), c0.nu.unwrap() * c) < 1e-8);
        assert!(rel(cc.sigma2.unwrap(), c0.sigma2.unwrap() * c * c) < 1e-8);
        assert!(rel(cc.tau2.unwrap(), c0.tau2.unwrap() * c * c) < 1e-8);
    }

    #[test]
    fn candidates_are_canonical_mu_le_nu() {
        let mut rng = ChaCha12Rng::seed_from_u64(44);
        for _ in 0..50 {
            let model = MixtureModel::univariate(
                rng.gen_range(0.2..0.8),
                rng.gen_range(-2.0..0.0),
                rng.gen_range(0.3..1.5),
                rng.gen_range(0.5..2.5),
                rng.gen_range(0.3..1.5),
            )
            .unwrap();
            let m = mixture_moments(&model, 6).unwrap();
            let report = fit_mom(&m).unwrap();
            for cand in report.candidates.iter().filter(|c| c.valid) {
                assert!(cand.mu.unwrap() <= cand.nu.unwrap());
            }
        }
    }

    #[test]
    fn likelihood_rule_on_special_data() {
        let data = special_data(7).unwrap();
        let m = sample_moments(&data, 6, false).unwrap();
        let report = fit_mom_likelihood(&m, &data).unwrap();
        assert_eq!(report.selection_rule, SelectionRule::Likelihood);
        let cand = report.selected_candidate().expect("selected");
        assert!(rel(cand.lambda.unwrap(), 0.5) < 1e-9);
    }

    #[test]
    fn report_json_round_trips() {
        let data = special_data(5).unwrap();
        let m = sample_moments(&data, 6, false).unwrap();
        let report = fit_mom(&m).unwrap();
        let json = report.to_json();
        let back = FitReport::from_json(&json).unwrap();
        assert_eq!(json, back.to_json());
        assert_eq!(report.selected, back.selected);
    }
}
