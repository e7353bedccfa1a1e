//! Numerical membership tests for Gaussian moment varieties and their
//! secants: determinantal matrices, rank thresholds, and explicit residual
//! polynomials.
//!
//! All residuals are scale-normalized (each determinant or polynomial value
//! is divided by the magnitude of its largest contributing term), so the
//! membership thresholds are dimensionless.

use crate::cumulants::CumulantVector;
use crate::error::{Error, Result};
use crate::moments::{mixture_moments, MomentVector};
use crate::pearson;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Default threshold for minor-based membership residuals.
pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-9;
/// Default relative threshold on singular values for numerical rank.
pub const DEFAULT_RANK_RTOL: f64 = 1e-8;
/// Default relative tolerance for the sixth-moment match in
/// [`secant2_g16_membership`].
pub const DEFAULT_M6_MATCH_RTOL: f64 = 1e-7;

/// Dense real matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixReal {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl MatrixReal {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || entries.len() != rows * cols {
            return Err(Error::Dimension("matrix shape/entry mismatch".into()));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("matrix entries must be finite".into()));
        }
        Ok(MatrixReal { rows, cols, entries })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j))
    }
}

/// Outcome of one membership test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MembershipVerdict {
    pub test: String,
    pub residual: f64,
    pub threshold: f64,
    pub member: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    pub detail: String,
}

impl MembershipVerdict {
    fn new(test: &str, residual: f64, threshold: f64, rank: Option<usize>, detail: String) -> Self {
        MembershipVerdict {
            test: test.to_string(),
            residual,
            threshold,
            member: residual <= threshold,
            rank,
            detail,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdict serializes")
    }
}

fn singular_values_sorted(m: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

fn numerical_rank(sv: &[f64], rtol: f64) -> usize {
    let max = sv.first().copied().unwrap_or(0.0);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rtol * max).count()
}

/// The 3 x d matrix whose 3 x 3 minors cut out the univariate Gaussian
/// moment surface: rows `(0, m0, 2m1, ..., (d-1) m_{d-2})`, `(m0, ..., m_{d-1})`,
/// `(m1, ..., m_d)`.
pub fn build_hd(m: &MomentVector, d: usize) -> Result<MatrixReal> {
    if m.var_count() != 1 {
        return Err(Error::Dimension("H_d needs univariate moments".into()));
    }
    if d < 3 {
        return Err(Error::Domain("H_d needs d >= 3".into()));
    }
    if m.order() < d {
        return Err(Error::Dimension(format!(
            "H_{d} needs moments up to order {d}, have {}",
            m.order()
        )));
    }
    let mut entries = Vec::with_capacity(3 * d);
    for j in 1..=d {
        entries.push(if j == 1 { 0.0 } else { (j - 1) as f64 * m.get1(j - 2) });
    }
    for j in 1..=d {
        entries.push(m.get1(j - 1));
    }
    for j in 1..=d {
        entries.push(m.get1(j));
    }
    // row-major: we pushed row by row
    MatrixReal::new(3, d, entries)
}

/// Largest Hadamard-normalized 3 x 3 minor of `H_d`; members of the Gaussian
/// moment surface make every minor vanish.
pub fn residual_g1d(m: &MomentVector, d: usize, threshold: f64) -> Result<MembershipVerdict> {
    let h = build_hd(m, d)?;
    let hm = h.to_dmatrix();
    let col_norms: Vec<f64> = (0..d).map(|j| hm.column(j).norm()).collect();
    let mut worst = 0.0f64;
    for a in 0..d {
        for b in (a + 1)..d {
            for c in (b + 1)..d {
                let det = hm[(0, a)] * (hm[(1, b)] * hm[(2, c)] - hm[(1, c)] * hm[(2, b)])
                    - hm[(0, b)] * (hm[(1, a)] * hm[(2, c)] - hm[(1, c)] * hm[(2, a)])
                    + hm[(0, c)] * (hm[(1, a)] * hm[(2, b)] - hm[(1, b)] * hm[(2, a)]);
                let scale = col_norms[a] * col_norms[b] * col_norms[c];
                if scale > 0.0 {
                    worst = worst.max(det.abs() / scale);
                }
            }
        }
    }
    let sv = singular_values_sorted(&hm);
    let rank = numerical_rank(&sv, DEFAULT_RANK_RTOL);
    Ok(MembershipVerdict::new(
        "g1d",
        worst,
        threshold,
        Some(rank),
        format!("max normalized 3x3 minor of H_{d}; rank(H_{d}) = {rank}"),
    ))
}

/// Left null vector of `H_d` scaled to the form `(sigma^2, mu, -1)`.
pub fn hd_left_kernel(h: &MatrixReal) -> Result<[f64; 3]> {
    if h.rows() != 3 {
        return Err(Error::Dimension("left kernel extraction needs 3 rows".into()));
    }
    let m = h.to_dmatrix();
    let svd = m.svd(true, false);
    let u = svd.u.as_ref().expect("u requested");
    let mut min_idx = 0;
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s < svd.singular_values[min_idx] {
            min_idx = i;
        }
    }
    let v = u.column(min_idx);
    if v[2].abs() <= 1e-14 * v.norm() {
        return Err(Error::Domain("kernel vector has vanishing third entry".into()));
    }
    let f = -1.0 / v[2];
    Ok([v[0] * f, v[1] * f, -1.0])
}

/// Numerical rank of the square Hankel matrix `(m_{i+j})`; rank `<= k`
/// characterizes mixtures of at most `k` point masses, and the verdict's
/// membership flag reports the `k = 2` (secant of the rational normal curve)
/// case.
pub fn hankel_rank(m: &MomentVector, d: usize, rtol: f64) -> Result<MembershipVerdict> {
    if m.var_count() != 1 {
        return Err(Error::Dimension("Hankel test needs univariate moments".into()));
    }
    if d < 2 || d % 2 != 0 {
        return Err(Error::Domain("Hankel test needs even d >= 2".into()));
    }
    if m.order() < d {
        return Err(Error::Dimension("moment order too small for Hankel test".into()));
    }
    let q = d / 2 + 1;
    let h = DMatrix::from_fn(q, q, |i, j| m.get1(i + j));
    let sv = singular_values_sorted(&h);
    let rank = numerical_rank(&sv, rtol);
    let residual = if q >= 3 && sv[0] > 0.0 { sv[2] / sv[0] } else { 0.0 };
    Ok(MembershipVerdict::new(
        "hankel",
        residual,
        rtol,
        Some(rank),
        format!("{q}x{q} Hankel matrix, numerical rank {rank}"),
    ))
}

const VERONESE_INDICES: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (2, 0)];

/// Rank of the 6 x 6 catalecticant of a bivariate order-4 moment vector.
/// Rank 1 characterizes a point mass, rank `<= 2` a mixture of two point
/// masses; the membership flag reports the rank-2 case.
pub fn veronese_residual(m: &MomentVector, rtol: f64) -> Result<MembershipVerdict> {
    if m.var_count() != 2 || m.order() < 4 {
        return Err(Error::Dimension(
            "catalecticant test needs bivariate moments to order 4".into(),
        ));
    }
    let h = DMatrix::from_fn(6, 6, |i, j| {
        let (a, b) = VERONESE_INDICES[i];
        let (c, e) = VERONESE_INDICES[j];
        m.get2(a + c, b + e)
    });
    let sv = singular_values_sorted(&h);
    let rank = numerical_rank(&sv, rtol);
    let residual = if sv[0] > 0.0 { sv[2] / sv[0] } else { 0.0 };
    Ok(MembershipVerdict::new(
        "veronese24",
        residual,
        rtol,
        Some(rank),
        format!("6x6 order-4 catalecticant, numerical rank {rank}"),
    ))
}

/// The 6 x 5 matrix whose maximal minors cut out the equal-covariances
/// submodel of two-component bivariate mixtures at order 3.
pub fn hilbert_burch_matrix(m: &MomentVector) -> Result<MatrixReal> {
    if m.var_count() != 2 || m.order() < 3 {
        return Err(Error::Dimension(
            "Hilbert-Burch test needs bivariate moments to order 3".into(),
        ));
    }
    let g = |i: usize, j: usize| m.get2(i, j);
    #[rustfmt::skip]
    let entries = vec![
        0.0,     0.0,     g(0,0),       g(1,0),       g(0,1),
        0.0,     g(1,0),  g(2,0),       g(3,0),       g(2,1),
        g(0,1),  0.0,     g(0,2),       g(1,2),       g(0,3),
        0.0,     g(0,0),  2.0*g(1,0),   2.0*g(2,0),   2.0*g(1,1),
        g(0,0),  0.0,     2.0*g(0,1),   2.0*g(1,1),   2.0*g(0,2),
        g(1,0),  g(0,1),  2.0*g(1,1),   2.0*g(2,1),   2.0*g(1,2),
    ];
    MatrixReal::new(6, 5, entries)
}

/// Largest Hadamard-normalized 5 x 5 minor of the Hilbert-Burch matrix;
/// vanishes on two-component mixtures with a shared covariance.
pub fn hilbert_burch_residual(m: &MomentVector, threshold: f64) -> Result<MembershipVerdict> {
    let hb = hilbert_burch_matrix(m)?.to_dmatrix();
    let mut worst = 0.0f64;
    for drop in 0..6 {
        let rows: Vec<usize> = (0..6).filter(|&r| r != drop).collect();
        let sub = DMatrix::from_fn(5, 5, |i, j| hb[(rows[i], j)]);
        let scale: f64 = (0..5).map(|j| sub.column(j).norm()).product();
        if scale > 0.0 {
            worst = worst.max(sub.determinant().abs() / scale);
        }
    }
    Ok(MembershipVerdict::new(
        "hb23",
        worst,
        threshold,
        None,
        "max normalized 5x5 minor of the 6x5 Hilbert-Burch matrix".into(),
    ))
}

/// Monomial tables for the secant residual equations. These are transcribed
/// term by term; the tests pin every coefficient through exact finite
/// differences and through vanishing on exact mixture data.
pub(crate) mod equations {
    /// One monomial `c * p^ep * s^es * k2^e2 * ... * k8^e8`.
    pub struct Term {
        pub c: f64,
        pub ep: u32,
        pub es: u32,
        pub ek: [u32; 7],
    }

    const fn t(c: f64, ep: u32, es: u32, ek: [u32; 7]) -> Term {
        Term { c, ep, es, ek }
    }

    // -2p^2s^2 - 4spk3 + 6p^3 + 3k4p + k3^2
    pub const E1: &[Term] = &[
        t(-2.0, 2, 2, [0, 0, 0, 0, 0, 0, 0]),
        t(-4.0, 1, 1, [0, 1, 0, 0, 0, 0, 0]),
        t(6.0, 3, 0, [0, 0, 0, 0, 0, 0, 0]),
        t(3.0, 1, 0, [0, 0, 1, 0, 0, 0, 0]),
        t(1.0, 0, 0, [0, 2, 0, 0, 0, 0, 0]),
    ];

    // -2p^2s^3 + 4p^3s + 5sk3^2 - 20p^2k3 + 3k5p
    pub const E2: &[Term] = &[
        t(-2.0, 2, 3, [0, 0, 0, 0, 0, 0, 0]),
        t(4.0, 3, 1, [0, 0, 0, 0, 0, 0, 0]),
        t(5.0, 0, 1, [0, 2, 0, 0, 0, 0, 0]),
        t(-20.0, 2, 0, [0, 1, 0, 0, 0, 0, 0]),
        t(3.0, 1, 0, [0, 0, 0, 1, 0, 0, 0]),
    ];

    // -144p^5 + (72s^2 - 270k2)p^4 + (90s^2k2 + 180sk3 - 4s^4)p^3
    // + (-135k2k4 + 180sk2k3 - 30s^3k3 - 90k3^2 - 9k6)p^2
    // - 30k3^2(s^2 + 3/2 k2)p + 5sk3^3
    pub const E3: &[Term] = &[
        t(-144.0, 5, 0, [0, 0, 0, 0, 0, 0, 0]),
        t(72.0, 4, 2, [0, 0, 0, 0, 0, 0, 0]),
        t(-270.0, 4, 0, [1, 0, 0, 0, 0, 0, 0]),
        t(90.0, 3, 2, [1, 0, 0, 0, 0, 0, 0]),
        t(180.0, 3, 1, [0, 1, 0, 0, 0, 0, 0]),
        t(-4.0, 3, 4, [0, 0, 0, 0, 0, 0, 0]),
        t(-135.0, 2, 0, [1, 0, 1, 0, 0, 0, 0]),
        t(180.0, 2, 1, [1, 1, 0, 0, 0, 0, 0]),
        t(-30.0, 2, 3, [0, 1, 0, 0, 0, 0, 0]),
        t(-90.0, 2, 0, [0, 2, 0, 0, 0, 0, 0]),
        t(-9.0, 2, 0, [0, 0, 0, 0, 1, 0, 0]),
        t(-30.0, 1, 2, [0, 2, 0, 0, 0, 0, 0]),
        t(-45.0, 1, 0, [1, 2, 0, 0, 0, 0, 0]),
        t(5.0, 0, 1, [0, 3, 0, 0, 0, 0, 0]),
    ];

    // 16p^3s^5 - 126k2p^3s^3 + 42k3p^2s^4 - 148p^4s^3 + 252k2p^4s
    // - 126k3p^3s^2 + 216p^5s + 315k2k3^2ps - 1260k2k3p^3 - 35k3^3s^2
    // + 210k3^2p^2s - 378k3p^4 + 189k2k5p^2 + 35k3^3p + 315k3k4p^2 + 9k7p^2
    pub const E4: &[Term] = &[
        t(16.0, 3, 5, [0, 0, 0, 0, 0, 0, 0]),
        t(-126.0, 3, 3, [1, 0, 0, 0, 0, 0, 0]),
        t(42.0, 2, 4, [0, 1, 0, 0, 0, 0, 0]),
        t(-148.0, 4, 3, [0, 0, 0, 0, 0, 0, 0]),
        t(252.0, 4, 1, [1, 0, 0, 0, 0, 0, 0]),
        t(-126.0, 3, 2, [0, 1, 0, 0, 0, 0, 0]),
        t(216.0, 5, 1, [0, 0, 0, 0, 0, 0, 0]),
        t(315.0, 1, 1, [1, 2, 0, 0, 0, 0, 0]),
        t(-1260.0, 3, 0, [1, 1, 0, 0, 0, 0, 0]),
        t(-35.0, 0, 2, [0, 3, 0, 0, 0, 0, 0]),
        t(210.0, 2, 1, [0, 2, 0, 0, 0, 0, 0]),
        t(-378.0, 4, 0, [0, 1, 0, 0, 0, 0, 0]),
        t(189.0, 2, 0, [1, 0, 0, 1, 0, 0, 0]),
        t(35.0, 1, 0, [0, 3, 0, 0, 0, 0, 0]),
        t(315.0, 2, 0, [0, 1, 1, 0, 0, 0, 0]),
        t(9.0, 2, 0, [0, 0, 0, 0, 0, 1, 0]),
    ];

    // 20p^4s^6 + 336k2p^4s^4 - 112k3p^3s^5 + 124p^5s^4 - 3780k2^2p^4s^2
    // + 2520k2k3p^3s^3 - 6048k2p^5s^2 - 420k3^2p^2s^4 + 2128k3p^4s^3
    // - 2232p^6s^2 - 7560k2^2k3p^3s + 11340k2^2p^5 + 2520k2k3^2p^2s^2
    // - 15120k2k3p^4s + 12096k2p^6 - 280k3^3ps^3 + 2940k3^2p^3s^2
    // - 7056k3p^5s + 3564p^7 + 1890k2^2k3^2p^2 + 5670k2^2k4p^3
    // - 420k2k3^3ps + 7560k2k3^2p^3 + 35k3^4s^2 + 280k3^3p^2s - 1260k3^2p^4
    // + 756k2k6p^3 - 35k3^4p + 1512k3k5p^3 + 945k4^2p^3 + 27k8p^3
    pub const E5: &[Term] = &[
        t(20.0, 4, 6, [0, 0, 0, 0, 0, 0, 0]),
        t(336.0, 4, 4, [1, 0, 0, 0, 0, 0, 0]),
        t(-112.0, 3, 5, [0, 1, 0, 0, 0, 0, 0]),
        t(124.0, 5, 4, [0, 0, 0, 0, 0, 0, 0]),
        t(-3780.0, 4, 2, [2, 0, 0, 0, 0, 0, 0]),
        t(2520.0, 3, 3, [1, 1, 0, 0, 0, 0, 0]),
        t(-6048.0, 5, 2, [1, 0, 0, 0, 0, 0, 0]),
        t(-420.0, 2, 4, [0, 2, 0, 0, 0, 0, 0]),
        t(2128.0, 4, 3, [0, 1, 0, 0, 0, 0, 0]),
        t(-2232.0, 6, 2, [0, 0, 0, 0, 0, 0, 0]),
        t(-7560.0, 3, 1, [2, 1, 0, 0, 0, 0, 0]),
        t(11340.0, 5, 0, [2, 0, 0, 0, 0, 0, 0]),
        t(2520.0, 2, 2, [1, 2, 0, 0, 0, 0, 0]),
        t(-15120.0, 4, 1, [1, 1, 0, 0, 0, 0, 0]),
        t(12096.0, 6, 0, [1, 0, 0, 0, 0, 0, 0]),
        t(-280.0, 1, 3, [0, 3, 0, 0, 0, 0, 0]),
        t(2940.0, 3, 2, [0, 2, 0, 0, 0, 0, 0]),
        t(-7056.0, 5, 1, [0, 1, 0, 0, 0, 0, 0]),
        t(3564.0, 7, 0, [0, 0, 0, 0, 0, 0, 0]),
        t(1890.0, 2, 0, [2, 2, 0, 0, 0, 0, 0]),
        t(5670.0, 3, 0, [2, 0, 1, 0, 0, 0, 0]),
        t(-420.0, 1, 1, [1, 3, 0, 0, 0, 0, 0]),
        t(7560.0, 3, 0, [1, 2, 0, 0, 0, 0, 0]),
        t(35.0, 0, 2, [0, 4, 0, 0, 0, 0, 0]),
        t(280.0, 2, 1, [0, 3, 0, 0, 0, 0, 0]),
        t(-1260.0, 4, 0, [0, 2, 0, 0, 0, 0, 0]),
        t(756.0, 3, 0, [1, 0, 0, 0, 1, 0, 0]),
        t(-35.0, 1, 0, [0, 4, 0, 0, 0, 0, 0]),
        t(1512.0, 3, 0, [0, 1, 0, 1, 0, 0, 0]),
        t(945.0, 3, 0, [0, 0, 2, 0, 0, 0, 0]),
        t(27.0, 3, 0, [0, 0, 0, 0, 0, 0, 1]),
    ];

    /// Evaluate a table at `(p, s, k2..k8)`; returns the signed value and the
    /// magnitude of the largest single term.
    pub fn eval(terms: &[Term], p: f64, s: f64, k: &[f64; 9]) -> (f64, f64) {
        let mut value = 0.0;
        let mut scale = 0.0f64;
        for term in terms {
            let mut v = term.c * p.powi(term.ep as i32) * s.powi(term.es as i32);
            for (r, &e) in term.ek.iter().enumerate() {
                if e > 0 {
                    v *= k[r + 2].powi(e as i32);
                }
            }
            value += v;
            scale = scale.max(v.abs());
        }
        (value, scale)
    }

    /// Partial derivative with respect to `s`.
    pub fn eval_ds(terms: &[Term], p: f64, s: f64, k: &[f64; 9]) -> f64 {
        let mut value = 0.0;
        for term in terms.iter().filter(|t| t.es > 0) {
            let mut v = term.c
                * term.es as f64
                * p.powi(term.ep as i32)
                * s.powi(term.es as i32 - 1);
            for (r, &e) in term.ek.iter().enumerate() {
                if e > 0 {
                    v *= k[r + 2].powi(e as i32);
                }
            }
            value += v;
        }
        value
    }

    /// Weighted degree under the grading `deg p = 2, deg s = 1, deg k_r = r`
    /// (the tables are homogeneous, so the first term decides).
    pub fn weighted_degree(terms: &[Term]) -> i32 {
        let t = &terms[0];
        let mut d = 2 * t.ep as i32 + t.es as i32;
        for (r, &e) in t.ek.iter().enumerate() {
            d += (r as i32 + 2) * e as i32;
        }
        d
    }

    pub fn max_coefficient(terms: &[Term]) -> f64 {
        terms.iter().fold(0.0f64, |a, t| a.max(t.c.abs()))
    }

    /// Equation scale that stays meaningful when individual monomials
    /// degenerate (e.g. `s = 0` killing every large term): the larger of the
    /// biggest evaluated monomial and the homogeneous floor `max|c| * u^deg`
    /// with `u` the standard-deviation scale of the inputs.
    pub fn equation_scale(terms: &[Term], monomial_scale: f64, p: f64, s: f64, k2: f64) -> f64 {
        let u = p.abs().sqrt().max(k2.max(0.0).sqrt()).max(s.abs());
        let floor = max_coefficient(terms) * u.powi(weighted_degree(terms));
        monomial_scale.max(floor)
    }

    /// Scale-normalized residual.
    pub fn normalized_residual(terms: &[Term], p: f64, s: f64, k: &[f64; 9]) -> f64 {
        let (value, mscale) = eval(terms, p, s, k);
        let scale = equation_scale(terms, mscale, p, s, k[2]);
        if scale > 0.0 {
            value / scale
        } else {
            0.0
        }
    }
}

fn secant2_tables(d: usize) -> Vec<&'static [equations::Term]> {
    let mut tables: Vec<&[equations::Term]> = vec![equations::E1, equations::E2, equations::E3];
    if d >= 7 {
        tables.push(equations::E4);
    }
    if d >= 8 {
        tables.push(equations::E5);
    }
    tables
}

fn secant2_check(k: &CumulantVector) -> Result<[f64; 9]> {
    if k.var_count() != 1 {
        return Err(Error::Dimension("secant residuals need univariate cumulants".into()));
    }
    if k.order() < 6 {
        return Err(Error::Dimension("secant residuals need cumulants to order >= 6".into()));
    }
    let mut kv = [0.0f64; 9];
    for (r, slot) in kv.iter_mut().enumerate().take(k.order().min(8) + 1).skip(1) {
        *slot = k.get1(r);
    }
    Ok(kv)
}

/// Scale-normalized residuals of the secant equations at `(p, s)`:
/// `[E1, E2, E3]` for order-6 cumulants, plus `E4` at order 7 and `E5` at
/// order 8. The cumulants must be centered (`k1 = 0`) with `p` and `s` the
/// product and sum of the normalized means.
pub fn secant2_residuals(k: &CumulantVector, p: f64, s: f64) -> Result<Vec<f64>> {
    let kv = secant2_check(k)?;
    Ok(secant2_tables(k.order())
        .into_iter()
        .map(|t| equations::normalized_residual(t, p, s, &kv))
        .collect())
}

/// Raw (unnormalized) values of the same equations, in the same order as
/// [`secant2_residuals`]. These are the printed polynomials evaluated as-is,
/// so they are exactly linear in the highest cumulant each one carries.
pub fn secant2_equation_values(k: &CumulantVector, p: f64, s: f64) -> Result<Vec<f64>> {
    let kv = secant2_check(k)?;
    Ok(secant2_tables(k.order())
        .into_iter()
        .map(|t| equations::eval(t, p, s, &kv).0)
        .collect())
}

/// `c * m_{a1} m_{a2} m_{a3} m_{a4}` with `m_{ij}` a bivariate moment.
const QUARTIC_TERMS: [(f64, [(usize, usize); 4]); 22] = [
    (6.0, [(1, 5), (2, 2), (3, 1), (3, 1)]),
    (-10.0, [(1, 3), (2, 4), (3, 1), (3, 1)]),
    (-2.0, [(0, 6), (3, 1), (3, 1), (3, 1)]),
    (10.0, [(0, 4), (3, 1), (3, 1), (3, 3)]),
    (-9.0, [(1, 5), (2, 2), (2, 2), (4, 0)]),
    (15.0, [(1, 3), (2, 2), (2, 4), (4, 0)]),
    (2.0, [(1, 3), (1, 5), (3, 1), (4, 0)]),
    (3.0, [(0, 6), (2, 2), (3, 1), (4, 0)]),
    (-5.0, [(0, 4), (2, 4), (3, 1), (4, 0)]),
    (-10.0, [(1, 3), (1, 3), (3, 3), (4, 0)]),
    (-1.0, [(0, 6), (1, 3), (4, 0), (4, 0)]),
    (1.0, [(0, 4), (1, 5), (4, 0), (4, 0)]),
    (10.0, [(1, 3), (1, 3), (3, 1), (4, 2)]),
    (-15.0, [(0, 4), (2, 2), (3, 1), (4, 2)]),
    (5.0, [(0, 4), (1, 3), (4, 0), (4, 2)]),
    (-6.0, [(1, 3), (1, 3), (2, 2), (5, 1)]),
    (9.0, [(0, 4), (2, 2), (2, 2), (5, 1)]),
    (-2.0, [(0, 4), (1, 3), (3, 1), (5, 1)]),
    (-1.0, [(0, 4), (0, 4), (4, 0), (5, 1)]),
    (2.0, [(1, 3), (1, 3), (1, 3), (6, 0)]),
    (-3.0, [(0, 4), (1, 3), (2, 2), (6, 0)]),
    (1.0, [(0, 4), (0, 4), (3, 1), (6, 0)]),
];

/// The degree-4 relation in the order-4 and order-6 moments of a zero-mean
/// bivariate mixture of two Gaussians, normalized by its largest term.
pub fn zero_mean_quartic(m: &MomentVector, threshold: f64) -> Result<MembershipVerdict> {
    if m.var_count() != 2 || m.order() < 6 {
        return Err(Error::Dimension(
            "quartic test needs bivariate moments to order 6".into(),
        ));
    }
    let mut value = 0.0;
    let mut scale = 0.0f64;
    for (c, idx) in QUARTIC_TERMS.iter() {
        let mut v = *c;
        for (i, j) in idx {
            v *= m.get2(*i, *j);
        }
        value += v;
        scale = scale.max(v.abs());
    }
    let residual = if scale > 0.0 { value.abs() / scale } else { 0.0 };
    Ok(MembershipVerdict::new(
        "zeromean-quartic",
        residual,
        threshold,
        None,
        "degree-4 relation in bivariate order-4/order-6 moments".into(),
    ))
}

/// Indirect secant membership at order 6: fit candidates from the first five
/// moments and accept when some valid candidate reproduces the sixth moment.
pub fn secant2_g16_membership(m: &MomentVector, rtol: f64) -> Result<MembershipVerdict> {
    if m.var_count() != 1 || m.order() < 6 {
        return Err(Error::Dimension(
            "secant membership needs univariate moments to order 6".into(),
        ));
    }
    let m6 = m.get1(6);
    let m2 = m.get1(2);
    let scale = m6.abs().max(m2.abs().powi(3)).max(1e-300);
    let truncated = m.truncated(5)?;
    let report = match pearson::fit_mom(&truncated) {
        Ok(r) => r,
        Err(e) => {
            return Ok(MembershipVerdict::new(
                "secant2-g16",
                f64::MAX,
                rtol,
                None,
                format!("no candidates: {e}"),
            ))
        }
    };
    let mut best = f64::MAX;
    let mut viable = 0usize;
    for cand in report.candidates.iter().filter(|c| c.valid) {
        if let Some(model) = cand.model() {
            if let Ok(mm) = mixture_moments(&model, 6) {
                viable += 1;
                best = best.min((mm.get1(6) - m6).abs() / scale);
            }
        }
    }
    Ok(MembershipVerdict::new(
        "secant2-g16",
        best,
        rtol,
        None,
        format!("{viable} valid candidate(s) from the first five moments"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cumulants::moments_to_cumulants;
    use crate::datasets::special_data;
    use crate::moments::{
        gaussian_moments_1d, gaussian_moments_nd, sample_moments, GaussianComponent, MixtureModel,
        MomentVector,
    };
    use crate::series::MultiIndex;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn point_mass_1d(a: f64, d: usize) -> MomentVector {
        gaussian_moments_1d(a, 0.0, d).unwrap()
    }

    #[test]
    fn hd_of_standard_normal() {
        let m = gaussian_moments_1d(0.0, 1.0, 4).unwrap();
        let h = build_hd(&m, 4).unwrap();
        let expect = [
            [0.0, 1.0, 0.0, 3.0],
            [1.0, 0.0, 1.0, 0.0],
            [0.0, 1.0, 0.0, 3.0],
        ];
        for i in 0..3 {
            for j in 0..4 {
                assert_eq!(h.get(i, j), expect[i][j], "({i},{j})");
            }
        }
        assert!(build_hd(&m, 2).is_err());
    }

    #[test]
    fn hd_of_point_mass_has_rank_two() {
        let m = point_mass_1d(1.0, 3);
        let h = build_hd(&m, 3).unwrap();
        let expect = [[0.0, 1.0, 2.0], [1.0, 1.0, 1.0], [1.0, 1.0, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(h.get(i, j), expect[i][j]);
            }
        }
        let sv = singular_values_sorted(&h.to_dmatrix());
        assert_eq!(numerical_rank(&sv, DEFAULT_RANK_RTOL), 2);
    }

    #[test]
    fn left_kernel_recovers_parameters() {
        let m = gaussian_moments_1d(1.7, 0.3, 8).unwrap();
        let h = build_hd(&m, 8).unwrap();
        let v = hd_left_kernel(&h).unwrap();
        assert!((v[0] - 0.3).abs() < 1e-10, "sigma2 {}", v[0]);
        assert!((v[1] - 1.7).abs() < 1e-10, "mu {}", v[1]);
        assert_eq!(v[2], -1.0);
    }

    #[test]
    fn g1d_membership_separates_gaussians_from_noise() {
        let verdict = residual_g1d(
            &gaussian_moments_1d(1.7, 0.3, 8).unwrap(),
            8,
            DEFAULT_MEMBERSHIP_TOL,
        )
        .unwrap();
        assert!(verdict.member, "residual {}", verdict.residual);
        assert_eq!(verdict.rank, Some(2));

        let mix = MixtureModel::univariate(0.4, -1.0, 0.5, 1.5, 1.0).unwrap();
        let mm = crate::moments::mixture_moments(&mix, 6).unwrap();
        let v2 = residual_g1d(&mm, 6, DEFAULT_MEMBERSHIP_TOL).unwrap();
        assert!(!v2.member);

        let mut rng = ChaCha12Rng::seed_from_u64(51);
        for _ in 0..100 {
            let mut vals = vec![(MultiIndex::univariate(0), 1.0)];
            for i in 1..=6 {
                vals.push((MultiIndex::univariate(i), rng.gen_range(0.0..1.0)));
            }
            let m = MomentVector::from_values(1, 6, vals).unwrap();
            let v = residual_g1d(&m, 6, DEFAULT_MEMBERSHIP_TOL).unwrap();
            assert!(!v.member);
            assert!(v.residual > 1e-3, "residual {}", v.residual);
        }
    }

    #[test]
    fn hankel_rank_counts_point_masses() {
        let v1 = hankel_rank(&point_mass_1d(2.0, 6), 6, DEFAULT_RANK_RTOL).unwrap();
        assert_eq!(v1.rank, Some(1));
        assert!(v1.member);

        let mix = MixtureModel::univariate(0.3, -1.0, 0.0, 2.0, 0.0).unwrap();
        let m = crate::moments::mixture_moments(&mix, 6).unwrap();
        let v2 = hankel_rank(&m, 6, DEFAULT_RANK_RTOL).unwrap();
        assert_eq!(v2.rank, Some(2));
        assert!(v2.member);

        let v3 = hankel_rank(&gaussian_moments_1d(0.0, 1.0, 6).unwrap(), 6, DEFAULT_RANK_RTOL)
            .unwrap();
        assert_eq!(v3.rank, Some(4));
        assert!(!v3.member);

        assert!(hankel_rank(&point_mass_1d(1.0, 6), 5, DEFAULT_RANK_RTOL).is_err());
    }

    fn point_mass_2d(a: f64, b: f64, d: usize) -> MomentVector {
        let comp =
            GaussianComponent::new(vec![a, b], vec![vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        gaussian_moments_nd(&comp, d).unwrap()
    }

    #[test]
    fn veronese_rank_on_point_masses() {
        let v1 = veronese_residual(&point_mass_2d(1.0, 2.0, 4), DEFAULT_RANK_RTOL).unwrap();
        assert_eq!(v1.rank, Some(1));
        assert!(v1.member);

        let c1 = GaussianComponent::new(vec![0.0, 0.0], vec![vec![0.0, 0.0], vec![0.0, 0.0]])
            .unwrap();
        let c2 = GaussianComponent::new(vec![1.0, 1.0], vec![vec![0.0, 0.0], vec![0.0, 0.0]])
            .unwrap();
        let mix = MixtureModel::new(vec![0.5, 0.5], vec![c1, c2]).unwrap();
        let m = crate::moments::mixture_moments(&mix, 4).unwrap();
        let v2 = veronese_residual(&m, DEFAULT_RANK_RTOL).unwrap();
        assert_eq!(v2.rank, Some(2));
        assert!(v2.member);

        let gauss = GaussianComponent::new(vec![0.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]])
            .unwrap();
        let mg = gaussian_moments_nd(&gauss, 4).unwrap();
        let v3 = veronese_residual(&mg, DEFAULT_RANK_RTOL).unwrap();
        assert!(v3.rank.unwrap() > 2);
        assert!(!v3.member);
    }

    fn bivariate_mixture(
        lambda: f64,
        mu1: [f64; 2],
        cov1: [[f64; 2]; 2],
        mu2: [f64; 2],
        cov2: [[f64; 2]; 2],
    ) -> MixtureModel {
        let c1 = GaussianComponent::new(
            mu1.to_vec(),
            vec![cov1[0].to_vec(), cov1[1].to_vec()],
        )
        .unwrap();
        let c2 = GaussianComponent::new(
            mu2.to_vec(),
            vec![cov2[0].to_vec(), cov2[1].to_vec()],
        )
        .unwrap();
        MixtureModel::new(vec![lambda, 1.0 - lambda], vec![c1, c2]).unwrap()
    }

    #[test]
    fn hilbert_burch_detects_shared_covariance() {
        let eye = [[1.0, 0.0], [0.0, 1.0]];
        let shared = bivariate_mixture(0.4, [0.0, 0.0], eye, [1.0, 1.0], eye);
        let m = crate::moments::mixture_moments(&shared, 3).unwrap();
        let v = hilbert_burch_residual(&m, DEFAULT_MEMBERSHIP_TOL).unwrap();
        assert!(v.member, "residual {}", v.residual);

        let double = [[2.0, 0.0], [0.0, 2.0]];
        let distinct = bivariate_mixture(0.4, [0.0, 0.0], eye, [1.0, 1.0], double);
        let m2 = crate::moments::mixture_moments(&distinct, 3).unwrap();
        let v2 = hilbert_burch_residual(&m2, DEFAULT_MEMBERSHIP_TOL).unwrap();
        assert!(!v2.member, "residual {}", v2.residual);

        let single = GaussianComponent::new(vec![0.3, -0.2], vec![vec![1.0, 0.4], vec![0.4, 2.0]])
            .unwrap();
        let m3 = gaussian_moments_nd(&single, 3).unwrap();
        let v3 = hilbert_burch_residual(&m3, DEFAULT_MEMBERSHIP_TOL).unwrap();
        assert!(v3.member, "residual {}", v3.residual);
    }

    /// Centered cumulants, true (p, s), and the residual list for an exact
    /// two-component mixture.
    fn mixture_secant_setup(
        lambda: f64,
        mu_c: f64,
        s2: f64,
        t2: f64,
        d: usize,
    ) -> (CumulantVector, f64, f64) {
        let nu_c = -lambda * mu_c / (1.0 - lambda);
        let model = MixtureModel::univariate(lambda, mu_c, s2, nu_c, t2).unwrap();
        let m = crate::moments::mixture_moments(&model, d).unwrap();
        let k = moments_to_cumulants(&m).unwrap();
        (k, mu_c * nu_c, mu_c + nu_c)
    }

    #[test]
    fn secant_residuals_vanish_on_exact_mixtures() {
        let (k, p, s) = mixture_secant_setup(0.35, -0.7, 0.5, 1.5, 8);
        let res = secant2_residuals(&k, p, s).unwrap();
        assert_eq!(res.len(), 5);
        for (i, r) in res.iter().enumerate() {
            assert!(r.abs() <= 1e-7, "E{} = {r}", i + 1);
        }

        let mut rng = ChaCha12Rng::seed_from_u64(52);
        for _ in 0..100 {
            let (k, p, s) = mixture_secant_setup(
                rng.gen_range(0.15..0.85),
                rng.gen_range(-2.0..-0.2),
                rng.gen_range(0.2..2.0),
                rng.gen_range(0.2..2.0),
                8,
            );
            for (i, r) in secant2_residuals(&k, p, s).unwrap().iter().enumerate() {
                assert!(r.abs() <= 1e-7, "E{} = {r}", i + 1);
            }
        }
    }

    #[test]
    fn secant_residuals_on_symmetric_design() {
        let data = special_data(7).unwrap();
        let m = sample_moments(&data, 6, false).unwrap();
        let k = moments_to_cumulants(&m).unwrap();
        let p = -(-k.get1(4) / 2.0).sqrt();
        let res = secant2_residuals(&k, p, 0.0).unwrap();
        assert!(res[0].abs() < 1e-9, "E1 = {}", res[0]);
        assert!(res[1].abs() < 1e-9, "E2 = {}", res[1]);
    }

    #[test]
    fn e3_is_linear_in_k6() {
        let (k, p, s) = mixture_secant_setup(0.4, -1.0, 0.6, 1.1, 6);
        let base = secant2_residuals(&k, p, s).unwrap();
        let delta = 1e-2;
        let bumped = CumulantVector::from_values(
            1,
            6,
            (1..=6).map(|r| {
                let v = k.get1(r) + if r == 6 { delta } else { 0.0 };
                (MultiIndex::univariate(r), v)
            }),
        )
        .unwrap();
        let res = secant2_residuals(&bumped, p, s).unwrap();
        assert_eq!(res[0], base[0]);
        assert_eq!(res[1], base[1]);
        // raw E3 shifts by exactly -9 * delta * p^2
        let (raw_base, scale_base) = equations::eval(equations::E3, p, s, &karr(&k));
        let (raw_bump, _) = equations::eval(equations::E3, p, s, &karr(&bumped));
        let expect = -9.0 * delta * p * p;
        assert!(
            ((raw_bump - raw_base) - expect).abs() <= 1e-9 * expect.abs(),
            "shift {} vs {expect}",
            raw_bump - raw_base
        );
        assert!(res[2].abs() * scale_base > 1e-6 * expect.abs());
    }

    fn karr(k: &CumulantVector) -> [f64; 9] {
        let mut kv = [0.0f64; 9];
        for r in 1..=k.order().min(8) {
            kv[r] = k.get1(r);
        }
        kv
    }

    /// Nine-point central difference, exact for polynomials of degree <= 8.
    fn derivative_at<F: Fn(f64) -> f64>(f: F, x: f64) -> f64 {
        let c = [3.0, -32.0, 168.0, -672.0, 0.0, 672.0, -168.0, 32.0, -3.0];
        let mut acc = 0.0;
        for (i, &w) in c.iter().enumerate() {
            if w != 0.0 {
                acc += w * f(x + (i as f64 - 4.0));
            }
        }
        acc / 840.0
    }

    #[test]
    fn equation_coefficients_pinned_by_finite_differences() {
        // reference point p=2, s=3, k2=1, k3=2, k4=-1, k5=3, k6=2, k7=1, k8=-2
        let kv: [f64; 9] = [0.0, 0.0, 1.0, 2.0, -1.0, 3.0, 2.0, 1.0, -2.0];
        let (p, s) = (2.0, 3.0);

        let cases: [(&[equations::Term], f64, &[(usize, f64)]); 5] = [
            (equations::E1, -74.0, &[(0, -27.0), (1, -64.0), (3, -20.0), (4, 6.0)]),
            (equations::E2, -202.0, &[(0, -223.0), (1, -164.0), (3, -20.0), (5, 6.0)]),
            (
                equations::E3,
                8436.0,
                &[(0, 14976.0), (1, 4216.0), (2, 6660.0), (3, -540.0), (4, -540.0), (6, -36.0)],
            ),
            (
                equations::E4,
                -34936.0,
                &[
                    (0, -86516.0),
                    (1, 24.0),
                    (2, -25452.0),
                    (3, 1848.0),
                    (4, 2520.0),
                    (5, 756.0),
                    (7, 36.0),
                ],
            ),
            (
                equations::E5,
                -872872.0,
                &[
                    (0, -3164180.0),
                    (1, 204896.0),
                    (2, -1417248.0),
                    (3, 390880.0),
                    (4, 30240.0),
                    (5, 24192.0),
                    (6, 6048.0),
                    (8, 216.0),
                ],
            ),
        ];

        for (terms, value, partials) in cases {
            let (v, _) = equations::eval(terms, p, s, &kv);
            assert_eq!(v, value);
            for &(var, expect) in partials {
                let fd = derivative_at(
                    |x| {
                        let mut kk = kv;
                        let (mut pp, mut ss) = (p, s);
                        match var {
                            0 => pp = x,
                            1 => ss = x,
                            r => kk[r] = x,
                        }
                        equations::eval(terms, pp, ss, &kk).0
                    },
                    match var {
                        0 => p,
                        1 => s,
                        r => kv[r],
                    },
                );
                assert!(
                    (fd - expect).abs() <= 1e-9 * expect.abs().max(1.0),
                    "partial {var}: {fd} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn secant_residuals_require_order_six() {
        let m = gaussian_moments_1d(0.0, 1.0, 5).unwrap();
        let k = moments_to_cumulants(&m).unwrap();
        assert!(secant2_residuals(&k, -1.0, 0.0).is_err());
    }

    fn zero_mean_cov_mixture(lambda: f64, cov1: [[f64; 2]; 2], cov2: [[f64; 2]; 2]) -> MomentVector {
        let model = bivariate_mixture(lambda, [0.0, 0.0], cov1, [0.0, 0.0], cov2);
        crate::moments::mixture_moments(&model, 6).unwrap()
    }

    #[test]
    fn quartic_vanishes_on_zero_mean_two_mixtures() {
        let m = zero_mean_cov_mixture(0.5, [[1.0, 0.0], [0.0, 1.0]], [[2.0, 1.0], [1.0, 2.0]]);
        let v = zero_mean_quartic(&m, DEFAULT_MEMBERSHIP_TOL).unwrap();
        assert!(v.member, "residual {}", v.residual);

        let single = GaussianComponent::new(vec![0.0, 0.0], vec![vec![1.3, 0.5], vec![0.5, 0.8]])
            .unwrap();
        let ms = gaussian_moments_nd(&single, 6).unwrap();
        let vs = zero_mean_quartic(&ms, DEFAULT_MEMBERSHIP_TOL).unwrap();
        assert!(vs.residual <= 1e-12, "residual {}", vs.residual);

        // three generic components leave the locus
        let c: Vec<GaussianComponent> = [
            [[1.0, 0.3], [0.3, 2.0]],
            [[0.5, -0.2], [-0.2, 0.9]],
            [[2.5, 0.8], [0.8, 1.2]],
        ]
        .iter()
        .map(|cov| {
            GaussianComponent::new(vec![0.0, 0.0], vec![cov[0].to_vec(), cov[1].to_vec()])
                .unwrap()
        })
        .collect();
        let three = MixtureModel::new(vec![0.3, 0.3, 0.4], c).unwrap();
        let m3 = crate::moments::mixture_moments(&three, 6).unwrap();
        let v3 = zero_mean_quartic(&m3, DEFAULT_MEMBERSHIP_TOL).unwrap();
        assert!(v3.residual > 1e-4, "residual {}", v3.residual);
    }

    #[test]
    fn g16_membership_accepts_mixtures_rejects_perturbed() {
        let mix = MixtureModel::univariate(0.3, -0.6, 0.7, 1.4, 1.1).unwrap();
        let m = crate::moments::mixture_moments(&mix, 6).unwrap();
        let v = secant2_g16_membership(&m, DEFAULT_M6_MATCH_RTOL).unwrap();
        assert!(v.member, "residual {}", v.residual);

        let mut vals: Vec<(MultiIndex, f64)> =
            m.iter().collect();
        for (idx, val) in vals.iter_mut() {
            if idx.order() == 6 {
                *val += 0.1;
            }
        }
        let perturbed = MomentVector::from_values(1, 6, vals).unwrap();
        let vp = secant2_g16_membership(&perturbed, DEFAULT_M6_MATCH_RTOL).unwrap();
        assert!(!vp.member, "residual {}", vp.residual);

        // two point masses form a rank-2 Hankel point inside the secant
        let masses = MixtureModel::univariate(0.4, -1.0, 0.0, 1.5, 0.0).unwrap();
        let mh = crate::moments::mixture_moments(&masses, 6).unwrap();
        let vh = secant2_g16_membership(&mh, DEFAULT_M6_MATCH_RTOL).unwrap();
        assert!(vh.member, "residual {}", vh.residual);
    }

    #[test]
    fn cumulant_and_minor_memberships_agree() {
        let mut rng = ChaCha12Rng::seed_from_u64(53);
        for trial in 0..200 {
            // member: exact Gaussian moments
            let d = rng.gen_range(3..=8);
            let m = gaussian_moments_1d(
                rng.gen_range(-2.5..2.5),
                rng.gen_range(0.05..3.0),
                d,
            )
            .unwrap();
            let k = moments_to_cumulants(&m).unwrap();
            let scale = (0..=d).map(|i| m.get1(i).abs()).fold(1.0, f64::max);
            let cumulant_member = (3..=d).all(|r| k.get1(r).abs() <= 1e-10 * scale);
            let minor_member = residual_g1d(&m, d, DEFAULT_MEMBERSHIP_TOL).unwrap().member;
            assert!(cumulant_member && minor_member, "trial {trial}");

            // non-member: random moment vector
            let mut vals = vec![(MultiIndex::univariate(0), 1.0)];
            for i in 1..=d {
                vals.push((MultiIndex::univariate(i), rng.gen_range(0.5..1.5)));
            }
            let r = MomentVector::from_values(1, d, vals).unwrap();
            let kr = moments_to_cumulants(&r).unwrap();
            let rscale = (0..=d).map(|i| r.get1(i).abs()).fold(1.0, f64::max);
            let cm = (3..=d).all(|x| kr.get1(x).abs() <= 1e-10 * rscale);
            let mm = residual_g1d(&r, d, DEFAULT_MEMBERSHIP_TOL).unwrap().member;
            assert!(!cm && !mm, "trial {trial}");
        }
    }

    #[test]
    fn verdict_json_has_contract_fields() {
        let v = hankel_rank(&point_mass_1d(2.0, 6), 6, DEFAULT_RANK_RTOL).unwrap();
        let json = v.to_json();
        let parsed: MembershipVerdict = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed.member, v.member);
        assert_eq!(parsed.rank, v.rank);
        assert_eq!(parsed.test, "hankel");
    }
}
