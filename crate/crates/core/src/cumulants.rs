//! Moment/cumulant conversion in any dimension.
//!
//! The production path goes through the truncated series engine: the
//! exponential generating function of the moments is `exp` of the generating
//! function of the cumulants, so conversion is `log`/`exp` plus factorial
//! scaling. The [`closed_form`] module carries the explicit low-order
//! polynomial formulas as an independent cross-check; it is exercised by
//! tests only.

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::moments::{MomentVector, VectorRepr};
use crate::series::{indices_of_order, order_len, rank_in_order, Grid, MultiIndex};
use serde::{Deserialize, Serialize};

/// All cumulants of total order `<= d` in `n` variables; `k_{0...0} = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulantVector {
    pub(crate) grid: Grid,
}

impl CumulantVector {
    /// Build from `(index, value)` pairs; missing entries are zero. The
    /// zeroth cumulant must be zero.
    pub fn from_values(
        n: usize,
        d: usize,
        values: impl IntoIterator<Item = (MultiIndex, f64)>,
    ) -> Result<Self> {
        let mut grid = Grid::zero(n, d)?;
        for (idx, v) in values {
            if !v.is_finite() {
                return Err(Error::Domain(format!("cumulant {idx} is not finite")));
            }
            grid.set(&idx, v)?;
        }
        if grid.data[0][0] != 0.0 {
            return Err(Error::Precondition("zeroth cumulant must be 0".into()));
        }
        Ok(CumulantVector { grid })
    }

    pub fn var_count(&self) -> usize {
        self.grid.n
    }

    pub fn order(&self) -> usize {
        self.grid.d
    }

    pub fn get(&self, idx: &MultiIndex) -> f64 {
        self.grid.get(idx)
    }

    pub fn get1(&self, i: usize) -> f64 {
        self.grid.get(&MultiIndex::univariate(i))
    }

    pub fn get2(&self, i: usize, j: usize) -> f64 {
        self.grid.get(&MultiIndex::bivariate(i, j))
    }

    pub fn iter(&self) -> impl Iterator<Item = (MultiIndex, f64)> + '_ {
        self.grid.iter()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("cumulant vector serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("cumulant vector JSON: {e}")))
    }
}

impl Serialize for CumulantVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        VectorRepr::from_grid(&self.grid).serialize(s)
    }
}

impl<'de> Deserialize<'de> for CumulantVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = VectorRepr::deserialize(d)?;
        let (n, dd, pairs) = repr.into_pairs().map_err(serde::de::Error::custom)?;
        CumulantVector::from_values(n, dd, pairs).map_err(serde::de::Error::custom)
    }
}

// The transforms run in double-double internally: low-order cumulants of
// data with a large mean cancel by many orders of magnitude (k6 loses ~9
// digits against the raw sixth moment), and single rounding inside the
// series convolution multiplies that loss by another 10-50x.
type DdSlabs = Vec<Vec<Dd>>;

fn dd_zero(n: usize, d: usize) -> DdSlabs {
    (0..=d).map(|o| vec![Dd::ZERO; order_len(n, o)]).collect()
}

fn dd_mul(a: &DdSlabs, b: &DdSlabs, n: usize, d: usize) -> DdSlabs {
    let mut out = dd_zero(n, d);
    for oa in 0..=d {
        let idx_a = indices_of_order(n, oa);
        for ob in 0..=(d - oa) {
            let idx_b = indices_of_order(n, ob);
            for (ia, ai) in idx_a.iter().enumerate() {
                let ca = a[oa][ia];
                if ca == Dd::ZERO {
                    continue;
                }
                for (ib, bi) in idx_b.iter().enumerate() {
                    let cb = b[ob][ib];
                    if cb == Dd::ZERO {
                        continue;
                    }
                    let sum: Vec<usize> = ai
                        .exponents()
                        .iter()
                        .zip(bi.exponents())
                        .map(|(x, y)| x + y)
                        .collect();
                    let slot = &mut out[oa + ob][rank_in_order(&sum)];
                    *slot = slot.add(ca.mul(cb));
                }
            }
        }
    }
    out
}

/// Cumulants from moments: factorial-scaled coefficients of the log of the
/// factorial-scaled moment series.
pub fn moments_to_cumulants(m: &MomentVector) -> Result<CumulantVector> {
    let (n, d) = (m.var_count(), m.order());
    if m.get(&MultiIndex::new(vec![0; n])?) <= 0.0 {
        return Err(Error::Domain("zeroth moment must be positive".into()));
    }
    // x = (moment egf) - 1, with a zero constant term
    let mut x = dd_zero(n, d);
    for (o, idxs) in (0..=d).map(|o| (o, indices_of_order(n, o))) {
        for (pos, idx) in idxs.iter().enumerate() {
            let v = Dd::from_f64(m.get(idx)).div_f64(idx.factorial());
            x[o][pos] = if o == 0 { v.sub(Dd::ONE) } else { v };
        }
    }
    // log(1 + x) = sum_{j=1..d} (-1)^(j+1) x^j / j
    let mut result = dd_zero(n, d);
    let mut power = dd_zero(n, d);
    power[0][0] = Dd::ONE;
    for j in 1..=d {
        power = dd_mul(&power, &x, n, d);
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        for (slabs, pw) in result.iter_mut().zip(&power) {
            for (slot, &p) in slabs.iter_mut().zip(pw) {
                *slot = slot.add(p.mul_f64(sign).div_f64(j as f64));
            }
        }
    }
    CumulantVector::from_values(
        n,
        d,
        (0..=d).flat_map(|o| {
            let idxs = indices_of_order(n, o);
            let slab = &result[o];
            idxs.into_iter()
                .enumerate()
                .map(|(pos, idx)| {
                    let f = idx.factorial();
                    (idx, slab[pos].mul_f64(f).value())
                })
                .collect::<Vec<_>>()
        }),
    )
}

/// Moments from cumulants: the inverse transform through `exp`.
pub fn cumulants_to_moments(k: &CumulantVector) -> Result<MomentVector> {
    let (n, d) = (k.var_count(), k.order());
    let mut arg = dd_zero(n, d);
    for (o, idxs) in (0..=d).map(|o| (o, indices_of_order(n, o))) {
        for (pos, idx) in idxs.iter().enumerate() {
            arg[o][pos] = Dd::from_f64(k.get(idx)).div_f64(idx.factorial());
        }
    }
    // exp(arg) = sum_{j=0..d} arg^j / j!
    let mut result = dd_zero(n, d);
    result[0][0] = Dd::ONE;
    let mut term = dd_zero(n, d);
    term[0][0] = Dd::ONE;
    for j in 1..=d {
        term = dd_mul(&term, &arg, n, d);
        term = term
            .into_iter()
            .map(|slab| slab.into_iter().map(|v| v.div_f64(j as f64)).collect())
            .collect();
        for (slabs, tm) in result.iter_mut().zip(&term) {
            for (slot, &t) in slabs.iter_mut().zip(tm) {
                *slot = slot.add(t);
            }
        }
    }
    MomentVector::from_values(
        n,
        d,
        (0..=d).flat_map(|o| {
            let idxs = indices_of_order(n, o);
            let slab = &result[o];
            idxs.into_iter()
                .enumerate()
                .map(|(pos, idx)| {
                    let f = idx.factorial();
                    (idx, slab[pos].mul_f64(f).value())
                })
                .collect::<Vec<_>>()
        }),
    )
}

/// Hand-coded low-order cumulant formulas, kept separate from the series
/// path so the two derivations can cross-validate each other.
pub mod closed_form {
    use super::*;

    /// `k_1..k_6` of a univariate moment vector (needs order >= 6).
    pub fn univariate_k1_to_k6(m: &MomentVector) -> Result<[f64; 6]> {
        if m.var_count() != 1 || m.order() < 6 {
            return Err(Error::Dimension(
                "univariate formulas need n = 1, d >= 6".into(),
            ));
        }
        let m1 = m.get1(1);
        let m2 = m.get1(2);
        let m3 = m.get1(3);
        let m4 = m.get1(4);
        let m5 = m.get1(5);
        let m6 = m.get1(6);
        let k1 = m1;
        let k2 = m2 - m1 * m1;
        let k3 = m3 - 3.0 * m1 * m2 + 2.0 * m1.powi(3);
        let k4 = m4 - 4.0 * m1 * m3 - 3.0 * m2 * m2 + 12.0 * m1 * m1 * m2 - 6.0 * m1.powi(4);
        let k5 = m5 - 5.0 * m1 * m4 - 10.0 * m2 * m3
            + 20.0 * m1 * m1 * m3
            + 30.0 * m1 * m2 * m2
            - 60.0 * m1.powi(3) * m2
            + 24.0 * m1.powi(5);
        let k6 = m6 - 6.0 * m1 * m5 - 15.0 * m2 * m4 + 30.0 * m1 * m1 * m4 - 10.0 * m3 * m3
            + 120.0 * m1 * m2 * m3
            - 120.0 * m1.powi(3) * m3
            + 30.0 * m2.powi(3)
            - 270.0 * m1 * m1 * m2 * m2
            + 360.0 * m1.powi(4) * m2
            - 120.0 * m1.powi(6);
        Ok([k1, k2, k3, k4, k5, k6])
    }

    /// The nine bivariate cumulants of orders 3 and 4, as `((i, j), value)`.
    ///
    /// The printed source for `k_13` is missing an operator between two
    /// monomials; the reading used here (`- 3 m02 m11 - m03 m10`) is the one
    /// that agrees with the series transform, which the tests pin down.
    pub fn bivariate_order_3_4(m: &MomentVector) -> Result<[((usize, usize), f64); 9]> {
        if m.var_count() != 2 || m.order() < 4 {
            return Err(Error::Dimension(
                "bivariate formulas need n = 2, d >= 4".into(),
            ));
        }
        let g = |i: usize, j: usize| m.get2(i, j);
        let (m01, m02, m03, m04) = (g(0, 1), g(0, 2), g(0, 3), g(0, 4));
        let (m10, m11, m12, m13) = (g(1, 0), g(1, 1), g(1, 2), g(1, 3));
        let (m20, m21, m22) = (g(2, 0), g(2, 1), g(2, 2));
        let (m30, m31) = (g(3, 0), g(3, 1));
        let m40 = g(4, 0);

        let k03 = 2.0 * m01.powi(3) - 3.0 * m01 * m02 + m03;
        let k12 = 2.0 * m01 * m01 * m10 - 2.0 * m01 * m11 - m02 * m10 + m12;
        let k21 = 2.0 * m01 * m10 * m10 - m01 * m20 - 2.0 * m10 * m11 + m21;
        let k30 = 2.0 * m10.powi(3) - 3.0 * m10 * m20 + m30;
        let k04 = -6.0 * m01.powi(4) + 12.0 * m01 * m01 * m02 - 4.0 * m01 * m03
            - 3.0 * m02 * m02
            + m04;
        let k13 = -6.0 * m01.powi(3) * m10 + 6.0 * m01 * m01 * m11 + 6.0 * m01 * m02 * m10
            - 3.0 * m01 * m12
            - 3.0 * m02 * m11
            - m03 * m10
            + m13;
        let k22 = -6.0 * m01 * m01 * m10 * m10
            + 2.0 * m01 * m01 * m20
            + 8.0 * m01 * m10 * m11
            + 2.0 * m02 * m10 * m10
            - 2.0 * m01 * m21
            - m02 * m20
            - 2.0 * m10 * m12
            - 2.0 * m11 * m11
            + m22;
        let k31 = -6.0 * m01 * m10.powi(3) + 6.0 * m01 * m10 * m20 + 6.0 * m10 * m10 * m11
            - m01 * m30
            - 3.0 * m10 * m21
            - 3.0 * m11 * m20
            + m31;
        let k40 = -6.0 * m10.powi(4) + 12.0 * m10 * m10 * m20 - 4.0 * m10 * m30
            - 3.0 * m20 * m20
            + m40;

        Ok([
            ((0, 3), k03),
            ((1, 2), k12),
            ((2, 1), k21),
            ((3, 0), k30),
            ((0, 4), k04),
            ((1, 3), k13),
            ((2, 2), k22),
            ((3, 1), k31),
            ((4, 0), k40),
        ])
    }
}
