//! Truncated multivariate power-series arithmetic over `f64`.
//!
//! A [`TruncatedSeries`] stores every coefficient of total order `<= d` in
//! `n` variables, grouped by total order. Multiplication convolves and
//! discards everything above the truncation order, so `mul`, `exp` and `log`
//! are closed on series of a fixed shape. This is the engine behind the
//! moment/cumulant transforms: the exponential generating function of the
//! moments is `exp` of the generating function of the cumulants.

use crate::error::{Error, Result};

/// Exponent tuple addressing one coefficient: `(i_1, ..., i_n)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(exponents: Vec<usize>) -> Result<Self> {
        if exponents.is_empty() {
            return Err(Error::Dimension("multi-index needs n >= 1".into()));
        }
        Ok(MultiIndex(exponents))
    }

    pub fn univariate(i: usize) -> Self {
        MultiIndex(vec![i])
    }

    pub fn bivariate(i: usize, j: usize) -> Self {
        MultiIndex(vec![i, j])
    }

    /// Number of variables.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Total order `i_1 + ... + i_n`.
    pub fn order(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn exponents(&self) -> &[usize] {
        &self.0
    }

    /// `i_1! i_2! ... i_n!` as a float (exact for the small orders used here).
    pub fn factorial(&self) -> f64 {
        self.0
            .iter()
            .map(|&e| (1..=e).map(|v| v as f64).product::<f64>())
            .product()
    }
}

impl std::fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|e| e.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// Number of multi-indices with `parts` entries summing to `order`.
pub(crate) fn order_len(parts: usize, order: usize) -> usize {
    if parts == 0 {
        return usize::from(order == 0);
    }
    binomial(order + parts - 1, parts - 1)
}

/// Position of `exponents` among all tuples of the same length and total
/// order, in ascending lexicographic order.
pub(crate) fn rank_in_order(exponents: &[usize]) -> usize {
    let mut rank = 0;
    let mut rem: usize = exponents.iter().sum();
    let mut parts = exponents.len();
    for &x in exponents {
        if parts == 1 {
            break;
        }
        for v in 0..x {
            rank += order_len(parts - 1, rem - v);
        }
        rem -= x;
        parts -= 1;
    }
    rank
}

/// All multi-indices of the given length and total order, ascending lex.
pub(crate) fn indices_of_order(n: usize, order: usize) -> Vec<MultiIndex> {
    let mut out = Vec::with_capacity(order_len(n, order));
    let mut cur = vec![0usize; n];
    fn rec(cur: &mut Vec<usize>, pos: usize, rem: usize, out: &mut Vec<MultiIndex>) {
        if pos + 1 == cur.len() {
            cur[pos] = rem;
            out.push(MultiIndex(cur.clone()));
            return;
        }
        for v in 0..=rem {
            cur[pos] = v;
            rec(cur, pos + 1, rem - v, out);
        }
    }
    rec(&mut cur, 0, order, &mut out);
    out
}

/// Dense coefficient table grouped by total order; the shared storage of
/// series, moment vectors and cumulant vectors.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Grid {
    pub n: usize,
    pub d: usize,
    /// `data[o][rank_in_order(idx)]` for every index of total order `o`.
    pub data: Vec<Vec<f64>>,
}

impl Grid {
    pub fn zero(n: usize, d: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension("variable count must be >= 1".into()));
        }
        let data = (0..=d).map(|o| vec![0.0; order_len(n, o)]).collect();
        Ok(Grid { n, d, data })
    }

    pub fn get(&self, idx: &MultiIndex) -> f64 {
        debug_assert_eq!(idx.len(), self.n);
        let o = idx.order();
        if o > self.d {
            return 0.0;
        }
        self.data[o][rank_in_order(idx.exponents())]
    }

    pub fn set(&mut self, idx: &MultiIndex, value: f64) -> Result<()> {
        if idx.len() != self.n {
            return Err(Error::Dimension(format!(
                "index has {} variables, grid has {}",
                idx.len(),
                self.n
            )));
        }
        let o = idx.order();
        if o > self.d {
            return Err(Error::Dimension(format!(
                "index order {} exceeds truncation {}",
                o, self.d
            )));
        }
        self.data[o][rank_in_order(idx.exponents())] = value;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (MultiIndex, f64)> + '_ {
        (0..=self.d).flat_map(move |o| {
            indices_of_order(self.n, o)
                .into_iter()
                .zip(self.data[o].iter().copied())
        })
    }
}

/// Multivariate power series truncated at a fixed total order.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSeries {
    grid: Grid,
}

impl TruncatedSeries {
    /// The zero series in `n` variables truncated at order `d`.
    pub fn zero(n: usize, d: usize) -> Result<Self> {
        Ok(TruncatedSeries { grid: Grid::zero(n, d)? })
    }

    /// The constant series `c`.
    pub fn constant(n: usize, d: usize, c: f64) -> Result<Self> {
        let mut s = Self::zero(n, d)?;
        s.grid.data[0][0] = c;
        Ok(s)
    }

    pub fn var_count(&self) -> usize {
        self.grid.n
    }

    pub fn truncation_order(&self) -> usize {
        self.grid.d
    }

    /// Coefficient of the monomial addressed by `idx` (0 for absent terms).
    pub fn coefficient(&self, idx: &MultiIndex) -> f64 {
        self.grid.get(idx)
    }

    pub fn set_coefficient(&mut self, idx: &MultiIndex, value: f64) -> Result<()> {
        self.grid.set(idx, value)
    }

    pub fn constant_term(&self) -> f64 {
        self.grid.data[0][0]
    }

    /// All `(index, coefficient)` pairs of order `<= d`, including zeros.
    pub fn terms(&self) -> impl Iterator<Item = (MultiIndex, f64)> + '_ {
        self.grid.iter()
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.grid.n != other.grid.n || self.grid.d != other.grid.d {
            return Err(Error::Dimension(format!(
                "series shapes differ: ({}, {}) vs ({}, {})",
                self.grid.n, self.grid.d, other.grid.n, other.grid.d
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let mut out = self.clone();
        for (o, slab) in out.grid.data.iter_mut().enumerate() {
            for (i, v) in slab.iter_mut().enumerate() {
                *v += other.grid.data[o][i];
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        for slab in out.grid.data.iter_mut() {
            for v in slab.iter_mut() {
                *v *= c;
            }
        }
        out
    }

    /// Product truncated at the common order.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let (n, d) = (self.grid.n, self.grid.d);
        let mut out = Grid::zero(n, d)?;
        for oa in 0..=d {
            let idx_a = indices_of_order(n, oa);
            for ob in 0..=(d - oa) {
                let idx_b = indices_of_order(n, ob);
                for (ia, a_idx) in idx_a.iter().enumerate() {
                    let ca = self.grid.data[oa][ia];
                    if ca == 0.0 {
                        continue;
                    }
                    for (ib, b_idx) in idx_b.iter().enumerate() {
                        let cb = other.grid.data[ob][ib];
                        if cb == 0.0 {
                            continue;
                        }
                        let sum: Vec<usize> = a_idx
                            .exponents()
                            .iter()
                            .zip(b_idx.exponents())
                            .map(|(x, y)| x + y)
                            .collect();
                        out.data[oa + ob][rank_in_order(&sum)] += ca * cb;
                    }
                }
            }
        }
        Ok(TruncatedSeries { grid: out })
    }

    /// `exp` of a series with zero constant term: `sum_{j<=d} self^j / j!`.
    pub fn exp(&self) -> Result<Self> {
        if self.constant_term() != 0.0 {
            return Err(Error::Precondition(
                "exp requires a zero constant term".into(),
            ));
        }
        let (n, d) = (self.grid.n, self.grid.d);
        let mut result = Self::constant(n, d, 1.0)?;
        let mut term = Self::constant(n, d, 1.0)?;
        for j in 1..=d {
            term = term.mul(self)?.scale(1.0 / j as f64);
            result = result.add(&term)?;
        }
        Ok(result)
    }

    /// `log` of a series with constant term 1:
    /// `sum_{j=1..d} (-1)^(j+1) (self - 1)^j / j`.
    pub fn log(&self) -> Result<Self> {
        if self.constant_term() != 1.0 {
            return Err(Error::Precondition(
                "log requires a constant term equal to 1".into(),
            ));
        }
        let (n, d) = (self.grid.n, self.grid.d);
        let mut x = self.clone();
        x.grid.data[0][0] = 0.0;
        let mut result = Self::zero(n, d)?;
        let mut power = Self::constant(n, d, 1.0)?;
        for j in 1..=d {
            power = power.mul(&x)?;
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            result = result.add(&power.scale(sign / j as f64))?;
        }
        Ok(result)
    }

    /// Evaluate at a point (test utility; exact for polynomial inputs).
    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.grid.n {
            return Err(Error::Dimension("evaluation point has wrong length".into()));
        }
        let mut acc = 0.0;
        for (idx, c) in self.terms() {
            if c == 0.0 {
                continue;
            }
            let mono: f64 = idx
                .exponents()
                .iter()
                .zip(point)
                .map(|(&e, &x)| x.powi(e as i32))
                .product();
            acc += c * mono;
        }
        Ok(acc)
    }
}
