//! Forward moment maps: exact moments of Gaussians and their mixtures, and
//! empirical moments of data samples.
//!
//! Moment vectors live in the affine chart `m_{0...0} = 1`; constructors
//! divide through by the zeroth entry and reject a vanishing one.

use crate::dd::{two_sum, Dd};
use crate::error::{Error, Result};
use crate::series::{indices_of_order, order_len, Grid, MultiIndex, TruncatedSeries};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One Gaussian component: mean vector and symmetric PSD covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    mean: Vec<f64>,
    covariance: Vec<Vec<f64>>,
}

impl GaussianComponent {
    pub fn new(mean: Vec<f64>, covariance: Vec<Vec<f64>>) -> Result<Self> {
        let n = mean.len();
        if n == 0 {
            return Err(Error::Dimension("mean must have length >= 1".into()));
        }
        if covariance.len() != n || covariance.iter().any(|row| row.len() != n) {
            return Err(Error::Dimension("covariance must be n x n".into()));
        }
        let mut trace = 0.0;
        for i in 0..n {
            trace += covariance[i][i];
            for j in 0..n {
                if !covariance[i][j].is_finite()
                    || (covariance[i][j] - covariance[j][i]).abs()
                        > 1e-12 * (1.0 + covariance[i][j].abs())
                {
                    return Err(Error::Domain("covariance must be symmetric".into()));
                }
            }
        }
        let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (covariance[i][j] + covariance[j][i]));
        let eigs = m.symmetric_eigenvalues();
        if eigs.iter().any(|&e| e < -1e-12 * trace.abs().max(1.0)) {
            return Err(Error::Domain(
                "covariance must be positive semidefinite".into(),
            ));
        }
        Ok(GaussianComponent { mean, covariance })
    }

    pub fn univariate(mean: f64, variance: f64) -> Result<Self> {
        if variance < 0.0 {
            return Err(Error::Domain("variance must be non-negative".into()));
        }
        Ok(GaussianComponent {
            mean: vec![mean],
            covariance: vec![vec![variance]],
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &[Vec<f64>] {
        &self.covariance
    }

    /// Scalar variance of a univariate component.
    pub fn variance(&self) -> Result<f64> {
        if self.dim() != 1 {
            return Err(Error::Dimension("variance is defined for n = 1".into()));
        }
        Ok(self.covariance[0][0])
    }
}

/// Convex combination of Gaussian components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    weights: Vec<f64>,
    components: Vec<GaussianComponent>,
}

impl MixtureModel {
    pub fn new(weights: Vec<f64>, components: Vec<GaussianComponent>) -> Result<Self> {
        if components.is_empty() || weights.len() != components.len() {
            return Err(Error::Dimension(
                "need k >= 1 components with matching weights".into(),
            ));
        }
        let n = components[0].dim();
        if components.iter().any(|c| c.dim() != n) {
            return Err(Error::Dimension("components must share one dimension".into()));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::Domain("weights must be non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!(
                "weights must sum to 1 (got {total})"
            )));
        }
        Ok(MixtureModel { weights, components })
    }

    /// Two-component univariate mixture `lambda N(mu, sigma2) + (1-lambda) N(nu, tau2)`.
    pub fn univariate(lambda: f64, mu: f64, sigma2: f64, nu: f64, tau2: f64) -> Result<Self> {
        MixtureModel::new(
            vec![lambda, 1.0 - lambda],
            vec![
                GaussianComponent::univariate(mu, sigma2)?,
                GaussianComponent::univariate(nu, tau2)?,
            ],
        )
    }

    pub fn single(component: GaussianComponent) -> Self {
        MixtureModel {
            weights: vec![1.0],
            components: vec![component],
        }
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }
}

/// All moments of total order `<= d` in `n` variables, in the chart `m_0 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    pub(crate) grid: Grid,
}

impl MomentVector {
    /// Build from `(index, value)` pairs; missing entries are zero. The vector
    /// is normalized so the zeroth moment is 1; a zero zeroth moment is
    /// rejected.
    pub fn from_values(
        n: usize,
        d: usize,
        values: impl IntoIterator<Item = (MultiIndex, f64)>,
    ) -> Result<Self> {
        let mut grid = Grid::zero(n, d)?;
        for (idx, v) in values {
            if !v.is_finite() {
                return Err(Error::Domain(format!("moment {idx} is not finite")));
            }
            grid.set(&idx, v)?;
        }
        let m0 = grid.data[0][0];
        if m0 == 0.0 {
            return Err(Error::Domain("zeroth moment must be nonzero".into()));
        }
        if m0 != 1.0 {
            for slab in grid.data.iter_mut() {
                for v in slab.iter_mut() {
                    *v /= m0;
                }
            }
        }
        Ok(MomentVector { grid })
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

    /// Univariate accessor `m_i`.
    pub fn get1(&self, i: usize) -> f64 {
        self.grid.get(&MultiIndex::univariate(i))
    }

    /// Bivariate accessor `m_ij`.
    pub fn get2(&self, i: usize, j: usize) -> f64 {
        self.grid.get(&MultiIndex::bivariate(i, j))
    }

    pub fn iter(&self) -> impl Iterator<Item = (MultiIndex, f64)> + '_ {
        self.grid.iter()
    }

    /// Restrict to orders `<= d`.
    pub fn truncated(&self, d: usize) -> Result<Self> {
        if d > self.grid.d {
            return Err(Error::Dimension(format!(
                "cannot extend order {} to {}",
                self.grid.d, d
            )));
        }
        let mut grid = Grid::zero(self.grid.n, d)?;
        for o in 0..=d {
            grid.data[o].clone_from(&self.grid.data[o]);
        }
        Ok(MomentVector { grid })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("moment vector serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("moment vector JSON: {e}")))
    }
}

/// Shared JSON shape for moment and cumulant vectors:
/// `{"n": ..., "d": ..., "values": {"i1,...,in": float}}`.
#[derive(Serialize, Deserialize)]
pub(crate) struct VectorRepr {
    pub n: usize,
    pub d: usize,
    pub values: BTreeMap<String, f64>,
}

impl VectorRepr {
    pub fn from_grid(grid: &Grid) -> Self {
        let values = grid.iter().map(|(idx, v)| (idx.to_string(), v)).collect();
        VectorRepr {
            n: grid.n,
            d: grid.d,
            values,
        }
    }

    pub fn into_pairs(self) -> Result<(usize, usize, Vec<(MultiIndex, f64)>)> {
        let mut pairs = Vec::with_capacity(self.values.len());
        for (key, v) in self.values {
            let exps: std::result::Result<Vec<usize>, _> =
                key.split(',').map(|p| p.trim().parse::<usize>()).collect();
            let exps = exps.map_err(|_| Error::Parse(format!("bad index key '{key}'")))?;
            if exps.len() != self.n {
                return Err(Error::Parse(format!(
                    "index '{key}' has {} entries, expected {}",
                    exps.len(),
                    self.n
                )));
            }
            pairs.push((MultiIndex::new(exps)?, v));
        }
        Ok((self.n, self.d, pairs))
    }
}

impl Serialize for MomentVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        VectorRepr::from_grid(&self.grid).serialize(s)
    }
}

impl<'de> Deserialize<'de> for MomentVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = VectorRepr::deserialize(d)?;
        let (n, dd, pairs) = repr.into_pairs().map_err(serde::de::Error::custom)?;
        MomentVector::from_values(n, dd, pairs).map_err(serde::de::Error::custom)
    }
}

/// A list of observations in `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    rows: Vec<Vec<f64>>,
    label: Option<String>,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, label: Option<String>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Domain("dataset must be non-empty".into()));
        }
        let n = rows[0].len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("rows must share one positive length".into()));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Domain("dataset entries must be finite".into()));
        }
        Ok(Dataset { n, rows, label })
    }

    pub fn univariate(values: Vec<f64>, label: Option<String>) -> Result<Self> {
        Dataset::new(values.into_iter().map(|v| vec![v]).collect(), label)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    /// Parse CSV text: one observation per line, comma-separated coordinates.
    /// Lines starting with `#` are comments; a `# label: ...` comment is
    /// picked up as the dataset label.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        let mut label = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(l) = rest.trim().strip_prefix("label:") {
                    label = Some(l.trim().to_string());
                }
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|p| p.trim().parse::<f64>()).collect();
            let row = row.map_err(|e| {
                Error::Parse(format!("line {}: {e} in '{line}'", lineno + 1))
            })?;
            rows.push(row);
        }
        Dataset::new(rows, label)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if let Some(label) = &self.label {
            out.push_str(&format!("# label: {label}\n"));
        }
        for row in &self.rows {
            let parts: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            out.push_str(&parts.join(","));
            out.push('\n');
        }
        out
    }
}

// Compensated (Neumaier) summation. The evenly spaced designs used in the
// test corpus have exactly cancelling odd-power terms; plain left-to-right
// accumulation would smear them by ~1e-10 at K = 20.
#[derive(Clone, Copy, Default)]
struct Accumulator {
    hi: f64,
    lo: f64,
}

impl Accumulator {
    fn add(&mut self, x: f64) {
        let t = self.hi + x;
        if self.hi.abs() >= x.abs() {
            self.lo += (self.hi - t) + x;
        } else {
            self.lo += (x - t) + self.hi;
        }
        self.hi = t;
    }

    fn hi_lo(self) -> (f64, f64) {
        let v = self.hi + self.lo;
        (v, (self.hi - v) + self.lo)
    }
}


/// Exact univariate Gaussian moments up to order `d`, by the recurrence
/// `m_i = mu m_{i-1} + (i-1) sigma^2 m_{i-2}`.
pub fn gaussian_moments_1d(mean: f64, variance: f64, d: usize) -> Result<MomentVector> {
    if variance < 0.0 {
        return Err(Error::Domain("variance must be non-negative".into()));
    }
    let mut m = vec![0.0; d + 1];
    m[0] = 1.0;
    if d >= 1 {
        m[1] = mean;
    }
    for i in 2..=d {
        m[i] = mean * m[i - 1] + (i - 1) as f64 * variance * m[i - 2];
    }
    MomentVector::from_values(
        1,
        d,
        m.into_iter()
            .enumerate()
            .map(|(i, v)| (MultiIndex::univariate(i), v)),
    )
}

/// Exact multivariate Gaussian moments up to total order `d`, through the
/// truncated exponential of `t mu + t' Sigma t / 2`.
pub fn gaussian_moments_nd(comp: &GaussianComponent, d: usize) -> Result<MomentVector> {
    let n = comp.dim();
    let mut arg = TruncatedSeries::zero(n, d)?;
    for (i, &mu) in comp.mean().iter().enumerate() {
        if d >= 1 {
            let mut e = vec![0usize; n];
            e[i] = 1;
            arg.set_coefficient(&MultiIndex::new(e)?, mu)?;
        }
    }
    if d >= 2 {
        for i in 0..n {
            for j in 0..n {
                let mut e = vec![0usize; n];
                e[i] += 1;
                e[j] += 1;
                let idx = MultiIndex::new(e)?;
                let prev = arg.coefficient(&idx);
                arg.set_coefficient(&idx, prev + 0.5 * comp.covariance()[i][j])?;
            }
        }
    }
    let egf = arg.exp()?;
    MomentVector::from_values(
        n,
        d,
        egf.terms().map(|(idx, c)| {
            let f = idx.factorial();
            (idx, c * f)
        }),
    )
}

/// Moments of a mixture: the weighted sum of component moments.
pub fn mixture_moments(model: &MixtureModel, d: usize) -> Result<MomentVector> {
    let n = model.dim();
    let mut grid = Grid::zero(n, d)?;
    for (w, comp) in model.weights().iter().zip(model.components()) {
        let mv = gaussian_moments_nd(comp, d)?;
        for (o, slab) in grid.data.iter_mut().enumerate() {
            for (i, v) in slab.iter_mut().enumerate() {
                *v += w * mv.grid.data[o][i];
            }
        }
    }
    Ok(MomentVector { grid })
}

/// Plug-in sample moments up to total order `d`: monomial averages, about the
/// origin or (with `centered`) about the sample mean.
pub fn sample_moments(data: &Dataset, d: usize, centered: bool) -> Result<MomentVector> {
    let n = data.dim();
    let count = data.len() as f64;

    // Centered values as two-float pairs built from a two-float mean, so the
    // exact near-symmetry of the data survives into the high powers.
    let shifted: Vec<Vec<Dd>> = if centered {
        let mut means = Vec::with_capacity(n);
        for j in 0..n {
            let mut acc = Accumulator::default();
            for row in data.rows() {
                acc.add(row[j]);
            }
            let (shi, slo) = acc.hi_lo();
            let mhi = shi / count;
            let residual = (-mhi).mul_add(count, shi);
            means.push(Dd::new(mhi, (residual + slo) / count));
        }
        data.rows()
            .iter()
            .map(|row| {
                (0..n)
                    .map(|j| {
                        let (s, e) = two_sum(row[j], -means[j].hi);
                        Dd::new(s, e - means[j].lo)
                    })
                    .collect()
            })
            .collect()
    } else {
        data.rows()
            .iter()
            .map(|row| row.iter().map(|&x| Dd { hi: x, lo: 0.0 }).collect())
            .collect()
    };

    let mut grid = Grid::zero(n, d)?;
    for o in 0..=d {
        for (pos, idx) in indices_of_order(n, o).iter().enumerate() {
            let mut acc = Dd { hi: 0.0, lo: 0.0 };
            for row in &shifted {
                let mut mono = Dd { hi: 1.0, lo: 0.0 };
                for (&e, x) in idx.exponents().iter().zip(row) {
                    if e > 0 {
                        mono = mono.mul(x.powi(e));
                    }
                }
                acc = acc.add(mono);
            }
            grid.data[o][pos] = acc.value() / count;
        }
    }
    grid.data[0][0] = 1.0;
    Ok(MomentVector { grid })
}

/// Number of moments of order `<= d` in `n` variables.
pub fn moment_count(n: usize, d: usize) -> usize {
    (0..=d).map(|o| order_len(n, o)).sum()
}
