//! Built-in synthetic data: the evenly spaced pair family with closed-form
//! sample cumulants, and seeded mixture sampling for round-trip tests.

use crate::error::{Error, Result};
use crate::moments::{Dataset, MixtureModel};
use nalgebra::DMatrix;
use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// The `2K`-point design `1, 1.2, 2, 2.2, ..., K, K + 0.2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecialDataSpec {
    pub k: u32,
}

/// Pair offset of the design (fixed).
pub const SPECIAL_DATA_OFFSET: f64 = 0.2;

/// Closed-form sample cumulants of [`special_data`]; all odd-order cumulants
/// vanish by symmetry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecialCumulants {
    pub k1: f64,
    pub k2: f64,
    pub k4: f64,
    pub k6: f64,
}

/// The data `(i, i + 0.2)` for `i = 1..K`, sorted ascending.
pub fn special_data(k: u32) -> Result<Dataset> {
    if k < 2 {
        return Err(Error::Domain("special data needs K >= 2".into()));
    }
    let mut values = Vec::with_capacity(2 * k as usize);
    for i in 1..=k {
        values.push(i as f64);
        values.push(i as f64 + SPECIAL_DATA_OFFSET);
    }
    Dataset::univariate(values, Some(format!("special K={k}")))
}

/// Closed-form cumulants of the design:
/// `k1 = K/2 + 3/5`, `k2 = K^2/12 - 11/150`,
/// `k4 = -K^4/120 + 61/7500`, `k6 = K^6/252 - 7781/1968750`.
pub fn special_cumulants(k: u32) -> Result<SpecialCumulants> {
    if k < 2 {
        return Err(Error::Domain("special data needs K >= 2".into()));
    }
    let kf = k as f64;
    Ok(SpecialCumulants {
        k1: kf / 2.0 + 0.6,
        k2: kf.powi(2) / 12.0 - 11.0 / 150.0,
        k4: -kf.powi(4) / 120.0 + 61.0 / 7500.0,
        k6: kf.powi(6) / 252.0 - 7781.0 / 1968750.0,
    })
}

/// `n_samples` i.i.d. draws from the mixture, deterministic per seed.
/// Components with singular covariance are handled through the symmetric
/// eigendecomposition (point masses sample exactly at their mean).
pub fn sample_mixture(model: &MixtureModel, n_samples: usize, seed: u64) -> Result<Dataset> {
    if n_samples == 0 {
        return Err(Error::Domain("need at least one sample".into()));
    }
    let n = model.dim();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    // per-component transform: mean + Q sqrt(max(eig, 0)) z
    let transforms: Vec<(Vec<f64>, DMatrix<f64>)> = model
        .components()
        .iter()
        .map(|c| {
            let cov = DMatrix::from_fn(n, n, |i, j| {
                0.5 * (c.covariance()[i][j] + c.covariance()[j][i])
            });
            let eig = cov.symmetric_eigen();
            let mut scaled = eig.eigenvectors.clone();
            for (j, &val) in eig.eigenvalues.iter().enumerate() {
                let s = val.max(0.0).sqrt();
                for i in 0..n {
                    scaled[(i, j)] *= s;
                }
            }
            (c.mean().to_vec(), scaled)
        })
        .collect();

    let mut rows = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut pick = model.len() - 1;
        for (j, &w) in model.weights().iter().enumerate() {
            acc += w;
            if u < acc {
                pick = j;
                break;
            }
        }
        let (mean, transform) = &transforms[pick];
        let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let row: Vec<f64> = (0..n)
            .map(|i| mean[i] + (0..n).map(|j| transform[(i, j)] * z[j]).sum::<f64>())
            .collect();
        rows.push(row);
    }
    Dataset::new(rows, Some(format!("chacha12 seed={seed}")))
}
