//! Maximum-likelihood baseline: log-likelihood evaluation and EM iteration
//! for univariate Gaussian mixtures.

use crate::error::{Error, Result};
use crate::moments::{Dataset, GaussianComponent, MixtureModel};
use serde::{Deserialize, Serialize};

const LN_2PI: f64 = 1.8378770664093453;

/// EM stopping and stabilization knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmOptions {
    pub max_iters: usize,
    /// Stop when the log-likelihood improves by less than this.
    pub loglik_tol: f64,
    /// Variances are clamped at `variance_floor * (data variance)`; the
    /// likelihood of this model family is unbounded, and the floor turns
    /// divergence toward a degenerate spike into a detectable boundary hit.
    pub variance_floor: f64,
    pub record_trace: bool,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            max_iters: 100_000,
            loglik_tol: 1e-10,
            variance_floor: 1e-12,
            record_trace: false,
        }
    }
}

/// Fitted model plus convergence data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmResult {
    pub model: MixtureModel,
    pub loglik: f64,
    pub iters: usize,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<f64>>,
}

impl EmResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("EM result serializes")
    }
}

fn check_univariate(model: &MixtureModel) -> Result<()> {
    if model.dim() != 1 {
        return Err(Error::Dimension("EM baseline handles n = 1 only".into()));
    }
    Ok(())
}

fn log_density(x: f64, mean: f64, variance: f64) -> f64 {
    -0.5 * (LN_2PI + variance.ln()) - (x - mean) * (x - mean) / (2.0 * variance)
}

/// Mixture log-likelihood, stabilized per point by the largest component
/// log-density.
pub fn log_likelihood(model: &MixtureModel, data: &Dataset) -> Result<f64> {
    check_univariate(model)?;
    if data.dim() != 1 {
        return Err(Error::Dimension("EM baseline handles n = 1 only".into()));
    }
    let comps: Vec<(f64, f64, f64)> = model
        .weights()
        .iter()
        .zip(model.components())
        .map(|(&w, c)| (w, c.mean()[0], c.covariance()[0][0]))
        .collect();
    if comps.iter().any(|&(w, _, v)| w > 0.0 && v <= 0.0) {
        return Err(Error::Domain("log-likelihood needs positive variances".into()));
    }
    let mut total = 0.0;
    for row in data.rows() {
        let x = row[0];
        let logs: Vec<f64> = comps
            .iter()
            .filter(|&&(w, _, _)| w > 0.0)
            .map(|&(w, m, v)| w.ln() + log_density(x, m, v))
            .collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logs.iter().map(|l| (l - max).exp()).sum();
        total += max + sum.ln();
    }
    Ok(total)
}

/// Standard EM iteration from the given starting model.
pub fn em_fit(data: &Dataset, init: &MixtureModel, opts: &EmOptions) -> Result<EmResult> {
    check_univariate(init)?;
    if data.dim() != 1 {
        return Err(Error::Dimension("EM baseline handles n = 1 only".into()));
    }
    if opts.max_iters < 1 || opts.loglik_tol <= 0.0 {
        return Err(Error::Precondition("max_iters >= 1 and loglik_tol > 0 required".into()));
    }
    let xs: Vec<f64> = data.rows().iter().map(|r| r[0]).collect();
    let n = xs.len() as f64;
    let data_mean = xs.iter().sum::<f64>() / n;
    let data_var = xs.iter().map(|x| (x - data_mean) * (x - data_mean)).sum::<f64>() / n;
    let floor = (opts.variance_floor * data_var).max(f64::MIN_POSITIVE);

    let k = init.len();
    let mut weights: Vec<f64> = init.weights().to_vec();
    let mut means: Vec<f64> = init.components().iter().map(|c| c.mean()[0]).collect();
    let mut vars: Vec<f64> = init
        .components()
        .iter()
        .map(|c| c.covariance()[0][0].max(floor))
        .collect();
    if vars.iter().any(|&v| v <= 0.0) {
        return Err(Error::Domain("EM needs positive initial variances".into()));
    }

    let loglik_of = |weights: &[f64], means: &[f64], vars: &[f64]| -> f64 {
        let mut total = 0.0;
        for &x in &xs {
            let mut max = f64::NEG_INFINITY;
            let mut logs = Vec::with_capacity(k);
            for j in 0..k {
                if weights[j] > 0.0 {
                    let l = weights[j].ln() + log_density(x, means[j], vars[j]);
                    logs.push(l);
                    max = max.max(l);
                }
            }
            let sum: f64 = logs.iter().map(|l| (l - max).exp()).sum();
            total += max + sum.ln();
        }
        total
    };

    let mut loglik = loglik_of(&weights, &means, &vars);
    let mut trace = opts.record_trace.then(|| vec![loglik]);
    let mut converged = false;
    let mut iters = 0;
    let mut resp = vec![0.0f64; k];

    for _ in 0..opts.max_iters {
        iters += 1;
        let mut wsum = vec![0.0f64; k];
        let mut wx = vec![0.0f64; k];
        let mut wxx = vec![0.0f64; k];
        for &x in &xs {
            let mut max = f64::NEG_INFINITY;
            for j in 0..k {
                resp[j] = if weights[j] > 0.0 {
                    weights[j].ln() + log_density(x, means[j], vars[j])
                } else {
                    f64::NEG_INFINITY
                };
                max = max.max(resp[j]);
            }
            let mut total = 0.0;
            for r in resp.iter_mut() {
                *r = (*r - max).exp();
                total += *r;
            }
            for j in 0..k {
                let g = resp[j] / total;
                wsum[j] += g;
                wx[j] += g * x;
            }
            for j in 0..k {
                let g = resp[j] / total;
                let centered = x - means[j];
                wxx[j] += g * centered * centered;
            }
        }
        // M-step: variance about the updated mean, via the shift identity
        for j in 0..k {
            if wsum[j] > 0.0 {
                let new_mean = wx[j] / wsum[j];
                let shift = new_mean - means[j];
                vars[j] = (wxx[j] / wsum[j] - shift * shift).max(floor);
                means[j] = new_mean;
                weights[j] = wsum[j] / n;
            }
        }
        let wtotal: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= wtotal;
        }

        let new_loglik = loglik_of(&weights, &means, &vars);
        if let Some(t) = trace.as_mut() {
            t.push(new_loglik);
        }
        let delta = new_loglik - loglik;
        loglik = new_loglik;
        if delta.abs() < opts.loglik_tol {
            converged = true;
            break;
        }
    }

    let components: Result<Vec<GaussianComponent>> = means
        .iter()
        .zip(&vars)
        .map(|(&m, &v)| GaussianComponent::univariate(m, v))
        .collect();
    Ok(EmResult {
        model: MixtureModel::new(weights, components?)?,
        loglik,
        iters,
        converged,
        trace,
    })
}
