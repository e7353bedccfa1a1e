//! Real-root extraction for univariate polynomials with `f64` coefficients,
//! tuned for degree-9 inputs whose roots may carry genuine multiplicities.
//!
//! Pipeline: deflate exact zero roots, balance the coefficient scale by a
//! variable substitution, run the Aberth-Ehrlich simultaneous iteration for
//! all complex roots, polish every root with complex Newton steps on the
//! original polynomial, merge clusters into multiple roots, and keep the
//! clusters whose centroid sits on the real axis. Multiple roots are
//! re-polished with the multiplicity-aware Newton step, which restores
//! quadratic convergence.

use crate::error::{Error, Result};
use nalgebra::Complex;

/// Dense univariate polynomial, coefficients in ascending degree order.
#[derive(Debug, Clone, PartialEq)]
pub struct UnivariatePolynomial {
    coeffs: Vec<f64>,
}

impl UnivariatePolynomial {
    /// Trims trailing coefficients below `1e-14` of the largest magnitude.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Domain("polynomial needs at least one coefficient".into()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("coefficients must be finite".into()));
        }
        let max = coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        let mut coeffs = coeffs;
        if max > 0.0 {
            while coeffs.len() > 1 && coeffs.last().unwrap().abs() <= 1e-14 * max {
                coeffs.pop();
            }
        } else {
            coeffs = vec![0.0];
        }
        Ok(UnivariatePolynomial { coeffs })
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        if self.coeffs.len() == 1 && self.coeffs[0] == 0.0 {
            None
        } else {
            Some(self.coeffs.len() - 1)
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Value and derivative at `x` in one Horner pass.
    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        let mut p = 0.0;
        let mut dp = 0.0;
        for &c in self.coeffs.iter().rev() {
            dp = dp * x + p;
            p = p * x + c;
        }
        (p, dp)
    }

    pub fn derivative(&self) -> UnivariatePolynomial {
        if self.coeffs.len() == 1 {
            return UnivariatePolynomial { coeffs: vec![0.0] };
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, &c)| i as f64 * c)
            .collect();
        UnivariatePolynomial { coeffs }
    }

    /// The polynomial `x -> self(c x)`.
    pub fn scale_variable(&self, c: f64) -> UnivariatePolynomial {
        let mut pw = 1.0;
        let coeffs = self
            .coeffs
            .iter()
            .map(|&a| {
                let v = a * pw;
                pw *= c;
                v
            })
            .collect();
        UnivariatePolynomial { coeffs }
    }
}

/// Real roots with multiplicities and the polynomial residual at each root.
#[derive(Debug, Clone, PartialEq)]
pub struct RootSet {
    /// `(root, multiplicity)`, sorted ascending by root.
    pub roots: Vec<(f64, usize)>,
    /// `|p(root)|` per entry of `roots`.
    pub residuals: Vec<f64>,
}

impl RootSet {
    /// Total multiplicity.
    pub fn count(&self) -> usize {
        self.roots.iter().map(|&(_, m)| m).sum()
    }
}

pub const DEFAULT_ROOT_TOL: f64 = 1e-6;

fn horner_complex(coeffs: &[f64], z: Complex<f64>) -> (Complex<f64>, Complex<f64>) {
    let mut p = Complex::new(0.0, 0.0);
    let mut dp = Complex::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + Complex::new(c, 0.0);
    }
    (p, dp)
}

/// Geometric-mean substitution scale: `p(c x)` has balanced coefficients.
fn coefficient_scale(coeffs: &[f64]) -> f64 {
    let n = coeffs.len() - 1;
    let lead = coeffs[n].abs();
    let mut log_sum = 0.0;
    let mut terms = 0usize;
    for (i, &c) in coeffs.iter().enumerate().take(n) {
        if c != 0.0 {
            log_sum += (c.abs() / lead).ln() / (n - i) as f64;
            terms += 1;
        }
    }
    if terms == 0 {
        1.0
    } else {
        (log_sum / terms as f64).exp()
    }
}

/// Aberth-Ehrlich simultaneous iteration on a coefficient-balanced copy;
/// works in a fixed iteration budget and handles multiple roots by letting
/// their copies converge into a cluster.
fn all_complex_roots(poly: &UnivariatePolynomial) -> Vec<Complex<f64>> {
    // Exact zero roots deflate immediately; they are both common (vanishing
    // low-order cumulants) and the hardest case for iterative solvers.
    let mut coeffs = poly.coeffs().to_vec();
    let mut zeros_at_origin = 0usize;
    while coeffs.len() > 1 && coeffs[0] == 0.0 {
        coeffs.remove(0);
        zeros_at_origin += 1;
    }
    let n = coeffs.len() - 1;
    let mut roots = vec![Complex::new(0.0, 0.0); zeros_at_origin];
    if n == 0 {
        return roots;
    }
    if n == 1 {
        roots.push(Complex::new(-coeffs[0] / coeffs[1], 0.0));
        return roots;
    }

    let scale = coefficient_scale(&coeffs).max(f64::MIN_POSITIVE);
    let balanced = UnivariatePolynomial { coeffs }.scale_variable(scale);
    let bc = balanced.coeffs();

    // Starting points: staggered radii and an irrational angular offset, so
    // symmetric polynomials cannot lock the iteration into a symmetry.
    let mut zs: Vec<Complex<f64>> = (0..n)
        .map(|j| {
            let r = 0.6 + 0.8 * (j as f64 + 0.5) / n as f64;
            let theta = 2.0 * std::f64::consts::PI * j as f64 / n as f64 + 0.5377;
            Complex::from_polar(r, theta)
        })
        .collect();

    for _ in 0..200 {
        let mut max_rel_step = 0.0f64;
        for j in 0..n {
            let (pv, dv) = horner_complex(bc, zs[j]);
            if pv.norm() == 0.0 {
                continue;
            }
            let newton = if dv.norm() > 0.0 {
                pv / dv
            } else {
                Complex::new(1e-3, 1e-3)
            };
            let mut repulsion = Complex::new(0.0, 0.0);
            for k in 0..n {
                if k != j {
                    let diff = zs[j] - zs[k];
                    if diff.norm() > 1e-300 {
                        repulsion += Complex::new(1.0, 0.0) / diff;
                    }
                }
            }
            let denom = Complex::new(1.0, 0.0) - newton * repulsion;
            let step = if denom.norm() > 1e-12 { newton / denom } else { newton };
            zs[j] -= step;
            max_rel_step = max_rel_step.max(step.norm() / (1.0 + zs[j].norm()));
        }
        if max_rel_step < 1e-14 {
            break;
        }
    }

    roots.extend(zs.into_iter().map(|z| z * scale));
    roots
}

/// All real roots of `p`, Newton-polished, with clusters within
/// `tol * max(1, |roots|)` merged into one root of summed multiplicity.
pub fn real_roots(p: &UnivariatePolynomial, tol: f64) -> Result<RootSet> {
    let degree = match p.degree() {
        None => return Err(Error::Domain("zero polynomial has no well-defined roots".into())),
        Some(0) => return Err(Error::Domain("constant polynomial has no roots".into())),
        Some(d) => d,
    };

    let mut zs = all_complex_roots(p);
    let rho = zs.iter().map(|z| z.norm()).fold(0.0f64, f64::max);

    // Complex Newton on the original polynomial. Stop at the evaluation
    // noise floor (at a multiple root the derivative also vanishes, and a
    // naive step would fling a perfectly converged point into another
    // root's basin), and backtrack so |p| never increases.
    for z in zs.iter_mut() {
        let mut cur = *z;
        let mut cur_val = horner_complex(p.coeffs(), cur).0.norm();
        for _ in 0..80 {
            if cur_val <= eval_noise(p.coeffs(), cur.norm()) {
                break;
            }
            let (pv, dv) = horner_complex(p.coeffs(), cur);
            if dv.norm() == 0.0 {
                break;
            }
            let mut step = pv / dv;
            let mut accepted = false;
            for _ in 0..6 {
                let next = cur - step;
                let next_val = horner_complex(p.coeffs(), next).0.norm();
                if next_val <= cur_val {
                    cur = next;
                    cur_val = next_val;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted || step.norm() <= 1e-16 * (1.0 + cur.norm()) {
                break;
            }
        }
        *z = cur;
    }

    // Merge clusters (union-find over at most `degree` points).
    let ctol = tol * rho.max(1.0);
    let mut parent: Vec<usize> = (0..zs.len()).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = find(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }
    for i in 0..zs.len() {
        for j in (i + 1)..zs.len() {
            if (zs[i] - zs[j]).norm() <= ctol {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut grouped: std::collections::HashMap<usize, Vec<Complex<f64>>> =
        std::collections::HashMap::new();
    for i in 0..zs.len() {
        let r = find(&mut parent, i);
        grouped.entry(r).or_default().push(zs[i]);
    }
    let mut clusters: Vec<Cluster> = grouped
        .into_values()
        .map(|members| {
            let center = members.iter().sum::<Complex<f64>>() / members.len() as f64;
            Cluster { members, center }
        })
        .collect();
    agglomerate_multiple_roots(p, &mut clusters, ctol, rho);

    let real_axis_tol = (1e-8 * rho).max(ctol);
    let norm_inf = p.coeffs().iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let mut roots: Vec<(f64, usize, f64)> = Vec::new();
    for cluster in &clusters {
        let m = cluster.members.len();
        let centroid = cluster.center;
        if centroid.im.abs() > real_axis_tol {
            continue;
        }
        // Multiplicity-aware Newton: x - m p / p' converges quadratically
        // to a root of multiplicity m. Monotone in |p|, stopping at the
        // evaluation noise floor.
        let mut x = centroid.re;
        let mut x_val = p.eval(x).abs();
        for _ in 0..40 {
            if x_val <= eval_noise(p.coeffs(), x.abs()) {
                break;
            }
            let (pv, dv) = p.eval_with_derivative(x);
            if dv == 0.0 {
                break;
            }
            let mut step = m as f64 * pv / dv;
            let mut accepted = false;
            for _ in 0..6 {
                let next = x - step;
                let next_val = p.eval(next).abs();
                if next_val <= x_val {
                    x = next;
                    x_val = next_val;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted || step.abs() <= 1e-16 * (1.0 + x.abs()) {
                break;
            }
        }
        if x_val <= tol * norm_inf * x.abs().max(1.0).powi(degree as i32) {
            roots.push((x, m, x_val));
        }
    }

    roots.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(RootSet {
        residuals: roots.iter().map(|r| r.2).collect(),
        roots: roots.into_iter().map(|(x, m, _)| (x, m)).collect(),
    })
}

struct Cluster {
    members: Vec<Complex<f64>>,
    center: Complex<f64>,
}

/// Horner evaluation error bound at radius `r`.
fn eval_noise(coeffs: &[f64], r: f64) -> f64 {
    let mut sum = 0.0;
    let mut pw = 1.0;
    for &c in coeffs {
        sum += c.abs() * pw;
        pw *= r;
    }
    1e-15 * sum
}

/// Simple-root polishing leaves the copies of an m-fold root scattered in a
/// disc of radius about `(eval noise / |p^(m)/m!|)^(1/m)`, which exceeds the
/// base clustering radius for m >= 3. This pass tentatively merges nearby
/// clusters, re-polishes the merged center with the multiplicity-aware
/// Newton step, and keeps the merge only when every member lies inside the
/// expected noise disc, so genuinely distinct close roots stay separate.
fn agglomerate_multiple_roots(
    p: &UnivariatePolynomial,
    clusters: &mut Vec<Cluster>,
    ctol: f64,
    rho: f64,
) {
    let gate = (1e-3 * rho.max(1.0)).max(4.0 * ctol);
    'merge: loop {
        let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
        for i in 0..clusters.len() {
            for j in (i + 1)..clusters.len() {
                let dist = (clusters[i].center - clusters[j].center).norm();
                if dist <= gate {
                    pairs.push((i, j, dist));
                }
            }
        }
        pairs.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap());
        for (i, j, _) in pairs {
            let m = clusters[i].members.len() + clusters[j].members.len();
            let centroid = (clusters[i].center * clusters[i].members.len() as f64
                + clusters[j].center * clusters[j].members.len() as f64)
                / m as f64;
            if let Some(center) = validate_multiple_root(p, centroid, m, &[
                &clusters[i].members,
                &clusters[j].members,
            ], ctol)
            {
                let mut members = std::mem::take(&mut clusters[i].members);
                members.append(&mut clusters[j].members);
                clusters[i] = Cluster { members, center };
                clusters.remove(j);
                continue 'merge;
            }
        }
        break;
    }
}

/// Refine a hypothetical m-fold root and check that all member points lie
/// within the noise disc it explains.
fn validate_multiple_root(
    p: &UnivariatePolynomial,
    start: Complex<f64>,
    m: usize,
    member_sets: &[&Vec<Complex<f64>>],
    ctol: f64,
) -> Option<Complex<f64>> {
    let mut z = start;
    let mut z_val = horner_complex(p.coeffs(), z).0.norm();
    for _ in 0..60 {
        if z_val <= eval_noise(p.coeffs(), z.norm()) {
            break;
        }
        let (pv, dv) = horner_complex(p.coeffs(), z);
        if dv.norm() == 0.0 {
            break;
        }
        let mut step = pv / dv * m as f64;
        let mut accepted = false;
        for _ in 0..6 {
            let next = z - step;
            let next_val = horner_complex(p.coeffs(), next).0.norm();
            if next_val <= z_val {
                z = next;
                z_val = next_val;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted || step.norm() <= 1e-16 * (1.0 + z.norm()) {
            break;
        }
    }

    // |p^(m)(z) / m!| via m-fold derivative
    let mut dm = p.clone();
    let mut fact = 1.0;
    for r in 1..=m {
        dm = dm.derivative();
        fact *= r as f64;
    }
    let lead = horner_complex(dm.coeffs(), z).0.norm() / fact;
    if lead == 0.0 {
        return None;
    }
    let noise_radius = (eval_noise(p.coeffs(), z) / lead).powf(1.0 / m as f64);
    let radius = (20.0 * noise_radius).max(ctol);
    let all_inside = member_sets
        .iter()
        .flat_map(|set| set.iter())
        .all(|w| (w - z).norm() <= radius);
    all_inside.then_some(z)
}
