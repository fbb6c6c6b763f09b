//! Weighted Gaussian mixture fitted by expectation maximization.

use nalgebra::{Cholesky, Matrix3};
use rand::Rng;

use crate::error::{Error, Result};
use crate::geom::Vec3;

pub const MAX_ITERATIONS: usize = 100;
pub const TOLERANCE: f64 = 1e-6;
/// Added to every covariance so flat or collapsed components stay invertible.
pub const REGULARIZATION: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct GmmFit {
    pub means: Vec<Vec3>,
    pub covariances: Vec<Matrix3<f64>>,
    pub mixing: Vec<f64>,
    /// Max-responsibility component of each point.
    pub labels: Vec<usize>,
    pub iterations: usize,
    /// Weighted log-likelihood per unit weight at the last E step.
    pub log_likelihood: f64,
}

fn weighted_choice<R: Rng + ?Sized>(scores: &[f64], rng: &mut R) -> usize {
    let total: f64 = scores.iter().sum();
    if !(total > 0.0) {
        return 0;
    }
    let mut u = rng.random::<f64>() * total;
    for (i, s) in scores.iter().enumerate() {
        if u < *s {
            return i;
        }
        u -= s;
    }
    scores.iter().rposition(|s| *s > 0.0).unwrap_or(0)
}

/// k-means++ seeding with selection probability proportional to weight
/// times squared distance to the nearest chosen seed.
pub fn seed_means<R: Rng + ?Sized>(points: &[Vec3], weights: &[f64], k: usize, rng: &mut R) -> Vec<Vec3> {
    let mut means = vec![points[weighted_choice(weights, rng)]];
    let mut d2: Vec<f64> = points.iter().map(|p| (p - means[0]).norm_squared()).collect();
    while means.len() < k {
        let scores: Vec<f64> = d2.iter().zip(weights).map(|(d, w)| d * w).collect();
        if scores.iter().all(|s| *s <= 0.0) {
            break;
        }
        let next = points[weighted_choice(&scores, rng)];
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min((p - next).norm_squared());
        }
        means.push(next);
    }
    means
}

fn log_gaussian(x: &Vec3, mean: &Vec3, chol: &Cholesky<f64, nalgebra::U3>, log_det: f64) -> f64 {
    let d = x - mean;
    let z = chol.l().solve_lower_triangular(&d).expect("triangular solve");
    -0.5 * (3.0 * (2.0 * std::f64::consts::PI).ln() + log_det + z.norm_squared())
}

fn factor(cov: &Matrix3<f64>) -> (Cholesky<f64, nalgebra::U3>, f64) {
    let mut c = *cov;
    let mut extra = 0.0;
    loop {
        if let Some(ch) = Cholesky::new(c) {
            let log_det = 2.0 * (0..3).map(|i| ch.l()[(i, i)].ln()).sum::<f64>();
            return (ch, log_det);
        }
        extra = if extra == 0.0 { REGULARIZATION } else { extra * 10.0 };
        c = cov + Matrix3::identity() * extra;
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn fit_gmm<R: Rng + ?Sized>(points: &[Vec3], weights: &[f64], k: usize, rng: &mut R) -> Result<GmmFit> {
    if points.is_empty() {
        return Err(Error::domain("cannot fit a mixture to no points"));
    }
    if weights.len() != points.len() {
        return Err(Error::domain("weights and points differ in length"));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || !(weights.iter().sum::<f64>() > 0.0) {
        return Err(Error::domain("weights must be non-negative with a positive total"));
    }
    let total: f64 = weights.iter().sum();
    let wn: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let k = k.clamp(1, points.len());
    let mut means = seed_means(points, &wn, k, rng);
    let k = means.len();

    // start from a hard assignment of every point to its nearest seed
    let reg = Matrix3::identity() * REGULARIZATION;
    let mut covs = vec![reg; k];
    let mut mixing = vec![0.0; k];
    let nearest: Vec<usize> = points
        .iter()
        .map(|p| {
            (0..k).min_by(|&a, &b| (p - means[a]).norm_squared().total_cmp(&(p - means[b]).norm_squared())).unwrap()
        })
        .collect();
    for c in 0..k {
        let nk: f64 = (0..points.len()).filter(|&i| nearest[i] == c).map(|i| wn[i]).sum();
        if nk <= 0.0 {
            continue;
        }
        let mean: Vec3 = (0..points.len()).filter(|&i| nearest[i] == c).map(|i| points[i] * wn[i]).sum::<Vec3>() / nk;
        let mut cov = Matrix3::zeros();
        for i in (0..points.len()).filter(|&i| nearest[i] == c) {
            let d = points[i] - mean;
            cov += d * d.transpose() * wn[i];
        }
        means[c] = mean;
        covs[c] = cov / nk + reg;
        mixing[c] = nk;
    }

    let n = points.len();
    let mut resp = vec![0.0; n * k];
    let mut prev_ll = f64::NEG_INFINITY;
    let mut ll = f64::NEG_INFINITY;
    let mut iterations = 0;
    let mut logs = vec![0.0; k];
    for it in 0..MAX_ITERATIONS {
        iterations = it + 1;
        let factors: Vec<_> = covs.iter().map(factor).collect();
        ll = 0.0;
        for (i, x) in points.iter().enumerate() {
            for c in 0..k {
                logs[c] = if mixing[c] > 0.0 {
                    mixing[c].ln() + log_gaussian(x, &means[c], &factors[c].0, factors[c].1)
                } else {
                    f64::NEG_INFINITY
                };
            }
            let lse = log_sum_exp(&logs);
            ll += wn[i] * lse;
            for c in 0..k {
                resp[i * k + c] = (logs[c] - lse).exp();
            }
        }
        if (ll - prev_ll).abs() < TOLERANCE {
            break;
        }
        prev_ll = ll;

        for c in 0..k {
            let nk: f64 = (0..n).map(|i| wn[i] * resp[i * k + c]).sum();
            if nk <= 1e-300 {
                mixing[c] = 0.0;
                continue;
            }
            let mean: Vec3 = (0..n).map(|i| points[i] * (wn[i] * resp[i * k + c])).sum::<Vec3>() / nk;
            let mut cov = Matrix3::zeros();
            for i in 0..n {
                let d = points[i] - mean;
                cov += d * d.transpose() * (wn[i] * resp[i * k + c]);
            }
            means[c] = mean;
            covs[c] = cov / nk + reg;
            mixing[c] = nk;
        }
        let s: f64 = mixing.iter().sum();
        for m in &mut mixing {
            *m /= s;
        }
    }

    let labels = (0..n)
        .map(|i| {
            let row = &resp[i * k..(i + 1) * k];
            let mut best = 0;
            for c in 1..k {
                if row[c] > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect();

    Ok(GmmFit { means, covariances: covs, mixing, labels, iterations, log_likelihood: ll })
}
