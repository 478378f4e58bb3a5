//! Dirichlet sampling (normalized Gamma draws, in log space so tiny
//! concentrations do not underflow) and maximum-likelihood fitting by Minka's
//! fixed-point iteration.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::stats::{digamma, inverse_digamma, ln_gamma};

/// Natural log of a `Gamma(shape, 1)` draw. For `shape < 1` uses
/// `G(shape) = G(shape + 1) * U^(1/shape)`.
fn ln_gamma_draw<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        Gamma::new(shape, 1.0).expect("shape > 0").sample(rng).ln()
    } else {
        let g = Gamma::new(shape + 1.0, 1.0).expect("shape > 0").sample(rng);
        let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        g.ln() + u.ln() / shape
    }
}

/// One draw from `Dirichlet(alpha)`; components are non-negative and sum to 1.
pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let logs: Vec<f64> = alpha.iter().map(|&a| ln_gamma_draw(a, rng)).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= s);
    out
}

/// Mean log-likelihood per sample of `Dirichlet(alpha)` given the mean log
/// coordinates.
pub fn mean_log_likelihood(alpha: &[f64], mean_log: &[f64]) -> f64 {
    let total: f64 = alpha.iter().sum();
    ln_gamma(total)
        - alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>()
        + alpha.iter().zip(mean_log).map(|(a, l)| (a - 1.0) * l).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirichletFit {
    pub alpha: Vec<f64>,
    pub iterations: usize,
    /// Mean log-likelihood after initialization and after every iteration.
    pub log_likelihood: Vec<f64>,
}

impl DirichletFit {
    pub fn total(&self) -> f64 {
        self.alpha.iter().sum()
    }
}

const CLIP: f64 = 1e-10;
const GRAD_TOL: f64 = 1e-8;
const MAX_ITER: usize = 1000;

/// Maximum-likelihood Dirichlet parameters for rows of barycentric
/// coordinates. Rows must sum to 1 within 1e-6; coordinates are clipped at
/// 1e-10. Starts from moment matching and iterates
/// `alpha_k <- psi^-1(psi(sum alpha) + mean log p_k)` until the gradient norm of
/// the mean log-likelihood drops below 1e-8.
pub fn dirichlet_mle<R: AsRef<[f64]>>(rows: &[R]) -> Result<DirichletFit> {
    let k = rows.first().map_or(0, |r| r.as_ref().len());
    if k < 2 {
        return Err(Error::InvalidInput("need at least two components".into()));
    }
    if rows.len() < k + 1 {
        return Err(Error::InvalidInput(format!(
            "need at least {} rows for {k} components, got {}",
            k + 1,
            rows.len()
        )));
    }
    let n = rows.len() as f64;
    let mut mean = vec![0.0; k];
    let mut sq = vec![0.0; k];
    let mut mean_log = vec![0.0; k];
    for (i, r) in rows.iter().enumerate() {
        let r = r.as_ref();
        if r.len() != k {
            return Err(Error::InvalidInput(format!("row {i} has {} components, expected {k}", r.len())));
        }
        let s: f64 = r.iter().sum();
        if !s.is_finite() || (s - 1.0).abs() > 1e-6 || r.iter().any(|&v| v < -1e-12 || !v.is_finite()) {
            return Err(Error::InvalidInput(format!("row {i} is not on the simplex (sum {s})")));
        }
        for (c, &v) in r.iter().enumerate() {
            let v = v.max(CLIP);
            mean[c] += v / n;
            sq[c] += v * v / n;
            mean_log[c] += v.ln() / n;
        }
    }

    // moment matching: precision from the average of per-component estimates
    let mut precision = 0.0;
    let mut used = 0.0;
    for c in 0..k {
        let var = sq[c] - mean[c] * mean[c];
        if var > 0.0 {
            precision += mean[c] * (1.0 - mean[c]) / var - 1.0;
            used += 1.0;
        }
    }
    let precision = if used > 0.0 && precision > 0.0 { precision / used } else { 1.0 };
    let mut alpha: Vec<f64> = mean.iter().map(|m| (m * precision).max(1e-6)).collect();

    let gradient_norm = |a: &[f64]| {
        let psi_total = digamma(a.iter().sum());
        a.iter()
            .zip(&mean_log)
            .map(|(&ak, &lk)| (psi_total - digamma(ak) + lk).powi(2))
            .sum::<f64>()
            .sqrt()
    };

    let mut trace = vec![mean_log_likelihood(&alpha, &mean_log)];
    for it in 0..MAX_ITER {
        if gradient_norm(&alpha) < GRAD_TOL {
            return Ok(DirichletFit {
                alpha,
                iterations: it,
                log_likelihood: trace,
            });
        }
        let psi_total = digamma(alpha.iter().sum());
        alpha = mean_log.iter().map(|&l| inverse_digamma(psi_total + l)).collect();
        trace.push(mean_log_likelihood(&alpha, &mean_log));
    }
    if gradient_norm(&alpha) < GRAD_TOL {
        return Ok(DirichletFit {
            alpha,
            iterations: MAX_ITER,
            log_likelihood: trace,
        });
    }
    Err(Error::Convergence {
        iterations: MAX_ITER,
        last: alpha,
    })
}
