//! Kernel-parameter optimization by gradient ascent on the test-power proxy
//! `J = MMD²_u / sqrt(Var_H + 1e-8)`.
//!
//! Parameters live in unconstrained coordinates
//! `(ln sigma_nu, ln sigma_tc, logit eps0)`; gradients are analytic.

use super::{KernelParams, Pooled, SampleSet};
use crate::error::{Error, Result};

const VAR_FLOOR: f64 = 1e-8;

fn to_theta(p: &KernelParams) -> [f64; 3] {
    [p.sigma_nu.ln(), p.sigma_tc.ln(), (p.eps0 / (1.0 - p.eps0)).ln()]
}

fn from_theta(theta: &[f64; 3], template: &KernelParams) -> KernelParams {
    KernelParams {
        sigma_nu: theta[0].exp(),
        sigma_tc: theta[1].exp(),
        eps0: 1.0 / (1.0 + (-theta[2]).exp()),
        method: template.method,
    }
}

/// `J` and its gradient with respect to `(ln sigma_nu, ln sigma_tc, logit eps0)`.
///
/// The variance estimate is `4/n³ Σ_i (Σ_j H_ij)² − 4/n⁴ (Σ_ij H_ij)²` over the
/// full `H` matrix.
pub fn power_criterion(x: &SampleSet, y: &SampleSet, params: &KernelParams) -> Result<(f64, [f64; 3])> {
    let pooled = Pooled::new(x, y, params)?;
    criterion(&pooled, params)
}

fn criterion(pooled: &Pooled, params: &KernelParams) -> Result<(f64, [f64; 3])> {
    let n = pooled.n;
    let total = pooled.total;
    let mut k = vec![0.0; total * total];
    let mut dk = vec![[0.0; 3]; total * total];
    for idx in 0..total * total {
        let (v, g) = params.eval_sq_with_grad(pooled.emb_sq[idx], pooled.aux_at(idx));
        k[idx] = v;
        dk[idx] = g;
    }
    let at = |i: usize, j: usize| i * total + j;

    let mut row_sum = vec![0.0; n];
    let mut d_row_sum = vec![[0.0; 3]; n];
    let mut off_diag = 0.0;
    let mut d_off_diag = [0.0; 3];
    for i in 0..n {
        for j in 0..n {
            let (xi, xj, yi, yj) = (i, j, n + i, n + j);
            let h = k[at(xi, xj)] + k[at(yi, yj)] - k[at(xi, yj)] - k[at(yi, xj)];
            let mut dh = [0.0; 3];
            for (p, dhp) in dh.iter_mut().enumerate() {
                *dhp = dk[at(xi, xj)][p] + dk[at(yi, yj)][p] - dk[at(xi, yj)][p] - dk[at(yi, xj)][p];
            }
            row_sum[i] += h;
            for p in 0..3 {
                d_row_sum[i][p] += dh[p];
            }
            if i != j {
                off_diag += h;
                for p in 0..3 {
                    d_off_diag[p] += dh[p];
                }
            }
        }
    }

    let nf = n as f64;
    let mmd = off_diag / (nf * (nf - 1.0));
    let total_sum: f64 = row_sum.iter().sum();
    let var = 4.0 / nf.powi(3) * row_sum.iter().map(|r| r * r).sum::<f64>()
        - 4.0 / nf.powi(4) * total_sum * total_sum;
    let denom = (var + VAR_FLOOR).sqrt();
    let j = mmd / denom;
    if !j.is_finite() || var + VAR_FLOOR <= 0.0 {
        return Err(Error::Optimization(format!(
            "non-finite criterion (mmd = {mmd}, variance = {var}) at {params:?}"
        )));
    }

    let mut grad = [0.0; 3];
    for p in 0..3 {
        let d_mmd = d_off_diag[p] / (nf * (nf - 1.0));
        let d_total: f64 = d_row_sum.iter().map(|g| g[p]).sum();
        let d_var = 8.0 / nf.powi(3)
            * row_sum.iter().zip(&d_row_sum).map(|(r, g)| r * g[p]).sum::<f64>()
            - 8.0 / nf.powi(4) * total_sum * d_total;
        grad[p] = d_mmd / denom - mmd * d_var / (2.0 * denom.powi(3));
    }
    Ok((j, grad))
}

/// Criterion values seen during [`optimize_kernel_traced`].
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeTrace {
    pub best: KernelParams,
    pub initial_criterion: f64,
    pub best_criterion: f64,
    pub history: Vec<f64>,
}

/// Adam ascent on `J` for `steps` iterations with learning rate `lr`. Returns
/// the parameters with the best criterion seen (the start point included).
pub fn optimize_kernel_traced(
    x: &SampleSet,
    y: &SampleSet,
    params0: &KernelParams,
    steps: usize,
    lr: f64,
) -> Result<OptimizeTrace> {
    let pooled = Pooled::new(x, y, params0)?;
    let (j0, mut grad) = criterion(&pooled, params0)?;
    let mut theta = to_theta(params0);
    let mut best = *params0;
    let mut best_j = j0;
    let mut history = vec![j0];

    let (beta1, beta2, eps) = (0.9, 0.999, 1e-8);
    let mut m = [0.0; 3];
    let mut v = [0.0; 3];
    for t in 1..=steps {
        for p in 0..3 {
            m[p] = beta1 * m[p] + (1.0 - beta1) * grad[p];
            v[p] = beta2 * v[p] + (1.0 - beta2) * grad[p] * grad[p];
            let m_hat = m[p] / (1.0 - beta1.powi(t as i32));
            let v_hat = v[p] / (1.0 - beta2.powi(t as i32));
            theta[p] += lr * m_hat / (v_hat.sqrt() + eps);
        }
        let current = from_theta(&theta, params0);
        let (j, g) = criterion(&pooled, &current)?;
        history.push(j);
        if j > best_j {
            best_j = j;
            best = current;
        }
        grad = g;
    }
    Ok(OptimizeTrace {
        best,
        initial_criterion: j0,
        best_criterion: best_j,
        history,
    })
}

/// See [`optimize_kernel_traced`].
pub fn optimize_kernel(
    x: &SampleSet,
    y: &SampleSet,
    params0: &KernelParams,
    steps: usize,
    lr: f64,
) -> Result<KernelParams> {
    if steps == 0 {
        params0.validate()?;
        return Ok(*params0);
    }
    Ok(optimize_kernel_traced(x, y, params0, steps, lr)?.best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mmdtest::KernelMethod;
    use crate::pointcloud::PointCloud;
    use crate::rng::substream;
    use rand::Rng;

    fn set(n: usize, shift: f64, seed: u64) -> SampleSet {
        let mut rng = substream(seed, 0);
        let emb = (0..n * 2).map(|_| rng.random_range(-1.0..1.0) + shift).collect();
        let aux = (0..n * 3).map(|_| rng.random_range(-1.0..1.0) * (1.0 + shift)).collect();
        SampleSet::new(
            PointCloud::new(n, 2, emb).unwrap(),
            Some(PointCloud::new(n, 3, aux).unwrap()),
        )
        .unwrap()
    }

    fn p0(method: KernelMethod) -> KernelParams {
        KernelParams {
            eps0: 0.1,
            sigma_nu: 0.9,
            sigma_tc: 1.1,
            method,
        }
    }

    #[test]
    fn zero_steps_is_identity() {
        let (x, y) = (set(10, 0.0, 1), set(10, 0.5, 2));
        let p = p0(KernelMethod::Tpsammd);
        assert_eq!(optimize_kernel(&x, &y, &p, 0, 0.1).unwrap(), p);
    }

    #[test]
    fn best_seen_never_below_start() {
        let (x, y) = (set(20, 0.0, 3), set(20, 0.7, 4));
        let tr = optimize_kernel_traced(&x, &y, &p0(KernelMethod::Tpsammd), 50, 0.05).unwrap();
        assert!(tr.best_criterion >= tr.initial_criterion);
        assert_eq!(tr.history.len(), 51);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        for (seed, method) in [(5, KernelMethod::Tpsammd), (7, KernelMethod::Gaussian), (9, KernelMethod::SammdEmb)] {
            let (x, y) = (set(8, 0.0, seed), set(8, 0.4, seed + 1));
            let p = p0(method);
            let (_, g) = power_criterion(&x, &y, &p).unwrap();
            let theta = to_theta(&p);
            let h = 1e-5;
            for k in 0..3 {
                let mut tp = theta;
                let mut tm = theta;
                tp[k] += h;
                tm[k] -= h;
                let jp = power_criterion(&x, &y, &from_theta(&tp, &p)).unwrap().0;
                let jm = power_criterion(&x, &y, &from_theta(&tm, &p)).unwrap().0;
                let fd = (jp - jm) / (2.0 * h);
                let scale = g.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-12);
                assert!((fd - g[k]).abs() / scale < 1e-3, "{method} param {k}: fd {fd} vs {}", g[k]);
            }
        }
    }
}
