//! Kernel two-sample testing with the unbiased MMD² U-statistic, permutation
//! calibration and kernel-parameter optimization.

mod kernel;
mod optimize;

pub use kernel::{
    gaussian_kernel, median_bandwidth, sammd_emb_kernel, tc_kernel, KernelMethod, KernelParams,
};
pub use optimize::{optimize_kernel, optimize_kernel_traced, power_criterion, OptimizeTrace};

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pointcloud::PointCloud;
use crate::rng::substream;

/// Samples in two views: the embedding rows and, for the topological and
/// semantic-aware kernels, an auxiliary row per sample (topological features
/// or a deep-feature embedding).
#[derive(Debug, Clone)]
pub struct SampleSet {
    emb: PointCloud,
    aux: Option<PointCloud>,
}

impl SampleSet {
    pub fn new(emb: PointCloud, aux: Option<PointCloud>) -> Result<Self> {
        if let Some(a) = &aux {
            if a.len() != emb.len() {
                return Err(Error::InvalidInput(format!(
                    "{} embedding rows but {} auxiliary rows",
                    emb.len(),
                    a.len()
                )));
            }
        }
        Ok(Self { emb, aux })
    }

    pub fn len(&self) -> usize {
        self.emb.len()
    }

    pub fn is_empty(&self) -> bool {
        self.emb.is_empty()
    }

    pub fn emb(&self) -> &PointCloud {
        &self.emb
    }

    pub fn aux(&self) -> Option<&PointCloud> {
        self.aux.as_ref()
    }
}

/// Squared distances among the `2n` pooled samples in both views.
pub(crate) struct Pooled {
    pub n: usize,
    pub total: usize,
    pub emb_sq: Vec<f64>,
    /// Equal to `emb_sq` when no auxiliary view exists.
    pub aux_sq: Option<Vec<f64>>,
}

impl Pooled {
    pub fn new(x: &SampleSet, y: &SampleSet, params: &KernelParams) -> Result<Self> {
        params.validate()?;
        let n = x.len();
        if n != y.len() {
            return Err(Error::InvalidInput(format!(
                "the U-statistic needs equal sample sizes (got {} and {})",
                x.len(),
                y.len()
            )));
        }
        if n < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 samples per set, got {n}")));
        }
        let emb = x.emb.concat(&y.emb)?;
        let aux = match (params.method.uses_aux(), &x.aux, &y.aux) {
            (false, _, _) => None,
            (true, Some(a), Some(b)) => Some(a.concat(b)?),
            (true, None, None) => None,
            _ => {
                return Err(Error::InvalidInput(
                    "auxiliary view present for only one of the two sets".into(),
                ))
            }
        };
        if matches!(params.method, KernelMethod::Tpsammd | KernelMethod::Mksammd) && aux.is_none()
        {
            return Err(Error::InvalidInput(format!(
                "kernel {} needs topological feature rows",
                params.method
            )));
        }
        Ok(Self {
            n,
            total: 2 * n,
            emb_sq: sq_matrix(&emb),
            aux_sq: aux.as_ref().map(sq_matrix),
        })
    }

    #[inline]
    pub fn aux_at(&self, k: usize) -> f64 {
        match &self.aux_sq {
            Some(a) => a[k],
            None => self.emb_sq[k],
        }
    }

    pub fn gram(&self, params: &KernelParams) -> Vec<f64> {
        (0..self.total * self.total)
            .map(|k| params.eval_sq(self.emb_sq[k], self.aux_at(k)))
            .collect()
    }
}

fn sq_matrix(c: &PointCloud) -> Vec<f64> {
    let m = c.len();
    let mut out = vec![0.0; m * m];
    for i in 0..m {
        for j in (i + 1)..m {
            let v = kernel::sq_dist(c.row(i), c.row(j));
            out[i * m + j] = v;
            out[j * m + i] = v;
        }
    }
    out
}

/// `1/(n(n-1)) * sum_{i != j} H_ij` with
/// `H_ij = k(x_i, x_j) + k(y_i, y_j) - k(x_i, y_j) - k(y_i, x_j)`,
/// reading kernel values from the pooled Gram matrix.
pub(crate) fn u_statistic(gram: &[f64], total: usize, xs: &[usize], ys: &[usize]) -> f64 {
    let n = xs.len();
    let mut sum = 0.0;
    for i in 0..n {
        let (xi, yi) = (xs[i] * total, ys[i] * total);
        for j in 0..n {
            if i == j {
                continue;
            }
            sum += gram[xi + xs[j]] + gram[yi + ys[j]] - gram[xi + ys[j]] - gram[yi + xs[j]];
        }
    }
    sum / (n * (n - 1)) as f64
}

/// Unbiased MMD² estimate between two equal-size sample sets.
pub fn mmd_u_statistic(x: &SampleSet, y: &SampleSet, params: &KernelParams) -> Result<f64> {
    let pooled = Pooled::new(x, y, params)?;
    let gram = pooled.gram(params);
    let xs: Vec<usize> = (0..pooled.n).collect();
    let ys: Vec<usize> = (pooled.n..pooled.total).collect();
    Ok(u_statistic(&gram, pooled.total, &xs, &ys))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub threshold: f64,
    pub p_value: f64,
    pub reject: bool,
    pub n_permutations: usize,
    pub seed: u64,
}

/// Permutation two-sample test. Each permutation `p` shuffles the pooled
/// samples with the stream `(seed, p)` and splits them in half. The threshold
/// is the `k`-th largest permuted statistic with
/// `k = max(1, floor(alpha * (n_permutations + 1)))`; the null is rejected
/// when the observed statistic exceeds it.
pub fn permutation_test(
    x: &SampleSet,
    y: &SampleSet,
    params: &KernelParams,
    n_permutations: usize,
    alpha: f64,
    seed: u64,
) -> Result<TestOutcome> {
    if n_permutations < 100 {
        return Err(Error::Parameter(format!(
            "at least 100 permutations are required, got {n_permutations}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let pooled = Pooled::new(x, y, params)?;
    let gram = pooled.gram(params);
    let n = pooled.n;
    let identity: Vec<usize> = (0..pooled.total).collect();
    let statistic = u_statistic(&gram, pooled.total, &identity[..n], &identity[n..]);

    let mut null: Vec<f64> = (0..n_permutations)
        .map(|p| {
            let mut rng = substream(seed, p as u64);
            let mut idx = identity.clone();
            idx.shuffle(&mut rng);
            u_statistic(&gram, pooled.total, &idx[..n], &idx[n..])
        })
        .collect();

    let exceed = null.iter().filter(|&&s| s >= statistic).count();
    let p_value = (1 + exceed) as f64 / (n_permutations + 1) as f64;
    null.sort_unstable_by(|a, b| b.total_cmp(a));
    let k = ((alpha * (n_permutations + 1) as f64).floor() as usize).clamp(1, n_permutations);
    let threshold = null[k - 1];
    Ok(TestOutcome {
        statistic,
        threshold,
        p_value,
        reject: statistic > threshold,
        n_permutations,
        seed,
    })
}
