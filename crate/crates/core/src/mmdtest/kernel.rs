use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pointcloud::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelMethod {
    /// Topological-contrastive kernel over total-persistence features.
    Tpsammd,
    /// Topological-contrastive kernel over multi-scale-kernel features.
    Mksammd,
    /// Semantic-aware kernel with a second embedding view as the deep feature.
    SammdEmb,
    /// Plain Gaussian kernel on the embeddings.
    Gaussian,
}

impl KernelMethod {
    /// Whether the kernel reads the auxiliary (feature) view.
    pub fn uses_aux(self) -> bool {
        !matches!(self, KernelMethod::Gaussian)
    }
}

impl fmt::Display for KernelMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelMethod::Tpsammd => "tpsammd",
            KernelMethod::Mksammd => "mksammd",
            KernelMethod::SammdEmb => "sammd-emb",
            KernelMethod::Gaussian => "gaussian",
        })
    }
}

impl FromStr for KernelMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tpsammd" => Ok(KernelMethod::Tpsammd),
            "mksammd" => Ok(KernelMethod::Mksammd),
            "sammd-emb" | "sammd_emb" => Ok(KernelMethod::SammdEmb),
            "gaussian" => Ok(KernelMethod::Gaussian),
            other => Err(Error::Parse(format!(
                "unknown kernel `{other}` (tpsammd|mksammd|sammd-emb|gaussian)"
            ))),
        }
    }
}

/// Parameters of `k(a, b) = [(1 - eps0) * kappa_aux(a, b) + eps0] * kappa_emb(a, b)`
/// with Gaussian `kappa_aux` (bandwidth `sigma_tc`) and `kappa_emb`
/// (bandwidth `sigma_nu`). The Gaussian baseline uses `kappa_emb` only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub eps0: f64,
    pub sigma_nu: f64,
    pub sigma_tc: f64,
    pub method: KernelMethod,
}

impl KernelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps0 > 0.0 && self.eps0 < 1.0) {
            return Err(Error::Parameter(format!("eps0 must lie in (0, 1), got {}", self.eps0)));
        }
        if !(self.sigma_nu > 0.0 && self.sigma_nu.is_finite()) {
            return Err(Error::Parameter(format!("sigma_nu must be > 0, got {}", self.sigma_nu)));
        }
        if !(self.sigma_tc > 0.0 && self.sigma_tc.is_finite()) {
            return Err(Error::Parameter(format!("sigma_tc must be > 0, got {}", self.sigma_tc)));
        }
        Ok(())
    }

    /// Median-heuristic bandwidths on `emb` / `aux` and `eps0 = 0.1`.
    pub fn initial(method: KernelMethod, emb: &PointCloud, aux: Option<&PointCloud>) -> Self {
        let sigma_nu = median_bandwidth(emb);
        let sigma_tc = aux.map_or(sigma_nu, median_bandwidth);
        Self {
            eps0: 0.1,
            sigma_nu,
            sigma_tc,
            method,
        }
    }

    /// Evaluates the kernel from squared distances in the two views.
    #[inline]
    pub fn eval_sq(&self, emb_sq: f64, aux_sq: f64) -> f64 {
        let nu = (-emb_sq / (2.0 * self.sigma_nu * self.sigma_nu)).exp();
        match self.method {
            KernelMethod::Gaussian => nu,
            _ => {
                let tau = (-aux_sq / (2.0 * self.sigma_tc * self.sigma_tc)).exp();
                ((1.0 - self.eps0) * tau + self.eps0) * nu
            }
        }
    }

    /// Kernel value and its derivatives with respect to
    /// `(ln sigma_nu, ln sigma_tc, logit eps0)`.
    #[inline]
    pub(crate) fn eval_sq_with_grad(&self, emb_sq: f64, aux_sq: f64) -> (f64, [f64; 3]) {
        let s2 = self.sigma_nu * self.sigma_nu;
        let nu = (-emb_sq / (2.0 * s2)).exp();
        let d_nu = nu * emb_sq / s2;
        match self.method {
            KernelMethod::Gaussian => (nu, [d_nu, 0.0, 0.0]),
            _ => {
                let t2 = self.sigma_tc * self.sigma_tc;
                let tau = (-aux_sq / (2.0 * t2)).exp();
                let d_tau = tau * aux_sq / t2;
                let e = self.eps0;
                let mix = (1.0 - e) * tau + e;
                (
                    mix * nu,
                    [mix * d_nu, (1.0 - e) * d_tau * nu, (1.0 - tau) * nu * e * (1.0 - e)],
                )
            }
        }
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_dims(a: &[f64], b: &[f64], what: &str) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "{what} rows differ in dimension ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Topological-contrastive kernel on `(embedding row, feature row)` pairs.
pub fn tc_kernel(xa: (&[f64], &[f64]), xb: (&[f64], &[f64]), params: &KernelParams) -> Result<f64> {
    params.validate()?;
    check_dims(xa.0, xb.0, "embedding")?;
    check_dims(xa.1, xb.1, "feature")?;
    let tc = KernelParams {
        method: KernelMethod::Tpsammd,
        ..*params
    };
    Ok(tc.eval_sq(sq_dist(xa.0, xb.0), sq_dist(xa.1, xb.1)))
}

/// Semantic-aware kernel on raw embedding rows. `deep` carries the second
/// (deep-feature) view of both rows; without it the raw rows serve as both
/// views.
pub fn sammd_emb_kernel(
    xa: &[f64],
    xb: &[f64],
    deep: Option<(&[f64], &[f64])>,
    params: &KernelParams,
) -> Result<f64> {
    let (da, db) = deep.unwrap_or((xa, xb));
    tc_kernel((xa, da), (xb, db), params)
}

/// `exp(-|a - b|^2 / (2 sigma^2))`.
pub fn gaussian_kernel(a: &[f64], b: &[f64], sigma: f64) -> Result<f64> {
    check_dims(a, b, "embedding")?;
    if !(sigma > 0.0) {
        return Err(Error::Parameter(format!("sigma must be > 0, got {sigma}")));
    }
    Ok((-sq_dist(a, b) / (2.0 * sigma * sigma)).exp())
}

/// Median pairwise Euclidean distance; 1.0 when it is zero or undefined.
pub fn median_bandwidth(cloud: &PointCloud) -> f64 {
    let n = cloud.len();
    let mut d = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            d.push(sq_dist(cloud.row(i), cloud.row(j)).sqrt());
        }
    }
    match crate::stats::median(&mut d) {
        Some(m) if m > 0.0 => m,
        _ => 1.0,
    }
}
