//! Topological-contrastive losses between two persistence diagrams: the
//! total-persistence (TP) loss and the multi-scale kernel (MK) loss.
//!
//! Essential classes never enter either sum; `(d - b)^alpha` would diverge.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::persistence::{PersistenceDiagram, PersistencePair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TcMethod {
    Tp,
    Mk,
}

impl fmt::Display for TcMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TcMethod::Tp => "tp",
            TcMethod::Mk => "mk",
        })
    }
}

impl FromStr for TcMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tp" => Ok(TcMethod::Tp),
            "mk" => Ok(TcMethod::Mk),
            other => Err(Error::Parse(format!("unknown loss method `{other}` (tp|mk)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TcParams {
    pub method: TcMethod,
    /// Order of the total persistence.
    pub alpha: f64,
    /// Scale of the multi-scale kernel.
    pub sigma: f64,
    /// Dimensions `0..=max_dim` enter the loss.
    pub max_dim: usize,
}

impl Default for TcParams {
    fn default() -> Self {
        Self {
            method: TcMethod::Tp,
            alpha: 1.0,
            sigma: 1.0,
            max_dim: 1,
        }
    }
}

impl TcParams {
    pub fn tp(alpha: f64, max_dim: usize) -> Self {
        Self {
            method: TcMethod::Tp,
            alpha,
            max_dim,
            ..Self::default()
        }
    }

    pub fn mk(sigma: f64, max_dim: usize) -> Self {
        Self {
            method: TcMethod::Mk,
            sigma,
            max_dim,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Parameter(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Parameter(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if self.max_dim > crate::persistence::MAX_SUPPORTED_DIM {
            return Err(Error::UnsupportedDimension(self.max_dim));
        }
        Ok(())
    }
}

/// Sum of `(death - birth)^alpha` over the finite pairs of dimension `dim`.
pub fn total_persistence(diagram: &PersistenceDiagram, dim: usize, alpha: f64) -> f64 {
    diagram
        .finite(dim)
        .map(|p| p.persistence().powf(alpha))
        .sum()
}

fn check_coverage(x: &PersistenceDiagram, y: &PersistenceDiagram, max_dim: usize) -> Result<()> {
    let available = x.max_dim().min(y.max_dim());
    if available < max_dim {
        return Err(Error::DimensionCoverage {
            requested: max_dim,
            available,
        });
    }
    Ok(())
}

/// `sum_i |Pers_i(X) - Pers_i(Y)|` over `i = 0..=max_dim`.
pub fn tp_loss(x: &PersistenceDiagram, y: &PersistenceDiagram, params: &TcParams) -> Result<f64> {
    params.validate()?;
    check_coverage(x, y, params.max_dim)?;
    Ok((0..=params.max_dim)
        .map(|i| (total_persistence(x, i, params.alpha) - total_persistence(y, i, params.alpha)).abs())
        .sum())
}

#[inline]
fn mk_term(p: &PersistencePair, q: &PersistencePair, sigma: f64) -> f64 {
    let (pb, pd, qb, qd) = (p.birth, p.death, q.birth, q.death);
    let near = (pb - qb).powi(2) + (pd - qd).powi(2);
    let mirror = (pb - qd).powi(2) + (pd - qb).powi(2);
    (-near / (8.0 * sigma)).exp() - (-mirror / (8.0 * sigma)).exp()
}

/// Multi-scale kernel between the finite dimension-`dim` parts of two
/// diagrams:
/// `1/(8 pi sigma) * sum_{p, q} exp(-|p - q|^2 / 8 sigma) - exp(-|p - q'|^2 / 8 sigma)`
/// where `q'` is `q` mirrored through the diagonal.
pub fn multiscale_kernel(
    x: &PersistenceDiagram,
    y: &PersistenceDiagram,
    dim: usize,
    sigma: f64,
) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Parameter(format!("sigma must be > 0, got {sigma}")));
    }
    let mut xs: Vec<&PersistencePair> = x.finite(dim).collect();
    let mut ys: Vec<&PersistencePair> = y.finite(dim).collect();
    // fixed summation order keeps k(x, y) and k(y, x) bitwise equal
    let key = |v: &[&PersistencePair]| -> Vec<(u64, u64)> {
        v.iter().map(|p| (p.birth.to_bits(), p.death.to_bits())).collect()
    };
    if (xs.len(), key(&xs)) > (ys.len(), key(&ys)) {
        std::mem::swap(&mut xs, &mut ys);
    }
    let mut sum = 0.0;
    for p in &xs {
        for q in &ys {
            sum += mk_term(p, q, sigma);
        }
    }
    Ok(sum / (8.0 * PI * sigma))
}

/// `sum_i k_sigma(D_i(X), D_i(Y))` over `i = 0..=max_dim`.
pub fn mk_loss(x: &PersistenceDiagram, y: &PersistenceDiagram, params: &TcParams) -> Result<f64> {
    params.validate()?;
    check_coverage(x, y, params.max_dim)?;
    let mut total = 0.0;
    for i in 0..=params.max_dim {
        let k = multiscale_kernel(x, y, i, params.sigma)?;
        // both diagrams sit on or above the diagonal, so every term is >= 0
        assert!(k >= -1e-9, "multi-scale kernel evaluated to {k} < 0");
        total += k;
    }
    Ok(total)
}

/// Dispatches on `params.method`.
pub fn tc_loss(x: &PersistenceDiagram, y: &PersistenceDiagram, params: &TcParams) -> Result<f64> {
    match params.method {
        TcMethod::Tp => tp_loss(x, y, params),
        TcMethod::Mk => mk_loss(x, y, params),
    }
}

/// Median heuristic for the MK scale: median squared distance between the
/// finite points of the two diagrams in dimension `dim`, divided by 8.
/// `None` when either side has no finite points or the median is zero.
pub fn median_heuristic_sigma(
    x: &PersistenceDiagram,
    y: &PersistenceDiagram,
    dim: usize,
) -> Option<f64> {
    let ys: Vec<&PersistencePair> = y.finite(dim).collect();
    let mut sq: Vec<f64> = x
        .finite(dim)
        .flat_map(|p| {
            ys.iter()
                .map(move |q| (p.birth - q.birth).powi(2) + (p.death - q.death).powi(2))
        })
        .collect();
    let m = crate::stats::median(&mut sq)?;
    (m > 0.0).then_some(m / 8.0)
}
