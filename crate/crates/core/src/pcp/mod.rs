//! Poisson-cluster-process model of logits on a `K`-simplex.
//!
//! Cluster `i` sits at vertex `v_i`; each of its points is `sum_j lambda_j v_j`
//! with `lambda ~ Dirichlet(alpha_small, ..., alpha_large (at i), ..., alpha_small)`.
//! The model is parameterized by `alpha_small` and `ratio = alpha_total /
//! alpha_small`, so `alpha_large = alpha_small * (ratio - K)`.

mod dirichlet;

pub use dirichlet::{dirichlet_mle, mean_log_likelihood, sample_dirichlet, DirichletFit};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::persistence::mst_h0;
use crate::pointcloud::{pairwise_distances, PointCloud};
use crate::rng::substream;
use crate::stats;

#[derive(Debug, Clone, PartialEq)]
pub struct PcpParams {
    /// Simplex dimension; there are `k + 1` clusters.
    pub k: usize,
    pub alpha_small: f64,
    pub ratio: f64,
    pub points_per_cluster: Vec<usize>,
    pub seed: u64,
}

impl PcpParams {
    /// `n` points split evenly across the `k + 1` clusters, the first
    /// clusters taking the remainder.
    pub fn even(k: usize, alpha_small: f64, ratio: f64, n: usize, seed: u64) -> Self {
        let c = k + 1;
        let points_per_cluster = (0..c).map(|i| n / c + usize::from(i < n % c)).collect();
        Self {
            k,
            alpha_small,
            ratio,
            points_per_cluster,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidInput(format!("simplex dimension must be >= 1, got {}", self.k)));
        }
        if !(self.alpha_small > 0.0 && self.alpha_small.is_finite()) {
            return Err(Error::Parameter(format!("alpha_small must be > 0, got {}", self.alpha_small)));
        }
        if !(self.ratio > self.k as f64) || !self.ratio.is_finite() {
            return Err(Error::Parameter(format!(
                "ratio must exceed K = {} so that alpha_large > 0, got {}",
                self.k, self.ratio
            )));
        }
        if self.points_per_cluster.len() != self.k + 1 {
            return Err(Error::InvalidInput(format!(
                "expected {} cluster sizes, got {}",
                self.k + 1,
                self.points_per_cluster.len()
            )));
        }
        Ok(())
    }

    pub fn alpha_total(&self) -> f64 {
        self.alpha_small * self.ratio
    }

    pub fn alpha_large(&self) -> f64 {
        self.alpha_small * (self.ratio - self.k as f64)
    }

    /// Dirichlet parameter vector of cluster `i`.
    pub fn cluster_alpha(&self, i: usize) -> Vec<f64> {
        let mut a = vec![self.alpha_small; self.k + 1];
        a[i] = self.alpha_large();
        a
    }

    /// Closed-form mean and variance of the barycentric coordinates of a
    /// cluster point: `(mean_own, var_own, mean_other, var_other)`.
    pub fn lambda_moments(&self) -> (f64, f64, f64, f64) {
        let total = self.alpha_total();
        let large = self.alpha_large() / total;
        let small = self.alpha_small / total;
        (
            large,
            large * (1.0 - large) / (total + 1.0),
            small,
            small * (1.0 - small) / (total + 1.0),
        )
    }
}

/// Vertices of a `K`-simplex in `R^K`, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Simplex {
    vertices: PointCloud,
}

impl Simplex {
    pub fn vertices(&self) -> &PointCloud {
        &self.vertices
    }

    pub fn k(&self) -> usize {
        self.vertices.dim()
    }

    /// `sum_i lambda_i v_i`.
    pub fn barycentric_to_point(&self, lambda: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.k()];
        for (l, v) in lambda.iter().zip(self.vertices.rows()) {
            for (xi, vi) in x.iter_mut().zip(v) {
                *xi += l * vi;
            }
        }
        x
    }
}

/// Regular simplex with unit edges: `v_0` at the origin and each next vertex
/// above the centroid of the previous ones along a fresh axis.
pub fn standard_simplex(k: usize) -> Result<Simplex> {
    if k < 1 {
        return Err(Error::InvalidInput(format!("simplex dimension must be >= 1, got {k}")));
    }
    let mut verts = vec![vec![0.0; k]];
    for m in 1..=k {
        let mut c = vec![0.0; k];
        for v in &verts {
            for (ci, vi) in c.iter_mut().zip(v) {
                *ci += vi / m as f64;
            }
        }
        // circumradius of the regular (m-1)-simplex with unit edges
        let r2 = (m as f64 - 1.0) / (2.0 * m as f64);
        c[m - 1] = (1.0 - r2).sqrt();
        verts.push(c);
    }
    Ok(Simplex {
        vertices: PointCloud::from_rows(&verts)?,
    })
}

/// A sampled process: points, their cluster labels and barycentric coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PcpSample {
    pub cloud: PointCloud,
    pub labels: Vec<usize>,
    pub barycentric: Vec<Vec<f64>>,
}

/// Draws every cluster in turn from one stream seeded by `params.seed`.
pub fn sample_pcp(params: &PcpParams, simplex: &Simplex) -> Result<PcpSample> {
    params.validate()?;
    if simplex.k() != params.k {
        return Err(Error::InvalidInput(format!(
            "simplex has dimension {}, parameters expect {}",
            simplex.k(),
            params.k
        )));
    }
    let total: usize = params.points_per_cluster.iter().sum();
    if total == 0 {
        return Err(Error::InvalidInput("no points requested".into()));
    }
    let mut rng = substream(params.seed, 0);
    let mut labels = Vec::with_capacity(total);
    let mut barycentric = Vec::with_capacity(total);
    let mut data = Vec::with_capacity(total * params.k);
    for (i, &count) in params.points_per_cluster.iter().enumerate() {
        let alpha = params.cluster_alpha(i);
        for _ in 0..count {
            let lambda = sample_dirichlet(&alpha, &mut rng);
            data.extend(simplex.barycentric_to_point(&lambda));
            barycentric.push(lambda);
            labels.push(i);
        }
    }
    Ok(PcpSample {
        cloud: PointCloud::new(total, params.k, data)?,
        labels,
        barycentric,
    })
}

/// Same as [`sample_pcp`] but the points are interleaved by cluster
/// (`0, 1, ..., K, 0, 1, ...`), so row `r` belongs to cluster `r mod (K+1)`
/// whenever the split is even. Pairs rows of two processes by label.
pub fn sample_pcp_interleaved(params: &PcpParams, simplex: &Simplex) -> Result<PcpSample> {
    let s = sample_pcp(params, simplex)?;
    let mut order: Vec<usize> = (0..s.labels.len()).collect();
    let mut seen = vec![0usize; params.k + 1];
    let mut rank = vec![0usize; s.labels.len()];
    for (r, &l) in s.labels.iter().enumerate() {
        rank[r] = seen[l];
        seen[l] += 1;
    }
    order.sort_by_key(|&r| (rank[r], s.labels[r]));
    Ok(PcpSample {
        cloud: s.cloud.select(&order)?,
        labels: order.iter().map(|&r| s.labels[r]).collect(),
        barycentric: order.iter().map(|&r| s.barycentric[r].clone()).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MstCell {
    pub alpha_small: f64,
    pub ratio: f64,
    pub mean_mst: f64,
    pub std_mst: f64,
    pub reps: usize,
    #[serde(skip)]
    pub lengths: Vec<f64>,
}

/// Monte Carlo MST lengths of PCP clouds over a grid of
/// `(alpha_small, ratio)`. Cell `c`, replicate `r` uses the seed stream
/// `(seed, c * reps + r)`.
pub fn mst_length_study(
    grid: &[(f64, f64)],
    n_points: usize,
    k: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<MstCell>> {
    if reps < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 replicates, got {reps}")));
    }
    let simplex = standard_simplex(k)?;
    grid.iter()
        .enumerate()
        .map(|(c, &(alpha_small, ratio))| {
            let lengths: Vec<f64> = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let unit = (c * reps + r) as u64;
                    let rep_seed = crate::rng::child_seed(seed, unit);
                    let p = PcpParams::even(k, alpha_small, ratio, n_points, rep_seed);
                    let s = sample_pcp(&p, &simplex)?;
                    Ok(mst_h0(&pairwise_distances(&s.cloud)).total_length)
                })
                .collect::<Result<_>>()?;
            Ok(MstCell {
                alpha_small,
                ratio,
                mean_mst: stats::mean(&lengths),
                std_mst: stats::std_dev(&lengths),
                reps,
                lengths,
            })
        })
        .collect()
}
