//! Gradients of the topological-contrastive losses with respect to point
//! coordinates, and the per-sample topological features built from them.
//!
//! Every finite birth or death value is the length of a recorded critical
//! edge, so the loss is a sparse function of pairwise distances. Reverse mode
//! accumulates `dL/d(birth)` and `dL/d(death)` per pair, then pushes each
//! through `d|x_i - x_j| / dx_i = (x_i - x_j) / |x_i - x_j|`. The reference
//! diagram is a constant.

use std::f64::consts::PI;
use std::ops::Range;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::persistence::{vr_persistence, PersistenceDiagram, PersistencePair};
use crate::pointcloud::{pairwise_distances, DistanceMatrix, PointCloud};
use crate::tcloss::{tc_loss, total_persistence, TcMethod, TcParams};

/// Critical edges shorter than this cannot carry a gradient.
const DEGENERATE_EDGE: f64 = 1e-12;

/// Gradient rows of the examined batch.
#[derive(Debug, Clone, PartialEq)]
pub struct TopoFeatures {
    pub grads: PointCloud,
    /// Rows of the stacked cloud the features were read from.
    pub batch_rows: Range<usize>,
    pub method: TcMethod,
}

/// Loss value and its gradient (`n x d`, row-major) with respect to the
/// coordinates of `cloud`.
pub fn tc_loss_and_gradient(
    cloud: &PointCloud,
    reference: &PersistenceDiagram,
    params: &TcParams,
) -> Result<(f64, Vec<f64>)> {
    params.validate()?;
    let dist = pairwise_distances(cloud);
    let diagram = vr_persistence(&dist, params.max_dim)?;
    let loss = tc_loss(&diagram, reference, params)?;

    let mut grad = vec![0.0; cloud.len() * cloud.dim()];
    let coeffs = pair_coefficients(&diagram, reference, params)?;
    for (pair, d_birth, d_death) in coeffs {
        if let Some((i, j)) = pair.birth_edge {
            push_edge(cloud, &dist, i, j, d_birth, &mut grad)?;
        }
        if let Some((i, j)) = pair.death_edge {
            push_edge(cloud, &dist, i, j, d_death, &mut grad)?;
        }
    }
    Ok((loss, grad))
}

/// Gradient of the loss between `cloud` and the fixed reference diagram.
pub fn tc_gradient(
    cloud: &PointCloud,
    reference: &PersistenceDiagram,
    params: &TcParams,
) -> Result<PointCloud> {
    let (_, grad) = tc_loss_and_gradient(cloud, reference, params)?;
    PointCloud::new(cloud.len(), cloud.dim(), grad)
}

/// `(pair, dL/dbirth, dL/ddeath)` for every finite pair of `diagram` that
/// enters the loss.
fn pair_coefficients<'a>(
    diagram: &'a PersistenceDiagram,
    reference: &PersistenceDiagram,
    params: &TcParams,
) -> Result<Vec<(&'a PersistencePair, f64, f64)>> {
    let mut out = Vec::new();
    for dim in 0..=params.max_dim {
        match params.method {
            TcMethod::Tp => {
                let diff = total_persistence(diagram, dim, params.alpha)
                    - total_persistence(reference, dim, params.alpha);
                // subgradient 0 at the kink of |.|
                let sign = if diff > 0.0 {
                    1.0
                } else if diff < 0.0 {
                    -1.0
                } else {
                    continue;
                };
                for p in diagram.finite(dim) {
                    let pers = p.persistence();
                    let g = if params.alpha == 1.0 {
                        1.0
                    } else if pers > 0.0 {
                        params.alpha * pers.powf(params.alpha - 1.0)
                    } else if params.alpha > 1.0 {
                        0.0
                    } else {
                        let (i, j) = p.death_edge.unwrap_or((0, 0));
                        return Err(Error::Degenerate { i, j });
                    };
                    out.push((p, -sign * g, sign * g));
                }
            }
            TcMethod::Mk => {
                let sigma = params.sigma;
                let scale = 1.0 / (8.0 * PI * sigma) / (4.0 * sigma);
                let refs: Vec<&PersistencePair> = reference.finite(dim).collect();
                if refs.is_empty() {
                    continue;
                }
                for p in diagram.finite(dim) {
                    let (mut gb, mut gd) = (0.0, 0.0);
                    for q in &refs {
                        let (ub, ud) = (p.birth - q.birth, p.death - q.death);
                        let (wb, wd) = (p.birth - q.death, p.death - q.birth);
                        let en = (-(ub * ub + ud * ud) / (8.0 * sigma)).exp();
                        let em = (-(wb * wb + wd * wd) / (8.0 * sigma)).exp();
                        gb += -ub * en + wb * em;
                        gd += -ud * en + wd * em;
                    }
                    out.push((p, gb * scale, gd * scale));
                }
            }
        }
    }
    Ok(out)
}

fn push_edge(
    cloud: &PointCloud,
    dist: &DistanceMatrix,
    i: usize,
    j: usize,
    coeff: f64,
    grad: &mut [f64],
) -> Result<()> {
    if coeff == 0.0 {
        return Ok(());
    }
    let len = dist.get(i, j);
    if len <= DEGENERATE_EDGE {
        return Err(Error::Degenerate { i, j });
    }
    let d = cloud.dim();
    let (a, b) = (cloud.row(i), cloud.row(j));
    for k in 0..d {
        let g = coeff * (a[k] - b[k]) / len;
        grad[i * d + k] += g;
        grad[j * d + k] -= g;
    }
    Ok(())
}

fn check_inputs(batch: &PointCloud, holdout: &PointCloud, text: &PointCloud) -> Result<()> {
    if batch.is_empty() || holdout.is_empty() || text.is_empty() {
        return Err(Error::InvalidInput("batch, hold-out and text clouds must be non-empty".into()));
    }
    if batch.dim() != holdout.dim() {
        return Err(Error::InvalidInput(format!(
            "batch has dimension {}, hold-out has {}",
            batch.dim(),
            holdout.dim()
        )));
    }
    Ok(())
}

/// Persistence diagram of the text-side cloud at the depth the loss needs.
pub fn reference_diagram(text: &PointCloud, params: &TcParams) -> Result<PersistenceDiagram> {
    params.validate()?;
    vr_persistence(&pairwise_distances(text), params.max_dim)
}

/// Batch features: one filtration on `batch ∪ holdout` (batch rows first);
/// the gradient rows of the batch are returned.
pub fn batch_features(
    batch: &PointCloud,
    holdout: &PointCloud,
    text: &PointCloud,
    params: &TcParams,
) -> Result<TopoFeatures> {
    check_inputs(batch, holdout, text)?;
    let reference = reference_diagram(text, params)?;
    batch_features_with_reference(batch, holdout, &reference, params)
}

/// [`batch_features`] with a precomputed text-side diagram.
pub fn batch_features_with_reference(
    batch: &PointCloud,
    holdout: &PointCloud,
    reference: &PersistenceDiagram,
    params: &TcParams,
) -> Result<TopoFeatures> {
    let stacked = batch.concat(holdout)?;
    let (_, grad) = tc_loss_and_gradient(&stacked, reference, params)?;
    let rows = batch.len() * batch.dim();
    Ok(TopoFeatures {
        grads: PointCloud::new(batch.len(), batch.dim(), grad[..rows].to_vec())?,
        batch_rows: 0..batch.len(),
        method: params.method,
    })
}

/// Exact features: row `i` is the gradient of the loss of `{y_i} ∪ holdout`
/// with respect to `y_i`. One filtration per sample.
pub fn exact_features(
    batch: &PointCloud,
    holdout: &PointCloud,
    text: &PointCloud,
    params: &TcParams,
) -> Result<TopoFeatures> {
    check_inputs(batch, holdout, text)?;
    let reference = reference_diagram(text, params)?;
    let rows: Vec<Vec<f64>> = (0..batch.len())
        .into_par_iter()
        .map(|i| {
            let single = batch.select(&[i])?;
            let f = batch_features_with_reference(&single, holdout, &reference, params)?;
            Ok(f.grads.into_vec())
        })
        .collect::<Result<_>>()?;
    Ok(TopoFeatures {
        grads: PointCloud::new(batch.len(), batch.dim(), rows.concat())?,
        batch_rows: 0..batch.len(),
        method: params.method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(rows: &[&[f64]]) -> PointCloud {
        PointCloud::from_rows(rows).unwrap()
    }

    #[test]
    fn two_points_against_reference_of_persistence_two() {
        let x = cloud(&[&[0.0], &[5.0]]);
        let t = cloud(&[&[0.0], &[2.0]]);
        let params = TcParams::tp(1.0, 0);
        let reference = reference_diagram(&t, &params).unwrap();
        let (loss, g) = tc_loss_and_gradient(&x, &reference, &params).unwrap();
        assert_eq!(loss, 3.0);
        assert_eq!(g, vec![-1.0, 1.0]);
    }

    #[test]
    fn gradient_vanishes_against_own_diagram() {
        let x = cloud(&[&[0.0, 0.0], &[1.0, 0.2], &[0.3, 2.0], &[1.7, 1.1]]);
        let params = TcParams::tp(1.0, 1);
        let reference = reference_diagram(&x, &params).unwrap();
        let g = tc_gradient(&x, &reference, &params).unwrap();
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn batch_rows_only() {
        let y = cloud(&[&[0.0, 0.0], &[3.0, 1.0]]);
        let z = cloud(&[&[1.0, 0.5], &[2.0, 2.0], &[5.0, 0.0], &[4.0, 4.0]]);
        let t = cloud(&[&[0.0, 0.0], &[0.5, 0.0]]);
        let f = batch_features(&y, &z, &t, &TcParams::tp(1.0, 0)).unwrap();
        assert_eq!(f.grads.len(), 2);
        assert_eq!(f.grads.dim(), 2);
        assert_eq!(f.batch_rows, 0..2);
    }

    #[test]
    fn duplicate_of_holdout_point_is_degenerate() {
        let y = cloud(&[&[1.0, 1.0]]);
        let z = cloud(&[&[1.0, 1.0], &[3.0, 0.0], &[0.0, 4.0]]);
        let t = cloud(&[&[0.0, 0.0], &[0.5, 0.0]]);
        let err = batch_features(&y, &z, &t, &TcParams::tp(1.0, 0)).unwrap_err();
        assert!(matches!(err, Error::Degenerate { i: 0, j: 1 }));
    }

    #[test]
    fn empty_inputs_rejected_by_constructor() {
        assert!(PointCloud::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn single_sample_exact_equals_batch() {
        let y = cloud(&[&[0.4, 0.1]]);
        let z = cloud(&[&[1.0, 0.5], &[2.0, 2.1], &[5.0, 0.3], &[4.0, 4.0]]);
        let t = cloud(&[&[0.0, 0.0], &[0.5, 0.0], &[0.0, 0.7]]);
        for params in [TcParams::tp(1.0, 1), TcParams::mk(0.5, 1)] {
            let a = batch_features(&y, &z, &t, &params).unwrap();
            let b = exact_features(&y, &z, &t, &params).unwrap();
            assert_eq!(a, b);
        }
    }
}
